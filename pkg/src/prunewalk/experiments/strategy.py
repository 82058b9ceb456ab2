"""Replay of the loop-by-loop revelation strategy on sampled walks.

A walk of length 2n stands in for the infinite walk when computing the
skeleton and the segment boundaries N^{-1}(k), k <= u_n + 1.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .. import _kernels as K
from ..lattice import LoopFamily, path_from_codes
from ..parallel import map_indexed
from ..prune import matcher
from ..segments import boundary_scan, es_of_segment, induced_decomposition
from ..srw import BudgetExceeded, ConfigError, WalkConfig, generate_codes


def ball_size(d: int, r: int) -> int:
    """Number of lattice points at l1 distance <= r from 0."""
    return sum(1 for y in product(range(-r, r + 1), repeat=d) if sum(map(abs, y)) <= r)


@dataclass(frozen=True)
class StrategyParams:
    n: int
    beta: float
    kappa_hat: float
    alpha_hat: float
    delta: float | None = None
    a: float = 0.8

    def __post_init__(self):
        if self.n < 2:
            raise ConfigError("n must be at least 2")
        if not 0 < self.beta <= 1:
            raise ConfigError("beta must lie in (0, 1]")
        if not 0 < self.kappa_hat <= 1:
            raise ConfigError("kappa_hat must lie in (0, 1]")
        if not 0 < self.a < 1:
            raise ConfigError("a must lie in (0, 1)")

    @property
    def delta_(self) -> float:
        return self.kappa_hat / 2 if self.delta is None else self.delta

    @property
    def Lambda(self) -> int:
        return int(math.floor(self.beta * self.alpha_hat * math.log(self.n)))

    @property
    def u_n(self) -> int:
        return int(math.floor(self.kappa_hat * self.n + self.delta_ * self.n**self.a))

    @property
    def T_cap(self) -> int:
        return int(math.floor(self.n + self.n**self.a))

    def to_json(self) -> dict:
        return {"n": self.n, "beta": self.beta, "kappa_hat": self.kappa_hat, "alpha_hat": self.alpha_hat,
                "delta": self.delta_, "a": self.a, "Lambda": self.Lambda, "u_n": self.u_n}


@dataclass
class StrategyRun:
    index: int
    n: int
    beta: float
    Lambda: int
    u_n: int
    T: int
    skeleton_max: int
    xi_star_T: int
    hot_sites: int
    exc: list  # lexicographically sorted (i, v) pairs
    G: bool
    verified: bool
    first_critical: list  # (x, i, v, local time) at the first critical pair of x
    first_critical_failures: list
    N_bound: dict = field(default_factory=dict)
    distinct_times: bool = True

    @property
    def N_n(self) -> int:
        return len(self.exc)

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "Lambda": self.Lambda,
            "u_n": self.u_n,
            "T": self.T,
            "skeleton_max": self.skeleton_max,
            "xi_star_T": self.xi_star_T,
            "hot_sites": self.hot_sites,
            "N_n": self.N_n,
            "G": self.G,
            "verified": self.verified,
            "first_critical": len(self.first_critical),
            "first_critical_failures": [list(map(_plain, f)) for f in self.first_critical_failures],
            "N_bound": self.N_bound,
            "distinct_times": self.distinct_times,
        }


def _plain(x):
    if isinstance(x, tuple):
        return [_plain(y) for y in x]
    return int(x) if isinstance(x, (np.integer, int)) else x


def _boundary_data(E: LoopFamily, codes: tuple, cache: dict):
    """(v, Next, explored path points relative to the base, tau_exp) per
    boundary address, in lexicographic order of v."""
    got = cache.get(codes)
    if got is None:
        eta = path_from_codes(list(codes), E.d)
        W = es_of_segment(eta, E)
        got = []
        for b in sorted(boundary_scan(W, E), key=lambda b: b.v):
            dec = induced_decomposition(eta, E, b.v)
            got.append((b.v, b.next, np.array(dec.eta_exp.points, np.int64), dec.tau_exp))
        cache[codes] = got
    return got


def _key(p) -> int:
    return int(K.site_keys(np.asarray(p, np.int64).reshape(1, -1))[0])


def strategy_run(E: LoopFamily, params: StrategyParams, index: int = 0, seed: int = 0,
                 cache: dict | None = None) -> StrategyRun:
    """One replay: exceptional pairs, the strategy event and its consequences."""
    if not E.walk_compatible:
        raise ConfigError("strategy replay needs a nearest-neighbour loop family")
    cache = {} if cache is None else cache
    n, Lam, u = params.n, params.Lambda, params.u_n
    d = E.d
    cfg = WalkConfig(d=d, seed=seed, horizon=2 * n)
    cfg.require_transient()
    codes = generate_codes(cfg, index, "strategy", 2 * n)
    height = K.prune_scan(codes, *matcher(E).args)[0]
    Nn = np.minimum.accumulate(height[::-1])[::-1]
    if Nn[-1] < u + 1:
        raise BudgetExceeded(f"run {index}: skeleton of {int(Nn[-1])} steps does not reach u_n + 1 = {u + 1}")
    inv = np.searchsorted(Nn, np.arange(u + 2), side="left")
    T = int(inv[u + 1]) - 1
    pts = K.walk_points(codes, d)
    keys = K.site_keys(pts)

    visits: dict = defaultdict(list)
    kT = keys[:T + 1]
    uniq, counts = np.unique(kT, return_counts=True)
    xi_star_T = int(counts.max())
    hot = set(int(k) for k in uniq[counts >= Lam])

    skel_keys = keys[inv[:u + 1]]
    su, sc = np.unique(skel_keys, return_counts=True)
    skeleton_max = int(sc.max())

    # bound on the number of exceptional pairs via the hot-site neighbourhood
    cap = params.T_cap
    kc = keys[:min(cap, len(keys) - 1) + 1]
    cu, cc = np.unique(kc, return_counts=True)
    A_n = cu[cc >= Lam]
    bsize = ball_size(d, E.D_E)
    xi_cap = int(cc.max())

    offsets = [np.array(p, np.int64) for e in E.loops for p in e.points[1:]]
    ball = [np.array(y, np.int64) for y in product(range(-E.D_E, E.D_E + 1), repeat=d) if sum(map(abs, y)) <= E.D_E]

    exc = []
    exc_times = []
    first: dict = {}
    fails = []
    if hot:
        hot_pts = {}
        for t in np.nonzero(np.isin(kT, list(hot)))[0]:
            visits[int(kT[t])].append(int(t))
            hot_pts.setdefault(int(kT[t]), pts[t])
        skel_idx: dict = defaultdict(list)
        for k in range(u + 1):
            kk = int(skel_keys[k])
            if kk in hot:
                skel_idx[kk].append(k)
        near = set()
        for x in hot_pts.values():
            for o in offsets:
                near.add(_key(x - o))
        flagged = np.isin(kT, list(near))
        fl_cum = np.concatenate([[0], np.cumsum(flagged)])
        for i in range(u + 1):
            a, b = int(inv[i]), int(inv[i + 1])  # segment i spans times a..b-1
            if fl_cum[b] - fl_cum[a] == 0:
                continue
            base = pts[a]
            for v, nxt, eta_exp, tau in _boundary_data(E, tuple(codes[a:b - 1].tolist()), cache):
                ej = base + eta_exp[tau]
                crit = []
                for o in offsets:
                    x = ej + o
                    kx = _key(x)
                    if kx not in hot:
                        continue
                    A = bisect_right(visits[kx], a)
                    seg = (base + eta_exp[1:] == x).all(axis=1).sum()
                    C = len(skel_idx[kx]) - bisect_right(skel_idx[kx], i)
                    ell = A + int(seg) + C
                    if ell >= Lam:
                        crit.append((kx, tuple(int(c) for c in x), ell))
                if crit:
                    exc.append((i, v, nxt))
                    exc_times.append(a + tau)
                    for kx, x, ell in crit:
                        if kx not in first:
                            first[kx] = (x, i, v, ell)
                            if skeleton_max <= Lam and ell != Lam:
                                fails.append((x, i, v, ell))
    G = skeleton_max <= Lam and all(nxt == 0 for _, _, nxt in exc)
    verified = (not G) or xi_star_T <= Lam
    # neighbourhood count and its cruder bound, on {T <= n + n^a}
    nb = {}
    if T <= cap:
        near_A = set()
        for kx in A_n:
            x = pts[int(np.nonzero(kc == kx)[0][0])]
            for y in ball:
                near_A.add(_key(x + y))
        middle = int(np.isin(kc, list(near_A)).sum()) if near_A else 0
        nb = {"N_n": len(exc), "neighbourhood": middle, "bound": bsize * xi_cap * len(A_n),
              "ok": len(exc) <= middle <= bsize * xi_cap * len(A_n)}
    return StrategyRun(index, n, params.beta, Lam, u, T, skeleton_max, xi_star_T, len(hot),
                       [(i, v) for i, v, _ in exc], G, verified, sorted(first.values()), fails, nb,
                       len(set(exc_times)) == len(exc_times))


@dataclass
class StrategySummary:
    params: StrategyParams
    runs: list
    budget_failures: list

    @property
    def G_count(self) -> int:
        return sum(r.G for r in self.runs)

    @property
    def soundness_failures(self) -> list:
        return [r.index for r in self.runs if not r.verified]

    @property
    def critical_detections(self) -> int:
        return sum(len(r.first_critical) for r in self.runs)

    @property
    def first_critical_failures(self) -> list:
        return [(r.index, f) for r in self.runs for f in r.first_critical_failures]

    @property
    def bound_failures(self) -> list:
        return [r.index for r in self.runs if r.N_bound and not r.N_bound["ok"]]

    @property
    def time_failures(self) -> list:
        return [r.index for r in self.runs if not r.distinct_times]

    def to_json(self) -> dict:
        return {
            "params": self.params.to_json(),
            "runs": len(self.runs),
            "G_count": self.G_count,
            "exc_nonempty": sum(1 for r in self.runs if r.exc),
            "critical_detections": self.critical_detections,
            "soundness_failures": self.soundness_failures,
            "first_critical_failures": [[i, _plain(f)] for i, f in self.first_critical_failures],
            "bound_failures": self.bound_failures,
            "time_failures": self.time_failures,
            "budget_failures": self.budget_failures,
            "per_seed": [r.to_json() for r in self.runs],
        }


def strategy_sweep(E: LoopFamily, params: StrategyParams, n_runs: int, seed: int = 0,
                   threads: int | None = None) -> StrategySummary:
    cache: dict = {}

    def one(i):
        try:
            return strategy_run(E, params, i, seed, cache)
        except BudgetExceeded as exc:
            return str(exc)

    out = map_indexed(one, n_runs, threads)
    return StrategySummary(params, [r for r in out if not isinstance(r, str)], [r for r in out if isinstance(r, str)])
