"""Tails of the local time at the origin of pruned walks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..lattice import LoopFamily
from ..parallel import map_indexed
from ..prune import matcher
from ..segments import enumerate_segments
from ..srw import ConfigError, WalkConfig, generate_codes


def origin_local_times(codes: np.ndarray, E: LoopFamily, marks) -> np.ndarray:
    """l_0 of Prune(S[0, t], E) for each t in the increasing marks."""
    marks = np.asarray(marks, np.int64)
    out = np.zeros(marks.shape[0], np.int64)
    K.origin_visits_pruned(np.ascontiguousarray(codes), *matcher(E).args, int(matcher(E).d), marks, out)
    return out


def origin_visits(codes: np.ndarray, d: int) -> np.ndarray:
    """Times t with S_t = 0, including t = 0."""
    pts = K.walk_points(np.ascontiguousarray(codes), d)
    return np.nonzero(~pts.any(axis=1))[0]


@dataclass
class TailCurve:
    N: int
    rows: list  # (threshold t, P(l_0 > t), stderr)
    values: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"N": self.N, "rows": [list(r) for r in self.rows]}


def survival_rows(values, thresholds) -> list:
    v = np.asarray(values)
    n = v.shape[0]
    rows = []
    for t in thresholds:
        s = float((v > t).mean())
        rows.append((int(t), s, math.sqrt(s * (1 - s) / n)))
    return rows


def pruned_local_time_tail(E: LoopFamily, N: int, n_grid, n_seeds: int, seed: int = 0,
                           thresholds=None, threads: int | None = None) -> list[TailCurve]:
    """Survival curves of l_0(Prune(S[0, n], E)) for each n in n_grid (walk
    prefixes of one length-N walk per seed)."""
    grid = sorted(int(x) for x in n_grid)
    if not grid or grid[0] < 0 or grid[-1] > N:
        raise ConfigError("grid times must lie in [0, N]")
    if n_seeds < 1:
        raise ConfigError("zero seeds")
    cfg = WalkConfig(d=E.d, seed=seed, horizon=N)
    cfg.require_transient()

    def one(i):
        return origin_local_times(generate_codes(cfg, i, "local_time", N), E, grid)

    vals = np.array(map_indexed(one, n_seeds, threads))
    top = int(vals.max()) if vals.size else 0
    th = list(range(0, top + 1)) if thresholds is None else list(thresholds)
    return [TailCurve(n, survival_rows(vals[:, j], th), vals[:, j].tolist()) for j, n in enumerate(grid)]


def identity_baseline(E: LoopFamily, N: int, n_seeds: int, seed: int = 0, threads: int | None = None) -> int:
    """Number of seeds where the pruned local time differs from the raw count
    of visits to 0; zero when nothing in E is traced by the walk."""
    cfg = WalkConfig(d=E.d, seed=seed, horizon=N)

    def one(i):
        codes = generate_codes(cfg, i, "local_time", N)
        return int(origin_local_times(codes, E, [N])[0] != origin_visits(codes, E.d).shape[0])

    return sum(map_indexed(one, n_seeds, threads))


def nested_segments(small: LoopFamily, big: LoopFamily, max_len: int) -> bool:
    """Whether every erasable segment for `small` up to max_len is erasable for `big`."""
    b = {s.points for s in enumerate_segments(big, max_len)}
    return all(s.points in b for s in enumerate_segments(small, max_len))


@dataclass
class DominanceReport:
    nested: bool
    max_len: int
    rows: list  # (t, survival small, survival big, paired stderr)
    worst_z: float

    @property
    def ok(self) -> bool:
        return self.nested and self.worst_z <= 3.0

    def to_json(self) -> dict:
        return {"nested": self.nested, "max_len": self.max_len, "worst_z": self.worst_z,
                "rows": [list(r) for r in self.rows], "ok": self.ok}


def tail_dominance(small: LoopFamily, big: LoopFamily, N: int, n_seeds: int, seed: int = 0,
                   max_len: int = 8, threads: int | None = None) -> DominanceReport:
    """Paired comparison of the survival of l_0 under two nested families.

    The larger family's tail should sit below; the report gives the largest
    excess in units of the paired stderr.
    """
    nested = nested_segments(small, big, max_len)
    cfg = WalkConfig(d=small.d, seed=seed, horizon=N)

    def one(i):
        codes = generate_codes(cfg, i, "local_time", N)
        return int(origin_local_times(codes, small, [N])[0]), int(origin_local_times(codes, big, [N])[0])

    pairs = np.array(map_indexed(one, n_seeds, threads))
    rows = []
    worst = -math.inf
    for t in range(int(pairs.max()) + 1):
        a = (pairs[:, 0] > t).astype(float)
        b = (pairs[:, 1] > t).astype(float)
        diff = b - a
        se = float(diff.std(ddof=1) / math.sqrt(len(diff))) if len(diff) > 1 else 0.0
        ex = float(diff.mean())
        z = ex / se if se > 0 else (0.0 if ex <= 0 else math.inf)
        worst = max(worst, z)
        rows.append((t, float(a.mean()), float(b.mean()), se))
    return DominanceReport(nested, max_len, rows, worst)


# ------------------------------------------------------ excursion bound

@dataclass
class ExcursionBoundReport:
    samples: int
    checked: int
    strong_failures: list
    averaged_checked: dict
    averaged_failures: list

    @property
    def ok(self) -> bool:
        return not self.strong_failures and not self.averaged_failures

    def to_json(self) -> dict:
        return {
            "samples": self.samples,
            "checked": self.checked,
            "strong_failures": self.strong_failures[:20],
            "averaged_checked": {str(k): v for k, v in sorted(self.averaged_checked.items())},
            "averaged_failures": self.averaged_failures[:20],
            "ok": self.ok,
        }


def excursion_bound_check(E: LoopFamily, N: int, n_samples: int, seed: int = 0,
                          etas=(0.1, 0.25, 0.5), threads: int | None = None) -> ExcursionBoundReport:
    """Replay walks of length N and check at every return time tau_k that
    l_0(Prune(S[0, tau_k])) <= F_k + 1, F_k being the number of non-erasable
    excursions among the first k; and the averaged form
    l_0 <= ceil(eta k) whenever the erasable fraction exceeds 1 - eta."""
    cfg = WalkConfig(d=E.d, seed=seed, horizon=N)
    cfg.require_transient()
    m = matcher(E)

    def one(i):
        codes = generate_codes(cfg, i, "excursion", N)
        taus = origin_visits(codes, E.d)
        if taus.shape[0] < 2:
            return []
        ell = origin_local_times(codes, E, taus[1:])
        out = []
        F = 0
        for k in range(1, taus.shape[0]):
            er = K.erasable_codes(codes[taus[k - 1]:taus[k]], *m.args)
            F += 0 if er else 1
            out.append((i, k, int(ell[k - 1]), F))
        return out

    recs = [r for part in map_indexed(one, n_samples, threads) for r in part]
    strong = [r for r in recs if r[2] > r[3] + 1]
    averaged_checked = {eta: 0 for eta in etas}
    averaged_fail = []
    for i, k, ell, F in recs:
        for eta in etas:
            if (k - F) / k > 1 - eta:
                averaged_checked[eta] += 1
                if ell > math.ceil(eta * k):
                    averaged_fail.append((i, k, ell, F, eta))
    return ExcursionBoundReport(n_samples, len(recs), strong, averaged_checked, averaged_fail)
