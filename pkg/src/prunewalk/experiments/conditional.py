"""Conditional law of pruned segments given the skeleton, and the
probability that a segment stops at a boundary address."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .. import _kernels as K
from ..lattice import LoopFamily, path_from_codes, path_probability
from ..parallel import BLOCK, map_indexed, rng_for, thread_count
from ..prune import matcher
from ..segments import boundary_scan, enumerate_segments, es_of_segment, fiber_data
from ..srw import BudgetExceeded, ConfigError

WAVE = 8  # blocks per wave; fixed so stopping does not depend on threads


def _block(E: LoopFamily, seed: int, b: int, horizon: int, u: int, max_store: int):
    """One block of walks: list of (skeleton codes, segment code tuples or None)."""
    m = matcher(E)
    skel = np.full((BLOCK, max(u, 1)), -1, np.int64)
    ln = np.zeros((BLOCK, u + 1), np.int64)
    codes = np.zeros((BLOCK, u + 1, max(max_store, 1)), np.int64)
    K.condition_block(rng_for(seed, "condition", b), BLOCK, E.d, horizon, u, max_store, *m.args, skel, ln, codes)
    out = []
    for i in range(BLOCK):
        if ln[i, 0] == -1:
            out.append(None)
            continue
        segs = tuple(tuple(codes[i, k, :ln[i, k]].tolist()) if ln[i, k] >= 0 else None for k in range(u + 1))
        out.append((tuple(skel[i, :u].tolist()), segs))
    return out


def sample_segments(E: LoopFamily, u: int, horizon: int, seed: int, accept, target: int,
                    max_store: int, max_walks: int, threads: int | None = None):
    """Walk records in block order until `target` of them pass `accept`.

    Returns (accepted records, walks used, unsettled skeleton count).
    """
    if u < 0 or horizon < 1:
        raise ConfigError("need u >= 0 and a positive horizon")
    got, used, unsettled = [], 0, 0
    b = 0
    k = thread_count(threads)
    while len(got) < target:
        if used >= max_walks:
            raise BudgetExceeded(f"only {len(got)} of {target} conditioned samples in {used} walks")
        wave = map_indexed(lambda j: _block(E, seed, b + j, horizon, u, max_store), WAVE, k)
        b += WAVE
        for blk in wave:
            for rec in blk:
                used += 1
                if rec is None:
                    unsettled += 1
                elif accept(rec):
                    got.append(rec)
    return got[:target], used, unsettled


def _tv(p: dict, q: dict) -> float:
    keys = set(p) | set(q)
    return 0.5 * sum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in keys)


def admissible_class(E: LoopFamily, prefix_codes: tuple, cap: int) -> dict:
    """Codes of every erasable segment of length <= cap compatible with the
    pruned prefix, with exact weights (2d)^-length."""
    m = matcher(E)
    prefix = path_from_codes(list(prefix_codes), E.d)
    return {tuple(m.encode(s).tolist()): path_probability(s) for s in enumerate_segments(E, cap, prefix)}


def product_law(E: LoopFamily, skeleton: tuple, cap: int) -> dict:
    """Normalized product weights over admissible tuples (xi_0, ..., xi_u)."""
    law = {(): Fraction(1)}
    for k in range(len(skeleton) + 1):
        cls = admissible_class(E, skeleton[:k], cap)
        z = sum(cls.values())
        law = {key + (x,): w * p / z for key, w in law.items() for x, p in cls.items()}
    return law


@dataclass
class SegmentLawReport:
    skeleton: tuple
    cap: int
    horizon: int
    samples: int
    walks: int
    unsettled: int
    tv: float
    atoms: int
    empirical: dict = field(default_factory=dict)
    theory: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "skeleton": list(self.skeleton),
            "cap": self.cap,
            "horizon": self.horizon,
            "samples": self.samples,
            "walks": self.walks,
            "unsettled": self.unsettled,
            "tv": self.tv,
            "atoms": self.atoms,
        }


def _law_sample(E, skeleton, cap, horizon, n_samples, seed, threads, max_walks):
    u = len(skeleton)

    def accept(rec):
        sk, segs = rec
        return sk == skeleton and all(s is not None and len(s) <= cap for s in segs)

    if max_walks is None:
        max_walks = 200 * n_samples * (2 * E.d) ** max(u, 1)
    recs, used, unsettled = sample_segments(E, u, horizon, seed, accept, n_samples, cap, max_walks, threads)
    emp = Counter(segs for _, segs in recs)
    return {k: v / len(recs) for k, v in emp.items()}, used, unsettled


def segment_law_check(E: LoopFamily, skeleton, cap: int = 2, horizon: int = 200, n_samples: int = 100_000,
                      seed: int = 0, threads: int | None = None, max_walks: int | None = None) -> SegmentLawReport:
    """Empirical law of the first |s'|+1 segments given the skeleton codes s'
    and all lengths <= cap, against the normalized product of walk weights.

    The infinite-future conditioning is replaced by a walk of `horizon` steps.
    """
    skeleton = tuple(int(c) for c in skeleton)
    if len(skeleton) > 2 or cap > 6 or cap < 0:
        raise ConfigError("segment law check supports |s'| <= 2 and cap <= 6")
    theory = {k: float(v) for k, v in product_law(E, skeleton, cap).items()}
    emp, used, unsettled = _law_sample(E, skeleton, cap, horizon, n_samples, seed, threads, max_walks)
    return SegmentLawReport(skeleton, cap, horizon, n_samples, used, unsettled, _tv(emp, theory), len(theory), emp, theory)


def swap_axes(codes: tuple, a: int, b: int) -> tuple:
    perm = {2 * a: 2 * b, 2 * a + 1: 2 * b + 1, 2 * b: 2 * a, 2 * b + 1: 2 * a + 1}
    return tuple(perm.get(c, c) for c in codes)


def symmetry_tv(E: LoopFamily, axis_a: int = 1, axis_b: int = 2, cap: int = 2, horizon: int = 200,
                n_samples: int = 100_000, seed: int = 0, threads: int | None = None) -> float:
    """TV between the conditional segment laws given a one-step skeleton along
    axis a and along axis b, after swapping the two axes in the second."""
    la, _, _ = _law_sample(E, (2 * axis_a,), cap, horizon, n_samples, seed, threads, None)
    lb, _, _ = _law_sample(E, (2 * axis_b,), cap, horizon, n_samples, seed + 1, threads, None)
    lb = {tuple(swap_axes(s, axis_a, axis_b) for s in k): v for k, v in lb.items()}
    return _tv(la, lb)


# ------------------------------------------------------------ stop prob

def capped_denominator(E: LoopFamily, prefix_codes: tuple, cap: int) -> Fraction:
    return sum(admissible_class(E, prefix_codes, cap).values(), Fraction(0))


def catalan_partial_sum(cap: int, d: int = 3) -> Fraction:
    """sum_{k <= cap/2} C_k (2d)^{-2k}: erasable weight for the single
    back-and-forth loop, up to length cap."""
    return sum((Fraction(math.comb(2 * k, k), k + 1) / Fraction((2 * d) ** (2 * k)) for k in range(cap // 2 + 1)),
               Fraction(0))


@dataclass
class AtomStat:
    key: tuple
    hits: int
    stops: int
    analytic: float | None = None

    @property
    def freq(self) -> float:
        return self.stops / self.hits

    @property
    def stderr(self) -> float:
        f = self.freq
        return math.sqrt(max(f * (1 - f), 0.0) / self.hits)

    def to_json(self) -> dict:
        skel, hist, i, h = self.key
        return {
            "skeleton": list(skel),
            "history": [list(s) for s in hist],
            "index": i,
            "v": list(h.v),
            "explored": len(h.explored),
            "hits": self.hits,
            "freq": self.freq,
            "stderr": self.stderr,
            "analytic": self.analytic,
        }


@dataclass
class StopProbReport:
    gamma_hat: float
    threshold: int
    atoms: list
    failures: list
    analytic_failures: list
    samples: int
    walks: int
    horizon: int

    @property
    def ok(self) -> bool:
        return bool(self.atoms) and not self.failures and not self.analytic_failures

    def to_json(self) -> dict:
        return {
            "gamma_hat": self.gamma_hat,
            "threshold": self.threshold,
            "samples": self.samples,
            "walks": self.walks,
            "horizon": self.horizon,
            "atoms": [a.to_json() for a in self.atoms],
            "failures": self.failures,
            "analytic_failures": self.analytic_failures,
        }


def _boundaries(E: LoopFamily, codes: tuple, cache: dict):
    """(fiber data, next) for every boundary address of a segment."""
    got = cache.get(codes)
    if got is None:
        eta = path_from_codes(list(codes), E.d)
        W = es_of_segment(eta, E)
        got = [(fiber_data(eta, E, b.v), b.next) for b in boundary_scan(W, E)]
        cache[codes] = got
    return got


def stop_prob_check(E: LoopFamily, gamma_hat: float, u: int = 1, horizon: int = 200, n_samples: int = 100_000,
                    seed: int = 0, threshold: int = 500, cap: int | None = None, max_store: int = 400,
                    full_mass: float | None = None, threads: int | None = None) -> StopProbReport:
    """Frequency of Next = 0 on conditioning atoms (skeleton, earlier segments,
    segment index, fiber data).

    With ``cap`` the sample is conditioned on all segments having length
    <= cap, and the atom with trivial history gets the exact value
    1 / (capped admissible weight). Without a cap, ``full_mass`` (the total
    admissible weight, if known in closed form) plays that role.
    """
    store = max_store if cap is None else cap

    def accept(rec):
        return all(s is not None and (cap is None or len(s) <= cap) for s in rec[1])

    recs, used, _ = sample_segments(E, u, horizon, seed, accept, n_samples, store,
                                    max_walks=50 * n_samples, threads=threads)
    cache: dict = {}
    hits: Counter = Counter()
    stops: Counter = Counter()
    for skel, segs in recs:
        for i, s in enumerate(segs):
            for h, nxt in _boundaries(E, s, cache):
                key = (skel, segs[:i], i, h)
                hits[key] += 1
                if nxt == 0:
                    stops[key] += 1
    atoms, failures, afail = [], [], []
    for key in sorted(hits, key=lambda k: (-hits[k], repr(k))):
        if hits[key] < threshold:
            continue
        a = AtomStat(key, hits[key], stops[key])
        skel, hist, i, h = key
        if i == 0 and h.pre == 0 and len(h.v) == 1:
            if cap is not None:
                a.analytic = float(1 / capped_denominator(E, (), cap))
            elif full_mass is not None:
                a.analytic = 1.0 / full_mass
        atoms.append(a)
        if a.freq < gamma_hat - 3 * a.stderr:
            failures.append(a.to_json())
        if a.analytic is not None and abs(a.freq - a.analytic) > 3 * max(a.stderr, 1e-12) and a.stderr > 0:
            afail.append(a.to_json())
        if a.analytic is not None and a.stderr == 0 and a.freq != a.analytic:
            afail.append(a.to_json())
    if not atoms:
        raise BudgetExceeded(f"no conditioning atom reached {threshold} hits")
    return StopProbReport(gamma_hat, threshold, atoms, failures, afail, len(recs), used, horizon)
