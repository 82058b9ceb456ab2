"""Loop pruning: the operator, retained-step profile, decomposition, cut steps
and pruning intervals.

The fast paths use an incremental stack: each new step is pushed and, if the
top of the stack now traces a loop of E, that loop is popped. The literal
single-loop removal (``first_loop_time`` / ``prune_once`` / ``prune_literal``)
is kept as a reference implementation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import _kernels as K
from .lattice import (
    LoopFamily,
    Path,
    PathError,
    add,
    concat,
    norm1,
    origin,
    sub,
    trivial_path,
    validate_path,
)

INF = math.inf


class Matcher:
    """Trie over reversed loop step codes.

    Unit steps get codes 0..2d-1 (2*axis for +u, 2*axis+1 for -u) so that
    simulated walks can be fed directly. Other step vectors used by the family
    get further codes; anything else maps to a final catch-all code.
    """

    def __init__(self, E: LoopFamily):
        d = E.d
        self.d = d
        self.code_of: dict = {}
        for axis in range(d):
            for sign in (1, -1):
                v = tuple(sign if i == axis else 0 for i in range(d))
                self.code_of[v] = 2 * axis + (0 if sign == 1 else 1)
        for e in E.loops:
            for st in e.steps():
                if st not in self.code_of:
                    self.code_of[st] = len(self.code_of)
        self.other = len(self.code_of)
        ncodes = self.other + 1
        child = [[-1] * ncodes]
        loop_id = [-1]
        for k, e in enumerate(E.loops):
            node = 0
            for st in reversed(e.steps()):
                c = self.code_of[st]
                if child[node][c] < 0:
                    child[node][c] = len(child)
                    child.append([-1] * ncodes)
                    loop_id.append(-1)
                node = child[node][c]
            loop_id[node] = k
        self.child = np.array(child, dtype=np.int64)
        self.loop_id = np.array(loop_id, dtype=np.int64)
        self.loop_len = np.array([e.length for e in E.loops], dtype=np.int64)
        self.max_drop = max(int(self.loop_len.max()) - 1, 1)

    @property
    def args(self):
        return self.child, self.loop_id, self.loop_len

    def encode(self, s: Path) -> np.ndarray:
        get = self.code_of.get
        return np.array([get(st, self.other) for st in s.steps()], dtype=np.int64)


def matcher(E: LoopFamily) -> Matcher:
    m = E.__dict__.get("_matcher")
    if m is None:
        m = Matcher(E)
        E.__dict__["_matcher"] = m
    return m


def _path_from_indices(s: Path, idx) -> Path:
    return Path(tuple(s.points[i] for i in idx))


# ---------------------------------------------------------------- literal

def first_loop_time(s: Path, E: LoopFamily):
    """Smallest i such that s[i-|e|, i] traces a translate of some e in E.

    Returns (i, label) with a 1-based loop label, or None.
    """
    pts = s.points
    for i in range(1, len(pts)):
        for k, e in enumerate(E.loops):
            L = e.length
            if L > i:
                continue
            base = pts[i - L]
            if all(pts[i - L + q] == add(base, e.points[q]) for q in range(1, L + 1)):
                return i, k + 1
    return None


def prune_once(s: Path, E: LoopFamily) -> Path:
    hit = first_loop_time(s, E)
    if hit is None:
        return s
    tau, label = hit
    L = E[label].length
    return Path(s.points[:tau - L + 1] + s.points[tau + 1:])


def prune_literal(s: Path, E: LoopFamily) -> Path:
    while True:
        nxt = prune_once(s, E)
        if nxt.length == s.length:
            return s
        s = nxt


# ------------------------------------------------------------ incremental

@dataclass(frozen=True)
class Scan:
    """Raw output of the incremental pruning of one path."""

    height: np.ndarray
    pop_time: np.ndarray
    top_after: np.ndarray
    retained_times: np.ndarray


def scan(s: Path, E: LoopFamily) -> Scan:
    m = matcher(E)
    height, pop_time, top_after, times, _ = K.prune_scan(m.encode(s), *m.args)
    return Scan(height, pop_time, top_after, times)


def scan_codes(codes: np.ndarray, E: LoopFamily) -> Scan:
    height, pop_time, top_after, times, _ = K.prune_scan(np.asarray(codes, np.int64), *matcher(E).args)
    return Scan(height, pop_time, top_after, times)


def prune(s: Path, E: LoopFamily) -> Path:
    sc = scan(s, E)
    return _path_from_indices(s, [0] + sc.retained_times.tolist())


def is_pruned(s: Path, E: LoopFamily) -> bool:
    return bool((scan(s, E).pop_time < 0).all())


@dataclass(frozen=True)
class RetainedProfile:
    N: tuple[int, ...]
    mask: tuple[bool, ...]
    n_inverse: tuple[int, ...]


def profile_from_heights(height: np.ndarray) -> RetainedProfile:
    # N_n is the smallest pruned length seen from time n on
    N = np.minimum.accumulate(height[::-1])[::-1]
    mask = tuple(bool(x) for x in (np.diff(N) == 1))
    m = int(N[-1])
    inv = np.searchsorted(N, np.arange(m + 1), side="left")
    return RetainedProfile(tuple(int(x) for x in N), mask, tuple(int(x) for x in inv))


def retained_profile(s: Path, E: LoopFamily) -> RetainedProfile:
    return profile_from_heights(scan(s, E).height)


def retained_profile_literal(s: Path, E: LoopFamily) -> tuple[int, ...]:
    """N_n straight from its definition, for small paths."""
    final = prune_literal(s, E).points
    prunes = [prune_literal(s.window(0, i), E).points for i in range(s.length + 1)]
    out = []
    for n in range(s.length + 1):
        best = 0
        for m in range(len(final)):
            if all(len(prunes[i]) > m and prunes[i][:m + 1] == final[:m + 1] for i in range(n, s.length + 1)):
                best = m
            else:
                break
        out.append(best)
    return tuple(out)


@dataclass(frozen=True)
class PrunedDecomposition:
    skeleton: Path
    segments: tuple[Path, ...]
    n_profile: tuple[int, ...]
    n_inverse: tuple[int, ...]

    def to_json(self) -> dict:
        return {
            "skeleton": self.skeleton.to_list(),
            "segments": [x.to_list() for x in self.segments],
            "N": list(self.n_profile),
        }

    @classmethod
    def from_json(cls, obj: dict) -> PrunedDecomposition:
        N = tuple(int(x) for x in obj["N"])
        m = N[-1] if N else 0
        inv = tuple(N.index(k) for k in range(m + 1))
        return cls(
            validate_path(obj["skeleton"]),
            tuple(validate_path(x) for x in obj["segments"]),
            N,
            inv,
        )


def decompose(s: Path, E: LoopFamily) -> PrunedDecomposition:
    prof = retained_profile(s, E)
    inv = prof.n_inverse
    m = len(inv) - 1
    skel = _path_from_indices(s, inv)
    segs = []
    for k in range(m + 1):
        a = inv[k]
        b = inv[k + 1] - 1 if k < m else s.length
        segs.append(s.window(a, b).rooted())
    return PrunedDecomposition(skel, tuple(segs), prof.N, inv)


class DecompositionError(ValueError):
    pass


def reinsert(dec: PrunedDecomposition, E: LoopFamily | None = None, check: bool = True) -> Path:
    """Rebuild the path from its skeleton and pruned segments.

    With ``check`` and a family given, every segment must be admissible after
    its skeleton prefix.
    """
    skel = dec.skeleton
    if len(dec.segments) != skel.length + 1:
        raise DecompositionError(f"{len(dec.segments)} segments for a skeleton of length {skel.length}")
    if check and E is not None:
        from .segments import seg_membership

        for k, xi in enumerate(dec.segments):
            if not seg_membership(xi, E, skel.window(0, k)):
                raise DecompositionError(f"segment {k} fails prefix compatibility")
    pts = []
    for k, xi in enumerate(dec.segments):
        x = skel.points[k]
        pts.extend(add(x, p) for p in xi.points)
    return Path(tuple(pts))


def dump_decomposition(dec: PrunedDecomposition) -> str:
    return json.dumps(dec.to_json(), separators=(",", ":"))


# --------------------------------------------------------------- cut steps

@dataclass(frozen=True)
class CutMask:
    """Certified cut steps of a window; ``mask[i]`` refers to step i (mask[0] unused)."""

    window: tuple[int, int]
    mask: tuple[bool, ...]

    def steps(self) -> list[int]:
        return [i for i, b in enumerate(self.mask) if b]


def _last_revisit(pts: np.ndarray) -> np.ndarray:
    n1 = pts.shape[0]
    _, ids = np.unique(pts, axis=0, return_inverse=True)
    ids = ids.reshape(-1)
    last = np.full(int(ids.max()) + 1, -1, np.int64)
    last[ids] = np.arange(n1)  # later assignment wins
    out = last[ids]
    out[out == np.arange(n1)] = -1
    return out


def cut_mask_codes(codes: np.ndarray, d: int, E: LoopFamily) -> np.ndarray:
    """Boolean cut mask (index = step) for a window given by step codes."""
    from .lattice import direction_vectors

    codes = np.asarray(codes, np.int64)
    steps = direction_vectors(d)[codes]
    pts = np.vstack([np.zeros((1, d), np.int64), np.cumsum(steps, axis=0)])
    covered = K.erasable_cover(codes, _last_revisit(pts), *matcher(E).args)
    mask = ~covered
    mask[0] = False
    return mask


def cut_steps(s: Path, E: LoopFamily, offset: int = 0) -> CutMask:
    """Steps i of the window that are retained in the pruning of every
    sub-window s[m1, m2] with m1 < i <= m2.

    A step fails exactly when some sub-path s[a, b] with a < i <= b prunes
    down to its start point; such sub-paths are found by pruning forward from
    every a up to the last revisit of s_a.
    """
    codes = matcher(E).encode(s)
    pts = np.array(s.points, dtype=np.int64)
    covered = K.erasable_cover(codes, _last_revisit(pts), *matcher(E).args)
    mask = [False] + [not bool(c) for c in covered[1:]]
    return CutMask((offset, offset + s.length), tuple(mask))


def retained_in_window(s: Path, E: LoopFamily, m1: int, m2: int) -> np.ndarray:
    """Boolean per step of s: retained in the pruning of s[m1, m2]."""
    m = matcher(E)
    out = np.zeros(s.length + 1, np.bool_)
    K.retained_after_scan(m.encode(s), m1, m2, *m.args, out)
    return out


def cut_steps_literal(s: Path, E: LoopFamily) -> tuple[bool, ...]:
    """Cut mask from the definition: every sub-window, literal pruning."""
    n = s.length
    mask = [False] * (n + 1)
    for i in range(1, n + 1):
        ok = True
        for m1 in range(0, i):
            for m2 in range(i, n + 1):
                w = s.window(m1, m2)
                if not retained_profile_literal_mask(w, E)[i - m1 - 1]:
                    ok = False
                    break
            if not ok:
                break
        mask[i] = ok
    return tuple(mask)


def retained_profile_literal_mask(s: Path, E: LoopFamily) -> tuple[bool, ...]:
    N = retained_profile_literal(s, E)
    return tuple(N[i] - N[i - 1] == 1 for i in range(1, len(N)))


class UncertifiableRegion(ValueError):
    pass


def two_sided_prune(s: Path, E: LoopFamily, cut: CutMask | None = None):
    """Prune the stretch between the first and last certified cut steps.

    Between consecutive cut steps c < c' the retained steps are those of the
    pruning of s[c-1, c'] (with c and c' retained themselves). Returns the
    pruned path through the retained steps and the per-step retained mask.
    """
    cut = cut if cut is not None else cut_steps(s, E)
    cs = cut.steps()
    if len(cs) < 2:
        raise UncertifiableRegion(f"window has {len(cs)} certified cut steps, need at least 2")
    keep = np.zeros(s.length + 1, np.bool_)
    for c, c2 in zip(cs, cs[1:]):
        keep |= retained_in_window(s, E, c - 1, c2)
    keep[:cs[0]] = False
    keep[cs[-1] + 1:] = False
    steps = [i for i in range(1, s.length + 1) if keep[i]]
    pts = [s.points[cs[0] - 1]]
    for i in steps:
        pts.append(add(pts[-1], sub(s.points[i], s.points[i - 1])))
    return Path(tuple(pts)), tuple(bool(x) for x in keep)


# ------------------------------------------------------- pruning intervals

@dataclass(frozen=True)
class PruningInterval:
    j: int
    zeta_minus: float
    zeta_plus: float
    window: tuple[int, int]

    @property
    def pruned(self) -> bool:
        return self.zeta_plus != INF

    def contains(self, other: PruningInterval) -> bool:
        return self.zeta_minus <= other.zeta_minus and other.zeta_plus <= self.zeta_plus


def intervals_from_scan(sc: Scan, offset: int = 0) -> list[PruningInterval]:
    """Pruning intervals of every step j = 1..n of a scanned window."""
    n = sc.height.shape[0] - 1
    out = [None]
    for j in range(1, n + 1):
        zp = int(sc.pop_time[j])
        if zp < 0:
            out.append(PruningInterval(j + offset, -INF, INF, (offset, offset + n)))
        else:
            zm = int(sc.top_after[zp])
            out.append(PruningInterval(j + offset, zm + offset, zp + offset, (offset, offset + n)))
    return out


def pruning_intervals(s: Path, E: LoopFamily, offset: int = 0) -> list[PruningInterval]:
    return intervals_from_scan(scan(s, E), offset)


def pruning_interval(j: int, s: Path, E: LoopFamily, offset: int = 0) -> PruningInterval:
    if not offset < j <= offset + s.length:
        raise PathError(f"step {j} outside window ({offset},{offset + s.length}]")
    return pruning_intervals(s, E, offset)[j - offset]


def pruning_interval_literal(j: int, s: Path, E: LoopFamily) -> PruningInterval:
    """Pruning interval from the definition (window starts at 0)."""
    n = s.length
    for i in range(j, n + 1):
        mask = retained_profile_literal_mask(s.window(0, i), E)
        if not mask[j - 1]:
            cand = [q for q in range(1, j + 1) if mask[q - 1]]
            return PruningInterval(j, max(cand) if cand else 0, i, (0, n))
    return PruningInterval(j, -INF, INF, (0, n))


class PairClass(str, Enum):
    DISJOINT = "Disjoint"
    C1 = "C1"
    C2 = "C2"
    C3 = "C3"
    UNPRUNED = "Unpruned"


class CrossingIntervals(AssertionError):
    pass


def classify_pair(a: PruningInterval, b: PruningInterval) -> PairClass:
    """Relative position of the pruning intervals of steps i = a.j <= j = b.j.

    UNPRUNED is returned when either step is never erased in the window.
    """
    i, j = a.j, b.j
    if i > j:
        raise ValueError("classify_pair expects a.j <= b.j")
    if not a.pruned or not b.pruned:
        return PairClass.UNPRUNED
    if (a.zeta_minus, a.zeta_plus) == (b.zeta_minus, b.zeta_plus):
        return PairClass.C3
    if a.zeta_plus <= b.zeta_minus or b.zeta_plus <= a.zeta_minus:
        return PairClass.DISJOINT
    if a.contains(b) and i <= b.zeta_minus:
        return PairClass.C1
    if b.contains(a) and a.zeta_plus <= j - 1:
        return PairClass.C2
    raise CrossingIntervals(
        f"steps {i},{j}: intervals [{a.zeta_minus},{a.zeta_plus}] and [{b.zeta_minus},{b.zeta_plus}]"
    )


def classify_all(zm: np.ndarray, zp: np.ndarray) -> dict:
    """Vectorised classification of all pairs i < j of pruned steps.

    ``zm``/``zp`` hold interval ends per step (index 0 unused, -1 for
    unpruned). Returns label counts, including 'crossing'.
    """
    idx = np.nonzero(zp[1:] >= 0)[0] + 1
    if idx.size < 2:
        return {"Disjoint": 0, "C1": 0, "C2": 0, "C3": 0, "crossing": 0}
    I, J = np.triu_indices(idx.size, k=1)
    i, j = idx[I], idx[J]
    am, ap, bm, bp = zm[i], zp[i], zm[j], zp[j]
    c3 = (am == bm) & (ap == bp)
    disj = ~c3 & ((ap <= bm) | (bp <= am))
    a_in_b = (bm <= am) & (ap <= bp)
    b_in_a = (am <= bm) & (bp <= ap)
    c1 = ~c3 & ~disj & b_in_a & (i <= bm)
    c2 = ~c3 & ~disj & ~c1 & a_in_b & (ap <= j - 1)
    cross = ~(c3 | disj | c1 | c2)
    return {
        "Disjoint": int(disj.sum()),
        "C1": int(c1.sum()),
        "C2": int(c2.sum()),
        "C3": int(c3.sum()),
        "crossing": int(cross.sum()),
    }
