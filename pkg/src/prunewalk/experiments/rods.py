"""Rod points, rod cut tests, pruning-interval structure around rods and
planted rod windows."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .. import _kernels as K
from ..lattice import LoopFamily
from ..prune import matcher

INF = math.inf


class RodError(ValueError):
    pass


@dataclass(frozen=True)
class RodConfig:
    """x0 is a unit step code (2*axis for +u, 2*axis+1 for -u)."""

    x0: int
    K: int
    L_E: int

    def __post_init__(self):
        if self.K < 1:
            raise RodError("K must be at least 1")
        if self.L_E < 1:
            raise RodError("L_E must be at least 1")

    @property
    def L(self) -> int:
        return (2 * self.K + 1) * self.L_E

    @classmethod
    def for_family(cls, E: LoopFamily, K: int, x0: int = 0) -> RodConfig:
        return cls(x0, K, E.L_E)

    def to_json(self) -> dict:
        return {"x0": self.x0, "K": self.K, "L_E": self.L_E, "L": self.L}


@dataclass(frozen=True, eq=False)
class Window:
    """Steps of S[start, start + len(codes)]; ``base`` is S_start."""

    codes: np.ndarray
    start: int
    d: int
    base: tuple = ()

    @property
    def end(self) -> int:
        return self.start + int(self.codes.shape[0])

    @property
    def points(self) -> np.ndarray:
        pts = self.__dict__.get("_pts")
        if pts is None:
            pts = K.walk_points(self.codes, self.d)
            if self.base:
                pts = pts + np.asarray(self.base, np.int64)
            self.__dict__["_pts"] = pts
        return pts

    def pos(self, t: int) -> tuple:
        return tuple(int(x) for x in self.points[t - self.start])

    def sub(self, a: int, b: int) -> np.ndarray:
        """Codes of the steps of S[a, b]."""
        if not self.start <= a <= b <= self.end:
            raise RodError(f"[{a},{b}] outside the window [{self.start},{self.end}]")
        return self.codes[a - self.start:b - self.start]

    def reversed(self) -> Window:
        """The window of the time-reversed path t -> S_{-t}."""
        flipped = np.ascontiguousarray(self.codes[::-1] ^ 1)
        return Window(flipped, -self.end, self.d, tuple(int(x) for x in self.points[-1]))


def rod_points(win: Window, rc: RodConfig, I: tuple[int, int] | None = None) -> list[int]:
    """Midpoints of the length-2L blocks of I on which the path runs straight along x0."""
    lo, hi = I if I is not None else (win.start, win.end)
    span = hi - lo
    if span < 2 * rc.L:
        raise RodError(f"window of length {span} is shorter than one rod block ({2 * rc.L})")
    if span % (2 * rc.L):
        raise RodError(f"|I| = {span} is not a multiple of 2L = {2 * rc.L}")
    blocks = win.sub(lo, hi).reshape(-1, 2 * rc.L)
    straight = np.nonzero((blocks == rc.x0).all(axis=1))[0]
    return [lo + (2 * int(r) + 1) * rc.L for r in straight]


def rod_points_anywhere(win: Window, rc: RodConfig) -> list[int]:
    """All times j with S[j-L, j+L] straight along x0 (not block-aligned)."""
    run = np.convolve((win.codes == rc.x0).astype(np.int64), np.ones(2 * rc.L, np.int64), "valid")
    return [win.start + int(i) + rc.L for i in np.nonzero(run == 2 * rc.L)[0]]


def rod_block_probability(d: int, L: int) -> float:
    return (2 * d) ** (-2.0 * L)


# ------------------------------------------------------------ cut tests

def right_pop_time(win: Window, E: LoopFamily, rho: int, width: int, stop: int | None = None) -> float:
    """First time at which one of the steps rho+1..rho+width is erased when
    pruning S[rho, s] for growing s (inf if never within the window)."""
    stop = win.end if stop is None else stop
    m = matcher(E)
    _, pop_time, _, _, _ = K.prune_scan(np.ascontiguousarray(win.sub(rho, stop)), *m.args)
    pt = pop_time[1:width + 1]
    pt = pt[pt >= 0]
    return float(rho + pt.min()) if pt.size else INF


def left_witness(win: Window, E: LoopFamily, rho: int, width: int, reach: int) -> int | None:
    """Largest s <= rho - reach such that one of the steps rho-width+1..rho is
    erased in the pruning of S[s, rho]; None if there is none in the window."""
    if rho - reach < win.start:
        return None
    m = matcher(E)
    a = K.left_witness(win.codes, 0, rho - reach - win.start, rho - win.start, width, *m.args)
    return None if a < 0 else int(a) + win.start


@dataclass(frozen=True)
class RodCutStatus:
    rho: int
    left_witness: int | None
    right_time: float

    @property
    def cut(self) -> bool:
        return self.left_witness is None and self.right_time == INF


def rod_cut_status(win: Window, E: LoopFamily, rc: RodConfig, rho: int) -> RodCutStatus:
    """Rod cut test: the 2L_E steps on either side of rho stay retained when
    pruning from any start on the left up to rho, and from rho to any end on
    the right, within the window."""
    if rho - rc.L < win.start or rho + rc.L > win.end:
        raise RodError(f"rod at {rho} not inside the window")
    w = 2 * rc.L_E
    return RodCutStatus(rho, left_witness(win, E, rho, w, rc.L), right_pop_time(win, E, rho, w))


# ------------------------------------------------------ interval arrays

@dataclass(frozen=True, eq=False)
class Intervals:
    """Pruning intervals of every step of the window S[lo, hi]."""

    lo: int
    hi: int
    zm: np.ndarray
    zp: np.ndarray

    def zeta(self, t: int) -> tuple[float, float]:
        if not self.lo < t <= self.hi:
            raise RodError(f"step {t} outside ({self.lo},{self.hi}]")
        i = t - self.lo
        if self.zp[i] < 0:
            return (-INF, INF)
        return (float(self.zm[i] + self.lo), float(self.zp[i] + self.lo))


def intervals(win: Window, E: LoopFamily, lo: int, hi: int) -> Intervals:
    m = matcher(E)
    _, pop_time, top_after, _, _ = K.prune_scan(np.ascontiguousarray(win.sub(lo, hi)), *m.args)
    zm = np.where(pop_time >= 0, top_after[np.maximum(pop_time, 0)], -1)
    return Intervals(lo, hi, zm, pop_time)


def _inside(a, b) -> bool:
    """Interval a contained in interval b."""
    return b[0] <= a[0] and a[1] <= b[1]


def t_uv(rho: int, v: int, rc: RodConfig) -> int:
    return rho + 2 * v * rc.L_E


def k_index(zeta: dict, rho: int, rc: RodConfig) -> int:
    """Smallest v in [-K, K-1] with zeta^+_v >= t_{v+1}; K if there is none."""
    for v in range(-rc.K, rc.K):
        if zeta[v][1] >= t_uv(rho, v + 1, rc):
            return v
    return rc.K


def sub_segment_points(win: Window, rho: int, q: int, rc: RodConfig, side: int) -> set:
    """Points of the rod sub-segment R^{side}_{q} of the rod at rho (side = +1 or -1)."""
    a, b = (2 * q - 1) * rc.L_E, 2 * q * rc.L_E
    ts = range(rho + a, rho + b + 1) if side > 0 else range(rho - b, rho - a + 1)
    return {win.pos(t) for t in ts}


# ---------------------------------------------------- structure checks

@dataclass
class RodStructureReport:
    rods: int = 0
    checked: int = 0
    k_values: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    counts: dict = field(default_factory=dict)

    def bump(self, key: str, n: int = 1):
        self.counts[key] = self.counts.get(key, 0) + n

    def to_json(self) -> dict:
        return {
            "rods": self.rods,
            "checked": self.checked,
            "k_values": list(self.k_values),
            "violations": list(self.violations),
            "counts": dict(sorted(self.counts.items())),
        }


def _zetas(iv: Intervals, rho: int, rc: RodConfig) -> dict:
    return {v: iv.zeta(t_uv(rho, v, rc)) for v in range(-rc.K, rc.K + 1)}


def rod_structure_check(win: Window, E: LoopFamily, rc: RodConfig, I0: tuple[int, int] | None = None,
                        rods: list[int] | None = None) -> RodStructureReport:
    """Nesting chains, sub-segment visits and the one-sided and interlacing
    chains of pruning intervals around every rod inside I0."""
    lo, hi = I0 if I0 is not None else (win.start, win.end)
    if rods is None:
        # interlacing needs rods at least 2L apart, so use the block grid
        span = (hi - lo) - (hi - lo) % (2 * rc.L)
        rods = rod_points(win, rc, (lo, lo + span)) if span else []
    rep = RodStructureReport()
    iv = intervals(win, E, lo, hi)
    inside = [r for r in rods if lo <= r - rc.L and r + rc.L <= hi]
    rep.rods = len(rods)
    ks, zs = {}, {}
    for rho in inside:
        z = _zetas(iv, rho, rc)
        k = k_index(z, rho, rc)
        ks[rho], zs[rho] = k, z
        rep.checked += 1
        rep.k_values.append(k)
        for v in range(k, rc.K):
            rep.bump("right_nesting")
            if not _inside(z[v + 1], z[v]):
                rep.violations.append(f"rod {rho}: zeta_{v + 1} not inside zeta_{v} (k={k})")
        for v in range(-rc.K, k - 1):
            rep.bump("left_nesting")
            if not _inside(z[v], z[v + 1]):
                rep.violations.append(f"rod {rho}: zeta_{v} not inside zeta_{v + 1} (k={k})")
        for v in range(max(1, k + 1), rc.K + 1):
            if z[v][1] < INF:
                rep.bump("visit_plus")
                x = win.pos(int(z[v][1]))
                if x not in sub_segment_points(win, rho, v, rc, +1):
                    rep.violations.append(f"rod {rho}: S at zeta+_{v}={z[v][1]} misses R+_{v}")
        for v in range(-rc.K, min(-1, k - 1) + 1):
            if z[v][0] > -INF:
                rep.bump("visit_minus")
                x = win.pos(int(z[v][0]))
                if x not in sub_segment_points(win, rho, -v, rc, -1):
                    rep.violations.append(f"rod {rho}: S at zeta-_{v}={z[v][0]} misses R-_{-v}")
        _one_sided(win, E, rc, rho, rep)
    _interlacing(inside, ks, zs, rc, rep)
    return rep


def _one_sided(win: Window, E: LoopFamily, rc: RodConfig, rho: int, rep: RodStructureReport):
    if rho + rc.L < win.end:
        iv = intervals(win, E, rho, win.end)
        zp = [iv.zeta(t_uv(rho, v, rc))[1] for v in range(1, rc.K + 1)]
        if zp[0] < INF:
            rep.bump("one_sided_plus")
            if not all(a > b for a, b in zip(zp, zp[1:])) or zp[-1] == INF:
                rep.violations.append(f"rod {rho}: forward pruning times not decreasing {zp}")
    if rho - rc.L > win.start:
        stop = t_uv(rho, -1, rc)
        iv = intervals(win, E, win.start, stop)
        zm = [iv.zeta(t_uv(rho, -v, rc))[0] for v in range(1, rc.K + 1)]
        if zm[0] > -INF:
            rep.bump("one_sided_minus")
            if not all(a < b for a, b in zip(zm, zm[1:])) or zm[-1] == -INF:
                rep.violations.append(f"rod {rho}: backward pruning times not increasing {zm}")


def _strict_down(xs) -> bool:
    return all(a > b for a, b in zip(xs, xs[1:]))


def _interlacing(inside: list, ks: dict, zs: dict, rc: RodConfig, rep: RodStructureReport):
    Kp = rc.K
    for a in range(len(inside)):
        for b in range(a + 1, len(inside)):
            u, w = inside[a], inside[b]
            zu, zw = zs[u], zs[w]
            kw, ku = ks[w], ks[u]
            tail_w = [zw[v][1] for v in range(kw, Kp + 1)]
            tail_u = [zu[v][0] for v in range(ku - 1, -Kp - 1, -1)]
            for v in range(-Kp, Kp + 1):
                zp = zu[v][1]
                if zp < INF and zp >= t_uv(w, Kp, rc):
                    rep.bump("interlace_plus")
                    if not (zp >= tail_w[0] and _strict_down(tail_w)):
                        rep.violations.append(f"rods {u},{w}: v={v} zeta+={zp} vs chain {tail_w}")
                zm = zw[v][0]
                if zm > -INF and zm < t_uv(u, -Kp, rc):
                    rep.bump("interlace_minus")
                    if tail_u and not (zm <= tail_u[0] and all(x < y for x, y in zip(tail_u, tail_u[1:]))):
                        rep.violations.append(f"rods {u},{w}: v={v} zeta-={zm} vs chain {tail_u}")


# ------------------------------------------------------ planted windows

BLOCK_KINDS = ("rod", "dyck", "back", "free")


def planted_codes(rc: RodConfig, d: int, kinds) -> np.ndarray:
    """Concatenate blocks of 2L steps: rod (x0 throughout), dyck (x0 and its
    reverse alternating, erased by a back-and-forth loop along x0), back (the
    reverse of x0 throughout) and free (steps orthogonal to x0)."""
    n = 2 * rc.L
    back = rc.x0 ^ 1
    ortho = [c for c in range(2 * d) if c // 2 != rc.x0 // 2]
    out = []
    for i, kind in enumerate(kinds):
        if not isinstance(kind, str):
            blk = np.asarray(kind, np.int64)
            if blk.shape != (n,):
                raise RodError(f"custom block must have {n} steps")
            out.append(blk)
        elif kind == "rod":
            out.append(np.full(n, rc.x0))
        elif kind == "dyck":
            out.append(np.tile([rc.x0, back], rc.L))
        elif kind == "back":
            out.append(np.full(n, back))
        elif kind == "free":
            out.append(np.full(n, ortho[i % len(ortho)]))
        else:
            raise RodError(f"unknown block kind {kind!r}")
    return np.concatenate(out).astype(np.int64) if out else np.zeros(0, np.int64)


def random_planted_window(rc: RodConfig, d: int, n_blocks: int, rng: np.random.Generator,
                          weights=(0.45, 0.15, 0.15, 0.25)) -> Window:
    """Random block sequence; free blocks start with a random number of
    reverse steps and continue with uniform steps."""
    n = 2 * rc.L
    p = np.asarray(weights, float) / sum(weights)
    kinds = []
    for _ in range(n_blocks):
        k = BLOCK_KINDS[int(rng.choice(4, p=p))]
        if k == "free":
            r = int(rng.integers(0, n + 1))
            blk = np.concatenate([np.full(r, rc.x0 ^ 1), rng.integers(0, 2 * d, n - r)])
            kinds.append(blk)
        else:
            kinds.append(k)
    return Window(planted_codes(rc, d, kinds), 0, d)
