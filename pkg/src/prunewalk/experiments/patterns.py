"""Return patterns: enumeration, realization lists, the stack model, the
realization checker on path windows, and the witness search for windows
with many pruned rod points."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import product

import numpy as np

from ..lattice import LoopFamily
from ..segments import BudgetExceeded
from .rods import (
    INF,
    RodConfig,
    Window,
    intervals,
    k_index,
    planted_codes,
    rod_cut_status,
    rod_points,
    sub_segment_points,
    t_uv,
)

MAX_ENUM_J = 12
MAX_ENUM_K = 6


class PatternBudget(BudgetExceeded):
    pass


@dataclass(frozen=True)
class ReturnPattern:
    J: tuple
    a: tuple
    kind: str = "forward"

    def __post_init__(self):
        if self.kind not in ("forward", "backward"):
            raise ValueError(f"unknown pattern kind {self.kind!r}")
        if len(self.J) != len(self.a):
            raise ValueError("J and a must have the same length")
        if list(self.J) != sorted(set(self.J)):
            raise ValueError("J must be strictly increasing")

    def valid(self, K: int) -> bool:
        return admissible(self.a, K, self.kind)

    @property
    def norm(self) -> int:
        return sum(self.a)

    def to_json(self) -> dict:
        return {"J": list(self.J), "a": list(self.a), "kind": self.kind}


def admissible(a, K: int, kind: str = "forward") -> bool:
    seq = list(a) if kind == "forward" else list(a)[::-1]
    s = 0
    for ell, x in enumerate(seq, 1):
        if x < 0:
            return False
        s += x
        if s > ell * K:
            return False
    return True


def _guard(r: int, K: int):
    if r > MAX_ENUM_J or K > MAX_ENUM_K:
        raise PatternBudget(f"enumeration capped at #J <= {MAX_ENUM_J}, K <= {MAX_ENUM_K}")


def enumerate_patterns(r: int, K: int, kind: str = "forward") -> list[tuple]:
    """All admissible count vectors of length r, by depth-first extension."""
    _guard(r, K)
    out = []

    def grow(prefix, s):
        ell = len(prefix)
        if ell == r:
            out.append(tuple(prefix))
            return
        for x in range((ell + 1) * K - s + 1):
            prefix.append(x)
            grow(prefix, s + x)
            prefix.pop()

    grow([], 0)
    if kind == "backward":
        out = sorted(t[::-1] for t in out)
    return out


def brute_force_patterns(r: int, K: int, kind: str = "forward") -> list[tuple]:
    """Filter the full box [0, rK]^r; only for small r."""
    _guard(r, K)
    return [a for a in product(range(r * K + 1), repeat=r) if admissible(a, K, kind)]


def count_patterns(r: int, K: int) -> int:
    """Number of admissible vectors from the slack recursion."""

    @lru_cache(maxsize=None)
    def f(ell, s):
        if ell == r:
            return 1
        return sum(f(ell + 1, s + x) for x in range((ell + 1) * K - s + 1))

    return f(0, 0)


def pattern_bound(r: int, K: int) -> int:
    return math.comb(K * r + r, r)


# ----------------------------------------------------- realization lists

def realization_lists(J, a, K: int) -> list[list[tuple]]:
    """Forward lists: at step ell take the a_ell largest unused pairs (p, q),
    p in J, p <= j_ell, ordered by p then q, both decreasing."""
    J = list(J)
    if not admissible(a, K):
        raise ValueError(f"{a} is not a forward pattern for K={K}")
    used: set = set()
    lists = []
    for ell, j in enumerate(J):
        avail = sorted(((p, q) for p in J if p <= j for q in range(1, K + 1) if (p, q) not in used), reverse=True)
        take = avail[:a[ell]]
        used.update(take)
        lists.append(take)
    return lists


def stack_lists(J, a, K: int) -> list[list[tuple]]:
    """The same lists from a file stack: K files arrive on each day of J,
    a_ell files are processed from the top."""
    stack: list = []
    lists = []
    for j, x in zip(J, a):
        stack.extend((j, q) for q in range(1, K + 1))
        if x > len(stack):
            raise ValueError("pattern processes more files than are stacked")
        done = [stack.pop() for _ in range(x)]
        lists.append(done)
    return lists


def backward_lists(J, a, K: int, m: int) -> list[list[tuple]]:
    """Lists of a backward pattern, read through time reversal and mapped back
    to the original rod indices (ordered as J)."""
    Jr = [m + 1 - j for j in reversed(J)]
    fr = realization_lists(Jr, list(a)[::-1], K)
    return [[(m + 1 - p, q) for p, q in lst] for lst in reversed(fr)]


# ----------------------------------------------------- realization check

def _realizes_forward(win: Window, rods: list, rc: RodConfig, J, a, lists) -> bool:
    J = list(J)
    for ell, lst in enumerate(lists):
        lo = rods[J[ell] - 1] + rc.L
        hi = rods[J[ell + 1] - 1] + rc.L if ell + 1 < len(J) else win.end
        t = lo + 1
        for p, q in lst:
            target = sub_segment_points(win, rods[p - 1], q, rc, +1)
            while t <= hi and win.pos(t) not in target:
                t += 1
            if t > hi:
                return False
    return True


def realizes(win: Window, rods: list, rc: RodConfig, pat: ReturnPattern) -> bool:
    """Whether the window realizes the pattern; rods are 1-based through J.

    Return times must be non-decreasing within a day, so the earliest
    admissible time is taken greedily.
    """
    if not pat.valid(rc.K):
        return False
    if pat.kind == "forward":
        return _realizes_forward(win, rods, rc, pat.J, pat.a, realization_lists(pat.J, pat.a, rc.K))
    m = len(rods)
    rwin = win.reversed()
    rrods = [-r for r in reversed(rods)]
    rrc = RodConfig(rc.x0 ^ 1, rc.K, rc.L_E)
    Jr = [m + 1 - j for j in reversed(pat.J)]
    ar = list(pat.a)[::-1]
    return _realizes_forward(rwin, rrods, rrc, Jr, ar, realization_lists(Jr, ar, rc.K))


# ------------------------------------------------ necessary condition

@dataclass
class Verdict:
    status: str  # not-applicable | witness | counterexample
    m: int = 0
    non_cut: int = 0
    J_plus: int = 0
    J_minus: int = 0
    case: str = ""
    pattern: ReturnPattern | None = None
    detail: str = ""
    extra: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "m": self.m,
            "non_cut": self.non_cut,
            "J_plus": self.J_plus,
            "J_minus": self.J_minus,
            "case": self.case,
            "pattern": self.pattern.to_json() if self.pattern else None,
            "detail": self.detail,
        }


def _ell_sequence(rods, Jp, zp1, rc):
    """Indices l_1 = 1 < l_2 < ... chained by where the forward pruning time of
    rod j_{l_i} falls among the day boundaries rho_{j_u} + L."""
    n = len(Jp)
    ells = [1]
    while True:
        li = ells[-1]
        z = zp1[li - 1]
        nxt = n + 1
        for u in range(li + 1, n + 1):
            if rods[Jp[u - 2] - 1] + rc.L < z <= rods[Jp[u - 1] - 1] + rc.L:
                nxt = u
                break
        if nxt == n + 1:
            return ells
        ells.append(nxt)


def necessary_condition_check(win: Window, E: LoopFamily, rc: RodConfig,
                              I: tuple[int, int] | None = None) -> Verdict:
    """Look for a return pattern with norm >= Km/64 realized by the window,
    following the constructive recipe; flag a counterexample if the recipe
    does not produce one."""
    rods = rod_points(win, rc, I)
    m = len(rods)
    status = [rod_cut_status(win, E, rc, r) for r in rods]
    non_cut = [i + 1 for i, s in enumerate(status) if not s.cut]
    Jp = [i + 1 for i, s in enumerate(status) if not s.cut and s.right_time < INF]
    Jm = [i + 1 for i, s in enumerate(status) if not s.cut and s.left_witness is not None]
    v = Verdict("not-applicable", m, len(non_cut), len(Jp), len(Jm))
    if not (m > 16 and len(non_cut) > m / 2):
        return v
    if len(Jp) <= m / 4:
        v.status = "counterexample"
        v.detail = "left-side case: the recipe covers only many right-pruned rods"
        return v
    need = rc.K * m / 64
    zp1 = [status[j - 1].right_time for j in Jp]
    ells = _ell_sequence(rods, Jp, zp1, rc)
    q = len(ells)
    R = [ells[i] for i in range(q - 1) if ells[i + 1] - ells[i] == 1]
    v.extra = {"q": q, "R": len(R)}
    if len(R) >= m / 8:
        J = tuple(Jp[r - 1] for r in R)
        pat = ReturnPattern(J, tuple([rc.K] * len(J)), "forward")
        return _finish(v, win, rods, rc, pat, "case-1", need)
    # Case 2: rods strictly between consecutive chain rods
    chain = [Jp[li - 1] for li in ells]
    chain_set = set(chain)
    tilde = [j for j in Jp if j not in chain_set]
    windows = {}
    owner = {}
    for i, li in enumerate(ells):
        j0 = Jp[li - 1]
        hi = int(zp1[li - 1])
        windows[i] = (rods[j0 - 1], hi)
    for j in tilde:
        for i, li in enumerate(ells):
            j0 = Jp[li - 1]
            j1 = Jp[ells[i + 1] - 1] if i + 1 < q else math.inf
            if j0 < j < j1:
                owner[j] = i
                break
    zeta = {}
    ks = {}
    for i, (lo, hi) in windows.items():
        members = [j for j in tilde if owner.get(j) == i]
        if not members:
            continue
        iv = intervals(win, E, lo, hi)
        for j in members:
            rho = rods[j - 1]
            if not (lo < t_uv(rho, -rc.K, rc) and t_uv(rho, rc.K, rc) <= hi):
                v.status = "counterexample"
                v.detail = f"rod {j} not inside the pruning window of chain rod {Jp[ells[i] - 1]}"
                return v
            z = {w: iv.zeta(t_uv(rho, w, rc)) for w in range(-rc.K, rc.K + 1)}
            zeta[j] = z
            ks[j] = k_index(z, rho, rc)
    nonpos = [j for j in tilde if ks[j] <= 0]
    pos = [j for j in tilde if ks[j] > 0]
    v.extra.update({"tilde": len(tilde), "nonpositive": len(nonpos)})
    if len(nonpos) >= len(tilde) / 2:
        J = nonpos
        bounds = [rods[w - 1] + rc.L for w in J] + [math.inf]
        a = [0] * len(J)
        for j in J:
            for w in range(1, rc.K + 1):
                z = zeta[j][w][1]
                for i in range(len(J)):
                    if bounds[i] < z <= bounds[i + 1]:
                        a[i] += 1
                        break
        pat = ReturnPattern(tuple(J), tuple(a), "forward")
        return _finish(v, win, rods, rc, pat, "case-2-forward", need, expect=rc.K * len(J))
    J = pos
    bounds = [-math.inf] + [rods[w - 1] - rc.L for w in J]
    a = [0] * len(J)
    for j in J:
        for w in range(1, rc.K + 1):
            z = zeta[j][-w][0]
            for i in range(len(J)):
                if bounds[i] <= z < bounds[i + 1]:
                    a[i] += 1
                    break
    pat = ReturnPattern(tuple(J), tuple(a), "backward")
    return _finish(v, win, rods, rc, pat, "case-2-backward", need, expect=rc.K * len(J))


def _finish(v: Verdict, win, rods, rc, pat, case, need, expect=None) -> Verdict:
    v.case = case
    v.pattern = pat
    if expect is not None and pat.norm != expect:
        v.status = "counterexample"
        v.detail = f"pattern counts {pat.norm} of {expect} return times"
    elif pat.norm < need:
        v.status = "counterexample"
        v.detail = f"pattern norm {pat.norm} below Km/64 = {need:.3f}"
    elif not pat.valid(rc.K):
        v.status = "counterexample"
        v.detail = "pattern violates the prefix constraint"
    elif not realizes(win, rods, rc, pat):
        v.status = "counterexample"
        v.detail = "window does not realize the constructed pattern"
    else:
        v.status = "witness"
    return v


# ------------------------------------------------------------ fixtures

def chain_window(rc: RodConfig, d: int, m: int) -> Window:
    """m rods, each followed by a block that backtracks exactly onto the last
    step before the rod's first right sub-segment ends, then leaves sideways.
    Every rod is right-pruned inside the next day."""
    n = 2 * rc.L
    back = rc.L - 2 * rc.L_E + 1
    side = next(c for c in range(2 * d) if c // 2 != rc.x0 // 2)
    blk = [rc.x0 ^ 1] * back + [side] * (n - back)
    kinds = []
    for _ in range(m):
        kinds += ["rod", blk]
    return Window(planted_codes(rc, d, kinds), 0, d)


def nested_return_window(rc: RodConfig, d: int, inner: int) -> Window:
    """One outer rod, then `inner` rods separated by erasable back-and-forth
    blocks, then the exact reversal of everything back to the outer rod's
    first right sub-segment, padded sideways to the block grid."""
    n = 2 * rc.L
    side = next(c for c in range(2 * d) if c // 2 != rc.x0 // 2)
    kinds = ["rod"]
    for _ in range(inner):
        kinds += ["dyck", "rod"]
    head = planted_codes(rc, d, kinds)
    stop = rc.L + 2 * rc.L_E - 1  # rewind until S_{t_{1,1}-1}
    tail = head[stop:][::-1] ^ 1
    pad = (-(len(head) + len(tail))) % n
    codes = np.concatenate([head, tail, np.full(pad + n, side)])
    return Window(codes.astype(np.int64), 0, d)
