"""Deterministic invariant checks shared by the selftest command and the test
suite. Each check returns a CheckResult; none of them raises on a failed
invariant."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product

import numpy as np

from . import _kernels as K
from .lattice import LoopFamily, Path, family_e1, path_from_codes, path_probability
from .parallel import rng_for
from .prune import (
    CrossingIntervals,
    classify_all,
    classify_pair,
    decompose,
    intervals_from_scan,
    matcher,
    pruning_interval_literal,
    reinsert,
    scan_codes,
)
from .segments import (
    MarkedTree,
    ESRep,
    boundary_scan,
    brute_force_counts,
    e_dfs,
    enumerate_segments,
    es_decode,
    es_encode,
    es_of_segment,
    fiber_data,
    fiber_factorize,
    fiber_frame,
    fiber_reconstruct,
    is_partition,
    relative_decomposition,
    segment_of_tree,
    seg_membership,
    tree_of_segment,
)

CATALAN = (1, 1, 2, 5, 14, 42, 132, 429, 1430, 4862, 16796, 58786, 208012)
MAX_FAILURES = 20


@dataclass
class CheckResult:
    name: str
    checked: int = 0
    failures: list = field(default_factory=list)
    detail: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.checked > 0 and not self.failures

    def fail(self, msg: str):
        self.failures.append(msg)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "ok": self.ok,
            "checked": self.checked,
            "failure_count": len(self.failures),
            "failures": self.failures[:MAX_FAILURES],
            "detail": self.detail,
        }


def random_codes(seed: int, index: int, d: int, max_len: int, min_len: int = 1) -> np.ndarray:
    rng = rng_for(seed, "invariant", index)
    n = int(rng.integers(min_len, max_len + 1))
    return K.step_codes(rng, n, d)


# ------------------------------------------------------------- segments

def catalan_counts(max_len: int = 10, d: int = 3) -> CheckResult:
    """Erasable segments for the single back-and-forth loop, by length:
    enumeration, brute force over all walks and the Catalan numbers agree."""
    r = CheckResult("catalan_counts")
    E = family_e1(d)
    enum = np.zeros(max_len + 1, np.int64)
    for s in enumerate_segments(E, max_len):
        enum[s.length] += 1
    brute = np.asarray(brute_force_counts(E, max_len))
    for n in range(max_len + 1):
        r.checked += 1
        want = CATALAN[n // 2] if n % 2 == 0 else 0
        if not (enum[n] == brute[n] == want):
            r.fail(f"length {n}: enumeration {enum[n]}, brute force {brute[n]}, Catalan {want}")
    r.detail = {"max_len": max_len, "counts": [int(x) for x in enum[::2]]}
    return r


def codec_roundtrips(E: LoopFamily, max_len: int = 8, name: str = "codec_roundtrips") -> CheckResult:
    """segment -> tree -> ES -> tree -> segment, JSON forms included, with
    injectivity and traversal length on every enumerated segment."""
    r = CheckResult(name)
    trees, reps = set(), set()
    for eta in enumerate_segments(E, max_len):
        r.checked += 1
        T = tree_of_segment(eta, E)
        W = es_encode(T, E)
        if segment_of_tree(T, E) != eta:
            r.fail(f"tree does not rebuild {eta}")
        if es_decode(W, E) != T:
            r.fail(f"ES does not decode to the tree of {eta}")
        if MarkedTree.from_json(T.to_json()) != T or ESRep.from_json(W.to_json()) != W:
            r.fail(f"JSON round trip fails for {eta}")
        if len(e_dfs(T, E)) - 1 != eta.length:
            r.fail(f"traversal of {eta} has {len(e_dfs(T, E)) - 1} steps")
        for b in boundary_scan(W, E):
            rd = relative_decomposition(W, E, b.v)
            if not is_partition(rd.parts(), T.vertices()):
                r.fail(f"relative decomposition at {b.v} is not a partition for {eta}")
        trees.add(T)
        reps.add(W)
    if not (len(trees) == len(reps) == r.checked):
        r.fail(f"injectivity: {r.checked} segments, {len(trees)} trees, {len(reps)} ES maps")
    r.detail = {"max_len": max_len, "segments": r.checked, "loops": len(E)}
    return r


def segment_mass(gamma_hat: float, max_len: int = 12, d: int = 3, tol: float = 1e-3) -> CheckResult:
    """Partial sums of walk weights over erasable segments for the single
    back-and-forth loop: below 1/gamma_hat and close to the closed form."""
    r = CheckResult("segment_mass")
    E = family_e1(d)
    closed = 18 - 12 * math.sqrt(2) if d == 3 else None
    total = Fraction(0)
    partial = []
    for s in enumerate_segments(E, max_len):
        total += path_probability(s)
        partial.append(float(total))
    last = float(total)
    for x in partial:
        r.checked += 1
        if x > 1 / gamma_hat:
            r.fail(f"partial sum {x} exceeds 1/gamma_hat = {1 / gamma_hat}")
    if closed is not None and abs(last - closed) > tol:
        r.fail(f"partial sum {last} is {abs(last - closed):.2e} from {closed}")
    r.detail = {"max_len": max_len, "partial_sum": last, "closed_form": closed, "inverse_gamma": 1 / gamma_hat}
    return r


def fiber_bijection(E: LoopFamily, cap: int = 6) -> CheckResult:
    """For every exploration datum h of every erasable segment of length <= cap,
    reconstruction from the admissible product class is a bijection onto the
    fiber of h (restricted to total length <= cap)."""
    r = CheckResult("fiber_bijection")
    segs = enumerate_segments(E, cap)
    fibers: dict = {}
    for eta in segs:
        for b in boundary_scan(es_of_segment(eta, E), E):
            fibers.setdefault(fiber_data(eta, E, b.v), set()).add(eta.points)
    for h, members in sorted(fibers.items(), key=lambda kv: repr(kv[0])):
        r.checked += 1
        fr = fiber_frame(h, E)
        budget = cap - fr.eta_exp.length
        us = sorted(fr.tau_u)
        par_class = enumerate_segments(E, budget, fr.prefix_par)
        classes = [enumerate_segments(E, budget, fr.prefix_u[u]) for u in us]
        image = set()
        combos = 0
        for choice in product(par_class, *classes):
            if sum(x.length for x in choice) > budget:
                continue
            combos += 1
            pieces = dict(zip(us, choice[1:]))
            eta = fiber_reconstruct(h, choice[0], pieces, E)
            if eta.points not in members:
                r.fail(f"fiber {h.v}: reconstruction {eta} outside the fiber")
                continue
            par, got = fiber_factorize(eta, h, E)
            if par != choice[0] or got != pieces:
                r.fail(f"fiber {h.v}: factorize does not invert reconstruct on {eta}")
            image.add(eta.points)
        if len(image) != combos or image != members:
            r.fail(f"fiber {h.v}: {combos} product elements, {len(image)} images, {len(members)} members")
    r.detail = {"cap": cap, "fibers": r.checked, "segments": len(segs)}
    return r


# ---------------------------------------------------------------- pruning

def staging(E: LoopFamily, n_paths: int = 10_000, max_len: int = 300, seed: int = 0) -> CheckResult:
    """Pruning in two stages at every split point equals the literal pruning."""
    r = CheckResult("staging")
    m = matcher(E)
    splits = 0
    for i in range(n_paths):
        codes = random_codes(seed, i, E.d, max_len)
        bad = int(K.staging_failures(codes, *m.args))
        splits += max(codes.shape[0] - 1, 0)
        r.checked += 1
        if bad:
            r.fail(f"path {i}: {bad} split points disagree")
    r.detail = {"paths": n_paths, "split_points": splits, "max_len": max_len, "seed": seed}
    return r


def decompose_reinsert(E: LoopFamily, n_paths: int = 10_000, max_len: int = 200, seed: int = 1,
                       full_every: int = 20) -> CheckResult:
    """reinsert(decompose(s)) = s; every `full_every`-th path also checks
    admissibility of each segment after its skeleton prefix."""
    r = CheckResult("decompose_reinsert")
    for i in range(n_paths):
        s = path_from_codes(random_codes(seed, i, E.d, max_len).tolist(), E.d)
        dec = decompose(s, E)
        full = i % full_every == 0
        r.checked += 1
        try:
            back = reinsert(dec, E, check=full)
        except ValueError as exc:
            r.fail(f"path {i}: {exc}")
            continue
        if back != s:
            r.fail(f"path {i}: reinsertion differs")
        if full and not all(seg_membership(x, E) for x in dec.segments):
            r.fail(f"path {i}: a segment is not erasable")
    r.detail = {"paths": n_paths, "max_len": max_len, "seed": seed}
    return r


def laminarity(E: LoopFamily, n_windows: int = 10_000, max_len: int = 200, seed: int = 2,
               literal_every: int = 25, literal_len: int = 30) -> CheckResult:
    """Pairwise classification of pruning intervals on random windows: no
    crossing pair, vectorised and pairwise labels agree, scan-based intervals
    match the definition on short windows, and every step inside a pruned
    segment has its interval inside that segment's span."""
    r = CheckResult("laminarity")
    totals = {"Disjoint": 0, "C1": 0, "C2": 0, "C3": 0, "crossing": 0}
    contained = 0
    for i in range(n_windows):
        lit = i % literal_every == 0
        codes = random_codes(seed, i, E.d, literal_len if lit else max_len, min_len=2)
        sc = scan_codes(codes, E)
        n = codes.shape[0]
        zp = sc.pop_time
        zm = np.where(zp >= 0, sc.top_after[np.maximum(zp, 0)], -1)
        c = classify_all(zm, zp)
        r.checked += 1
        for k, v in c.items():
            totals[k] += v
        if c["crossing"]:
            r.fail(f"window {i}: {c['crossing']} crossing pairs")
        # containment in the pruned segment spans
        N = np.minimum.accumulate(sc.height[::-1])[::-1]
        inv = np.searchsorted(N, np.arange(N[-1] + 2), side="left")
        inv[-1] = n + 1
        for u in range(1, n + 1):
            k = int(N[u])
            if inv[k] < u <= inv[k + 1] - 1:
                contained += 1
                if not (zp[u] >= 0 and inv[k] <= zm[u] and zp[u] <= inv[k + 1] - 1):
                    r.fail(f"window {i}: step {u} interval [{zm[u]},{zp[u]}] leaves [{inv[k]},{inv[k + 1] - 1}]")
        if lit:
            s = path_from_codes(codes.tolist(), E.d)
            ivs = intervals_from_scan(sc)
            for j in range(1, n + 1):
                ref = pruning_interval_literal(j, s, E)
                if (ref.zeta_minus, ref.zeta_plus) != (ivs[j].zeta_minus, ivs[j].zeta_plus):
                    r.fail(f"window {i}: step {j} interval differs from the definition")
            pair = dict.fromkeys(totals, 0)
            for a in range(1, n + 1):
                for b in range(a + 1, n + 1):
                    try:
                        lab = classify_pair(ivs[a], ivs[b]).value
                    except CrossingIntervals:
                        lab = "crossing"
                    if lab in pair:
                        pair[lab] += 1
            if pair != c:
                r.fail(f"window {i}: pairwise labels {pair} differ from vectorised {c}")
    r.detail = {"windows": n_windows, "labels": totals, "contained_steps": contained, "seed": seed}
    return r


# ------------------------------------------------------------- patterns

def pattern_combinatorics(r_max: int = 6, K_max: int = 4, list_r: int = 6, list_K: int = 3) -> CheckResult:
    from .experiments.patterns import (
        brute_force_patterns,
        count_patterns,
        enumerate_patterns,
        pattern_bound,
        realization_lists,
        stack_lists,
    )

    res = CheckResult("pattern_combinatorics")
    counts = {}
    for r in range(1, r_max + 1):
        for Kp in range(1, K_max + 1):
            res.checked += 1
            enum = enumerate_patterns(r, Kp)
            n = len(enum)
            counts[f"{r},{Kp}"] = n
            if len(set(enum)) != n or n != count_patterns(r, Kp) or n > pattern_bound(r, Kp):
                res.fail(f"r={r}, K={Kp}: {n} enumerated, {count_patterns(r, Kp)} recursive, "
                         f"bound {pattern_bound(r, Kp)}")
            if r * Kp <= 12 and r <= 4 and sorted(enum) != brute_force_patterns(r, Kp):
                res.fail(f"r={r}, K={Kp}: enumeration differs from the filtered box")
    lists = 0
    for r in range(1, list_r + 1):
        for Kp in range(1, list_K + 1):
            for J in (tuple(range(1, r + 1)), tuple(range(2, 3 * r + 2, 3))):
                for a in enumerate_patterns(r, Kp):
                    lists += 1
                    if realization_lists(J, a, Kp) != stack_lists(J, a, Kp):
                        res.fail(f"J={J}, a={a}, K={Kp}: list definition and stack differ")
    res.detail = {"counts": counts, "list_instances": lists}
    return res


def rod_fixtures() -> CheckResult:
    """Hand-built rod windows: a bare rod, a rod with one pruned back-step,
    the left/right chain witness and the nested-return witness."""
    from .experiments.patterns import chain_window, necessary_condition_check, nested_return_window
    from .experiments.rods import RodConfig, Window, planted_codes, rod_structure_check

    res = CheckResult("rod_fixtures")
    E = family_e1(3)
    for Kp in (1, 2, 3):
        rc = RodConfig(0, Kp, E.L_E)
        res.checked += 1
        bare = Window(planted_codes(rc, 3, ["free", "rod", "free"]), 0, 3)
        rep = rod_structure_check(bare, E, rc)
        # every interval is (-inf, inf), so the infimum defining k_u is -K
        if rep.checked != 1 or rep.k_values != [-Kp] or rep.violations or "visit_plus" in rep.counts:
            res.fail(f"K={Kp}: bare rod gives k={rep.k_values}, report {rep.to_json()}")
        res.checked += 1
        one = chain_window(rc, 3, 1)
        rep = rod_structure_check(one, E, rc)
        if rep.violations or rep.counts.get("visit_plus", 0) < 1:
            res.fail(f"K={Kp}: back-step fixture {rep.to_json()}")
        res.checked += 1
        v = necessary_condition_check(chain_window(rc, 3, 20), E, rc)
        if v.status != "witness" or v.case != "case-1" or set(v.pattern.a) != {Kp}:
            res.fail(f"K={Kp}: chain fixture verdict {v.to_json()}")
        res.checked += 1
        v = necessary_condition_check(nested_return_window(rc, 3, 18), E, rc)
        if v.status != "witness":
            res.fail(f"K={Kp}: nested fixture verdict {v.to_json()}")
        res.checked += 1
        allcut = Window(planted_codes(rc, 3, ["rod"] * 20), 0, 3)
        if necessary_condition_check(allcut, E, rc).status != "not-applicable":
            res.fail(f"K={Kp}: all-cut window is applicable")
    return res


def deterministic_suite(gamma_hat: float = 0.6595, scale: float = 1.0, harvested: LoopFamily | None = None) -> list:
    """All deterministic checks; `scale` shrinks the random sample sizes."""
    E = family_e1(3)
    k = max(1, int(10_000 * scale))
    out = [
        catalan_counts(10 if scale >= 1 else 8),
        codec_roundtrips(E, 8),
        segment_mass(gamma_hat),
        fiber_bijection(E, 6),
        staging(E, k),
        decompose_reinsert(E, k),
        laminarity(E, k),
        pattern_combinatorics(),
        rod_fixtures(),
    ]
    if harvested is not None:
        out.insert(2, codec_roundtrips(harvested, 8, "codec_roundtrips_harvested"))
    return out
