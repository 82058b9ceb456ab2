"""Acceptance suite: one test per criterion, each recording a PASS/FAIL line
printed in the terminal summary. Sizes and tolerances are the full ones."""

import itertools
import math
import time
from fractions import Fraction

import pytest

from prunewalk import invariants as inv
from prunewalk.cli import run
from prunewalk.experiments.conditional import capped_denominator, catalan_partial_sum, stop_prob_check
from prunewalk.experiments.density import cut_and_rod_density, estimate_kappa
from prunewalk.experiments.rods import RodConfig
from prunewalk.experiments.strategy import StrategyParams, strategy_sweep
from prunewalk.experiments.sweeps import necessary_sweep, rod_structure_sweep
from prunewalk.lattice import family_e1
from prunewalk.srw import WalkConfig, gamma_sweep, harvest_loop_family

E1 = family_e1()
HORIZONS = (10**4, 10**5, 10**6)


@pytest.fixture(scope="session")
def gammas():
    """gamma_hat at the three horizons from 10^5 walks."""
    return gamma_sweep(WalkConfig(d=3, seed=0, horizon=HORIZONS[-1]), 100_000, HORIZONS)


@pytest.fixture(scope="session")
def gamma_hat(gammas):
    return gammas[1].gamma_hat


@pytest.fixture(scope="session")
def kappa():
    return estimate_kappa(E1, 10**5, 200, seed=0, grid=[10**3, 10**4, 10**5])


def _summary(res):
    return f"{res.checked} checked, {len(res.failures)} failures"


def test_01_catalan_counts(record):
    t = time.perf_counter()
    res = inv.catalan_counts(10)
    dt = time.perf_counter() - t
    ok = res.ok and res.detail["counts"] == [1, 1, 2, 5, 14, 42] and dt < 120
    record(1, ok, f"counts {res.detail['counts']} in {dt:.1f}s")
    assert ok, res.failures


def test_02_roundtrips(record):
    fam = harvest_loop_family(0.5, WalkConfig(d=3, seed=0, horizon=10_000), 20_000).family
    a = inv.codec_roundtrips(E1, 8, "E1")
    b = inv.codec_roundtrips(fam, 8, "harvested")
    ok = a.ok and b.ok
    record(2, ok, f"E1 {_summary(a)}; harvested ({len(fam)} loops) {_summary(b)}")
    assert ok, a.failures + b.failures


def test_03_staging(record):
    t = time.perf_counter()
    res = inv.staging(E1, 10_000, 300, seed=0)
    dt = time.perf_counter() - t
    ok = res.ok and res.checked == 10_000 and dt < 300
    record(3, ok, f"{res.checked} paths, {res.detail['split_points']} split points, "
                  f"{len(res.failures)} failures in {dt:.0f}s")
    assert ok, res.failures


def test_04_decompose_and_fibers(record):
    a = inv.decompose_reinsert(E1, 10_000, 200, seed=1)
    b = inv.fiber_bijection(E1, cap=6)
    ok = a.ok and a.checked == 10_000 and b.ok
    record(4, ok, f"reinsert {_summary(a)}; fibers {_summary(b)} over {b.detail['segments']} segments")
    assert ok, a.failures + b.failures


def test_05_laminarity(record):
    res = inv.laminarity(E1, 10_000, 200, seed=2)
    ok = res.ok and res.checked == 10_000
    record(5, ok, f"{res.checked} windows, labels {res.detail['labels']}, "
                  f"{res.detail['contained_steps']} contained steps, {len(res.failures)} failures")
    assert ok, res.failures


def test_06_segment_mass(record, gamma_hat):
    res = inv.segment_mass(gamma_hat, max_len=20, tol=1e-3)
    closed = 18 - 12 * math.sqrt(2)
    ok = res.ok and abs(res.detail["partial_sum"] - closed) <= 1e-3
    record(6, ok, f"partial sum {res.detail['partial_sum']:.6f} vs {closed:.6f}, "
                  f"1/gamma_hat {1 / gamma_hat:.4f}")
    assert ok, res.failures


def test_07_gamma(record, gammas):
    se = max(g.stderr for g in gammas)
    spread = max(abs(a.gamma_hat - b.gamma_hat) for a, b in itertools.combinations(gammas, 2))
    alphas = [g.alpha_hat for g in gammas]
    # delta method: d alpha / d gamma = alpha^2 / (1 - gamma)
    se_alpha = max(g.alpha_hat**2 / (1 - g.gamma_hat) * g.stderr for g in gammas)
    a_spread = max(alphas) - min(alphas)
    ok = (spread <= 2 * se and gammas[1].stderr <= 0.002 and all(map(math.isfinite, alphas))
          and a_spread <= 2 * se_alpha)
    record(7, ok, "gamma_hat " + ", ".join(f"{g.gamma_hat:.5f}" for g in gammas)
           + f" (spread {spread:.5f}, 2se {2 * se:.5f}); alpha_hat "
           + ", ".join(f"{a:.4f}" for a in alphas))
    assert ok


def test_08_kappa(record, kappa):
    med = [kappa.median_abs_dev[n] for n in (10**3, 10**4, 10**5)]
    ok = 0 < kappa.kappa_hat < 1 and kappa.rel_stderr < 0.01 and med[0] > med[1] > med[2]
    record(8, ok, f"kappa_hat {kappa.kappa_hat:.5f}, rel stderr {kappa.rel_stderr:.2e}, "
                  f"median deviations {', '.join(f'{m:.5f}' for m in med)}")
    assert ok


def test_09_cut_rod(record):
    rc = RodConfig.for_family(E1, 1)
    res = cut_and_rod_density(E1, rc, 50, 20_000, 5_000, seed=0, oracle_L=2)
    own = cut_and_rod_density(E1, rc, 50, 20_000, 5_000, seed=0)
    ok = (res.theta_cut > 0 and res.cv_cut < 0.10 and res.containment_failures == 0
          and res.oracle["within_3sigma"] and own.oracle["within_3sigma"])
    o = res.oracle
    record(9, ok, f"theta_cut {res.theta_cut:.4f}, cv {res.cv_cut:.4f}, containment failures "
                  f"{res.containment_failures}, blocks {o['observed']} vs {o['expected']:.1f} "
                  f"(z {o['z']:.2f}); L={rc.L} blocks {own.oracle['observed']}")
    assert ok


def test_10_stop_probability(record, gamma_hat):
    full = stop_prob_check(E1, gamma_hat, n_samples=100_000, seed=0, threshold=500)
    capped = stop_prob_check(E1, gamma_hat, n_samples=100_000, seed=1, threshold=500, cap=4)
    exact = all(capped_denominator(E1, (), c) == catalan_partial_sum(c) for c in range(0, 9, 2))
    trivial = capped_denominator(E1, (), 0) == Fraction(1)
    ok = full.ok and capped.ok and exact and trivial and any(a.analytic for a in capped.atoms)
    record(10, ok, f"{len(full.atoms)} atoms uncapped, {len(capped.atoms)} capped; "
                   f"{len(full.failures) + len(capped.failures)} below gamma_hat - 3se, "
                   f"{len(capped.analytic_failures)} analytic mismatches, exact denominators {exact}")
    assert ok


def test_11_strategy(record, kappa, gammas):
    params = StrategyParams(10**4, 1.0, kappa.kappa_hat, gammas[1].alpha_hat)
    sm = strategy_sweep(E1, params, 1000, seed=0)
    sound = not sm.soundness_failures and not sm.budget_failures
    first = not sm.first_critical_failures
    ok = sound and first and len(sm.runs) == 1000
    record(11, ok, f"{len(sm.runs)} runs, G held in {sm.G_count}, soundness failures "
                   f"{len(sm.soundness_failures)}; first-critical equality failed on "
                   f"{len(sm.first_critical_failures)} of {sm.critical_detections} detections")
    assert sound, sm.soundness_failures
    assert first, sm.first_critical_failures[:5]


def test_12_rod_structure(record):
    parts = []
    ok = True
    for K in (1, 2):
        rc = RodConfig.for_family(E1, K)
        for kind in ("planted", "sampled"):
            res = rod_structure_sweep(E1, rc, 1000, kind, seed=K)
            ok &= res.checked >= 1000 and not res.violations
            parts.append(f"K={K} {kind}: {res.checked} rods, {len(res.violations)} violations")
    record(12, ok, "; ".join(parts))
    assert ok


def test_13_patterns(record):
    comb = inv.pattern_combinatorics(6, 4, 6, 3)
    nec = necessary_sweep(E1, RodConfig.for_family(E1, 1), 1000, "planted", seed=0)
    ok = comb.ok and nec.applicable >= 1000 and not nec.counterexamples
    record(13, ok, f"patterns {_summary(comb)}; {nec.applicable} applicable windows, "
                   f"{nec.witnesses} witnesses, {len(nec.counterexamples)} counterexamples")
    assert ok, comb.failures + nec.counterexamples[:5]


DETERMINISM_RUNS = [
    ["estimate", "gamma", "--horizon", "10000", "--samples", "20000", "--seed", "3"],
    ["estimate", "kappa", "--n", "10000", "--seeds", "20", "--seed", "3"],
    ["estimate", "theta", "--size", "4000", "--margin", "1000", "--seeds", "6", "--seed", "3"],
    ["experiment", "strategy", "--n", "5000", "--runs", "20", "--seed", "3", "--kappa-hat", "0.94",
     "--alpha-hat", "0.92"],
    ["experiment", "rod", "--rods", "200", "--seed", "3"],
    ["experiment", "necessary", "--windows", "30", "--seed", "3"],
    ["experiment", "stop-prob", "--samples", "5000", "--threshold", "200", "--gamma-hat", "0.66", "--seed", "3"],
    ["experiment", "tail", "--N", "2000", "--seeds", "50", "--seed", "3", "--format", "csv"],
    ["selftest", "--scale", "0.01"],
]


def test_14_determinism(record, tmp_path):
    diffs = []
    for i, argv in enumerate(DETERMINISM_RUNS):
        blobs = []
        for rep, threads in enumerate(("1", "3", "1")):
            out = tmp_path / f"r{i}_{rep}"
            code = run(argv + ["--threads", threads, "--out", str(out)])
            assert code in (0, 1), argv
            blobs.append(out.read_bytes())
        if len(set(blobs)) != 1:
            diffs.append(" ".join(argv[:2]))
    ok = not diffs
    record(14, ok, f"{len(DETERMINISM_RUNS)} commands at threads 1/3/1, differing: {diffs or 'none'}")
    assert ok
