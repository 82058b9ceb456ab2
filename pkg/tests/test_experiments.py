import math

import numpy as np
import pytest

from prunewalk.experiments.conditional import (
    admissible_class, capped_denominator, catalan_partial_sum, segment_law_check, stop_prob_check,
)
from prunewalk.experiments.density import cut_and_rod_density, empty_effect_family, estimate_kappa, window_cut_sample
from prunewalk.experiments.patterns import (
    brute_force_patterns, chain_window, count_patterns, enumerate_patterns, necessary_condition_check,
    pattern_bound, realization_lists, stack_lists,
)
from prunewalk.experiments.rods import RodConfig, RodError, Window, planted_codes, rod_points, rod_structure_check
from prunewalk.experiments.strategy import StrategyParams, ball_size, strategy_run
from prunewalk.experiments.sweeps import necessary_sweep, rod_structure_sweep
from prunewalk.experiments.tails import (
    excursion_bound_check, identity_baseline, nested_segments, pruned_local_time_tail, tail_dominance,
)
from prunewalk.invariants import rod_fixtures
from prunewalk.lattice import family_backtracks, family_e1
from prunewalk.srw import ConfigError

E = family_e1()


def test_pattern_counts():
    assert count_patterns(1, 2) == 3
    assert enumerate_patterns(2, 1) == [(0, 0), (0, 1), (0, 2), (1, 0), (1, 1)]
    assert count_patterns(2, 1) == 5 <= pattern_bound(2, 1) == math.comb(4, 2)
    for r in range(1, 4):
        for K in range(1, 3):
            assert enumerate_patterns(r, K) == brute_force_patterns(r, K)


def test_realization_lists():
    want = [[(1, 2)], [(2, 2), (2, 1)]]
    assert realization_lists((1, 2), (1, 2), 2) == want
    assert stack_lists((1, 2), (1, 2), 2) == want


def test_rod_fixtures():
    res = rod_fixtures()
    assert res.ok, res.failures


def test_bare_rod_k_index():
    rc = RodConfig.for_family(E, 2)
    win = Window(planted_codes(rc, 3, ["rod"] * 3), 0, 3)
    rep = rod_structure_check(win, E, rc)
    assert rep.checked == 3 and rep.k_values == [-2, -2, -2] and not rep.violations


def test_rod_points_straight():
    rc = RodConfig.for_family(E, 1)
    win = Window(planted_codes(rc, 3, ["rod"] * 4), 0, 3)
    assert len(rod_points(win, rc)) == 4
    with pytest.raises(RodError):
        RodConfig(0, 0, 2)


def test_necessary_witness_and_not_applicable():
    rc = RodConfig.for_family(E, 1)
    v = necessary_condition_check(chain_window(rc, 3, 20), E, rc)
    assert v.status == "witness" and v.case == "case-1" and set(v.pattern.a) == {rc.K}
    win = Window(planted_codes(rc, 3, ["rod"] * 6), 0, 3)
    assert necessary_condition_check(win, E, rc).status == "not-applicable"


def test_small_sweeps():
    rc = RodConfig.for_family(E, 1)
    for kind in ("planted", "sampled"):
        res = rod_structure_sweep(E, rc, 50, kind, seed=3)
        assert res.checked >= 50 and not res.violations
    res = necessary_sweep(E, rc, 10, "planted", seed=3)
    assert res.applicable >= 10 and not res.counterexamples


def test_empty_effect_kappa_is_one():
    k = estimate_kappa(empty_effect_family(), 2000, 4, seed=1)
    assert k.kappa_hat == 1.0


def test_kappa_small():
    k = estimate_kappa(E, 5000, 8, seed=1)
    assert 0 < k.kappa_hat < 1 and k.rel_stderr < 0.05


def test_straight_window_all_cut():
    rc = RodConfig.for_family(E, 1)
    win = Window(planted_codes(rc, 3, ["rod"] * 4), 0, 3)
    smp = window_cut_sample(win, E, rc, (0, win.end))
    assert smp.cut == smp.steps and smp.rods == 4 and smp.rod_cut == 4 and not smp.containment_failures


def test_cut_density_small():
    res = cut_and_rod_density(E, RodConfig.for_family(E, 1), 4, 2000, 500, seed=2, oracle_L=2)
    assert res.theta_cut > 0 and res.containment_failures == 0


def test_segment_law_cap_zero():
    rep = segment_law_check(E, (2,), cap=0, horizon=50, n_samples=200, seed=1)
    assert rep.atoms == 1 and rep.tv == 0


def test_admissible_class_and_denominator():
    cls = admissible_class(E, (), 4)
    assert len(cls) == 4
    assert capped_denominator(E, (), 4) == catalan_partial_sum(4)
    # after a +u1 step the loop along u1 can no longer start from the tip's base
    assert capped_denominator(E, (1,), 4) > 0


def test_stop_prob_small():
    rep = stop_prob_check(E, 0.6595, n_samples=3000, seed=3, threshold=200, cap=4)
    assert rep.ok
    assert any(a.analytic == pytest.approx(float(1 / catalan_partial_sum(4))) for a in rep.atoms)


def test_strategy_run_small():
    p = StrategyParams(2000, 1.0, 0.94, 0.928)
    r = strategy_run(E, p, 0, seed=0)
    assert r.verified and r.T >= 0 and r.distinct_times
    assert ball_size(3, 1) == 7
    with pytest.raises(ConfigError):
        StrategyParams(1, 1.0, 0.9, 0.9)


def test_tails():
    curves = pruned_local_time_tail(E, 2000, [500, 2000], 20, seed=1)
    assert [c.N for c in curves] == [500, 2000]
    assert curves[0].rows[0][1] <= 1.0
    assert identity_baseline(empty_effect_family(), 1000, 10) == 0
    assert nested_segments(E, family_backtracks(), 6)
    dom = tail_dominance(E, family_backtracks(), 2000, 50, seed=1, max_len=6)
    assert dom.ok
    ex = excursion_bound_check(E, 2000, 50, seed=1)
    assert ex.ok and ex.checked > 0
