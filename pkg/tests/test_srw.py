import math

import numpy as np
import pytest

from prunewalk.lattice import family_e1, is_simple_loop, path_from_codes, validate_path
from prunewalk.srw import (
    ConfigError, WalkConfig, alpha_of_gamma, estimate_gamma, estimate_vartheta, excursion_profile,
    generate_codes, generate_two_sided, generate_walk, harvest_loop_family, local_time_stats,
    rate_function, rebuild_from_loops, segment_mass_e1, simple_loop_decomposition, vartheta_e1,
)

O, U1, U2 = (0, 0, 0), (1, 0, 0), (0, 1, 0)


def P(*pts):
    return validate_path(pts)


def test_walk_determinism():
    cfg = WalkConfig(d=3, seed=11, horizon=500)
    assert generate_walk(cfg, 3) == generate_walk(cfg, 3)
    assert not np.array_equal(generate_codes(cfg, 3), generate_codes(cfg, 4))


def test_step_histogram_uniform():
    codes = generate_codes(WalkConfig(d=3, seed=1, horizon=10**6))
    counts = np.bincount(codes, minlength=6)
    n, p = codes.shape[0], 1 / 6
    assert np.all(np.abs(counts - n * p) <= 4 * math.sqrt(n * p * (1 - p)))


def test_two_sided_halves_independent():
    tw = generate_two_sided(WalkConfig(d=3, seed=2, horizon=10**5))
    assert not tw.points[tw.half].any()
    back = (tw.codes[:tw.half][::-1] == 0).astype(float)
    fwd = (tw.codes[tw.half:] == 0).astype(float)
    r = np.corrcoef(back, fwd)[0, 1]
    assert abs(r) <= 4 / math.sqrt(tw.half)


def test_config_errors():
    with pytest.raises(ConfigError):
        WalkConfig(d=0)
    with pytest.raises(ConfigError):
        estimate_gamma(WalkConfig(d=2, horizon=10), 10)
    with pytest.raises(ConfigError):
        estimate_gamma(WalkConfig(d=3, horizon=10), 0)


def test_excursion_profile():
    rec = excursion_profile(P(O, U1, O, U2, (0, 2, 0)), family_e1())
    assert rec.count == 1 and rec.excursions[0] == P(O, U1, O) and rec.flags == (True,)
    assert excursion_profile(P(O, U1, (2, 0, 0))).count == 0


def test_simple_loop_decomposition():
    parts = simple_loop_decomposition(P(O, U1, O))
    assert [(p.loop.points, p.index) for p in parts] == [((O, U1, O), 0)]
    parts = simple_loop_decomposition(P(O, U1, O, U1, O))
    assert [p.loop.points for p in parts] == [(O, U1, O)] * 2
    parts = simple_loop_decomposition(P(O, U1, (1, 1, 0), U1, O))
    assert [p.loop.points for p in parts] == [(O, U2, O), (O, U1, O)]
    assert parts[0].base == U1


def test_simple_loop_decomposition_rebuilds():
    rng = np.random.default_rng(3)
    done = 0
    while done < 50:
        codes = rng.integers(0, 6, int(rng.integers(2, 40)))
        s = path_from_codes(codes, 3)
        hits = [t for t in range(1, s.length + 1) if s[t] == O]
        if not hits:
            continue
        loop = s.window(0, hits[-1])
        parts = simple_loop_decomposition(loop)
        assert all(is_simple_loop(p.loop.path) for p in parts)
        assert rebuild_from_loops(parts, 3) == loop
        done += 1


def test_rate_function():
    assert rate_function(0.3, 0.3) == 0
    assert rate_function(0.25, 0.5) == pytest.approx(0.25 * math.log(0.5) + 0.75 * math.log(1.5))
    assert rate_function(0.25, 0.5) == pytest.approx(0.1308, abs=1e-4)
    # direct evaluation: 0.5 log(0.5/0.999) + 0.5 log(500) = 2.7612...
    assert rate_function(0.5, 0.999) == pytest.approx(2.76123, abs=1e-5)
    vals = [rate_function(0.5, 1 - 10.0**-k) for k in range(3, 9)]
    assert all(b > a + 1 for a, b in zip(vals, vals[1:]))
    with pytest.raises(ValueError):
        rate_function(0.0, 0.5)


def test_local_time_stats():
    assert local_time_stats(P(O, U1, (2, 0, 0))).max_local_time == 1
    st = local_time_stats(P(O, U1, O, U1, O))
    assert st.max_local_time == 3 and st.argmax == (O,)


def test_gamma_small_and_dimension_order():
    g3 = estimate_gamma(WalkConfig(d=3, seed=4, horizon=2000), 20000)
    g5 = estimate_gamma(WalkConfig(d=5, seed=4, horizon=2000), 20000)
    assert 0.6 < g3.gamma_hat < 0.72
    assert g5.gamma_hat - g3.gamma_hat > 3 * math.hypot(g3.stderr, g5.stderr)
    assert math.isfinite(g3.alpha_hat) and g3.alpha_hat == pytest.approx(alpha_of_gamma(g3.gamma_hat))
    assert estimate_gamma(WalkConfig(d=3, seed=4, horizon=2000), 20000) == g3


def test_vartheta_closed_form():
    cfg = WalkConfig(d=3, seed=5, horizon=5000)
    g = estimate_gamma(cfg, 50000).gamma_hat
    v = estimate_vartheta(family_e1(), cfg, 50000)
    assert abs(v.estimate - vartheta_e1(g)) <= 3 * v.stderr + 0.005
    assert segment_mass_e1() == pytest.approx(1.029437, abs=1e-6)


def test_harvest_small():
    res = harvest_loop_family(0.5, WalkConfig(d=3, seed=0, horizon=2000), 5000, gamma=0.66)
    E = res.family
    assert E.walk_compatible and all(is_simple_loop(e.path) for e in E.loops)
    backs = {(O, tuple(int(a == i) * s for a in range(3)), O) for i in range(3) for s in (1, -1)}
    assert backs <= {e.points for e in E.loops}
    assert res.held_out.estimate > res.target
    with pytest.raises(ConfigError):
        harvest_loop_family(1.5, WalkConfig(d=3), 10)
