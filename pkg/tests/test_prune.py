import math

import numpy as np
import pytest

from prunewalk.lattice import family_e1, family_squares, path_from_codes, validate_path
from prunewalk.prune import (
    CrossingIntervals, PairClass, PruningInterval, UncertifiableRegion, classify_pair, cut_steps,
    cut_steps_literal, decompose, first_loop_time, prune, prune_literal, prune_once, pruning_interval,
    pruning_interval_literal, reinsert, retained_profile, retained_profile_literal, two_sided_prune,
)

E = family_e1()
O, U1, U2 = (0, 0, 0), (1, 0, 0), (0, 1, 0)
X2 = (2, 0, 0)
MU1 = (-1, 0, 0)


def P(*pts):
    return validate_path(pts)


def test_first_loop_time():
    assert first_loop_time(P(O, U1, O, U1), E) == (2, 1)
    assert first_loop_time(P(O, U2, (1, 1, 0)), E) is None
    assert first_loop_time(P(O, U1, X2, U1), E) == (3, 1)


def test_prune_once():
    assert prune_once(P(O, U1, O, U1), E) == P(O, U1)
    assert prune_once(P(O, U2, (1, 1, 0)), E) == P(O, U2, (1, 1, 0))
    assert prune_once(P(O, U1, X2, U1, O), E) == P(O, U1, O)


def test_prune():
    assert prune(P(O, U1, X2, U1, O), E) == P(O)
    assert prune(P(O, U1), E) == P(O, U1)
    assert prune(P(O, U1, O, MU1, O), E) == P(O, MU1, O)


def test_prune_matches_literal_on_random_paths():
    rng = np.random.default_rng(5)
    for F in (E, family_squares()):
        for _ in range(200):
            s = path_from_codes(rng.integers(0, 6, rng.integers(0, 25)), 3)
            assert prune(s, F) == prune_literal(s, F)


def test_retained_profile():
    r = retained_profile(P(O, U1, O, U2), E)
    assert r.N == (0, 0, 0, 1) and r.mask == (False, False, True) and r.n_inverse[1] == 3
    r = retained_profile(P(O, U2, (0, 2, 0)), E)
    assert r.N == (0, 1, 2) and all(r.mask)
    assert retained_profile(P(O, U1, O), E).N == (0, 0, 0)


def test_retained_profile_matches_definition():
    rng = np.random.default_rng(6)
    for _ in range(100):
        s = path_from_codes(rng.integers(0, 6, rng.integers(1, 14)), 3)
        assert retained_profile(s, E).N == retained_profile_literal(s, E)


def test_decompose_examples():
    dec = decompose(P(O, U1, O, U2), E)
    assert dec.skeleton == P(O, U2)
    assert dec.segments == (P(O, U1, O), P(O))
    dec = decompose(P(O, U2), E)
    assert dec.segments == (P(O), P(O))
    dec = decompose(P(O, U1, O), E)
    assert dec.skeleton == P(O) and dec.segments == (P(O, U1, O),)


def test_reinsert_examples():
    s = P(O, U1, O, U2)
    assert reinsert(decompose(s, E), E) == s
    assert reinsert(decompose(P(O), E), E) == P(O)


def test_cut_steps_straight_and_literal():
    s = P(O, U2, (0, 2, 0), (0, 3, 0))
    assert cut_steps(s, E).steps() == [1, 2, 3]
    rng = np.random.default_rng(7)
    for _ in range(40):
        s = path_from_codes(rng.integers(0, 6, rng.integers(1, 9)), 3)
        assert cut_steps(s, E).mask == cut_steps_literal(s, E)


def test_two_sided_prune():
    s = P(O, U2, (0, 2, 0))
    assert two_sided_prune(s, E)[0] == s
    s = P(O, U2, (1, 1, 0), U2, (0, 2, 0))
    skel, keep = two_sided_prune(s, E)
    assert skel == P(O, U2, (0, 2, 0))
    assert [i for i, k in enumerate(keep) if k] == [1, 4]
    with pytest.raises(UncertifiableRegion):
        two_sided_prune(P(O, U1, O), E)


def test_pruning_interval_examples():
    z = pruning_interval(1, P(O, U1, O), E)
    assert (z.zeta_minus, z.zeta_plus) == (0, 2)
    z = pruning_interval(2, P(O, U1, X2, U1, O), E)
    assert (z.zeta_minus, z.zeta_plus) == (1, 3)
    z = pruning_interval(2, P(O, U2, (0, 2, 0)), E)
    assert z.zeta_minus == -math.inf and z.zeta_plus == math.inf


def test_pruning_interval_matches_definition():
    rng = np.random.default_rng(8)
    for _ in range(60):
        s = path_from_codes(rng.integers(0, 6, rng.integers(1, 12)), 3)
        for j in range(1, s.length + 1):
            a, b = pruning_interval(j, s, E), pruning_interval_literal(j, s, E)
            assert (a.zeta_minus, a.zeta_plus) == (b.zeta_minus, b.zeta_plus)


def test_classify_pair():
    s = P(O, U1, X2, U1, O)
    assert classify_pair(pruning_interval(2, s, E), pruning_interval(4, s, E)) == PairClass.C2
    # nothing survives in Prune(s[0, 4]), so the second interval reaches back to 0
    s = P(O, U1, O, U1, O)
    z3 = pruning_interval(3, s, E)
    assert (z3.zeta_minus, z3.zeta_plus) == (0, 4)
    assert classify_pair(pruning_interval(1, s, E), z3) == PairClass.C2
    s = P(O, U1, O, U2, (1, 1, 0), U2)
    assert classify_pair(pruning_interval(1, s, E), pruning_interval(4, s, E)) == PairClass.DISJOINT
    z = pruning_interval(1, s, E)
    assert classify_pair(z, z) == PairClass.C3
    with pytest.raises(CrossingIntervals):
        classify_pair(PruningInterval(1, 0, 3, (0, 9)), PruningInterval(2, 1, 5, (0, 9)))
