from fractions import Fraction
import itertools

import pytest

from prunewalk.lattice import (
    LoopFamilyError, Path, PathError, SimpleLoop, concat, family_e1, insert_loop, local_time,
    loop_family_from_json, loop_family_new, path_from_codes, path_probability, validate_path,
)

O = (0, 0, 0)
U1 = (1, 0, 0)
U2 = (0, 1, 0)
E1_LOOP = SimpleLoop(validate_path([O, U1, O]))


def P(*pts):
    return validate_path(pts)


def test_validate_path():
    assert validate_path([O]).length == 0
    p = validate_path([O, U1, O], require_nn=True)
    assert p.length == 2 and p.nearest_neighbor
    with pytest.raises(PathError):
        validate_path([O, (2, 0, 0)], require_nn=True)
    with pytest.raises(PathError):
        validate_path([])
    with pytest.raises(PathError):
        validate_path([O, (1, 0)])


def test_concat_modes():
    assert concat(P(O, U1), P(U1, (1, 1, 0)), "direct") == P(O, U1, (1, 1, 0))
    assert concat(P(O, U1), P(O, U2), "translated") == P(O, U1, (1, 1, 0))
    with pytest.raises(PathError):
        concat(P(O, U1), P(U2, O), "direct")
    with pytest.raises(PathError):
        concat(P(O, U1), P(U2, O), "translated")


def test_insert_loop():
    assert insert_loop(P(O, U2), 0, E1_LOOP) == P(O, U1, O, U2)
    assert insert_loop(P(O, U2), 1, E1_LOOP) == P(O, U2, (1, 1, 0), U2)
    assert insert_loop(P(O), 0, E1_LOOP) == P(O, U1, O)
    with pytest.raises(PathError):
        insert_loop(P(O, U2), 2, E1_LOOP)


def test_local_time():
    eta = P(O, U1, O, U1, O)
    assert local_time(eta, O) == 3
    assert local_time(eta, U2) == 0
    assert local_time(P(O, U1, (2, 0, 0), U1, O), U1) == 2


def test_path_probability():
    assert path_probability(P(O)) == 1
    assert path_probability(P(O, U1, O)) == Fraction(1, 36)
    assert path_probability(P(O, (2, 0, 0))) == 0
    with pytest.raises(PathError):
        path_probability(P(U1, O))


def test_probability_sums_to_one():
    for n in range(5):
        total = sum(path_probability(path_from_codes(c, 3)) for c in itertools.product(range(6), repeat=n))
        assert total == 1


def test_probability_multiplicative_under_insertion():
    eta = path_from_codes([2, 0, 5, 1], 3)
    for j in range(eta.length + 1):
        assert path_probability(insert_loop(eta, j, E1_LOOP)) == path_probability(eta) * Fraction(1, 36)


def test_local_time_after_insertion():
    eta = path_from_codes([0, 2, 1, 1, 3], 3)
    e = SimpleLoop(P(O, U1, (1, 1, 0), U2, O))
    for j in range(eta.length + 1):
        new = insert_loop(eta, j, e)
        base = eta[j]
        for x in set(new.points):
            extra = sum(1 for q in e.points[1:] if tuple(a + b for a, b in zip(base, q)) == x)
            assert local_time(new, x) == local_time(eta, x) + extra


def test_loop_family_constants():
    E = family_e1()
    assert E.lambdas == (1,) and E.L_E == 2 and E.D_E == 1 and E.walk_compatible
    sq = [O, U1, (1, 1, 0), U2, O]
    E2 = loop_family_new([[O, U1, O], sq])
    assert E2.lambdas == (1, 3) and E2.L_E == 3
    with pytest.raises(LoopFamilyError):
        loop_family_new([[O, U1, O, U1, O]])
    with pytest.raises(LoopFamilyError):
        loop_family_new([[O, O]], strict=True)


def test_loop_family_json_errors():
    with pytest.raises(LoopFamilyError, match="loop 0, point 1"):
        loop_family_from_json({"d": 3, "loops": [[[0, 0, 0], [1, 0]]]})
    E = loop_family_from_json(family_e1().to_json())
    assert E == family_e1()


def test_translated_concat_of_loops_is_rooted():
    a, b = P(O, U1, O), P(O, U2, O)
    c = concat(a, b, "translated")
    assert c.first == O and c.last == O
    ab_c = concat(concat(P(O, U1), P(U1, (1, 1, 0)), "direct"), P((1, 1, 0), U2), "direct")
    a_bc = concat(P(O, U1), concat(P(U1, (1, 1, 0)), P((1, 1, 0), U2), "direct"), "direct")
    assert ab_c == a_bc
