import pytest

from prunewalk.lattice import family_e1, family_squares, loop_family_new, validate_path
from prunewalk.segments import (
    ESRep, FiberError, MarkedTree, SegmentError, boundary_scan, brute_force_counts, e_dfs,
    enumerate_segments, es_decode, es_encode, es_of_segment, fiber_data, fiber_factorize,
    fiber_reconstruct, figure_tree, induced_decomposition, is_partition, relative_decomposition,
    seg_membership, segment_of_es, segment_of_tree, tree_of_segment, validate_tree,
)

E = family_e1()
O, U1, U2 = (0, 0, 0), (1, 0, 0), (0, 1, 0)
X2 = (2, 0, 0)
# loop types 1 and 2 with one and two children per block
E12 = loop_family_new([[O, U1, O], [O, U1, (1, 1, 0), O]])


def P(*pts):
    return validate_path(pts)


def test_seg_membership():
    assert seg_membership(P(O, U1, O), E)
    assert not seg_membership(P(O, U1, O, (-1, 0, 0), O), E)
    assert seg_membership(P(O, U1, O), E, prefix=P(O, U2))


def test_enumerate_counts():
    lens = [p.length for p in enumerate_segments(E, 6)]
    assert [lens.count(k) for k in (0, 2, 4, 6)] == [1, 1, 2, 5]
    assert enumerate_segments(family_squares(), 0) == [P(O)]
    assert list(brute_force_counts(E, 6)) == [1, 0, 1, 0, 2, 0, 5]


def test_enumerate_matches_brute_force_for_squares():
    F = family_squares()
    lens = [p.length for p in enumerate_segments(F, 4)]
    assert [lens.count(k) for k in range(5)] == list(brute_force_counts(F, 4))


def test_validate_tree():
    assert validate_tree(MarkedTree({(): (1, 2, 2)}), E12)
    assert not validate_tree(MarkedTree({(): (2,)}), E12)
    assert validate_tree(MarkedTree(), E12)


def test_e_dfs_small():
    assert e_dfs(MarkedTree(), E) == [()]
    assert e_dfs(MarkedTree({(): (1,)}), E) == [(), (1,), ()]


def test_figure_tree_traversal():
    T = figure_tree()
    assert len(T.vertices()) == 10 and validate_tree(T, E12)
    assert e_dfs(T, E12) == [(), (1,), (1, 1), (1, 2), (1,), (), (2,), (3,), (3, 1), (3, 1, 1), (3, 1),
                             (3, 2), (3,), (3, 3), (3,), ()]
    W = es_encode(T, E12)
    assert W[()] == (1, 2)
    root = [b for b in boundary_scan(W, E12) if len(b.v) == 1]
    assert [b.v[0] for b in root] == [1, 2, 4]
    assert segment_of_tree(T, E12).length == 15


def test_tree_of_segment_examples():
    assert tree_of_segment(P(O, U1, O), E) == MarkedTree({(): (1,)})
    assert tree_of_segment(P(O, U1, O, U1, O), E) == MarkedTree({(): (1, 1)})
    assert tree_of_segment(P(O, U1, X2, U1, O), E) == MarkedTree({(): (1,), (1,): (1,)})
    assert segment_of_tree(MarkedTree(), E) == P(O)
    assert segment_of_tree(MarkedTree({(): (1, 1)}), E) == P(O, U1, O, U1, O)


def test_es_roundtrip_and_errors():
    for eta in enumerate_segments(family_squares(), 6):
        W = es_of_segment(eta, family_squares())
        assert segment_of_es(W, family_squares()) == eta
        assert ESRep.from_json(W.to_json()) == W
    assert es_encode(MarkedTree(), E) == ESRep()
    with pytest.raises(SegmentError):
        ESRep({(): (1, 0, 1)})
    with pytest.raises(SegmentError):
        es_decode(ESRep({(): (1,), (2,): (1,)}), E)


def test_boundary_scan():
    bs = boundary_scan(ESRep({(): (1, 1)}), E)
    root = [(b.v, b.pre, b.next) for b in bs if len(b.v) == 1]
    assert root == [((1,), 0, 1), ((2,), 1, 1), ((3,), 2, 0)]
    assert [(b.v, b.pre, b.next) for b in boundary_scan(ESRep(), E)] == [((1,), 0, 0)]


def test_relative_decomposition():
    W = ESRep({(): (1, 1)})
    rd = relative_decomposition(W, E, (2,))
    assert rd.explored == {(), (1,)} and rd.parent_block == {(2,)}
    assert all(not ys for ys in rd.younger.values())
    rd = relative_decomposition(W, E, (1,))
    assert rd.explored == {()} and rd.parent_block == {(1,), (2,)}
    T = figure_tree()
    W = es_encode(T, E12)
    for b in boundary_scan(W, E12):
        assert is_partition(relative_decomposition(W, E12, b.v).parts(), T.vertices())


def test_induced_decomposition_examples():
    eta = P(O, U1, O, U1, O)
    d = induced_decomposition(eta, E, (3,))
    assert d.eta_exp == eta and d.eta_par == P(O) and not d.pieces
    d = induced_decomposition(eta, E, (2,))
    assert d.eta_exp == P(O, U1, O) and d.eta_par == P(O, U1, O) and not d.pieces
    eta = P(O, U1, X2, U1, O)
    d = induced_decomposition(eta, E, (1, 1))
    assert d.eta_par == P(O, U1, O) and d.eta_exp == P(O, U1, O)


def test_fiber_roundtrip_and_rejection():
    eta = P(O, U1, X2, U1, O, U1, O)
    for b in boundary_scan(es_of_segment(eta, E), E):
        h = fiber_data(eta, E, b.v)
        par, pieces = fiber_factorize(eta, h, E)
        assert fiber_reconstruct(h, par, pieces, E) == eta
    h = fiber_data(eta, E, (2,))
    with pytest.raises(FiberError):
        fiber_factorize(P(O, U1, O), h, E)
