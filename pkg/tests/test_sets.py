import json
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from svfapprox.errors import ChainTruncationWarning, DimensionError, UsageError
from svfapprox.sets import (CompactSet, Norm, dedup_close, dist_point_set, from_nested, hausdorff,
                            is_metric_chain, is_metric_pair, kuratowski_limsup, metric_chain_through,
                            metric_chains, metric_linear_combination, metric_pairs,
                            minkowski_linear_combination, project, vnorm)


def cs(*pts):
    return CompactSet(list(pts))


# ---- construction and serialization ----

def test_dedup_and_sorting():
    A = CompactSet([[3.0], [1.0], [3.0]])
    assert len(A) == 2
    assert A.to_list() == [[1.0], [3.0]]


def test_flat_sequence_is_one_dimensional():
    assert CompactSet([0, 2]).dim == 1


def test_json_roundtrip():
    A = CompactSet([[0.0, 1.0], [2.0, -1.0]])
    assert CompactSet.from_json(A.to_json()) == A
    assert json.loads(A.to_json()) == [[0.0, 1.0], [2.0, -1.0]]


def test_mixed_dimensions_rejected():
    with pytest.raises(DimensionError):
        from_nested([[0.0], [1.0, 2.0]])


def test_empty_and_nonfinite_rejected():
    with pytest.raises(UsageError):
        CompactSet([])
    with pytest.raises(UsageError):
        CompactSet([[np.nan]])


# ---- distances and projections ----

def test_dist_point_set_examples():
    assert dist_point_set([0.0], cs(0.0)) == 0.0
    assert dist_point_set([0.0], cs(-1.0, 1.0)) == 1.0
    assert dist_point_set([0.0, 0.0], CompactSet([[3.0, 4.0]])) == 5.0


def test_dist_norm_choice():
    A = CompactSet([[3.0, 4.0]])
    assert dist_point_set([0, 0], A, Norm.MAX) == 4.0
    assert dist_point_set([0, 0], A, Norm.SUM) == 7.0


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        dist_point_set([0.0, 0.0], cs(1.0))
    with pytest.raises(DimensionError):
        hausdorff(cs(0.0), CompactSet([[0.0, 0.0]]))


def test_project_examples():
    assert project([0.0], cs(-1.0, 1.0)) == cs(-1.0, 1.0)
    assert project([2.0], cs(0.0, 3.0)) == cs(3.0)
    A = cs(-2.0, 0.5, 7.0)
    for a in A:
        assert project(a, A) == CompactSet([a])


def test_project_tie_tolerance():
    assert len(project([0.0], cs(-1.0, 1.0 + 1e-12))) == 2
    assert len(project([0.0], cs(-1.0, 1.0 + 1e-6))) == 1


def test_hausdorff_examples():
    assert hausdorff(cs(0.0), cs(1.0)) == 1.0
    A = cs(0.0, 5.0)
    assert hausdorff(A, A) == 0.0
    assert hausdorff(cs(0.0, 2.0), cs(1.0)) == 1.0


def test_hausdorff_brute_force_oracle(rng):
    for _ in range(50):
        A = CompactSet(rng.normal(size=(4, 2)))
        B = CompactSet(rng.normal(size=(3, 2)))
        one = max(min(np.linalg.norm(a - b) for b in B) for a in A)
        two = max(min(np.linalg.norm(a - b) for a in A) for b in B)
        assert hausdorff(A, B) == pytest.approx(max(one, two), abs=1e-14)


# ---- metric pairs and chains ----

def test_metric_pairs_examples():
    assert set(metric_pairs(cs(0.0), cs(-1.0, 1.0))) == {((0.0,), (-1.0,)), ((0.0,), (1.0,))}
    assert set(metric_pairs(cs(0.0, 3.0), cs(0.0, 3.0))) == {((0.0,), (0.0,)), ((3.0,), (3.0,))}
    assert metric_pairs(cs(2.0), cs(7.0)) == [((2.0,), (7.0,))]


def test_metric_chains_examples():
    chains, truncated = metric_chains([cs(0.0), cs(-1.0, 1.0)])
    assert not truncated
    assert [c.ravel().tolist() for c in chains] == [[0.0, -1.0], [0.0, 1.0]]
    chains, _ = metric_chains([cs(5.0)] * 3)
    assert [c.ravel().tolist() for c in chains] == [[5.0, 5.0, 5.0]]


def test_anchored_chain_example():
    chain = metric_chain_through([cs(0.0, 3.0), cs(1.0)], 1, [1.0])
    assert chain.ravel().tolist() == [0.0, 1.0]


def test_anchored_chain_rejects_foreign_point():
    with pytest.raises(UsageError):
        metric_chain_through([cs(0.0, 3.0), cs(1.0)], 1, [2.0])


def test_chain_cap_validation_and_truncation():
    sets = [cs(0.0), cs(-1.0, 1.0)]
    with pytest.raises(UsageError):
        metric_chains(sets, cap=0)
    with pytest.raises(UsageError):
        metric_chains([cs(0.0)])
    chains, truncated = metric_chains(sets, cap=1)
    assert len(chains) == 1 and truncated


def test_truncation_warning_in_combination():
    sets = [cs(0.0), cs(-1.0, 1.0), cs(-1.0, 1.0)]
    with pytest.warns(ChainTruncationWarning):
        metric_linear_combination([1, 1, 1], sets, cap=1)


def test_metric_combination_examples():
    A = cs(0.0, 3.0)
    assert metric_linear_combination([0.5, 0.5], [A, A]) == cs(0.0, 3.0)
    assert metric_linear_combination([1.0], [A]) == A
    assert metric_linear_combination([0.5, 0.5], [A, cs(1.0)]) == cs(0.5, 2.0)


def test_metric_combination_length_mismatch():
    with pytest.raises(UsageError):
        metric_linear_combination([1.0], [cs(0.0), cs(1.0)])


def test_minkowski_examples():
    A = cs(0.0, 3.0)
    assert minkowski_linear_combination([0.5, 0.5], [A, A]) == cs(0.0, 1.5, 3.0)
    assert minkowski_linear_combination([1.0], [A]) == A
    assert minkowski_linear_combination([0.5, 0.5], [cs(1.0), cs(4.0)]) == cs(2.5)


# ---- limsup diagnostic ----

def test_limsup_constant_sequence():
    A = cs(0.0, 2.0)
    assert kuratowski_limsup([A] * 6, 0.1) == A


def test_limsup_shrinking_points():
    N = 40
    seq = [cs(1.0 / n) for n in range(1, N + 1)]
    out = kuratowski_limsup(seq, 2.0 / N, window=10)
    assert [1.0 / N] in out
    assert hausdorff(out, cs(1.0 / N)) <= 2.0 / N


def test_limsup_alternating():
    seq = [cs(0.0), cs(1.0)] * 5
    assert kuratowski_limsup(seq, 0.1) == cs(0.0, 1.0)


def test_limsup_rejects_bad_eps():
    with pytest.raises(UsageError):
        kuratowski_limsup([cs(0.0)], 0.0)


def test_dedup_close():
    assert len(dedup_close([[0.0], [1e-14], [1.0]])) == 2


# ---- properties ----

coord = st.floats(-10, 10, allow_nan=False).map(lambda v: round(v, 3))


@st.composite
def finite_sets(draw, d):
    k = draw(st.integers(1, 8))
    return CompactSet([[draw(coord) for _ in range(d)] for _ in range(k)])


@st.composite
def triples(draw):
    d = draw(st.integers(1, 3))
    return d, draw(finite_sets(d)), draw(finite_sets(d)), draw(finite_sets(d))


norms = st.sampled_from(list(Norm))


@settings(max_examples=150, deadline=None)
@given(triples(), norms)
def test_hausdorff_is_metric(t, norm):
    _, A, B, C = t
    assert hausdorff(A, A, norm) == 0.0
    assert hausdorff(A, B, norm) == hausdorff(B, A, norm)
    assert hausdorff(A, B, norm) <= hausdorff(A, C, norm) + hausdorff(C, B, norm) + 1e-12
    assert (hausdorff(A, B, norm) == 0.0) == (A == B)


@settings(max_examples=150, deadline=None)
@given(triples(), norms)
def test_metric_pairs_attain_hausdorff(t, norm):
    _, A, B, _ = t
    pairs = metric_pairs(A, B, norm)
    assert all(is_metric_pair(a, b, A, B, norm) for a, b in pairs)
    top = max(float(vnorm(np.subtract(a, b), norm)) for a, b in pairs)
    assert top == pytest.approx(hausdorff(A, B, norm), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(triples(), norms, st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_chains_valid_and_metric_in_minkowski(t, norm, lam):
    _, A, B, C = t
    chains, _ = metric_chains([A, B, C], norm=norm)
    assert all(is_metric_chain(c, [A, B, C], norm) for c in chains)
    met = metric_linear_combination(lam, [A, B, C], norm=norm)
    mink = minkowski_linear_combination(lam, [A, B, C])
    assert all(dist_point_set(p, mink) <= 1e-9 for p in met.points)


@settings(max_examples=100, deadline=None)
@given(triples(), norms)
def test_projection_subset_and_optimal(t, norm):
    _, A, B, _ = t
    for p in B.points:
        P = project(p, A, norm)
        d = dist_point_set(p, A, norm)
        for q in P.points:
            assert q in A
            assert float(vnorm(q - p, norm)) <= d + 1e-9
