import numpy as np
import pytest

from svfapprox.catalog import annulus_slice, const_c, jump_pair, lipschitz_tube
from svfapprox.errors import UsageError
from svfapprox.integral import (QuadratureRule, WeightFunction, cell_weights, integrate_vector,
                                selection_integrals, weighted_metric_integral,
                                weighted_metric_riemann_sum)
from svfapprox.selections import selection_family
from svfapprox.sets import CompactSet, hausdorff
from svfapprox.svf import ClosedFormSVF, Partition

one = WeightFunction.constant(1.0)


def test_integrate_vector_examples():
    assert integrate_vector(lambda t: (1.0, 2.0)) == pytest.approx([1.0, 2.0], abs=1e-14)
    r = integrate_vector(lambda t: (t, t * t), rule=QuadratureRule(order=2, panels=1))
    assert r == pytest.approx([0.5, 1 / 3], abs=1e-15)
    r = integrate_vector(lambda t: np.sign(t - 0.5), rule=QuadratureRule("piecewise"),
                         breakpoints=[0.5])
    assert r[0] == 0.0


def test_gauss_weights_sum_to_length_and_exactness():
    rule = QuadratureRule(order=4, panels=3)
    nodes, w = rule.nodes_weights(-1.0, 2.0, [0.1])
    assert w.sum() == pytest.approx(3.0, abs=1e-14)
    for deg in range(8):
        assert w @ nodes**deg == pytest.approx((2.0**(deg + 1) - (-1.0)**(deg + 1)) / (deg + 1),
                                               rel=1e-13)


def test_invalid_rule():
    with pytest.raises(UsageError):
        QuadratureRule("simpson")
    with pytest.raises(UsageError):
        QuadratureRule(order=0)


def test_norm_of_integral_below_integral_of_norm(rng):
    for _ in range(20):
        c = rng.normal(size=(3, 2))
        f = lambda t: c[0] + c[1] * t + c[2] * np.sin(7 * t)
        lhs = np.linalg.norm(integrate_vector(f))
        rhs = integrate_vector(lambda t: np.linalg.norm(f(t)))[0]
        assert lhs <= rhs + 1e-10


def test_cell_weights_match_antiderivative():
    kappa = WeightFunction(lambda t: np.cos(3 * t))
    exact = WeightFunction(lambda t: np.cos(3 * t), antiderivative=lambda t: np.sin(3 * t) / 3)
    e = np.linspace(0, 1, 17)
    assert np.allclose(cell_weights(kappa, e), cell_weights(exact, e), atol=1e-14)


def test_riemann_sum_examples():
    chi = Partition.uniform(0, 1, 4)
    assert weighted_metric_riemann_sum(const_c(), one, chi) == CompactSet([1.5])
    assert weighted_metric_riemann_sum(jump_pair(), one, chi) == CompactSet([-0.5, 0.5])
    zero = WeightFunction.constant(0.0)
    assert weighted_metric_riemann_sum(jump_pair(), zero, chi) == CompactSet([0.0])


def test_integral_examples():
    chi = Partition.uniform(0, 1, 64)
    assert weighted_metric_integral(const_c(), one, chi) == CompactSet([1.5])
    assert weighted_metric_integral(jump_pair(), one, chi) == CompactSet([-0.5, 0.5])
    F = ClosedFormSVF(lambda x: [x, -x], 0, 1)
    fine = Partition.uniform(0, 1, 2**12)
    got = weighted_metric_integral(F, one, fine)
    assert hausdorff(got, CompactSet([-0.5, 0.5])) <= 1e-3


def test_integral_requires_bv_weight():
    bad = WeightFunction(lambda t: t, bv=False)
    with pytest.raises(UsageError):
        weighted_metric_integral(const_c(), bad, Partition.uniform(0, 1, 4))


def test_singleton_reduces_to_scalar_integral():
    F = ClosedFormSVF(lambda x: [np.sin(3 * x)], 0, 1)
    chi = Partition.uniform(0, 1, 128)
    kappa = WeightFunction(lambda t: 1 + t)
    fam = selection_family(F, chi, 1)
    assert len(fam) == 1
    direct = integrate_vector(lambda t: kappa(t) * fam[0](t), breakpoints=chi.nodes,
                              rule=QuadratureRule(panels=1))
    got = weighted_metric_integral(F, kappa, chi, family=fam)
    assert len(got) == 1 and got.points[0, 0] == pytest.approx(direct[0], abs=1e-13)


def test_triangle_check_on_family():
    chi = Partition.uniform(0, 1, 256)
    kappa = WeightFunction(lambda t: np.cos(4 * t))
    fam = selection_family(annulus_slice(), chi, 4)
    vals = selection_integrals(kappa, fam)
    for s, v in zip(fam, vals):
        norms = np.linalg.norm(s.values[:-1], axis=1)
        bound = cell_weights(WeightFunction(lambda t: np.abs(np.cos(4 * t))), chi.nodes) @ norms
        assert np.linalg.norm(v) <= bound + 1e-10


@pytest.mark.parametrize("make", [lipschitz_tube, jump_pair, const_c, annulus_slice])
def test_riemann_sum_agrees_with_selection_integral(make):
    F = make()
    chi = Partition.uniform(0, 1, 2**14)
    kappa = WeightFunction(lambda t: 1 + 0.5 * t)
    fam = selection_family(F, chi, 16)
    R = weighted_metric_riemann_sum(F, kappa, chi)
    I = weighted_metric_integral(F, kappa, chi, family=fam)
    assert hausdorff(R, I) <= 1e-3
