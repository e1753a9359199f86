import csv
import json
import math

import numpy as np
import pytest

from svfapprox.acceptance import random_grid_svf
from svfapprox.analysis import (ConvergenceTable, a_f_set, bound_continuity, bound_jump,
                                convergence_experiment, delta_grid, integral_modulus,
                                l1_hausdorff_selection_sets, lambda_n, loglog_slope,
                                optimal_bound)
from svfapprox.catalog import const_c, jump_pair, lipschitz_tube
from svfapprox.errors import UsageError
from svfapprox.operators import apply_scalar, apply_svf, bernstein_durrmeyer, diagnostics, kantorovich
from svfapprox.selections import selection_family
from svfapprox.sets import CompactSet, hausdorff
from svfapprox.svf import (ClosedFormSVF, Function, GridSVF, Partition, StepFunction,
                           total_variation)

chi = Partition.uniform(0, 1, 1024)


def test_a_f_set_examples():
    assert a_f_set(jump_pair(), 0.5, chi) == CompactSet([-0.5, 0.5])
    F = ClosedFormSVF(lambda x: [0.0] if x < 0.5 else [2.0], 0, 1)
    assert a_f_set(F, 0.5, chi) == CompactSet([1.0])


def test_a_f_set_at_continuity_point():
    F = lipschitz_tube()
    fam = selection_family(F, chi, 4, anchors=(0.3,))
    got = a_f_set(F, 0.3, chi, family=fam)
    values = CompactSet(np.array([s(0.3) for s in fam]))
    assert hausdorff(got, values) <= 1e-9


def test_a_f_set_endpoint():
    with pytest.raises(UsageError):
        a_f_set(jump_pair(), 0.0, chi)


def test_bound_constant_svf():
    T = bernstein_durrmeyer(100)
    for d in (0.1, 0.3):
        b = bound_continuity(T, const_c(), 0.5, d, chi)
        assert b.modulus_term == 0.0
        assert b.total <= 1.5 / (100 * d * d) + 1e-12


def test_bound_exceeds_observed_tube():
    T = bernstein_durrmeyer(100)
    F = lipschitz_tube()
    b = bound_continuity(T, F, 0.5, 100 ** (-1 / 3), chi)
    obs = hausdorff(apply_svf(T, F, 0.5, chi), F(0.5))
    assert b.total >= obs
    assert set(b.as_dict()) >= {"modulus_term", "beta_term", "alpha_term", "total"}


def test_bound_jump_pair_components():
    T = kantorovich(400)
    b = bound_jump(T, jump_pair(), 0.5, 0.1, chi)
    assert b.modulus_term == 0.0
    assert b.sign_term == pytest.approx(1.0 * 1.2)
    d = diagnostics(T, 0.5, 0.1)
    assert b.beta_term == pytest.approx(4 * min(T.beta_bound(0.5, 0.1), T.M(0.5)))
    assert b.beta_term >= 4 * d.beta_num


def test_bound_scalar_jump():
    f = StepFunction(Partition([0, 0.5, 1]), [0.0, 1.0, 1.0])
    T = bernstein_durrmeyer(256)
    b = bound_jump(T, f, 0.5, 0.05, chi)
    assert b.modulus_term == 0.0
    # the midpoint of the one-sided limits is 1/2
    assert abs(apply_scalar(T, f, 0.5)[0] - 0.5) <= b.total


def test_bound_errors():
    T = kantorovich(8)
    with pytest.raises(UsageError):
        bound_continuity(T, const_c(), 0.5, 0.0, chi)
    with pytest.raises(UsageError):
        bound_jump(T, jump_pair(), 1.0, 0.1, chi)
    with pytest.raises(UsageError):
        optimal_bound(T, const_c(), 0.5, chi, mode="other")


def test_optimal_bound_is_grid_minimum():
    T = bernstein_durrmeyer(64)
    F = lipschitz_tube()
    best = optimal_bound(T, F, 0.4, chi)
    totals = [bound_continuity(T, F, 0.4, d, chi).total for d in delta_grid(0, 1)]
    assert best.total == min(totals)
    assert len(delta_grid(0, 1)) == 12 and delta_grid(0, 1)[0] == 0.5


def test_integral_modulus_examples():
    const = Function(lambda t: 3.0)
    assert integral_modulus(const, 0.2) == 0.0
    assert integral_modulus(const, 0.2, order=2) == 0.0
    ident = Function(lambda t: t)
    for d in (0.05, 0.25, 0.5):
        # constant extension beyond 1 trims a triangle of area d^2/2
        assert integral_modulus(ident, d) == pytest.approx(d - d * d / 2, abs=1e-12)
        assert integral_modulus(ident, d) <= d * 1.0
    with pytest.raises(UsageError):
        integral_modulus(const, 0.0)


def _random_step(rng, left_flat=0.0):
    m = int(rng.integers(2, 12))
    inner = np.sort(rng.uniform(left_flat, 1, m - 1))
    p = Partition(np.concatenate([[0], inner, [1]]))
    vals = rng.normal(size=m + 1)
    vals[-1] = vals[-2]
    return StepFunction(p, vals), np.abs(np.diff(vals[:-1])).sum()


def test_integral_modulus_bounded_by_variation(rng):
    for _ in range(15):
        f, V = _random_step(rng)
        for d in (0.01, 0.1, 0.4):
            assert integral_modulus(f, d) <= d * V + 1e-12


def test_second_order_modulus_when_flat_near_left_end(rng):
    # with constant extension the backward difference only stays within the
    # forward one when f does not move on [a, a + delta]
    for _ in range(15):
        d = float(rng.choice([0.01, 0.1, 0.4]))
        f, _ = _random_step(rng, left_flat=d)
        assert integral_modulus(f, d, order=2) <= 2 * integral_modulus(f, d) + 1e-12


def test_second_order_modulus_can_exceed_twice_first_order():
    f = StepFunction(Partition([0, 0.1, 1]), [1.0, 0.0, 0.0])
    assert integral_modulus(f, 0.4) == pytest.approx(0.1, abs=1e-12)
    assert integral_modulus(f, 0.4, order=2) == pytest.approx(0.5, abs=1e-12)


@pytest.mark.parametrize("n", [1, 10, 100, 1000])
def test_lambda_n_closed_forms(n):
    assert lambda_n(bernstein_durrmeyer(n)) == pytest.approx(math.sqrt(1 / (2 * (n + 2))), abs=1e-12)
    assert lambda_n(kantorovich(n)) == pytest.approx(math.sqrt(1 / (4 * (n + 1))), abs=1e-12)


@pytest.mark.parametrize("make", [bernstein_durrmeyer, kantorovich])
def test_lambda_n_metadata_matches_quadrature(make):
    for n in (3, 17, 64):
        T = make(n)
        lq = lambda_n(T, method="quadrature")
        assert lambda_n(T, method="metadata") ** 2 == pytest.approx(lq ** 2, abs=1e-10)


@pytest.mark.parametrize("make", [bernstein_durrmeyer, kantorovich])
def test_lambda_n_ratio(make):
    vals = [lambda_n(make(2 ** k)) for k in range(2, 12)]
    ratios = np.array(vals[:-1]) / np.array(vals[1:])
    assert np.all(ratios > 1)
    assert np.all((ratios >= 0.6 * math.sqrt(2)) & (ratios <= math.sqrt(2) + 1e-12))


def test_l1_constant_is_zero():
    obs, shape = l1_hausdorff_selection_sets(kantorovich(32), const_c(), Partition.uniform(0, 1, 64))
    assert obs <= 1e-13 and shape == 0.0


def test_l1_shape_formula():
    T = kantorovich(64)
    p = Partition.uniform(0, 1, 256)
    obs, shape = l1_hausdorff_selection_sets(T, jump_pair(), p)
    lam = lambda_n(T)
    V = total_variation(jump_pair(), 0, 1)[0]
    assert shape == pytest.approx((lam ** 2 + 2 * lam) * V)
    assert 0 < obs < shape


def test_convergence_constant_svf():
    t = convergence_experiment(kantorovich, const_c(), [0.3, 0.5], [4, 16, 64], chi)
    assert np.all(t.column("observed") <= 1e-10)
    assert not t.violations()


def test_convergence_tube_slope_and_dominance():
    t = convergence_experiment(bernstein_durrmeyer, lipschitz_tube(), [0.5], [2 ** k for k in range(2, 11)],
                               Partition.uniform(0, 1, 4096), seeds=3)
    assert t.slope(0.5) <= -0.4
    assert not t.violations()


def test_convergence_jump_pair_kantorovich():
    t = convergence_experiment(kantorovich, jump_pair(), [0.5, 0.25], [16, 64, 256, 1024], chi,
                               mode="jump")
    assert not t.violations()
    obs = t.column("observed", 0.25)
    assert np.all(np.diff(obs) <= 1e-10)


def test_convergence_rejects_bad_lists():
    with pytest.raises(UsageError):
        convergence_experiment(kantorovich, const_c(), [0.5], [16, 8], chi)
    with pytest.raises(UsageError):
        convergence_experiment(kantorovich, const_c(), [], [8], chi)
    with pytest.raises(UsageError):
        convergence_experiment(kantorovich, const_c(), [0.5], [8], chi, delta_rule="fixed")


def test_convergence_deterministic_and_parallel():
    args = (bernstein_durrmeyer, lipschitz_tube(), [0.3, 0.6], [8, 32, 128], chi)
    a = convergence_experiment(*args)
    b = convergence_experiment(*args, jobs=4)
    assert a.to_dict() == b.to_dict()


def test_table_export(tmp_path):
    t = convergence_experiment(kantorovich, jump_pair(), [0.5], [8, 32], chi, delta_rule="power")
    path = t.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["n", "x", "observed", "bound", "delta_star", "slope"]
    assert len(rows) == 3
    data = json.loads(t.to_json(tmp_path / "t.json").read_text())
    assert {"kernel", "svf", "chi_size", "seeds", "norm"} <= set(data["metadata"])
    assert isinstance(t, ConvergenceTable)


def test_loglog_slope():
    ns = np.array([4, 16, 64, 256])
    assert loglog_slope(ns, 3.0 / np.sqrt(ns)) == pytest.approx(-0.5)


def test_bound_dominance_random_svfs(rng):
    for _ in range(5):
        F = random_grid_svf(rng)
        p = F.partition
        for T in (bernstein_durrmeyer(50), kantorovich(50)):
            x = float(rng.uniform(0.1, 0.9))
            b = optimal_bound(T, F, x, p)
            assert hausdorff(apply_svf(T, F, x, p), F(x)) <= b.total + 1e-8
