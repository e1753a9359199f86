import json
import math

import numpy as np
import pytest

from svfapprox.catalog import CATALOG, annulus_slice, jump_pair, lipschitz_tube, load_svf
from svfapprox.errors import UsageError
from svfapprox.sets import CompactSet, hausdorff
from svfapprox.svf import (ClosedFormSVF, Function, GridSVF, Partition, StepFunction, h_lim,
                           integrated_window_variation, lipschitz_probe, local_modulus,
                           quasi_modulus, quasi_modulus_left, quasi_modulus_right, sup_norm,
                           total_variation, variation, variation_function)

chi = Partition.uniform(0.0, 1.0, 64)
ident = Function(lambda x: x, 0.0, 1.0)
const = Function(lambda x: 2.5, 0.0, 1.0)


def test_partition_validation():
    with pytest.raises(UsageError):
        Partition([0.0, 0.0, 1.0])
    with pytest.raises(UsageError):
        Partition([0.0])
    p = Partition([0.0, 0.25, 1.0])
    assert p.norm == 0.75
    assert p.refine().nodes.tolist() == [0.0, 0.125, 0.25, 0.625, 1.0]


def test_variation_examples():
    assert variation(const, chi) == 0.0
    assert variation(ident, Partition([0, 0.3, 0.31, 1.0])) == pytest.approx(1.0)
    assert variation(jump_pair(), Partition.uniform(0, 1, 7)) == 1.0


def test_variation_function_examples():
    assert np.all(variation_function(const, chi).values == 0)
    v = variation_function(ident, chi)
    assert np.allclose(v.values[:, 0], chi.nodes)
    vj = variation_function(jump_pair(), Partition.uniform(0, 1, 10))
    assert vj.values[:, 0].tolist() == [0.0] * 5 + [1.0] * 6


def test_variation_function_identity_and_monotone(rng):
    F = lipschitz_tube()
    v = variation_function(F, chi).values[:, 0]
    assert np.all(np.diff(v) >= 0)
    i, j = sorted(rng.choice(len(chi), 2, replace=False))
    sub = Partition(chi.nodes[i:j + 1])
    assert variation(F, sub) == pytest.approx(v[j] - v[i], abs=1e-12)


def test_total_variation_refines():
    v, p = total_variation(ident)
    assert v == pytest.approx(1.0)
    # tube: outer points move from +-1 to +-2, so V = 1
    v, _ = total_variation(lipschitz_tube())
    assert v == pytest.approx(1.0, abs=1e-6)


def test_local_modulus_examples():
    assert local_modulus(const, 0.5, 0.3, chi) == 0.0
    assert local_modulus(ident, 0.5, 0.2, chi) == pytest.approx(0.2)
    for d in (1e-3, 0.1, 0.7):
        assert local_modulus(jump_pair(), 0.5, d, chi) == 1.0


def test_local_modulus_rejects_bad_delta():
    with pytest.raises(UsageError):
        local_modulus(ident, 0.5, 0.0, chi)


def test_quasi_modulus_examples():
    F = jump_pair()
    assert quasi_modulus_left(F, 0.5, 0.3, chi) == 0.0
    assert quasi_modulus_right(F, 0.5, 0.3, chi) == 0.0
    fine = Partition.uniform(0, 1, 4096)
    for d in (1e-2, 1e-3):
        assert quasi_modulus(ident, 0.5, d, fine) <= d + 1e-9
    assert quasi_modulus(ident, 0.5, 1e-3, fine) < quasi_modulus(ident, 0.5, 1e-2, fine)


def test_quasi_modulus_endpoint_errors():
    with pytest.raises(UsageError):
        quasi_modulus_left(ident, 0.0, 0.1, chi)
    with pytest.raises(UsageError):
        quasi_modulus_right(ident, 1.0, 0.1, chi)


def test_moduli_bounded_by_variation_function(rng):
    from svfapprox.acceptance import random_grid_svf

    for _ in range(20):
        F = random_grid_svf(rng)
        p = F.partition
        v = variation_function(F, p)
        xs = np.concatenate([p.nodes[1:-1][:3], rng.uniform(0.01, 0.99, 3)])
        for x in xs:
            for d in (0.05, 0.2, 0.6):
                assert local_modulus(F, x, d, p) <= local_modulus(v, x, d, p) + 1e-12
                assert quasi_modulus_left(F, x, d, p) <= quasi_modulus_left(v, x, d, p) + 1e-12
                assert quasi_modulus_right(F, x, d, p) <= quasi_modulus_right(v, x, d, p) + 1e-12


def test_sup_norm_examples():
    zero = ClosedFormSVF(lambda x: [0.0], 0, 1)
    assert sup_norm(zero, chi) == 0.0
    assert sup_norm(jump_pair(), chi) == 1.0
    assert sup_norm(ClosedFormSVF(lambda x: [x], 0, 1), chi) == 1.0


def test_lipschitz_probe_examples():
    radii = [0.1, 0.01, 0.001]
    assert lipschitz_probe(ident, 0.5, radii) == pytest.approx(1.0)
    assert lipschitz_probe(const, 0.5, radii) == 0.0
    f = Function(lambda x: x * math.sin(1 / x) if x != 0 else 0.0, -1, 1)
    assert lipschitz_probe(f, 0.0, radii, kind="at") <= 1.0 + 1e-12
    with pytest.raises(UsageError):
        lipschitz_probe(ident, 0.5, [])


def test_lipschitz_probe_flags_jump():
    assert lipschitz_probe(jump_pair(), 0.5, [0.1, 1e-3, 1e-5]) == math.inf


def test_integrated_window_variation_bound(rng):
    for _ in range(10):
        grid = np.unique(np.concatenate([[0, 1], rng.uniform(0, 1, 10)]))
        F = GridSVF(grid, [rng.normal(size=(2, 1)).tolist() for _ in grid])
        p = F.partition
        v = variation_function(F, p)
        for d in (0.05, 0.2):
            lhs = integrated_window_variation(v, d)
            assert lhs <= 2 * d * variation(F, p) * (1 + 1e-3)


def test_grid_svf_semantics_and_limits():
    F = GridSVF([0.0, 0.5, 1.0], [[[0.0]], [[1.0], [2.0]], [[3.0]]])
    assert F(0.49) == CompactSet([0.0])
    assert F(0.5) == CompactSet([1.0, 2.0])
    assert F(1.0) == CompactSet([3.0])
    assert F(-1.0) == CompactSet([0.0]) and F(2.0) == CompactSet([3.0])
    assert F.left_limit(0.5) == CompactSet([0.0])
    assert F.right_limit(0.5) == CompactSet([1.0, 2.0])
    assert F.left_limit(1.0) == CompactSet([1.0, 2.0])


def test_grid_svf_json_roundtrip(tmp_path):
    F = GridSVF([0.0, 0.5, 1.0], [[[0.0]], [[1.0], [2.0]], [[3.0]]])
    path = tmp_path / "f.json"
    path.write_text(F.to_json())
    G = load_svf(str(path))
    assert all(a == b for a, b in zip(F.sets, G.sets))
    bad = json.loads(F.to_json())
    bad["a"] = -1.0
    path.write_text(json.dumps(bad))
    with pytest.raises(UsageError):
        load_svf(str(path))


def test_step_function_limits():
    s = StepFunction(Partition([0, 0.5, 1]), [1.0, 2.0, 3.0])
    assert s(0.25)[0] == 1.0 and s(0.5)[0] == 2.0 and s(1.0)[0] == 3.0
    assert s.left_limit(0.5)[0] == 1.0 and s.right_limit(0.5)[0] == 2.0
    assert s.left_limit(1.0)[0] == 2.0


def test_h_lim():
    p = Partition.uniform(0, 2, 4)
    assert h_lim(p) == pytest.approx(2e-6)


def test_catalog_and_unknown_name():
    assert set(CATALOG) == {"lipschitz-tube", "jump-pair", "annulus-slice", "const-c"}
    F = lipschitz_tube()
    assert F(0.5).points[[0, -1], 0].tolist() == [-1.25, 1.25]
    assert annulus_slice()(0.3).dim == 2
    with pytest.raises(UsageError):
        load_svf("no-such-svf")


def test_closed_form_constant_extension():
    F = lipschitz_tube()
    assert hausdorff(F(-1.0), F(0.0)) == 0.0
    assert hausdorff(F(5.0), F(1.0)) == 0.0
