from __future__ import annotations

import numpy as np
import pytest

from heatlab.errors import DomainError, ValidationError
from heatlab.graph_ops import interval, star
from heatlab.nonauto import (
    FormFamily,
    autonomous_reference,
    cocycle_residual,
    nonauto_kernel_scan,
    propagate,
    richardson_ratio,
    time_modulus,
)


@pytest.fixture(scope="module")
def modulated():
    return FormFamily(star(), 1 / 16, "sin_modulated", base=1.0, amplitude=0.5, frequency=2 * np.pi)


def test_constant_family_matches_autonomous():
    fam = FormFamily(star(), 1 / 16, "constant", base=1.0)
    u = propagate(fam, 0.0, 0.2, 128).matrix
    ref = autonomous_reference(fam, 0.2)
    assert np.abs(u - ref).max() < 1e-5


def test_identity_at_equal_times(modulated):
    p = propagate(modulated, 0.3, 0.3, 10)
    assert p.identity and np.array_equal(p.matrix, np.eye(modulated.size))


def test_cocycle(modulated):
    assert cocycle_residual(modulated, 0.0, 0.25, 0.5, 128) < 1e-12


def test_richardson_second_order(modulated):
    assert 3.6 < richardson_ratio(modulated, 0.0, 0.5, 128) < 4.4


def test_self_convergence(modulated):
    a = propagate(modulated, 0.0, 0.5, 256).matrix
    b = propagate(modulated, 0.0, 0.5, 512).matrix
    assert np.abs(a - b).max() < 1e-5


def test_positivity_and_contraction(modulated):
    u = propagate(modulated, 0.0, 0.5, 128).matrix
    assert u.min() > -1e-10
    # Dirichlet leaves: row sums stay at most one (sub-Markov)
    assert (u.sum(axis=1)).max() <= 1 + 1e-10


def test_ellipticity_failure_names_tau():
    fam = FormFamily(interval(), 1 / 8, "sin_modulated", base=1.0, amplitude=2.0, frequency=1.0)
    with pytest.raises(ValidationError, match="tau="):
        propagate(fam, 0.0, 5.0, 20)


def test_tabulated_interpolation():
    fam = FormFamily(interval(), 1 / 8, "tabulated", table_times=[0.0, 1.0], table_values=[1.0, 3.0])
    assert np.allclose(fam.coefficients(0.5), [2.0])
    assert np.allclose(fam.coefficients(5.0), [3.0])
    with pytest.raises(ValidationError):
        FormFamily(interval(), 1 / 8, "tabulated", table_times=[1.0, 0.0], table_values=[1.0, 3.0])


def test_time_modulus_is_lipschitz(modulated):
    om = time_modulus(modulated, 0.0, 1.0, [0.01, 0.1])
    for d, v in om.items():
        assert v <= 0.5 * 2 * np.pi * d * (1 + 1e-9)
    assert om[0.01] < om[0.1]


def test_bounds(modulated):
    lo, hi = modulated.bounds(0.0, 1.0)
    assert abs(lo - 0.5) < 1e-4 and abs(hi - 1.5) < 1e-4


def test_domain_errors(modulated):
    with pytest.raises(DomainError):
        propagate(modulated, 1.0, 0.5, 10)
    with pytest.raises(DomainError):
        cocycle_residual(modulated, 0.0, 0.8, 0.5, 10)
    with pytest.raises(DomainError):
        nonauto_kernel_scan(modulated, 0.5, 0.5)
    with pytest.raises(ValidationError):
        FormFamily(interval(), 1 / 8, "bogus")


def test_kernel_scan(modulated):
    res = nonauto_kernel_scan(modulated, 0.0, 0.1, alpha=0.5, steps=64)
    assert res.column.C > 0 and res.map_constant > res.column.C
    assert res.joint.defined
    doc = res.to_dict()
    assert set(doc) >= {"column", "form_norm_map", "joint"}
