from __future__ import annotations

import math

import numpy as np
import pytest

from heatlab.errors import ContractError, DimensionError, DomainError
from heatlab.graph_ops import discretize_graph, interval
from heatlab.kernel_engine import (
    KernelMatrix,
    StateError,
    apply_generator_x,
    apply_generator_y,
    chapman_kolmogorov_residual,
    compute_spectrum,
    coordinate_map_distance,
    heat_kernel,
    identity_surrogate,
    mass_residual,
    spectral_generator_power,
    symmetry_residual,
    time_derivative_deviation,
    truncation_bound,
)
from heatlab.linalg import expm_oracle
from heatlab.space import NormSpec


def test_kernel_matches_dense_exponential(interval_case):
    c = interval_case
    t = 0.01
    k = heat_kernel(c.spec, t=t, space=c.space)
    ref = expm_oracle(c.op.generator, t) / c.op.mass_weights[None, :]
    assert np.abs(k.values - ref).max() <= 1e-9 * np.abs(ref).max()


def test_interval_series_oracle():
    # continuum kernel of the Dirichlet unit interval as a sine series
    op, sp = discretize_graph(interval(), 1 / 400)
    spec = compute_spectrum(op)
    t = 0.05
    k = heat_kernel(spec, t=t, space=sp)
    i, j = sp.index("e0:200"), sp.index("e0:100")
    x, y = 0.5, 0.25
    n = np.arange(1, 200)
    exact = (2 * np.exp(-((n * math.pi) ** 2) * t) * np.sin(n * math.pi * x) * np.sin(n * math.pi * y)).sum()
    assert abs(k.values[i, j] - exact) < 1e-4 * exact


@pytest.mark.parametrize("name", ["interval_case", "star_case", "star_kirchhoff_case", "gasket4_case"])
def test_axioms(request, name):
    c = request.getfixturevalue(name)
    k1 = heat_kernel(c.spec, t=0.02)
    k2 = heat_kernel(c.spec, t=0.03)
    k3 = heat_kernel(c.spec, t=0.05)
    assert chapman_kolmogorov_residual(k1, k2, k3) < 1e-10
    assert symmetry_residual(k3) < 1e-12
    assert np.all(k3.values > -1e-12)


def test_mass_conservation_neumann(star_kirchhoff_case, gasket4_case):
    for c in (star_kirchhoff_case, gasket4_case):
        assert mass_residual(heat_kernel(c.spec, t=0.1)) < 1e-10


def test_identity_surrogate_composition(star_case):
    k = heat_kernel(star_case.spec, t=0.05)
    e = identity_surrogate(k)
    assert chapman_kolmogorov_residual(e, k, k) < 1e-12
    assert chapman_kolmogorov_residual(k, e, k) < 1e-12


def test_time_derivative(interval_case, gasket4_case):
    for c in (interval_case, gasket4_case):
        dev = time_derivative_deviation(c.spec, c.op, 0.05)
        scale = np.abs(apply_generator_x(heat_kernel(c.spec, t=0.05), c.op)).max()
        assert dev < 1e-5 * scale


def test_generators_agree_for_self_adjoint(star_case):
    k = heat_kernel(star_case.spec, t=0.05)
    ax = apply_generator_x(k, star_case.op)
    ay = apply_generator_y(k, star_case.op)
    sp1 = spectral_generator_power(k, 1)
    assert np.abs(ax - ay).max() < 1e-9 * np.abs(ax).max()
    assert np.abs(ax - sp1).max() < 1e-9 * np.abs(ax).max()


def test_second_order_split(star_case):
    # A_x A_y p_t = (A_y p_{t/2}) W (A_x p_{t/2})
    t = 0.05
    k = heat_kernel(star_case.spec, t=t)
    half = heat_kernel(star_case.spec, t=t / 2)
    w = star_case.op.mass_weights
    split = (apply_generator_y(half, star_case.op) * w[None, :]) @ apply_generator_x(half, star_case.op)
    two = spectral_generator_power(k, 2)
    assert np.abs(two - split).max() < 1e-8 * np.abs(two).max()


def test_magnetic_kernel_hermitian():
    g = interval()
    g.edges[0].b_samples = np.array([2.0])
    g.validate()
    op, sp = discretize_graph(g, 1 / 50)
    spec = compute_spectrum(op)
    k = heat_kernel(spec, t=0.05, space=sp)
    assert np.iscomplexobj(k.values)
    assert symmetry_residual(k) < 1e-12
    ref = expm_oracle(np.block([[op.generator.real, -op.generator.imag], [op.generator.imag, op.generator.real]]), 0.05)
    n = op.size
    dense = (ref[:n, :n] + 1j * ref[n:, :n]) / op.mass_weights[None, :]
    assert np.abs(k.values - dense).max() < 1e-9 * np.abs(dense).max()


def test_time_domain_errors(interval_case, caplog):
    with pytest.raises(DomainError):
        heat_kernel(interval_case.spec, t=0.0)
    with pytest.raises(DomainError):
        heat_kernel(interval_case.spec, t=1e-7)
    heat_kernel(interval_case.spec, t=5e-4)
    assert "truncation" in caplog.text
    with pytest.raises(StateError):
        heat_kernel(None, t=1.0)


def test_weight_mismatch(interval_case):
    with pytest.raises(DimensionError):
        heat_kernel(interval_case.spec, weights=np.ones(interval_case.op.size), t=0.1)


def test_truncation_bound_controls_error(interval_case):
    spec = interval_case.spec
    full = heat_kernel(spec, t=0.01)
    part = heat_kernel(spec, t=0.01, n_modes=20)
    assert np.abs(full.values - part.values).max() <= truncation_bound(spec, 0.01, 20) * (1 + 1e-12)


def test_symmetry_contract():
    k = KernelMatrix(0.1, np.eye(2), None, 1, np.ones(2), None, False)
    with pytest.raises(ContractError):
        symmetry_residual(k)


def test_coordinate_map_distance(interval_case):
    c = interval_case
    k = heat_kernel(c.spec, t=0.05, space=c.space)
    assert coordinate_map_distance(k, NormSpec(), 3, 3) == 0
    d_l2 = coordinate_map_distance(k, NormSpec(), 10, 20)
    d_g = coordinate_map_distance(k, NormSpec("graph", 2, c.op), 10, 20, c.op)
    assert 0 < d_l2 < d_g


def test_csv_export(interval_case, tmp_path):
    c = interval_case
    k = heat_kernel(c.spec, t=0.1, space=c.space)
    path = tmp_path / "k.csv"
    k.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,x_dist,value"
    assert len(lines) == 1 + c.op.size**2
