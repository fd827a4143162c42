import math

import numpy as np
import pytest

from latteds.eds import (
    EnergyTriple,
    a5_tolerance,
    bounded_info,
    check_a1,
    check_a3,
    check_a5,
    estimate_b,
    evaluate_triple,
    local_balance_residual,
    windowed_energy,
    windowed_sum,
)
from latteds.exceptions import ArgumentError, DomainError, ModulusEstimateError
from latteds.integrator import run
from latteds.lattice import Field, cube_sites
from latteds.models import CubeSpec, IntegratorSpec, LatticeWindow
from latteds.systems import ElasticInteraction, FkModel


class OpenInteraction(ElasticInteraction):
    """A potential whose sublevel sets never close."""

    def energy(self, x, y):
        return np.zeros(np.broadcast_shapes(x.shape, y.shape)[:-1])


def test_stationary_minimum_has_zero_triple(line):
    triple = evaluate_triple(FkModel(), Field.zeros(line))
    for part in (triple.e, triple.d, triple.f):
        assert part.max_abs() == 0


def test_free_chain_linear_profile():
    window = LatticeWindow(dim=1, radius=8, boundary="frozen")
    c = 0.5
    u = Field(window, c * window.coordinates()[..., 0].astype(float))
    triple = evaluate_triple(FkModel(K=0.0), u)
    interior = slice(1, -1)
    assert np.allclose(triple.e.values[interior, 0], c * c / 2, rtol=0, atol=0)
    assert not np.any(triple.d.values[interior])
    assert not np.any(triple.f.values[interior])


def test_width_mismatch_is_rejected(line):
    with pytest.raises(ArgumentError):
        evaluate_triple(FkModel(), Field.zeros(line, 2))
    with pytest.raises(ArgumentError):
        evaluate_triple(FkModel(dim=2), Field.zeros(line))


def test_windowed_energy():
    window = LatticeWindow(dim=2, radius=4)
    zero = Field.zeros(window)
    one = Field.constant(window, 1.0)
    assert windowed_sum(zero, 3) == 0
    assert windowed_energy(EnergyTriple(one, zero, Field.zeros(window, 2)), 3) == 36


def test_windowed_energy_matches_direct_sum(rng):
    window = LatticeWindow(dim=2, radius=6)
    e = Field(window, rng.uniform(size=window.shape))
    direct = sum(float(e.at(site)[0]) for site in cube_sites(window, CubeSpec(radius=4)))
    assert math.isclose(windowed_sum(e, 4), direct, rel_tol=1e-12)


def test_windowed_energy_respects_buffer():
    window = LatticeWindow(dim=1, radius=8, buffer=3)
    with pytest.raises(DomainError):
        windowed_sum(Field.zeros(window), 6)


def test_a5_on_stationary_state(line):
    triple = evaluate_triple(FkModel(), Field.zeros(line))
    assert check_a5(triple, 1.0) <= 0
    assert check_a1(triple) == 0


def test_a5_along_fk_trajectory(line, rng):
    model = FkModel()
    spec = IntegratorSpec(dt=0.01, t_end=2.0, sample_every=20)
    trajectory = run(model, Field.random_uniform(line, rng, 0.4), spec)
    for triple in trajectory.triples:
        assert check_a5(triple, 2 * triple.e_sup) <= a5_tolerance(triple)
        assert check_a1(triple) >= 0


def test_a5_detects_corrupted_flux(line, rng):
    triple = evaluate_triple(FkModel(), Field.random_uniform(line, rng, 0.4))
    corrupted = EnergyTriple(triple.e, triple.d, triple.f * 10)
    assert check_a5(corrupted, 2 * triple.e_sup) > 0


def test_a5_rejects_nonpositive_beta(line):
    triple = evaluate_triple(FkModel(), Field.zeros(line))
    with pytest.raises(ArgumentError):
        check_a5(triple, 0.0)


def test_equilibria_are_at_rest(line):
    for d_max, rhs in check_a3(FkModel(damping=0.5), line):
        assert d_max == 0
        assert rhs == 0


@pytest.mark.parametrize("level", [0.5, 1.0, 2.0])
def test_grid_modulus_of_quadratic_interaction(level):
    estimate = estimate_b(ElasticInteraction(kappa=1.0), level)
    assert estimate.value == pytest.approx(2 * level, rel=0.05)


def test_grid_modulus_at_level_zero():
    assert estimate_b(ElasticInteraction(kappa=1.0), 0.0).value == 0


def test_grid_modulus_reports_open_sublevel_set():
    with pytest.raises(ModulusEstimateError):
        estimate_b(OpenInteraction(), 1.0, resolution=0.05, max_reach=4.0)


def test_local_balance_residual_fk(square, rng):
    model = FkModel(dim=2, K=0.05)
    u = Field.random_uniform(square, rng, 0.7)
    assert local_balance_residual(model, u).max_abs() < 1e-12


def test_local_balance_residual_damped(square, rng):
    model = FkModel(dim=2, damping=0.4, width=2)
    u = Field.random_uniform(square, rng, 0.7, width=2)
    v = Field.random_uniform(square, rng, 0.2, width=2)
    assert local_balance_residual(model, u, v).max_abs() < 1e-12


def test_bounded_info_uses_first_and_largest_energy(line, rng):
    model = FkModel()
    trajectory = run(model, Field.random_uniform(line, rng, 0.3), IntegratorSpec(dt=0.01, t_end=1.0, sample_every=10))
    info = bounded_info(trajectory)
    levels = [t.e_sup for t in trajectory.triples]
    assert info.e0 == levels[0]
    assert info.beta == pytest.approx(2 * max(levels))
