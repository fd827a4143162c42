import math

import numpy as np
import pytest

from latteds.eds import a5_tolerance, check_a3, check_a5, estimate_b, local_balance_residual
from latteds.exceptions import ArgumentError
from latteds.integrator import run
from latteds.lattice import Field
from latteds.models import IntegratorSpec, LatticeWindow
from latteds.systems import (
    DcglModel,
    ElasticInteraction,
    FkModel,
    GeneralizedFkModel,
    MultiRangeModel,
    SpinGlassModel,
    bond_signs,
    select_flux_variant,
)


def balance_cases(line, square, rng):
    glass_window = LatticeWindow(dim=2, radius=5)
    spring = ElasticInteraction(kappa=1.0, shift=0.3, amplitude=0.05)
    yield FkModel(dim=2, K=0.1), Field.random_uniform(square, rng, 0.6), None
    yield GeneralizedFkModel(interaction=spring), Field.random_uniform(line, rng, 1.0), None
    yield MultiRangeModel.uniform([1, 2, 3], spring), Field.random_uniform(line, rng, 1.0), None
    for split in ("half", "site"):
        glass = SpinGlassModel.build(glass_window, "random", seed=7, mu=0.8, damping=0.5, split=split)
        yield glass, Field.random_uniform(glass_window, rng, 1.0), Field.random_uniform(glass_window, rng, 0.3)
    for frame in ("rotating", "lab"):
        yield DcglModel(dim=2, cgl_lambda=0.7, frame=frame), Field.random_uniform(square, rng, 0.8, width=2), None


def test_local_balance_of_every_model(line, square, rng):
    for model, u, v in balance_cases(line, square, rng):
        residual = local_balance_residual(model, u, v).max_abs()
        assert residual < 1e-10, type(model).__name__


def test_ferromagnetic_minimum_is_at_rest():
    window = LatticeWindow(dim=2, radius=4)
    model = SpinGlassModel.build(window, "ferro", damping=0.5)
    du, dv = model.rhs(Field.constant(window, 1.0), Field.zeros(window))
    assert du.max_abs() == 0
    assert dv.max_abs() == 0


def test_ferromagnetic_equilibria():
    window = LatticeWindow(dim=2, radius=4)
    model = SpinGlassModel.build(window, "ferro")
    levels = sorted(float(state.values.flat[0]) for state, _ in model.known_equilibria(window))
    assert levels == [-1.0, 0.0, 1.0]
    assert all(d == 0 and rhs == 0 for d, rhs in check_a3(model, window))


def test_dcgl_unit_state_is_stationary(square):
    model = DcglModel(dim=2)
    one = Field.constant(square, (1.0, 0.0), 2)
    assert model.rhs(one).max_abs() == 0
    assert model.triple(one).e.max_abs() == 0


def test_dcgl_triple_is_frame_independent(square, rng):
    u = Field.random_uniform(square, rng, 0.8, width=2)
    rotating = DcglModel(dim=2, frame="rotating").triple(u)
    lab = DcglModel(dim=2, frame="lab").triple(u)
    for a, b in zip((rotating.e, rotating.d, rotating.f), (lab.e, lab.d, lab.f)):
        assert np.allclose(a.values, b.values, rtol=0, atol=1e-12)


def as_complex(field):
    return field.values[..., 0] + 1j * field.values[..., 1]


def test_dcgl_frames_differ_by_a_phase_rotation(square, rng):
    lam = 0.7
    initial = Field.random_uniform(square, rng, 0.8, width=2)
    spec = IntegratorSpec(dt=0.002, t_end=2.0, sample_every=100)
    rotating = run(DcglModel(dim=2, cgl_lambda=lam, frame="rotating"), initial, spec)
    lab = run(DcglModel(dim=2, cgl_lambda=lam, frame="lab"), initial, spec)
    assert rotating.times == lab.times
    for t, v, u in zip(rotating.times, rotating.states, lab.states):
        gap = np.abs(as_complex(u) * np.exp(1j * lam * t) - as_complex(v)).max()
        assert gap <= 1e-7, t


@pytest.mark.parametrize("bonds", ["random", "antiferro", "ferro"])
def test_spin_glass_stays_in_the_unit_cube(rng, bonds):
    window = LatticeWindow(dim=2, radius=6)
    model = SpinGlassModel.build(window, bonds, seed=3, mu=0.5)
    initial = Field.random_uniform(window, rng, 1.0)
    spec = IntegratorSpec(dt=0.01, t_end=5.0, sample_every=10)
    trajectory = run(model, initial, spec)
    assert max(u.max_abs() for u in trajectory.states) <= 1 + 1e-9


def test_damped_fk_minimum_has_zero_energy(line):
    model = FkModel(damping=0.3)
    triple = model.triple(Field.zeros(line), Field.zeros(line))
    assert triple.e.max_abs() == 0
    assert triple.d.max_abs() == 0


def test_model_parameters_are_validated(line):
    with pytest.raises(ArgumentError):
        FkModel(damping=-1.0)
    with pytest.raises(ArgumentError):
        GeneralizedFkModel(dim=2)
    with pytest.raises(ArgumentError):
        MultiRangeModel(interactions={})
    with pytest.raises(ArgumentError):
        MultiRangeModel.uniform([0, 1], ElasticInteraction())
    with pytest.raises(ArgumentError):
        DcglModel(cgl_lambda=0.0)
    with pytest.raises(ArgumentError):
        SpinGlassModel.build(LatticeWindow(dim=4, radius=2))
    with pytest.raises(ArgumentError):
        SpinGlassModel.build(line, "mixed")


def test_flux_variant_selection(line, rng):
    model = MultiRangeModel.uniform([1, 2], ElasticInteraction(kappa=1.0, amplitude=0.05))
    chosen, residuals = select_flux_variant(model, Field.random_uniform(line, rng, 1.0))
    assert chosen == "crossing"
    assert residuals["crossing"] < 1e-10 < residuals["verbatim"]


def test_flux_variants_agree_at_unit_range(line, rng):
    model = MultiRangeModel.uniform([1], ElasticInteraction(kappa=1.0))
    u = Field.random_uniform(line, rng, 1.0)
    rate = model.rate(u)
    crossing = model.flux(u, rate)
    verbatim = model.with_flux_variant("verbatim").flux(u, rate)
    assert np.array_equal(crossing.values, verbatim.values)


def test_bond_signs_are_symmetric():
    window = LatticeWindow(dim=2, radius=3)
    model = SpinGlassModel(window=window, signs=bond_signs(window, "random", seed=3))
    for site in [(0, 0), (1, -2), (-3, 3)]:
        for axis in range(2):
            below = list(site)
            below[axis] = (below[axis] - 1 + 3) % 7 - 3
            assert model.bond_sign(site, axis, -1) == model.bond_sign(tuple(below), axis, 1)


def test_bond_signs_are_reproducible():
    window = LatticeWindow(dim=2, radius=3)
    assert np.array_equal(bond_signs(window, "random", 11), bond_signs(window, "random", 11))
    assert set(np.unique(bond_signs(window, "random", 11))) <= {-1.0, 1.0}


def test_site_split_modulus(rng):
    window = LatticeWindow(dim=2, radius=5)
    model = SpinGlassModel.build(window, "random", seed=5, split="site")
    triple = model.triple(Field.random_uniform(window, rng, 1.2))
    assert check_a5(triple, model.modulus(triple.e_sup)) <= a5_tolerance(triple)
    with pytest.raises(ArgumentError):
        SpinGlassModel.build(window, "random", seed=5).modulus(1.0)


@pytest.mark.parametrize("level", [0.25, 1.0])
def test_closed_modulus_dominates_grid_estimate(level):
    spring = ElasticInteraction(kappa=2.0, amplitude=0.1)
    assert estimate_b(spring, level).value <= spring.modulus(level) * (1 + 1e-9)


def test_closed_modulus_of_pure_spring():
    assert ElasticInteraction(kappa=1.0).modulus(1.5) == pytest.approx(3.0)
    assert ElasticInteraction(kappa=3.0).modulus(0.0) == 0


def test_grid_modulus_source():
    spring = ElasticInteraction(kappa=1.0)
    model = GeneralizedFkModel(interaction=spring, modulus_source="grid")
    assert model.modulus(1.0) == pytest.approx(2.0, rel=0.05)
    with pytest.raises(ArgumentError):
        GeneralizedFkModel(interaction=spring, width=2, modulus_source="grid").modulus(1.0)


def test_fk_step_ceiling_grows_with_dimension():
    assert FkModel(dim=3).stiffness() > FkModel(dim=1).stiffness()
    assert FkModel(dim=1, K=0.0).stiffness() == 4
    assert math.isclose(FkModel(damping=0.25, K=0.0).stiffness(), 4.0)
