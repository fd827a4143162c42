import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from latteds.exceptions import ArgumentError, DomainError
from latteds.lattice import (
    Field,
    boundary_mask,
    boundary_measure,
    boundary_sites,
    cube_sites,
    cube_volume,
    diff,
    div,
    grad,
    laplacian,
    normal,
    omega,
    product_rule_sides,
    shell_size,
    shift,
    stokes_sum,
)
from latteds.models import CubeSpec, LatticeWindow

seeds = st.integers(min_value=0, max_value=2 ** 32 - 1)


def random_window(data, max_radius=6):
    dim = data.draw(st.integers(1, 3))
    radius = data.draw(st.integers(1, max_radius))
    return LatticeWindow(dim=dim, radius=radius + 1), radius


def test_constant_is_shift_invariant(square):
    u = Field.constant(square, 2.5)
    for axis in range(2):
        for direction in (1, -1):
            assert np.array_equal(shift(u, axis, direction).values, u.values)


def test_periodic_shift_rotates():
    window = LatticeWindow(dim=1, radius=2)
    u = Field(window, np.arange(5.0))
    assert shift(u, 0, 1).values[:, 0].tolist() == [1.0, 2.0, 3.0, 4.0, 0.0]
    assert shift(u, 0, -1).values[:, 0].tolist() == [4.0, 0.0, 1.0, 2.0, 3.0]


def test_frozen_shift_reads_anchor():
    window = LatticeWindow(dim=1, radius=2, boundary="frozen")
    u = Field(window, np.arange(5.0), anchor=np.full(5, 7.0))
    assert shift(u, 0, 1).values[-1, 0] == 7.0
    assert shift(u, 0, -1).values[0, 0] == 7.0
    edge = Field(window, np.arange(5.0))
    assert shift(edge, 0, 1).values[-1, 0] == 4.0


def test_shift_rejects_bad_axis(square):
    u = Field.zeros(square)
    with pytest.raises(ArgumentError):
        shift(u, 2, 1)
    with pytest.raises(ArgumentError):
        shift(u, 0, 0)


@given(seed=seeds)
@settings(max_examples=25, deadline=None)
def test_shift_round_trip(seed):
    rng = np.random.default_rng(seed)
    window = LatticeWindow(dim=2, radius=4)
    u = Field.random_integers(window, rng)
    for axis in range(2):
        assert np.array_equal(shift(shift(u, axis, 1), axis, -1).values, u.values)


def test_differences_of_constant_vanish(square):
    u = Field.constant(square, 3.0)
    for variant in ("backward", "forward"):
        assert not np.any(diff(u, 1, variant).values)


def test_unit_slope_on_frozen_interior():
    window = LatticeWindow(dim=2, radius=4, boundary="frozen")
    u = Field.coordinate(window, 1)
    interior = (slice(1, -1), slice(1, -1))
    for variant in ("backward", "forward"):
        assert np.all(diff(u, 1, variant).values[interior] == 1)


@given(seed=seeds)
@settings(max_examples=25, deadline=None)
def test_forward_difference_is_shifted_backward(seed):
    rng = np.random.default_rng(seed)
    window = LatticeWindow(dim=3, radius=3)
    u = Field.random_integers(window, rng)
    for axis in range(3):
        assert np.array_equal(diff(u, axis, "forward").values, shift(diff(u, axis), axis, 1).values)


def test_laplacian_of_spike():
    window = LatticeWindow(dim=2, radius=3)
    spike = Field.from_function(window, lambda c: np.all(c == 0, axis=-1).astype(float))
    lap = laplacian(spike)
    assert lap.at((0, 0))[0] == -4
    for site in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        assert lap.at(site)[0] == 1
    assert laplacian(Field.constant(window, 1.5)).max_abs() == 0


@given(data=st.data(), seed=seeds)
@settings(max_examples=30, deadline=None)
def test_laplacian_factorizations(data, seed):
    window, _ = random_window(data)
    u = Field.random_integers(window, np.random.default_rng(seed))
    lap = laplacian(u).values
    assert np.array_equal(lap, div(grad(u, "forward"), "backward").values)
    assert np.array_equal(lap, div(grad(u, "backward"), "forward").values)


@given(data=st.data(), seed=seeds)
@settings(max_examples=30, deadline=None)
def test_partial_integration_identities(data, seed):
    window, _ = random_window(data)
    rng = np.random.default_rng(seed)
    u, w = Field.random_integers(window, rng), Field.random_integers(window, rng)
    for axis in range(window.dim):
        for name, (lhs, rhs) in product_rule_sides(u, w, axis).items():
            assert np.array_equal(lhs.values, rhs.values), name


def test_width_mismatch():
    window = LatticeWindow(dim=2, radius=3)
    with pytest.raises(ArgumentError):
        div(Field.zeros(window, 3))
    with pytest.raises(ArgumentError):
        grad(Field.zeros(window, 2))


def test_one_dimensional_cube():
    window = LatticeWindow(dim=1, radius=4)
    assert len(cube_sites(window, CubeSpec(radius=3))) == 6
    assert boundary_sites(window, 3) == [(-3,), (3,)]
    assert normal((3,), 3) == (1,)
    assert normal((-3,), 3) == (-1,)


def test_corner_and_face_normals():
    assert normal((2, 2), 2) == (1, 1)
    assert normal((-2, 0), 2) == (-1, 0)
    assert normal((0, 0), 2) == (0, 0)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("r", range(1, 7))
def test_cube_counts(dim, r):
    window = LatticeWindow(dim=dim, radius=r + 1)
    assert len(cube_sites(window, CubeSpec(radius=r))) == cube_volume(dim, r) == 2 ** dim * r ** dim
    assert len(cube_sites(window, CubeSpec(radius=r, variant="C"))) == 2 ** dim * r ** dim
    crossings = boundary_measure(window, r)
    assert crossings == 2 ** dim * dim * r ** (dim - 1)
    assert math.isclose(crossings * math.sqrt(dim), omega(dim) * r ** (dim - 1))
    assert int(boundary_mask(window, r).sum()) == shell_size(dim, r)


def test_cube_larger_than_window():
    window = LatticeWindow(dim=2, radius=3)
    with pytest.raises(DomainError):
        cube_sites(window, CubeSpec(radius=4))


def test_stokes_trivial_fields(square):
    assert stokes_sum(Field.zeros(square, 2), 3) == (0, 0)
    constant = Field.constant(square, (2.0, -1.0), 2)
    for variant in ("Cstar", "C"):
        assert stokes_sum(constant, 3, variant) == (0, 0)


def test_stokes_integer_field(rng):
    window = LatticeWindow(dim=2, radius=4)
    v = Field.random_integers(window, rng, width=2)
    interior, boundary = stokes_sum(v, 3)
    assert interior == boundary


@given(data=st.data(), seed=seeds)
@settings(max_examples=40, deadline=None)
def test_stokes_both_variants(data, seed):
    window, r = random_window(data)
    v = Field.random_integers(window, np.random.default_rng(seed), width=window.dim)
    for variant in ("Cstar", "C"):
        interior, boundary = stokes_sum(v, r, variant)
        assert interior == boundary


def test_field_rejects_wrong_shape(square):
    with pytest.raises(ArgumentError):
        Field(square, np.zeros((3, 3, 1)))
