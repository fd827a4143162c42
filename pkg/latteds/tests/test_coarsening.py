import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from pydantic import ValidationError

from latteds.coarsening import (
    ORDERING_TOLERANCE,
    OrderingState,
    coarsening_model,
    cone_violation,
    droplet_sizes,
    droplet_stats,
    phase_labels,
    reflect,
    run_coarsening,
    run_ensemble,
    sample_initial,
    to_pm_frame,
    translate,
    verify_ordering,
)
from latteds.exceptions import ArgumentError
from latteds.integrator import run
from latteds.lattice import Field
from latteds.models import CoarseningConfig, IntegratorSpec, LatticeWindow


class UnionFind:
    def __init__(self, n):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, a):
        while self.parent[a] != a:
            self.parent[a] = self.parent[self.parent[a]]
            a = self.parent[a]
        return a

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a == b:
            return
        if self.size[a] < self.size[b]:
            a, b = b, a
        self.parent[b] = a
        self.size[a] += self.size[b]


def union_find_sizes(labels, periodic=True):
    flat = labels.reshape(-1)
    index = np.arange(flat.size).reshape(labels.shape)
    uf = UnionFind(flat.size)
    for axis in range(labels.ndim):
        if periodic:
            pairs = zip(index.ravel(), np.roll(index, -1, axis=axis).ravel())
        else:
            here = [slice(None)] * labels.ndim
            there = [slice(None)] * labels.ndim
            here[axis], there[axis] = slice(0, -1), slice(1, None)
            pairs = zip(index[tuple(here)].ravel(), index[tuple(there)].ravel())
        for a, b in pairs:
            if flat[a] == flat[b]:
                uf.union(int(a), int(b))
    return sorted(uf.size[r] for r in {uf.find(i) for i in range(flat.size)})


small = dict(radius=16, t_end=2.0, dt=0.05, snapshot_every=0.5)


label_arrays = st.one_of(
    arrays(np.int8, st.integers(1, 40), elements=st.integers(0, 1)),
    arrays(np.int8, st.tuples(st.integers(1, 9), st.integers(1, 9)), elements=st.integers(0, 1)),
)


@given(labels=label_arrays, periodic=st.booleans())
@settings(max_examples=60, deadline=None)
def test_droplet_sizes_match_union_find(labels, periodic):
    assert sorted(droplet_sizes(labels, periodic)) == union_find_sizes(labels, periodic)


@given(labels=label_arrays, shift=st.integers(-50, 50))
@settings(max_examples=60, deadline=None)
def test_droplet_count_is_translation_invariant(labels, shift):
    base = droplet_stats(labels, 0.0)
    for axis in range(labels.ndim):
        moved = droplet_stats(np.roll(labels, shift, axis=axis), 0.0)
        assert (moved.count, moved.max_size) == (base.count, base.max_size)


def test_droplet_sizes_examples():
    assert droplet_sizes(np.array([0, 0, 1, 1, 1, 0])) == [3, 3]
    assert droplet_sizes(np.array([0, 0, 1, 1, 1, 0]), periodic=False) == [2, 3, 1]
    assert len(droplet_sizes(np.array([0, 1, 1, 0]))) == len(droplet_sizes(np.array([0, 0, 1, 1]))) == 2
    checkerboard = np.indices((4, 4)).sum(axis=0) % 2
    assert droplet_sizes(checkerboard) == [1] * 16
    odd = np.indices((3, 3)).sum(axis=0) % 2
    assert droplet_sizes(odd, periodic=False) == [1] * 9
    assert len(droplet_sizes(odd)) < 9
    assert droplet_sizes(np.ones((4, 4))) == [16]


def test_droplet_stats():
    snapshot = droplet_stats(np.array([0, 0, 1, 1, 1, 0]), 2.5)
    assert snapshot.t == 2.5
    assert snapshot.count == 2
    assert snapshot.mean_size == 3.0
    assert snapshot.max_size == 3
    assert snapshot.phase_fraction == 0.5
    cut = droplet_stats(np.array([0, 0, 1, 1, 1, 0]), 2.5, periodic=False)
    assert (cut.count, cut.mean_size) == (3, 2.0)


def test_phase_labels_keep_the_band():
    previous = np.array([0, 1, 0, 1])
    labels = phase_labels(np.array([0.9, 0.1, 0.5, 0.5]), previous, 0.25, 0.75)
    assert labels.tolist() == [1, 0, 0, 1]


def test_bernoulli_sample_is_reproducible():
    a = sample_initial(CoarseningConfig(**small, seed=5))
    b = sample_initial(CoarseningConfig(**small, seed=5))
    c = sample_initial(CoarseningConfig(**small, seed=6))
    assert np.array_equal(a.u.values, b.u.values)
    assert not np.array_equal(a.u.values, c.u.values)
    assert set(np.unique(a.u.values)) <= {0.0, 1.0}
    assert a.v is None


def test_deterministic_initial_states():
    assert sample_initial(CoarseningConfig(**small, initial="zero")).u.max_abs() == 0
    kink = sample_initial(CoarseningConfig(**small, initial="kink")).u
    assert kink.at((-1,))[0] == 0 and kink.at((0,))[0] == 1
    multikink = sample_initial(CoarseningConfig(**small, initial="multikink")).u.values[:, 0]
    assert multikink[:4].tolist() == [0, 0, 0, 0]
    assert multikink[4:8].tolist() == [1, 1, 1, 1]
    assert multikink[8] == 0 and multikink[16] == 1


def test_damped_sample_starts_at_rest():
    state = sample_initial(CoarseningConfig(**small, damping=0.05))
    assert state.v.max_abs() == 0


def test_overdamped_ceiling():
    with pytest.raises(ValidationError):
        CoarseningConfig(damping=0.2)
    assert CoarseningConfig(damping=0.2, enforce_overdamped=False).damping == 0.2
    with pytest.raises(ValidationError):
        CoarseningConfig(band_low=0.8, band_high=0.6)


def test_cone_violation_locates_the_worst_site():
    window = LatticeWindow(dim=1, radius=3)
    values = np.full(window.shape, 0.5)
    values[window.index((2,))] = 1.25
    amount, site = cone_violation(OrderingState(u=Field(window, values)), 0.0)
    assert amount == pytest.approx(0.25)
    assert site == (2,)


def test_reflection_and_translation_commute_with_the_flow():
    config = CoarseningConfig(**small, dim=2)
    model = coarsening_model(config.model_copy(update={"radius": 6}))
    rng = np.random.default_rng(3)
    x = Field(model.window, rng.uniform(-1, 1, size=model.window.shape))
    spec = IntegratorSpec(dt=0.05, t_end=1.0)
    final = run(model, x, spec, store=False).final[0]
    mirrored = run(model, reflect(x)[0], spec, store=False).final[0]
    moved = run(model, translate(x, 1, 2), spec, store=False).final[0]
    assert np.allclose(mirrored.values, -final.values, rtol=0, atol=1e-12)
    assert np.allclose(moved.values, translate(final, 1, 2).values, rtol=0, atol=1e-12)


def test_zero_state_does_not_coarsen():
    trajectory, stats = run_coarsening(CoarseningConfig(**small, initial="zero"))
    assert len(stats.snapshots) == 5
    assert all(snapshot.count == 1 for snapshot in stats.snapshots)
    assert stats.flip_fraction == 0.0
    assert trajectory.times == pytest.approx((0.0, 0.5, 1.0, 1.5, 2.0))


def test_bernoulli_run_coarsens():
    config = CoarseningConfig(radius=64, t_end=40.0, dt=0.05, snapshot_every=10.0, seed=42)
    _, stats = run_coarsening(config)
    assert stats.snapshots[-1].count <= stats.snapshots[0].count
    assert stats.growth_ratio >= 1.0
    assert stats.flips.shape == (129,)


def test_damped_run_stays_in_the_cone():
    _, stats = run_coarsening(CoarseningConfig(**small, damping=0.05))
    assert len(stats.snapshots) == 5
    assert 0.0 <= stats.cone_excess <= ORDERING_TOLERANCE


def test_ensemble(settings_env):
    stats = run_ensemble(CoarseningConfig(**small), [1, 2, 3])
    assert len(stats) == 3
    assert all(0.0 <= s.visited_both_fraction <= 1.0 for s in stats)


def test_order_is_preserved():
    config = CoarseningConfig(**small)
    model = coarsening_model(config)
    lower, _ = to_pm_frame(sample_initial(config))
    upper = lower.with_values(np.minimum(lower.values + 0.3, 1.0))
    check = verify_ordering(model, lower, upper, IntegratorSpec(dt=0.05, t_end=2.0, sample_every=4))
    assert check
    assert check.amount <= 1e-12
    with pytest.raises(ArgumentError):
        verify_ordering(model, upper, lower, IntegratorSpec(dt=0.05, t_end=0.1))
