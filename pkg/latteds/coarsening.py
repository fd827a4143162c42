"""
Coarsening of a bistable lattice from Bernoulli initial data.

The dynamics runs in the +-1 frame of :class:`SpinGlassModel` with ferro
bonds; statistics and the ordering cone are expressed in the 0/1 frame
u01 = (x + 1) / 2, v01 = y / 2, where the stable equilibria are w_0 = 0 and w_1 = 1.
"""
import logging
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .config import get_settings
from .eds import EdsModel
from .exceptions import ArgumentError, OrderingViolation
from .integrator import Observer, Trajectory, run
from .lattice import Field
from .models import CoarseningConfig, DropletSnapshot, IntegratorSpec, LatticeWindow
from .systems import SpinGlassModel, bond_signs

logger = logging.getLogger(__name__)

ORDERING_TOLERANCE = 1e-6


@dataclass(frozen=True)
class OrderingState:
    """
    A state in the 0/1 frame.

    Attributes:
        u (Field): Positions, 0 <= u <= 1 inside the ordering cone.
        v (Field | None): Velocities of damped runs.
    """

    u: Field
    v: Optional[Field] = None


@dataclass
class DropletStats:
    """
    Droplet snapshots and per-site flip counts of one coarsening run.

    Attributes:
        snapshots (List[DropletSnapshot]): Statistics at every snapshot time.
        flips (np.ndarray): Label changes per site.
        visited_both (np.ndarray): Sites that carried both labels at some time.
        cone_excess (float): Largest excursion outside the ordering cone over all steps.
    """

    snapshots: List[DropletSnapshot] = field(default_factory=list)
    flips: Optional[np.ndarray] = None
    visited_both: Optional[np.ndarray] = None
    cone_excess: float = 0.0

    @property
    def flip_fraction(self) -> float:
        """Fraction of sites that flipped at least once."""
        return float((self.flips > 0).mean())

    @property
    def visited_both_fraction(self) -> float:
        return float(self.visited_both.mean())

    @property
    def growth_ratio(self) -> float:
        """Mean droplet size at the last snapshot over the first."""
        return self.snapshots[-1].mean_size / self.snapshots[0].mean_size


def coarsening_window(config: CoarseningConfig) -> LatticeWindow:
    return LatticeWindow(dim=config.dim, radius=config.radius, boundary="periodic")


def coarsening_model(config: CoarseningConfig) -> SpinGlassModel:
    """Ferro bistable lattice with the site energy split."""
    window = coarsening_window(config)
    return SpinGlassModel(
        window=window,
        signs=bond_signs(window, "ferro"),
        mu=config.mu,
        damping=config.damping,
        split="site",
    )


def _kink_offsets(side: int) -> List[int]:
    offsets, step = [], 4
    while step < side:
        offsets.append(step)
        step *= 2
    return offsets


def sample_initial(config: CoarseningConfig) -> OrderingState:
    """
    Initial state in the 0/1 frame, with zero velocity for damped runs.

    ``bernoulli`` draws every site 0 or 1 with probability 1/2 in
    lexicographic order from ``config.seed``; ``zero`` is w_0; ``kink`` is 0
    for alpha_0 < 0 and 1 otherwise; ``multikink`` switches phase at offsets
    4, 8, 16, ... from the left edge.
    """
    window = coarsening_window(config)
    if config.initial == "bernoulli":
        rng = np.random.default_rng(config.seed)
        values = rng.integers(0, 2, size=window.shape).astype(float)
    elif config.initial == "zero":
        values = np.zeros(window.shape)
    elif config.initial == "kink":
        values = (window.coordinates()[..., 0] >= 0).astype(float)
    elif config.initial == "multikink":
        index = np.indices(window.shape)[0]
        phase = np.zeros(window.shape, dtype=int)
        for offset in _kink_offsets(window.side):
            phase += index >= offset
        values = (phase % 2).astype(float)
    else:
        raise ArgumentError(f"unknown initial state {config.initial!r}")
    u = Field(window, values)
    v = Field.zeros(window) if config.damping > 0 else None
    return OrderingState(u=u, v=v)


def to_pm_frame(state: OrderingState) -> Tuple[Field, Optional[Field]]:
    x = Field(state.u.window, 2 * state.u.values - 1)
    y = None if state.v is None else Field(state.v.window, 2 * state.v.values)
    return x, y


def to_unit_frame(x: Field, y: Optional[Field] = None) -> OrderingState:
    u = Field(x.window, (x.values + 1) / 2)
    v = None if y is None else Field(y.window, y.values / 2)
    return OrderingState(u=u, v=v)


def reflect(x: Field, y: Optional[Field] = None) -> Tuple[Field, Optional[Field]]:
    """The swap u -> 1 - u, v -> -v, which is x -> -x, y -> -y in the +-1 frame."""
    return -x, None if y is None else -y


def translate(x: Field, axis: int, k: int) -> Field:
    """Periodic translation by ``k`` sites along ``axis``."""
    return x.with_values(np.roll(x.values, k, axis=axis))


def cone_violation(state: OrderingState, damping: float) -> Tuple[float, Tuple[int, ...]]:
    """Largest excursion outside 0 <= u <= 1 (and 0 <= 2 lambda v + u <= 1) and where."""
    u = state.u.values[..., 0]
    excess = np.maximum(-u, u - 1)
    if damping > 0 and state.v is not None:
        w = 2 * damping * state.v.values[..., 0] + u
        excess = np.maximum(excess, np.maximum(-w, w - 1))
    index = np.unravel_index(int(np.argmax(excess)), excess.shape)
    return float(excess[index]), state.u.window.site(index)


def phase_labels(u01: np.ndarray, previous: np.ndarray, low: float, high: float) -> np.ndarray:
    """Label 1 above ``high``, 0 below ``low``, unchanged in between."""
    labels = previous.copy()
    labels[u01 > high] = 1
    labels[u01 < low] = 0
    return labels


def _neighbours(index: Tuple[int, ...], shape: Tuple[int, ...], periodic: bool):
    for axis in range(len(shape)):
        for step in (-1, 1):
            j = index[axis] + step
            if periodic:
                j %= shape[axis]
            elif not 0 <= j < shape[axis]:
                continue
            yield index[:axis] + (j,) + index[axis + 1:]


def droplet_sizes(labels: np.ndarray, periodic: bool = True) -> List[int]:
    """
    Sizes of the maximal nearest-neighbour connected sets of equal label.

    Components are discovered by breadth-first traversal from sites in
    lexicographic order. On a periodic window the sites on opposite faces
    are neighbours; pass ``periodic=False`` to cut adjacency at the edge.
    """
    shape = labels.shape
    seen = np.zeros(shape, dtype=bool)
    sizes = []
    for start in np.ndindex(shape):
        if seen[start]:
            continue
        seen[start] = True
        queue, size = deque([start]), 0
        while queue:
            site = queue.popleft()
            size += 1
            for other in _neighbours(site, shape, periodic):
                if not seen[other] and labels[other] == labels[site]:
                    seen[other] = True
                    queue.append(other)
        sizes.append(size)
    return sizes


def droplet_stats(labels: np.ndarray, t: float, periodic: bool = True) -> DropletSnapshot:
    """
    Droplet count, mean and max size and phase fraction of a label array.

    Args:
        labels (np.ndarray): 0/1 phase labels of every site.
        t (float): Snapshot time.
        periodic (bool): Whether adjacency wraps around the window.

    Returns:
        DropletSnapshot: The statistics at ``t``.
    """
    sizes = droplet_sizes(labels, periodic)
    return DropletSnapshot(
        t=t,
        count=len(sizes),
        mean_size=float(np.mean(sizes)),
        max_size=int(max(sizes)),
        phase_fraction=float(labels.mean()),
    )


class _CoarseningObserver:
    def __init__(self, config: CoarseningConfig, labels: np.ndarray):
        self.config = config
        self.labels = labels
        self.flips = np.zeros(labels.shape, dtype=np.int64)
        self.seen = [labels == 0, labels == 1]
        self.snapshot_steps = max(1, int(round(config.snapshot_every / config.dt)))
        self.n_steps = int(round(config.t_end / config.dt))
        self.stats = DropletStats()
        self.times: List[float] = []
        self.states: List[Field] = []
        self.velocities: List[Optional[Field]] = []

    def __call__(self, t: float, x: Field, y: Optional[Field]) -> None:
        state = to_unit_frame(x, y)
        amount, site = cone_violation(state, self.config.damping)
        self.stats.cone_excess = max(self.stats.cone_excess, amount)
        if amount > ORDERING_TOLERANCE:
            raise OrderingViolation(site=site, time=t, amount=amount)
        k = int(round(t / self.config.dt))
        if k > 0:
            labels = phase_labels(
                state.u.values[..., 0], self.labels, self.config.band_low, self.config.band_high
            )
            self.flips += labels != self.labels
            self.labels = labels
            self.seen[0] |= labels == 0
            self.seen[1] |= labels == 1
        if k % self.snapshot_steps == 0 or k == self.n_steps:
            self.stats.snapshots.append(droplet_stats(self.labels, t))
            self.times.append(t)
            self.states.append(x)
            self.velocities.append(y)


def run_coarsening(
    config: CoarseningConfig, observers: Sequence[Observer] = ()
) -> Tuple[Trajectory, DropletStats]:
    """
    Integrate the bistable lattice and collect droplet and flip statistics.

    The ordering cone is checked after every step; flips use hysteresis
    bands on the 0/1 frame.

    Args:
        config (CoarseningConfig): Experiment settings.
        observers (Sequence[Callable]): Extra per-step observers in the +-1 frame.

    Returns:
        Tuple[Trajectory, DropletStats]: Snapshots in the +-1 frame and the statistics.

    Raises:
        OrderingViolation: If the state leaves the ordering cone by more than 1e-6.
    """
    model = coarsening_model(config)
    initial = sample_initial(config)
    labels = np.rint(initial.u.values[..., 0]).astype(np.int8)
    watcher = _CoarseningObserver(config, labels)
    x, y = to_pm_frame(initial)
    spec = IntegratorSpec(scheme="rk4", dt=config.dt, t_end=config.t_end, sample_every=1)
    logger.info(
        "coarsening N=%d W=%d lambda=%g seed=%d initial=%s",
        config.dim, config.radius, config.damping, config.seed, config.initial,
    )
    run(model, x, spec, velocity=y, observers=[watcher, *observers], store=False)
    watcher.stats.flips = watcher.flips
    watcher.stats.visited_both = watcher.seen[0] & watcher.seen[1]
    trajectory = Trajectory(
        model=model,
        times=tuple(watcher.times),
        states=tuple(watcher.states),
        velocities=tuple(watcher.velocities),
    )
    return trajectory, watcher.stats


def run_ensemble(config: CoarseningConfig, seeds: Sequence[int]) -> List[DropletStats]:
    """Independent runs over ``seeds``, in parallel up to ``LATTEDS_THREADS`` workers."""
    configs = [config.model_copy(update={"seed": int(seed)}) for seed in seeds]
    with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
        results = list(pool.map(run_coarsening, configs))
    return [stats for _, stats in results]


@dataclass(frozen=True)
class OrderingCheck:
    """
    Outcome of an order preservation run; truthy when the order held.

    Attributes:
        ordered (bool): No violation beyond the tolerance.
        site (tuple | None): First violating site.
        time (float | None): Time of the first violation.
        amount (float): Largest violation seen.
    """

    ordered: bool
    site: Optional[Tuple[int, ...]] = None
    time: Optional[float] = None
    amount: float = 0.0

    def __bool__(self) -> bool:
        return self.ordered


def first_order_violation(
    lower: Field,
    upper: Field,
    damping: float = 0.0,
    lower_velocity: Optional[Field] = None,
    upper_velocity: Optional[Field] = None,
) -> Tuple[float, Tuple[int, ...]]:
    """
    Largest amount by which ``lower <= upper`` fails, and where.

    For damped pairs the order also compares 2 lambda v + u.
    """
    gap = lower.values - upper.values
    if damping > 0 and lower_velocity is not None and upper_velocity is not None:
        gap = np.maximum(
            gap, 2 * damping * (lower_velocity.values - upper_velocity.values) + gap
        )
    index = np.unravel_index(int(np.argmax(gap)), gap.shape)
    return float(gap[index]), lower.window.site(index[:-1])


def verify_ordering(
    model: EdsModel,
    lower: Field,
    upper: Field,
    spec: IntegratorSpec,
    tol: float = 1e-8,
    lower_velocity: Optional[Field] = None,
    upper_velocity: Optional[Field] = None,
) -> OrderingCheck:
    """
    Evolve an ordered pair and check the order at every sample.

    Args:
        model (EdsModel): An order preserving lattice system.
        lower (Field): Initial lower state.
        upper (Field): Initial upper state, ``lower <= upper``.
        spec (IntegratorSpec): Integration settings of both runs.
        tol (float): Allowed violation.

    Returns:
        OrderingCheck: The first violation, if any, and the largest amount seen.
    """
    first, _ = first_order_violation(lower, upper, model.damping, lower_velocity, upper_velocity)
    if first > tol:
        raise ArgumentError(f"initial states are not ordered (violation {first:g})")
    a = run(model, lower, spec, velocity=lower_velocity)
    b = run(model, upper, spec, velocity=upper_velocity)
    worst = 0.0
    for t, ua, va, ub, vb in zip(a.times, a.states, a.velocities, b.states, b.velocities):
        amount, site = first_order_violation(ua, ub, model.damping, va, vb)
        worst = max(worst, amount)
        if amount > tol:
            logger.warning("order lost at t=%g, site %s by %g", t, site, amount)
            return OrderingCheck(ordered=False, site=site, time=t, amount=amount)
    return OrderingCheck(ordered=True, amount=worst)
