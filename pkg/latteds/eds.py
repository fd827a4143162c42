"""The lattice EDS contract: energy, dissipation and flux per site.

A model supplies its right-hand side and the three functionals; this module
evaluates them, checks the axioms that can be checked on finite windows and
estimates the dissipation modulus b of a pair interaction.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional, Tuple

import numpy as np

from .exceptions import ArgumentError, DomainError, ModulusEstimateError
from .lattice import Field, cube_mask, div
from .models import BoundedEdsInfo, CubeSpec, LatticeWindow, ModulusEstimate

if TYPE_CHECKING:
    from .integrator import Trajectory

logger = logging.getLogger(__name__)

COMPLEX_STEP = 1e-20


@dataclass(frozen=True)
class EnergyTriple:
    """
    Per-site energy, dissipation and flux of one state.

    Attributes:
        e (Field): Energy density, width 1.
        d (Field): Dissipation density, width 1.
        f (Field): Flux, width N.
    """

    e: Field
    d: Field
    f: Field

    @property
    def e_sup(self) -> float:
        return self.e.sup()

    @property
    def f_sup2(self) -> float:
        return self.f.norm2().sup()


class EdsModel(ABC):
    """
    A lattice dynamical system with an energy balance.

    Gradient models (``damping == 0``) evolve ``du/dt = force(u)``. Damped
    models evolve the pair ``(u, v)`` with ``du/dt = v`` and
    ``damping * dv/dt = -v + force(u)``.
    """

    dim: int
    width: int
    damping: float

    @property
    def damped(self) -> bool:
        return self.damping > 0

    @abstractmethod
    def force(self, state: Field) -> Field:
        """Right-hand side of the gradient equation, or the force of the damped one."""

    @abstractmethod
    def energy_density(self, state: Field, velocity: Optional[Field] = None) -> Field:
        """Energy e; must be built from analytic operations only."""

    @abstractmethod
    def flux(self, state: Field, rate: Field) -> Field:
        """Flux f given the state and its time derivative."""

    @abstractmethod
    def modulus(self, energy_level: float) -> float:
        """Constant b with f^2 <= b d at every state with ||e||_inf <= energy_level."""

    @abstractmethod
    def stiffness(self) -> float:
        """Largest growth rate of the linearized dynamics, for the step ceiling."""

    def dissipation(self, state: Field, rate: Field) -> Field:
        return rate.norm2()

    def known_equilibria(self, window: LatticeWindow) -> List[Tuple[Field, Optional[Field]]]:
        return []

    def check_state(self, state: Field, velocity: Optional[Field] = None) -> None:
        if state.dim != self.dim:
            raise ArgumentError(f"state has dimension {state.dim}, model expects {self.dim}")
        if state.width != self.width:
            raise ArgumentError(f"state has width {state.width}, model expects {self.width}")
        if self.damped:
            if velocity is None:
                raise ArgumentError("damped model needs a velocity field")
            if velocity.window != state.window or velocity.width != self.width:
                raise ArgumentError("velocity does not match the state")
        elif velocity is not None:
            raise ArgumentError("velocity given to a gradient model (lambda = 0)")

    def time_derivative(
        self, state: Field, velocity: Optional[Field] = None
    ) -> Tuple[Field, Optional[Field]]:
        if not self.damped:
            return self.force(state), None
        return velocity, (self.force(state) - velocity) / self.damping

    def rhs(self, state: Field, velocity: Optional[Field] = None):
        """
        Time derivative of the state.

        Args:
            state (Field): Positions u.
            velocity (Field | None): Velocities v, damped models only.

        Returns:
            Field | tuple[Field, Field]: ``du/dt`` for gradient models,
            ``(du/dt, dv/dt)`` for damped ones.
        """
        self.check_state(state, velocity)
        du, dv = self.time_derivative(state, velocity)
        return du if dv is None else (du, dv)

    def rate(self, state: Field, velocity: Optional[Field] = None) -> Field:
        """The time derivative du/dt of the positions."""
        return velocity if self.damped else self.time_derivative(state, velocity)[0]

    def triple(self, state: Field, velocity: Optional[Field] = None) -> EnergyTriple:
        self.check_state(state, velocity)
        rate = self.rate(state, velocity)
        return EnergyTriple(
            e=self.energy_density(state, velocity),
            d=self.dissipation(state, rate),
            f=self.flux(state, rate),
        )


class PairInteraction(ABC):
    """
    A nearest-neighbour potential L(x, y) on R^M x R^M, periodic under
    simultaneous integer translation of both arguments.

    Arguments are arrays whose last axis has length M; ``energy`` drops that
    axis and the partial derivatives keep it.
    """

    @abstractmethod
    def energy(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def d1(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    @abstractmethod
    def d2(self, x: np.ndarray, y: np.ndarray) -> np.ndarray: ...

    def modulus(self, energy_level: float) -> Optional[float]:
        """Closed-form b(y) when one is known."""
        return None

    @property
    def curvature(self) -> float:
        return 0.0


def evaluate_triple(model: EdsModel, state: Field, velocity: Optional[Field] = None) -> EnergyTriple:
    """
    Evaluate e, d and f of ``state`` under ``model``.

    Args:
        model (EdsModel): The lattice system.
        state (Field): Positions.
        velocity (Field | None): Velocities, damped models only.

    Returns:
        EnergyTriple: The per-site functionals.

    Raises:
        ArgumentError: If the state does not match the model.
    """
    return model.triple(state, velocity)


def _check_radius(window: LatticeWindow, R: int) -> None:
    if R > window.max_radius:
        raise DomainError(
            f"radius {R} exceeds window radius minus buffer ({window.max_radius})"
        )


def windowed_sum(field: Field, R: int) -> float:
    _check_radius(field.window, R)
    mask = cube_mask(field.window, CubeSpec(radius=R))
    return field.values[..., 0][mask].sum().item()


def windowed_energy(triple: EnergyTriple, R: int) -> float:
    """E(R) = sum of e over C*(R)."""
    return windowed_sum(triple.e, R)


def check_a1(triple: EnergyTriple) -> float:
    """Smallest value of e and d; negative values violate nonnegativity."""
    return min(float(triple.e.values.min()), float(triple.d.values.min()))


def check_a5(triple: EnergyTriple, beta: float) -> float:
    """
    Largest violation of f^2 <= beta d.

    Args:
        triple (EnergyTriple): Functionals of one state.
        beta (float): Flux-dissipation constant, positive.

    Returns:
        float: max over sites of f(alpha)^2 - beta d(alpha).
    """
    if not beta > 0:
        raise ArgumentError(f"beta must be positive, got {beta}")
    excess = triple.f.norm2().values - beta * triple.d.values
    return float(excess.max())


def a5_tolerance(triple: EnergyTriple) -> float:
    return 1e-12 * max(1.0, triple.f_sup2)


def check_a3(model: EdsModel, window: LatticeWindow) -> List[Tuple[float, float]]:
    """Max dissipation and max |rhs| on each known equilibrium."""
    results = []
    for state, velocity in model.known_equilibria(window):
        triple = model.triple(state, velocity)
        du, dv = model.time_derivative(state, velocity)
        rhs = du.max_abs() if dv is None else max(du.max_abs(), dv.max_abs())
        results.append((triple.d.sup(), rhs))
    return results


def local_balance_residual(
    model: EdsModel, state: Field, velocity: Optional[Field] = None
) -> Field:
    """
    Site-wise residual of de/dt = -d + div f.

    The time derivative of e along the model flow is taken by complex-step
    differentiation, which is exact up to rounding.

    Args:
        model (EdsModel): The lattice system.
        state (Field): Positions, real valued.
        velocity (Field | None): Velocities, damped models only.

    Returns:
        Field: de/dt + d - div f at every site.
    """
    model.check_state(state, velocity)
    du, dv = model.time_derivative(state, velocity)
    h = COMPLEX_STEP
    moved = Field(state.window, state.values + 1j * h * du.values, state.anchor)
    moved_velocity = None
    if velocity is not None:
        moved_velocity = Field(velocity.window, velocity.values + 1j * h * dv.values)
    de_dt = model.energy_density(moved, moved_velocity).values.imag / h
    triple = model.triple(state, velocity)
    balance = -triple.d.values + div(triple.f).values
    return Field(state.window, de_dt - balance)


def estimate_b(
    interaction: PairInteraction,
    energy_level: float,
    resolution: float = 1e-3,
    max_reach: float = 64.0,
) -> ModulusEstimate:
    """
    Grid estimate of b(y) = b_1(b_2(y)) for a scalar pair interaction.

    b_2(y) is the largest |b - a| with L(a, b) <= y and b_1(x) the largest
    L_1(a, b)^2 with |b - a| <= x. Periodicity restricts ``a`` to one cell;
    differences live on the fixed lattice k * resolution, so estimates at
    different levels are comparable and non-decreasing in ``energy_level``.

    Args:
        interaction (PairInteraction): A potential with M = 1.
        energy_level (float): The level y >= 0.
        resolution (float): Grid spacing in units of the periodicity cell.
        max_reach (float): Largest difference searched before giving up.

    Returns:
        ModulusEstimate: Value, resolution and the reach that closed the sublevel set.

    Raises:
        ModulusEstimateError: If the sublevel set is still open at ``max_reach``.
    """
    if energy_level < 0:
        raise ArgumentError(f"energy level must be nonnegative, got {energy_level}")
    a = np.arange(0.0, 1.0, resolution)
    reach = 1.0
    while True:
        spread = _sublevel_spread(interaction, energy_level, a, resolution, reach)
        if spread is None:
            return ModulusEstimate(value=0.0, resolution=resolution, reach=reach)
        if spread < reach - resolution:
            break
        if reach >= max_reach:
            raise ModulusEstimateError(
                f"sublevel set of L at level {energy_level} not bounded within |b-a| <= {max_reach}"
            )
        reach *= 2
    value = _max_slope_squared(interaction, a, resolution, spread)
    logger.debug("b(%g) ~ %g (b_2 = %g, reach %g)", energy_level, value, spread, reach)
    return ModulusEstimate(value=value, resolution=resolution, reach=reach)


def _difference_grid(resolution: float, reach: float) -> np.ndarray:
    k = int(math.floor(reach / resolution + 1e-9))
    return np.arange(-k, k + 1) * resolution


def _chunks(values: np.ndarray, size: int = 2048):
    for start in range(0, len(values), size):
        yield values[start : start + size]


def _sublevel_spread(interaction, level, a, resolution, reach) -> Optional[float]:
    best = None
    for deltas in _chunks(_difference_grid(resolution, reach)):
        x = a[:, None, None]
        y = (a[:, None] + deltas[None, :])[..., None]
        low = interaction.energy(np.broadcast_to(x, y.shape), y).min(axis=0)
        inside = np.abs(deltas[low <= level])
        if inside.size:
            top = float(inside.max())
            best = top if best is None else max(best, top)
    return best


def _max_slope_squared(interaction, a, resolution, spread) -> float:
    best = 0.0
    for deltas in _chunks(_difference_grid(resolution, spread)):
        x = a[:, None, None]
        y = (a[:, None] + deltas[None, :])[..., None]
        slope = interaction.d1(np.broadcast_to(x, y.shape), y)[..., 0]
        best = max(best, float((slope * slope).max()))
    return best


def bounded_info(trajectory: "Trajectory") -> BoundedEdsInfo:
    """
    beta as the max over samples of the model modulus and e0 from the first sample.

    Args:
        trajectory (Trajectory): A sampled orbit.

    Returns:
        BoundedEdsInfo: The per-orbit constants.
    """
    triples = trajectory.triples
    # b is non-decreasing, so its max over samples sits at the largest level
    beta = trajectory.model.modulus(max(t.e_sup for t in triples))
    return BoundedEdsInfo(beta=beta, e0=triples[0].e_sup)
