"""Fixed-step explicit time integration of lattice systems."""
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .eds import EdsModel, EnergyTriple
from .exceptions import ArgumentError, IntegrationBlowUp
from .lattice import Field
from .models import IntegratorSpec

logger = logging.getLogger(__name__)

BLOW_UP = 1e12

Observer = Callable[[float, Field, Optional[Field]], None]
State = Tuple[Field, Optional[Field]]


@dataclass(frozen=True)
class Trajectory:
    """
    Sampled orbit of a lattice system.

    Attributes:
        model (EdsModel): The system that produced the orbit.
        times (Tuple[float, ...]): Sample times, starting at 0, increasing.
        states (Tuple[Field, ...]): Positions at the sample times.
        velocities (Tuple[Field | None, ...]): Velocities of damped models, else ``None``.
    """

    model: EdsModel
    times: Tuple[float, ...]
    states: Tuple[Field, ...]
    velocities: Tuple[Optional[Field], ...]

    def __len__(self) -> int:
        return len(self.times)

    @cached_property
    def triples(self) -> List[EnergyTriple]:
        return [self.model.triple(u, v) for u, v in zip(self.states, self.velocities)]

    @property
    def final(self) -> State:
        return self.states[-1], self.velocities[-1]


def _anchor_like(field: Field, values: np.ndarray) -> Field:
    return Field(field.window, values, field.anchor)


def _derivative(model: EdsModel, u: Field, v: Optional[Field]):
    du, dv = model.time_derivative(u, v)
    return du.values, None if dv is None else dv.values


def _advance(u: Field, v: Optional[Field], k, h: float) -> State:
    du, dv = k
    u_next = _anchor_like(u, u.values + h * du)
    v_next = None if v is None else _anchor_like(v, v.values + h * dv)
    return u_next, v_next


def _check_finite(state: Field, time: float) -> None:
    values = np.abs(state.values)
    finite = np.isfinite(values)
    if finite.all() and values.max() <= BLOW_UP:
        return
    magnitude = np.where(finite, values, np.inf)
    index = np.unravel_index(int(np.argmax(magnitude)), values.shape)
    site = state.window.site(index[:-1])
    raise IntegrationBlowUp(time=time, site=site, magnitude=float(values[index]))


def step(
    model: EdsModel,
    state: Field,
    velocity: Optional[Field] = None,
    dt: float = 1e-3,
    scheme: str = "rk4",
    time: float = 0.0,
) -> State:
    """
    One explicit step of the selected scheme.

    Args:
        model (EdsModel): The lattice system.
        state (Field): Positions at ``time``.
        velocity (Field | None): Velocities, damped models only.
        dt (float): Step size, positive.
        scheme (str): ``rk4`` or ``euler``.
        time (float): Time of ``state``, used in blow-up reports.

    Returns:
        Tuple[Field, Field | None]: Positions and velocities after the step;
        anchors of frozen windows are carried over.

    Raises:
        ArgumentError: If ``dt`` is not positive or the scheme is unknown.
        IntegrationBlowUp: If the step produced a non-finite or runaway value.
    """
    if not dt > 0:
        raise ArgumentError(f"dt must be positive, got {dt}")
    model.check_state(state, velocity)
    k1 = _derivative(model, state, velocity)
    if scheme == "euler":
        u_next, v_next = _advance(state, velocity, k1, dt)
    elif scheme == "rk4":
        k2 = _derivative(model, *_advance(state, velocity, k1, dt / 2))
        k3 = _derivative(model, *_advance(state, velocity, k2, dt / 2))
        k4 = _derivative(model, *_advance(state, velocity, k3, dt))
        du = (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]) / 6
        dv = None if velocity is None else (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]) / 6
        u_next, v_next = _advance(state, velocity, (du, dv), dt)
    else:
        raise ArgumentError(f"unknown scheme {scheme!r}")
    _check_finite(u_next, time + dt)
    if v_next is not None:
        _check_finite(v_next, time + dt)
    return u_next, v_next


def _prepare(field: Optional[Field]) -> Optional[Field]:
    if field is None:
        return None
    if field.window.boundary == "frozen" and field.anchor is None:
        return field.anchored(field.values)
    return field


def run(
    model: EdsModel,
    initial: Field,
    spec: IntegratorSpec,
    velocity: Optional[Field] = None,
    observers: Sequence[Observer] = (),
    store: bool = True,
) -> Trajectory:
    """
    Integrate from ``initial`` up to ``spec.t_end``.

    Samples are taken every ``spec.sample_every`` steps, at t = 0 and at the
    final step. Each observer is called as ``observer(t, u, v)`` on every sample.

    Args:
        model (EdsModel): The lattice system.
        initial (Field): Positions at t = 0.
        spec (IntegratorSpec): Scheme, step and sampling.
        velocity (Field | None): Initial velocities; zero when omitted for damped models.
        observers (Sequence[Callable]): Sample callbacks.
        store (bool): Keep sampled states in the returned trajectory; otherwise
            only the final state is kept.

    Returns:
        Trajectory: The sampled orbit.

    Raises:
        IntegrationBlowUp: Propagated from :func:`step`.
    """
    if model.damped and velocity is None:
        velocity = Field.zeros(initial.window, model.width)
    u, v = _prepare(initial), _prepare(velocity)
    model.check_state(u, v)
    n_steps = spec.n_steps
    if spec.dt > 2 / model.stiffness():
        logger.warning(
            "dt=%g exceeds the stability ceiling 2/%g of %s",
            spec.dt, model.stiffness(), type(model).__name__,
        )
    times, states, velocities = [], [], []

    def sample(k: int, u: Field, v: Optional[Field]) -> None:
        t = k * spec.dt
        for observer in observers:
            observer(t, u, v)
        if store or k == n_steps:
            times.append(t)
            states.append(u)
            velocities.append(v)

    sample(0, u, v)
    logger.info("integrating %s: %d steps of %g (%s)", type(model).__name__, n_steps, spec.dt, spec.scheme)
    for k in range(1, n_steps + 1):
        u, v = step(model, u, v, spec.dt, spec.scheme, time=(k - 1) * spec.dt)
        if k % spec.sample_every == 0 or k == n_steps:
            sample(k, u, v)
    return Trajectory(model=model, times=tuple(times), states=tuple(states), velocities=tuple(velocities))
