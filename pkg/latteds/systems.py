"""Concrete lattice systems: Frenkel-Kontorova, generalized FK, multi-range,
spin glass and the discrete complex Ginzburg-Landau equation."""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np

from .eds import EdsModel, PairInteraction, estimate_b, local_balance_residual
from .exceptions import ArgumentError
from .lattice import Field, diff, laplacian, shift
from .models import LatticeWindow

logger = logging.getLogger(__name__)

TWO_PI = 2 * math.pi

Equilibrium = Tuple[Field, Optional[Field]]


def _at_rest(model: EdsModel, state: Field) -> Equilibrium:
    return state, Field.zeros(state.window, model.width) if model.damped else None


def _exact_equilibria(model: EdsModel, candidates: Sequence[Field]) -> List[Equilibrium]:
    """Keep the candidates on which the force vanishes exactly."""
    kept = []
    for candidate in candidates:
        if not np.any(model.force(candidate).values):
            kept.append(_at_rest(model, candidate))
    return kept


def _site_flux(state: Field, rate: Field) -> Field:
    """f_j = sum over components of rate * forward difference along j."""
    parts = [diff(state, j, "forward").dot(rate) for j in range(state.dim)]
    return Field.stack(parts)


@dataclass(frozen=True, eq=False)
class FkModel(EdsModel):
    """
    Frenkel-Kontorova lattice with potential V(x) = K (1 - cos 2 pi x) per component.

    Attributes:
        dim (int): Lattice dimension N.
        damping (float): lambda; 0 gives the gradient flow.
        K (float): Amplitude of the site potential.
        width (int): Degrees of freedom per site.
    """

    dim: int = 1
    damping: float = 0.0
    K: float = 1.0 / (4 * math.pi ** 2)
    width: int = 1

    def __post_init__(self):
        if self.damping < 0:
            raise ArgumentError(f"damping must be nonnegative, got {self.damping}")
        if self.K < 0:
            raise ArgumentError(f"K must be nonnegative, got {self.K}")

    def potential(self, x):
        return self.K * (1 - np.cos(TWO_PI * x))

    def potential_slope(self, x):
        return TWO_PI * self.K * np.sin(TWO_PI * x)

    def force(self, state: Field) -> Field:
        return laplacian(state) - state.with_values(self.potential_slope(state.values))

    def energy_density(self, state: Field, velocity: Optional[Field] = None) -> Field:
        values = np.sum(self.potential(state.values), axis=-1, keepdims=True)
        for j in range(self.dim):
            values = values + 0.5 * diff(state, j).norm2().values
        if velocity is not None:
            values = values + 0.5 * self.damping * velocity.norm2().values
        return Field(state.window, values)

    def flux(self, state: Field, rate: Field) -> Field:
        return _site_flux(state, rate)

    def modulus(self, energy_level: float) -> float:
        return 2 * self.dim * energy_level

    def stiffness(self) -> float:
        k = 4 * self.dim + 4 * math.pi ** 2 * self.K
        if self.damped:
            return max(1 / self.damping, math.sqrt(k / self.damping))
        return k

    def known_equilibria(self, window: LatticeWindow) -> List[Equilibrium]:
        return [_at_rest(self, Field.zeros(window, self.width))]


@dataclass(frozen=True)
class ElasticInteraction(PairInteraction):
    """
    L(x, y) = kappa/2 |y - x - shift|^2 + amplitude * sum(1 - cos 2 pi y).

    Attributes:
        kappa (float): Spring constant, positive.
        shift (float): Preferred spacing, added to every component.
        amplitude (float): Site potential amplitude.
    """

    kappa: float = 1.0
    shift: float = 0.0
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kappa <= 0:
            raise ArgumentError(f"kappa must be positive, got {self.kappa}")
        if self.amplitude < 0:
            raise ArgumentError(f"amplitude must be nonnegative, got {self.amplitude}")

    def energy(self, x, y):
        stretch = y - x - self.shift
        site = self.amplitude * (1 - np.cos(TWO_PI * y))
        return np.sum(0.5 * self.kappa * stretch * stretch + site, axis=-1)

    def d1(self, x, y):
        return -self.kappa * (y - x - self.shift)

    def d2(self, x, y):
        return self.kappa * (y - x - self.shift) + TWO_PI * self.amplitude * np.sin(TWO_PI * y)

    def modulus(self, energy_level: float, width: int = 1) -> float:
        offset = abs(self.shift) * math.sqrt(width)
        reach = offset + math.sqrt(2 * energy_level / self.kappa)
        return (self.kappa * (reach + offset)) ** 2

    @property
    def curvature(self) -> float:
        return 4 * self.kappa + 4 * math.pi ** 2 * self.amplitude


def _interaction_modulus(
    interaction: PairInteraction, energy_level: float, width: int, source: str
) -> float:
    if source == "grid":
        if width != 1:
            raise ArgumentError("grid estimate of b needs scalar sites (M = 1)")
        return estimate_b(interaction, energy_level).value
    if isinstance(interaction, ElasticInteraction):
        return interaction.modulus(energy_level, width)
    closed = interaction.modulus(energy_level)
    if closed is None:
        return _interaction_modulus(interaction, energy_level, width, "grid")
    return closed


def _apply(pair, x: Field, y: Field) -> np.ndarray:
    return pair(x.values, y.values)


@dataclass(frozen=True, eq=False)
class GeneralizedFkModel(EdsModel):
    """
    Gradient chain u: Z -> R^M coupled by a nearest-neighbour interaction L.

    The equation is du/dt = -L_2(u(a-1), u(a)) - L_1(u(a), u(a+1)).
    """

    interaction: PairInteraction = field(default_factory=ElasticInteraction)
    width: int = 1
    modulus_source: Literal["closed", "grid"] = "closed"
    dim: int = 1
    damping: float = 0.0

    def __post_init__(self):
        if self.dim != 1 or self.damping != 0:
            raise ArgumentError("generalized FK is a one-dimensional gradient chain")

    def force(self, state: Field) -> Field:
        left, right = shift(state, 0, -1), shift(state, 0, 1)
        pull = _apply(self.interaction.d2, left, state) + _apply(self.interaction.d1, state, right)
        return state.with_values(-pull)

    def energy_density(self, state: Field, velocity: Optional[Field] = None) -> Field:
        values = _apply(self.interaction.energy, shift(state, 0, -1), state)
        return Field(state.window, values[..., np.newaxis])

    def flux(self, state: Field, rate: Field) -> Field:
        slope = state.with_values(_apply(self.interaction.d1, state, shift(state, 0, 1)))
        return -slope.dot(rate)

    def modulus(self, energy_level: float) -> float:
        return _interaction_modulus(self.interaction, energy_level, self.width, self.modulus_source)

    def stiffness(self) -> float:
        return self.interaction.curvature or 4.0

    def known_equilibria(self, window: LatticeWindow) -> List[Equilibrium]:
        return _exact_equilibria(self, [Field.zeros(window, self.width)])


FluxVariant = Literal["crossing", "verbatim"]


@dataclass(frozen=True, eq=False)
class MultiRangeModel(EdsModel):
    """
    Scalar gradient chain with interactions at several lattice distances.

    Attributes:
        interactions (Mapping[int, PairInteraction]): L^gamma per distance gamma != 0.
        flux_variant (str): ``crossing`` charges every bond crossing a cut to
            the flux; ``verbatim`` is the one-sided sum -sum_gamma L_1^gamma * du/dt.
        modulus_source (str): ``closed`` or ``grid`` estimate of each b^gamma.
    """

    interactions: Mapping[int, PairInteraction] = field(default_factory=dict)
    flux_variant: FluxVariant = "crossing"
    modulus_source: Literal["closed", "grid"] = "closed"
    dim: int = 1
    width: int = 1
    damping: float = 0.0

    def __post_init__(self):
        if not self.interactions:
            raise ArgumentError("multi-range model needs at least one interaction distance")
        if 0 in self.interactions:
            raise ArgumentError("interaction distance 0 is not allowed")
        if self.flux_variant not in ("crossing", "verbatim"):
            raise ArgumentError(f"unknown flux variant {self.flux_variant!r}")

    @classmethod
    def uniform(
        cls, distances: Sequence[int], interaction: PairInteraction, **kwargs
    ) -> "MultiRangeModel":
        return cls(interactions={int(g): interaction for g in distances}, **kwargs)

    def with_flux_variant(self, variant: FluxVariant) -> "MultiRangeModel":
        return replace(self, flux_variant=variant)

    @property
    def distances(self) -> List[int]:
        return sorted(self.interactions)

    def force(self, state: Field) -> Field:
        pull = np.zeros(state.values.shape, dtype=state.dtype)
        for gamma, L in self.interactions.items():
            pull = pull + _apply(L.d2, shift(state, 0, -gamma), state)
            pull = pull + _apply(L.d1, state, shift(state, 0, gamma))
        return state.with_values(-pull)

    def energy_density(self, state: Field, velocity: Optional[Field] = None) -> Field:
        total = 0
        for gamma, L in self.interactions.items():
            total = total + _apply(L.energy, shift(state, 0, -gamma), state)
        return Field(state.window, np.asarray(total)[..., np.newaxis])

    def _bond_term(self, state: Field, rate: Field, gamma: int) -> Field:
        L = self.interactions[gamma]
        return state.with_values(_apply(L.d1, state, shift(state, 0, gamma))) * rate

    def flux(self, state: Field, rate: Field) -> Field:
        total = Field.zeros(state.window, 1, dtype=np.result_type(state.dtype, rate.dtype))
        for gamma in self.interactions:
            h = self._bond_term(state, rate, gamma)
            if self.flux_variant == "verbatim":
                total = total - h
            elif gamma > 0:
                for k in range(gamma):
                    total = total - (shift(h, 0, -k) if k else h)
            else:
                for k in range(1, -gamma + 1):
                    total = total + shift(h, 0, k)
        return total

    def modulus(self, energy_level: float) -> float:
        parts = [
            _interaction_modulus(L, energy_level, 1, self.modulus_source)
            for L in self.interactions.values()
        ]
        return len(parts) * sum(parts)

    def stiffness(self) -> float:
        return sum(L.curvature or 4.0 for L in self.interactions.values())

    def known_equilibria(self, window: LatticeWindow) -> List[Equilibrium]:
        return _exact_equilibria(self, [Field.zeros(window)])


def select_flux_variant(
    model: MultiRangeModel, state: Field
) -> Tuple[FluxVariant, Dict[str, float]]:
    """
    Pick the flux variant whose local balance residual is smallest on ``state``.

    Args:
        model (MultiRangeModel): Model whose variants are compared.
        state (Field): A test state, preferably generic.

    Returns:
        Tuple[str, Dict[str, float]]: The chosen variant and the max residual of each.
    """
    residuals = {}
    for variant in ("crossing", "verbatim"):
        candidate = model.with_flux_variant(variant)
        residuals[variant] = local_balance_residual(candidate, state).max_abs()
    chosen = min(residuals, key=residuals.get)
    logger.info("multi-range flux variant %s (residuals %s)", chosen, residuals)
    return chosen, residuals


def _bond(x, y, s, mu):
    gap = x - s * y
    return 0.5 * mu * gap * gap


def _bond_slope(x, y, s, mu):
    return mu * (x - s * y)


def bond_signs(
    window: LatticeWindow,
    bonds: Literal["ferro", "antiferro", "random"] = "random",
    seed: Optional[int] = None,
) -> np.ndarray:
    """
    Sign S(a, +e_j) of every bond, shape ``window.shape + (N,)``.

    +1 favours equal minima, -1 opposite ones. The sign of the bond
    (a, -e_j) is read from site a - e_j, which makes the assignment symmetric.
    """
    shape = window.shape + (window.dim,)
    if bonds == "ferro":
        return np.ones(shape)
    if bonds == "antiferro":
        return -np.ones(shape)
    if bonds == "random":
        return np.random.default_rng(seed).choice([-1.0, 1.0], size=shape)
    raise ArgumentError(f"unknown bond assignment {bonds!r}")


@dataclass(frozen=True, eq=False)
class SpinGlassModel(EdsModel):
    """
    Bistable lattice with random ferro or antiferro nearest-neighbour bonds.

    Site potential V(x) = x^4/4 - x^2/2 + 1/4. A bond of sign s carries
    mu/2 (x - s y)^2.

    Attributes:
        window (LatticeWindow): Window the bond signs are drawn on.
        signs (np.ndarray): Bond signs from :func:`bond_signs`.
        mu (float): Coupling.
        damping (float): lambda >= 0.
        split (str): ``half`` shares every bond between its two sites,
            ``site`` charges it to the upper site.
    """

    window: LatticeWindow
    signs: np.ndarray
    mu: float = 1.0
    damping: float = 0.0
    split: Literal["half", "site"] = "half"
    width: int = 1

    def __post_init__(self):
        if self.mu <= 0:
            raise ArgumentError(f"mu must be positive, got {self.mu}")
        if self.damping < 0:
            raise ArgumentError(f"damping must be nonnegative, got {self.damping}")
        if self.split not in ("half", "site"):
            raise ArgumentError(f"unknown energy split {self.split!r}")
        if self.signs.shape != self.window.shape + (self.window.dim,):
            raise ArgumentError("bond signs do not match the window")

    @classmethod
    def build(
        cls,
        window: LatticeWindow,
        bonds: Literal["ferro", "antiferro", "random"] = "random",
        seed: Optional[int] = None,
        **kwargs,
    ) -> "SpinGlassModel":
        if window.dim > 3:
            raise ArgumentError(f"spin glass supports N <= 3, got {window.dim}")
        return cls(window=window, signs=bond_signs(window, bonds, seed), **kwargs)

    @property
    def dim(self) -> int:
        return self.window.dim

    def bond_sign(self, site: Sequence[int], axis: int, direction: int = 1) -> int:
        """S(site, direction * e_axis)."""
        index = list(self.window.index(site))
        if direction < 0:
            index[axis] = (index[axis] - 1) % self.window.side
            if self.window.boundary == "frozen" and index[axis] == self.window.side - 1:
                index[axis] = 0
        return int(self.signs[tuple(index) + (axis,)])

    def _signs(self, axis: int) -> Tuple[np.ndarray, np.ndarray]:
        up = Field(self.window, self.signs[..., axis : axis + 1])
        return up.values, shift(up, axis, -1).values

    def force(self, state: Field) -> Field:
        u = state.values
        total = u - u ** 3
        for j in range(self.dim):
            s_up, s_down = self._signs(j)
            total = total - _bond_slope(u, shift(state, j, 1).values, s_up, self.mu)
            total = total - _bond_slope(u, shift(state, j, -1).values, s_down, self.mu)
        return state.with_values(total)

    def energy_density(self, state: Field, velocity: Optional[Field] = None) -> Field:
        u = state.values
        values = 0.25 * (u * u - 1) ** 2
        for j in range(self.dim):
            s_up, s_down = self._signs(j)
            below = _bond(shift(state, j, -1).values, u, s_down, self.mu)
            if self.split == "site":
                values = values + below
            else:
                above = _bond(u, shift(state, j, 1).values, s_up, self.mu)
                values = values + 0.5 * (above + below)
        if velocity is not None:
            values = values + 0.5 * self.damping * velocity.norm2().values
        return Field(state.window, values)

    def flux(self, state: Field, rate: Field) -> Field:
        u, parts = state.values, []
        for j in range(self.dim):
            s_up, _ = self._signs(j)
            up = shift(state, j, 1).values
            outgoing = _bond_slope(u, up, s_up, self.mu) * rate.values
            if self.split == "site":
                parts.append(-outgoing)
            else:
                incoming = _bond_slope(up, u, s_up, self.mu) * shift(rate, j, 1).values
                parts.append(0.5 * (incoming - outgoing))
        return Field(state.window, np.concatenate(parts, axis=-1))

    def modulus(self, energy_level: float) -> float:
        if self.split != "site":
            raise ArgumentError(
                "f^2 <= beta d has no pointwise constant for the half split; use split='site'"
            )
        return 2 * self.dim * self.mu * energy_level

    def stiffness(self) -> float:
        k = 4 * self.dim * self.mu + 2.0
        if self.damped:
            return max(1 / self.damping, math.sqrt(k / self.damping))
        return k

    def known_equilibria(self, window: LatticeWindow) -> List[Equilibrium]:
        if window != self.window:
            raise ArgumentError("spin glass equilibria live on the model window")
        parity = window.coordinates().sum(axis=-1) % 2
        candidates = [
            Field.zeros(window),
            Field.constant(window, 1.0),
            Field.constant(window, -1.0),
            Field(window, np.where(parity == 0, 1.0, -1.0)),
        ]
        return _exact_equilibria(self, candidates)


@dataclass(frozen=True, eq=False)
class DcglModel(EdsModel):
    """
    Discrete complex Ginzburg-Landau equation on width-2 (re, im) fields.

    In the ``rotating`` frame the state is v with v_t = (1 + i lambda)(Lap v + v - |v|^2 v).
    The ``lab`` frame integrates the original u_t = (1 + i lambda)(Lap u - |u|^2 u) + u,
    related by v = u exp(i lambda t); e, d and f are gauge invariant and
    are evaluated with the rotating-frame rate u_t + i lambda u.
    """

    dim: int = 1
    cgl_lambda: float = 0.5
    frame: Literal["rotating", "lab"] = "rotating"
    width: int = 2
    damping: float = 0.0

    def __post_init__(self):
        if self.cgl_lambda <= 0:
            raise ArgumentError(f"cgl_lambda must be positive, got {self.cgl_lambda}")
        if self.frame not in ("rotating", "lab"):
            raise ArgumentError(f"unknown frame {self.frame!r}")

    def _twist(self, w: np.ndarray) -> np.ndarray:
        lam = self.cgl_lambda
        re, im = w[..., 0:1], w[..., 1:2]
        return np.concatenate([re - lam * im, im + lam * re], axis=-1)

    def force(self, state: Field) -> Field:
        v = state.values
        cubic = np.sum(v * v, axis=-1, keepdims=True) * v
        if self.frame == "rotating":
            return state.with_values(self._twist(laplacian(state).values + v - cubic))
        return state.with_values(self._twist(laplacian(state).values - cubic) + v)

    def rate(self, state: Field, velocity: Optional[Field] = None) -> Field:
        du = self.force(state)
        if self.frame == "rotating":
            return du
        lam, u = self.cgl_lambda, state.values
        return du + np.concatenate([-lam * u[..., 1:2], lam * u[..., 0:1]], axis=-1)

    def energy_density(self, state: Field, velocity: Optional[Field] = None) -> Field:
        v = state.values
        gap = 1 - np.sum(v * v, axis=-1, keepdims=True)
        values = 0.25 * gap * gap
        for j in range(self.dim):
            values = values + 0.5 * diff(state, j).norm2().values
        return Field(state.window, values)

    def dissipation(self, state: Field, rate: Field) -> Field:
        return rate.norm2() / (1 + self.cgl_lambda ** 2)

    def flux(self, state: Field, rate: Field) -> Field:
        return _site_flux(state, rate)

    def modulus(self, energy_level: float) -> float:
        return 2 * self.dim * (1 + self.cgl_lambda ** 2) * energy_level

    def stiffness(self) -> float:
        return math.sqrt(1 + self.cgl_lambda ** 2) * (4 * self.dim + 3)

    def known_equilibria(self, window: LatticeWindow) -> List[Equilibrium]:
        if self.frame == "lab":
            return [(Field.zeros(window, 2), None)]
        return [
            (Field.constant(window, value, 2), None)
            for value in ((0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (-1.0, 0.0))
        ]
