"""
Windowed energy ledger along trajectories and the closed-form bounds it is
checked against: flux bounds, the flux-dissipation chain, relaxation times
and the set J_T of radii whose energy did not decrease.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import brentq

from .eds import EdsModel
from .exceptions import (
    ArgumentError,
    DomainError,
    InapplicableBound,
    LattedsError,
    UnboundedRelaxation,
)
from .integrator import Trajectory
from .lattice import Field, cube_mask, normal_field, omega
from .models import BoundedEdsInfo, BoundReport, CubeSpec, JtReport, LatticeWindow, RelaxationBound

logger = logging.getLogger(__name__)

DEAD_BAND = 1e-9
SLACK = 1e-9


@dataclass(frozen=True)
class DiagnosticsLedger:
    """
    Per-radius time series of the integral energy balance.

    Arrays are indexed ``[sample, radius]`` in the order of ``radii``.

    Attributes:
        dim (int): Lattice dimension.
        radii (Tuple[int, ...]): Cube radii, increasing.
        times (np.ndarray): Sample times.
        energy (np.ndarray): E(R, t), the energy in C*(R).
        dissipation (np.ndarray): D(R, t), cumulative dissipation in C*(R).
        flux (np.ndarray): F(R, t), cumulative flux through the boundary of C*(R).
        max_dissipation (np.ndarray): max of d over C*(R) at each sample.
        e_sup (np.ndarray): ||e||_inf over the window at each sample.
        beta (float): Model modulus at the largest ``e_sup``; ``nan`` when the
            model has no pointwise modulus.
        warnings (Tuple[str, ...]): Problems noticed while accumulating.
    """

    dim: int
    radii: Tuple[int, ...]
    times: np.ndarray
    energy: np.ndarray
    dissipation: np.ndarray
    flux: np.ndarray
    max_dissipation: np.ndarray
    e_sup: np.ndarray
    beta: float
    warnings: Tuple[str, ...] = ()

    @property
    def e0(self) -> float:
        return float(self.e_sup[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def consecutive_radii(self) -> bool:
        """Whether the radii are exactly 1, 2, ..., R_max."""
        return list(self.radii) == list(range(1, len(self.radii) + 1))

    @property
    def residual(self) -> np.ndarray:
        """|F - (E(T) - E(0) + D)| per sample and radius."""
        return np.abs(self.flux - (self.energy - self.energy[0] + self.dissipation))

    def column(self, R: int) -> int:
        try:
            return self.radii.index(R)
        except ValueError:
            raise ArgumentError(f"radius {R} is not in the ledger radii {list(self.radii)}")

    def sample_index(self, T: Optional[float] = None) -> int:
        """Index of the sample at time ``T``; the last sample when ``T`` is None."""
        if T is None:
            return len(self.times) - 1
        k = int(np.argmin(np.abs(self.times - T)))
        spacing = np.diff(self.times).min() if len(self.times) > 1 else 0.0
        if abs(self.times[k] - T) > 0.5 * spacing + 1e-12:
            raise ArgumentError(f"no sample at t={T}")
        return k

    def bounded_info(self) -> BoundedEdsInfo:
        if not self.beta > 0:
            raise ArgumentError(f"no positive flux-dissipation constant for this run (beta={self.beta})")
        return BoundedEdsInfo(beta=self.beta, e0=self.e0)

    def time_fraction(self, R: int, eps: float) -> float:
        """Fraction of samples with max d over C*(R) below ``eps`` (or exactly 0)."""
        d = self.max_dissipation[:, self.column(R)]
        near = (d < eps) | (d == 0)
        return float(near.mean())

    def relaxation_time(self, R: int, eps: float) -> Optional[float]:
        """First sample time with d < eps on all of C*(R), or None."""
        d = self.max_dissipation[:, self.column(R)]
        inside = np.flatnonzero(d < eps)
        return float(self.times[inside[0]]) if inside.size else None

    def rows(self) -> Iterator[Tuple[float, int, float, float, float, float]]:
        """Rows ``(t, R, E, D_cum, F_cum, residual)`` in sample-major order."""
        residual = self.residual
        for k, t in enumerate(self.times):
            for i, R in enumerate(self.radii):
                yield (
                    float(t), R, float(self.energy[k, i]), float(self.dissipation[k, i]),
                    float(self.flux[k, i]), float(residual[k, i]),
                )


class LedgerAccumulator:
    """
    Observer that builds a :class:`DiagnosticsLedger` sample by sample.

    Pass an instance to :func:`latteds.integrator.run` through ``observers``
    and call :meth:`finish` after the run.
    """

    def __init__(self, model: EdsModel, window: LatticeWindow, radii: Sequence[int]):
        radii = sorted(set(int(r) for r in radii))
        if not radii:
            raise ArgumentError("at least one radius is needed")
        for R in radii:
            if R < 1:
                raise ArgumentError(f"radius must be positive, got {R}")
            if R > window.max_radius:
                raise DomainError(
                    f"radius {R} exceeds window radius minus buffer ({window.max_radius})"
                )
        self.model = model
        self.window = window
        self.radii = tuple(radii)
        self._masks = [cube_mask(window, CubeSpec(radius=R)) for R in radii]
        self._normals = [normal_field(window, R, "Cstar") for R in radii]
        self._times: List[float] = []
        self._energy: List[np.ndarray] = []
        self._dissipation: List[np.ndarray] = []
        self._flux: List[np.ndarray] = []
        self._max_d: List[np.ndarray] = []
        self._e_sup: List[float] = []
        self._previous: Optional[Tuple[np.ndarray, np.ndarray]] = None

    def __call__(self, t: float, state: Field, velocity: Optional[Field] = None) -> None:
        triple = self.model.triple(state, velocity)
        e, d, f = triple.e.values[..., 0], triple.d.values[..., 0], triple.f.values
        energy = np.array([e[m].sum() for m in self._masks])
        d_sum = np.array([d[m].sum() for m in self._masks])
        crossing = np.array([(f * n).sum() for n in self._normals])
        max_d = np.array([d[m].max() for m in self._masks])
        if self._previous is None:
            cum_d, cum_f = np.zeros(len(self.radii)), np.zeros(len(self.radii))
        else:
            dt = t - self._times[-1]
            prev_d, prev_f = self._previous
            cum_d = self._dissipation[-1] + 0.5 * dt * (prev_d + d_sum)
            cum_f = self._flux[-1] + 0.5 * dt * (prev_f + crossing)
        self._previous = d_sum, crossing
        self._times.append(float(t))
        self._energy.append(energy)
        self._dissipation.append(cum_d)
        self._flux.append(cum_f)
        self._max_d.append(max_d)
        self._e_sup.append(triple.e_sup)

    def finish(self) -> DiagnosticsLedger:
        if not self._times:
            raise ArgumentError("no samples were accumulated")
        warnings = []
        times = np.array(self._times)
        if len(times) > 1:
            spacing = float(np.diff(times).max())
            span = float(times[-1] - times[0])
            if spacing > span / 10:
                message = f"sparse sampling: spacing {spacing:g} exceeds t_end/10 = {span / 10:g}"
                logger.warning(message)
                warnings.append(message)
        e_sup = np.array(self._e_sup)
        try:
            beta = float(self.model.modulus(float(e_sup.max())))
        except LattedsError as error:
            logger.info("no flux-dissipation constant: %s", error.detail)
            beta = math.nan
        return DiagnosticsLedger(
            dim=self.window.dim,
            radii=self.radii,
            times=times,
            energy=np.array(self._energy),
            dissipation=np.array(self._dissipation),
            flux=np.array(self._flux),
            max_dissipation=np.array(self._max_d),
            e_sup=e_sup,
            beta=beta,
            warnings=tuple(warnings),
        )


def accumulate(trajectory: Trajectory, radii: Sequence[int]) -> DiagnosticsLedger:
    """
    Build the ledger of a stored trajectory.

    Args:
        trajectory (Trajectory): A sampled orbit.
        radii (Sequence[int]): Cube radii, each at most W - buffer.

    Returns:
        DiagnosticsLedger: E, D, F and residuals per radius.

    Raises:
        DomainError: If a radius does not fit the window.
    """
    window = trajectory.states[0].window
    accumulator = LedgerAccumulator(trajectory.model, window, radii)
    for t, u, v in zip(trajectory.times, trajectory.states, trajectory.velocities):
        accumulator(t, u, v)
    return accumulator.finish()


def _check_positive(**values: float) -> None:
    for name, value in values.items():
        if not value > 0:
            raise ArgumentError(f"{name} must be positive, got {value}")


def _general_flux_bound(N: int, R: int, T: float, beta: float, e0: float) -> float:
    w = omega(N)
    linear = (N - 1) * (1 + 1 / R) ** (N - 2) * w * R ** (N - 2) * beta * T
    return linear + 2 ** N * math.sqrt(w * N) * R ** (N - 1) * math.sqrt(e0 * beta * T)


def flux_bound(N: int, R: int, T: float, beta: float, e0: float, general: bool = False) -> float:
    """
    Closed-form upper bound on the cumulative flux F(R, T).

    Args:
        N (int): Dimension.
        R (int): Cube radius.
        T (float): Time horizon.
        beta (float): Flux-dissipation constant.
        e0 (float): ||e||_inf of the initial state.
        general (bool): Use the form valid for every N >= 2 even when N = 2.

    Returns:
        float: 2 sqrt(beta e0 T) for N = 1; the logarithmic bound for N = 2;
        the general bound otherwise.

    Raises:
        ArgumentError: If beta, e0 or T is not positive.
        InapplicableBound: For the N = 2 form when 64 R^2 e0 > omega_2 beta T.
    """
    _check_positive(beta=beta, e0=e0, T=T)
    if N < 1 or R < 1:
        raise ArgumentError(f"need N >= 1 and R >= 1, got N={N}, R={R}")
    if N == 1:
        return 2 * math.sqrt(beta * e0 * T)
    if N == 2 and not general:
        w = omega(2)
        if 64 * R ** 2 * e0 > w * beta * T:
            raise InapplicableBound(
                f"N=2 flux bound needs 64 R^2 e0 <= omega_2 beta T (R={R}, e0={e0:g}, beta={beta:g}, T={T:g})"
            )
        log = math.log(w * beta * T / (64 * e0 * R ** 2))
        return math.inf if log == 0 else 12 * w * beta * T / log
    return _general_flux_bound(N, R, T, beta, e0)


def _flux_kind(N: int) -> str:
    return f"flux-N{min(N, 3)}"


def best_flux_bound(N: int, R: int, T: float, beta: float, e0: float) -> Tuple[float, str]:
    """Smallest applicable flux bound and a note naming the form used."""
    if N != 2:
        return flux_bound(N, R, T, beta, e0), ""
    general = flux_bound(2, R, T, beta, e0, general=True)
    try:
        logarithmic = flux_bound(2, R, T, beta, e0)
    except InapplicableBound:
        return general, "general form (logarithmic form inapplicable)"
    if logarithmic <= general:
        return logarithmic, "logarithmic form"
    return general, "general form"


def check_flux_bounds(ledger: DiagnosticsLedger, T: Optional[float] = None) -> List[BoundReport]:
    """
    Compare F(R, T) with the flux bound for every ledger radius.

    The allowance for time quadrature is the balance residual at (R, T)
    plus a small absolute term.

    Args:
        ledger (DiagnosticsLedger): Accumulated run.
        T (float | None): Sample time, the last sample by default.

    Returns:
        List[BoundReport]: One report per radius; skipped when beta is unavailable.
    """
    k = ledger.sample_index(T)
    t = float(ledger.times[k])
    kind = _flux_kind(ledger.dim)
    reports = []
    for i, R in enumerate(ledger.radii):
        observed = float(ledger.flux[k, i])
        common = dict(kind=kind, N=ledger.dim, R=R, T=t, e0=ledger.e0, observed=observed)
        if not (ledger.beta > 0 and ledger.e0 > 0 and t > 0):
            reports.append(BoundReport(
                beta=None if math.isnan(ledger.beta) else ledger.beta,
                note="skipped: needs beta > 0, e0 > 0 and T > 0", **common,
            ))
            continue
        bound, note = best_flux_bound(ledger.dim, R, t, ledger.beta, ledger.e0)
        slack = float(ledger.residual[k, i]) + SLACK * max(1.0, abs(observed))
        reports.append(BoundReport(
            beta=ledger.beta, bound=bound, slack=slack,
            satisfied=observed <= bound + slack, note=note, **common,
        ))
    return reports


def dissipation_chain_gap(ledger: DiagnosticsLedger, T: Optional[float] = None) -> Dict[int, float]:
    """
    D(R,T) - (1 / (omega_N beta T)) sum_{r<R} F(r,T)^2 / r^{N-1}.

    Only radii R whose predecessors 1..R-1 are all in the ledger are reported;
    a nonnegative gap (up to quadrature slack) confirms the chain.
    """
    k = ledger.sample_index(T)
    t = float(ledger.times[k])
    _check_positive(beta=ledger.beta, T=t)
    scale = 1 / (omega(ledger.dim) * ledger.beta * t)
    gaps, running, expected = {}, 0.0, 1
    for i, R in enumerate(ledger.radii):
        if R != expected:
            break
        gaps[R] = float(ledger.dissipation[k, i]) - scale * running
        running += float(ledger.flux[k, i]) ** 2 / R ** (ledger.dim - 1)
        expected += 1
    if not gaps:
        raise ArgumentError("the chain needs consecutive ledger radii starting at 1")
    return gaps


def dissipation_corollary_ratio(ledger: DiagnosticsLedger, R: int, t_min: float = 0.0) -> np.ndarray:
    """D(R,t) / sqrt(t) / sqrt(beta e0) at every sample with t > t_min."""
    _check_positive(beta=ledger.beta, e0=ledger.e0)
    keep = ledger.times > max(t_min, 0.0)
    D = ledger.dissipation[keep, ledger.column(R)]
    return D / np.sqrt(ledger.times[keep]) / math.sqrt(ledger.beta * ledger.e0)


def _quadratic_root(A: float, B: float, C: float) -> float:
    """Largest T with A T - B sqrt(T) - C <= 0."""
    root = (B + math.sqrt(B * B + 4 * A * C)) / (2 * A)
    return root * root


def _simplified_root(A: float, B: float, C: float) -> float:
    return (B / A + math.sqrt(C / A)) ** 2


def _n2_exact(r: int, eps: float, beta: float, e0: float) -> float:
    def excess(log_t: float) -> float:
        T = math.exp(log_t)
        flux, _ = best_flux_bound(2, r, T, beta, e0)
        return flux / T + 4 * e0 * r ** 2 / T - 4 * eps * r ** 2

    lo, hi = -50.0, 1.0
    while excess(lo) <= 0:
        lo -= 50.0
        if lo < -700:
            return 0.0
    while excess(hi) > 0:
        lo, hi = hi, 2 * hi
        if hi > 700:
            return math.inf
    return math.exp(brentq(excess, lo, hi, xtol=1e-12, rtol=1e-12))


def _n2_simplified(r: int, eps: float, beta: float, e0: float) -> float:
    w = omega(2)
    try:
        growth = math.exp(2 * w * beta / (eps * r ** 2))
    except OverflowError:
        return math.inf
    return max(32 * e0 * r ** 2 / (w * beta) * growth, e0 / (2 * eps))


def relaxation_bound(N: int, r: int, eps: float, beta: float, e0: float) -> RelaxationBound:
    """
    Upper bound on the first time t_{eps,r} with d < eps everywhere on C*(r).

    An orbit that stays outside on [0, T] satisfies
    F(r,T) + e0 2^N r^N >= eps 2^N r^N T; combined with the flux bound this
    caps T. ``exact`` solves that inequality, ``simplified`` is the looser
    closed form.

    Args:
        N (int): Dimension.
        r (int): Cube radius.
        eps (float): Dissipation level.
        beta (float): Flux-dissipation constant.
        e0 (float): ||e||_inf of the initial state.

    Returns:
        RelaxationBound: Both bounds.

    Raises:
        ArgumentError: If eps, beta or e0 is not positive.
        UnboundedRelaxation: For N >= 3 when eps does not beat the linear flux growth.
    """
    _check_positive(eps=eps, beta=beta, e0=e0)
    if N < 1 or r < 1:
        raise ArgumentError(f"need N >= 1 and r >= 1, got N={N}, r={r}")
    if N == 1:
        A, B, C = 2 * eps * r, 2 * math.sqrt(beta * e0), 2 * r * e0
        exact, simplified = _quadratic_root(A, B, C), _simplified_root(A, B, C)
    elif N == 2:
        exact, simplified = _n2_exact(r, eps, beta, e0), _n2_simplified(r, eps, beta, e0)
    else:
        w, volume = omega(N), 2 ** N * r ** N
        A = eps * volume - (N - 1) * (1 + 1 / r) ** (N - 2) * w * r ** (N - 2) * beta
        if A <= 0:
            raise UnboundedRelaxation(
                f"eps={eps:g} too small on C*({r}) in N={N}: the orbit need never relax"
            )
        B = 2 ** N * math.sqrt(w * N) * r ** (N - 1) * math.sqrt(e0 * beta)
        C = e0 * volume
        exact = _quadratic_root(A, B, C)
        A_simple = eps * volume - (N - 1) * 2 ** (N - 2) * w * r ** (N - 2) * beta
        simplified = _simplified_root(A_simple, B, C) if A_simple > 0 else math.inf
    return RelaxationBound(N=N, r=r, eps=eps, beta=beta, e0=e0, exact=exact, simplified=simplified)


def relaxation_time(ledger: DiagnosticsLedger, R: int, eps: float) -> Optional[float]:
    return ledger.relaxation_time(R, eps)


def check_relaxation(ledger: DiagnosticsLedger, R: int, eps: float) -> BoundReport:
    """
    Compare the observed entry time into {d < eps on C*(R)} with its bound.

    An orbit that has not entered by the end of the run is consistent with
    the bound only while the run is no longer than the bound.
    """
    common = dict(kind="relaxation", N=ledger.dim, R=R, T=ledger.t_end, e0=ledger.e0, eps=eps)
    if not (ledger.beta > 0 and ledger.e0 > 0):
        return BoundReport(note="skipped: needs beta > 0 and e0 > 0", **common)
    try:
        bound = relaxation_bound(ledger.dim, R, eps, ledger.beta, ledger.e0).exact
    except UnboundedRelaxation as error:
        return BoundReport(beta=ledger.beta, note=error.detail, **common)
    observed = ledger.relaxation_time(R, eps)
    spacing = float(np.diff(ledger.times).max()) if len(ledger.times) > 1 else 0.0
    if observed is None:
        return BoundReport(
            beta=ledger.beta, bound=bound, observed=ledger.t_end,
            satisfied=ledger.t_end <= bound, note="not entered by the end of the run", **common,
        )
    return BoundReport(
        beta=ledger.beta, bound=bound, observed=observed, slack=spacing,
        satisfied=observed <= bound + spacing, **common,
    )


def equilibrium_time_fraction(
    source: Union[Trajectory, DiagnosticsLedger], R: int, eps: float
) -> float:
    """
    Fraction of sampled times at which max d over C*(R) is below ``eps``.

    Args:
        source (Trajectory | DiagnosticsLedger): A run or its ledger.
        R (int): Cube radius, at most W - buffer.
        eps (float): Dissipation level; with 0 only exactly stationary samples count.

    Returns:
        float: A value in [0, 1].
    """
    ledger = accumulate(source, [R]) if isinstance(source, Trajectory) else source
    return ledger.time_fraction(R, eps)


def jt_report(ledger: DiagnosticsLedger, T: Optional[float] = None) -> JtReport:
    """
    Radii R with E(R,T) >= E(R,0), decided with a relative dead-band.

    Args:
        ledger (DiagnosticsLedger): Accumulated run.
        T (float | None): Sample time, the last sample by default.

    Returns:
        JtReport: Members, the first radius of the empty tail and, for N = 2,
        the running sums of 1/r over members.

    Raises:
        ArgumentError: If the ledger radii are not 1, 2, ..., R_max.
    """
    if not ledger.consecutive_radii:
        raise ArgumentError(f"radii must be consecutive from 1, got {list(ledger.radii)}")
    k = ledger.sample_index(T)
    start, end = ledger.energy[0], ledger.energy[k]
    tolerance = DEAD_BAND * np.maximum(1.0, start)
    members = [R for i, R in enumerate(ledger.radii) if end[i] >= start[i] - tolerance[i]]
    if not members:
        r0 = ledger.radii[0]
    else:
        later = [R for R in ledger.radii if R > members[-1]]
        r0 = later[0] if later else None
    partial_sums = []
    if ledger.dim == 2:
        partial_sums = list(np.cumsum([1.0 / R for R in members]))
    stationary = float(ledger.dissipation[k, -1]) == 0.0
    return JtReport(
        T=float(ledger.times[k]), members=members, r0=r0,
        partial_sums=[float(s) for s in partial_sums], stationary=stationary,
    )


def grecurrent_check(radii: Sequence[int], lam: float, eps: float, N: int) -> BoundReport:
    """
    Check sum_{r in J} 1/r^{N-1} <= (1 + lam C) / (lam eps) on a finite set J.

    The sequence is G_0 = eps, G_k = G_{k-1} + lam G_{k-1}^2 / r_{k-1}^{N-1}
    and C = max G_{k-1} / r_{k-1}^{N-1}.
    """
    _check_positive(lam=lam, eps=eps)
    J = sorted(set(int(r) for r in radii))
    if not J or J[0] < 1:
        raise ArgumentError("J must be a nonempty set of positive integers")
    G, C, total = eps, 0.0, 0.0
    for r in J:
        scaled = G / r ** (N - 1)
        C = max(C, scaled)
        total += 1.0 / r ** (N - 1)
        G = G + lam * G * scaled
        if not math.isfinite(G):
            break
    bound = (1 + lam * C) / (lam * eps)
    return BoundReport(
        kind="grecurrent", N=N, R=J[-1], eps=eps, bound=bound, observed=total,
        slack=SLACK * bound, satisfied=total <= bound * (1 + SLACK),
    )
