"""
Experiment orchestration: building models and initial data from a
configuration, running them and writing the run directory.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np

from .coarsening import run_coarsening
from .config import echo_config, get_settings, parse_config_text
from .diagnostics import (
    DiagnosticsLedger,
    LedgerAccumulator,
    accumulate,
    check_flux_bounds,
    check_relaxation,
    jt_report,
)
from .eds import EdsModel
from .exceptions import ArgumentError
from .integrator import Trajectory, run
from .lattice import Field
from .models import BoundReport, CoarseningConfig, RecurrenceParams, RunConfig
from .recurrence import recurrence_rows
from .storage import (
    CONFIG_ECHO,
    SnapshotStore,
    atomic_write,
    write_bounds,
    write_droplets,
    write_energy_flux,
    write_flips,
)
from .systems import (
    DcglModel,
    ElasticInteraction,
    FkModel,
    GeneralizedFkModel,
    MultiRangeModel,
    SpinGlassModel,
)

logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    """
    Everything a run wrote.

    Attributes:
        directory (Path): The run directory.
        ledger (DiagnosticsLedger): Energy balance per radius.
        reports (List[BoundReport]): Flux and relaxation bound checks.
    """

    directory: Path
    ledger: DiagnosticsLedger
    reports: List[BoundReport] = field(default_factory=list)

    @property
    def failed(self) -> List[BoundReport]:
        return [r for r in self.reports if r.satisfied is False]


def output_directory(configured: Optional[str]) -> Path:
    return Path(configured or get_settings().output_dir)


def build_model(config: RunConfig) -> EdsModel:
    """
    The lattice system described by ``config.model``.

    Random spin-glass bonds use ``model.seed``, falling back to the run seed.
    """
    m = config.model
    if m.kind == "fk":
        return FkModel(dim=m.dim, damping=m.damping, K=m.K, width=m.width)
    if m.kind == "genfk":
        interaction = ElasticInteraction(kappa=m.kappa, amplitude=m.K)
        return GeneralizedFkModel(interaction=interaction, width=m.width, modulus_source=m.modulus)
    if m.kind == "multirange":
        interaction = ElasticInteraction(kappa=m.kappa, amplitude=m.K)
        return MultiRangeModel.uniform(m.distances, interaction, modulus_source=m.modulus)
    if m.kind == "spinglass":
        seed = config.seed if m.seed is None else m.seed
        return SpinGlassModel.build(
            config.lattice, m.bonds, seed, mu=m.mu, damping=m.damping, split=m.split
        )
    if m.kind == "dcgl":
        return DcglModel(dim=m.dim, cgl_lambda=m.cgl_lambda, frame=m.frame)
    raise ArgumentError(f"unknown model kind {m.kind!r}")


def _kink(config: RunConfig, model: EdsModel) -> Field:
    window = config.lattice
    step = (window.coordinates()[..., 0:1] >= 0).astype(float)
    if config.model.kind == "spinglass":
        return Field(window, 2 * step - 1)
    if config.model.kind == "dcgl":
        return Field(window, np.concatenate([2 * step - 1, np.zeros_like(step)], axis=-1))
    return Field(window, np.repeat(step, model.width, axis=-1))


def build_initial(config: RunConfig, model: EdsModel) -> Tuple[Field, Optional[Field]]:
    """
    Initial positions (and velocities, when the model is damped).

    ``random`` draws every component uniformly from [-amplitude, amplitude]
    with ``config.seed``; ``stationary`` is the first known equilibrium;
    ``kink`` steps between two minima across alpha_0 = 0.
    """
    kind = config.initial.kind
    window = config.lattice
    if kind == "stationary":
        equilibria = model.known_equilibria(window)
        if not equilibria:
            raise ArgumentError(f"{type(model).__name__} has no known equilibrium")
        return equilibria[0]
    if kind == "random":
        rng = np.random.default_rng(config.seed)
        state = Field.random_uniform(window, rng, config.initial.amplitude, model.width)
    elif kind == "kink":
        state = _kink(config, model)
    else:
        raise ArgumentError(f"unknown initial condition {kind!r}")
    velocity = Field.zeros(window, model.width) if model.damped else None
    return state, velocity


class _SnapshotObserver:
    def __init__(self, store: SnapshotStore, every: int, dt: float):
        self.store = store
        self.every = every
        self.dt = dt
        self.count = 0
        self.last: Optional[Tuple[int, float, Field, Optional[Field]]] = None

    def __call__(self, t: float, state: Field, velocity: Optional[Field]) -> None:
        sample = int(round(t / self.dt))
        if self.count == 0 or (self.every and self.count % self.every == 0):
            self.store.add(sample, t, state, velocity)
        self.last = (sample, t, state, velocity)
        self.count += 1

    def close(self) -> None:
        if self.last is not None:
            self.store.add(*self.last)
        self.store.flush()


def _reports(config: RunConfig, ledger: DiagnosticsLedger) -> List[BoundReport]:
    reports = check_flux_bounds(ledger)
    for R in config.diagnostics.relax_radii:
        for eps in config.diagnostics.eps:
            reports.append(check_relaxation(ledger, R, eps))
    return reports


def _write_results(directory: Path, ledger: DiagnosticsLedger, reports: List[BoundReport]) -> None:
    write_energy_flux(directory / "energy_flux.csv", ledger.rows())
    write_bounds(directory / "bounds.csv", reports)
    if ledger.consecutive_radii:
        jt = jt_report(ledger)
        logger.info(
            "energy did not decrease on radii %s (tail from %s)%s",
            jt.members, jt.r0, ", stationary orbit" if jt.stationary else "",
        )
    else:
        logger.debug("radii %s are not consecutive from 1, no tail report", list(ledger.radii))
    failed = [r for r in reports if r.satisfied is False]
    if failed:
        for report in failed:
            logger.warning(
                "%s bound violated at R=%s: observed %g > %g", report.kind, report.R,
                report.observed, report.bound,
            )
    else:
        logger.info("%d bound checks, none violated", len(reports))


def simulate(config: RunConfig) -> RunResult:
    """
    Integrate the configured system and write the run directory.

    Writes ``config.echo``, ``energy_flux.csv``, ``bounds.csv`` and the
    snapshots selected by ``output.snapshot_every``. Outputs depend only on
    the configuration and its seed.

    Args:
        config (RunConfig): Validated configuration.

    Returns:
        RunResult: The run directory, ledger and bound reports.

    Raises:
        IntegrationBlowUp: If the integration diverges.
    """
    directory = output_directory(config.output.dir)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write(directory / CONFIG_ECHO, echo_config(config))
    model = build_model(config)
    state, velocity = build_initial(config, model)
    radii = sorted(set(config.diagnostics.radii) | set(config.diagnostics.relax_radii))
    ledger_observer = LedgerAccumulator(model, config.lattice, radii)
    snapshots = _SnapshotObserver(
        SnapshotStore(directory), config.output.snapshot_every, config.integrator.dt
    )
    logger.info("simulating %s into %s", config.model.kind, directory)
    run(
        model, state, config.integrator, velocity=velocity,
        observers=[ledger_observer, snapshots], store=False,
    )
    snapshots.close()
    ledger = ledger_observer.finish()
    reports = _reports(config, ledger)
    _write_results(directory, ledger, reports)
    return RunResult(directory=directory, ledger=ledger, reports=reports)


def load_trajectory(directory: Path) -> Tuple[RunConfig, Trajectory]:
    """Rebuild the stored trajectory of a run directory from its echo and snapshots."""
    directory = Path(directory)
    echo = directory / CONFIG_ECHO
    if not echo.exists():
        raise ArgumentError(f"{directory} has no {CONFIG_ECHO}")
    config = parse_config_text(echo.read_text(encoding="utf-8"))
    model = build_model(config)
    times, states, velocities = SnapshotStore(directory).load()
    window = config.lattice

    def rewindow(f: Optional[Field]) -> Optional[Field]:
        if f is None:
            return None
        if f.window.model_copy(update={"buffer": window.buffer}) != window:
            raise ArgumentError(f"snapshot window {f.window} does not match the configuration")
        return Field(window, f.values, f.anchor)

    trajectory = Trajectory(
        model=model,
        times=tuple(times),
        states=tuple(rewindow(u) for u in states),
        velocities=tuple(rewindow(v) for v in velocities),
    )
    return config, trajectory


def diagnose(directory: Path, radii: Optional[Sequence[int]] = None) -> RunResult:
    """
    Recompute the ledger of a stored run from its snapshots.

    Results go to ``<directory>/diagnose``; the snapshot schedule sets the
    time resolution of the cumulative integrals.

    Args:
        directory (Path): A directory written by :func:`simulate`.
        radii (Sequence[int] | None): Cube radii, the configured ones by default.

    Returns:
        RunResult: The recomputed ledger and bound reports.
    """
    config, trajectory = load_trajectory(directory)
    radii = list(radii or config.diagnostics.radii)
    ledger = accumulate(trajectory, radii)
    reports = check_flux_bounds(ledger)
    target = Path(directory) / "diagnose"
    _write_results(target, ledger, reports)
    return RunResult(directory=target, ledger=ledger, reports=reports)


def coarsen(config: CoarseningConfig):
    """
    Run the coarsening experiment and write ``droplets.csv``, ``flips.csv``,
    the snapshots and ``config.echo``.

    Returns:
        Tuple[Path, DropletStats]: The run directory and the statistics.
    """
    directory = output_directory(config.output_dir)
    directory.mkdir(parents=True, exist_ok=True)
    atomic_write(directory / CONFIG_ECHO, echo_config(config))
    trajectory, stats = run_coarsening(config)
    store = SnapshotStore(directory)
    for t, x, y in zip(trajectory.times, trajectory.states, trajectory.velocities):
        store.add(int(round(t / config.dt)), t, x, y)
    store.flush()
    write_droplets(directory / "droplets.csv", stats.snapshots)
    write_flips(directory / "flips.csv", trajectory.states[0].window, stats.flips)
    logger.info(
        "coarsening finished: %.3f of sites flipped, mean droplet grew %.2fx",
        stats.flip_fraction, stats.growth_ratio,
    )
    return directory, stats


def recurrence(
    params: RecurrenceParams,
    r_max: int,
    tol: float = 1e-8,
    method: Literal["bisection", "pullback"] = "bisection",
):
    """Stable manifold rows for r = 1..r_max, logging every violated bound."""
    if r_max < 1:
        raise ArgumentError(f"r_max must be at least 1, got {r_max}")
    rows = recurrence_rows(params, r_max, tol, method)
    for r, g_s, first, second, satisfied in rows:
        if not satisfied:
            logger.warning("recurrence bound violated at r=%d: g_s=%.12g", r, g_s)
    return rows
