"""
Invariant suites behind ``latteds verify``.

Each suite returns one :class:`CheckResult` per check and logs it. The
suites run at full experiment scale; the pytest suite covers the same
ground on small windows.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from scipy import ndimage

from .coarsening import (
    ORDERING_TOLERANCE,
    coarsening_model,
    droplet_stats,
    reflect,
    run_coarsening,
    run_ensemble,
    sample_initial,
    to_pm_frame,
    translate,
    verify_ordering,
)
from .config import get_settings
from .diagnostics import (
    DiagnosticsLedger,
    LedgerAccumulator,
    check_flux_bounds,
    check_relaxation,
    dissipation_chain_gap,
    dissipation_corollary_ratio,
    grecurrent_check,
    jt_report,
)
from .eds import EdsModel, a5_tolerance, check_a3, check_a5, local_balance_residual
from .exceptions import ArgumentError, LattedsError, OrderingViolation
from .integrator import run
from .lattice import (
    Field,
    boundary_mask,
    boundary_measure,
    cube_mask,
    cube_volume,
    div,
    grad,
    laplacian,
    omega,
    product_rule_sides,
    shell_size,
    stokes_sum,
)
from .models import CheckResult, CoarseningConfig, CubeSpec, IntegratorSpec, LatticeWindow, RecurrenceParams
from .recurrence import (
    check_ricatti_bounds,
    differential_H,
    fixed_point_differential,
    manifold_by_pullback,
    stable_manifold,
)
from .systems import (
    DcglModel,
    ElasticInteraction,
    FkModel,
    GeneralizedFkModel,
    MultiRangeModel,
    SpinGlassModel,
    select_flux_variant,
)

logger = logging.getLogger(__name__)

FIELDS_PER_CASE = 100


def _result(suite: str, name: str, passed: bool, detail: str = "") -> CheckResult:
    result = CheckResult(suite=suite, name=name, passed=bool(passed), detail=detail)
    if passed:
        logger.info("PASS %s/%s %s", suite, name, detail)
    else:
        logger.warning("FAIL %s/%s %s", suite, name, detail)
    return result


def _guarded(suite: str, name: str, check: Callable[[], CheckResult]) -> CheckResult:
    """Run one check; a library error fails the check instead of the suite."""
    try:
        return check()
    except LattedsError as error:
        return _result(suite, name, False, f"{type(error).__name__}: {error.detail}")


def _map(function, items):
    with ThreadPoolExecutor(max_workers=get_settings().threads) as pool:
        return list(pool.map(function, items))


# calculus


def _calculus_case(N: int, r: int, rng: np.random.Generator) -> Dict[str, bool]:
    window = LatticeWindow(dim=N, radius=r + 1)
    ok = {"stokes": True, "partial_integration": True, "laplacian": True}
    for _ in range(FIELDS_PER_CASE):
        v = Field.random_integers(window, rng, width=N)
        ok["stokes"] &= all(
            a == b for a, b in (stokes_sum(v, r, "Cstar"), stokes_sum(v, r, "C"))
        )
        u = Field.random_integers(window, rng)
        w = Field.random_integers(window, rng)
        for axis in range(N):
            for lhs, rhs in product_rule_sides(u, w, axis).values():
                ok["partial_integration"] &= np.array_equal(lhs.values, rhs.values)
        lap = laplacian(u).values
        ok["laplacian"] &= np.array_equal(lap, div(grad(u, "forward"), "backward").values)
        ok["laplacian"] &= np.array_equal(lap, div(grad(u, "backward"), "forward").values)
    return ok


def _counts(N: int, r: int) -> bool:
    window = LatticeWindow(dim=N, radius=r + 1)
    inside = int(cube_mask(window, CubeSpec(radius=r)).sum())
    crossings = boundary_measure(window, r)
    return (
        inside == cube_volume(N, r) == 2 ** N * r ** N
        and crossings == 2 ** N * N * r ** (N - 1)
        and math.isclose(crossings * math.sqrt(N), omega(N) * r ** (N - 1))
        and int(boundary_mask(window, r).sum()) == shell_size(N, r)
    )


def calculus_suite() -> List[CheckResult]:
    """Stokes, partial integration and laplacian identities on random integer fields, and cube counts."""
    rng = np.random.default_rng(0)
    results = []
    for N in (1, 2, 3):
        totals = {"stokes": True, "partial_integration": True, "laplacian": True}
        counts = True
        for r in range(1, 7):
            case = _calculus_case(N, r, rng)
            for key in totals:
                totals[key] &= case[key]
            counts &= _counts(N, r)
        detail = f"N={N}, r=1..6, {FIELDS_PER_CASE} fields each"
        for key, passed in totals.items():
            results.append(_result("calculus", f"{key} N={N}", passed, detail))
        results.append(_result("calculus", f"counts N={N}", counts, "r=1..6"))
    return results


# balance


def _fk_ledger(
    dim: int,
    radius: int,
    t_end: float,
    dt: float,
    seed: int,
    radii: Sequence[int],
    sample_every: int = 1,
    amplitude: float = 0.2,
) -> DiagnosticsLedger:
    window = LatticeWindow(dim=dim, radius=radius)
    model = FkModel(dim=dim)
    state = Field.random_uniform(window, np.random.default_rng(seed), amplitude)
    accumulator = LedgerAccumulator(model, window, radii)
    spec = IntegratorSpec(dt=dt, t_end=t_end, sample_every=sample_every)
    run(model, state, spec, observers=[accumulator], store=False)
    return accumulator.finish()


def _relative_residual(ledger: DiagnosticsLedger) -> float:
    return float((ledger.residual / np.maximum(1.0, ledger.dissipation)).max())


def _balance_models() -> Dict[str, tuple]:
    rng = np.random.default_rng(3)
    flat = LatticeWindow(dim=1, radius=12)
    square = LatticeWindow(dim=2, radius=6)
    elastic = ElasticInteraction(kappa=1.0, shift=0.3, amplitude=0.1)
    glass = dict(mu=0.7, damping=0.2)
    models = {
        "fk damped N=2 M=2": (FkModel(dim=2, damping=0.5, width=2), square),
        "genfk M=2": (GeneralizedFkModel(interaction=elastic, width=2), flat),
        "multirange 1,2,3": (MultiRangeModel.uniform([1, 2, 3], elastic), flat),
        "spinglass half": (SpinGlassModel.build(square, "random", 5, split="half", **glass), square),
        "spinglass site": (SpinGlassModel.build(square, "random", 5, split="site", **glass), square),
        "dcgl rotating": (DcglModel(dim=2), square),
        "dcgl lab": (DcglModel(dim=2, frame="lab"), square),
    }
    states = {}
    for name, (model, window) in models.items():
        u = Field.random_uniform(window, rng, 0.8, model.width)
        v = Field.random_uniform(window, rng, 0.3, model.width) if model.damped else None
        states[name] = (model, u, v)
    return states


def _local_balance(name: str, model: EdsModel, u: Field, v: Optional[Field]) -> CheckResult:
    residual = local_balance_residual(model, u, v).max_abs()
    triple = model.triple(u, v)
    scale = max(1.0, triple.d.sup(), div(triple.f).max_abs())
    return _result("balance", f"local balance {name}", residual <= 1e-9 * scale, f"max residual {residual:.3g}")


def _a5_along(name: str, model: EdsModel, state: Field, spec: IntegratorSpec) -> CheckResult:
    trajectory = run(model, state, spec)
    triples = trajectory.triples
    beta = model.modulus(max(t.e_sup for t in triples))
    worst = max(check_a5(t, beta) - a5_tolerance(t) for t in triples)
    return _result("balance", f"flux-dissipation {name}", worst <= 0, f"beta={beta:.4g}, worst excess {worst:.3g}")


def balance_suite() -> List[CheckResult]:
    """Integral and local energy balance, flux-dissipation along orbits and equilibria."""
    results = []
    radii = [4, 8, 16, 32]
    ledgers = _map(lambda seed: _fk_ledger(1, 128, 10.0, 1e-3, seed, radii), range(10))
    worst = max(_relative_residual(ledger) for ledger in ledgers)
    results.append(_result("balance", "integral balance fk N=1", worst <= 1e-6, f"worst relative residual {worst:.3g}"))

    coarse, fine = (_fk_ledger(1, 128, 10.0, dt, 0, radii, amplitude=0.5) for dt in (0.02, 0.01))
    ratio = float(coarse.residual.max() / fine.residual.max())
    results.append(_result("balance", "residual dt-halving", 3.0 <= ratio <= 5.0, f"ratio {ratio:.3f}"))

    for name, (model, u, v) in _balance_models().items():
        results.append(_guarded("balance", f"local balance {name}", lambda: _local_balance(name, model, u, v)))

    spec = IntegratorSpec(dt=0.01, t_end=5.0, sample_every=10)
    window = LatticeWindow(dim=1, radius=64)
    rng = np.random.default_rng(11)
    results.append(_a5_along("fk", FkModel(), Field.random_uniform(window, rng, 0.4), spec))
    glass = SpinGlassModel.build(window, "random", 11, split="site")
    results.append(_a5_along("spinglass site", glass, Field.random_uniform(window, rng, 1.0), spec))

    for name, (model, u, _) in _balance_models().items():
        outcome = check_a3(model, u.window)
        worst = max((max(d, rhs) for d, rhs in outcome), default=0.0)
        results.append(_result("balance", f"equilibria {name}", worst == 0.0, f"{len(outcome)} equilibria"))

    variant, residuals = select_flux_variant(
        MultiRangeModel.uniform([1, 2, 3], ElasticInteraction(kappa=1.0, amplitude=0.1)),
        Field.random_uniform(LatticeWindow(dim=1, radius=16), rng, 0.8),
    )
    results.append(_result("balance", "multirange flux variant", variant == "crossing", str(residuals)))
    return results


# bounds


def _bound_failures(reports) -> int:
    return sum(1 for report in reports if report.satisfied is False)


def _flux_checks(results: List[CheckResult]) -> None:
    for T in (10.0, 100.0):
        ledgers = _map(
            lambda seed: _fk_ledger(1, 128, T, 0.01, seed, [4, 8, 16, 32], sample_every=1),
            range(50),
        )
        reports = [rep for ledger in ledgers for rep in check_flux_bounds(ledger)]
        results.append(_result("bounds", f"flux N=1 T={T:g}", _bound_failures(reports) == 0, f"{len(reports)} checks"))
    for dim, radius, radii in ((2, 32, [2, 4, 8, 16]), (3, 16, [2, 4, 8])):
        ledgers = _map(lambda seed: _fk_ledger(dim, radius, 20.0, 0.01, seed, radii), range(3))
        reports = [rep for ledger in ledgers for rep in check_flux_bounds(ledger)]
        results.append(_result("bounds", f"flux N={dim} T=20", _bound_failures(reports) == 0, f"{len(reports)} checks"))


def _finite_check(results: List[CheckResult]) -> None:
    radii = list(range(1, 97))
    ledgers = _map(lambda seed: _fk_ledger(1, 192, 10.0, 0.01, seed, radii, sample_every=10), range(10))
    failures = []
    for seed, ledger in enumerate(ledgers):
        if ledger.dissipation[-1, -1] <= 1e-6:
            continue
        jt = jt_report(ledger)
        if jt.r0 is None or jt.r0 > 96:
            failures.append(seed)
    results.append(_result("bounds", "energy decreases on a tail", not failures, f"failing seeds {failures}"))


def _corollary_check(results: List[CheckResult]) -> None:
    ledgers = _map(lambda seed: _fk_ledger(1, 128, 500.0, 0.01, seed, [8], sample_every=10), range(5))
    worst = 0.0
    for ledger in ledgers:
        ratios = dissipation_corollary_ratio(ledger, 8)
        for T in (10.0, 50.0, 100.0, 500.0):
            k = ledger.sample_index(T) - 1
            worst = max(worst, float(ratios[k]))
    results.append(_result("bounds", "dissipation grows like sqrt(T)", worst <= 10.0, f"max D/sqrt(T beta e0) {worst:.3g}"))


def _relaxation_check(results: List[CheckResult]) -> None:
    ledgers = _map(lambda seed: _fk_ledger(1, 64, 50.0, 0.01, seed, [2, 4, 8], sample_every=10), range(10))
    reports = [
        check_relaxation(ledger, r, eps)
        for ledger in ledgers for r in (2, 4, 8) for eps in (1e-2, 1e-3)
    ]
    results.append(_result("bounds", "relaxation time", _bound_failures(reports) == 0, f"{len(reports)} checks"))


def _chain_check(results: List[CheckResult]) -> None:
    ledger = _fk_ledger(1, 64, 10.0, 0.01, 2, range(1, 9))
    gaps = dissipation_chain_gap(ledger)
    worst = min(gaps.values())
    slack = float(ledger.residual[-1].max()) + 1e-9
    results.append(_result("bounds", "flux-dissipation chain", worst >= -slack, f"smallest gap {worst:.3g}"))


def _recurrent_set_check(results: List[CheckResult]) -> None:
    rng = np.random.default_rng(5)
    reports = []
    for N in (1, 2, 3):
        for _ in range(20):
            J = rng.choice(np.arange(1, 200), size=int(rng.integers(1, 40)), replace=False)
            reports.append(grecurrent_check(J, float(rng.uniform(0.1, 4)), float(rng.uniform(0.01, 1)), N))
    results.append(_result("bounds", "finite recurrent sets", _bound_failures(reports) == 0, f"{len(reports)} sets"))


def _order_check(results: List[CheckResult]) -> None:
    window = LatticeWindow(dim=1, radius=32)
    spec = IntegratorSpec(dt=0.01, t_end=5.0, sample_every=5)
    rng = np.random.default_rng(13)
    worst = 0.0
    ordered = True
    for _ in range(20):
        lower = Field.random_uniform(window, rng, 1.0)
        upper = lower + Field(window, rng.uniform(0.0, 0.3, size=window.shape + (1,)))
        outcome = verify_ordering(FkModel(), lower, upper, spec)
        ordered &= bool(outcome)
        worst = max(worst, outcome.amount)
    results.append(_result("bounds", "order preservation fk", ordered, f"largest violation {worst:.3g}"))


def bounds_suite() -> List[CheckResult]:
    """Flux, chain, relaxation and tail-decrease bounds on FK ensembles, plus order preservation."""
    results: List[CheckResult] = []
    for check in (_flux_checks, _finite_check, _corollary_check, _relaxation_check,
                  _chain_check, _recurrent_set_check, _order_check):
        try:
            check(results)
        except LattedsError as error:
            results.append(_result("bounds", check.__name__.strip("_"), False, error.detail))
    return results


# recurrence


def recurrence_suite() -> List[CheckResult]:
    """Stable manifold heights against their closed forms and bounds."""
    results = []
    worst = 0.0
    for lam, eps in ((1.0, 1.0), (4.0, 1.0), (1.0, 4.0)):
        params = RecurrenceParams(dim=1, lambda_rec=lam, eps_rec=eps)
        for r in (1, 5, 20):
            sample = stable_manifold(r, params, tol=1e-10)
            worst = max(worst, abs(sample.g_s - params.saddle))
    results.append(_result("recurrence", "N=1 manifold is the saddle", worst <= 1e-8, f"max error {worst:.3g}"))

    failures, not_monotone, checked = 0, [], 0
    for N in (2, 3, 4):
        for lam in (0.25, 1.0, 4.0):
            for eps in (1e-4, 1e-2, 1.0):
                params = RecurrenceParams(dim=N, lambda_rec=lam, eps_rec=eps)
                reports = check_ricatti_bounds(params, range(1, 33), method="pullback")
                failures += _bound_failures(reports)
                checked += sum(1 for rep in reports if rep.satisfied is not None)
                heights = manifold_by_pullback(params, range(1, 33))
                values = [heights[r] for r in range(1, 33)]
                if any(b > a * (1 + 1e-12) for a, b in zip(values, values[1:])):
                    not_monotone.append((N, lam, eps))
    results.append(_result("recurrence", "manifold bounds grid", failures == 0, f"{checked} checks, {failures} failed"))
    results.append(_result("recurrence", "manifold decreasing", not not_monotone, f"non-monotone {not_monotone}"))

    worst = 0.0
    for N, lam, eps in ((2, 1.0, 1e-2), (3, 0.25, 1.0), (2, 4.0, 1e-4)):
        params = RecurrenceParams(dim=N, lambda_rec=lam, eps_rec=eps)
        pulled = manifold_by_pullback(params, [1, 8, 32])
        for r, g in pulled.items():
            bisected = stable_manifold(r, params, tol=1e-10).g_s
            worst = max(worst, abs(bisected - g) / max(1.0, g))
    results.append(_result("recurrence", "bisection agrees with pullback", worst <= 1e-6, f"max relative gap {worst:.3g}"))

    worst = 0.0
    for N in (1, 2, 3):
        params = RecurrenceParams(dim=N, lambda_rec=1.0, eps_rec=0.5)
        for sign in (1, -1):
            numeric = differential_H(1.0, sign * params.saddle, params)
            worst = max(worst, float(np.abs(numeric - fixed_point_differential(params, sign)).max()))
    results.append(_result("recurrence", "fixed point differentials", worst <= 1e-5, f"max deviation {worst:.3g}"))
    return results


# coarsen


def _scipy_count(labels: np.ndarray) -> int:
    """Components of each phase by ``ndimage.label``, merged across the periodic seams."""
    total = 0
    for value in (0, 1):
        components, n = ndimage.label(labels == value)
        parent = list(range(n + 1))

        def find(a: int) -> int:
            while parent[a] != a:
                parent[a] = parent[parent[a]]
                a = parent[a]
            return a

        for axis in range(labels.ndim):
            first = np.take(components, 0, axis=axis).ravel()
            last = np.take(components, -1, axis=axis).ravel()
            for a, b in zip(first, last):
                if a and b:
                    parent[find(int(a))] = find(int(b))
        total += len({find(k) for k in range(1, n + 1)})
    return total


def _equivariance(config: CoarseningConfig) -> Dict[str, float]:
    model = coarsening_model(config)
    x, y = to_pm_frame(sample_initial(config))
    spec = IntegratorSpec(dt=config.dt, t_end=5.0, sample_every=int(round(5.0 / config.dt)))
    base = run(model, x, spec, velocity=y).final[0]
    rx, ry = reflect(x, y)
    reflected = run(model, rx, spec, velocity=ry).final[0]
    shifted = run(model, translate(x, 0, 7), spec, velocity=None if y is None else translate(y, 0, 7)).final[0]
    return {
        "reflection": float(np.abs(reflected.values + base.values).max()),
        "translation": float(np.abs(shifted.values - translate(base, 0, 7).values).max()),
    }


def _time_fraction(config: CoarseningConfig) -> float:
    model = coarsening_model(config)
    x, y = to_pm_frame(sample_initial(config))
    window = x.window
    accumulator = LedgerAccumulator(model, window, [8])
    spec = IntegratorSpec(dt=config.dt, t_end=500.0, sample_every=int(round(1.0 / config.dt)))
    run(model, x, spec, velocity=y, observers=[accumulator], store=False)
    return accumulator.finish().time_fraction(8, 1e-4)


def _coarsen_case(results: List[CheckResult], config: CoarseningConfig, growth: float) -> None:
    label = f"N={config.dim}"
    try:
        trajectory, stats = run_coarsening(config)
    except OrderingViolation as error:
        results.append(_result("coarsen", f"ordering cone {label}", False, error.detail))
        return
    results.append(_result(
        "coarsen", f"ordering cone {label}", stats.cone_excess <= ORDERING_TOLERANCE,
        f"max excess {stats.cone_excess:.3g}",
    ))
    results.append(_result(
        "coarsen", f"sites flip {label}", stats.flip_fraction >= 0.3, f"fraction {stats.flip_fraction:.3f}",
    ))
    results.append(_result(
        "coarsen", f"droplets grow {label}", stats.growth_ratio >= growth, f"ratio {stats.growth_ratio:.3f}",
    ))
    labels = (trajectory.states[-1].values[..., 0] > 0).astype(np.int8)
    ours = droplet_stats(labels, trajectory.times[-1]).count
    results.append(_result("coarsen", f"droplet count {label}", ours == _scipy_count(labels), f"{ours} droplets"))
    errors = _equivariance(config)
    for name, error in errors.items():
        results.append(_result("coarsen", f"{name} equivariance {label}", error <= 1e-8, f"max error {error:.3g}"))


def coarsen_suite() -> List[CheckResult]:
    """Bistable coarsening in one and two dimensions."""
    results: List[CheckResult] = []
    cases = (
        (CoarseningConfig(dim=1, radius=256, seed=42), 2.0),
        (CoarseningConfig(dim=2, radius=32, seed=42), 1.5),
    )
    for config, growth in cases:
        try:
            _coarsen_case(results, config, growth)
        except LattedsError as error:
            results.append(_result("coarsen", f"run N={config.dim}", False, error.detail))
    fraction = _time_fraction(CoarseningConfig(dim=1, radius=256, seed=42))
    results.append(_result("coarsen", "time near equilibrium", fraction >= 0.9, f"fraction {fraction:.3f}"))
    ensemble = run_ensemble(CoarseningConfig(dim=1, radius=64, t_end=50.0, seed=0), range(4))
    visited = float(np.mean([stats.visited_both_fraction for stats in ensemble]))
    results.append(_result("coarsen", "ensemble visits both phases", visited > 0, f"mean fraction {visited:.3f}"))
    return results


SUITES: Dict[str, Callable[[], List[CheckResult]]] = {
    "calculus": calculus_suite,
    "balance": balance_suite,
    "bounds": bounds_suite,
    "recurrence": recurrence_suite,
    "coarsen": coarsen_suite,
}


def verify(suite: str = "all") -> List[CheckResult]:
    """
    Run one suite, or every suite for ``all``.

    Raises:
        ArgumentError: For an unknown suite name.
    """
    if suite == "all":
        return [result for name in SUITES for result in SUITES[name]()]
    if suite not in SUITES:
        raise ArgumentError(f"unknown suite {suite!r}; choose from {', '.join(['all', *SUITES])}")
    return SUITES[suite]()
