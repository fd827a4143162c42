"""
The flux-majorizing recurrence G_{r+1} = G_r - lambda r^{N-1} + eps G_r^2 / r^{N-1},
its compactified map H(s, g) and the stable manifold g_s(r) that separates
orbits escaping to +infinity from orbits dropping below the saddle value.

Iterations are scalar loops over Python floats; numpy is only used for
Jacobians.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ArgumentError, ManifoldInconclusive
from .models import BoundReport, ManifoldSample, RecurrenceParams

logger = logging.getLogger(__name__)

STEP_BUDGET = 10 ** 6
RELATIVE_TOLERANCE = 1e-9

Side = Literal["above", "below"]


@dataclass(frozen=True)
class RecurrenceOrbit:
    """
    Orbit of the G recurrence.

    Attributes:
        r (List[int]): Radii r0, r0 + 1, ...
        G (List[float]): G_r.
        g (List[float]): g_r = G_r / r^{N-1}.
        diverged (bool): The orbit overflowed before the requested number of steps.
    """

    r: List[int]
    G: List[float]
    g: List[float]
    diverged: bool = False


def iterate_G(G0: float, r0: int, params: RecurrenceParams, steps: int) -> RecurrenceOrbit:
    """
    Iterate G_{r+1} = G_r - lambda r^{N-1} + eps G_r^2 / r^{N-1}.

    Args:
        G0 (float): G at radius ``r0``.
        r0 (int): Starting radius, at least 1.
        params (RecurrenceParams): N, lambda and eps.
        steps (int): Number of steps.

    Returns:
        RecurrenceOrbit: ``steps + 1`` values unless the orbit overflowed first.
    """
    if r0 < 1 or steps < 1:
        raise ArgumentError(f"need r0 >= 1 and steps >= 1, got r0={r0}, steps={steps}")
    lam, eps, power = params.lambda_rec, params.eps_rec, params.dim - 1
    rs, Gs, gs = [r0], [float(G0)], [G0 / r0 ** power]
    G, r = float(G0), r0
    for _ in range(steps):
        weight = float(r) ** power
        try:
            G = G - lam * weight + eps * G * G / weight
        except OverflowError:
            return RecurrenceOrbit(rs, Gs, gs, diverged=True)
        r += 1
        if not math.isfinite(G):
            return RecurrenceOrbit(rs, Gs, gs, diverged=True)
        rs.append(r)
        Gs.append(G)
        gs.append(G / float(r) ** power)
    return RecurrenceOrbit(rs, Gs, gs)


def to_compact(r: int, G: float, dim: int) -> Tuple[float, float]:
    """(r, G) -> (s, g) with s = 1 - 1/r and g = G / r^{N-1}."""
    return 1 - 1 / r, G / r ** (dim - 1)


def map_H(s: float, g: float, params: RecurrenceParams) -> Tuple[float, float]:
    """
    The compactified map H(s, g) = (1/(2-s), (g - lambda + eps g^2) (1/(2-s))^{N-1}).

    Args:
        s (float): Compact radius coordinate in [0, 1].
        g (float): Scaled height.
        params (RecurrenceParams): N, lambda and eps.

    Returns:
        Tuple[float, float]: The image (s*, g*).
    """
    if not 0 <= s <= 1:
        raise ArgumentError(f"s must lie in [0, 1], got {s}")
    contraction = 1 / (2 - s)
    return contraction, (g - params.lambda_rec + params.eps_rec * g * g) * contraction ** (params.dim - 1)


def _map_H_open(s: float, g: float, params: RecurrenceParams) -> Tuple[float, float]:
    contraction = 1 / (2 - s)
    return contraction, (g - params.lambda_rec + params.eps_rec * g * g) * contraction ** (params.dim - 1)


def differential_H(s: float, g: float, params: RecurrenceParams, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian of H at (s, g), rows (s*, g*) and columns (s, g)."""
    jacobian = np.empty((2, 2))
    for column, (ds, dg) in enumerate(((h, 0.0), (0.0, h))):
        plus = _map_H_open(s + ds, g + dg, params)
        minus = _map_H_open(s - ds, g - dg, params)
        jacobian[:, column] = (np.array(plus) - np.array(minus)) / (2 * h)
    return jacobian


def fixed_point_differential(params: RecurrenceParams, sign: int = 1) -> np.ndarray:
    """DH at (1, sign * sqrt(lambda/eps)) in closed form."""
    g = sign * params.saddle
    return np.array([
        [1.0, 0.0],
        [g * (params.dim - 1), 1 + 2 * sign * math.sqrt(params.lambda_rec * params.eps_rec)],
    ])


def classify(g0: float, r: int, params: RecurrenceParams, tol: float, budget: int = STEP_BUDGET) -> Optional[Side]:
    """
    Follow g from radius ``r`` until it escapes above or settles below.

    Returns ``None`` when the step budget runs out first.
    """
    lam, eps, power = params.lambda_rec, params.eps_rec, params.dim - 1
    saddle = params.saddle
    ceiling = 10 * max(g0, saddle)
    floor = saddle - 10 * tol
    g = float(g0)
    for k in range(budget):
        if not math.isfinite(g) or g > ceiling:
            return "above"
        if g < floor:
            return "below"
        ratio = (r + k) / (r + k + 1)
        try:
            g = (g - lam + eps * g * g) * ratio ** power
        except OverflowError:
            return "above"
    return None


def stable_manifold(
    r: int, params: RecurrenceParams, tol: float = 1e-8, budget: int = STEP_BUDGET
) -> ManifoldSample:
    """
    Bisect for the height g_s(r) of the stable manifold.

    Starts from the bracket [sqrt(lambda/eps), sqrt(lambda/eps) + lambda/eps + 1/eps + 1],
    widening the upper end until it escapes.

    Args:
        r (int): Radius, at least 1.
        params (RecurrenceParams): N, lambda and eps.
        tol (float): Final bracket width.
        budget (int): Iterations allowed per classification.

    Returns:
        ManifoldSample: Midpoint of the final bracket and its width.

    Raises:
        ManifoldInconclusive: If a start point cannot be classified within the budget.
    """
    if not tol > 0:
        raise ArgumentError(f"tol must be positive, got {tol}")
    if r < 1:
        raise ArgumentError(f"r must be at least 1, got {r}")
    lam, eps = params.lambda_rec, params.eps_rec
    lo = params.saddle
    hi = lo + lam / eps + 1 / eps + 1
    while True:
        side = classify(hi, r, params, tol, budget)
        if side is None:
            raise ManifoldInconclusive(f"could not classify g={hi:g} at r={r}", (lo, hi))
        if side == "above":
            break
        lo, hi = hi, lo + 2 * (hi - lo)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        side = classify(mid, r, params, tol, budget)
        if side is None:
            raise ManifoldInconclusive(f"could not classify g={mid:.12g} at r={r}", (lo, hi))
        if side == "above":
            hi = mid
        else:
            lo = mid
    logger.debug("g_s(%d) in [%.12g, %.12g] for %s", r, lo, hi, params)
    return ManifoldSample(r=r, g_s=0.5 * (lo + hi), width=hi - lo, dim=params.dim)


def manifold_by_pullback(params: RecurrenceParams, r_values: Sequence[int]) -> Dict[int, float]:
    """
    Stable manifold heights by iterating the inverse map backward from far out.

    The inverse contracts towards the manifold by 1 + 2 sqrt(lambda eps) per
    step, so starting far enough from the requested radii forgets the
    starting guess.

    Args:
        params (RecurrenceParams): N, lambda and eps.
        r_values (Sequence[int]): Radii at which g_s is wanted.

    Returns:
        Dict[int, float]: g_s(r) per requested radius.
    """
    wanted = sorted(set(int(r) for r in r_values))
    if not wanted or wanted[0] < 1:
        raise ArgumentError("radii must be positive")
    lam, eps, power = params.lambda_rec, params.eps_rec, params.dim - 1
    far = wanted[-1] + math.ceil(40 / math.log1p(2 * math.sqrt(lam * eps)))
    g = params.saddle + power / (2 * eps * far)
    heights = {}
    for r in range(far - 1, wanted[0] - 1, -1):
        target = g * ((r + 1) / r) ** power
        g = (-1 + math.sqrt(1 + 4 * eps * (lam + target))) / (2 * eps)
        if r in wanted:
            heights[r] = g
    return {r: heights[r] for r in wanted}


def boundall(r: int, params: RecurrenceParams) -> float:
    """Upper bound on G_r for N >= 1; for N = 1 it reduces to sqrt(lambda/eps)."""
    N, eps = params.dim, params.eps_rec
    return (N - 1) * (1 + 1 / r) ** (N - 2) * r ** (N - 2) / eps + params.saddle * r ** (N - 1)


def bound2(r: int, params: RecurrenceParams) -> Optional[float]:
    """The N = 2 bound 12 / (-eps log(2 r^2 lambda eps)), or None when r sqrt(lambda eps) > 1/2."""
    lam, eps = params.lambda_rec, params.eps_rec
    if r * math.sqrt(lam * eps) > 0.5:
        return None
    return 12 / (-eps * math.log(2 * r * r * lam * eps))


def manifold_heights(
    params: RecurrenceParams,
    r_values: Sequence[int],
    tol: float = 1e-8,
    method: Literal["bisection", "pullback"] = "bisection",
) -> Dict[int, float]:
    if method == "pullback":
        return manifold_by_pullback(params, r_values)
    if method == "bisection":
        return {r: stable_manifold(r, params, tol).g_s for r in r_values}
    raise ArgumentError(f"unknown manifold method {method!r}")


def check_ricatti_bounds(
    params: RecurrenceParams,
    r_values: Sequence[int],
    tol: float = 1e-8,
    method: Literal["bisection", "pullback"] = "bisection",
) -> List[BoundReport]:
    """
    Compare G_r = g_s(r) r^{N-1} on the computed manifold with its upper bounds.

    For N = 1 the bound is sqrt(lambda/eps); for N >= 2 the general bound,
    plus for N = 2 the logarithmic bound wherever r sqrt(lambda eps) <= 1/2
    (skipped with a note elsewhere).

    Args:
        params (RecurrenceParams): N, lambda and eps.
        r_values (Sequence[int]): Radii to check.
        tol (float): Bisection width.
        method (str): ``bisection`` or ``pullback``.

    Returns:
        List[BoundReport]: One report per radius and bound.
    """
    N = params.dim
    heights = manifold_heights(params, r_values, tol, method)
    reports = []
    for r, g in heights.items():
        G = g * r ** (N - 1)
        slack = RELATIVE_TOLERANCE * abs(G) + tol * r ** (N - 1)
        common = dict(N=N, R=r, eps=params.eps_rec, observed=G, slack=slack)
        first = boundall(r, params)
        reports.append(BoundReport(
            kind="ricatti1" if N == 1 else "boundall", bound=first,
            satisfied=G <= first + slack, **common,
        ))
        if N == 2:
            second = bound2(r, params)
            if second is None:
                reports.append(BoundReport(
                    kind="ricatti2", note="skipped: r sqrt(lambda eps) > 1/2", **common,
                ))
            else:
                reports.append(BoundReport(
                    kind="ricatti2", bound=second, satisfied=G <= second + slack, **common,
                ))
    return reports


def recurrence_rows(
    params: RecurrenceParams, r_max: int, tol: float = 1e-8, method: Literal["bisection", "pullback"] = "bisection"
) -> List[Tuple[int, float, float, Optional[float], bool]]:
    """Rows ``(r, g_s, bound_ricatti1_or_all, bound_ricatti2, satisfied)`` for r = 1..r_max."""
    reports = check_ricatti_bounds(params, range(1, r_max + 1), tol, method)
    rows = []
    by_radius: Dict[int, List[BoundReport]] = {}
    for report in reports:
        by_radius.setdefault(report.R, []).append(report)
    for r, group in sorted(by_radius.items()):
        first = group[0]
        second = group[1].bound if len(group) > 1 else None
        satisfied = all(rep.satisfied is not False for rep in group)
        rows.append((r, first.observed / r ** (params.dim - 1), first.bound, second, satisfied))
    return rows
