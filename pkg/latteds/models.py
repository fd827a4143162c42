import math
from typing import Annotated, List, Literal, Optional, Tuple

import numpy as np
from pydantic import (
    BaseModel,
    BeforeValidator,
    ConfigDict,
    Field,
    field_validator,
    model_validator,
)


def _split_list(value):
    """Accept comma separated text for list-valued configuration keys."""
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


IntList = Annotated[List[int], BeforeValidator(_split_list)]
FloatList = Annotated[List[float], BeforeValidator(_split_list)]


class LatticeWindow(BaseModel):
    """
    Finite truncation of the lattice Z^N on which all fields live.

    Attributes:
        dim (int): Lattice dimension N.
        radius (int): Window radius W; sites satisfy -W <= alpha_j <= W.
        boundary (str): ``periodic`` (wrap with period 2W+1) or ``frozen``.
        buffer (int): Margin kept free of diagnostics cubes.
    """
    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1)
    radius: int = Field(ge=1)
    boundary: Literal["periodic", "frozen"] = "periodic"
    buffer: int = Field(default=0, ge=0)

    @property
    def side(self) -> int:
        return 2 * self.radius + 1

    @property
    def shape(self) -> Tuple[int, ...]:
        return (self.side,) * self.dim

    @property
    def volume(self) -> int:
        return self.side ** self.dim

    @property
    def max_radius(self) -> int:
        """Largest cube radius on which diagnostics are valid."""
        return self.radius - self.buffer

    def index(self, site) -> Tuple[int, ...]:
        """Array index of lattice coordinates ``site``."""
        if len(site) != self.dim:
            raise ValueError(f"site {tuple(site)} is not {self.dim}-dimensional")
        return tuple(int(a) + self.radius for a in site)

    def site(self, index) -> Tuple[int, ...]:
        return tuple(int(i) - self.radius for i in index)

    def coordinates(self) -> np.ndarray:
        """Integer coordinates of every site, shape ``shape + (dim,)``."""
        grids = np.indices(self.shape) - self.radius
        return np.moveaxis(grids, 0, -1)


class CubeSpec(BaseModel):
    """
    A cube C(r) = [-r, r-1]^N or C*(r) = [-r+1, r]^N.

    Attributes:
        radius (int): Cube radius r.
        variant (str): ``C`` or ``Cstar``.
    """
    model_config = ConfigDict(frozen=True)

    radius: int = Field(ge=1)
    variant: Literal["C", "Cstar"] = "Cstar"

    @property
    def bounds(self) -> Tuple[int, int]:
        if self.variant == "C":
            return -self.radius, self.radius - 1
        return -self.radius + 1, self.radius


class IntegratorSpec(BaseModel):
    """
    Fixed-step explicit integration settings.

    Attributes:
        scheme (str): ``rk4`` or ``euler``.
        dt (float): Time step.
        t_end (float): Final time.
        sample_every (int): Steps between diagnostic samples.
    """
    model_config = ConfigDict(frozen=True, extra="forbid")

    scheme: Literal["rk4", "euler"] = "rk4"
    dt: float = Field(default=1e-3, gt=0)
    t_end: float = Field(default=10.0, ge=0)
    sample_every: int = Field(default=1, ge=1)

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


class RecurrenceParams(BaseModel):
    """
    Parameters of the flux-majorizing recurrence and its compactified map.

    Attributes:
        dim (int): Dimension N.
        lambda_rec (float): Linear drain coefficient.
        eps_rec (float): Quadratic growth coefficient.
    """
    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1)
    lambda_rec: float = Field(gt=0)
    eps_rec: float = Field(gt=0)

    @property
    def saddle(self) -> float:
        """The positive fixed point sqrt(lambda/eps) of the limit dynamics."""
        return math.sqrt(self.lambda_rec / self.eps_rec)


class ManifoldSample(BaseModel):
    """
    One point of the stable manifold.

    Attributes:
        r (int): Radius at which the manifold height was computed.
        g_s (float): Manifold height.
        width (float): Bisection bracket width achieved.
        dim (int): Dimension the sample belongs to.
    """
    model_config = ConfigDict(frozen=True)

    r: int = Field(ge=1)
    g_s: float
    width: float = Field(ge=0)
    dim: int = Field(default=1, ge=1)

    @property
    def G(self) -> float:
        return self.g_s * self.r ** (self.dim - 1)


class BoundReport(BaseModel):
    """
    Outcome of comparing an observed quantity against a closed-form bound.

    Attributes:
        kind (str): Bound family, e.g. ``flux-N1`` or ``relaxation``.
        N (int): Dimension.
        R (int | None): Cube radius or recurrence radius.
        T (float | None): Time horizon.
        beta (float | None): Flux-dissipation constant.
        e0 (float | None): Initial energy supremum.
        eps (float | None): Tolerance parameter.
        bound (float | None): Bound value, ``None`` when skipped.
        observed (float | None): Observed value.
        slack (float): Quadrature allowance added to the bound.
        satisfied (bool | None): ``None`` when the check was skipped.
        note (str): Reason for a skip or extra context.
    """
    model_config = ConfigDict(frozen=True)

    kind: str
    N: int
    R: Optional[int] = None
    T: Optional[float] = None
    beta: Optional[float] = None
    e0: Optional[float] = None
    eps: Optional[float] = None
    bound: Optional[float] = None
    observed: Optional[float] = None
    slack: float = 0.0
    satisfied: Optional[bool] = None
    note: str = ""


class JtReport(BaseModel):
    """
    Radii whose windowed energy did not decrease between 0 and T.

    Attributes:
        T (float): Time of the comparison.
        members (List[int]): Radii R with E(R,T) >= E(R,0) up to the dead-band.
        r0 (int | None): Smallest radius beyond which no radius is a member.
        partial_sums (List[float]): Running sums of 1/r over members (N=2).
        stationary (bool): True when no dissipation was recorded at all.
    """
    model_config = ConfigDict(frozen=True)

    T: float
    members: List[int]
    r0: Optional[int] = None
    partial_sums: List[float] = []
    stationary: bool = False


class BoundedEdsInfo(BaseModel):
    """
    Per-orbit constants of a bounded lattice EDS.

    Attributes:
        beta (float): Max over samples of the model modulus b(||e||_inf).
        e0 (float): ||e||_inf of the initial state.
    """
    model_config = ConfigDict(frozen=True)

    beta: float = Field(ge=0)
    e0: float = Field(ge=0)


class ModulusEstimate(BaseModel):
    """
    Grid estimate of the dissipation modulus b(y).

    Attributes:
        value (float): Estimated b(y).
        resolution (float): Grid spacing used, in units of the periodicity cell.
        reach (float): Half-width of the searched difference range.
    """
    model_config = ConfigDict(frozen=True)

    value: float = Field(ge=0)
    resolution: float = Field(gt=0)
    reach: float = Field(ge=0)


class RelaxationBound(BaseModel):
    """
    Upper bounds on the first entry time into the eps-neighbourhood on C*(r).

    Attributes:
        N (int): Dimension.
        r (int): Cube radius.
        eps (float): Dissipation level.
        beta (float): Flux-dissipation constant.
        e0 (float): Initial energy supremum.
        exact (float): Largest T compatible with the energy inequality.
        simplified (float): The looser closed form, ``inf`` when it overflows.
    """
    model_config = ConfigDict(frozen=True)

    N: int
    r: int
    eps: float
    beta: float
    e0: float
    exact: float
    simplified: float


class DropletSnapshot(BaseModel):
    """
    Droplet statistics at one snapshot time.

    Attributes:
        t (float): Snapshot time.
        count (int): Number of droplets.
        mean_size (float): Mean droplet size in sites.
        max_size (int): Largest droplet size.
        phase_fraction (float): Fraction of sites labelled 1.
    """
    model_config = ConfigDict(frozen=True)

    t: float
    count: int = Field(ge=0)
    mean_size: float
    max_size: int
    phase_fraction: float


class CheckResult(BaseModel):
    """
    One line of a verify suite.

    Attributes:
        suite (str): Suite the check belongs to.
        name (str): Check name.
        passed (bool): Outcome.
        detail (str): Short numeric summary.
    """
    model_config = ConfigDict(frozen=True)

    suite: str
    name: str
    passed: bool
    detail: str = ""


class ModelSection(BaseModel):
    """
    ``model.*`` keys of a run configuration.

    Attributes:
        kind (str): One of fk, genfk, multirange, spinglass, dcgl.
        dim (int): Lattice dimension, key ``model.N``.
        width (int): Site degrees of freedom for fk and genfk, key ``model.M``.
        damping (float): Damping lambda, key ``model.lambda``.
        K (float): Site potential amplitude.
        kappa (float): Elastic constant of genfk and multirange interactions.
        mu (float): Spin-glass coupling.
        distances (List[int]): Interaction distances of the multirange model.
        cgl_lambda (float): Ginzburg-Landau parameter.
        bonds (str): Spin-glass bond assignment.
        split (str): Spin-glass energy split.
        frame (str): Ginzburg-Landau frame.
        modulus (str): Source of b for genfk and multirange, ``closed`` or ``grid``.
        seed (int | None): Seed of the random bond assignment.
    """
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)

    kind: Literal["fk", "genfk", "multirange", "spinglass", "dcgl"] = "fk"
    dim: int = Field(default=1, ge=1, alias="N")
    width: int = Field(default=1, ge=1, alias="M")
    damping: float = Field(default=0.0, ge=0, alias="lambda")
    K: float = Field(default=1.0 / (4 * math.pi ** 2), ge=0)
    kappa: float = Field(default=1.0, gt=0)
    mu: float = Field(default=1.0, gt=0)
    distances: IntList = [1, 2]
    cgl_lambda: float = Field(default=0.5, gt=0)
    bonds: Literal["ferro", "antiferro", "random"] = "random"
    split: Literal["half", "site"] = "half"
    frame: Literal["rotating", "lab"] = "rotating"
    modulus: Literal["closed", "grid"] = "closed"
    seed: Optional[int] = None

    @model_validator(mode="after")
    def check_kind(self):
        if 0 in self.distances:
            raise ValueError("model.distances must not contain 0")
        if self.kind in ("genfk", "multirange") and self.dim != 1:
            raise ValueError("model.N must be 1 for genfk and multirange")
        if self.kind == "multirange" and self.width != 1:
            raise ValueError("model.M must be 1 for multirange")
        if self.kind == "spinglass" and self.dim > 3:
            raise ValueError("model.N must be at most 3 for spinglass")
        if self.kind in ("genfk", "multirange", "dcgl") and self.damping > 0:
            raise ValueError(f"model.lambda must be 0 for {self.kind}")
        return self


class WindowSection(BaseModel):
    """
    ``window.*`` keys of a run configuration.

    Attributes:
        radius (int): Window radius W.
        buffer (int): Diagnostics margin.
        boundary (str): Boundary policy.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    radius: int = Field(ge=1)
    buffer: int = Field(default=0, ge=0)
    boundary: Literal["periodic", "frozen"] = "periodic"


class DiagnosticsSection(BaseModel):
    """
    ``diagnostics.*`` keys of a run configuration.

    Attributes:
        radii (List[int]): Cube radii of the energy ledger.
        eps (List[float]): Dissipation levels of the relaxation checks.
        relax_radii (List[int]): Cube radii of the relaxation checks.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    radii: IntList = []
    eps: FloatList = [1e-2, 1e-3]
    relax_radii: IntList = []

    @field_validator("radii", "relax_radii")
    @classmethod
    def positive_radii(cls, value):
        if any(r < 1 for r in value):
            raise ValueError("radii must be positive")
        return sorted(set(value))


class InitialSection(BaseModel):
    """
    ``initial.*`` keys of a run configuration.

    Attributes:
        kind (str): ``random`` data, a ``stationary`` equilibrium or a ``kink``.
        amplitude (float): Amplitude of random data.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: Literal["random", "stationary", "kink"] = "random"
    amplitude: float = Field(default=0.2, ge=0)


class OutputSection(BaseModel):
    """
    ``output.*`` keys of a run configuration.

    Attributes:
        dir (str | None): Output directory, defaults to ``LATTEDS_OUTPUT_DIR``.
        snapshot_every (int): Samples between stored snapshots; 0 keeps first and last.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    dir: Optional[str] = None
    snapshot_every: int = Field(default=0, ge=0)


class RunConfig(BaseModel):
    """
    A complete experiment description.

    Attributes:
        model (ModelSection): Model choice and parameters.
        window (WindowSection): Lattice window.
        integrator (IntegratorSpec): Time stepping.
        diagnostics (DiagnosticsSection): Ledger radii and relaxation levels.
        initial (InitialSection): Initial condition.
        output (OutputSection): Output location and snapshot schedule.
        seed (int): Seed of the initial condition.
    """
    model_config = ConfigDict(extra="forbid")

    model: ModelSection = ModelSection()
    window: WindowSection
    integrator: IntegratorSpec = IntegratorSpec()
    diagnostics: DiagnosticsSection = DiagnosticsSection()
    initial: InitialSection = InitialSection()
    output: OutputSection = OutputSection()
    seed: int = 0

    @model_validator(mode="after")
    def check_radii(self):
        limit = self.window.radius - self.window.buffer
        if limit < 1:
            raise ValueError("window.buffer must be smaller than window.radius")
        radii = self.diagnostics.radii
        if not radii:
            cap = min(limit, self.window.radius // 2)
            radii = [2 ** k for k in range(0, 32) if 2 ** k <= cap] or [1]
            self.diagnostics = self.diagnostics.model_copy(update={"radii": radii})
        every = sorted(set(radii) | set(self.diagnostics.relax_radii))
        if every[-1] > limit:
            raise ValueError(
                "diagnostics radii must not exceed window.radius - window.buffer"
            )
        if self.window.radius < 2 * max(radii):
            raise ValueError("window.radius must be at least 2 * max(diagnostics.radii)")
        return self

    @property
    def lattice(self) -> LatticeWindow:
        return LatticeWindow(
            dim=self.model.dim,
            radius=self.window.radius,
            boundary=self.window.boundary,
            buffer=self.window.buffer,
        )


class CoarseningConfig(BaseModel):
    """
    Settings of the bistable coarsening experiment.

    Attributes:
        dim (int): Lattice dimension, 1 or 2.
        damping (float): Damping lambda; 0 gives the gradient flow.
        mu (float): Nearest-neighbour coupling.
        radius (int): Window radius.
        t_end (float): Final time.
        dt (float): Time step.
        snapshot_every (float): Time between droplet snapshots.
        band_low (float): Label-0 threshold in the 0/1 frame.
        band_high (float): Label-1 threshold in the 0/1 frame.
        initial (str): ``bernoulli``, ``zero``, ``kink`` or ``multikink``.
        enforce_overdamped (bool): Reject damping above the overdamped ceiling.
        seed (int): Seed of the Bernoulli sample.
        output_dir (str | None): Output directory.
    """
    model_config = ConfigDict(extra="forbid", frozen=True)

    dim: Literal[1, 2] = 1
    damping: float = Field(default=0.0, ge=0)
    mu: float = Field(default=1.0, gt=0)
    radius: int = Field(default=256, ge=1)
    t_end: float = Field(default=200.0, ge=0)
    dt: float = Field(default=0.05, gt=0)
    snapshot_every: float = Field(default=10.0, gt=0)
    band_low: float = 0.25
    band_high: float = 0.75
    initial: Literal["bernoulli", "zero", "kink", "multikink"] = "bernoulli"
    enforce_overdamped: bool = True
    seed: int = 42
    output_dir: Optional[str] = None

    @property
    def curvature_bound(self) -> float:
        """Curvature bound B of the bistable site equation on the invariant box."""
        return 2 * self.dim * self.mu + 2.0

    @model_validator(mode="after")
    def check_overdamped(self):
        if not 0.0 < self.band_low < self.band_high < 1.0:
            raise ValueError("need 0 < band_low < band_high < 1")
        if self.enforce_overdamped and 4 * self.damping * self.curvature_bound > 1:
            raise ValueError(
                f"overdamped condition 4*lambda*B <= 1 violated "
                f"(lambda={self.damping}, B={self.curvature_bound})"
            )
        return self
