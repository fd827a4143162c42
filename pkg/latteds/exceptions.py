"""Error types raised by the latteds package.

Every error carries a human readable ``detail`` string, which the command line
front end prints as the one-line diagnostic of a failed run.
"""


class LattedsError(Exception):
    """
    Base class of all package errors.

    Attributes:
        detail (str): Human readable description of the failure.
    """

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class ArgumentError(LattedsError, ValueError):
    """An argument is out of range or has the wrong width or dimension."""


class DomainError(LattedsError):
    """A cube or radius does not fit inside the lattice window."""


class ConfigError(LattedsError):
    """
    A configuration file could not be turned into a valid record.

    Attributes:
        key (str | None): The offending key, when the failure is tied to one.
    """

    def __init__(self, detail: str, key: str | None = None):
        super().__init__(detail)
        self.key = key


class IntegrationBlowUp(LattedsError):
    """
    The integrator produced a non-finite or runaway value.

    Attributes:
        time (float): Time of the step that blew up.
        site (tuple[int, ...]): Lattice coordinates of the largest value.
        magnitude (float): Absolute value found at ``site``.
    """

    def __init__(self, time: float, site: tuple[int, ...], magnitude: float):
        super().__init__(
            f"integration blew up at t={time:g}: |value|={magnitude:g} at site {site}"
        )
        self.time = time
        self.site = site
        self.magnitude = magnitude


class InapplicableBound(LattedsError):
    """A closed-form bound was requested outside its validity range."""


class UnboundedRelaxation(LattedsError):
    """The relaxation inequality gives no finite upper bound on the entry time."""


class ManifoldInconclusive(LattedsError):
    """
    The stable-manifold bisection could not classify an initial height.

    Attributes:
        bracket (tuple[float, float]): The surviving bisection bracket.
    """

    def __init__(self, detail: str, bracket: tuple[float, float]):
        super().__init__(detail)
        self.bracket = bracket


class ModulusEstimateError(LattedsError):
    """The sublevel set of an interaction did not close within the search reach."""


class OrderingViolation(LattedsError):
    """
    A trajectory left the ordering cone.

    Attributes:
        site (tuple[int, ...]): First violating site.
        time (float): Time of the violating sample.
        amount (float): Size of the violation.
    """

    def __init__(self, site: tuple[int, ...], time: float, amount: float):
        super().__init__(
            f"ordering violated by {amount:.3g} at site {site}, t={time:g}"
        )
        self.site = site
        self.time = time
        self.amount = amount
