"""Discrete calculus and geometry on finite windows of the square lattice.

Translations follow T_j u(alpha) = u(alpha + e_j). Backward differences are
d_j u = u - T_j^{-1} u and forward differences d*_j u = T_j u - u. Axes are
counted from 0 in this module.
"""
from dataclasses import dataclass
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ArgumentError, DomainError
from .models import CubeSpec, LatticeWindow

Variant = Literal["backward", "forward"]
CubeVariant = Literal["C", "Cstar"]


@dataclass(frozen=True, eq=False)
class Field:
    """
    Values of width M attached to every site of a window.

    Attributes:
        window (LatticeWindow): The window the field lives on.
        values (np.ndarray): Read-only array of shape ``window.shape + (M,)``.
        anchor (np.ndarray | None): Values read outside a frozen window,
            taken at the clamped site. ``None`` replicates the edge of
            ``values`` itself.
    """

    window: LatticeWindow
    values: np.ndarray
    anchor: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim == self.window.dim:
            values = values[..., np.newaxis]
        if values.shape[:-1] != self.window.shape:
            raise ArgumentError(
                f"values of shape {values.shape} do not fit window shape {self.window.shape}"
            )
        object.__setattr__(self, "values", _readonly(values))
        if self.anchor is not None:
            anchor = np.asarray(self.anchor)
            if anchor.ndim == self.window.dim:
                anchor = anchor[..., np.newaxis]
            if anchor.shape != values.shape:
                raise ArgumentError("anchor must have the shape of the field values")
            object.__setattr__(self, "anchor", _readonly(anchor))

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def width(self) -> int:
        return self.values.shape[-1]

    @property
    def dtype(self):
        return self.values.dtype

    @classmethod
    def zeros(cls, window: LatticeWindow, width: int = 1, dtype=float) -> "Field":
        return cls(window, np.zeros(window.shape + (width,), dtype=dtype))

    @classmethod
    def constant(cls, window: LatticeWindow, value, width: int = 1) -> "Field":
        value = np.broadcast_to(np.asarray(value), (width,))
        return cls(window, np.broadcast_to(value, window.shape + (width,)).copy())

    @classmethod
    def coordinate(cls, window: LatticeWindow, axis: int) -> "Field":
        """The integer field u(alpha) = alpha_axis."""
        _check_axis(window, axis)
        return cls(window, window.coordinates()[..., axis : axis + 1].copy())

    @classmethod
    def from_function(
        cls, window: LatticeWindow, function: Callable[[np.ndarray], np.ndarray]
    ) -> "Field":
        """Evaluate ``function`` on the coordinate array of the window."""
        return cls(window, np.asarray(function(window.coordinates())))

    @classmethod
    def random_integers(
        cls,
        window: LatticeWindow,
        rng: np.random.Generator,
        low: int = -9,
        high: int = 10,
        width: int = 1,
    ) -> "Field":
        return cls(window, rng.integers(low, high, size=window.shape + (width,)))

    @classmethod
    def random_uniform(
        cls,
        window: LatticeWindow,
        rng: np.random.Generator,
        amplitude: float = 1.0,
        width: int = 1,
    ) -> "Field":
        return cls(
            window, rng.uniform(-amplitude, amplitude, size=window.shape + (width,))
        )

    @classmethod
    def stack(cls, fields: Sequence["Field"]) -> "Field":
        """Concatenate the widths of fields living on the same window."""
        window = fields[0].window
        if any(f.window != window for f in fields):
            raise ArgumentError("cannot stack fields from different windows")
        return cls(window, np.concatenate([f.values for f in fields], axis=-1))

    def with_values(self, values) -> "Field":
        return Field(self.window, values)

    def anchored(self, anchor) -> "Field":
        return Field(self.window, self.values, anchor)

    def component(self, c: int) -> "Field":
        if not 0 <= c < self.width:
            raise ArgumentError(f"component {c} out of range for width {self.width}")
        anchor = None if self.anchor is None else self.anchor[..., c : c + 1]
        return Field(self.window, self.values[..., c : c + 1], anchor)

    def at(self, site) -> np.ndarray:
        return self.values[self.window.index(site)]

    def dot(self, other: "Field") -> "Field":
        _check_same(self, other)
        if self.width != other.width:
            raise ArgumentError(f"width mismatch: {self.width} vs {other.width}")
        return Field(self.window, np.sum(self.values * other.values, axis=-1, keepdims=True))

    def norm2(self) -> "Field":
        """Site-wise sum of squares over the width."""
        return Field(self.window, np.sum(self.values * self.values, axis=-1, keepdims=True))

    def total(self) -> complex:
        return self.values.sum().item()

    def sup(self) -> float:
        return float(np.max(self.values))

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    def _binary(self, other, op) -> "Field":
        if isinstance(other, Field):
            _check_same(self, other)
            return Field(self.window, op(self.values, other.values))
        return Field(self.window, op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    def __radd__(self, other):
        return self._binary(other, lambda a, b: b + a)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._binary(other, lambda a, b: b - a)

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    def __rmul__(self, other):
        return self._binary(other, lambda a, b: b * a)

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return Field(self.window, -self.values)


def _readonly(array: np.ndarray) -> np.ndarray:
    view = array.view()
    view.flags.writeable = False
    return view


def _check_same(a: Field, b: Field) -> None:
    if a.window != b.window:
        raise ArgumentError("fields live on different windows")


def _check_axis(window: LatticeWindow, axis: int) -> None:
    if not isinstance(axis, (int, np.integer)) or not 0 <= axis < window.dim:
        raise ArgumentError(f"axis {axis} out of range for dimension {window.dim}")


def _along(ndim: int, axis: int, part: slice) -> Tuple[slice, ...]:
    index = [slice(None)] * ndim
    index[axis] = part
    return tuple(index)


def shift(field: Field, axis: int, direction: int = 1) -> Field:
    """
    Apply the translation T_axis^direction.

    Args:
        field (Field): Field to translate.
        axis (int): Lattice axis, 0 <= axis < N.
        direction (int): +1 reads u(alpha + e_axis), -1 reads u(alpha - e_axis);
            larger offsets repeat the translation.

    Returns:
        Field: The translated field, resolved through the boundary policy.

    Raises:
        ArgumentError: If the axis is out of range or the offset is zero.
    """
    _check_axis(field.window, axis)
    if not isinstance(direction, (int, np.integer)) or direction == 0:
        raise ArgumentError(f"direction must be a nonzero integer, got {direction}")
    values = field.values
    if field.window.boundary == "periodic":
        shifted = np.roll(values, -direction, axis=axis)
    else:
        source = values if field.anchor is None else field.anchor
        n = values.shape[axis]
        k = min(abs(direction), n)
        ndim = values.ndim
        if direction > 0:
            body = values[_along(ndim, axis, slice(k, n))]
            edge = source[_along(ndim, axis, slice(n - 1, n))]
            pad = np.repeat(edge, k, axis=axis)
            shifted = np.concatenate([body, pad], axis=axis)
        else:
            body = values[_along(ndim, axis, slice(0, n - k))]
            edge = source[_along(ndim, axis, slice(0, 1))]
            pad = np.repeat(edge, k, axis=axis)
            shifted = np.concatenate([pad, body], axis=axis)
    return Field(field.window, shifted, field.anchor)


def diff(field: Field, axis: int, variant: Variant = "backward") -> Field:
    """Backward difference d_j or forward difference d*_j, componentwise."""
    if variant == "backward":
        return field - shift(field, axis, -1)
    if variant == "forward":
        return shift(field, axis, 1) - field
    raise ArgumentError(f"unknown difference variant {variant!r}")


def grad(field: Field, variant: Variant = "backward") -> Field:
    """Gradient of a scalar field; ``forward`` gives the starred gradient."""
    if field.width != 1:
        raise ArgumentError(f"grad needs a scalar field, got width {field.width}")
    parts = [diff(field, j, variant) for j in range(field.dim)]
    return Field(field.window, np.concatenate([p.values for p in parts], axis=-1))


def div(field: Field, variant: Variant = "backward") -> Field:
    """Divergence of a field of width N; ``forward`` gives div*."""
    if field.width != field.dim:
        raise ArgumentError(
            f"div needs a field of width {field.dim}, got width {field.width}"
        )
    total = diff(field.component(0), 0, variant)
    for j in range(1, field.dim):
        total = total + diff(field.component(j), j, variant)
    return Field(field.window, total.values)


def laplacian(field: Field) -> Field:
    """Sum over axes of u(alpha + e_j) + u(alpha - e_j) - 2 u(alpha), componentwise."""
    total = None
    for j in range(field.dim):
        term = shift(field, j, 1) + shift(field, j, -1) - 2 * field
        total = term if total is None else total + term
    return Field(field.window, total.values)


def product_rule_sides(u: Field, w: Field, axis: int) -> Dict[str, Tuple[Field, Field]]:
    """
    Both sides of the discrete partial integration identities.

    Args:
        u (Field): Scalar field.
        w (Field): Scalar field on the same window.
        axis (int): Axis of the product rules.

    Returns:
        Dict[str, Tuple[Field, Field]]: ``(lhs, rhs)`` per identity name.
    """
    if u.width != 1 or w.width != 1:
        raise ArgumentError("partial integration identities need scalar fields")
    fwd_uw = diff(u * w, axis, "forward")
    du, dw = diff(u, axis, "forward"), diff(w, axis, "forward")
    return {
        "forward_product": (fwd_uw, du * shift(w, axis, 1) + u * dw),
        "forward_product_shifted": (fwd_uw, du * w + shift(u, axis, 1) * dw),
        "div_star_u_grad_w": (
            div(_scale(u, grad(w, "backward")), "forward"),
            u * laplacian(w) + grad(u, "forward").dot(grad(w, "forward")),
        ),
        "div_u_grad_star_w": (
            div(_scale(u, grad(w, "forward")), "backward"),
            u * laplacian(w) + grad(u, "backward").dot(grad(w, "backward")),
        ),
    }


def _scale(u: Field, vector: Field) -> Field:
    return Field(vector.window, u.values * vector.values)


def _check_cube(window: LatticeWindow, r: int) -> None:
    if r < 1:
        raise ArgumentError(f"cube radius must be positive, got {r}")
    if r > window.radius:
        raise DomainError(f"cube radius {r} exceeds window radius {window.radius}")


def cube_mask(window: LatticeWindow, spec: CubeSpec) -> np.ndarray:
    """Boolean array marking the sites of C(r) or C*(r)."""
    _check_cube(window, spec.radius)
    lo, hi = spec.bounds
    coords = window.coordinates()
    return np.all((coords >= lo) & (coords <= hi), axis=-1)


def cube_sites(window: LatticeWindow, spec: CubeSpec) -> List[Tuple[int, ...]]:
    """Sites of the cube in lexicographic order."""
    mask = cube_mask(window, spec)
    return [window.site(index) for index in np.argwhere(mask)]


def boundary_mask(window: LatticeWindow, r: int) -> np.ndarray:
    """Sites with |alpha_j| <= r for all j and |alpha_k| = r for some k."""
    _check_cube(window, r)
    coords = np.abs(window.coordinates())
    return np.all(coords <= r, axis=-1) & np.any(coords == r, axis=-1)


def boundary_sites(window: LatticeWindow, r: int) -> List[Tuple[int, ...]]:
    return [window.site(index) for index in np.argwhere(boundary_mask(window, r))]


def _normal_components(coords: np.ndarray, r: int, variant: CubeVariant) -> np.ndarray:
    # coords has shape (..., N); returns integer array of the same shape
    n_dim = coords.shape[-1]
    if variant == "Cstar":
        inside = (coords >= -r + 1) & (coords <= r)
    elif variant == "C":
        inside = (coords >= -r) & (coords <= r - 1)
    else:
        raise ArgumentError(f"unknown cube variant {variant!r}")
    normals = np.zeros(coords.shape, dtype=np.int64)
    for j in range(n_dim):
        others = np.ones(coords.shape[:-1], dtype=bool)
        for i in range(n_dim):
            if i != j:
                others &= inside[..., i]
        normals[..., j] += (coords[..., j] == r) & others
        normals[..., j] -= (coords[..., j] == -r) & others
    return normals


def normal(site: Sequence[int], r: int, variant: CubeVariant = "Cstar") -> Tuple[int, ...]:
    """
    Unnormalized outer normal of the cube boundary at ``site``.

    Args:
        site (Sequence[int]): Lattice coordinates.
        r (int): Cube radius.
        variant (str): ``Cstar`` gives n*, ``C`` gives n.

    Returns:
        Tuple[int, ...]: Sum of signed basis vectors; zero away from the boundary.
    """
    if r < 1:
        raise ArgumentError(f"cube radius must be positive, got {r}")
    coords = np.asarray(site, dtype=np.int64)[np.newaxis, :]
    return tuple(int(c) for c in _normal_components(coords, r, variant)[0])


def normal_field(window: LatticeWindow, r: int, variant: CubeVariant = "Cstar") -> np.ndarray:
    """Normals of every window site, shape ``window.shape + (N,)``."""
    _check_cube(window, r)
    return _normal_components(window.coordinates(), r, variant)


def boundary_measure(window: LatticeWindow, r: int) -> int:
    """Number of boundary crossings, the sum of |n*(alpha)|_1 over the boundary."""
    return int(np.abs(normal_field(window, r, "Cstar")).sum())


def omega(dim: int) -> float:
    """Geometric constant N^{3/2} 2^N."""
    return dim ** 1.5 * 2 ** dim


def stokes_sum(v: Field, r: int, variant: CubeVariant = "Cstar"):
    """
    Both sides of the discrete Stokes identity on a cube.

    Args:
        v (Field): Vector field of width N.
        r (int): Cube radius.
        variant (str): ``Cstar`` pairs div with n*, ``C`` pairs div* with n.

    Returns:
        tuple: ``(interior_sum, boundary_sum)``; exact for integer fields.
    """
    if v.width != v.dim:
        raise ArgumentError(f"stokes_sum needs a field of width {v.dim}")
    spec = CubeSpec(radius=r, variant=variant)
    mask = cube_mask(v.window, spec)
    divergence = div(v, "backward" if variant == "Cstar" else "forward")
    interior = divergence.values[..., 0][mask].sum().item()
    normals = normal_field(v.window, r, variant)
    boundary = (v.values * normals).sum().item()
    return interior, boundary


def cube_volume(dim: int, r: int) -> int:
    """|C(r)| = |C*(r)| = (2r)^N."""
    return (2 * r) ** dim


def shell_size(dim: int, r: int) -> int:
    """Cardinality (2r+1)^N - (2r-1)^N of the boundary set."""
    return (2 * r + 1) ** dim - (2 * r - 1) ** dim
