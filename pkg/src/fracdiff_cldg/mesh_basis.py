"""Overlapping primal/dual meshes, orthonormal Legendre bases and DG fields."""

from collections.abc import Callable
from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
from numpy.polynomial import legendre
from numpy.typing import ArrayLike, NDArray
from scipy.special import roots_legendre

from fracdiff_cldg.config.constants import CONSTANTS
from fracdiff_cldg.frac_kernels import orthonormal_scale

FloatArray = NDArray[np.float64]
MeshTag = Literal["primal", "dual"]
MESH_TAGS: tuple[MeshTag, MeshTag] = ("primal", "dual")


def other_tag(tag: MeshTag) -> MeshTag:
    """Return the partner mesh of an overlapping pair."""
    return "dual" if tag == "primal" else "primal"


@dataclass(frozen=True)
class OverlappingMesh:
    """A uniform primal partition of [0, 1]^dimension and its half-shifted dual.

    Dual nodes are x_{i-1/2}, with x_{-1/2} = 0 and x_{N+1/2} = 1, so the two
    boundary dual cells have width h/2.
    """

    dimension: int
    cells: int

    def __post_init__(self) -> None:
        if self.dimension not in (1, 2):
            raise ValueError(f"dimension must be 1 or 2, got {self.dimension}")
        if self.cells < 2:
            raise ValueError(f"need at least 2 cells per direction, got {self.cells}")

    @property
    def h(self) -> float:
        return 1.0 / self.cells

    def nodes(self, tag: MeshTag) -> FloatArray:
        """Cell endpoints along one direction."""
        n = self.cells
        if tag == "primal":
            return np.linspace(0.0, 1.0, n + 1)
        midpoints = (np.arange(n, dtype=float) + 0.5) / n
        return np.concatenate(([0.0], midpoints, [1.0]))

    def cells_per_direction(self, tag: MeshTag) -> int:
        return self.cells if tag == "primal" else self.cells + 1

    def total_cells(self, tag: MeshTag) -> int:
        return int(self.cells_per_direction(tag) ** self.dimension)


def build_mesh(dimension: int, n: int) -> OverlappingMesh:
    """Build the overlapping mesh pair with n primal cells per direction."""
    return OverlappingMesh(dimension, n)


@dataclass(frozen=True)
class BasisSpec:
    """Orthonormal Legendre modes of degree <= k on every cell (tensor products in 2D)."""

    k: int
    dimension: int = 1

    def __post_init__(self) -> None:
        if self.k < 0:
            raise ValueError(f"polynomial degree must be non-negative, got {self.k}")

    @property
    def modes(self) -> int:
        """Modes per cell along one direction."""
        return self.k + 1

    @property
    def modes_per_cell(self) -> int:
        return int(self.modes**self.dimension)


def cell_measures(mesh: OverlappingMesh, tag: MeshTag, direction: int = 0) -> FloatArray:
    """Cell widths along one direction (the mesh is the same in every direction)."""
    if not 0 <= direction < mesh.dimension:
        raise ValueError(f"direction {direction} out of range for dimension {mesh.dimension}")
    return np.diff(mesh.nodes(tag))


def cell_index(mesh: OverlappingMesh, tag: MeshTag, x: ArrayLike) -> NDArray[np.intp]:
    """Index of the cell containing x under the half-open convention [x_i, x_{i+1}).

    x = 1 belongs to the last cell.
    """
    xs = np.asarray(x, dtype=float)
    if np.any((xs < 0.0) | (xs > 1.0)):
        raise ValueError("points must lie in [0, 1]")
    nodes = mesh.nodes(tag)
    index = np.searchsorted(nodes, xs, side="right") - 1
    return np.clip(index, 0, nodes.size - 2)


def basis_values(
    degree: int, lower: ArrayLike, upper: ArrayLike, x: ArrayLike, derivative: bool = False
) -> FloatArray:
    """Orthonormal Legendre modes (or their x-derivatives) of a cell at points x.

    ``lower``, ``upper`` and ``x`` broadcast together; a trailing mode axis of
    length degree + 1 is appended.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    width = hi - lo
    t = 2.0 * (np.asarray(x, dtype=float) - lo) / width - 1.0
    m = np.arange(degree + 1, dtype=float)
    scale = np.sqrt((2.0 * m + 1.0) / width[..., None])
    if not derivative:
        return np.asarray(legendre.legvander(t, degree) * scale, dtype=float)
    columns = []
    for mode in range(degree + 1):
        unit = np.zeros(degree + 1)
        unit[mode] = 1.0
        columns.append(legendre.legval(t, legendre.legder(unit)))
    slopes = np.stack(columns, axis=-1)
    return np.asarray(slopes * scale * (2.0 / width[..., None]), dtype=float)


@dataclass(frozen=True)
class CellQuadrature:
    """Gauss-Legendre points, weights and mode values on every cell of one direction."""

    points: FloatArray  # (cells, n)
    weights: FloatArray  # (cells, n)
    modes: FloatArray  # (cells, n, k + 1)


def cell_quadrature(
    mesh: OverlappingMesh, tag: MeshTag, basis: BasisSpec, n: int | None = None
) -> CellQuadrature:
    """Per-direction quadrature tables; k + 3 points per cell by default."""
    n = basis.k + CONSTANTS.QUADRATURE_EXTRA if n is None else n
    ref, ref_w = roots_legendre(n)
    nodes = mesh.nodes(tag)
    lo, hi = nodes[:-1, None], nodes[1:, None]
    width = hi - lo
    points = lo + 0.5 * width * (ref + 1.0)
    weights = 0.5 * width * ref_w
    scale = np.stack([orthonormal_scale(basis.k, float(w)) for w in width[:, 0]])
    modes = legendre.legvander(ref, basis.k)[None, :, :] * scale[:, None, :]
    return CellQuadrature(points, weights, modes)


@dataclass(frozen=True)
class DGField:
    """Piecewise polynomial on one mesh of an overlapping pair.

    Coefficients are stored as a vector indexed by cell * (k + 1) + mode in
    1D, and as a matrix indexed by (cell_x * (k + 1) + mode_x,
    cell_y * (k + 1) + mode_y) in 2D.
    """

    mesh: OverlappingMesh
    basis: BasisSpec
    tag: MeshTag
    coefficients: FloatArray
    time: float = 0.0

    def __post_init__(self) -> None:
        coefficients = np.asarray(self.coefficients, dtype=float)
        expected = field_shape(self.mesh, self.basis, self.tag)
        if coefficients.shape != expected:
            raise ValueError(f"coefficient shape {coefficients.shape} does not match {expected}")
        object.__setattr__(self, "coefficients", coefficients)

    def blocks(self) -> FloatArray:
        """View as (cell, mode) in 1D or (cell_x, cell_y, mode_x, mode_y) in 2D."""
        n = self.mesh.cells_per_direction(self.tag)
        k1 = self.basis.modes
        if self.mesh.dimension == 1:
            return self.coefficients.reshape(n, k1)
        return self.coefficients.reshape(n, k1, n, k1).transpose(0, 2, 1, 3)

    def with_coefficients(self, coefficients: FloatArray, time: float | None = None) -> "DGField":
        return DGField(
            self.mesh, self.basis, self.tag, coefficients, self.time if time is None else time
        )

    def _check_compatible(self, other: "DGField") -> None:
        if (other.mesh, other.basis, other.tag) != (self.mesh, self.basis, self.tag):
            raise ValueError("fields live on different meshes or bases")

    def __add__(self, other: "DGField") -> "DGField":
        self._check_compatible(other)
        return self.with_coefficients(self.coefficients + other.coefficients)

    def __sub__(self, other: "DGField") -> "DGField":
        self._check_compatible(other)
        return self.with_coefficients(self.coefficients - other.coefficients)

    def __mul__(self, scalar: float) -> "DGField":
        return self.with_coefficients(self.coefficients * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "DGField":
        return self.with_coefficients(-self.coefficients)


def field_shape(mesh: OverlappingMesh, basis: BasisSpec, tag: MeshTag) -> tuple[int, ...]:
    """Coefficient array shape of a field on one mesh."""
    size = mesh.cells_per_direction(tag) * basis.modes
    return (size,) if mesh.dimension == 1 else (size, size)


def zero_field(mesh: OverlappingMesh, basis: BasisSpec, tag: MeshTag) -> DGField:
    return DGField(mesh, basis, tag, np.zeros(field_shape(mesh, basis, tag)))


def _values_on_grid(func: Callable[..., Any], *grids: FloatArray) -> FloatArray:
    shape = np.broadcast_shapes(*(g.shape for g in grids))
    return np.broadcast_to(np.asarray(func(*grids), dtype=float), shape)


def l2_project(
    f: Callable[..., Any],
    tag: MeshTag,
    mesh: OverlappingMesh,
    basis: BasisSpec,
    quadrature: CellQuadrature | None = None,
) -> DGField:
    """Cellwise L2 projection of f(x) (1D) or f(x, y) (2D); f must accept arrays.

    Args:
        f: Vectorized function; may return a scalar for constants.
        tag: Target mesh.
        mesh: Overlapping mesh pair.
        basis: Modal basis.
        quadrature: Precomputed tables for ``tag`` (built when omitted).

    Returns:
        The projected field. Its coefficients are the moments (f, b) since the
        basis is orthonormal.
    """
    quad = cell_quadrature(mesh, tag, basis) if quadrature is None else quadrature
    k1 = basis.modes
    if mesh.dimension == 1:
        values = _values_on_grid(f, quad.points)
        coefficients = np.einsum("cq,cqm->cm", quad.weights * values, quad.modes)
        return DGField(mesh, basis, tag, coefficients.reshape(-1))
    x = quad.points[:, :, None, None]
    y = quad.points[None, None, :, :]
    values = _values_on_grid(f, x, y)
    weighted = values * quad.weights[:, :, None, None] * quad.weights[None, None, :, :]
    blocks = np.einsum("aqbp,aqm,bpn->ambn", weighted, quad.modes, quad.modes)
    n = blocks.shape[0]
    return DGField(mesh, basis, tag, blocks.reshape(n * k1, n * k1))


def _point_modes(field: DGField, x: FloatArray) -> tuple[NDArray[np.intp], FloatArray]:
    nodes = field.mesh.nodes(field.tag)
    index = cell_index(field.mesh, field.tag, x)
    return index, basis_values(field.basis.k, nodes[index], nodes[index + 1], x)


def evaluate_field(field: DGField, point: Any) -> "float | FloatArray":
    """Value of a field at a point: x in 1D, (x, y) in 2D; arrays are evaluated pointwise.

    At a cell interface the value comes from the cell to the right (half-open cells).
    """
    if field.mesh.dimension == 1:
        x = np.asarray(point, dtype=float)
        index, modes = _point_modes(field, np.atleast_1d(x))
        values = np.einsum("pm,pm->p", field.blocks()[index], modes)
        return float(values[0]) if x.ndim == 0 else values.reshape(x.shape)
    px, py = (np.asarray(c, dtype=float) for c in point)
    shape = np.broadcast_shapes(px.shape, py.shape)
    xs = np.broadcast_to(px, shape).reshape(-1)
    ys = np.broadcast_to(py, shape).reshape(-1)
    ix, mx = _point_modes(field, xs)
    iy, my = _point_modes(field, ys)
    values = np.einsum("pmn,pm,pn->p", field.blocks()[ix, iy], mx, my)
    return float(values[0]) if len(shape) == 0 else values.reshape(shape)


def l2_error(field: DGField, exact: Callable[..., Any]) -> float:
    """||exact - field||_{L2(Omega)} by Gauss-Legendre with k + 3 points per direction."""
    quad = cell_quadrature(field.mesh, field.tag, field.basis)
    if field.mesh.dimension == 1:
        approx = np.einsum("cm,cqm->cq", field.blocks(), quad.modes)
        diff = _values_on_grid(exact, quad.points) - approx
        return float(np.sqrt(np.sum(quad.weights * diff**2)))
    approx = np.einsum("abmn,aqm,bpn->aqbp", field.blocks(), quad.modes, quad.modes)
    diff = _values_on_grid(exact, quad.points[:, :, None, None], quad.points[None, None]) - approx
    weights = quad.weights[:, :, None, None] * quad.weights[None, None, :, :]
    return float(np.sqrt(np.sum(weights * diff**2)))


def l2_norm(field: DGField) -> float:
    """L2 norm; the basis is orthonormal so this is the coefficient 2-norm."""
    return float(np.sqrt(np.sum(field.coefficients**2)))


def mirror_field(field: DGField, axis: int = 0) -> DGField:
    """Image of a field under x -> 1 - x (axis 0) or y -> 1 - y (axis 1).

    Both meshes are symmetric about 1/2, so the image lives on the same mesh.
    """
    if not 0 <= axis < field.mesh.dimension:
        raise ValueError(f"axis {axis} out of range")
    n = field.mesh.cells_per_direction(field.tag)
    k1 = field.basis.modes
    signs = np.tile((-1.0) ** np.arange(k1), n)
    order = (np.arange(n)[::-1, None] * k1 + np.arange(k1)[None, :]).reshape(-1)
    coefficients = np.take(field.coefficients, order, axis=axis)
    if field.mesh.dimension == 1:
        coefficients = coefficients * signs
    elif axis == 0:
        coefficients = coefficients * signs[:, None]
    else:
        coefficients = coefficients * signs[None, :]
    return field.with_coefficients(coefficients)
