"""Global operators of the central LDG scheme.

Every operator is one-dimensional and acts along a single direction; 2D
operators are Kronecker products of them, applied to coefficient matrices as
``A @ C @ B.T``.
"""

import logging
import os
import time
from collections.abc import Mapping
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Literal

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import lu_factor, lu_solve
from scipy.special import roots_jacobi, roots_legendre

from fracdiff_cldg.frac_kernels import FractionalExponent, fractional_power_table
from fracdiff_cldg.mesh_basis import (
    MESH_TAGS,
    BasisSpec,
    CellQuadrature,
    MeshTag,
    OverlappingMesh,
    basis_values,
    cell_index,
    cell_quadrature,
    other_tag,
)

logger = logging.getLogger(__name__)

FloatArray = NDArray[np.float64]
Direction = Literal["x", "y"]
TraceRule = Literal["zero", "interior"]


class SingularGramError(RuntimeError):
    """Raised when a Gram factorization hits a zero pivot."""


# --- Fractional Gram -------------------------------------------------------------------


@dataclass(frozen=True)
class FractionalGram:
    """Dense matrix G[i, j] = (D_L^s b_j, D_R^s b_i) on one mesh, with cached LU factors.

    The right-variant pairing (D_R^s b_j, D_L^s b_i) is G transposed; both
    solves share the same factors.
    """

    tag: MeshTag
    direction: Direction
    s: float
    matrix: FloatArray
    factors: tuple[FloatArray, NDArray[np.int32]] = field(repr=False)

    @property
    def size(self) -> int:
        return int(self.matrix.shape[0])

    def right_variant(self) -> FloatArray:
        return self.matrix.T


def _gram_tables(
    mesh: OverlappingMesh, tag: MeshTag, k: int, s: float
) -> tuple[FloatArray, FloatArray, FloatArray, FloatArray, FloatArray, FloatArray]:
    """Per-dof anchors and Gamma-scaled power tables of the one-sided derivatives."""
    nodes = mesh.nodes(tag)
    widths = np.diff(nodes)
    cache: dict[float, tuple[FloatArray, FloatArray, FloatArray, FloatArray]] = {}
    left_near, left_far, right_near, right_far = [], [], [], []
    for width in widths:
        key = round(float(width), 14)
        if key not in cache:
            ln, lf = fractional_power_table(k, float(width), s, "left")
            rn, rf = fractional_power_table(k, float(width), s, "right")
            cache[key] = (ln, lf, rn, rf)
        ln, lf, rn, rf = cache[key]
        left_near.append(ln)
        left_far.append(lf)
        right_near.append(rn)
        right_far.append(rf)
    lower = np.repeat(nodes[:-1], k + 1)
    upper = np.repeat(nodes[1:], k + 1)
    return (
        lower,
        upper,
        np.concatenate(left_near),
        np.concatenate(left_far),
        np.concatenate(right_near),
        np.concatenate(right_far),
    )


def _pair_terms(
    left_anchor: FloatArray,
    left_coef: FloatArray,
    right_anchor: FloatArray,
    right_coef: FloatArray,
    s: float,
    nodes: FloatArray,
    weights: FloatArray,
) -> FloatArray:
    """Integrate H(x-p)(x-p)^{-s}P(x-p) * H(r-x)(r-x)^{-s}Q(r-x) for all (i, j).

    Row i takes the right term (anchor r_i, coefficients Q_i), column j the
    left term (anchor p_j, coefficients P_j). The support is [p_j, r_i]; with
    x = p + L(1+u)/2 the integral becomes (L/2)^{1-2s} times a Gauss-Jacobi
    sum with exponents (-s, -s), exact for the polynomial factors.
    """
    span = right_anchor[:, None] - left_anchor[None, :]
    active = span > 0.0
    span = np.where(active, span, 0.0)
    y_left = span[:, :, None] * (0.5 * (1.0 + nodes))
    y_right = span[:, :, None] * (0.5 * (1.0 - nodes))
    p_values = np.zeros_like(y_left)
    q_values = np.zeros_like(y_right)
    for power in range(left_coef.shape[1] - 1, -1, -1):
        p_values = p_values * y_left + left_coef[None, :, None, power]
        q_values = q_values * y_right + right_coef[:, None, None, power]
    integral = np.einsum("q,ijq->ij", weights, p_values * q_values)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(active, (0.5 * span) ** (1.0 - 2.0 * s), 0.0)
    return np.asarray(scale * integral, dtype=float)


def gram_matrix(mesh: OverlappingMesh, tag: MeshTag, k: int, s: float) -> FloatArray:
    """Assemble the dense left-variant Gram of one mesh direction without factoring it."""
    lower, upper, left_near, left_far, right_near, right_far = _gram_tables(mesh, tag, k, s)
    nodes, weights = roots_jacobi(k + 2, -s, -s)
    # D_L b_j = near(lower_j) - far(upper_j); D_R b_i = near(upper_i) - far(lower_i)
    return (
        _pair_terms(lower, left_near, upper, right_near, s, nodes, weights)
        - _pair_terms(lower, left_near, lower, right_far, s, nodes, weights)
        - _pair_terms(upper, left_far, upper, right_near, s, nodes, weights)
        + _pair_terms(upper, left_far, lower, right_far, s, nodes, weights)
    )


def factor_matrix(matrix: FloatArray) -> tuple[FloatArray, NDArray[np.int32]]:
    """LU factors with partial pivoting; raises SingularGramError on a zero pivot."""
    lu, piv = lu_factor(matrix, check_finite=True)
    pivots = np.abs(np.diag(lu))
    if not np.all(np.isfinite(pivots)) or np.any(pivots == 0.0):
        raise SingularGramError(f"Gram matrix of size {matrix.shape[0]} is singular")
    return lu, piv


def assemble_gram(
    mesh: OverlappingMesh,
    basis: BasisSpec,
    s: "float | FractionalExponent",
    direction: Direction = "x",
    tag: MeshTag = "primal",
) -> FractionalGram:
    """Assemble and factor the fractional Gram of one mesh along one direction.

    Args:
        mesh: Overlapping mesh pair.
        basis: Modal basis.
        s: Half order, in (0, 1/2).
        direction: "x" or "y" (identical meshes; kept for bookkeeping).
        tag: Which mesh of the pair.

    Returns:
        The Gram with cached LU factors.

    Raises:
        ValueError: If s lies outside (0, 1/2).
        SingularGramError: If factorization fails.
    """
    s = float(FractionalExponent.half_order(float(s)))
    if direction == "y" and mesh.dimension < 2:
        raise ValueError("a 1D mesh has no y direction")
    start = time.perf_counter()
    matrix = gram_matrix(mesh, tag, basis.k, s)
    gram = FractionalGram(tag, direction, s, matrix, factor_matrix(matrix))
    logger.info(
        f"Assembled {tag} Gram ({direction}, s={s:.4f}) of size {gram.size} "
        f"in {time.perf_counter() - start:.3f}s"
    )
    return gram


def solve_aux(gram: FractionalGram, rhs: FloatArray, transpose: bool = False) -> FloatArray:
    """Solve G q = rhs (or G^T q = rhs for the right-sided flux)."""
    return np.asarray(
        lu_solve(gram.factors, rhs, trans=1 if transpose else 0, check_finite=False), dtype=float
    )


def solve_aux_2d(
    gram: FractionalGram, rhs: FloatArray, transpose: bool = False
) -> FloatArray:
    """Solve (G (x) I) vec(q) = vec(rhs) for a coefficient block.

    The orthonormal basis makes the cross-direction mass the identity, so this
    is one 1D solve per line: columns for an x-Gram, rows for a y-Gram.
    """
    if gram.direction == "x":
        return solve_aux(gram, rhs, transpose)
    return solve_aux(gram, rhs.T, transpose).T


# --- Coupling and overlap mass ---------------------------------------------------------


def _overlaps(
    from_nodes: FloatArray, to_nodes: FloatArray
) -> list[tuple[int, int, float, float]]:
    pairs = []
    for i in range(to_nodes.size - 1):
        for j in range(from_nodes.size - 1):
            lo = max(to_nodes[i], from_nodes[j])
            hi = min(to_nodes[i + 1], from_nodes[j + 1])
            if hi > lo:
                pairs.append((i, j, lo, hi))
    return pairs


def _check_pair(from_tag: MeshTag, to_tag: MeshTag) -> None:
    if from_tag == to_tag:
        raise ValueError(f"coupling needs two different meshes, got {from_tag} -> {to_tag}")


def assemble_coupling(
    mesh: OverlappingMesh,
    basis: BasisSpec,
    from_tag: MeshTag,
    to_tag: MeshTag,
    boundary_trace: TraceRule = "interior",
) -> FloatArray:
    """Matrix of u -> -(u, phi')_cell + [u phi n]_{boundary of cell} along one direction.

    Rows index to-mesh test functions phi, columns from-mesh basis functions.
    Endpoints of to-mesh cells inside the domain are interior to from-mesh
    cells, so the trace of u there is single-valued. At x = 0 and x = 1 the
    trace is the one-sided value (``"interior"``) or zero (``"zero"``, the
    zero extension).
    """
    _check_pair(from_tag, to_tag)
    k = basis.k
    k1 = basis.modes
    from_nodes = mesh.nodes(from_tag)
    to_nodes = mesh.nodes(to_tag)
    n_to = (to_nodes.size - 1) * k1
    n_from = (from_nodes.size - 1) * k1
    matrix = np.zeros((n_to, n_from))
    ref, ref_w = roots_legendre(k + 2)
    for i, j, lo, hi in _overlaps(from_nodes, to_nodes):
        x = lo + 0.5 * (hi - lo) * (ref + 1.0)
        w = 0.5 * (hi - lo) * ref_w
        u = basis_values(k, from_nodes[j], from_nodes[j + 1], x)
        dphi = basis_values(k, to_nodes[i], to_nodes[i + 1], x, derivative=True)
        matrix[i * k1 : (i + 1) * k1, j * k1 : (j + 1) * k1] -= dphi.T @ (w[:, None] * u)
    for i in range(to_nodes.size - 1):
        for endpoint, normal in ((to_nodes[i], -1.0), (to_nodes[i + 1], 1.0)):
            on_boundary = endpoint <= 0.0 or endpoint >= 1.0
            if on_boundary and boundary_trace == "zero":
                continue
            j = int(cell_index(mesh, from_tag, endpoint))
            u = basis_values(k, from_nodes[j], from_nodes[j + 1], np.array([endpoint]))[0]
            phi = basis_values(k, to_nodes[i], to_nodes[i + 1], np.array([endpoint]))[0]
            matrix[i * k1 : (i + 1) * k1, j * k1 : (j + 1) * k1] += normal * np.outer(phi, u)
    return matrix


def assemble_overlap_mass(
    mesh: OverlappingMesh, basis: BasisSpec, from_tag: MeshTag, to_tag: MeshTag
) -> FloatArray:
    """Matrix of (b_from, b_to) over cell intersections; rows index to-mesh modes."""
    _check_pair(from_tag, to_tag)
    k = basis.k
    k1 = basis.modes
    from_nodes = mesh.nodes(from_tag)
    to_nodes = mesh.nodes(to_tag)
    matrix = np.zeros(((to_nodes.size - 1) * k1, (from_nodes.size - 1) * k1))
    ref, ref_w = roots_legendre(k + 2)
    for i, j, lo, hi in _overlaps(from_nodes, to_nodes):
        x = lo + 0.5 * (hi - lo) * (ref + 1.0)
        w = 0.5 * (hi - lo) * ref_w
        b_from = basis_values(k, from_nodes[j], from_nodes[j + 1], x)
        b_to = basis_values(k, to_nodes[i], to_nodes[i + 1], x)
        matrix[i * k1 : (i + 1) * k1, j * k1 : (j + 1) * k1] = b_to.T @ (w[:, None] * b_from)
    return matrix


# --- Operator set ----------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorSet:
    """Everything the solver needs for one (mesh, basis, alpha, beta).

    Keys are mesh tags. ``aux[tag]`` maps the partner field onto ``tag`` test
    functions with a zero trace at the domain boundary; ``flux[tag]`` maps the
    partner's auxiliary variables back with the one-sided trace, and equals
    minus the transpose of the partner's ``aux``. ``mass[tag]`` maps the
    partner field onto ``tag``. ``grams[(tag, direction)]`` is the Gram on
    ``tag`` for that direction.
    """

    mesh: OverlappingMesh
    basis: BasisSpec
    alpha: float
    beta: float
    grams: Mapping[tuple[MeshTag, Direction], FractionalGram]
    aux: Mapping[MeshTag, FloatArray]
    flux: Mapping[MeshTag, FloatArray]
    mass: Mapping[MeshTag, FloatArray]
    quadrature: Mapping[MeshTag, CellQuadrature]

    @property
    def directions(self) -> tuple[Direction, ...]:
        return ("x",) if self.mesh.dimension == 1 else ("x", "y")

    def half_order(self, direction: Direction) -> float:
        order = self.alpha if direction == "x" else self.beta
        return (2.0 - order) / 2.0

    @cached_property
    def flux_response(self) -> dict[tuple[MeshTag, Direction], FloatArray]:
        """Map from a field on ``tag`` to its own flux divergence through the partner mesh.

        K = flux[tag] (G^{-1} + G^{-T}) aux[partner], with G the partner Gram;
        the time loop applies this instead of re-solving every stage.
        """
        response: dict[tuple[MeshTag, Direction], FloatArray] = {}
        for tag in MESH_TAGS:
            partner = other_tag(tag)
            for direction in self.directions:
                gram = self.grams[(partner, direction)]
                rhs = self.aux[partner]
                q = solve_aux(gram, rhs) + solve_aux(gram, rhs, transpose=True)
                response[(tag, direction)] = self.flux[tag] @ q
        return response

    @cached_property
    def round_trip_mass(self) -> dict[MeshTag, FloatArray]:
        """mass[tag] @ mass[partner]: the cross-direction factor of a 2D flux round trip."""
        return {tag: self.mass[tag] @ self.mass[other_tag(tag)] for tag in MESH_TAGS}


def build_operators(
    mesh: OverlappingMesh, basis: BasisSpec, alpha: float, beta: float | None = None
) -> OperatorSet:
    """Assemble every operator for a run; Grams are shared when alpha == beta."""
    beta = alpha if beta is None else beta
    alpha_exp = FractionalExponent.problem_order(alpha)
    beta_exp = FractionalExponent.problem_order(beta)
    start = time.perf_counter()
    grams: dict[tuple[MeshTag, Direction], FractionalGram] = {}
    for tag in MESH_TAGS:
        grams[(tag, "x")] = assemble_gram(mesh, basis, alpha_exp.scheme_half_order(), "x", tag)
        if mesh.dimension == 2:
            if beta == alpha:
                x_gram = grams[(tag, "x")]
                grams[(tag, "y")] = FractionalGram(
                    tag, "y", x_gram.s, x_gram.matrix, x_gram.factors
                )
            else:
                grams[(tag, "y")] = assemble_gram(
                    mesh, basis, beta_exp.scheme_half_order(), "y", tag
                )
    aux = {tag: assemble_coupling(mesh, basis, other_tag(tag), tag, "zero") for tag in MESH_TAGS}
    flux = {
        tag: assemble_coupling(mesh, basis, other_tag(tag), tag, "interior") for tag in MESH_TAGS
    }
    mass = {tag: assemble_overlap_mass(mesh, basis, other_tag(tag), tag) for tag in MESH_TAGS}
    quadrature = {tag: cell_quadrature(mesh, tag, basis) for tag in MESH_TAGS}
    logger.info(
        f"Built operators for N={mesh.cells}, k={basis.k}, dimension={mesh.dimension} "
        f"in {time.perf_counter() - start:.3f}s"
    )
    return OperatorSet(mesh, basis, alpha, beta, grams, aux, flux, mass, quadrature)


# --- Diagnostics -----------------------------------------------------------------------


def translation_defect(gram: FractionalGram, modes: int) -> float:
    """Largest mismatch among blocks of equal-width cells sharing a cell offset.

    Pairings over the whole line are translation invariant, so this is
    round-off for a correct assembly.
    """
    n_cells = gram.size // modes
    blocks = gram.matrix.reshape(n_cells, modes, n_cells, modes).transpose(0, 2, 1, 3)
    # the dual mesh has half-width boundary cells
    interior = range(1, n_cells - 1) if gram.tag == "dual" else range(n_cells)
    reference: dict[int, FloatArray] = {}
    defect = 0.0
    for i in interior:
        for j in interior:
            offset = i - j
            if offset not in reference:
                reference[offset] = blocks[i, j]
            else:
                defect = max(defect, float(np.max(np.abs(blocks[i, j] - reference[offset]))))
    return defect


def dump_matrix(
    matrix: FloatArray, path: str, header: Mapping[str, Any], binary: bool = False
) -> None:
    """Write a matrix for debugging: text (header line, then row-major rows) or .npz."""
    if binary:
        np.savez(path, matrix=matrix, **{k: np.asarray(v) for k, v in header.items()})
    else:
        line = " ".join(f"{k}={v}" for k, v in header.items())
        np.savetxt(path, matrix, header=line, fmt="%.17e")
    logger.info(f"Wrote {matrix.shape[0]}x{matrix.shape[1]} matrix to {path}")


def dump_grams(operators: OperatorSet, directory: str, binary: bool = False) -> list[str]:
    """Dump every Gram of a run as gram_<tag>_<direction>.txt (or .npz) under ``directory``."""
    os.makedirs(directory, exist_ok=True)
    extension = "npz" if binary else "txt"
    paths = []
    for (tag, direction), gram in sorted(operators.grams.items()):
        path = os.path.join(directory, f"gram_{tag}_{direction}.{extension}")
        header = {
            "mesh_tag": tag,
            "direction": direction,
            "s": gram.s,
            "N": operators.mesh.cells,
            "k": operators.basis.k,
        }
        dump_matrix(gram.matrix, path, header, binary)
        paths.append(path)
    return paths
