# Planar finite elements: Q9 rectangles, assembly and the SPD solve
"""
Structured meshes of nine-noded biquadratic quadrilaterals on a rectangle
[0, width] x [0, height], tensor Gauss quadrature, sparse assembly of the
stiffness, mass and power-load integrals, Dirichlet elimination, and a
diagonally preconditioned conjugate-gradient solver.

Local node order inside an element (reference square [-1, 1]^2):

    3 --- 6 --- 2
    |           |
    7     8     5
    |           |
    0 --- 4 --- 1
"""

from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.sparse.linalg import cg

from .errors import InvalidArgumentError, NoConvergenceError


# (i, j) position of each local node on the 3 x 3 lattice of the element
LOCAL_LATTICE = np.array([
    (0, 0), (2, 0), (2, 2), (0, 2),   # corners
    (1, 0), (2, 1), (1, 2), (0, 1),   # edge midpoints
    (1, 1),                           # center
])

# Reference coordinates of the local nodes
NODE_XI = LOCAL_LATTICE.astype(float) - 1.0


def lagrange_quadratic(s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """1D quadratic Lagrange basis on the nodes -1, 0, 1.

    Returns values and derivatives with a trailing axis of length 3.
    """
    s = np.asarray(s, dtype=float)
    values = np.stack([0.5 * s * (s - 1.0), 1.0 - s * s, 0.5 * s * (s + 1.0)], axis=-1)
    derivs = np.stack([s - 0.5, -2.0 * s, s + 0.5], axis=-1)
    return values, derivs


def shape_functions(xi, eta) -> Tuple[np.ndarray, np.ndarray]:
    """Q9 shape functions N and their reference gradients at (xi, eta).

    Returns N with shape (..., 9) and dN with shape (..., 9, 2).
    """
    lx, dlx = lagrange_quadratic(xi)
    ly, dly = lagrange_quadratic(eta)
    i, j = LOCAL_LATTICE[:, 0], LOCAL_LATTICE[:, 1]
    N = lx[..., i] * ly[..., j]
    dN = np.stack([dlx[..., i] * ly[..., j], lx[..., i] * dly[..., j]], axis=-1)
    return N, dN


@dataclass(frozen=True)
class ReferenceElement:
    """Shape functions and their gradients tabulated at Gauss points."""
    quad_points: np.ndarray     # (Q, 2)
    quad_weights: np.ndarray    # (Q,)
    shape_values: np.ndarray    # (Q, 9)
    shape_grads: np.ndarray     # (Q, 9, 2)


def reference_q9(order: int = 3) -> ReferenceElement:
    """Tabulate the Q9 element on an order x order tensor Gauss rule."""
    if order < 1:
        raise InvalidArgumentError(f"Quadrature order must be >= 1, got {order}")
    g, w = leggauss(order)
    xi, eta = np.meshgrid(g, g, indexing='ij')
    points = np.column_stack([xi.ravel(), eta.ravel()])
    weights = np.outer(w, w).ravel()
    N, dN = shape_functions(points[:, 0], points[:, 1])
    return ReferenceElement(points, weights, N, dN)


DEFAULT_REFERENCE = reference_q9(3)


@dataclass(frozen=True)
class QuadMesh:
    """Uniform structured mesh of Q9 elements on [0, width] x [0, height]."""
    width: float
    height: float
    nx: int
    ny: int
    node_coords: np.ndarray     # (n_nodes, 2)
    elements: np.ndarray        # (n_elements, 9) gather map
    boundary_nodes: np.ndarray  # sorted node indices on the boundary
    reference: ReferenceElement = field(default=DEFAULT_REFERENCE, repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def hx(self) -> float:
        return self.width / self.nx

    @property
    def hy(self) -> float:
        return self.height / self.ny

    @property
    def det_jacobian(self) -> float:
        # affine elements: one constant Jacobian for the whole mesh
        return 0.25 * self.hx * self.hy

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def free_nodes(self) -> np.ndarray:
        mask = np.ones(self.n_nodes, dtype=bool)
        mask[self.boundary_nodes] = False
        return np.flatnonzero(mask)

    def element_origins(self) -> np.ndarray:
        """Lower-left corner of every element, shape (n_elements, 2)."""
        return self.node_coords[self.elements[:, 0]]


def build_rect_mesh(width: float, height: float, nx: int, ny: int,
                    quad_order: int = 3) -> QuadMesh:
    """Build the structured Q9 mesh of a width x height rectangle."""
    if not (width > 0 and height > 0):
        raise InvalidArgumentError(f"Rectangle sides must be positive, got {width} x {height}")
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise InvalidArgumentError(f"Element counts must be integers >= 1, got {nx} x {ny}")
    nx, ny = int(nx), int(ny)

    cols, rows = 2 * nx + 1, 2 * ny + 1
    xs = np.linspace(0.0, width, cols)
    ys = np.linspace(0.0, height, rows)
    # exact boundary coordinates regardless of linspace rounding
    xs[-1], ys[-1] = width, height
    X, Y = np.meshgrid(xs, ys)                       # node (i, j) -> index j * cols + i
    node_coords = np.column_stack([X.ravel(), Y.ravel()])

    ex, ey = np.meshgrid(np.arange(nx), np.arange(ny))
    i0 = 2 * ex.ravel()[:, None]
    j0 = 2 * ey.ravel()[:, None]
    elements = (j0 + LOCAL_LATTICE[:, 1]) * cols + (i0 + LOCAL_LATTICE[:, 0])

    ii, jj = np.meshgrid(np.arange(cols), np.arange(rows))
    on_edge = (ii == 0) | (ii == cols - 1) | (jj == 0) | (jj == rows - 1)
    boundary_nodes = np.flatnonzero(on_edge.ravel())

    return QuadMesh(
        width=float(width), height=float(height), nx=nx, ny=ny,
        node_coords=node_coords, elements=elements.astype(np.int64),
        boundary_nodes=boundary_nodes, reference=reference_q9(quad_order),
    )


# ==================== QUADRATURE TABLES ====================

def physical_grads(mesh: QuadMesh) -> np.ndarray:
    """Shape-function gradients in x, y at the quadrature points, shape (Q, 9, 2)."""
    scale = np.array([2.0 / mesh.hx, 2.0 / mesh.hy])
    return mesh.reference.shape_grads * scale


def quadrature_weights(mesh: QuadMesh) -> np.ndarray:
    """Quadrature weight times Jacobian for every element and point, shape (n_el, Q)."""
    w = mesh.reference.quad_weights * mesh.det_jacobian
    return np.broadcast_to(w, (mesh.n_elements, len(w)))


def quadrature_values(mesh: QuadMesh, u: np.ndarray) -> np.ndarray:
    """Interpolated u at every quadrature point, shape (n_el, Q)."""
    return np.asarray(u, dtype=float)[mesh.elements] @ mesh.reference.shape_values.T


def quadrature_gradient_sq(mesh: QuadMesh, u: np.ndarray) -> np.ndarray:
    """|grad u|^2 at every quadrature point, shape (n_el, Q)."""
    B = physical_grads(mesh)
    ue = np.asarray(u, dtype=float)[mesh.elements]
    gx = ue @ B[:, :, 0].T
    gy = ue @ B[:, :, 1].T
    return gx * gx + gy * gy


# ==================== ASSEMBLY ====================

def assemble_global(elements: np.ndarray, element_matrices: np.ndarray, n_nodes: int) -> sparse.csr_matrix:
    """Scatter element matrices through the gather maps and symmetrize exactly."""
    n_el, k = elements.shape
    data = np.broadcast_to(element_matrices, (n_el, k, k))
    rows = np.broadcast_to(elements[:, :, None], (n_el, k, k))
    cols = np.broadcast_to(elements[:, None, :], (n_el, k, k))
    A = sparse.coo_matrix(
        (data.ravel(), (rows.ravel(), cols.ravel())), shape=(n_nodes, n_nodes)
    ).tocsr()
    A = ((A + A.T) * 0.5).tocsr()
    A.sort_indices()
    return A


def element_stiffness(mesh: QuadMesh) -> np.ndarray:
    """K^e = integral of B^T B over one element (identical for every element)."""
    B = physical_grads(mesh)
    w = mesh.reference.quad_weights * mesh.det_jacobian
    Ke = np.einsum('q,qid,qjd->ij', w, B, B)
    return 0.5 * (Ke + Ke.T)


def element_mass(mesh: QuadMesh) -> np.ndarray:
    """M^e = integral of N^T N over one element."""
    N = mesh.reference.shape_values
    w = mesh.reference.quad_weights * mesh.det_jacobian
    Me = np.einsum('q,qi,qj->ij', w, N, N)
    return 0.5 * (Me + Me.T)


def assemble_stiffness(mesh: QuadMesh) -> sparse.csr_matrix:
    """Global stiffness matrix K = sum_e L^eT K^e L^e."""
    return assemble_global(mesh.elements, element_stiffness(mesh), mesh.n_nodes)


def assemble_mass(mesh: QuadMesh) -> sparse.csr_matrix:
    """Global mass matrix M_ij = integral of N_i N_j."""
    return assemble_global(mesh.elements, element_mass(mesh), mesh.n_nodes)


def power_of(values: np.ndarray, q: float) -> np.ndarray:
    """values**q at quadrature points.

    Non-integer exponents see negative values clamped to zero; integer
    exponents use the plain power.
    """
    if float(q).is_integer():
        return values ** int(q)
    return np.maximum(values, 0.0) ** q


def scatter_load(elements: np.ndarray, element_loads: np.ndarray, n_nodes: int) -> np.ndarray:
    """Accumulate element load vectors in a fixed order."""
    return np.bincount(elements.ravel(), weights=element_loads.ravel(), minlength=n_nodes)


def assemble_power_load(mesh: QuadMesh, u: np.ndarray, q: float) -> np.ndarray:
    """f = sum_e L^eT integral of N^eT (N^e d^e)^q."""
    if q < 0:
        raise InvalidArgumentError(f"Load exponent must be >= 0, got {q}")
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,) or not np.all(np.isfinite(u)):
        raise InvalidArgumentError("Field must be finite with one value per node")
    values = power_of(quadrature_values(mesh, u), q)
    fe = (values * quadrature_weights(mesh)) @ mesh.reference.shape_values
    return scatter_load(mesh.elements, fe, mesh.n_nodes)


# ==================== DIRICHLET ELIMINATION AND SOLVE ====================

@dataclass(frozen=True)
class ReducedSystem:
    """Linear system restricted to the free (unconstrained) nodes."""
    K: sparse.csr_matrix
    f: np.ndarray
    free_nodes: np.ndarray
    n_nodes: int

    def embed(self, d_free: np.ndarray) -> np.ndarray:
        """Re-insert zero boundary values."""
        d = np.zeros(self.n_nodes)
        d[self.free_nodes] = d_free
        return d


def apply_dirichlet(K: sparse.csr_matrix, f: np.ndarray, mesh,
                    K_free: Optional[sparse.csr_matrix] = None) -> ReducedSystem:
    """Eliminate the constrained rows and columns (zero boundary values).

    A precomputed reduced matrix K_free is used as is; only f is restricted.
    """
    if K.shape != (mesh.n_nodes, mesh.n_nodes) or len(f) != mesh.n_nodes:
        raise InvalidArgumentError("Matrix, load and mesh sizes disagree")
    free = mesh.free_nodes
    if K_free is None:
        K_free = K[free][:, free].tocsr()
        K_free.sort_indices()
    elif K_free.shape != (len(free), len(free)):
        raise InvalidArgumentError("Reduced matrix does not match the free nodes")
    return ReducedSystem(K_free, np.asarray(f, dtype=float)[free], free, mesh.n_nodes)


def solve_spd(K: sparse.spmatrix, f: np.ndarray, tol: float = 1e-10,
              max_iter: Optional[int] = None, x0: Optional[np.ndarray] = None) -> np.ndarray:
    """Jacobi-preconditioned conjugate gradients with a checked residual.

    Returns d with ||K d - f|| / ||f|| <= tol or raises NoConvergenceError.
    """
    if tol <= 0:
        raise InvalidArgumentError(f"Tolerance must be positive, got {tol}")
    f = np.asarray(f, dtype=float)
    f_norm = np.linalg.norm(f)
    if f_norm == 0.0:
        return np.zeros_like(f)

    diag = K.diagonal()
    if np.any(diag <= 0):
        raise InvalidArgumentError("Matrix has a non-positive diagonal entry; not SPD")
    preconditioner = sparse.diags(1.0 / diag)
    max_iter = max_iter or 10 * K.shape[0]

    d = x0
    residual = np.inf
    # cg stops on its recursive residual; two warm restarts close any gap to the true one
    for _ in range(3):
        d, _info = cg(K, f, x0=d, rtol=tol, atol=0.0, maxiter=max_iter, M=preconditioner)
        residual = np.linalg.norm(K @ d - f) / f_norm
        if residual <= tol:
            return d
    raise NoConvergenceError("Conjugate gradients did not converge", residual, max_iter)


# ==================== FIELD INTEGRALS AND EVALUATION ====================

def integrate_field(mesh: QuadMesh, u: np.ndarray, kind: str = 'dirichlet-energy',
                    p: Optional[float] = None) -> float:
    """Quadrature value of the Dirichlet energy or of the integral of |u|^p."""
    W = quadrature_weights(mesh)
    if kind == 'dirichlet-energy':
        return float(np.sum(W * quadrature_gradient_sq(mesh, u)))
    if kind == 'p-norm-power':
        if p is None or p < 1:
            raise InvalidArgumentError(f"p-norm-power needs p >= 1, got {p}")
        return float(np.sum(W * np.abs(quadrature_values(mesh, u)) ** p))
    raise InvalidArgumentError(f"Unknown integral kind: {kind}")


def interpolate(mesh: QuadMesh, func: Callable[[np.ndarray, np.ndarray], np.ndarray]) -> np.ndarray:
    """Nodal interpolant of func(x, y)."""
    x, y = mesh.node_coords[:, 0], mesh.node_coords[:, 1]
    return np.asarray(func(x, y), dtype=float) * np.ones(mesh.n_nodes)


def element_samples(mesh: QuadMesh, u: np.ndarray, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
    """u at the given reference points of every element, shape (n_el, len(xi))."""
    N, _ = shape_functions(xi, eta)
    return np.asarray(u, dtype=float)[mesh.elements] @ N.T


def evaluate_planar(mesh: QuadMesh, u: np.ndarray, x, y) -> np.ndarray:
    """Evaluate the finite element function u at physical points."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    ex = np.clip(np.floor(x / mesh.hx).astype(int), 0, mesh.nx - 1)
    ey = np.clip(np.floor(y / mesh.hy).astype(int), 0, mesh.ny - 1)
    xi = 2.0 * (x - ex * mesh.hx) / mesh.hx - 1.0
    eta = 2.0 * (y - ey * mesh.hy) / mesh.hy - 1.0
    N, _ = shape_functions(xi, eta)
    nodes = mesh.elements[ey * mesh.nx + ex]
    return np.sum(N * np.asarray(u, dtype=float)[nodes], axis=-1)
