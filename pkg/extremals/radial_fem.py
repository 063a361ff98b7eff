# Radial finite elements for problems on the unit n-ball
"""
Quadratic 1D elements on [0, 1] with the volume weight r^(n-1).

Radially symmetric problems on the n-ball reduce to an ODE in r. All
integrals here omit the constant sphere area n * omega_n; the discrete
space applies it when physical quantities are reported.
"""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.optimize import bisect
from scipy.special import gamma

from .errors import InvalidArgumentError
from .mesh_fem import assemble_global, lagrange_quadratic, power_of, scatter_load


def unit_ball_volume(n: int) -> float:
    """omega_n = pi^(n/2) / Gamma(n/2 + 1)."""
    return float(np.pi ** (n / 2.0) / gamma(n / 2.0 + 1.0))


@dataclass(frozen=True)
class RadialMesh:
    """Quadratic-element mesh of [0, 1] for the n-ball; only r = 1 is constrained."""
    n: int
    nr: int
    node_coords: np.ndarray     # r_i, strictly increasing from 0 to 1
    elements: np.ndarray        # (nr, 3)
    quad_points: np.ndarray     # Gauss points on [-1, 1]
    quad_weights: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.node_coords)

    @property
    def n_elements(self) -> int:
        return len(self.elements)

    @property
    def boundary_nodes(self) -> np.ndarray:
        return np.array([self.n_nodes - 1])

    @property
    def free_nodes(self) -> np.ndarray:
        return np.arange(self.n_nodes - 1)

    @property
    def vertices(self) -> np.ndarray:
        return self.node_coords[::2]

    @property
    def element_lengths(self) -> np.ndarray:
        return np.diff(self.vertices)


def build_radial_mesh(n: int, nr: int, grading: float = 1.0) -> RadialMesh:
    """Quadratic elements with vertices at (e / nr)^grading; grading 1 is uniform."""
    if int(n) != n or n < 2:
        raise InvalidArgumentError(f"Dimension must be an integer >= 2, got {n}")
    if int(nr) != nr or nr < 1:
        raise InvalidArgumentError(f"Element count must be an integer >= 1, got {nr}")
    if grading < 1.0:
        raise InvalidArgumentError(f"Grading must be >= 1, got {grading}")
    n, nr = int(n), int(nr)

    vertices = (np.arange(nr + 1) / nr) ** grading
    vertices[-1] = 1.0
    nodes = np.empty(2 * nr + 1)
    nodes[::2] = vertices
    nodes[1::2] = 0.5 * (vertices[:-1] + vertices[1:])
    elements = 2 * np.arange(nr)[:, None] + np.arange(3)

    # exact for the weighted stiffness and mass integrands
    g, w = leggauss(3 + n // 2)
    return RadialMesh(n=n, nr=nr, node_coords=nodes, elements=elements,
                      quad_points=g, quad_weights=w)


# ==================== QUADRATURE TABLES ====================

def quadrature_radii(mesh: RadialMesh) -> np.ndarray:
    """Physical r of every quadrature point, shape (n_el, Q)."""
    left = mesh.vertices[:-1, None]
    h = mesh.element_lengths[:, None]
    return left + 0.5 * (mesh.quad_points + 1.0) * h


def quadrature_weights(mesh: RadialMesh) -> np.ndarray:
    """Gauss weight times Jacobian times r^(n-1), shape (n_el, Q)."""
    h = mesh.element_lengths[:, None]
    return 0.5 * h * mesh.quad_weights * quadrature_radii(mesh) ** (mesh.n - 1)


def _shape_tables(mesh: RadialMesh):
    N, dN = lagrange_quadratic(mesh.quad_points)     # (Q, 3)
    return N, dN


def quadrature_values(mesh: RadialMesh, u: np.ndarray) -> np.ndarray:
    N, _ = _shape_tables(mesh)
    return np.asarray(u, dtype=float)[mesh.elements] @ N.T


def quadrature_gradient_sq(mesh: RadialMesh, u: np.ndarray) -> np.ndarray:
    _, dN = _shape_tables(mesh)
    du = (np.asarray(u, dtype=float)[mesh.elements] @ dN.T) * (2.0 / mesh.element_lengths[:, None])
    return du * du


# ==================== ASSEMBLY ====================

def assemble_radial_stiffness(mesh: RadialMesh):
    _, dN = _shape_tables(mesh)
    W = quadrature_weights(mesh) * (2.0 / mesh.element_lengths[:, None]) ** 2
    Ke = np.einsum('eq,qi,qj->eij', W, dN, dN)
    return assemble_global(mesh.elements, Ke, mesh.n_nodes)


def assemble_radial_mass(mesh: RadialMesh):
    N, _ = _shape_tables(mesh)
    Me = np.einsum('eq,qi,qj->eij', quadrature_weights(mesh), N, N)
    return assemble_global(mesh.elements, Me, mesh.n_nodes)


def assemble_radial_load(mesh: RadialMesh, u: np.ndarray, q: float) -> np.ndarray:
    if q < 0:
        raise InvalidArgumentError(f"Load exponent must be >= 0, got {q}")
    u = np.asarray(u, dtype=float)
    if u.shape != (mesh.n_nodes,) or not np.all(np.isfinite(u)):
        raise InvalidArgumentError("Field must be finite with one value per node")
    N, _ = _shape_tables(mesh)
    values = power_of(quadrature_values(mesh, u), q)
    fe = (values * quadrature_weights(mesh)) @ N
    return scatter_load(mesh.elements, fe, mesh.n_nodes)


def assemble_radial(mesh: RadialMesh, kind: str, u: Optional[np.ndarray] = None,
                    q: Optional[float] = None):
    """Weighted stiffness, mass or power-load integrals.

    kind is 'stiffness', 'mass' or 'power-load' (the latter needs u and q).
    """
    if kind == 'stiffness':
        return assemble_radial_stiffness(mesh)
    if kind == 'mass':
        return assemble_radial_mass(mesh)
    if kind == 'power-load':
        if u is None or q is None:
            raise InvalidArgumentError("power-load needs a field u and an exponent q")
        return assemble_radial_load(mesh, u, q)
    raise InvalidArgumentError(f"Unknown radial assembly kind: {kind}")


def integrate_radial(mesh: RadialMesh, u: np.ndarray, kind: str = 'dirichlet-energy',
                     p: Optional[float] = None) -> float:
    """Weighted Dirichlet energy or weighted integral of |u|^p (sphere factor omitted)."""
    W = quadrature_weights(mesh)
    if kind == 'dirichlet-energy':
        return float(np.sum(W * quadrature_gradient_sq(mesh, u)))
    if kind == 'p-norm-power':
        if p is None or p < 1:
            raise InvalidArgumentError(f"p-norm-power needs p >= 1, got {p}")
        return float(np.sum(W * np.abs(quadrature_values(mesh, u)) ** p))
    raise InvalidArgumentError(f"Unknown integral kind: {kind}")


# ==================== EVALUATION ====================

def interpolate_radial(mesh: RadialMesh, func: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    return np.asarray(func(mesh.node_coords), dtype=float) * np.ones(mesh.n_nodes)


def evaluate_radial(mesh: RadialMesh, u: np.ndarray, r) -> np.ndarray:
    """Evaluate the finite element function u at radii r in [0, 1]."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    e = np.clip(np.searchsorted(mesh.vertices, r, side='right') - 1, 0, mesh.nr - 1)
    left = mesh.vertices[e]
    h = mesh.element_lengths[e]
    xi = 2.0 * (r - left) / h - 1.0
    N, _ = lagrange_quadratic(xi)
    return np.sum(N * np.asarray(u, dtype=float)[mesh.elements[e]], axis=-1)


def element_samples_radial(mesh: RadialMesh, u: np.ndarray, s: int) -> np.ndarray:
    """u at s equally spaced reference points of every element, shape (n_el, s)."""
    N, _ = lagrange_quadratic(np.linspace(-1.0, 1.0, s))
    return np.asarray(u, dtype=float)[mesh.elements] @ N.T


def radial_value_and_measure(mesh: RadialMesh, u: np.ndarray, t: float,
                             samples_per_element: int = 9):
    """Outer radius r*(t) of the superlevel set {u > t} and its measure omega_n r*^n.

    u must be sup-normalized. The crossing is bracketed by scanning element
    samples from the outside in and refined by bisection.
    """
    if not (0.0 < t < 1.0):
        raise InvalidArgumentError(f"Level must lie in (0, 1), got {t}")

    s = samples_per_element
    xi = np.linspace(-1.0, 1.0, s)
    samples = element_samples_radial(mesh, u, s)                     # (n_el, s)
    radii = mesh.vertices[:-1, None] + 0.5 * (xi + 1.0) * mesh.element_lengths[:, None]

    above = np.flatnonzero(samples.ravel() > t)
    if len(above) == 0:
        return 0.0, 0.0
    k = above[-1]
    flat_r = radii.ravel()
    if k + 1 >= len(flat_r):
        r_star = 1.0
    else:
        r_lo, r_hi = flat_r[k], flat_r[k + 1]
        if r_hi <= r_lo:
            # the next sample opens a new element at the same radius
            r_hi = flat_r[k + 2] if k + 2 < len(flat_r) else 1.0

        def excess(r: float) -> float:
            return float(evaluate_radial(mesh, u, r)[0]) - t

        if excess(r_hi) > 0:
            r_star = r_hi
        else:
            r_star = bisect(excess, r_lo, r_hi, xtol=1e-14, maxiter=200)
    return r_star, unit_ball_volume(mesh.n) * r_star ** mesh.n
