"""Discrete Dirichlet space shared by the solvers, the residual tests and the analysis.

FemSpace hides whether the problem lives on a planar Q9 mesh or on a
radial mesh of the n-ball. It caches the stiffness and mass matrices and
knows how to turn raw integrals into physical ones (sphere area factor and
ball radius for radial problems).
"""

from dataclasses import dataclass
from typing import Callable, Optional, Union

import numpy as np
from scipy import sparse

from . import mesh_fem, radial_fem
from .errors import InvalidArgumentError
from .mesh_fem import QuadMesh, apply_dirichlet, solve_spd
from .radial_fem import RadialMesh, unit_ball_volume

Mesh = Union[QuadMesh, RadialMesh]


class FemSpace:
    """Finite element space with zero boundary values on a rectangle or an n-ball."""

    def __init__(self, mesh: Mesh, radius: float = 1.0, cg_tol: float = 1e-10):
        if radius <= 0:
            raise InvalidArgumentError(f"Radius must be positive, got {radius}")
        self.mesh = mesh
        self.cg_tol = cg_tol
        self.is_radial = isinstance(mesh, RadialMesh)

        if self.is_radial:
            self._fem = _RadialOps
            self.n = mesh.n
            self.radius = float(radius)
            # integrals over [0, 1] omit the sphere area n * omega_n
            self.sphere_area = mesh.n * unit_ball_volume(mesh.n)
        else:
            self._fem = _PlanarOps
            self.n = 2
            self.radius = 1.0
            self.sphere_area = 1.0

        self.K = self._fem.stiffness(mesh)
        self.M = self._fem.mass(mesh)
        self.free_nodes = mesh.free_nodes
        self.boundary_nodes = mesh.boundary_nodes
        self._K_free = self.K[self.free_nodes][:, self.free_nodes].tocsr()

    # ---- basic facts ----

    @property
    def n_nodes(self) -> int:
        return self.mesh.n_nodes

    @property
    def volume(self) -> float:
        """Physical measure of the domain."""
        if self.is_radial:
            return unit_ball_volume(self.n) * self.radius ** self.n
        return self.mesh.area

    def describe(self) -> dict:
        if self.is_radial:
            return {'domain': 'ball', 'n': self.n, 'radius': self.radius,
                    'nr': self.mesh.nr, 'nodes': self.n_nodes}
        return {'domain': 'rectangle', 'n': 2, 'width': self.mesh.width,
                'height': self.mesh.height, 'nx': self.mesh.nx, 'ny': self.mesh.ny,
                'nodes': self.n_nodes}

    # ---- quadrature ----

    def quadrature_weights(self) -> np.ndarray:
        return self._fem.quadrature_weights(self.mesh)

    def quadrature_values(self, u: np.ndarray) -> np.ndarray:
        return self._fem.quadrature_values(self.mesh, u)

    def dirichlet_energy(self, u: np.ndarray) -> float:
        """Raw integral of |grad u|^2 on the computational domain."""
        return self._fem.integrate(self.mesh, u, 'dirichlet-energy')

    def power_integral(self, u: np.ndarray, p: float) -> float:
        """Raw integral of |u|^p on the computational domain."""
        return self._fem.integrate(self.mesh, u, 'p-norm-power', p)

    def power_load(self, u: np.ndarray, q: float) -> np.ndarray:
        return self._fem.load(self.mesh, u, q)

    def power_integral_difference(self, u_old: np.ndarray, u_new: np.ndarray, p: float) -> float:
        """Integral of |u_new|^p - |u_old|^p without cancellation between large terms."""
        a = np.abs(self.quadrature_values(u_old))
        b = np.abs(self.quadrature_values(u_new))
        both = (a > 0) & (b > 0)
        diff = np.empty_like(a)
        ratio = np.where(both, (b - a) / np.where(both, a, 1.0), 0.0)
        diff[both] = a[both] ** p * np.expm1(p * np.log1p(ratio[both]))
        diff[~both] = b[~both] ** p - a[~both] ** p
        return float(np.sum(self.quadrature_weights() * diff))

    # ---- physical integrals ----

    def physical_dirichlet_energy(self, u: np.ndarray) -> float:
        """Integral of |grad u|^2 over the physical domain (ball of the given radius)."""
        raw = self.dirichlet_energy(u)
        return self.sphere_area * self.radius ** (self.n - 2) * raw

    def physical_power_integral(self, u: np.ndarray, p: float) -> float:
        raw = self.power_integral(u, p)
        return self.sphere_area * self.radius ** self.n * raw

    # ---- linear algebra ----

    def stiffness_product(self, a: np.ndarray, b: np.ndarray) -> float:
        return float(a @ (self.K @ b))

    def solve_poisson(self, rhs: np.ndarray, tol: Optional[float] = None) -> np.ndarray:
        """Solve K d = rhs on the free nodes and re-embed zero boundary values."""
        system = apply_dirichlet(self.K, rhs, self.mesh, K_free=self._K_free)
        d_free = solve_spd(system.K, system.f, tol=tol or self.cg_tol)
        return system.embed(d_free)

    @property
    def K_free(self) -> sparse.csr_matrix:
        return self._K_free

    @property
    def M_free(self) -> sparse.csr_matrix:
        return self.M[self.free_nodes][:, self.free_nodes].tocsr()

    # ---- fields ----

    def zero_boundary(self, u: np.ndarray) -> np.ndarray:
        u = np.array(u, dtype=float)
        u[self.boundary_nodes] = 0.0
        return u

    def interpolate(self, func: Callable) -> np.ndarray:
        """Nodal interpolant; func takes (x, y) on rectangles and r in [0, 1] on balls."""
        return self._fem.interpolate(self.mesh, func)

    def sample_values(self, u: np.ndarray, s: int) -> np.ndarray:
        """u on an s x s (planar) or s (radial) lattice of every element, including nodes."""
        ref = np.linspace(-1.0, 1.0, s)
        if self.is_radial:
            return radial_fem.element_samples_radial(self.mesh, u, s)
        xi, eta = np.meshgrid(ref, ref, indexing='ij')
        return mesh_fem.element_samples(self.mesh, u, xi.ravel(), eta.ravel())

    def coordinates(self) -> np.ndarray:
        """Physical node coordinates: (x, y) columns on rectangles, r on balls."""
        if self.is_radial:
            return self.mesh.node_coords[:, None] * self.radius
        return self.mesh.node_coords


class _PlanarOps:
    stiffness = staticmethod(mesh_fem.assemble_stiffness)
    mass = staticmethod(mesh_fem.assemble_mass)
    load = staticmethod(mesh_fem.assemble_power_load)
    integrate = staticmethod(mesh_fem.integrate_field)
    quadrature_weights = staticmethod(mesh_fem.quadrature_weights)
    quadrature_values = staticmethod(mesh_fem.quadrature_values)
    interpolate = staticmethod(mesh_fem.interpolate)


class _RadialOps:
    stiffness = staticmethod(radial_fem.assemble_radial_stiffness)
    mass = staticmethod(radial_fem.assemble_radial_mass)
    load = staticmethod(radial_fem.assemble_radial_load)
    integrate = staticmethod(radial_fem.integrate_radial)
    quadrature_weights = staticmethod(radial_fem.quadrature_weights)
    quadrature_values = staticmethod(radial_fem.quadrature_values)
    interpolate = staticmethod(radial_fem.interpolate_radial)


# ==================== DOMAINS ====================

@dataclass(frozen=True)
class Rectangle:
    """The rectangle [0, width] x [0, height]."""
    width: float = 1.0
    height: float = 1.0

    @property
    def n(self) -> int:
        return 2

    @property
    def volume(self) -> float:
        return self.width * self.height

    def label(self) -> str:
        return f"rectangle {self.width:g}x{self.height:g}"


@dataclass(frozen=True)
class Ball:
    """The n-ball of the given radius centred at the origin."""
    n: int = 2
    radius: float = 1.0

    @property
    def volume(self) -> float:
        return unit_ball_volume(self.n) * self.radius ** self.n

    @property
    def critical_exponent(self) -> float:
        return np.inf if self.n <= 2 else 2.0 * self.n / (self.n - 2)

    def label(self) -> str:
        return f"ball n={self.n} radius={self.radius:g}"


Domain = Union[Rectangle, Ball]


def build_space(domain: Domain, nx: int = 32, ny: Optional[int] = None, nr: int = 128,
                grading: float = 1.0, cg_tol: float = 1e-10) -> FemSpace:
    """Mesh a domain and wrap it in a FemSpace."""
    if isinstance(domain, Ball):
        mesh = radial_fem.build_radial_mesh(domain.n, nr, grading)
        return FemSpace(mesh, radius=domain.radius, cg_tol=cg_tol)
    if isinstance(domain, Rectangle):
        mesh = mesh_fem.build_rect_mesh(domain.width, domain.height, nx, ny if ny is not None else nx)
        return FemSpace(mesh, cg_tol=cg_tol)
    raise InvalidArgumentError(f"Unsupported domain: {domain!r}")
