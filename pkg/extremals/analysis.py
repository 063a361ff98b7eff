# Post-processing of extremals: normalization, distribution functions, constants
"""
Quantities of interest computed from a solved field:

- sup-normalization u -> u / a with a = sup u
- distribution functions mu(t) = |{u > t}| of the normalized field
- the Sobolev quotient C_p and the PDE constant Lambda
- the ordering check of distribution curves across exponents
"""

from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateInputError, InvalidArgumentError
from .mesh_fem import element_samples
from .radial_fem import radial_value_and_measure, unit_ball_volume
from .spaces import FemSpace
from .verify import rescale_lambda

NORMALIZE_SAMPLES = 5
DISTRIBUTION_CELLS = 8
FLOOR_FRACTION = 1e-4

CONSISTENT = "CONSISTENT"
NOT_CONSISTENT = "NOT-CONSISTENT"


def default_t_grid() -> np.ndarray:
    """Levels 0.01, 0.02, ..., 0.99."""
    return np.arange(1, 100) / 100.0


# ==================== NORMALIZATION ====================

def normalize_sup(space: FemSpace, u: np.ndarray) -> Tuple[np.ndarray, float]:
    """Scale u to unit maximum.

    The maximum is taken over the nodes and a 5 x 5 (radially: 5) lattice
    of every element, so peaks between nodes are seen.
    """
    u = np.asarray(u, dtype=float)
    if u.shape != (space.n_nodes,):
        raise InvalidArgumentError("Field size does not match the mesh")
    a = max(float(np.max(u)), float(np.max(space.sample_values(u, NORMALIZE_SAMPLES))))
    if not a > 0:
        raise DegenerateInputError("Cannot normalize a field with no positive values")
    return u / a, a


# ==================== DISTRIBUTION FUNCTIONS ====================

@dataclass(frozen=True)
class DistributionCurve:
    """mu(t) = |{u > t}| of a sup-normalized field."""
    p: float
    t_grid: np.ndarray
    mu: np.ndarray
    volume: float
    domain: Dict[str, object] = field(default_factory=dict)

    def rows(self) -> List[Tuple[float, float, float]]:
        return [(self.p, float(t), float(m)) for t, m in zip(self.t_grid, self.mu)]

    def at(self, t: float) -> float:
        """mu at a grid level."""
        idx = np.flatnonzero(np.isclose(self.t_grid, t, rtol=0.0, atol=1e-12))
        if len(idx) == 0:
            raise InvalidArgumentError(f"Level {t} is not on the grid")
        return float(self.mu[idx[0]])


def _check_t_grid(t_grid) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float).ravel()
    if len(t) == 0:
        raise InvalidArgumentError("Level grid is empty")
    if np.any(t <= 0) or np.any(t >= 1):
        raise InvalidArgumentError("Levels must lie strictly between 0 and 1")
    if np.any(np.diff(t) <= 0):
        raise InvalidArgumentError("Levels must be strictly increasing")
    return t


def _planar_measures(space: FemSpace, u: np.ndarray, t: np.ndarray, s: int) -> np.ndarray:
    mesh = space.mesh
    centers = (2.0 * np.arange(s) + 1.0) / s - 1.0
    xi, eta = np.meshgrid(centers, centers, indexing='ij')
    values = np.sort(element_samples(mesh, u, xi.ravel(), eta.ravel()).ravel())
    cell_area = mesh.hx * mesh.hy / (s * s)
    # number of sample cells with u > t
    above = len(values) - np.searchsorted(values, t, side='right')
    return cell_area * above


def _radial_measures(space: FemSpace, u: np.ndarray, t: np.ndarray) -> np.ndarray:
    mu = np.array([radial_value_and_measure(space.mesh, u, level)[1] for level in t])
    mu *= space.radius ** space.n
    # bisection noise must not break monotonicity
    return np.minimum.accumulate(mu)


def distribution(space: FemSpace, u_normalized: np.ndarray, t_grid=None, p: float = np.nan,
                 s: int = DISTRIBUTION_CELLS) -> DistributionCurve:
    """Distribution function of a sup-normalized field on the level grid."""
    t = _check_t_grid(default_t_grid() if t_grid is None else t_grid)
    u = np.asarray(u_normalized, dtype=float)
    if u.shape != (space.n_nodes,):
        raise InvalidArgumentError("Field size does not match the mesh")
    if space.is_radial:
        mu = _radial_measures(space, u, t)
    else:
        if s < 1:
            raise InvalidArgumentError(f"Cells per element side must be >= 1, got {s}")
        mu = _planar_measures(space, u, t, s)
    return DistributionCurve(p=p, t_grid=t, mu=mu, volume=space.volume, domain=space.describe())


# ==================== CONSTANTS ====================

def compute_Cp(space: FemSpace, u: np.ndarray, p: float) -> float:
    """C_p = integral |grad u|^2 / (integral |u|^p)^(2/p)."""
    power = space.physical_power_integral(u, p)
    if not power > 0:
        raise DegenerateInputError("Integral of |u|^p vanishes")
    return space.physical_dirichlet_energy(u) / power ** (2.0 / p)


def compute_Lambda(space: FemSpace, u: np.ndarray, p: float) -> float:
    """Lambda = C_p (integral u^p)^((2-p)/p) for a sup-normalized extremal."""
    power = space.physical_power_integral(u, p)
    return compute_Cp(space, u, p) * power ** ((2.0 - p) / p)


@dataclass(frozen=True)
class ConstantsReport:
    p: float
    Cp: float
    Lambda: float
    Lambda_rescaled: float
    a: float
    torsional_rigidity: Optional[float] = None
    principal_frequency: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            'p': self.p,
            'Cp': self.Cp,
            'Lambda': self.Lambda,
            'Lambda_rescaled': self.Lambda_rescaled,
            'a': self.a,
            'torsional_rigidity': self.torsional_rigidity,
            'principal_frequency': self.principal_frequency,
        }


def constants_report(space: FemSpace, u_normalized: np.ndarray, p: float, a: float,
                     base_lambda: float = 1.0) -> ConstantsReport:
    """Constants of a sup-normalized extremal.

    a is the sup of the field that solved the equation with constant
    base_lambda (1 for the nonlinear and torsion problems, the eigenvalue
    for p = 2) on the unit-size computational domain.
    """
    Cp = compute_Cp(space, u_normalized, p)
    # u / a = (1 / a) u, and a ball of radius R divides Lambda by R^2
    rescaled = base_lambda * rescale_lambda(1.0 / a, p) / space.radius ** 2
    return ConstantsReport(
        p=p,
        Cp=Cp,
        Lambda=compute_Lambda(space, u_normalized, p),
        Lambda_rescaled=rescaled,
        a=a,
        torsional_rigidity=1.0 / Cp if p == 1 else None,
        principal_frequency=Cp if p == 2 else None,
    )


def equal_volume_radius(volume: float, n: int) -> float:
    """Radius of the n-ball with the given volume."""
    if not volume > 0:
        raise InvalidArgumentError(f"Volume must be positive, got {volume}")
    return float((volume / unit_ball_volume(n)) ** (1.0 / n))


def scale_constant(Cp_unit: float, n: int, p: float, radius: float) -> float:
    """C_p of the ball of the given radius from C_p of the unit ball."""
    return Cp_unit * radius ** (n - 2.0 - 2.0 * n / p)


# ==================== ORDERING OF DISTRIBUTION CURVES ====================

@dataclass(frozen=True)
class MonotonicityRow:
    p_low: float
    p_high: float
    t: float
    diff: float
    counted: bool

    @property
    def ok(self) -> bool:
        return (not self.counted) or self.diff > 0

    def as_tuple(self) -> tuple:
        return (self.p_low, self.p_high, self.t, self.diff, self.ok)


@dataclass(frozen=True)
class MonotonicityReport:
    rows: List[MonotonicityRow]
    floor: float

    @property
    def counted(self) -> int:
        return sum(1 for r in self.rows if r.counted)

    @property
    def violations(self) -> List[MonotonicityRow]:
        return [r for r in self.rows if not r.ok]

    @property
    def verdict(self) -> str:
        if self.counted > 0 and not self.violations:
            return CONSISTENT
        return NOT_CONSISTENT


def monotonicity_report(curves: Sequence[DistributionCurve]) -> MonotonicityReport:
    """Compare mu_p and mu_q for every pair p < q.

    A level counts when both measures exceed 1e-4 of the domain volume;
    there mu_p(t) > mu_q(t) is expected.
    """
    if len(curves) < 2:
        raise InvalidArgumentError("Need at least two distribution curves")
    ordered = sorted(curves, key=lambda c: c.p)
    base = ordered[0]
    for c in ordered[1:]:
        if c.t_grid.shape != base.t_grid.shape or not np.array_equal(c.t_grid, base.t_grid):
            raise InvalidArgumentError("Distribution curves use different level grids")
        if not np.isclose(c.volume, base.volume, rtol=1e-12):
            raise InvalidArgumentError("Distribution curves come from different domains")
    ps = [c.p for c in ordered]
    if len(set(ps)) != len(ps):
        raise InvalidArgumentError(f"Exponents must be distinct, got {ps}")

    floor = FLOOR_FRACTION * base.volume
    rows = []
    for low, high in combinations(ordered, 2):
        for t, mu_low, mu_high in zip(base.t_grid, low.mu, high.mu):
            rows.append(MonotonicityRow(
                p_low=low.p, p_high=high.p, t=float(t),
                diff=float(mu_low - mu_high),
                counted=bool(mu_low > floor and mu_high > floor),
            ))
    return MonotonicityReport(rows=rows, floor=floor)
