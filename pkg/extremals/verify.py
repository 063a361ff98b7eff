# Verification of computed extremals
"""
Randomized weak-form residual tests, the Lambda rescaling rule, and
analytic reference profiles (torsion polynomial, Bessel eigenfunctions,
sine products and the series torsion function of a rectangle).

Residuals are physical integrals: on a ball of radius R the sphere area
and the powers of R are applied, so a residual is comparable across meshes
and domains once it is divided by the W^{1,2} norm of the test function.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Callable, List

import numpy as np
from scipy.optimize import bisect
from scipy.special import gamma

from .errors import InvalidArgumentError
from .spaces import Ball, Domain, FemSpace, Rectangle

DEFAULT_TESTS = 20
BESSEL_MAX_X = 20.0
ZERO_SCAN_STEP = 0.05
SERIES_MODES = 50


# ==================== WEAK RESIDUALS ====================

@dataclass(frozen=True)
class ResidualReport:
    """Weak residuals WT_w(u) for a batch of seeded random test functions."""
    values: np.ndarray              # WT_w(u) per test function
    normalized: np.ndarray          # |WT_w(u)| / ||w||_{W^{1,2}}
    seed: int
    seeds: List[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.values) < 1 or len(self.values) != len(self.normalized):
            raise InvalidArgumentError("A residual report needs at least one test value")

    @property
    def count(self) -> int:
        return len(self.values)

    @property
    def mean_abs(self) -> float:
        return float(np.mean(np.abs(self.values)))

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))

    @property
    def mean_normalized(self) -> float:
        return float(np.mean(self.normalized))

    @property
    def max_normalized(self) -> float:
        return float(np.max(self.normalized))

    def passed(self, tol: float) -> bool:
        return self.mean_normalized <= tol


def _check_field(space: FemSpace, v: np.ndarray, name: str) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (space.n_nodes,):
        raise InvalidArgumentError(
            f"{name} has {v.size} values but the mesh has {space.n_nodes} nodes"
        )
    return v


def weak_residual(space: FemSpace, u: np.ndarray, Lambda: float, w: np.ndarray,
                  p: float) -> float:
    """WT_w(u) = integral of -grad u . grad w + Lambda w |u|^(p-2) u."""
    u = _check_field(space, u, "u")
    w = _check_field(space, w, "w")
    load = space.power_load(u, p - 1.0)
    R, n = space.radius, space.n
    value = -R ** (n - 2) * float(w @ (space.K @ u)) + Lambda * R ** n * float(w @ load)
    return space.sphere_area * value


def weak_residual_planar(space: FemSpace, u: np.ndarray, Lambda: float, w: np.ndarray,
                         p: float) -> float:
    if space.is_radial:
        raise InvalidArgumentError("weak_residual_planar needs a rectangle mesh")
    return weak_residual(space, u, Lambda, w, p)


def weak_residual_radial(space: FemSpace, u: np.ndarray, Lambda: float, w: np.ndarray,
                         p: float) -> float:
    """Radial residual; the r^(n-1) weight is part of the radial quadrature."""
    if not space.is_radial:
        raise InvalidArgumentError("weak_residual_radial needs a radial mesh")
    return weak_residual(space, u, Lambda, w, p)


def sobolev_norm(space: FemSpace, w: np.ndarray) -> float:
    """||w||_{W^{1,2}} = (integral |grad w|^2 + integral w^2)^(1/2)."""
    w = _check_field(space, w, "w")
    R, n = space.radius, space.n
    sq = R ** (n - 2) * float(w @ (space.K @ w)) + R ** n * float(w @ (space.M @ w))
    return float(np.sqrt(space.sphere_area * sq))


def random_test_function(space: FemSpace, seed: int) -> np.ndarray:
    """Interior nodal values uniform on [-1, 1], zero on the boundary."""
    rng = np.random.default_rng(seed)
    w = np.zeros(space.n_nodes)
    w[space.free_nodes] = rng.uniform(-1.0, 1.0, size=len(space.free_nodes))
    return w


def residual_report(space: FemSpace, u: np.ndarray, Lambda: float, p: float,
                    seed: int = 0, n_tests: int = DEFAULT_TESTS) -> ResidualReport:
    """Weak residuals against the test functions of seeds seed .. seed + n_tests - 1."""
    if n_tests < 1:
        raise InvalidArgumentError(f"Need at least one test function, got {n_tests}")
    seeds = [seed + k for k in range(n_tests)]
    values, normalized = [], []
    for s in seeds:
        w = random_test_function(space, s)
        wt = weak_residual(space, u, Lambda, w, p)
        values.append(wt)
        normalized.append(abs(wt) / sobolev_norm(space, w))
    return ResidualReport(np.array(values), np.array(normalized), seed, seeds)


def rescale_lambda(a: float, p: float) -> float:
    """If u solves Lap u + u^(p-1) = 0 then a*u solves it with Lambda = a^(2-p)."""
    if not a > 0:
        raise InvalidArgumentError(f"Scale factor must be positive, got {a}")
    return float(a ** (2.0 - p))


# ==================== BESSEL FUNCTIONS ====================

def _check_order(order: float) -> float:
    order = float(order)
    if order < 0 or not (2 * order).is_integer():
        raise InvalidArgumentError(f"Unsupported Bessel order: {order}")
    if order.is_integer() and order > 1:
        raise InvalidArgumentError(f"Unsupported Bessel order: {order}")
    return order


def _double_factorial(k: int) -> int:
    result = 1
    while k > 1:
        result *= k
        k -= 2
    return result


def _bessel_scalar(order: float, x: float) -> float:
    if x == 0.0:
        return 1.0 if order == 0 else 0.0

    z = Fraction(x) / 2
    z2 = z * z
    m = int(order)
    half = not order.is_integer()

    # ascending series summed exactly; only the final rounding is inexact
    total = Fraction(0)
    power = Fraction(1)
    k = 0
    while True:
        if half:
            # Gamma(k + m + 3/2) = sqrt(pi) (2k + 2m + 1)!! / 2^(k + m + 1)
            term = power * 2 ** (k + m + 1) / (factorial(k) * _double_factorial(2 * k + 2 * m + 1))
        else:
            term = power / (factorial(k) * factorial(k + m))
        total += term if k % 2 == 0 else -term
        if k * k > z2 and term * 10 ** 40 < abs(total):
            break
        power *= z2
        k += 1

    if half:
        return float(total * z ** m) * np.sqrt(x / 2.0) / np.sqrt(np.pi)
    return float(total * z ** m)


def bessel_j(order: float, x):
    """J_order(x) for order 0, 1 or a half-integer, x in [0, 20]."""
    order = _check_order(order)
    xs = np.asarray(x, dtype=float)
    if np.any(xs < 0) or np.any(xs > BESSEL_MAX_X):
        raise InvalidArgumentError(f"Bessel argument must lie in [0, {BESSEL_MAX_X:g}]")
    if xs.ndim == 0:
        return _bessel_scalar(order, float(xs))
    return np.array([_bessel_scalar(order, float(v)) for v in xs.ravel()]).reshape(xs.shape)


@lru_cache(maxsize=None)
def first_positive_zero(order: float) -> float:
    """First positive zero of J_order, bracketed on a coarse grid and bisected."""
    order = _check_order(order)

    def j(x: float) -> float:
        return _bessel_scalar(order, x)

    left = ZERO_SCAN_STEP
    f_left = j(left)
    while left < BESSEL_MAX_X:
        right = min(left + ZERO_SCAN_STEP, BESSEL_MAX_X)
        f_right = j(right)
        if f_left * f_right <= 0:
            return float(bisect(j, left, right, xtol=1e-13, maxiter=200))
        left, f_left = right, f_right
    raise InvalidArgumentError(f"No zero of J_{order:g} below {BESSEL_MAX_X:g}")


# ==================== ANALYTIC PROFILES ====================

def _bessel_profile(n: int) -> Callable[[np.ndarray], np.ndarray]:
    nu = (n - 2) / 2.0
    j = first_positive_zero(nu)
    peak = (j / 2.0) ** nu / gamma(nu + 1.0)     # limit of r^-nu J_nu(j r) at r = 0

    def profile(r):
        r = np.clip(np.asarray(r, dtype=float), 0.0, 1.0)
        x = j * r
        values = np.asarray(bessel_j(nu, x), dtype=float)
        with np.errstate(divide='ignore', invalid='ignore'):
            scaled = np.where(r > 0, values / np.where(r > 0, r, 1.0) ** nu, peak)
        return scaled / peak

    return profile


def _torsion_series(width: float, height: float, modes: int = SERIES_MODES):
    odd = np.arange(1, 2 * modes, 2, dtype=float)
    m, k = np.meshgrid(odd, odd, indexing='ij')
    coef = 16.0 / (np.pi ** 4 * m * k * (m * m / width ** 2 + k * k / height ** 2))

    def raw(x, y):
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        sx = np.sin(np.pi * x * odd / width)              # (..., modes)
        sy = np.sin(np.pi * y * odd / height)
        return np.einsum('...i,ij,...j->...', sx, coef, sy)

    center = float(raw(width / 2.0, height / 2.0))
    return raw, center


def analytic_extremal(domain: Domain, p: float) -> Callable:
    """Sup-normalized reference extremal for p = 1 or p = 2.

    Ball profiles take the physical radius; rectangle profiles take (x, y).
    """
    if p not in (1, 2):
        raise InvalidArgumentError(f"Analytic extremals exist only for p = 1 and p = 2, got {p}")

    if isinstance(domain, Ball):
        R = domain.radius
        if p == 1:
            return lambda r: 1.0 - (np.asarray(r, dtype=float) / R) ** 2
        unit = _bessel_profile(domain.n)
        return lambda r: unit(np.asarray(r, dtype=float) / R)

    if isinstance(domain, Rectangle):
        a, b = domain.width, domain.height
        if p == 2:
            return lambda x, y: np.sin(np.pi * np.asarray(x) / a) * np.sin(np.pi * np.asarray(y) / b)
        raw, center = _torsion_series(a, b)
        return lambda x, y: raw(x, y) / center

    raise InvalidArgumentError(f"Unsupported domain: {domain!r}")


def torsion_series_peak(width: float, height: float, modes: int = SERIES_MODES) -> float:
    """Maximum of the torsion function of a rectangle (attained at its center)."""
    return _torsion_series(width, height, modes)[1]


def interpolate_profile(space: FemSpace, profile: Callable) -> np.ndarray:
    """Nodal values of an analytic profile given in physical coordinates."""
    if space.is_radial:
        return space.interpolate(lambda r: profile(r * space.radius))
    return space.interpolate(profile)
