# Solvers for extremal Sobolev functions
"""
Positive solutions of Lap u + Lambda u^(p-1) = 0 with zero boundary values.

- p > 2: the mountain-pass iteration on the Nehari manifold
  (project, steepest descent through a Poisson solve, step halving)
- p = 1: the torsion problem, one linear solve
- p = 2: the principal Dirichlet eigenpair by inverse iteration

Inside the iteration Lambda = 1; the reported fields are sup-normalized
and carry the rescaled Lambda.
"""

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .analysis import ConstantsReport, constants_report, normalize_sup
from .errors import DegenerateInputError, InvalidArgumentError, UnsupportedExponentError
from .logger import RunLogger, system_log
from .mesh_fem import solve_spd
from .spaces import Ball, Domain, FemSpace, Rectangle, build_space
from .verify import DEFAULT_TESTS, ResidualReport, residual_report

# Exponents just above 2 make the projection exponent 1 / (p - 2) blow up
ILL_CONDITIONED_BAND = 1e-6
# Descent directions below this fraction of ||u||_K count as zero
ZERO_GRADIENT = 1e-14

METHOD_MOUNTAIN_PASS = 'mountain-pass'
METHOD_TORSION = 'torsion'
METHOD_EIGEN = 'eigen'


# ==================== PROBLEM DESCRIPTION ====================

@dataclass(frozen=True)
class ProblemSpec:
    """One extremal problem: domain, exponent, mesh and solver controls."""
    domain: Domain
    p: float
    nx: int = 32
    ny: Optional[int] = None
    nr: int = 128
    grading: float = 1.0
    descent_tol: float = 1e-6
    max_iters: int = 500
    max_halvings: int = 30
    cg_tol: float = 1e-10
    eig_tol: float = 1e-9
    eig_max_iters: int = 5000
    seed: int = 0
    n_tests: int = DEFAULT_TESTS
    residual_tol: float = 1e-6

    def __post_init__(self):
        self.validate()

    def validate(self):
        p = self.p
        if not np.isfinite(p) or p < 1:
            raise UnsupportedExponentError(f"Exponent must be a finite number >= 1, got {p}")
        if 1 < p < 2:
            raise UnsupportedExponentError(
                f"p = {p:g} lies in the sublinear range 1 < p < 2, where the method fails"
            )
        if 2 < p < 2 + ILL_CONDITIONED_BAND:
            raise UnsupportedExponentError(
                f"p = {p!r} is too close to 2; the Nehari projection is ill-conditioned"
            )

        if isinstance(self.domain, Rectangle):
            if not (self.domain.width > 0 and self.domain.height > 0):
                raise InvalidArgumentError("Rectangle sides must be positive")
        elif isinstance(self.domain, Ball):
            if int(self.domain.n) != self.domain.n or self.domain.n < 2:
                raise InvalidArgumentError(f"Ball dimension must be an integer >= 2, got {self.domain.n}")
            if not self.domain.radius > 0:
                raise InvalidArgumentError("Ball radius must be positive")
            if p >= self.domain.critical_exponent:
                raise UnsupportedExponentError(
                    f"p = {p:g} is not below the critical exponent "
                    f"{self.domain.critical_exponent:g} for n = {self.domain.n}"
                )
        else:
            raise InvalidArgumentError(f"Unsupported domain: {self.domain!r}")

        for name in ('nx', 'nr', 'max_iters', 'max_halvings', 'eig_max_iters', 'n_tests'):
            value = getattr(self, name)
            if int(value) != value or value < (0 if name == 'max_halvings' else 1):
                raise InvalidArgumentError(f"{name} must be a positive integer, got {value}")
        if self.ny is not None and (int(self.ny) != self.ny or self.ny < 1):
            raise InvalidArgumentError(f"ny must be a positive integer, got {self.ny}")
        for name in ('descent_tol', 'cg_tol', 'eig_tol', 'residual_tol'):
            if not getattr(self, name) > 0:
                raise InvalidArgumentError(f"{name} must be positive")
        if self.grading < 1:
            raise InvalidArgumentError(f"grading must be >= 1, got {self.grading}")

    @property
    def method(self) -> str:
        if self.p == 1:
            return METHOD_TORSION
        if self.p == 2:
            return METHOD_EIGEN
        return METHOD_MOUNTAIN_PASS

    def build_space(self) -> FemSpace:
        return build_space(self.domain, nx=self.nx, ny=self.ny, nr=self.nr,
                           grading=self.grading, cg_tol=self.cg_tol)

    def describe(self) -> dict:
        return {
            'domain': self.domain.label(),
            'p': self.p,
            'method': self.method,
            'nx': self.nx, 'ny': self.ny if self.ny is not None else self.nx,
            'nr': self.nr, 'grading': self.grading,
            'descent_tol': self.descent_tol,
            'max_iters': self.max_iters,
            'max_halvings': self.max_halvings,
            'seed': self.seed,
        }


@dataclass(frozen=True)
class IterationState:
    """An accepted iterate on the Nehari manifold."""
    u: np.ndarray
    energy: float
    v: np.ndarray
    lam: float
    halvings: int


@dataclass
class SolveReport:
    """Outcome of one solve: the sup-normalized field and everything measured on it."""
    spec: ProblemSpec
    space: FemSpace
    method: str
    u: np.ndarray                   # sup-normalized field
    u_raw: np.ndarray               # solution of the Lambda = 1 (or eigen) problem
    constants: ConstantsReport
    residuals: ResidualReport
    energy_history: List[float] = field(default_factory=list)
    descent_norm: float = np.inf
    iterations: int = 0
    descent_converged: bool = False
    stalled: bool = False
    halvings: int = 0
    eigenvalue: Optional[float] = None
    final_state: Optional[IterationState] = None
    message: str = ""

    @property
    def residual_passed(self) -> bool:
        return self.residuals.passed(self.spec.residual_tol)

    @property
    def converged(self) -> bool:
        return self.descent_converged and self.residual_passed

    @property
    def a(self) -> float:
        return self.constants.a

    @property
    def Cp(self) -> float:
        return self.constants.Cp

    @property
    def Lambda(self) -> float:
        return self.constants.Lambda

    def summary(self) -> dict:
        return {
            'method': self.method,
            'p': self.spec.p,
            'converged': self.converged,
            'stalled': self.stalled,
            'iterations': self.iterations,
            'descent_norm': self.descent_norm,
            'Cp': self.Cp,
            'Lambda': self.Lambda,
            'residual_mean': self.residuals.mean_normalized,
            'message': self.message,
        }


# ==================== BUILDING BLOCKS ====================

def default_initial_guess(space: FemSpace) -> np.ndarray:
    """sin(pi x / width) sin(pi y / height) on rectangles, 1 - r^2 on balls."""
    if space.is_radial:
        return space.interpolate(lambda r: 1.0 - r * r)
    width, height = space.mesh.width, space.mesh.height
    guess = space.interpolate(lambda x, y: np.sin(np.pi * x / width) * np.sin(np.pi * y / height))
    return space.zero_boundary(guess)


def _require_superlinear(p: float):
    if p <= 2:
        raise UnsupportedExponentError(
            f"The mountain pass needs p > 2, got {p:g}; use the torsion (p = 1) "
            f"or eigenvalue (p = 2) solver"
        )
    if p < 2 + ILL_CONDITIONED_BAND:
        raise UnsupportedExponentError(f"p = {p!r} is too close to 2")


def nehari_scale(space: FemSpace, u: np.ndarray, p: float) -> float:
    """(integral |grad u|^2 / integral |u|^p)^(1 / (p - 2))."""
    _require_superlinear(p)
    gradient = space.dirichlet_energy(u)
    power = space.power_integral(u, p)
    if not (gradient > 0 and power > 0):
        raise DegenerateInputError("Cannot project a zero field onto the Nehari manifold")
    return (gradient / power) ** (1.0 / (p - 2.0))


def nehari_project(space: FemSpace, u: np.ndarray, p: float) -> np.ndarray:
    """Rescale u so that integral |grad u|^2 = integral |u|^p."""
    return nehari_scale(space, u, p) * np.asarray(u, dtype=float)


def nehari_residual(space: FemSpace, u: np.ndarray, p: float) -> float:
    gradient = space.dirichlet_energy(u)
    return abs(gradient - space.power_integral(u, p)) / gradient


def energy(space: FemSpace, u: np.ndarray, p: float) -> float:
    """I(u) = 1/2 integral |grad u|^2 - 1/p integral |u|^p."""
    if p < 1:
        raise InvalidArgumentError(f"Exponent must be >= 1, got {p}")
    return 0.5 * space.dirichlet_energy(u) - space.power_integral(u, p) / p


def energy_difference(space: FemSpace, u_old: np.ndarray, u_new: np.ndarray, p: float) -> float:
    """I(u_new) - I(u_old), formed from differences instead of two large energies."""
    gradient_change = 0.5 * space.stiffness_product(u_new - u_old, u_new + u_old)
    return gradient_change - space.power_integral_difference(u_old, u_new, p) / p


def descent_direction(space: FemSpace, u: np.ndarray, p: float):
    """Steepest descent direction of I at u, normalized to unit Dirichlet energy.

    Solves K g = f(u) - K u, i.e. g = v_bar - u where K v_bar = f(u). The
    gradient magnitude is 2 lambda = sqrt(g^T K g). Returns (v, lambda);
    at a discrete solution v is zero and lambda is 0.
    """
    u = np.asarray(u, dtype=float)
    rhs = space.power_load(u, p - 1.0) - space.K @ u
    g = space.solve_poisson(rhs)
    two_lambda = np.sqrt(max(space.stiffness_product(g, g), 0.0))
    scale = np.sqrt(max(space.stiffness_product(u, u), 0.0))
    if two_lambda <= ZERO_GRADIENT * scale or two_lambda == 0.0:
        return np.zeros_like(u), 0.0
    return g / two_lambda, 0.5 * two_lambda


def _check_guess(space: FemSpace, u_guess: np.ndarray) -> np.ndarray:
    u_guess = np.asarray(u_guess, dtype=float)
    if u_guess.shape != (space.n_nodes,):
        raise InvalidArgumentError(
            f"Initial guess has {u_guess.size} values but the mesh has {space.n_nodes} nodes"
        )
    if not np.all(np.isfinite(u_guess)):
        raise InvalidArgumentError("Initial guess contains non-finite values")
    return space.zero_boundary(u_guess)


def _finish(spec: ProblemSpec, space: FemSpace, method: str, u_raw: np.ndarray,
            base_lambda: float, run_logger: Optional[RunLogger], **fields) -> SolveReport:
    """Normalize, measure constants and run the weak residual test."""
    u_norm, a = normalize_sup(space, u_raw)
    constants = constants_report(space, u_norm, spec.p, a, base_lambda)
    residuals = residual_report(space, u_norm, constants.Lambda_rescaled, spec.p,
                                seed=spec.seed, n_tests=spec.n_tests)
    if run_logger:
        run_logger.log_residuals(residuals.mean_normalized, residuals.max_normalized, residuals.count)

    report = SolveReport(spec=spec, space=space, method=method, u=u_norm, u_raw=u_raw,
                         constants=constants, residuals=residuals, **fields)
    if not report.residual_passed and report.descent_converged:
        report.message = (f"residual test failed: mean normalized |WT| = "
                          f"{residuals.mean_normalized:.3e} > {spec.residual_tol:g}")

    system_log.info(
        f"{method} p={spec.p:g} on {spec.domain.label()}: converged={report.converged} "
        f"iterations={report.iterations} Cp={constants.Cp:.10g}"
    )
    if run_logger:
        run_logger.log_event('CONSTANTS', constants.to_dict())
    return report


# ==================== SOLVERS ====================

def mountain_pass_solve(spec: ProblemSpec, u_guess: Optional[np.ndarray] = None,
                        space: Optional[FemSpace] = None,
                        run_logger: Optional[RunLogger] = None) -> SolveReport:
    """Mountain-pass iteration for p > 2.

    u_1 = P(u_guess); then repeatedly take the steepest descent direction v,
    stop once 2 lambda <= descent_tol, and otherwise accept the first of
    P(u + v), P(u + v/2), ... that lowers the energy.
    """
    p = spec.p
    _require_superlinear(p)
    space = space or spec.build_space()
    if run_logger:
        run_logger.log_problem({**spec.describe(), **space.describe()})

    start = default_initial_guess(space) if u_guess is None else _check_guess(space, u_guess)
    scale = nehari_scale(space, start, p)
    u = scale * start
    if run_logger:
        run_logger.log_projection(scale, nehari_residual(space, u, p))

    current = energy(space, u, p)
    history = [current]
    iterations = 0
    halvings_total = 0
    stalled = False
    descent_converged = False
    two_lambda = np.inf
    last_halvings = 0
    message = ""

    while True:
        v, lam = descent_direction(space, u, p)
        two_lambda = 2.0 * lam
        state = IterationState(u=u, energy=current, v=v, lam=lam, halvings=last_halvings)
        if two_lambda <= spec.descent_tol:
            descent_converged = True
            break
        if iterations >= spec.max_iters:
            message = f"no convergence after {spec.max_iters} iterations (2 lambda = {two_lambda:.3e})"
            break

        step = 1.0
        accepted = False
        for halving in range(spec.max_halvings + 1):
            try:
                candidate = nehari_project(space, u + step * v, p)
                change = energy_difference(space, u, candidate, p)
            except DegenerateInputError:
                change = np.inf
            if change < 0:
                accepted = True
                last_halvings = halving
                halvings_total += halving
                break
            if run_logger:
                run_logger.log_halving(iterations + 1, step, change)
            step *= 0.5

        if not accepted:
            stalled = True
            message = (f"stalled at iteration {iterations + 1}: no energy decrease after "
                       f"{spec.max_halvings} halvings (2 lambda = {two_lambda:.3e})")
            break

        u = candidate
        current += change
        history.append(current)
        iterations += 1
        if run_logger:
            run_logger.log_iteration(iterations, current, two_lambda, step)

    if run_logger:
        outcome = 'CONVERGED' if descent_converged else ('STALLED' if stalled else 'MAX_ITERS')
        run_logger.log_event(outcome, {'iterations': iterations, 'two_lambda': two_lambda,
                                       'message': message})

    return _finish(spec, space, METHOD_MOUNTAIN_PASS, u, 1.0, run_logger,
                   energy_history=history, descent_norm=two_lambda, iterations=iterations,
                   descent_converged=descent_converged, stalled=stalled,
                   halvings=halvings_total, final_state=state, message=message)


def solve_torsion_p1(spec: ProblemSpec, space: Optional[FemSpace] = None,
                     run_logger: Optional[RunLogger] = None) -> SolveReport:
    """Torsion function: Lap u + 1 = 0, one linear solve."""
    if spec.p != 1:
        raise InvalidArgumentError(f"The torsion solver needs p = 1, got {spec.p}")
    space = space or spec.build_space()
    if run_logger:
        run_logger.log_problem({**spec.describe(), **space.describe()})

    load = space.power_load(np.zeros(space.n_nodes), 0.0)
    u = space.solve_poisson(load)
    free = space.free_nodes
    residual = float(np.linalg.norm(space.K_free @ u[free] - load[free]) / np.linalg.norm(load[free]))

    return _finish(spec, space, METHOD_TORSION, u, 1.0, run_logger,
                   energy_history=[energy(space, u, 1.0)], descent_norm=residual,
                   iterations=1, descent_converged=True)


def solve_eigen_p2(spec: ProblemSpec, space: Optional[FemSpace] = None,
                   run_logger: Optional[RunLogger] = None) -> SolveReport:
    """Principal eigenpair of K d = lambda M d by inverse iteration."""
    if spec.p != 2:
        raise InvalidArgumentError(f"The eigenvalue solver needs p = 2, got {spec.p}")
    space = space or spec.build_space()
    if run_logger:
        run_logger.log_problem({**spec.describe(), **space.describe()})

    K, M = space.K_free, space.M_free
    inner_tol = 0.01 * spec.eig_tol
    x = default_initial_guess(space)[space.free_nodes]
    x /= np.sqrt(x @ (M @ x))
    lam = float(x @ (K @ x))
    residual = np.inf
    iterations = 0

    while iterations < spec.eig_max_iters:
        y = solve_spd(K, M @ x, tol=inner_tol, x0=x / lam)
        x = y / np.sqrt(y @ (M @ y))
        if x.sum() < 0:
            x = -x
        Kx, Mx = K @ x, M @ x
        lam = float(x @ Kx) / float(x @ Mx)
        residual = float(np.linalg.norm(Kx - lam * Mx) / np.linalg.norm(x))
        iterations += 1
        if run_logger and iterations % 10 == 0:
            run_logger.log_event('EIGEN_ITERATION', {'iteration': iterations, 'lambda': lam,
                                                     'residual': residual})
        if residual <= spec.eig_tol:
            break

    converged = residual <= spec.eig_tol
    message = "" if converged else f"inverse iteration stopped at the cap of {spec.eig_max_iters}"
    if run_logger:
        run_logger.log_event('CONVERGED' if converged else 'MAX_ITERS',
                             {'iterations': iterations, 'eigenvalue': lam, 'residual': residual})

    u = np.zeros(space.n_nodes)
    u[space.free_nodes] = x
    return _finish(spec, space, METHOD_EIGEN, u, lam, run_logger,
                   energy_history=[energy(space, u, 2.0)], descent_norm=residual,
                   iterations=iterations, descent_converged=converged,
                   eigenvalue=lam / space.radius ** 2, message=message)


def solve_extremal(spec: ProblemSpec, u_guess: Optional[np.ndarray] = None,
                   space: Optional[FemSpace] = None,
                   run_logger: Optional[RunLogger] = None) -> SolveReport:
    """Dispatch on the exponent: torsion, eigenvalue or mountain pass."""
    if spec.method == METHOD_TORSION:
        return solve_torsion_p1(spec, space=space, run_logger=run_logger)
    if spec.method == METHOD_EIGEN:
        return solve_eigen_p2(spec, space=space, run_logger=run_logger)
    return mountain_pass_solve(spec, u_guess=u_guess, space=space, run_logger=run_logger)
