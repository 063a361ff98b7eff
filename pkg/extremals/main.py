"""Extremal Sobolev functions - command-line entry point.

Usage:
    python -m extremals.main solve --domain ball --n 4 --p 1
    python -m extremals.main solve --preset square --p 4 --output-dir results/square_p4
    python -m extremals.main sweep --preset ball4 --workers 4
    python -m extremals.main verify --solution results/solution.csv --corrupt

Exit codes: 0 ok, 1 no convergence (or failed residual test), 2 usage error.
"""

import sys
import argparse
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Dict, List, Optional, Tuple

# Add parent directory for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

import numpy as np
from dotenv import load_dotenv

from extremals.analysis import DistributionCurve, default_t_grid, distribution, monotonicity_report
from extremals.config import PRESETS, RunConfig, build_run_config
from extremals.errors import ExtremalsError, InvalidArgumentError, NoConvergenceError
from extremals.logger import RunLogger, log_function_call, system_log
from extremals.mountain_pass import ProblemSpec, SolveReport, solve_extremal
from extremals.outputs import format_number, read_solution_csv, render_csv, write_csv, write_text_atomic
from extremals.spaces import Ball, FemSpace, Rectangle, build_space
from extremals.verify import residual_report

EXIT_OK = 0
EXIT_NOT_CONVERGED = 1
EXIT_USAGE = 2


# ==================== SOLUTION FILES ====================

def solution_comments(report: SolveReport) -> List[str]:
    spec, space = report.spec, report.space
    domain = spec.domain
    comments = [
        f"domain={'ball' if isinstance(domain, Ball) else 'rectangle'}",
        f"p={format_number(float(spec.p))}",
        f"n={space.n}",
        f"Cp={format_number(report.Cp)}",
        f"Lambda={format_number(report.Lambda)}",
    ]
    if space.is_radial:
        comments += [f"mesh={space.mesh.nr}",
                     f"grading={format_number(float(spec.grading))}",
                     f"radius={format_number(float(domain.radius))}"]
    else:
        comments += [f"mesh={space.mesh.nx}x{space.mesh.ny}",
                     f"width={format_number(float(domain.width))}",
                     f"height={format_number(float(domain.height))}"]
    return comments


def write_solution(filepath: Path, report: SolveReport) -> Path:
    """solution.csv: one row per node, x,y,u or r,u with u sup-normalized."""
    coords = report.space.coordinates()
    if report.space.is_radial:
        header = ['r', 'u']
    else:
        header = ['x', 'y', 'u']
    rows = (tuple(c) + (value,) for c, value in zip(coords, report.u))
    return write_csv(filepath, header, rows, solution_comments(report))


def write_report(filepath: Path, report: SolveReport) -> Path:
    """report.csv: convergence and residual summary, then the energy history."""
    comments = [
        f"method={report.method}",
        f"converged={format_number(report.converged)}",
        f"stalled={format_number(report.stalled)}",
        f"iterations={report.iterations}",
        f"descent_norm={format_number(report.descent_norm)}",
        f"residual_mean={format_number(report.residuals.mean_normalized)}",
        f"residual_max={format_number(report.residuals.max_normalized)}",
        f"Cp={format_number(report.Cp)}",
        f"Lambda={format_number(report.Lambda)}",
        f"Lambda_rescaled={format_number(report.constants.Lambda_rescaled)}",
    ]
    if report.message:
        comments.append(f"message={report.message}")
    rows = ((k, e) for k, e in enumerate(report.energy_history))
    return write_csv(filepath, ['iteration', 'energy'], rows, comments)


def load_solution(filepath: Path) -> Tuple[FemSpace, np.ndarray, float, float]:
    """Rebuild the mesh described by a solution.csv and return (space, u, p, Lambda)."""
    metadata, header, table = read_solution_csv(filepath)
    try:
        p = float(metadata['p'])
        Lambda = float(metadata['Lambda'])
        if metadata['domain'] == 'ball':
            space = build_space(Ball(n=int(metadata['n']), radius=float(metadata['radius'])),
                                nr=int(metadata['mesh']),
                                grading=float(metadata.get('grading', 1.0)))
        else:
            nx, ny = (int(v) for v in metadata['mesh'].split('x'))
            space = build_space(Rectangle(float(metadata['width']), float(metadata['height'])),
                                nx=nx, ny=ny)
    except (KeyError, ValueError) as e:
        raise InvalidArgumentError(f"Malformed solution file {filepath}: {e}")

    if table.shape[0] != space.n_nodes or header[-1] != 'u':
        raise InvalidArgumentError(f"{filepath} does not match its declared mesh")
    coords = table[:, :-1]
    if not np.allclose(coords, space.coordinates(), rtol=0.0, atol=1e-12):
        raise InvalidArgumentError(f"{filepath}: node coordinates do not match the mesh")
    return space, table[:, -1], p, Lambda


def _p_label(p: float) -> str:
    return format(p, 'g')


# ==================== COMMANDS ====================

def _run_logger(config: RunConfig, run_id: Optional[str] = None) -> RunLogger:
    return RunLogger(config.output_path() / 'logs', run_id=run_id)


@log_function_call
def cmd_solve(config: RunConfig) -> int:
    """Solve one problem and write solution.csv and report.csv."""
    spec = config.problem_specs()[0]
    out = config.output_path()
    run_logger = _run_logger(config)

    try:
        report = solve_extremal(spec, run_logger=run_logger)
    except NoConvergenceError as e:
        run_logger.log_error('NoConvergenceError', str(e), {'last_residual': e.last_residual})
        run_logger.end_run({'converged': False})
        print(f"Linear solver failed: {e}", file=sys.stderr)
        return EXIT_NOT_CONVERGED
    except ExtremalsError as e:
        run_logger.log_error(type(e).__name__, str(e))
        run_logger.end_run({'converged': False})
        raise

    write_solution(out / 'solution.csv', report)
    write_report(out / 'report.csv', report)
    run_logger.end_run(report.summary())

    print(f"{report.method} p={_p_label(spec.p)} on {spec.domain.label()}")
    print(f"  converged:  {report.converged}  (iterations {report.iterations}, "
          f"descent norm {report.descent_norm:.3e})")
    print(f"  C_p = {report.Cp:.12g}   Lambda = {report.Lambda:.12g}")
    print(f"  residual:   mean {report.residuals.mean_normalized:.3e}  "
          f"max {report.residuals.max_normalized:.3e}")
    if report.message:
        print(f"  {report.message}")
    print(f"  wrote {out / 'solution.csv'} and {out / 'report.csv'}")
    return EXIT_OK if report.converged else EXIT_NOT_CONVERGED


@dataclass
class SweepItem:
    """Result of one exponent in a sweep; report is None when the solve raised."""
    p: float
    report: Optional[SolveReport] = None
    error: str = ""

    @property
    def converged(self) -> bool:
        return self.report is not None and self.report.converged


def _sweep_one(spec: ProblemSpec, out: Path, stamp: str) -> SweepItem:
    run_logger = RunLogger(out / 'logs', run_id=f"{stamp}_p{_p_label(spec.p)}")
    try:
        report = solve_extremal(spec, run_logger=run_logger)
    except ExtremalsError as e:
        run_logger.log_error(type(e).__name__, str(e))
        run_logger.end_run({'converged': False})
        system_log.warning(f"sweep item p={spec.p:g} failed: {e}")
        return SweepItem(spec.p, error=str(e))
    write_solution(out / f"solution_p{_p_label(spec.p)}.csv", report)
    run_logger.end_run(report.summary())
    return SweepItem(spec.p, report=report)


def write_summary(filepath: Path, items: List[SweepItem], verdict: str) -> Path:
    """summary.csv with the verdict as a trailing comment line."""
    header = ['p', 'method', 'converged', 'iterations', 'descent_norm', 'Cp', 'Lambda',
              'residual_mean']
    rows = []
    for item in items:
        r = item.report
        if r is None:
            rows.append((item.p, 'failed', False, 0, np.nan, np.nan, np.nan, np.nan))
        else:
            rows.append((item.p, r.method, r.converged, r.iterations, r.descent_norm,
                         r.Cp, r.Lambda, r.residuals.mean_normalized))
    text = render_csv(header, rows) + f"# verdict={verdict}\n"
    write_text_atomic(filepath, text)
    return filepath


@log_function_call
def cmd_sweep(config: RunConfig) -> int:
    """Solve every exponent of the list and compare the distribution functions."""
    specs = config.problem_specs()
    out = config.output_path()
    stamp = datetime.now().strftime("%Y%m%d_%H%M%S_%f")

    print(f"Sweep over p = {', '.join(_p_label(s.p) for s in specs)} "
          f"on {specs[0].domain.label()} ({config.workers} worker(s))")

    results: Dict[float, SweepItem] = {}
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        futures = {pool.submit(_sweep_one, spec, out, stamp): spec for spec in specs}
        for future in as_completed(futures):
            item = future.result()
            results[item.p] = item
            status = "converged" if item.converged else f"NOT converged {item.error}".strip()
            print(f"  p={_p_label(item.p)}: {status}")

    items = [results[spec.p] for spec in specs]
    t_grid = default_t_grid()
    curves: Dict[float, DistributionCurve] = {
        item.p: distribution(item.report.space, item.report.u, t_grid, p=item.p)
        for item in items if item.report is not None
    }
    write_csv(out / 'distributions.csv', ['p', 't', 'mu'],
              [row for curve in curves.values() for row in curve.rows()])

    ordered = [curves[item.p] for item in items if item.converged]
    monotonicity_header = ['p_low', 'p_high', 't', 'mu_low_minus_mu_high', 'ok']
    if len(ordered) >= 2:
        monotonicity = monotonicity_report(ordered)
        verdict = monotonicity.verdict
        write_csv(out / 'monotonicity.csv', monotonicity_header,
                  [row.as_tuple() for row in monotonicity.rows],
                  [f"floor={format_number(monotonicity.floor)}"])
        violations = len(monotonicity.violations)
    else:
        verdict = "NOT-CONSISTENT"
        write_csv(out / 'monotonicity.csv', monotonicity_header, [])
        violations = 0

    write_summary(out / 'summary.csv', items, verdict)
    system_log.info(f"sweep {[s.p for s in specs]}: verdict={verdict} violations={violations}")
    print(f"Verdict: {verdict} ({violations} violation(s)); wrote {out}")
    return EXIT_OK if all(item.converged for item in items) else EXIT_NOT_CONVERGED


@log_function_call
def cmd_verify(config: RunConfig) -> int:
    """Weak residual test of a saved solution or of an inline solve."""
    out = config.output_path()
    if config.solution:
        try:
            space, u, p, Lambda = load_solution(Path(config.solution))
        except (FileNotFoundError, ValueError) as e:
            # missing, truncated or garbled file
            print(f"error: {e}", file=sys.stderr)
            system_log.warning(str(e))
            return EXIT_USAGE
        seed, n_tests, tol = config.seed, config.n_tests, config.residual_tol
    else:
        spec = config.problem_specs()[0]
        try:
            report = solve_extremal(spec)
        except NoConvergenceError as e:
            print(f"Linear solver failed: {e}", file=sys.stderr)
            system_log.warning(f"verify: inline solve failed: {e}")
            return EXIT_NOT_CONVERGED
        space, u, p = report.space, report.u, spec.p
        Lambda = report.constants.Lambda_rescaled
        seed, n_tests, tol = spec.seed, spec.n_tests, spec.residual_tol

    if config.corrupt:
        u = u * u
    residuals = residual_report(space, u, Lambda, p, seed=seed, n_tests=n_tests)
    comments = [
        f"p={format_number(float(p))}",
        f"Lambda={format_number(float(Lambda))}",
        f"corrupt={format_number(config.corrupt)}",
        f"count={residuals.count}",
        f"mean={format_number(residuals.mean_normalized)}",
        f"max={format_number(residuals.max_normalized)}",
    ]
    rows = zip(residuals.seeds, residuals.values, residuals.normalized)
    write_csv(out / 'residuals.csv', ['seed', 'WT', 'WT_normalized'], rows, comments)

    passed = residuals.passed(tol)
    print(f"Weak residual over {residuals.count} test functions: "
          f"mean {residuals.mean_normalized:.3e}, max {residuals.max_normalized:.3e} "
          f"({'passed' if passed else 'FAILED'}, tolerance {tol:g})")
    return EXIT_OK if passed else EXIT_NOT_CONVERGED


COMMANDS = {
    'solve': cmd_solve,
    'sweep': cmd_sweep,
    'verify': cmd_verify,
}


# ==================== ARGUMENTS ====================

def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument('--config', help='key=value configuration file')
    parser.add_argument('--preset', choices=sorted(PRESETS), help='Experiment preset')
    parser.add_argument('--domain', choices=['rectangle', 'ball'], help='Domain type')
    parser.add_argument('--width', type=float, help='Rectangle width')
    parser.add_argument('--height', type=float, help='Rectangle height')
    parser.add_argument('--n', type=int, help='Ball dimension')
    parser.add_argument('--radius', type=float, help='Ball radius')
    parser.add_argument('--nx', type=int, help='Elements along x')
    parser.add_argument('--ny', type=int, help='Elements along y')
    parser.add_argument('--nr', type=int, help='Radial elements')
    parser.add_argument('--grading', type=float, help='Radial mesh grading exponent (>= 1)')
    parser.add_argument('--descent-tol', dest='descent_tol', type=float,
                        help='Stop when 2*lambda falls below this')
    parser.add_argument('--max-iters', dest='max_iters', type=int, help='Mountain-pass iteration cap')
    parser.add_argument('--max-halvings', dest='max_halvings', type=int, help='Step halvings per iteration')
    parser.add_argument('--cg-tol', dest='cg_tol', type=float, help='Relative CG tolerance')
    parser.add_argument('--eig-tol', dest='eig_tol', type=float, help='Eigen residual tolerance')
    parser.add_argument('--seed', type=int, help='First seed of the random test functions')
    parser.add_argument('--n-tests', dest='n_tests', type=int, help='Number of random test functions')
    parser.add_argument('--residual-tol', dest='residual_tol', type=float,
                        help='Mean normalized residual accepted as a pass')
    parser.add_argument('--output-dir', '-o', dest='output_dir', help='Directory for CSV outputs')


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Extremal Sobolev functions - mountain-pass and linear solvers"
    )
    sub = parser.add_subparsers(dest='command', required=True)

    solve = sub.add_parser('solve', help='Solve for one exponent')
    _add_common(solve)
    solve.add_argument('--p', type=float, help='Exponent (1, 2 or > 2)')

    sweep = sub.add_parser('sweep', help='Solve a list of exponents and compare distributions')
    _add_common(sweep)
    sweep.add_argument('--p-list', dest='p_list', help='Comma-separated exponents')
    sweep.add_argument('--workers', type=int, help='Concurrent solves')

    verify = sub.add_parser('verify', help='Weak residual test of a solution')
    _add_common(verify)
    verify.add_argument('--p', type=float, help='Exponent for an inline solve')
    verify.add_argument('--solution', help='solution.csv written by solve')
    verify.add_argument('--corrupt', action='store_true', default=None,
                        help='Square the field first (negative control)')
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)

    flags = {k: v for k, v in vars(args).items() if k not in ('command', 'config')}
    try:
        config = build_run_config(args.command, flags, config_file=args.config)
        return COMMANDS[args.command](config)
    except InvalidArgumentError as e:
        print(f"error: {e}", file=sys.stderr)
        system_log.warning(f"usage error in {args.command}: {e}")
        return EXIT_USAGE
    except Exception as e:
        system_log.error(f"{args.command} failed: {e}", exc_info=True)
        raise


if __name__ == "__main__":
    sys.exit(main())
