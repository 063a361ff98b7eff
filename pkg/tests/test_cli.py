"""Command-line front end: exit codes, output files and configuration layers."""

import json

import numpy as np
import pytest

from extremals import main as cli
from extremals.config import OUTPUT_DIR_ENV, build_run_config, coerce, parse_p_list
from extremals.errors import DegenerateInputError, InvalidArgumentError, NoConvergenceError
from extremals.main import EXIT_NOT_CONVERGED, EXIT_OK, EXIT_USAGE, main
from extremals.outputs import format_number, read_solution_csv


@pytest.fixture(autouse=True)
def no_output_env(monkeypatch):
    monkeypatch.delenv(OUTPUT_DIR_ENV, raising=False)


def _solve_ball(out, *extra):
    return main(['solve', '--domain', 'ball', '--n', '4', '--p', '1', '--nr', '64',
                 '-o', str(out), *extra])


# ---------------------------------------------------------------------------
# solve
# ---------------------------------------------------------------------------

def test_solve_torsion_ball(tmp_path):
    assert _solve_ball(tmp_path) == EXIT_OK
    metadata, header, table = read_solution_csv(tmp_path / 'solution.csv')
    assert header == ['r', 'u']
    assert metadata['domain'] == 'ball' and metadata['n'] == '4' and metadata['mesh'] == '64'
    assert float(metadata['Lambda']) == pytest.approx(8.0, rel=1e-7)
    row = np.flatnonzero(np.isclose(table[:, 0], 0.5, atol=1e-15))
    assert len(row) == 1
    assert table[row[0], 1] == pytest.approx(0.75, abs=1e-6)
    report = (tmp_path / 'report.csv').read_text()
    assert '# method=torsion' in report
    assert '# converged=true' in report


def test_solve_is_reproducible(tmp_path):
    assert _solve_ball(tmp_path / 'a') == EXIT_OK
    assert _solve_ball(tmp_path / 'b') == EXIT_OK
    for name in ('solution.csv', 'report.csv'):
        assert (tmp_path / 'a' / name).read_bytes() == (tmp_path / 'b' / name).read_bytes()


def test_solve_rejects_sublinear_exponent(tmp_path, capsys):
    code = main(['solve', '--domain', 'rectangle', '--p', '1.5', '-o', str(tmp_path)])
    assert code == EXIT_USAGE
    assert 'sublinear' in capsys.readouterr().err
    assert not (tmp_path / 'solution.csv').exists()


def test_solve_needs_an_exponent(tmp_path, capsys):
    assert main(['solve', '--domain', 'rectangle', '-o', str(tmp_path)]) == EXIT_USAGE
    assert 'error:' in capsys.readouterr().err


def test_solve_iteration_cap_exit_code(tmp_path):
    code = main(['solve', '--domain', 'rectangle', '--p', '3', '--nx', '4', '--max-iters', '1',
                 '-o', str(tmp_path)])
    assert code == EXIT_NOT_CONVERGED
    assert '# message=no convergence' in (tmp_path / 'report.csv').read_text()


def test_solve_failure_still_closes_run_log(tmp_path, monkeypatch):
    def degenerate_solve(spec, run_logger=None):
        raise DegenerateInputError("Cannot normalize a field with no positive values")

    monkeypatch.setattr(cli, 'solve_extremal', degenerate_solve)
    code = main(['solve', '--domain', 'ball', '--n', '2', '--p', '1', '-o', str(tmp_path)])
    assert code == EXIT_USAGE
    records = list((tmp_path / 'logs').glob('run_*.json'))
    assert len(records) == 1
    events = json.loads(records[0].read_text(encoding='utf-8'))['events']
    assert [e['type'] for e in events][-2:] == ['ERROR', 'RUN_END']
    assert events[-2]['data']['error_type'] == 'DegenerateInputError'


def test_solve_rectangle_file_layout(tmp_path):
    assert main(['solve', '--domain', 'rectangle', '--width', '2', '--p', '2', '--nx', '4',
                 '--ny', '2', '-o', str(tmp_path)]) == EXIT_OK
    metadata, header, table = read_solution_csv(tmp_path / 'solution.csv')
    assert header == ['x', 'y', 'u']
    assert metadata['mesh'] == '4x2' and metadata['width'] == '2'
    assert table.shape == (9 * 5, 3)
    assert np.max(table[:, 2]) == pytest.approx(1.0, abs=1e-3)


# ---------------------------------------------------------------------------
# sweep
# ---------------------------------------------------------------------------

def test_sweep_needs_two_exponents(tmp_path):
    code = main(['sweep', '--domain', 'ball', '--n', '2', '--p-list', '3', '-o', str(tmp_path)])
    assert code == EXIT_USAGE


def test_sweep_rejects_bad_exponent_before_solving(tmp_path):
    code = main(['sweep', '--domain', 'ball', '--n', '2', '--p-list', '3,1.5', '-o', str(tmp_path)])
    assert code == EXIT_USAGE
    assert not (tmp_path / 'summary.csv').exists()


def test_sweep_outputs(tmp_path):
    code = main(['sweep', '--domain', 'ball', '--n', '2', '--nr', '16', '--p-list', '3,2.5',
                 '--workers', '2', '-o', str(tmp_path)])
    assert code == EXIT_OK
    for name in ('solution_p2.5.csv', 'solution_p3.csv', 'distributions.csv',
                 'monotonicity.csv', 'summary.csv'):
        assert (tmp_path / name).exists(), name

    lines = (tmp_path / 'distributions.csv').read_text().splitlines()
    assert lines[0] == 'p,t,mu'
    assert len(lines) == 1 + 2 * 99
    assert lines[1].startswith('2.5,0.01,')

    summary = (tmp_path / 'summary.csv').read_text().splitlines()
    assert summary[0].startswith('p,method,converged')
    assert [line.split(',')[0] for line in summary[1:3]] == ['2.5', '3']
    assert summary[-1].startswith('# verdict=')

    monotonicity = (tmp_path / 'monotonicity.csv').read_text().splitlines()
    assert monotonicity[0].startswith('# floor=')
    assert monotonicity[1] == 'p_low,p_high,t,mu_low_minus_mu_high,ok'
    assert len(monotonicity) == 2 + 99


# ---------------------------------------------------------------------------
# verify
# ---------------------------------------------------------------------------

def test_verify_saved_solution(tmp_path):
    assert _solve_ball(tmp_path) == EXIT_OK
    out = tmp_path / 'verify'
    assert main(['verify', '--solution', str(tmp_path / 'solution.csv'), '-o', str(out)]) == EXIT_OK
    lines = (out / 'residuals.csv').read_text().splitlines()
    header = lines.index('seed,WT,WT_normalized')
    assert len(lines) - header - 1 == 20
    assert '# corrupt=false' in lines


def _residual_mean(path):
    metadata, _, _ = read_solution_csv(path)
    return float(metadata['mean'])


def test_verify_corrupted_solution_fails(tmp_path):
    assert _solve_ball(tmp_path) == EXIT_OK
    solution = str(tmp_path / 'solution.csv')
    assert main(['verify', '--solution', solution, '-o', str(tmp_path / 'clean')]) == EXIT_OK
    code = main(['verify', '--solution', solution, '--corrupt', '-o', str(tmp_path / 'verify')])
    assert code == EXIT_NOT_CONVERGED
    assert '# corrupt=true' in (tmp_path / 'verify' / 'residuals.csv').read_text()
    clean = _residual_mean(tmp_path / 'clean' / 'residuals.csv')
    assert _residual_mean(tmp_path / 'verify' / 'residuals.csv') >= 100 * clean


def test_verify_missing_file(tmp_path, capsys):
    code = main(['verify', '--solution', str(tmp_path / 'missing.csv'), '-o', str(tmp_path)])
    assert code == EXIT_USAGE
    assert 'not found' in capsys.readouterr().err


@pytest.mark.parametrize("text", [
    "# domain=ball\n",
    "# domain=ball\n# n=4\nr,u\n0.0,abc\n",
])
def test_verify_garbled_file(tmp_path, capsys, text):
    path = tmp_path / 'solution.csv'
    path.write_text(text)
    assert main(['verify', '--solution', str(path), '-o', str(tmp_path)]) == EXIT_USAGE
    assert 'error:' in capsys.readouterr().err


def test_verify_inline_solver_failure(tmp_path, monkeypatch):
    def failing_solve(spec):
        raise NoConvergenceError("Conjugate gradients did not converge", 0.5, 10)

    monkeypatch.setattr(cli, 'solve_extremal', failing_solve)
    code = main(['verify', '--domain', 'ball', '--n', '2', '--p', '1', '-o', str(tmp_path)])
    assert code == EXIT_NOT_CONVERGED
    assert not (tmp_path / 'residuals.csv').exists()


def test_verify_inline_solve(tmp_path):
    code = main(['verify', '--domain', 'ball', '--n', '3', '--p', '1', '--nr', '32',
                 '--n-tests', '5', '-o', str(tmp_path)])
    assert code == EXIT_OK
    assert '# count=5' in (tmp_path / 'residuals.csv').read_text()


def test_verify_rejects_mismatched_file(tmp_path):
    assert _solve_ball(tmp_path) == EXIT_OK
    path = tmp_path / 'solution.csv'
    path.write_text(path.read_text().replace('# mesh=64', '# mesh=32'))
    assert main(['verify', '--solution', str(path), '-o', str(tmp_path)]) == EXIT_USAGE


# ---------------------------------------------------------------------------
# configuration layers
# ---------------------------------------------------------------------------

def test_preset_values():
    config = build_run_config('sweep', {'preset': 'ball4'})
    assert (config.domain, config.n, config.nr, config.grading) == ('ball', 4, 256, 2.0)
    assert config.exponents == [2.5, 3.0, 3.5, 3.8]


def test_config_file_between_preset_and_flags(tmp_path):
    path = tmp_path / 'run.cfg'
    path.write_text("# experiment\npreset=square\nnx=8\nny=8\np_list=3, 4\nseed=7\n")
    config = build_run_config('sweep', {'nx': 4}, config_file=path)
    assert config.preset == 'square'
    assert config.nx == 4 and config.ny == 8
    assert config.p_list == [3.0, 4.0]
    assert config.seed == 7
    assert config.problem_specs()[0].nx == 4


def test_output_dir_environment(tmp_path, monkeypatch):
    monkeypatch.setenv(OUTPUT_DIR_ENV, str(tmp_path / 'env'))
    assert build_run_config('solve', {}).output_dir == str(tmp_path / 'env')
    assert build_run_config('solve', {'output_dir': 'flag'}).output_dir == 'flag'
    assert main(['solve', '--domain', 'ball', '--n', '2', '--p', '1', '--nr', '8']) == EXIT_OK
    assert (tmp_path / 'env' / 'solution.csv').exists()


def test_config_file_via_cli(tmp_path):
    path = tmp_path / 'ball.cfg'
    path.write_text("domain=ball\nn=3\np=1\nnr=32\n")
    assert main(['solve', '--config', str(path), '--nr', '16', '-o', str(tmp_path)]) == EXIT_OK
    metadata, _, _ = read_solution_csv(tmp_path / 'solution.csv')
    assert metadata['n'] == '3' and metadata['mesh'] == '16'


@pytest.mark.parametrize("flags, config_file", [
    ({'preset': 'nope'}, None),
    ({'workers': 0}, None),
    ({}, 'missing.cfg'),
])
def test_bad_configuration(tmp_path, flags, config_file):
    with pytest.raises(InvalidArgumentError):
        build_run_config('sweep', flags, config_file=tmp_path / config_file if config_file else None)


def test_value_parsing():
    assert parse_p_list('2.5, 3,4') == [2.5, 3.0, 4.0]
    assert coerce('corrupt', 'yes') is True
    assert coerce('nx', '12') == 12
    with pytest.raises(InvalidArgumentError):
        parse_p_list('2,x')
    with pytest.raises(InvalidArgumentError):
        coerce('colour', 'red')
    with pytest.raises(InvalidArgumentError):
        coerce('nx', 'many')


def test_number_format():
    assert format_number(0.1) == '0.10000000000000001'
    assert format_number(True) == 'true'
    assert format_number(np.int64(3)) == '3'
    assert float(format_number(np.pi)) == np.pi
