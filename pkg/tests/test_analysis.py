"""Normalization, distribution functions, constants and curve ordering."""

import numpy as np
import pytest

from extremals.analysis import (
    CONSISTENT, NOT_CONSISTENT, DistributionCurve, compute_Cp, compute_Lambda, constants_report,
    default_t_grid, distribution, equal_volume_radius, monotonicity_report, normalize_sup,
    scale_constant,
)
from extremals.errors import DegenerateInputError, InvalidArgumentError
from extremals.spaces import Ball, Rectangle, build_space


def sine(x, y):
    return np.sin(np.pi * x) * np.sin(np.pi * y)


# ---------------------------------------------------------------------------
# normalize_sup
# ---------------------------------------------------------------------------

def test_normalize_sup_nodal_peak(square8):
    u = 2.0 * square8.interpolate(sine)
    u_norm, a = normalize_sup(square8, u)
    assert a == pytest.approx(2.0, rel=1e-14)
    assert np.max(u_norm) == pytest.approx(1.0, rel=1e-14)
    again, b = normalize_sup(square8, u_norm)
    assert b == pytest.approx(1.0, rel=1e-14)
    np.testing.assert_allclose(again, u_norm, rtol=1e-14)


def test_normalize_sup_sees_peaks_between_nodes():
    space = build_space(Rectangle(1.0, 1.0), nx=1)
    u = space.interpolate(lambda x, y: 1.0 - (x - 0.25) ** 2 + 0 * y)
    _, a = normalize_sup(space, u)
    assert np.max(u) == pytest.approx(0.9375)
    assert a == pytest.approx(1.0, rel=1e-14)


def test_normalize_sup_rejects_zero(square8):
    with pytest.raises(DegenerateInputError):
        normalize_sup(square8, np.zeros(square8.n_nodes))


# ---------------------------------------------------------------------------
# Distribution functions
# ---------------------------------------------------------------------------

def test_disk_distribution_matches_analytic(disk64):
    u = disk64.interpolate(lambda r: 1 - r ** 2)
    t = default_t_grid()
    curve = distribution(disk64, u, t, p=1.0)
    assert np.max(np.abs(curve.mu - np.pi * (1 - t))) <= 2e-3
    assert curve.volume == pytest.approx(np.pi)


def test_scaled_ball_distribution():
    space = build_space(Ball(n=3, radius=2.0), nr=32)
    u = space.interpolate(lambda r: 1 - r ** 2)
    curve = distribution(space, u, [0.75])
    assert curve.mu[0] == pytest.approx(4 * np.pi / 3 * 0.5 ** 3 * 8.0, rel=1e-9)


def test_planar_distribution_properties(square8):
    u, _ = normalize_sup(square8, square8.interpolate(sine))
    curve = distribution(square8, u, [1e-9, 0.25, 0.5, 0.75, 0.999], p=2.0)
    assert curve.mu[0] == pytest.approx(1.0, abs=(1 / 8) ** 2 / 64)
    assert np.all(np.diff(curve.mu) <= 0)
    assert np.all(curve.mu <= curve.volume)
    assert curve.mu[-1] < 0.01
    # |{sin(pi x) sin(pi y) > 1/2}| is about 0.4
    assert 0.3 < curve.at(0.5) < 0.5
    assert len(curve.rows()) == 5 and curve.rows()[0][0] == 2.0


@pytest.mark.parametrize("grid", [[], [0.0, 0.5], [0.5, 1.0], [0.5, 0.4], [0.3, 0.3]])
def test_invalid_level_grids(square8, grid):
    with pytest.raises(InvalidArgumentError):
        distribution(square8, np.zeros(square8.n_nodes), grid)


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def test_cp_is_scale_invariant(square8):
    u = square8.interpolate(lambda x, y: x * (1 - x) * y * (1 - y) * (1 + x))
    base = compute_Cp(square8, u, 3.0)
    for c in (0.1, 10.0):
        assert compute_Cp(square8, c * u, 3.0) == pytest.approx(base, rel=1e-10)


def test_cp_rejects_zero(square8):
    with pytest.raises(DegenerateInputError):
        compute_Cp(square8, np.zeros(square8.n_nodes), 3.0)


def test_disk_torsion_constants(disk64):
    u = disk64.interpolate(lambda r: 1 - r ** 2)
    assert compute_Cp(disk64, u, 1.0) == pytest.approx(8 / np.pi, rel=1e-12)
    assert compute_Lambda(disk64, u, 1.0) == pytest.approx(4.0, rel=1e-12)
    report = constants_report(disk64, u, 1.0, a=0.25)
    assert report.Lambda_rescaled == pytest.approx(4.0)
    assert report.torsional_rigidity == pytest.approx(np.pi / 8, rel=1e-12)
    assert report.principal_frequency is None


def test_eigen_constants(square16):
    u = square16.interpolate(sine)
    Cp = compute_Cp(square16, u, 2.0)
    assert Cp == pytest.approx(2 * np.pi ** 2, rel=1e-3)
    assert compute_Lambda(square16, u, 2.0) == pytest.approx(Cp, rel=1e-14)
    report = constants_report(square16, u, 2.0, a=1.0, base_lambda=Cp)
    assert report.principal_frequency == report.Cp
    assert report.Lambda_rescaled == pytest.approx(Cp)


def test_equal_volume_radius_and_scaling():
    assert equal_volume_radius(1.0, 2) == pytest.approx(1 / np.sqrt(np.pi))
    assert equal_volume_radius(np.pi ** 2 / 2, 4) == pytest.approx(1.0)
    with pytest.raises(InvalidArgumentError):
        equal_volume_radius(0.0, 3)
    # principal frequency scales like R^-2
    assert scale_constant(5.0, 3, 2.0, 2.0) == pytest.approx(1.25)


def test_constants_follow_ball_scaling():
    R, n, p = 1.7, 3, 3.0
    unit = build_space(Ball(n=n), nr=16)
    big = build_space(Ball(n=n, radius=R), nr=16)
    u = unit.interpolate(lambda r: np.cos(np.pi * r / 2))
    assert compute_Cp(big, u, p) == pytest.approx(scale_constant(compute_Cp(unit, u, p), n, p, R), rel=1e-12)


# ---------------------------------------------------------------------------
# Monotonicity report
# ---------------------------------------------------------------------------

def _curve(p, mu, t=None, volume=1.0):
    t = np.array([0.2, 0.4, 0.6, 0.8]) if t is None else np.asarray(t)
    return DistributionCurve(p=p, t_grid=t, mu=np.asarray(mu, dtype=float), volume=volume)


def test_identical_curves_are_not_consistent():
    report = monotonicity_report([_curve(3.0, [0.8, 0.6, 0.4, 0.2]), _curve(4.0, [0.8, 0.6, 0.4, 0.2])])
    assert all(row.diff == 0.0 for row in report.rows)
    assert report.verdict == NOT_CONSISTENT
    assert len(report.violations) == 4


def test_ordered_curves_are_consistent():
    curves = [
        _curve(6.0, [0.5, 0.3, 0.1, 0.0]),
        _curve(2.5, [0.9, 0.7, 0.5, 0.3]),
        _curve(4.0, [0.7, 0.5, 0.3, 0.00001]),
    ]
    report = monotonicity_report(curves)
    assert report.verdict == CONSISTENT
    assert len(report.rows) == 3 * 4
    assert report.rows[0].p_low == 2.5 and report.rows[0].p_high == 4.0
    # the last level falls below the floor for p = 4 and p = 6 and is not counted
    skipped = [row for row in report.rows if row.p_high == 6.0 and row.t == 0.8]
    assert all(not row.counted and row.ok for row in skipped)
    assert report.rows[0].as_tuple() == (2.5, 4.0, 0.2, pytest.approx(0.2), True)


def test_violation_is_reported():
    report = monotonicity_report([_curve(3.0, [0.8, 0.6, 0.4, 0.2]), _curve(4.0, [0.7, 0.65, 0.3, 0.1])])
    assert report.verdict == NOT_CONSISTENT
    assert [row.t for row in report.violations] == [0.4]


def test_monotonicity_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        monotonicity_report([_curve(3.0, [1, 1, 1, 1])])
    with pytest.raises(InvalidArgumentError):
        monotonicity_report([_curve(3.0, [1, 1, 1, 1]), _curve(4.0, [1, 1, 1], t=[0.1, 0.2, 0.3])])
    with pytest.raises(InvalidArgumentError):
        monotonicity_report([_curve(3.0, [1, 1, 1, 1]), _curve(3.0, [1, 1, 1, 1])])
    with pytest.raises(InvalidArgumentError):
        monotonicity_report([_curve(3.0, [1, 1, 1, 1]), _curve(4.0, [1, 1, 1, 1], volume=2.0)])
