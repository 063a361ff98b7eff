"""Radial elements on the unit n-ball."""

import numpy as np
import pytest

from extremals.errors import InvalidArgumentError
from extremals.radial_fem import (
    assemble_radial, build_radial_mesh, evaluate_radial, integrate_radial, interpolate_radial,
    radial_value_and_measure, unit_ball_volume,
)
from extremals.spaces import FemSpace


def test_unit_ball_volume():
    assert unit_ball_volume(2) == pytest.approx(np.pi, rel=1e-15)
    assert unit_ball_volume(3) == pytest.approx(4 * np.pi / 3, rel=1e-15)
    assert unit_ball_volume(4) == pytest.approx(np.pi ** 2 / 2, rel=1e-15)


def test_mesh_layout():
    mesh = build_radial_mesh(3, 10)
    assert mesh.n_nodes == 21
    assert mesh.node_coords[0] == 0.0 and mesh.node_coords[-1] == 1.0
    assert list(mesh.boundary_nodes) == [20]
    assert len(mesh.free_nodes) == 20
    np.testing.assert_allclose(mesh.element_lengths, 0.1)


def test_graded_mesh_refines_the_center():
    mesh = build_radial_mesh(4, 8, grading=2.0)
    np.testing.assert_allclose(mesh.vertices, (np.arange(9) / 8) ** 2)
    assert np.all(np.diff(mesh.element_lengths) > 0)
    np.testing.assert_allclose(mesh.node_coords[1::2], 0.5 * (mesh.vertices[:-1] + mesh.vertices[1:]))


@pytest.mark.parametrize("args", [(1, 8), (2, 0), (3, 4, 0.5)])
def test_invalid_mesh_arguments(args):
    with pytest.raises(InvalidArgumentError):
        build_radial_mesh(*args)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_weighted_matrices(n):
    mesh = build_radial_mesh(n, 16)
    K = assemble_radial(mesh, 'stiffness')
    M = assemble_radial(mesh, 'mass')
    ones = np.ones(mesh.n_nodes)
    assert np.max(np.abs(K @ ones)) < 1e-12
    assert ones @ (M @ ones) == pytest.approx(1.0 / n, rel=1e-13)
    load = assemble_radial(mesh, 'power-load', u=np.zeros(mesh.n_nodes), q=0.0)
    assert load.sum() == pytest.approx(1.0 / n, rel=1e-13)


def test_assemble_radial_rejects_unknown_kind():
    mesh = build_radial_mesh(2, 4)
    with pytest.raises(InvalidArgumentError):
        assemble_radial(mesh, 'damping')
    with pytest.raises(InvalidArgumentError):
        assemble_radial(mesh, 'power-load')


@pytest.mark.parametrize("n", [2, 3, 4])
def test_weighted_integrals_of_torsion_profile(n):
    mesh = build_radial_mesh(n, 8)
    u = interpolate_radial(mesh, lambda r: 1 - r ** 2)
    # integral of (2r)^2 r^(n-1) and of (1 - r^2) r^(n-1) over [0, 1]
    assert integrate_radial(mesh, u, 'dirichlet-energy') == pytest.approx(4.0 / (n + 2), rel=1e-13)
    assert integrate_radial(mesh, u, 'p-norm-power', 1) == pytest.approx(2.0 / (n * (n + 2)), rel=1e-13)


@pytest.mark.parametrize("grading", [1.0, 2.0])
def test_torsion_solve_is_exact(grading):
    n = 4
    space = FemSpace(build_radial_mesh(n, 12, grading=grading))
    u = space.solve_poisson(space.power_load(np.zeros(space.n_nodes), 0.0))
    exact = (1 - space.mesh.node_coords ** 2) / (2 * n)
    np.testing.assert_allclose(u, exact, atol=1e-9)


def test_evaluate_radial_reproduces_quadratics():
    mesh = build_radial_mesh(3, 5, grading=1.5)
    u = interpolate_radial(mesh, lambda r: 1 - r ** 2)
    r = np.linspace(0, 1, 37)
    np.testing.assert_allclose(evaluate_radial(mesh, u, r), 1 - r ** 2, atol=1e-14)


def test_superlevel_radius_and_measure():
    mesh = build_radial_mesh(4, 16)
    u = interpolate_radial(mesh, lambda r: 1 - r ** 2)
    r_star, measure = radial_value_and_measure(mesh, u, 0.75)
    assert r_star == pytest.approx(0.5, abs=1e-12)
    assert measure == pytest.approx(unit_ball_volume(4) * 0.5 ** 4, rel=1e-10)
    with pytest.raises(InvalidArgumentError):
        radial_value_and_measure(mesh, u, 1.0)
