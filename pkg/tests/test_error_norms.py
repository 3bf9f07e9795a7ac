from dataclasses import replace

import numpy as np
import pytest

from assembly import integration_cells
from error_norms import compute_errors
from fe_space import lagrange_interpolate
from quadrature import map_to_triangles, quadrature_rule


def _refine(tris):
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    ab, bc, ca = 0.5 * (a + b), 0.5 * (b + c), 0.5 * (c + a)
    children = [np.stack(t, axis=1) for t in ((a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca))]
    return np.concatenate(children, axis=0)


@pytest.mark.parametrize('p', [1, 2, 3])
def test_interpolant_of_polynomial_is_exact(problem_factory, p):
    s = problem_factory('halfplane', 8, p)
    coeffs = lagrange_interpolate(s.space, s.problem.u)
    errors = compute_errors(s.space, coeffs, s.problem, s.topology, taylor_order=1)
    for key in ('l2', 'h1_semi', 'trace', 'triple', 'star'):
        assert errors[key] <= 1e-10


def test_zero_solution_gives_norm_of_u(circle16):
    s = circle16
    errors = compute_errors(s.space, np.zeros(s.space.num_dofs), s.problem, s.topology)

    corners, _ = integration_cells(s.mesh, s.topology)
    fine = _refine(_refine(corners))
    points, weights = map_to_triangles(quadrature_rule('triangle', 10), fine)
    reference = np.sqrt(np.sum(weights * s.problem.u(points) ** 2))
    assert errors['l2'] == pytest.approx(reference, rel=1e-3)


def test_errors_are_nonnegative_and_ordered(circle16):
    s = circle16
    coeffs = lagrange_interpolate(s.space, s.problem.u) + 1e-3
    errors = compute_errors(s.space, coeffs, s.problem, s.topology)
    assert all(v >= 0 for v in errors.values())
    assert errors['triple'] >= errors['h1_semi']
    assert errors['star'] > 0


def test_wrong_coefficient_length(circle16):
    with pytest.raises(ValueError):
        compute_errors(circle16.space, np.zeros(3), circle16.problem, circle16.topology)


def test_interpolation_error_is_third_order(problem_factory):
    l2 = []
    for n in (32, 64):
        s = problem_factory('circle', n, 2)
        coeffs = lagrange_interpolate(s.space, s.problem.u)
        l2.append(compute_errors(s.space, coeffs, s.problem, s.topology)['l2'])
    assert 6.0 <= l2[0] / l2[1] <= 10.0


def test_errors_ignore_dof_numbering(circle16):
    s = circle16
    rng = np.random.default_rng(5)
    coeffs = lagrange_interpolate(s.space, s.problem.u) + 1e-3 * rng.standard_normal(s.space.num_dofs)

    perm = rng.permutation(s.space.num_dofs)
    order = np.argsort(perm)
    element_dofs = np.where(s.space.element_dofs >= 0, perm[s.space.element_dofs], -1)
    renumbered = replace(s.space, element_dofs=element_dofs, dof_coordinates=s.space.dof_coordinates[order])

    expected = compute_errors(s.space, coeffs, s.problem, s.topology)
    errors = compute_errors(renumbered, coeffs[order], s.problem, s.topology)
    for key, value in expected.items():
        assert errors[key] == pytest.approx(value, rel=1e-10), key
