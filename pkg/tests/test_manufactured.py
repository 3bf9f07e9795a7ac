import numpy as np
import pytest

from level_set_geometry import eval_phi
from manufactured import ManufacturedDataError, make_manufactured


def _inside_points(problem, count=100, seed=4):
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < count:
        x = rng.uniform(-1.0, 1.0, size=2)
        if eval_phi(problem.level_set, x) < -1e-3:
            pts.append(x)
    return np.array(pts)


def _laplacian(u, x, step=1e-3):
    total = 0.0
    for e in np.eye(2):
        total += (-u(x + 2 * step * e) + 16 * u(x + step * e) - 30 * u(x)
                  + 16 * u(x - step * e) - u(x - 2 * step * e)) / (12 * step ** 2)
    return total


@pytest.mark.parametrize('case_id,degree', [('circle', 2), ('annulus', 2), ('flower', 2),
                                            ('halfplane', 1), ('halfplane', 2), ('halfplane', 3)])
def test_source_is_minus_laplacian(case_id, degree):
    problem = make_manufactured(case_id, degree)
    pts = _inside_points(problem)
    for x in pts:
        f = float(problem.f(x))
        assert -_laplacian(problem.u, x) == pytest.approx(f, abs=1e-5 * max(1.0, abs(f)))


@pytest.mark.parametrize('case_id', ['circle', 'annulus', 'flower', 'halfplane'])
def test_gradient_matches_finite_differences(case_id):
    problem = make_manufactured(case_id, 3)
    eps = 1e-6
    for x in _inside_points(problem, count=20):
        fd = np.array([(problem.u(x + eps * e) - problem.u(x - eps * e)) / (2 * eps) for e in np.eye(2)])
        assert np.allclose(problem.grad_u(x), fd, rtol=1e-6, atol=1e-7)


def test_boundary_data_is_trace_of_u():
    problem = make_manufactured('flower')
    x = np.array([[0.3, 0.2], [-0.5, 0.1]])
    assert np.array_equal(problem.g(x), problem.u(x))


def test_annulus_source_guarded_near_origin():
    problem = make_manufactured('annulus')
    with pytest.raises(ManufacturedDataError):
        problem.f(np.array([[0.01, 0.0]]))


def test_vectorized_shapes():
    problem = make_manufactured('circle')
    pts = np.zeros((3, 4, 2)) + 0.1
    assert problem.u(pts).shape == (3, 4)
    assert problem.grad_u(pts).shape == (3, 4, 2)
    assert problem.f(pts).shape == (3, 4)


def test_unknown_case():
    with pytest.raises(ManufacturedDataError):
        make_manufactured('sphere')
