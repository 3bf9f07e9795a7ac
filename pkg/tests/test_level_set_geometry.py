import numpy as np
import pytest
from scipy.optimize import brentq

from level_set_geometry import (GeometryError, RayRootConfig, RootFindError, eval_phi, find_zero_along,
                                flower_angle, grad_phi, make_case)


def test_signs():
    circle = make_case('circle')
    assert eval_phi(circle, [0.0, 0.0]) == pytest.approx(-1.0)
    assert eval_phi(circle, [2.0, 0.0]) == pytest.approx(1.0)

    annulus = make_case('annulus')
    assert eval_phi(annulus, [0.5, 0.0]) < 0
    assert eval_phi(annulus, [0.0, 0.0]) > 0
    assert eval_phi(annulus, [0.9, 0.0]) > 0

    flower = make_case('flower')
    assert eval_phi(flower, [0.0, 0.0]) > 0
    assert eval_phi(flower, [np.sqrt(0.3), 0.0]) < 0

    halfplane = make_case('halfplane')
    assert eval_phi(halfplane, [0.0, 5.0]) == pytest.approx(-0.63)


def test_vectorized_shape():
    pts = np.zeros((4, 3, 2))
    assert eval_phi(make_case('circle'), pts).shape == (4, 3)


def test_flower_angle_on_axis():
    assert flower_angle(0.3, 0.0) == 0.0
    assert flower_angle(1.0, 1.0) == pytest.approx(np.pi / 4)


def test_unknown_case():
    with pytest.raises(GeometryError):
        make_case('ellipse')


def test_grad_circle_and_origin():
    circle = make_case('circle')
    assert np.allclose(grad_phi(circle, [0.6, 0.8]), [0.6, 0.8])
    with pytest.raises(GeometryError):
        grad_phi(circle, [0.0, 0.0])


@pytest.mark.parametrize('case_id', ['circle', 'annulus', 'flower'])
def test_grad_matches_finite_differences(case_id):
    case = make_case(case_id)
    rng = np.random.default_rng(3)
    pts = rng.uniform(0.3, 0.8, size=(20, 2))
    eps = 1e-5
    for x in pts:
        fd = np.array([(eval_phi(case, x + eps * e) - eval_phi(case, x - eps * e)) / (2 * eps)
                       for e in np.eye(2)])
        assert np.allclose(grad_phi(case, x), fd, rtol=1e-5, atol=1e-7)


def test_find_zero_circle():
    circle = make_case('circle')
    assert find_zero_along(circle, [0.9, 0.0], [1.0, 0.0]) == pytest.approx(0.1, abs=1e-10)
    assert find_zero_along(circle, [1.1, 0.0], [1.0, 0.0]) == pytest.approx(-0.1, abs=1e-10)
    assert find_zero_along(circle, [1.0, 0.0], [0.0, 1.0]) == 0.0


@pytest.mark.parametrize('case_id', ['circle', 'annulus', 'flower'])
def test_find_zero_matches_bisection(case_id):
    case = make_case(case_id)
    rng = np.random.default_rng(7)
    cfg = RayRootConfig(smax=0.25)
    checked = 0
    for _ in range(200):
        angle = rng.uniform(0, 2 * np.pi)
        d = np.array([np.cos(angle), np.sin(angle)])
        x = rng.uniform(-1.0, 1.0, size=2)
        try:
            s = find_zero_along(case, x, d, cfg)
        except RootFindError:
            continue
        assert abs(eval_phi(case, x + s * d)) <= 1e-10
        if case_id == 'circle':
            # no sign change strictly between x and the returned root
            grid = np.linspace(0.0, s, 200)[:-1]
            signs = np.sign([eval_phi(case, x + t * d) for t in grid])
            assert np.all(signs == signs[0])
        f = lambda t: eval_phi(case, x + t * d)
        if f(s - 1e-6) * f(s + 1e-6) < 0:
            assert s == pytest.approx(brentq(f, s - 1e-6, s + 1e-6, xtol=1e-15), abs=1e-10)
        checked += 1
    assert checked > 0


def test_no_root_raises():
    circle = make_case('circle')
    with pytest.raises(RootFindError) as err:
        find_zero_along(circle, [0.0, 0.0], [1.0, 0.0], RayRootConfig(smax=0.25))
    assert np.allclose(err.value.point, [0.0, 0.0])


def test_direction_must_be_unit():
    with pytest.raises(GeometryError):
        find_zero_along(make_case('circle'), [0.9, 0.0], [2.0, 0.0])
