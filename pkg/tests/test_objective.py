import numpy as np
import pytest

from onlinemedian.errors import DegenerateSampleError
from onlinemedian.objective import grad_g, hessian_g, loss_g


def _random_pair(rng, p=None, min_gap=0.1):
    p = p or int(rng.integers(2, 11))
    while True:
        x = rng.normal(scale=2.0, size=p)
        h = rng.normal(scale=2.0, size=p)
        if np.linalg.norm(x - h) > min_gap:
            return x, h


def test_loss_values():
    assert loss_g(np.array([1.0, 0.0]), np.zeros(2)) == 0.0
    assert loss_g(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == -1.0
    assert loss_g(np.array([3.0, 4.0]), np.array([0.0, 4.0])) == pytest.approx(-2.0, abs=1e-15)


def test_grad_values():
    g = grad_g(np.array([1.0, 0.0]), np.zeros(2))
    np.testing.assert_allclose(g.grad, [-1.0, 0.0])
    assert g.degenerate is False
    np.testing.assert_allclose(grad_g(np.array([3.0, 4.0]), np.zeros(2)).grad, [-0.6, -0.8], atol=1e-15)


def test_grad_coincidence_is_flagged():
    x = np.array([0.3, -1.2])
    g = grad_g(x, x.copy())
    assert g.degenerate is True
    np.testing.assert_array_equal(g.grad, np.zeros(2))


def test_grad_norm_is_zero_or_one(rng):
    xs = rng.standard_normal((200, 5))
    hs = rng.standard_normal((200, 5))
    hs[:10] = xs[:10]
    g = grad_g(xs, hs)
    norms = np.linalg.norm(g.grad, axis=-1)
    assert np.all(g.degenerate[:10]) and not np.any(g.degenerate[10:])
    np.testing.assert_allclose(norms[10:], 1.0, atol=1e-12)
    np.testing.assert_array_equal(norms[:10], 0.0)


def test_hessian_values():
    np.testing.assert_allclose(hessian_g(np.array([1.0, 0.0]), np.zeros(2)), np.diag([0.0, 1.0]), atol=1e-15)
    np.testing.assert_allclose(hessian_g(np.array([0.0, 2.0]), np.zeros(2)), np.diag([0.5, 0.0]), atol=1e-15)


def test_hessian_degenerate_raises():
    x = np.ones(3)
    with pytest.raises(DegenerateSampleError):
        hessian_g(x, x)


def test_hessian_rank_and_symmetry(rng):
    x, h = _random_pair(rng, p=6)
    mat = hessian_g(x, h)
    eig = np.linalg.eigvalsh(mat)
    assert np.array_equal(mat, mat.T)
    assert abs(eig[0]) < 1e-12 and np.all(eig[1:] > 0)


def test_idempotence_identity(rng):
    for _ in range(200):
        x, h = _random_pair(rng)
        mat = hessian_g(x, h)
        np.testing.assert_allclose(np.linalg.norm(x - h) * mat @ mat, mat, atol=1e-12)


def test_finite_differences(rng):
    step = 1e-5
    for _ in range(200):
        x, h = _random_pair(rng)
        p = len(h)
        eye = np.eye(p)
        fd_grad = np.array([(loss_g(x, h + step * e) - loss_g(x, h - step * e)) / (2 * step) for e in eye])
        g = grad_g(x, h).grad
        assert np.linalg.norm(fd_grad - g) / np.linalg.norm(g) < 1e-5
        fd_hess = np.column_stack(
            [(grad_g(x, h + step * e).grad - grad_g(x, h - step * e).grad) / (2 * step) for e in eye]
        )
        mat = hessian_g(x, h)
        assert np.linalg.norm(fd_hess - mat) / np.linalg.norm(mat) < 1e-4


def test_unit_direction_difference_bound(rng):
    for _ in range(500):
        x, h = _random_pair(rng)
        h2 = h + rng.normal(scale=rng.uniform(0.01, 3.0), size=len(h))
        if np.linalg.norm(x - h2) == 0:
            continue
        lhs = np.linalg.norm(grad_g(x, h2).grad - grad_g(x, h).grad)
        assert lhs <= 2 * np.linalg.norm(h2 - h) / np.linalg.norm(x - h) + 1e-12
