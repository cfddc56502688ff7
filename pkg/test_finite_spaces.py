"""
Tests for finite-dimensional normed spaces and compact bodies
"""
import os
import sys

import numpy as np
import pytest

# Add current directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from exceptions import DimensionMismatchError, SpaceDefinitionError
from finite_spaces import (CompactBody, body_boundary_sample, dual_ball_sample, dual_ball_vertices, dual_norm,
                           dual_space, euclidean_comparison, norm, norms, polytope, polytope_vertices,
                           support_function, weighted_lp, weighted_lp_norm)


def create_cube(d=3):
    """Unit ball of l_inf as a polytope norm"""
    return polytope(np.vstack([np.eye(d), -np.eye(d)]))


def create_strict_gap_space():
    return polytope(np.vstack([np.eye(3), -np.eye(3), [[2.0, 2.0, 2.0]], [[-2.0, -2.0, -2.0]]]))


def test_weighted_norms():
    assert norm(weighted_lp(3, 1.0), [1, -2, 3]) == pytest.approx(6.0)
    assert norm(weighted_lp(2, 2.0, [4.0, 1.0]), [1, 2]) == pytest.approx(np.sqrt(8.0))
    assert norm(weighted_lp(2, np.inf, [1.0, 3.0]), [2, 1]) == pytest.approx(3.0)
    np.testing.assert_allclose(norms(weighted_lp(2, 2.0), [[3, 4], [1, 0]]), [5.0, 1.0])


def test_polytope_norm():
    assert norm(create_cube(), [0.5, -2.0, 1.0]) == pytest.approx(2.0)
    assert norm(create_strict_gap_space(), [1.0, 0.0, 0.0]) == pytest.approx(2.0)
    assert norm(create_strict_gap_space(), [1.0, -1.0, 0.0]) == pytest.approx(1.0)


def test_norm_rejects_wrong_dimension():
    with pytest.raises(DimensionMismatchError):
        norm(weighted_lp(3, 2.0), [1.0, 2.0])


def test_space_validation():
    with pytest.raises(ValueError):
        weighted_lp(3, 0.5)
    with pytest.raises(ValueError):
        weighted_lp(2, 2.0, [1.0, -1.0])
    with pytest.raises(ValueError):
        polytope([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]])
    with pytest.raises(ValueError):
        polytope([[1.0, 1.0], [-1.0, -1.0]])
    with pytest.raises(ValueError):
        weighted_lp(17, 2.0)


def test_compact_body_validation():
    A = CompactBody(p=2.0, diag=[1.0, 0.5])
    assert A.dim == 2
    assert A.scaled(-2.0).diag.tolist() == [2.0, 1.0]
    with pytest.raises(ValueError):
        CompactBody(p=2.0, diag=[0.5, 1.0])
    with pytest.raises(ValueError):
        CompactBody(p=2.0, diag=[1.0, 0.0])


def test_dual_norms():
    assert dual_norm(weighted_lp(3, 1.0), [1.0, -3.0, 2.0]) == pytest.approx(3.0)
    assert dual_norm(weighted_lp(2, 2.0, [4.0, 1.0]), [2.0, 1.0]) == pytest.approx(np.sqrt(2.0))
    assert dual_norm(create_cube(), [1.0, -2.0, 0.5]) == pytest.approx(3.5)


def test_dual_space_of_weighted_lp():
    X = weighted_lp(3, 3.0, [1.0, 2.0, 0.5])
    dual = dual_space(X)
    assert dual.p == pytest.approx(1.5)
    phi = np.array([0.3, -1.0, 2.0])
    # Hoelder is attained: sup <x, phi> over the unit ball equals the dual norm
    x = np.sign(phi) * (np.abs(phi) / X.weights) ** (1.0 / 2.0)
    x /= norm(X, x)
    assert float(x @ phi) == pytest.approx(norm(dual, phi), rel=1e-10)


def test_polytope_vertices_of_cube():
    V = polytope_vertices(create_cube())
    assert len(V) == 8
    np.testing.assert_allclose(np.abs(V), 1.0, atol=1e-10)


def test_dual_ball_vertices():
    assert len(dual_ball_vertices(create_strict_gap_space())) == 8
    with pytest.raises(SpaceDefinitionError):
        dual_ball_vertices(weighted_lp(2, 2.0))


def test_dual_ball_sample_lp():
    X = weighted_lp(3, 1.5, [1.0, 2.0, 3.0])
    sample = dual_ball_sample(X, 50, seed=1)
    assert sample.shape == (50, 3)
    np.testing.assert_allclose(norms(dual_space(X), sample), 1.0, rtol=1e-12)
    # signed coordinate directions come first
    assert np.all(np.count_nonzero(sample[:6], axis=1) == 1)
    np.testing.assert_array_equal(sample, dual_ball_sample(X, 50, seed=1))


def test_dual_ball_sample_polytope():
    X = create_cube(2)
    np.testing.assert_array_equal(dual_ball_sample(X), X.facets)
    refined = dual_ball_sample(X, refinement=5, seed=0)
    assert refined.shape == (9, 2)
    assert np.all(norms(dual_space(X), refined) <= 1 + 1e-12)


def test_support_function():
    A = CompactBody(p=2.0, diag=[1.0, 0.5])
    assert support_function(A, [1.0, 1.0]) == pytest.approx(np.sqrt(1.25))
    B = CompactBody(p=1.0, diag=[1.0, 0.5])
    assert support_function(B, [1.0, 3.0]) == pytest.approx(1.5)


def test_euclidean_comparison():
    assert euclidean_comparison(create_cube()) == pytest.approx(1 / np.sqrt(3))
    assert euclidean_comparison(weighted_lp(3, np.inf)) == pytest.approx(1 / np.sqrt(3))
    assert euclidean_comparison(weighted_lp(3, 1.0)) == pytest.approx(1.0)
    assert euclidean_comparison(weighted_lp(4, 4.0)) == pytest.approx(4 ** (0.25 - 0.5))


def test_body_boundary_sample():
    A = CompactBody(p=1.5, diag=[1.0, 0.5, 0.25])
    points = body_boundary_sample(A, 20, seed=3)
    np.testing.assert_allclose(weighted_lp_norm(points / A.diag, 1.5, np.ones(3)), 1.0)


@pytest.mark.parametrize("space", [
    weighted_lp(3, 1.5, [1.0, 2.0, 0.5]),
    weighted_lp(3, 1.0, [1.0, 2.0, 3.0]),
    weighted_lp(3, np.inf, [1.0, 2.0, 3.0]),
    weighted_lp(3, 3.0),
    create_cube(),
    create_strict_gap_space(),
])
def test_second_dual_is_the_space(space):
    points = np.random.default_rng(3).standard_normal((50, 3))
    np.testing.assert_allclose(norms(dual_space(dual_space(space)), points), norms(space, points), rtol=1e-8)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
@pytest.mark.parametrize("seed", range(3))
def test_support_function_bounds_boundary_sample(p, seed):
    A = CompactBody(p=p, diag=[1.0, 0.6, 0.3])
    psi = np.random.default_rng(seed).standard_normal(3)
    sigma = support_function(A, psi)
    best = float(np.max(body_boundary_sample(A, 20000, seed) @ psi))
    assert best <= sigma * (1 + 1e-12)
    assert best >= 0.97 * sigma
