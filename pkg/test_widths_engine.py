"""
Tests for the width searches, certificates and the projection estimator
"""
import os
import sys

import numpy as np
import pytest

# Add current directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from classes import FunctionClass, custom, sobolev
from config import Config
from exceptions import AliasingError, SpaceDefinitionError
from finite_spaces import CompactBody, polytope, weighted_lp
from fourier_core import make_grid
from models import SearchBudget, WidthEstimate
from widths_engine import (DiagonalOperator, WidthProblem, adjoint, best_approximation, certified_lower, cowidth,
                           duality_check, enforce_monotone, gelfand_search, kolmogorov_search, linear_search,
                           duality_transfer_lower, projection_upper_bound, svd_oracle, trig_lower_bound,
                           width_bundle)


def create_budget(restarts=4, seed=0):
    """Desk-scale search budget"""
    return SearchBudget(restarts=restarts, inner_starts=4, max_iter=300, alt_rounds=2, workers=1, seed=seed)


def create_hilbert_body(d=4):
    return CompactBody(p=2.0, diag=1.0 / np.arange(1, d + 1)), weighted_lp(d, 2.0)


def create_strict_gap_instance():
    facets = np.vstack([np.eye(3), -np.eye(3), [[2.0, 2.0, 2.0]], [[-2.0, -2.0, -2.0]]])
    return CompactBody(p=1.0, diag=np.ones(3)), polytope(facets)


def test_svd_oracle():
    u = DiagonalOperator(entries=[1.0, 0.5, 1.0 / 3.0], p=2.0, q=2.0)
    estimate = svd_oracle(u, 1)
    assert estimate.lower == estimate.upper == pytest.approx(0.5)
    assert estimate.certified
    assert svd_oracle(u, 3).upper == 0.0
    with pytest.raises(SpaceDefinitionError):
        svd_oracle(DiagonalOperator(entries=[1.0, 0.5], p=1.5, q=2.0), 1)


def test_adjoint_swaps_exponents():
    v = adjoint(DiagonalOperator(entries=[1.0, 0.5], p=1.5, q=3.0))
    assert v.p == pytest.approx(1.5)
    assert v.q == pytest.approx(3.0)
    w = adjoint(DiagonalOperator(entries=[1.0, 0.5], p=2.0, q=4.0))
    assert (w.p, w.q) == pytest.approx((4.0 / 3.0, 2.0))


def test_best_approximation_exact_cases():
    c, value = best_approximation([1.0, 0.0, 0.0], np.ones((3, 1)), np.inf)
    assert c[0] == pytest.approx(0.5)
    assert value == pytest.approx(0.5)
    c, value = best_approximation([1.0, 2.0, 3.0], np.ones((3, 1)), 1.0)
    assert c[0] == pytest.approx(2.0)
    assert value == pytest.approx(2.0)
    c, value = best_approximation([1.0, 2.0, 3.0], np.ones((3, 1)), 2.0)
    assert c[0] == pytest.approx(2.0)
    assert value == pytest.approx(np.sqrt(2.0))


def test_best_approximation_smooth_norm_is_optimal():
    g = np.array([1.0, -2.0, 0.5, 3.0])
    G = np.array([[1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [1.0, -1.0]])
    c, value = best_approximation(g, G, 3.0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        other = c + 1e-3 * rng.standard_normal(2)
        assert np.sum(np.abs(g - G @ other) ** 3) ** (1 / 3) >= value - 1e-12


@pytest.mark.parametrize("n", [1, 2, 3])
def test_hilbert_searches_match_oracle(n):
    A, X = create_hilbert_body(4)
    sigma = 1.0 / (n + 1)
    budget = create_budget()
    gelfand, Phi = gelfand_search(A, X, n, budget)
    assert Phi.shape == (4, n)
    assert gelfand.upper == pytest.approx(sigma, rel=Config.ORACLE_RTOL)
    assert kolmogorov_search(A, X, n, budget).upper == pytest.approx(sigma, rel=Config.ORACLE_RTOL)
    assert linear_search(A, X, n, budget).upper == pytest.approx(sigma, rel=Config.ORACLE_RTOL)


def test_trivial_orders():
    A, X = create_hilbert_body(3)
    radius, _ = gelfand_search(A, X, 0)
    assert radius.upper == pytest.approx(1.0)
    assert radius.certified
    full = kolmogorov_search(A, X, 3)
    assert full.upper == 0.0 and full.certified


def test_widths_are_homogeneous():
    A, X = create_hilbert_body(3)
    budget = create_budget()
    base = gelfand_search(A, X, 1, budget)[0].upper
    assert gelfand_search(A.scaled(2.0), X, 1, budget)[0].upper == pytest.approx(2 * base, rel=1e-12)


def test_certified_lower_hilbert():
    A, X = create_hilbert_body(4)
    value, method = certified_lower(A, X, 1)
    assert value == pytest.approx(0.5)
    assert method


def test_certified_lower_below_known_values():
    A, X = create_strict_gap_instance()
    lower, _ = certified_lower(A, X, 1)
    assert 0 < lower <= 0.5
    assert certified_lower(A, X, 3) == (0.0, ['trivial'])


def test_strict_gap_instance_values():
    A, X = create_strict_gap_instance()
    budget = create_budget(restarts=16)
    gelfand, _ = gelfand_search(A, X, 1, budget)
    assert gelfand.upper == pytest.approx(0.5, abs=1e-3)
    linear = linear_search(A, X, 1, budget)
    assert linear.upper >= 4.0 / 7.0 - 1e-9
    assert cowidth(A, X, 1, budget).upper == pytest.approx(2 * gelfand.upper, rel=1e-6)


def test_width_bundle_keeps_linear_on_top():
    A = CompactBody(p=2.0, diag=[1.0, 0.7, 0.2])
    X = weighted_lp(3, np.inf)
    bundle = width_bundle(A, X, 1, create_budget())
    assert bundle['kolmogorov'].upper <= bundle['linear'].upper + 1e-9
    assert bundle['gelfand'].upper <= bundle['linear'].upper + 1e-9


def test_linear_search_dimension_cap():
    A = CompactBody(p=2.0, diag=np.ones(7))
    with pytest.raises(SpaceDefinitionError):
        linear_search(A, weighted_lp(7, 2.0), 1)


def test_searches_are_deterministic():
    A = CompactBody(p=1.5, diag=[1.0, 0.6, 0.3])
    X = weighted_lp(3, 3.0)
    first = kolmogorov_search(A, X, 1, create_budget(seed=5))
    second = kolmogorov_search(A, X, 1, create_budget(seed=5))
    assert first.upper == second.upper


def test_duality_check_hilbert():
    u = DiagonalOperator(entries=[1.0, 0.5, 0.25, 0.125], p=2.0, q=2.0)
    row = duality_check(u, 2, create_budget())
    assert row.gelfand == pytest.approx(0.25, rel=1e-4)
    assert row.gelfand_gap <= 1e-4
    assert row.linear_gap <= 1e-4


def test_duality_check_non_hilbert():
    u = DiagonalOperator(entries=[1.0, 0.6, 0.3], p=1.5, q=3.0)
    row = duality_check(u, 1, create_budget(restarts=8))
    assert row.gelfand_gap <= Config.DUALITY_RTOL
    assert row.linear_gap <= Config.DUALITY_RTOL


def test_enforce_monotone_flags_raw_increase():
    estimates = [WidthEstimate(n=1, lower=0.2, upper=1.0), WidthEstimate(n=2, lower=0.1, upper=1.2),
                 WidthEstimate(n=3, lower=0.3, upper=0.5)]
    adjusted = enforce_monotone(estimates)
    assert [e.upper for e in adjusted] == [1.0, 1.0, 0.5]
    assert 'upper-monotone-adjusted' in adjusted[1].flags
    assert [e.lower for e in adjusted] == [0.3, 0.3, 0.3]


def test_projection_bound_closed_form():
    cls = FunctionClass(multiplier=sobolev(1.0), p=2.0, beta=0.0)
    estimate = projection_upper_bound(cls, 2.0, 7, make_grid(256), 32)
    assert estimate.upper == pytest.approx(1.0 / 8.0)
    assert estimate.certified
    assert estimate.rank == 14


def test_projection_bound_without_tail():
    cls = FunctionClass(multiplier=custom([1.0, 0.5]), p=1.5, beta=0.0)
    estimate = projection_upper_bound(cls, 2.0, 2, make_grid(64), 8)
    assert estimate.upper == 0.0


def test_projection_bound_respects_trig_lower_bound():
    cls = FunctionClass(multiplier=sobolev(0.8), p=1.5, beta=0.0)
    budget = SearchBudget(restarts=1, inner_starts=3, max_iter=60, alt_rounds=1, workers=1, seed=0)
    estimate = projection_upper_bound(cls, 2.0, 4, make_grid(128), 16, budget)
    assert estimate.upper >= trig_lower_bound(cls, 2.0, 4) * 0.999
    assert estimate.upper <= 1.0


def test_projection_bound_rejects_unresolved_tail():
    cls = FunctionClass(multiplier=sobolev(1.0), p=2.0, beta=0.0)
    with pytest.raises(AliasingError):
        projection_upper_bound(cls, 2.0, 2, make_grid(32), 16)


def test_trig_lower_bound_hilbert_is_tail_value():
    cls = FunctionClass(multiplier=sobolev(1.0), p=2.0, beta=0.0)
    assert trig_lower_bound(cls, 2.0, 7) == pytest.approx(1.0 / 8.0)


def test_problem_inner_suprema_agree():
    A = CompactBody(p=2.0, diag=[1.0, 0.5, 0.25])
    X = weighted_lp(3, 2.0)
    problem = WidthProblem(A, X, create_budget())
    value, exact, _ = problem.section_sup(np.array([[1.0], [0.0], [0.0]]))
    assert exact
    assert value == pytest.approx(0.5)
    value, exact, _ = problem.deviation_sup(np.array([[1.0], [0.0], [0.0]]))
    assert value == pytest.approx(0.5)


def test_duality_transfer_certificate_on_weighted_target():
    A = CompactBody(p=2.0, diag=[1.0, 0.8, 0.5])
    X = weighted_lp(3, 2.0, [0.25, 1.0, 9.0])
    # folded entries diag * sqrt(w) = (0.5, 0.8, 1.5)
    value, method = certified_lower(A, X, 1)
    assert value == pytest.approx(0.8)
    assert method == ['duality-transfer']
    value, method = certified_lower(A, X, 2)
    assert value == pytest.approx(0.5)
    assert method == ['duality-transfer']
    assert duality_transfer_lower(A, X, 1) == pytest.approx(
        svd_oracle(DiagonalOperator(entries=[1.5, 0.8, 0.5], p=2.0, q=2.0), 1).upper)


def test_duality_transfer_matches_ball_bound_on_unweighted_targets():
    A = CompactBody(p=1.5, diag=[1.0, 0.6, 0.3])
    X = weighted_lp(3, 3.0)
    # ball inclusion: 0.6 a b with a = b = 3^(-1/6)
    assert duality_transfer_lower(A, X, 1) == pytest.approx(0.6 * 3.0 ** (-1.0 / 3.0))
    value, method = certified_lower(A, X, 1)
    assert value >= duality_transfer_lower(A, X, 1)
    assert method != ['duality-transfer']


def test_inner_suprema_without_exact_paths():
    A = CompactBody(p=1.5, diag=[1.0, 0.6, 0.3])
    problem = WidthProblem(A, weighted_lp(3, 3.0), create_budget())
    e1 = np.array([[1.0], [0.0], [0.0]])
    # p <= q: a diagonal map attains its norm on a coordinate vector
    value, exact, converged = problem.operator_sup(np.eye(3))
    assert not exact and converged
    assert value == pytest.approx(1.0, rel=1e-6)
    assert problem.section_sup(e1)[0] == pytest.approx(0.6, rel=1e-4)
    assert problem.deviation_sup(e1)[0] == pytest.approx(0.6, rel=1e-4)


def test_power_norm_when_source_exponent_exceeds_target():
    A = CompactBody(p=3.0, diag=[1.0, 0.6, 0.3])
    problem = WidthProblem(A, weighted_lp(3, 1.5), create_budget())
    # ||diag||_{3 -> 1.5} is the l_3 norm of the entries
    expected = (1.0 + 0.6 ** 3 + 0.3 ** 3) ** (1.0 / 3.0)
    assert problem.operator_sup(np.eye(3))[0] == pytest.approx(expected, rel=1e-4)


def test_multistart_flags_do_not_depend_on_workers():
    A = CompactBody(p=1.5, diag=[1.0, 0.6, 0.3])

    def evaluate(flat):
        return float(flat @ flat), True, bool(flat[0] < 5.0)

    outcomes = []
    for workers in (1, 4, 4, 4):
        budget = SearchBudget(restarts=8, inner_starts=2, max_iter=400, alt_rounds=1, workers=workers, seed=0)
        problem = WidthProblem(A, weighted_lp(3, 3.0), budget)
        x, value, converged, exact = problem.multistart(evaluate, [np.array([10.0, 0.0])], 2)
        outcomes.append((tuple(x), value, converged, exact))
    assert all(outcome == outcomes[0] for outcome in outcomes)
    assert outcomes[0][2] is False
    assert outcomes[0][3] is True


def test_parallel_search_matches_serial():
    A = CompactBody(p=1.5, diag=[1.0, 0.6, 0.3])
    X = weighted_lp(3, 3.0)
    serial = SearchBudget(restarts=6, inner_starts=3, max_iter=150, alt_rounds=1, workers=1, seed=2)
    parallel = serial.model_copy(update={'workers': 4})
    for search in (lambda b: gelfand_search(A, X, 1, b)[0], lambda b: linear_search(A, X, 1, b)):
        first, second = search(serial), search(parallel)
        assert first.upper == second.upper
        assert first.converged == second.converged


def test_duality_check_uses_transposed_seeds():
    u = DiagonalOperator(entries=[1.0, 0.7, 0.4, 0.2], p=1.5, q=3.0)
    budget = SearchBudget(**Config.duality_budget(), workers=1, seed=0)
    row = duality_check(u, 2, budget)
    assert row.kolmogorov_adjoint <= row.gelfand * (1 + 1e-3)
    assert row.linear_adjoint <= row.linear * (1 + 1e-3)
    assert row.gelfand_gap <= Config.DUALITY_RTOL
    assert row.linear_gap <= Config.DUALITY_RTOL
