"""
Tests for sampled isometric extensions and the preabsolute chain
"""
import os
import sys

import numpy as np
import pytest

# Add current directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from exceptions import DependentBasisError, ExtensionCoverageError, SpaceDefinitionError
from extension_lab import (STRICT_GAP_GELFAND, STRICT_GAP_LINEAR, STRICT_GAP_MARGIN, CoefficientFunction,
                           best_approx_coeffs, build_extension, coefficient_tables, exhaustive_gap_certificate,
                           extension_record, extension_slack, extension_width_value, hilbert_fixture,
                           linearity_filter, load_extension, optimal_functionals, preabsolute_chain,
                           strict_gap_fixture)
from finite_spaces import CompactBody, dual_ball_sample, norm, polytope, weighted_lp
from models import ExtensionRecord, SearchBudget


def create_budget(restarts=4):
    return SearchBudget(restarts=restarts, inner_starts=4, max_iter=300, alt_rounds=2, workers=1, seed=0)


def create_cube(d=3):
    return polytope(np.vstack([np.eye(d), -np.eye(d)]))


def test_best_approx_coeffs_euclidean():
    A = CompactBody(p=2.0, diag=np.ones(3))
    c = best_approx_coeffs([1.0, 2.0, 0.0], np.array([[1.0], [0.0], [0.0]]), A)
    assert c[0] == pytest.approx(1.0)


def test_best_approx_coeffs_rejects_dependent_basis():
    A = CompactBody(p=2.0, diag=np.ones(3))
    basis = np.array([[1.0, 2.0], [0.0, 0.0], [0.0, 0.0]])
    with pytest.raises(DependentBasisError):
        best_approx_coeffs([1.0, 0.0, 0.0], basis, A)


def test_linearity_filter():
    sample = dual_ball_sample(weighted_lp(3, 2.0), 40, seed=2)
    v = np.array([0.5, -1.0, 2.0])
    linear = linearity_filter(CoefficientFunction(values=sample @ v), sample)
    assert linear.linear
    np.testing.assert_allclose(linear.functional, v, atol=1e-8)
    bent = linearity_filter(CoefficientFunction(values=np.abs(sample[:, 0])), sample)
    assert not bent.linear
    np.testing.assert_array_equal(bent.bracket, bent.values)


def test_extension_is_isometric_on_x():
    X = create_cube()
    ext = build_extension(X, dual_ball_sample(X), [])
    rng = np.random.default_rng(0)
    for x in rng.standard_normal((10, 3)):
        assert ext.norm(x) == pytest.approx(norm(X, x))


def test_polytope_extension_needs_every_dual_vertex():
    X = create_cube()
    with pytest.raises(ExtensionCoverageError):
        build_extension(X, X.facets[:-1], [])


def test_coefficient_tables_match_sample():
    A, X, _ = hilbert_fixture(3)
    sample = dual_ball_sample(X, 30, seed=0)
    Phi = np.array([[1.0], [0.0], [0.0]])
    tables = coefficient_tables(A, sample, Phi)
    assert len(tables) == 1
    # Euclidean best approximation is a projection, so c is linear in phi
    assert linearity_filter(tables[0], sample).linear
    assert coefficient_tables(A, sample, np.zeros((3, 0))) == []


def test_hilbert_chain_is_flat():
    A, X, n = hilbert_fixture(3)
    sample = dual_ball_sample(X, 200, seed=0)
    chain, ext, Phi = preabsolute_chain(A, X, n, create_budget(), sample=sample)
    assert [e.m for e in chain] == [0, 1]
    for e in chain:
        assert e.upper == pytest.approx(0.5, rel=1e-4)
    assert ext.n_ext == 0


def test_chain_of_order_zero_is_the_radius():
    A, X, _ = hilbert_fixture(3)
    chain, ext, Phi = preabsolute_chain(A, X, 0, create_budget(), sample=dual_ball_sample(X, 50, seed=0))
    assert len(chain) == 1
    assert chain[0].upper == pytest.approx(1.0)
    assert Phi.shape == (3, 0)


def test_strict_gap_chain_drops():
    A, X, n = strict_gap_fixture()
    chain, ext, Phi = preabsolute_chain(A, X, n, create_budget(restarts=16))
    assert chain[0].upper >= STRICT_GAP_LINEAR - 1e-9
    assert chain[-1].upper == pytest.approx(STRICT_GAP_GELFAND, abs=1e-3)
    assert chain[0].upper - chain[-1].upper >= STRICT_GAP_MARGIN / 2
    assert ext.n_ext == 1


def test_extension_value_bounded_by_gelfand_value():
    A, X, n = strict_gap_fixture()
    budget = create_budget(restarts=16)
    Phi, gelfand, achieved = optimal_functionals(A, X, n, budget=budget)
    sample = dual_ball_sample(X)
    tables = [linearity_filter(c, sample) for c in coefficient_tables(A, sample, Phi)]
    value = extension_width_value(A, build_extension(X, sample, tables), Phi)
    assert value.upper <= achieved * (1 + 1e-3) + 1e-9
    assert value.m == n


def test_optimal_functionals_of_order_zero():
    A, X, _ = hilbert_fixture(3)
    Phi, estimate, achieved = optimal_functionals(A, X, 0)
    assert Phi.shape == (3, 0)
    assert achieved == pytest.approx(1.0)


def test_exhaustive_certificate_grid_values():
    A, X, _ = strict_gap_fixture()
    report = exhaustive_gap_certificate(A, X, resolution=8)
    assert report['gelfand_upper'] == pytest.approx(STRICT_GAP_GELFAND)
    assert report['linear_grid_min'] == pytest.approx(STRICT_GAP_LINEAR, abs=1e-7)
    assert report['lipschitz'] == pytest.approx(4.0)
    # too coarse to certify
    assert not report['certified']


def test_exhaustive_certificate_needs_l1_source():
    A, X, _ = hilbert_fixture(3)
    with pytest.raises(SpaceDefinitionError):
        exhaustive_gap_certificate(A, X)


def test_extension_record_replays():
    A, X, n = strict_gap_fixture()
    chain, ext, Phi = preabsolute_chain(A, X, n, create_budget(restarts=16))
    record = ExtensionRecord(**extension_record(ext, Phi, A).model_dump(mode='json'))
    replayed, replayed_Phi, replayed_A = load_extension(record)
    assert extension_width_value(replayed_A, replayed, replayed_Phi).upper == pytest.approx(chain[-1].upper)


def test_extension_slack_is_small_for_lp_bases():
    A, X, _ = hilbert_fixture(3)
    slack = extension_slack(A, X, np.array([[1.0], [0.0], [0.0]]), sample_size=100)
    assert 0.0 <= slack <= 1e-9


def test_lp_chain_end_within_gelfand_value_plus_slack():
    A, X, n = CompactBody(p=1.5, diag=np.array([1.0, 0.7, 0.4])), weighted_lp(3, 3.0), 1
    budget = create_budget(restarts=8)
    sample = dual_ball_sample(X, 200, 0)
    chain, ext, Phi = preabsolute_chain(A, X, n, budget, sample=sample)
    _, gelfand, _ = optimal_functionals(A, X, n, budget=budget)
    assert ext.slack >= 0.0
    assert chain[-1].upper <= gelfand.upper * (1 + 1e-3) + ext.slack + 1e-6
    record = ExtensionRecord(**extension_record(ext, Phi, A).model_dump(mode='json'))
    assert record.slack == pytest.approx(ext.slack)
    assert load_extension(record)[0].slack == pytest.approx(ext.slack)


def test_polytope_chain_has_no_slack():
    A, X, n = strict_gap_fixture()
    _, ext, _ = preabsolute_chain(A, X, n, create_budget(restarts=16))
    assert ext.slack == 0.0


def test_exhaustive_certificate_at_default_resolution():
    report = exhaustive_gap_certificate(*strict_gap_fixture()[:2])
    assert report['resolution'] == 64
    assert report['certified']
    assert 0.0 < report['certified_margin'] <= STRICT_GAP_MARGIN
