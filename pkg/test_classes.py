"""
Tests for multiplier sequences and regime classification
"""
import os
import sys

import numpy as np
import pytest

# Add current directory to path for imports
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from classes import (FunctionClass, MultiplierSequence, SequenceKind, conjugate_exponent, critical_thresholds,
                     custom, exponential, lambda_at, lambda_values, predicted_orders, regime_classify,
                     slow_factor, sobolev, super_small)
from exceptions import RegimeError
from models import SmoothnessRegime


@pytest.mark.parametrize("p,expected", [(2.0, 2.0), (1.5, 3.0), (3.0, 1.5), (1.0, np.inf), (np.inf, 1.0)])
def test_conjugate_exponent(p, expected):
    assert conjugate_exponent(p) == pytest.approx(expected)


def test_lambda_values():
    assert lambda_at(sobolev(1.0), 4) == pytest.approx(0.25)
    assert lambda_at(exponential(1.0, 1.0), 2) == pytest.approx(np.exp(-2.0))
    np.testing.assert_allclose(lambda_values(custom([1.0, 0.5]), 4), [1.0, 0.5, 0.0, 0.0])
    seq = super_small(1.0)
    assert lambda_at(seq, 3) == pytest.approx(1.0 / np.log(4.0))
    assert slow_factor(seq, 3) == pytest.approx(1.0 / np.log(4.0))


def test_lambda_at_rejects_zero_index():
    with pytest.raises(ValueError):
        lambda_at(sobolev(1.0), 0)


def test_super_small_offset_follows_exponents():
    seq = super_small(1.0, p=1.5, q=2.0)
    assert seq.base_exponent == pytest.approx(1.0 / 6.0)
    assert lambda_at(seq, 2) == pytest.approx(2 ** (-1.0 / 6.0) / np.log(3.0))


def test_exponential_tag_follows_gamma():
    assert exponential(0.5, 0.5).kind == SequenceKind.EXPONENTIAL_INFINITE
    assert exponential(1.0, 1.5).kind == SequenceKind.EXPONENTIAL_SUPER_HIGH
    with pytest.raises(ValueError):
        MultiplierSequence(kind=SequenceKind.EXPONENTIAL_INFINITE, gamma=1.5)


def test_function_class_defaults():
    assert FunctionClass(multiplier=sobolev(0.8), p=1.5).beta == pytest.approx(0.8)
    assert FunctionClass(multiplier=sobolev(0.8), p=1.5, beta=0.0).beta == 0.0
    assert FunctionClass(multiplier=exponential(1.0, 1.0), p=2.0).beta == 0.0
    with pytest.raises(ValueError):
        FunctionClass(multiplier=sobolev(1.0), p=1.0)


def test_critical_thresholds():
    delta, threshold = critical_thresholds(1.5, 2.0)
    assert delta == pytest.approx(1.0 / 6.0)
    assert threshold == pytest.approx(0.5)
    assert critical_thresholds(2.0, 2.0) == (0.0, np.inf)


@pytest.mark.parametrize("seq,p,q,expected", [
    (sobolev(0.8), 1.5, 2.0, SmoothnessRegime.FINITE),
    (sobolev(0.3), 1.5, 2.0, SmoothnessRegime.SMALL),
    (sobolev(0.1), 1.5, 2.0, SmoothnessRegime.UNCLASSIFIED),
    (sobolev(1.0), 2.0, 2.0, SmoothnessRegime.UNCLASSIFIED),
    (super_small(1.0, 1.5, 2.0), 1.5, 2.0, SmoothnessRegime.SUPER_SMALL),
    (exponential(0.5, 0.5), 1.5, 2.0, SmoothnessRegime.INFINITE),
    (exponential(0.5, 0.5), 2.0, 3.0, SmoothnessRegime.UNCLASSIFIED),
    (exponential(1.0, 1.0), 2.0, 2.0, SmoothnessRegime.SUPER_HIGH),
    (custom([1.0, 0.5]), 1.5, 2.0, SmoothnessRegime.UNCLASSIFIED),
])
def test_regime_classify(seq, p, q, expected):
    assert regime_classify(seq, p, q) == expected


def test_predicted_orders_finite():
    verdict = predicted_orders(SmoothnessRegime.FINITE, 1.5, 2.0, sobolev(0.8))
    assert verdict.model == 'power'
    assert verdict.lower_exponent == pytest.approx(-0.8)
    assert verdict.upper_exponent == pytest.approx(-0.8 + 1.0 / 6.0)


def test_predicted_orders_small():
    verdict = predicted_orders(SmoothnessRegime.SMALL, 1.5, 2.0, sobolev(0.3))
    assert verdict.upper_exponent == pytest.approx(-0.3 + 1.0 / 6.0)
    assert verdict.lower_exponent == pytest.approx(1.5 * (-0.3 + 1.0 / 6.0))


def test_predicted_orders_envelope_and_stretched():
    infinite = predicted_orders(SmoothnessRegime.INFINITE, 1.5, 2.0, exponential(0.5, 0.5))
    assert infinite.model == 'envelope'
    assert infinite.upper_exponent == pytest.approx(0.5 / 6.0)
    high = predicted_orders(SmoothnessRegime.SUPER_HIGH, 2.0, 2.0, exponential(1.0, 1.5))
    assert high.model == 'stretched'
    assert high.gamma == pytest.approx(1.5)


def test_predicted_orders_rejects_unclassified():
    with pytest.raises(RegimeError):
        predicted_orders(SmoothnessRegime.UNCLASSIFIED, 2.0, 2.0, sobolev(1.0))
