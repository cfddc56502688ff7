"""
Multiplier sequences, smoothness regimes and predicted width orders
"""
from enum import Enum
from typing import Optional, List, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from exceptions import RegimeError
from models import SmoothnessRegime, RegimeVerdict

logger = structlog.get_logger()


class SequenceKind(str, Enum):
    """Families of multiplier sequences"""
    SOBOLEV = "sobolev"
    SUPER_SMALL = "super_small"
    EXPONENTIAL_INFINITE = "exponential_infinite"
    EXPONENTIAL_SUPER_HIGH = "exponential_super_high"
    CUSTOM = "custom"


class MultiplierSequence(BaseModel):
    """The sequence lambda(k), k >= 1, with its family tag and parameters"""
    model_config = ConfigDict(frozen=True, use_enum_values=False)

    kind: SequenceKind = Field(..., description="Multiplier family")
    r: float = Field(0.0, description="Sobolev exponent")
    rho: float = Field(1.0, description="Logarithmic exponent")
    mu: float = Field(1.0, description="Exponential rate")
    gamma: float = Field(1.0, description="Exponential power")
    base_exponent: float = Field(0.0, description="(1/p - 1/q)_+ offset for super-small sequences")
    custom: Optional[List[float]] = Field(None, description="Explicit table lambda(1..K)")

    @field_validator('r', 'base_exponent')
    @classmethod
    def validate_nonnegative(cls, v):
        if v < 0:
            raise ValueError('Exponent must be nonnegative')
        return v

    @field_validator('rho', 'mu', 'gamma')
    @classmethod
    def validate_positive(cls, v):
        if v <= 0:
            raise ValueError('Parameter must be positive')
        return v

    @model_validator(mode='after')
    def validate_family(self):
        if self.kind == SequenceKind.CUSTOM:
            if not self.custom:
                raise ValueError('Custom sequence needs a table')
            if any(v < 0 for v in self.custom):
                raise ValueError('Custom table must be nonnegative')
        if self.kind == SequenceKind.EXPONENTIAL_INFINITE and self.gamma >= 1:
            raise ValueError('Infinite smoothness needs gamma < 1')
        if self.kind == SequenceKind.EXPONENTIAL_SUPER_HIGH and self.gamma < 1:
            raise ValueError('Super-high smoothness needs gamma >= 1')
        return self


class FunctionClass(BaseModel):
    """The multiplier class Lambda_beta U_p"""
    model_config = ConfigDict(frozen=True)

    multiplier: MultiplierSequence
    p: float
    beta: Optional[float] = Field(None, description="Phase shift; Sobolev classes default to beta = r")

    @field_validator('p')
    @classmethod
    def validate_p(cls, v):
        if not 1 < v < np.inf:
            raise ValueError(f'p must lie in (1, inf), got {v}')
        return v

    @model_validator(mode='after')
    def default_phase(self):
        if self.beta is None:
            phase = self.multiplier.r if self.multiplier.kind == SequenceKind.SOBOLEV else 0.0
            object.__setattr__(self, 'beta', phase)
        return self


def sobolev(r: float) -> MultiplierSequence:
    return MultiplierSequence(kind=SequenceKind.SOBOLEV, r=r)


def super_small(rho: float, p: float = 2.0, q: float = 2.0) -> MultiplierSequence:
    """The typical super-small sequence (ln(k+1))^-rho k^-(1/p-1/q)_+"""
    delta, _ = critical_thresholds(p, q)
    return MultiplierSequence(kind=SequenceKind.SUPER_SMALL, rho=rho, base_exponent=delta)


def exponential(mu: float, gamma: float) -> MultiplierSequence:
    """exp(-mu k^gamma); the family tag follows gamma"""
    kind = SequenceKind.EXPONENTIAL_INFINITE if gamma < 1 else SequenceKind.EXPONENTIAL_SUPER_HIGH
    return MultiplierSequence(kind=kind, mu=mu, gamma=gamma)


def custom(table: List[float]) -> MultiplierSequence:
    return MultiplierSequence(kind=SequenceKind.CUSTOM, custom=list(table))


def conjugate_exponent(p: float) -> float:
    """p' = p/(p-1), with 1 and infinity exchanged"""
    if p == 1:
        return np.inf
    if np.isinf(p):
        return 1.0
    return p / (p - 1.0)


def critical_thresholds(p: float, q: float) -> Tuple[float, float]:
    """delta = (1/p - 1/q)_+ and the small/finite threshold 1/2 delta / (1/p - 1/2)"""
    delta = max(1.0 / p - 1.0 / q, 0.0)
    gap = 1.0 / p - 0.5
    threshold = 0.5 * delta / gap if gap > 0 else np.inf
    return delta, threshold


def lambda_values(seq: MultiplierSequence, K: int) -> np.ndarray:
    """lambda(1..K) as an array"""
    k = np.arange(1, K + 1, dtype=float)
    if seq.kind == SequenceKind.SOBOLEV:
        return k ** (-seq.r)
    if seq.kind == SequenceKind.SUPER_SMALL:
        return np.log(k + 1.0) ** (-seq.rho) * k ** (-seq.base_exponent)
    if seq.kind in (SequenceKind.EXPONENTIAL_INFINITE, SequenceKind.EXPONENTIAL_SUPER_HIGH):
        return np.exp(-seq.mu * k ** seq.gamma)
    table = np.zeros(K)
    known = min(K, len(seq.custom))
    table[:known] = seq.custom[:known]
    return table


def lambda_at(seq: MultiplierSequence, k: int) -> float:
    """lambda(k) for k >= 1"""
    if k < 1:
        raise ValueError(f'k must be at least 1, got {k}')
    return float(lambda_values(seq, k)[-1])


def slow_factor(seq: MultiplierSequence, k) -> np.ndarray:
    """phi(k) = (ln(k+1))^-rho, the super-small reference"""
    return np.log(np.asarray(k, dtype=float) + 1.0) ** (-seq.rho)


def regime_classify(seq: MultiplierSequence, p: float, q: float) -> SmoothnessRegime:
    """Map a sequence and (p, q) to a smoothness regime, or UNCLASSIFIED outside the hypotheses"""
    inside = 1 < p < q <= 2
    if seq.kind == SequenceKind.SOBOLEV:
        if not inside:
            return SmoothnessRegime.UNCLASSIFIED
        delta, threshold = critical_thresholds(p, q)
        if delta < seq.r < threshold:
            return SmoothnessRegime.SMALL
        if seq.r > threshold:
            return SmoothnessRegime.FINITE
        return SmoothnessRegime.UNCLASSIFIED
    if seq.kind == SequenceKind.SUPER_SMALL:
        if not inside:
            return SmoothnessRegime.UNCLASSIFIED
        delta, _ = critical_thresholds(p, q)
        if abs(seq.base_exponent - delta) > 1e-12:
            logger.warning("Super-small offset differs from (1/p-1/q)_+",
                           base_exponent=seq.base_exponent, delta=delta)
        return SmoothnessRegime.SUPER_SMALL
    if seq.kind == SequenceKind.EXPONENTIAL_INFINITE:
        return SmoothnessRegime.INFINITE if inside else SmoothnessRegime.UNCLASSIFIED
    if seq.kind == SequenceKind.EXPONENTIAL_SUPER_HIGH:
        return SmoothnessRegime.SUPER_HIGH if 1 < p < np.inf and 1 < q < np.inf \
            else SmoothnessRegime.UNCLASSIFIED
    return SmoothnessRegime.UNCLASSIFIED


def predicted_orders(regime: SmoothnessRegime, p: float, q: float,
                     seq: MultiplierSequence) -> RegimeVerdict:
    """Two-sided bracket of the preabsolute widths for a classified regime"""
    regime = SmoothnessRegime(regime)
    delta, threshold = critical_thresholds(p, q)
    if regime == SmoothnessRegime.SUPER_SMALL:
        return RegimeVerdict(regime=regime, model='ratio', rho=seq.rho,
                             conditions=[1 < p < q <= 2 or p == q])
    if regime == SmoothnessRegime.SMALL:
        upper = -seq.r + delta
        return RegimeVerdict(regime=regime, model='power',
                             lower_exponent=p / (2.0 * (p - 1.0)) * upper,
                             upper_exponent=upper,
                             conditions=[1 < p < q <= 2, delta < seq.r < threshold])
    if regime == SmoothnessRegime.FINITE:
        return RegimeVerdict(regime=regime, model='power',
                             lower_exponent=-seq.r, upper_exponent=-seq.r + delta,
                             conditions=[1 < p < q <= 2, seq.r > threshold])
    if regime == SmoothnessRegime.INFINITE:
        # exponents here are of the polynomial factor on top of exp(-mu n^gamma)
        return RegimeVerdict(regime=regime, model='envelope', mu=seq.mu, gamma=seq.gamma,
                             lower_exponent=0.0,
                             upper_exponent=(1.0 - seq.gamma) * delta,
                             conditions=[1 < p < q <= 2, 0 < seq.gamma < 1])
    if regime == SmoothnessRegime.SUPER_HIGH:
        return RegimeVerdict(regime=regime, model='stretched', mu=seq.mu, gamma=seq.gamma,
                             lower_exponent=0.0, upper_exponent=0.0,
                             conditions=[seq.gamma >= 1])
    raise RegimeError(f'No prediction for regime {regime.value}')
