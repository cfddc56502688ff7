"""
Data models for the n-widths laboratory
"""
from enum import Enum
from typing import Optional, List, Dict

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config import Config


SCHEMA_VERSION = 1


class SmoothnessRegime(str, Enum):
    """Smoothness regimes of multiplier classes"""
    SUPER_SMALL = "super_small"
    SMALL = "small"
    FINITE = "finite"
    INFINITE = "infinite"
    SUPER_HIGH = "super_high"
    UNCLASSIFIED = "unclassified"


class WidthEstimate(BaseModel):
    """Two-sided bracket for one width value"""
    n: int = Field(..., description="Width order")
    lower: float = Field(..., description="Certified or searched lower bound")
    upper: float = Field(..., description="Best value found")
    method: List[str] = Field(default_factory=list, description="Method tags")
    certified: bool = Field(False, description="True only for closed-form or oracle values")
    converged: bool = Field(True, description="False when a search ran out of budget")
    rank: Optional[int] = Field(None, description="Rank of the approximating projection in sweeps")
    m: Optional[int] = Field(None, description="Extension dimension in preabsolute chains")
    flags: List[str] = Field(default_factory=list, description="Post-processing notes")

    @field_validator('n')
    @classmethod
    def validate_order(cls, v):
        if v < 0:
            raise ValueError('Width order must be nonnegative')
        return v

    @model_validator(mode='after')
    def validate_bracket(self):
        """Ensure 0 <= lower <= upper"""
        if self.lower < 0 or self.upper < 0:
            raise ValueError('Width bounds must be nonnegative')
        if self.lower > self.upper * (1 + 1e-12) + 1e-300:
            raise ValueError(f'Lower bound {self.lower} exceeds upper bound {self.upper}')
        return self

    @property
    def gap(self) -> float:
        """Relative width of the bracket"""
        return 0.0 if self.upper == 0 else (self.upper - self.lower) / self.upper


class RegimeVerdict(BaseModel):
    """Predicted two-sided bracket for one smoothness regime"""
    model_config = ConfigDict(frozen=True)

    regime: SmoothnessRegime
    model: str = Field(..., description="ratio, power, envelope or stretched")
    lower_exponent: Optional[float] = None
    upper_exponent: Optional[float] = None
    mu: Optional[float] = None
    gamma: Optional[float] = None
    rho: Optional[float] = None
    conditions: List[bool] = Field(default_factory=list)

    @model_validator(mode='after')
    def validate_order(self):
        """The lower side never decays slower than the upper side claims"""
        if self.lower_exponent is not None and self.upper_exponent is not None:
            if self.lower_exponent > self.upper_exponent + 1e-12:
                raise ValueError('Bracket is not well ordered')
        return self


class FitResult(BaseModel):
    """Parameters of an order fit"""
    model: str = Field(..., description="power or stretched")
    slope: Optional[float] = None
    intercept: Optional[float] = None
    mu: Optional[float] = None
    gamma: Optional[float] = None
    residual: float = Field(..., description="Root mean square residual on the log scale")
    n_points: int


class SweepResult(BaseModel):
    """Width estimates of one function class across n"""
    description: str
    regime: SmoothnessRegime
    p: float
    q: float
    beta: float = 0.0
    K: int
    N: int
    seed: int
    n_list: List[int] = Field(default_factory=list)
    estimates: List[WidthEstimate] = Field(default_factory=list)
    upper_fit: Optional[FitResult] = None
    lower_fit: Optional[FitResult] = None

    @model_validator(mode='after')
    def validate_grid(self):
        """n grid strictly increasing and matched by estimates"""
        if any(b <= a for a, b in zip(self.n_list, self.n_list[1:])):
            raise ValueError('n grid must be strictly increasing')
        if len(self.estimates) != len(self.n_list):
            raise ValueError('One estimate per n is required')
        return self


class VerdictReport(BaseModel):
    """Pass/fail report of a sweep against its predicted bracket"""
    regime: SmoothnessRegime
    model: str
    passed: bool
    checks: Dict[str, bool] = Field(default_factory=dict)
    informational: Dict[str, bool] = Field(default_factory=dict)
    statistics: Dict[str, float] = Field(default_factory=dict)
    diagnostics: List[str] = Field(default_factory=list)

    def summary_lines(self) -> List[str]:
        """Plain text lines for verdict.txt"""
        lines = [f'regime: {self.regime.value}', f'model: {self.model}',
                 f'verdict: {"PASS" if self.passed else "FAIL"}']
        for name in sorted(self.checks):
            lines.append(f'check {name}: {"pass" if self.checks[name] else "fail"}')
        for name in sorted(self.informational):
            lines.append(f'info {name}: {"inside" if self.informational[name] else "outside"}')
        for name in sorted(self.statistics):
            lines.append(f'{name}: {self.statistics[name]:.6g}')
        lines.extend(f'note: {d}' for d in self.diagnostics)
        return lines


class DualityRow(BaseModel):
    """One operator of the duality suite"""
    seed: int
    dimension: int
    n: int
    p: float
    q: float
    gelfand: float
    kolmogorov_adjoint: float
    linear: float
    linear_adjoint: float
    gelfand_gap: float
    linear_gap: float
    converged: bool = True


class DualityReport(BaseModel):
    """Relative gaps of the duality identities over a suite"""
    rows: List[DualityRow] = Field(default_factory=list)
    tolerance: float = Field(default_factory=lambda: Config.DUALITY_RTOL)

    @property
    def max_gelfand_gap(self) -> float:
        return max((r.gelfand_gap for r in self.rows), default=0.0)

    @property
    def max_linear_gap(self) -> float:
        return max((r.linear_gap for r in self.rows), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_gelfand_gap <= self.tolerance and self.max_linear_gap <= self.tolerance


class ExtensionRecord(BaseModel):
    """Replay file of a sampled isometric extension"""
    schema_version: int = SCHEMA_VERSION
    dimension: int
    n: int
    base_kind: str
    base_p: Optional[float] = None
    base_weights: Optional[List[float]] = None
    base_facets: Optional[List[List[float]]] = None
    source_p: float
    diag: List[float]
    functionals: List[List[float]]
    sample: List[List[float]]
    tables: List[List[float]]
    nonlinear: List[bool]
    linear_parts: List[List[float]]
    slack: float = 0.0


class SearchBudget(BaseModel):
    """Budget and seed of a multistart search"""
    model_config = ConfigDict(frozen=True)

    restarts: int = Field(default_factory=lambda: Config.SEARCH_RESTARTS)
    inner_starts: int = Field(default_factory=lambda: Config.INNER_STARTS)
    max_iter: int = Field(default_factory=lambda: Config.MAX_ITER)
    alt_rounds: int = Field(default_factory=lambda: Config.ALT_ROUNDS)
    workers: int = Field(default_factory=lambda: Config.WORKERS)
    seed: int = Field(default_factory=lambda: Config.SEED)

    @field_validator('restarts', 'inner_starts', 'max_iter', 'alt_rounds', 'workers')
    @classmethod
    def validate_positive(cls, v):
        if v < 1:
            raise ValueError('Budgets must be positive')
        return v

    def with_seed(self, seed: int) -> 'SearchBudget':
        return self.model_copy(update={'seed': seed})
