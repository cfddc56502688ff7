"""
Configuration for the n-widths laboratory
"""
import os
from typing import Dict, Any, List, Optional, Mapping

import structlog
from dotenv import load_dotenv, dotenv_values
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from exceptions import ScenarioError

# Load environment variables
load_dotenv()

logger = structlog.get_logger()


class Config:
    """Configuration class for the n-widths laboratory"""

    # Search budgets
    SEARCH_RESTARTS = int(os.getenv('WIDTHS_SEARCH_RESTARTS', '64'))
    INNER_STARTS = int(os.getenv('WIDTHS_INNER_STARTS', '8'))
    MAX_ITER = int(os.getenv('WIDTHS_MAX_ITER', '400'))
    ALT_ROUNDS = int(os.getenv('WIDTHS_ALT_ROUNDS', '4'))
    WORKERS = int(os.getenv('WIDTHS_WORKERS', '1'))
    SEED = int(os.getenv('WIDTHS_SEED', '0'))

    # Duality suite budget
    DUALITY_RESTARTS = int(os.getenv('WIDTHS_DUALITY_RESTARTS', '6'))
    DUALITY_INNER_STARTS = int(os.getenv('WIDTHS_DUALITY_INNER_STARTS', '4'))
    DUALITY_MAX_ITER = int(os.getenv('WIDTHS_DUALITY_MAX_ITER', '120'))
    DUALITY_ALT_ROUNDS = int(os.getenv('WIDTHS_DUALITY_ALT_ROUNDS', '1'))

    # Projection power iteration
    POWER_ITER = int(os.getenv('WIDTHS_POWER_ITER', '2000'))
    POWER_RTOL = float(os.getenv('WIDTHS_POWER_RTOL', '1e-9'))

    # Tolerances
    ORACLE_RTOL = float(os.getenv('WIDTHS_ORACLE_RTOL', '1e-4'))
    DUALITY_RTOL = float(os.getenv('WIDTHS_DUALITY_RTOL', '0.03'))
    LINEARITY_TOL = float(os.getenv('WIDTHS_LINEARITY_TOL', '1e-8'))
    EPSILON = float(os.getenv('WIDTHS_EPSILON', '1e-3'))
    CHAIN_TOL = float(os.getenv('WIDTHS_CHAIN_TOL', '1e-6'))
    SLOPE_TOL = float(os.getenv('WIDTHS_SLOPE_TOL', '0.1'))
    ENVELOPE_TOL = float(os.getenv('WIDTHS_ENVELOPE_TOL', '0.15'))
    RATIO_C = float(os.getenv('WIDTHS_RATIO_C', '3.0'))
    GAMMA_RTOL = float(os.getenv('WIDTHS_GAMMA_RTOL', '0.05'))

    # Dual-ball sampling for l_p bases
    DUAL_SAMPLE_SIZE = int(os.getenv('WIDTHS_DUAL_SAMPLE_SIZE', '2000'))

    # Output Configuration
    OUTPUT_DIR = os.getenv('WIDTHS_OUTPUT_DIR', './output')

    # Logging Configuration
    LOG_LEVEL = os.getenv('WIDTHS_LOG_LEVEL', 'INFO')

    @classmethod
    def duality_budget(cls) -> Dict[str, Any]:
        """Default budget of the duality suite, four searches per row"""
        return {
            'restarts': cls.DUALITY_RESTARTS,
            'inner_starts': cls.DUALITY_INNER_STARTS,
            'max_iter': cls.DUALITY_MAX_ITER,
            'alt_rounds': cls.DUALITY_ALT_ROUNDS,
        }

    @classmethod
    def validate_config(cls) -> bool:
        """Validate that configured numbers are usable"""
        problems = []
        if cls.SEARCH_RESTARTS < 1 or cls.INNER_STARTS < 1:
            problems.append('restarts and inner starts must be positive')
        if cls.MAX_ITER < 1 or cls.ALT_ROUNDS < 1:
            problems.append('iteration budgets must be positive')
        if cls.WORKERS < 1:
            problems.append('workers must be positive')
        if min(cls.DUALITY_RESTARTS, cls.DUALITY_INNER_STARTS, cls.DUALITY_MAX_ITER, cls.DUALITY_ALT_ROUNDS) < 1:
            problems.append('duality budgets must be positive')
        if cls.POWER_ITER < 1 or not 0 < cls.POWER_RTOL < 1:
            problems.append('power iteration settings out of range')
        if not 0 < cls.EPSILON < 1:
            problems.append('epsilon must lie in (0, 1)')
        if cls.RATIO_C <= 1:
            problems.append('ratio constant must exceed 1')
        if cls.DUAL_SAMPLE_SIZE < 8:
            problems.append('dual sample too small')

        if problems:
            logger.warning("Invalid configuration", problems=problems)
            return False

        return True


COMMANDS = ('widths', 'sweep', 'extension-demo', 'duality')

REQUIRED_KEYS = {
    'widths': ('dimension', 'n'),
    'sweep': ('regime', 'n_list'),
    'extension-demo': ('fixture',),
    'duality': ('dimension',),
}


def _split_list(value: Any) -> Any:
    """Accept comma-separated strings for list-valued keys"""
    if isinstance(value, str):
        return [item.strip() for item in value.split(',') if item.strip()]
    return value


class ScenarioConfig(BaseModel):
    """One validated scenario: flat keys shared by all commands"""
    command: str = Field(..., description="widths, sweep, extension-demo or duality")

    # Function class
    regime: Optional[str] = Field(None, description="sobolev, super_small, exponential or custom")
    assume_regime: Optional[str] = Field(None, description="Regime used when the classifier abstains")
    p: float = Field(2.0, description="Source exponent")
    q: float = Field(2.0, description="Target exponent")
    beta: float = Field(0.0, description="Phase shift parameter")
    r: Optional[float] = Field(None, description="Sobolev exponent")
    rho: Optional[float] = Field(None, description="Logarithmic exponent")
    mu: Optional[float] = Field(None, description="Exponential rate")
    gamma: Optional[float] = Field(None, description="Exponential power")
    custom: Optional[List[float]] = Field(None, description="Explicit multiplier table")
    n_list: List[int] = Field(default_factory=list, description="Sweep degrees")

    # Finite-dimensional scenarios
    n: int = Field(1, description="Width order")
    dimension: int = Field(3, description="Ambient dimension")
    diag: Optional[List[float]] = Field(None, description="Diagonal of the compact body")
    target: str = Field('lp', description="lp or polytope")
    facets: Optional[str] = Field(None, description="Polytope facets, rows separated by ';'")
    widths: List[str] = Field(default_factory=lambda: ['oracle', 'kolmogorov', 'gelfand', 'linear'])
    fixture: Optional[str] = Field(None, description="hilbert or strict_gap")
    suite_size: int = Field(20, description="Number of seeded operators in the duality suite")
    exponents: List[float] = Field(default_factory=lambda: [1.5, 2.0, 3.0],
                                   description="Exponents drawn for p and q in the duality suite")

    # Budgets and tolerances
    seed: int = Field(default_factory=lambda: Config.SEED)
    restarts: int = Field(default_factory=lambda: Config.SEARCH_RESTARTS)
    inner_starts: int = Field(default_factory=lambda: Config.INNER_STARTS)
    max_iter: int = Field(default_factory=lambda: Config.MAX_ITER)
    alt_rounds: int = Field(default_factory=lambda: Config.ALT_ROUNDS)
    workers: int = Field(default_factory=lambda: Config.WORKERS)
    sample_size: int = Field(default_factory=lambda: Config.DUAL_SAMPLE_SIZE)
    epsilon: float = Field(default_factory=lambda: Config.EPSILON)
    slope_tol: float = Field(default_factory=lambda: Config.SLOPE_TOL)
    envelope_tol: float = Field(default_factory=lambda: Config.ENVELOPE_TOL)
    ratio_c: float = Field(default_factory=lambda: Config.RATIO_C)
    gamma_rtol: float = Field(default_factory=lambda: Config.GAMMA_RTOL)

    @model_validator(mode='before')
    @classmethod
    def apply_duality_budget(cls, data):
        """Budget keys left unset in a duality scenario take the duality defaults"""
        if isinstance(data, dict) and data.get('command') == 'duality':
            data = {**Config.duality_budget(), **data}
        return data

    @field_validator('n_list', 'widths', 'custom', 'diag', 'exponents', mode='before')
    @classmethod
    def split_lists(cls, v):
        """Parse comma-separated list keys"""
        return _split_list(v)

    @field_validator('command')
    @classmethod
    def validate_command(cls, v):
        """Ensure the command is known"""
        if v not in COMMANDS:
            raise ValueError(f'Unknown command: {v}')
        return v

    @field_validator('regime')
    @classmethod
    def validate_regime(cls, v):
        """Ensure the multiplier family is known"""
        if v is not None and v not in ('sobolev', 'super_small', 'exponential', 'custom'):
            raise ValueError(f'Unknown regime: {v}')
        return v

    @field_validator('assume_regime')
    @classmethod
    def validate_assumed_regime(cls, v):
        """Ensure the smoothness label is known"""
        if v is not None and v not in ('super_small', 'small', 'finite', 'infinite', 'super_high'):
            raise ValueError(f'Unknown smoothness regime: {v}')
        return v

    @field_validator('n_list')
    @classmethod
    def validate_n_list(cls, v):
        """Sweep degrees must be positive and strictly increasing"""
        if any(n < 1 for n in v):
            raise ValueError('Sweep degrees must be positive')
        if any(b <= a for a, b in zip(v, v[1:])):
            raise ValueError('Sweep degrees must be strictly increasing')
        return v

    @field_validator('restarts', 'inner_starts', 'max_iter', 'alt_rounds', 'workers',
                     'sample_size', 'suite_size')
    @classmethod
    def validate_positive(cls, v):
        """Budgets must be positive"""
        if v < 1:
            raise ValueError('Budgets must be positive')
        return v

    @model_validator(mode='after')
    def validate_preconditions(self):
        """Check module preconditions before any computation"""
        if self.command == 'duality' and any(not 1 < e < float('inf') for e in self.exponents):
            raise ValueError('duality exponents must lie in (1, inf)')
        if self.command in ('sweep', 'duality'):
            for name in ('p', 'q'):
                value = getattr(self, name)
                if not 1 < value < float('inf'):
                    raise ValueError(f'{name} must lie in (1, inf)')
        else:
            if self.p < 1 or self.q < 1:
                raise ValueError('exponents must be at least 1')
        if self.command in ('widths', 'duality'):
            if not 1 <= self.dimension <= 8:
                raise ValueError('dimension must lie in [1, 8]')
            if self.n < 0:
                raise ValueError('n must be nonnegative')
        if self.diag is not None:
            if len(self.diag) != self.dimension:
                raise ValueError('diag length must equal dimension')
            if any(v <= 0 for v in self.diag):
                raise ValueError('diag entries must be positive')
        if self.target not in ('lp', 'polytope'):
            raise ValueError('target must be lp or polytope')
        if self.target == 'polytope' and not self.facets:
            raise ValueError('polytope target needs facets')
        if self.fixture is not None and self.fixture not in ('hilbert', 'strict_gap'):
            raise ValueError(f'Unknown fixture: {self.fixture}')
        return self

    @classmethod
    def from_sources(cls,
                     command: str,
                     config_path: Optional[str] = None,
                     overrides: Optional[Mapping[str, str]] = None) -> 'ScenarioConfig':
        """Build a scenario from a key=value file plus command-line overrides"""
        values: Dict[str, Any] = {}
        if config_path:
            if not os.path.exists(config_path):
                raise ScenarioError(f'Config file not found: {config_path}')
            values.update({k.lower(): v for k, v in dotenv_values(config_path).items()
                           if v is not None})
        if overrides:
            values.update({k.lower(): v for k, v in overrides.items()})

        missing = [key for key in REQUIRED_KEYS[command] if key not in values] \
            if command in REQUIRED_KEYS else []
        if missing:
            raise ScenarioError(f'Missing required keys for {command}: {missing}')

        values['command'] = command
        try:
            return cls(**values)
        except ValidationError as e:
            raise ScenarioError(str(e)) from e

    def parsed_facets(self) -> Optional[List[List[float]]]:
        """Polytope facets as nested lists"""
        if not self.facets:
            return None
        return [[float(x) for x in row.split(',')] for row in self.facets.split(';') if row.strip()]
