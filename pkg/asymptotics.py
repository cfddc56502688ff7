"""
n-sweeps of discretized multiplier classes, order fits and regime verdicts

Estimates at index n bracket the widths of rank 2n: the upper tracker is the
worst-case error of the Fourier projection S_n, the lower tracker the
Bernstein bound over trigonometric polynomials of degree n + 1. Fits use the
abscissa m = n + 1 so that lambda(n + 1) sequences are fitted exactly.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from scipy.optimize import curve_fit

from config import Config
from classes import FunctionClass, SequenceKind, regime_classify
from exceptions import CapacityError, FitError, RegimeError
from fourier_core import make_grid
from models import FitResult, RegimeVerdict, SearchBudget, SmoothnessRegime, SweepResult, VerdictReport, \
    WidthEstimate
from widths_engine import enforce_monotone, projection_upper_bound, trig_lower_bound

logger = structlog.get_logger()

DEFAULT_N_LIST = [8, 16, 32, 64, 128, 256]
CSV_COLUMNS = ['n', 'lower', 'upper', 'method', 'certified', 'converged', 'rank']


def describe_class(cls: FunctionClass, q: float) -> str:
    seq = cls.multiplier
    if seq.kind == SequenceKind.SOBOLEV:
        family = f'sobolev r={seq.r:g}'
    elif seq.kind == SequenceKind.SUPER_SMALL:
        family = f'super_small rho={seq.rho:g} offset={seq.base_exponent:g}'
    elif seq.kind == SequenceKind.CUSTOM:
        family = f'custom table of {len(seq.custom)}'
    else:
        family = f'exponential mu={seq.mu:g} gamma={seq.gamma:g}'
    return f'{family} p={cls.p:g} q={q:g} beta={cls.beta:g}'


def grid_capacity(n_list: List[int], K: Optional[int] = None, N: Optional[int] = None) -> Tuple[int, int]:
    """Tail resolution K = 4 max n and the smallest power-of-two grid with N >= 4K"""
    top = max(n_list, default=1)
    K = 4 * top if K is None else K
    if top > K // 4:
        raise CapacityError(f'n={top} exceeds the grid capacity K/4 = {K // 4}')
    if N is None:
        N = 1 << int(np.ceil(np.log2(4 * K)))
    if K >= N // 2:
        raise CapacityError(f'K={K} cannot be resolved on N={N}')
    return K, N


def _sweep_point(cls: FunctionClass, q: float, n: int, K: int, N: int, budget: SearchBudget) -> WidthEstimate:
    upper = projection_upper_bound(cls, q, n, make_grid(N), K, budget)
    lower = trig_lower_bound(cls, q, n)
    flags = []
    if lower > upper.upper:
        # the projection value is attained, so the iteration fell short of its sup
        logger.warning("Projection estimate below certified lower bound", n=n,
                       upper=upper.upper, lower=lower)
        flags.append('upper-raised-to-lower')
    method = upper.method + ['trig-lower-bound']
    return upper.model_copy(update={'lower': lower, 'upper': max(upper.upper, lower),
                                    'method': method, 'flags': upper.flags + flags})


def sweep(cls: FunctionClass, q: float, n_list: List[int],
          budget: Optional[SearchBudget] = None,
          K: Optional[int] = None, N: Optional[int] = None,
          regime: Optional[SmoothnessRegime] = None) -> SweepResult:
    """One WidthEstimate per n for the class in L_q; deterministic under a fixed seed"""
    budget = budget or SearchBudget()
    n_list = [int(n) for n in n_list]
    K, N = grid_capacity(n_list, K, N)
    regime = SmoothnessRegime(regime) if regime is not None else regime_classify(cls.multiplier, cls.p, q)
    description = describe_class(cls, q)
    log = logger.bind(component='sweep', description=description)
    log.info("Starting sweep", n_list=n_list, K=K, N=N, regime=regime.value)

    with ThreadPoolExecutor(max_workers=budget.workers) as pool:
        estimates = list(pool.map(lambda n: _sweep_point(cls, q, n, K, N, budget), n_list))
    estimates = enforce_monotone(estimates)

    for e in estimates:
        log.debug("Sweep point", n=e.n, lower=e.lower, upper=e.upper, converged=e.converged)
    return SweepResult(description=description, regime=regime, p=cls.p, q=q, beta=cls.beta,
                       K=K, N=N, seed=budget.seed, n_list=n_list, estimates=estimates)


def _side_values(result: SweepResult, side: str) -> Tuple[np.ndarray, np.ndarray]:
    m = np.asarray(result.n_list, dtype=float) + 1.0
    values = np.array([getattr(e, side) for e in result.estimates], dtype=float)
    return m, values


def fit_values(m: np.ndarray, values: np.ndarray, model: str = 'power') -> FitResult:
    """Least-squares order fit of values against the abscissa m on the log scale"""
    m = np.asarray(m, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(values) < 4:
        raise FitError(f'Need at least 4 points to fit, got {len(values)}')
    if np.any(values <= 0) or not np.all(np.isfinite(values)):
        raise FitError('Log fits need positive finite values')
    log_m, log_v = np.log(m), np.log(values)

    if model == 'power':
        slope, intercept = np.polyfit(log_m, log_v, 1)
        residual = log_v - (slope * log_m + intercept)
        return FitResult(model=model, slope=float(slope), intercept=float(intercept),
                         residual=float(np.sqrt(np.mean(residual ** 2))), n_points=len(values))

    if model == 'stretched':
        decay = -log_v
        if np.any(decay <= 0):
            raise FitError('Stretched-exponential fit needs values below 1')
        # gamma from the log-log slope of -log v, then mu and c by linear regression
        gamma0 = float(np.polyfit(log_m, np.log(decay), 1)[0])
        slope, c0 = np.polyfit(m ** gamma0, log_v, 1)
        model_fn = lambda x, mu, gamma, c: -mu * x ** gamma + c
        try:
            (mu, gamma, c), _ = curve_fit(model_fn, m, log_v, p0=[max(-slope, 1e-6), gamma0, c0], maxfev=20000)
        except RuntimeError as e:
            logger.warning("Refinement of the stretched fit failed", error=str(e))
            mu, gamma, c = -slope, gamma0, c0
        residual = log_v - model_fn(m, mu, gamma, c)
        return FitResult(model=model, mu=float(mu), gamma=float(gamma), intercept=float(c),
                         residual=float(np.sqrt(np.mean(residual ** 2))), n_points=len(values))

    raise FitError(f'Unknown fit model: {model}')


def fit_order(result: SweepResult, model: str = 'power', side: str = 'upper') -> FitResult:
    """Fit one tracker of a sweep"""
    if side not in ('upper', 'lower'):
        raise FitError(f'Unknown sweep side: {side}')
    m, values = _side_values(result, side)
    return fit_values(m, values, model)


def _envelope_slope(m: np.ndarray, values: np.ndarray, mu: float, gamma: float) -> float:
    """Slope of log v + mu m^gamma against log m, the polynomial factor on top of the envelope"""
    if np.any(values <= 0):
        raise FitError('Envelope fit needs positive values')
    return float(np.polyfit(np.log(m), np.log(values) + mu * m ** gamma, 1)[0])


def _envelope_residual(m: np.ndarray, values: np.ndarray, mu: float, gamma: float, exponent: float) -> float:
    """Log-scale sup distance from C exp(-mu m^gamma) m^exponent at the best constant C"""
    r = np.log(values) + mu * m ** gamma - exponent * np.log(m)
    return float(0.5 * (np.max(r) - np.min(r)))


def verdict(result: SweepResult, predicted: RegimeVerdict,
            slope_tol: Optional[float] = None,
            envelope_tol: Optional[float] = None,
            ratio_c: Optional[float] = None,
            gamma_rtol: Optional[float] = None) -> VerdictReport:
    """Check a sweep against the predicted bracket of its regime"""
    slope_tol = Config.SLOPE_TOL if slope_tol is None else slope_tol
    envelope_tol = Config.ENVELOPE_TOL if envelope_tol is None else envelope_tol
    ratio_c = Config.RATIO_C if ratio_c is None else ratio_c
    gamma_rtol = Config.GAMMA_RTOL if gamma_rtol is None else gamma_rtol

    if not result.estimates:
        raise FitError('Cannot judge an empty sweep')
    if predicted.regime != result.regime:
        raise RegimeError(f'Sweep regime {result.regime.value} does not match prediction '
                          f'{predicted.regime.value}')
    expected_model = {
        SmoothnessRegime.SUPER_SMALL: 'ratio',
        SmoothnessRegime.SMALL: 'power',
        SmoothnessRegime.FINITE: 'power',
        SmoothnessRegime.INFINITE: 'envelope',
        SmoothnessRegime.SUPER_HIGH: 'stretched',
    }.get(predicted.regime)
    if expected_model != predicted.model:
        raise RegimeError(f'Model {predicted.model} does not belong to regime {predicted.regime.value}')

    log = logger.bind(component='verdict', regime=predicted.regime.value)
    m, upper = _side_values(result, 'upper')
    _, lower = _side_values(result, 'lower')
    checks, informational, statistics, diagnostics = {}, {}, {}, []

    if predicted.model == 'ratio':
        n = np.asarray(result.n_list, dtype=float)
        reference = np.log(n + 1.0) ** (-predicted.rho)
        if np.any(upper <= 0):
            raise FitError('Ratio check needs positive estimates')
        spread = float(np.max(np.abs(np.log(upper / reference))))
        statistics['max_log_ratio_upper'] = spread
        checks['upper_ratio'] = spread <= np.log(ratio_c)
        if np.all(lower > 0):
            lower_spread = float(np.max(np.abs(np.log(lower / reference))))
            statistics['max_log_ratio_lower'] = lower_spread
            informational['lower_ratio'] = lower_spread <= np.log(ratio_c)
        if not checks['upper_ratio']:
            diagnostics.append(f'estimate/phi(n) leaves [1/{ratio_c:g}, {ratio_c:g}]')

    elif predicted.model == 'power':
        lo = predicted.lower_exponent - slope_tol
        hi = predicted.upper_exponent + slope_tol
        statistics['bracket_low'], statistics['bracket_high'] = predicted.lower_exponent, predicted.upper_exponent
        upper_fit = fit_values(m, upper, 'power')
        statistics['upper_slope'] = upper_fit.slope
        statistics['upper_residual'] = upper_fit.residual
        checks['upper_slope'] = lo <= upper_fit.slope <= hi
        if not checks['upper_slope']:
            diagnostics.append(f'upper slope {upper_fit.slope:.4f} outside [{lo:.4f}, {hi:.4f}]')
        try:
            lower_fit = fit_values(m, lower, 'power')
            statistics['lower_slope'] = lower_fit.slope
            inside = lo <= lower_fit.slope <= hi
        except FitError as e:
            diagnostics.append(f'lower fit failed: {e}')
            inside = False
        # the small-smoothness lower exponent is out of reach of the desk-scale tracker
        if predicted.regime == SmoothnessRegime.SMALL:
            informational['lower_slope'] = inside
        else:
            checks['lower_slope'] = inside
            if not inside and 'lower_slope' in statistics:
                diagnostics.append(f'lower slope {statistics["lower_slope"]:.4f} outside [{lo:.4f}, {hi:.4f}]')

    elif predicted.model == 'envelope':
        lo = predicted.lower_exponent - envelope_tol
        hi = predicted.upper_exponent + envelope_tol
        for side, values in (('upper', upper), ('lower', lower)):
            try:
                slope = _envelope_slope(m, values, predicted.mu, predicted.gamma)
            except FitError as e:
                diagnostics.append(f'{side} envelope fit failed: {e}')
                checks[f'{side}_envelope'] = False
                continue
            statistics[f'{side}_envelope_slope'] = slope
            checks[f'{side}_envelope'] = lo <= slope <= hi
            if not checks[f'{side}_envelope']:
                diagnostics.append(f'{side} envelope slope {slope:.4f} outside [{lo:.4f}, {hi:.4f}]')
            # values must follow one member of the bracket, not only its trend
            exponent = min(max(slope, predicted.lower_exponent), predicted.upper_exponent)
            residual = _envelope_residual(m, values, predicted.mu, predicted.gamma, exponent)
            statistics[f'{side}_envelope_residual'] = residual
            checks[f'{side}_envelope_values'] = residual <= envelope_tol
            if not checks[f'{side}_envelope_values']:
                diagnostics.append(f'{side} values leave the envelope by {residual:.4f} in log scale')

    elif predicted.model == 'stretched':
        fit = fit_values(m, upper, 'stretched')
        statistics['gamma_hat'], statistics['mu_hat'] = fit.gamma, fit.mu
        statistics['fit_residual'] = fit.residual
        checks['gamma'] = abs(fit.gamma - predicted.gamma) <= gamma_rtol * predicted.gamma
        drift = _envelope_slope(m, upper, predicted.mu, predicted.gamma)
        statistics['drift_slope'] = drift
        checks['drift'] = abs(drift) <= slope_tol
        if not checks['gamma']:
            diagnostics.append(f'gamma_hat {fit.gamma:.4f} differs from {predicted.gamma:g} by more than '
                               f'{100 * gamma_rtol:g}%')
        if not checks['drift']:
            diagnostics.append(f'polynomial drift {drift:.4f} beyond {slope_tol:g}')

    if not all(e.converged for e in result.estimates):
        diagnostics.append('some sweep points ran out of search budget')
    passed = bool(checks) and all(checks.values())
    log.info("Verdict", passed=passed, **statistics)
    return VerdictReport(regime=predicted.regime, model=predicted.model, passed=passed, checks=checks,
                         informational=informational, statistics=statistics, diagnostics=diagnostics)


def fit_sweep(result: SweepResult, predicted: RegimeVerdict) -> SweepResult:
    """Attach the order fits that belong to the predicted model"""
    model = 'stretched' if predicted.model == 'stretched' else 'power'
    fits = {}
    for side in ('upper', 'lower'):
        try:
            fits[f'{side}_fit'] = fit_order(result, model, side)
        except FitError as e:
            logger.warning("Order fit skipped", side=side, error=str(e))
    return result.model_copy(update=fits)


def reference_curves(result: SweepResult, predicted: RegimeVerdict) -> dict:
    """Bracket lines through the first upper estimate, for plots"""
    m, upper = _side_values(result, 'upper')
    if not len(m):
        return {}
    if predicted.model == 'ratio':
        phi = np.log(m) ** (-predicted.rho)
        return {'phi(n)': phi * upper[0] / phi[0]}
    if predicted.model == 'power':
        return {f'n^{e:.3g}': upper[0] * (m / m[0]) ** e
                for e in sorted({predicted.lower_exponent, predicted.upper_exponent})}
    envelope = np.exp(-predicted.mu * (m ** predicted.gamma - m[0] ** predicted.gamma))
    curves = {'exp(-mu n^gamma)': upper[0] * envelope}
    if predicted.model == 'envelope' and predicted.upper_exponent > 0:
        curves['exp(-mu n^gamma) n^e'] = upper[0] * envelope * (m / m[0]) ** predicted.upper_exponent
    return curves


def sweep_frame(result: SweepResult) -> pd.DataFrame:
    """Sweep estimates with the fixed CSV columns"""
    rows = [{
        'n': e.n,
        'lower': e.lower,
        'upper': e.upper,
        'method': '+'.join(e.method),
        'certified': e.certified,
        'converged': e.converged,
        'rank': e.rank,
    } for e in result.estimates]
    return pd.DataFrame(rows, columns=CSV_COLUMNS)

