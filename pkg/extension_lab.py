"""
Isometric extensions realizing absolute widths at desk scale

X embeds isometrically into bounded functions on a sample of B(X*) through
x -> <x, .>. Adding the best-approximation coefficient functions c_k of
Gelfand-optimal functionals phi_1..phi_n gives an extension in which the
operator x -> sum <x, phi_k> c_k approximates A within d^n(A, X) + eps.
"""
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator
from scipy.optimize import linprog, minimize

from config import Config
from classes import conjugate_exponent
from exceptions import DependentBasisError, ExtensionCoverageError, SpaceDefinitionError
from finite_spaces import (CompactBody, FiniteNormedSpace, dual_ball_sample, dual_ball_vertices,
                           norms, polytope, weighted_lp, weighted_lp_norm)
from models import ExtensionRecord, SearchBudget, WidthEstimate
from widths_engine import WidthProblem, best_approximation, certified_lower, gelfand_search, linear_search

logger = structlog.get_logger()


class CoefficientFunction(BaseModel):
    """Value table of c_k over the dual sample"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    values: np.ndarray = Field(..., description="c_k(phi_s) for every sample row")
    linear: bool = Field(False, description="True when the table is a functional of X**")
    functional: Optional[np.ndarray] = Field(None, description="Fitted v with c_k(phi) ~ <v, phi>")

    @field_validator('values', mode='before')
    @classmethod
    def as_array(cls, v):
        return np.asarray(v, dtype=float)

    @property
    def bracket(self) -> np.ndarray:
        """The class [c_k] modulo X**: zero for linear tables"""
        return np.zeros_like(self.values) if self.linear else self.values


class ExtensionSpace(BaseModel):
    """lin{X, [c_1], ..., [c_n]} with the sup norm over the dual sample"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    base: FiniteNormedSpace
    sample: np.ndarray
    coefficients: List[CoefficientFunction]
    slack: float = Field(0.0, description="Growth of the extension value when the dual sample doubles")

    @property
    def n_ext(self) -> int:
        """Number of genuinely new directions"""
        return sum(not c.linear for c in self.coefficients)

    @property
    def tables(self) -> np.ndarray:
        """c_k(phi_s) as a (samples, n) array; linear tables are realized in X"""
        columns = []
        for c in self.coefficients:
            columns.append(self.sample @ c.functional if c.linear else c.values)
        return np.column_stack(columns) if columns else np.zeros((len(self.sample), 0))

    def norm(self, x: np.ndarray, t: Optional[np.ndarray] = None) -> float:
        """||x + sum t_k c_k|| = max_s |<x, phi_s> + sum_k t_k c_k(phi_s)|, t over the new directions"""
        values = self.sample @ np.asarray(x, dtype=float)
        if t is not None and self.n_ext:
            nonlinear = np.column_stack([c.values for c in self.coefficients if not c.linear])
            values = values + nonlinear @ np.asarray(t, dtype=float)
        return float(np.max(np.abs(values)))


def optimal_functionals(A: CompactBody, ambient: FiniteNormedSpace, n: int,
                        epsilon: Optional[float] = None,
                        budget: Optional[SearchBudget] = None,
                        seeds=()) -> Tuple[np.ndarray, WidthEstimate, float]:
    """Gelfand-optimal phi_1..phi_n (columns) with their re-evaluated section value"""
    epsilon = Config.EPSILON if epsilon is None else epsilon
    if n == 0:
        estimate, _ = gelfand_search(A, ambient, 0, budget)
        return np.zeros((A.dim, 0)), estimate, estimate.upper
    estimate, Phi = gelfand_search(A, ambient, n, budget, seeds=seeds)
    problem = WidthProblem(A, ambient, budget)
    achieved = problem.section_sup(Phi)[0] * problem.scale
    if achieved > estimate.upper * (1 + epsilon):
        logger.warning("Functionals miss the Gelfand value by more than epsilon",
                       achieved=achieved, gelfand=estimate.upper, epsilon=epsilon)
    return Phi, estimate, float(achieved)


def best_approx_coeffs(phi: np.ndarray, basis: np.ndarray, A: CompactBody) -> np.ndarray:
    """argmin_c ||diag . (phi - basis c)||_p', the (lin A)* best approximation"""
    basis = np.asarray(basis, dtype=float).reshape(A.dim, -1)
    G = A.diag[:, None] * basis
    if basis.shape[1] and np.linalg.matrix_rank(G) < basis.shape[1]:
        raise DependentBasisError('Approximating functionals are linearly dependent')
    c, _ = best_approximation(A.diag * np.asarray(phi, dtype=float), G, conjugate_exponent(A.p))
    return c


def coefficient_tables(A: CompactBody, sample: np.ndarray, Phi: np.ndarray,
                       workers: int = 1) -> List[CoefficientFunction]:
    """c_k over the whole sample, one table per functional"""
    Phi = np.asarray(Phi, dtype=float).reshape(A.dim, -1)
    if Phi.shape[1] == 0:
        return []
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda phi: best_approx_coeffs(phi, Phi, A), sample))
    table = np.vstack(rows)
    return [CoefficientFunction(values=table[:, k]) for k in range(Phi.shape[1])]


def linearity_filter(c: CoefficientFunction, sample: np.ndarray,
                     tol: Optional[float] = None) -> CoefficientFunction:
    """Mark c linear when a functional reproduces its table to tol times its sup-range"""
    tol = Config.LINEARITY_TOL if tol is None else tol
    v = np.linalg.lstsq(sample, c.values, rcond=None)[0]
    deviation = float(np.max(np.abs(sample @ v - c.values))) if len(c.values) else 0.0
    scale = float(np.max(np.abs(c.values))) if len(c.values) else 0.0
    linear = deviation <= tol * scale or scale == 0.0
    logger.debug("Linearity filter", deviation=deviation, scale=scale, linear=linear)
    return CoefficientFunction(values=c.values, linear=linear, functional=v)


def build_extension(base: FiniteNormedSpace, sample: np.ndarray,
                    coefficients: List[CoefficientFunction]) -> ExtensionSpace:
    """Extension of X by the coefficient functions; polytope bases need every dual vertex"""
    sample = np.asarray(sample, dtype=float)
    if base.kind == 'polytope':
        for vertex in dual_ball_vertices(base):
            if not np.any(np.all(np.abs(sample - vertex) <= 1e-9, axis=1)):
                raise ExtensionCoverageError(f'Dual vertex {vertex} missing from the sample')
    for c in coefficients:
        if len(c.values) != len(sample):
            raise ExtensionCoverageError('Coefficient table does not match the sample')
    return ExtensionSpace(base=base, sample=sample, coefficients=list(coefficients))


def _residual_functionals(A: CompactBody, ext: ExtensionSpace, Phi: np.ndarray,
                          m: Optional[int] = None, Y: Optional[np.ndarray] = None) -> np.ndarray:
    """Rows phi_s - sum_{k<=m} c_k(phi_s) phi_k - sum_{k>m} <y_k, phi_s> phi_k"""
    tables = ext.tables
    n = Phi.shape[1]
    m = n if m is None else m
    weights = np.zeros((len(ext.sample), n))
    weights[:, :m] = tables[:, :m]
    if m < n:
        weights[:, m:] = ext.sample @ Y
    return ext.sample - weights @ Phi.T


def extension_width_value(A: CompactBody, ext: ExtensionSpace, Phi: np.ndarray) -> WidthEstimate:
    """sup_{x in A} ||j(x) - sum <x, phi_k> c_k|| over the sampled extension

    The supremum swaps exactly: max over the sample of ||diag . (phi_s - sum c_k(phi_s) phi_k)||_p'.
    """
    Phi = np.asarray(Phi, dtype=float).reshape(A.dim, -1)
    residuals = _residual_functionals(A, ext, Phi)
    value = float(np.max(weighted_lp_norm(A.diag * residuals, conjugate_exponent(A.p), np.ones(A.dim))))
    n = Phi.shape[1]
    return WidthEstimate(n=n, lower=0.0, upper=value, method=['extension-value'], m=n,
                         certified=ext.base.kind == 'polytope')


def _mixed_value(A: CompactBody, ext: ExtensionSpace, Phi: np.ndarray, m: int, Y: np.ndarray) -> float:
    residuals = _residual_functionals(A, ext, Phi, m, Y)
    return float(np.max(weighted_lp_norm(A.diag * residuals, conjugate_exponent(A.p), np.ones(A.dim))))


def _optimize_tail(A: CompactBody, ext: ExtensionSpace, Phi: np.ndarray, m: int,
                   budget: SearchBudget) -> float:
    """Best elements y_{m+1..n} of X for the functionals left outside the extension"""
    d, n = Phi.shape
    start = np.column_stack([c.functional for c in ext.coefficients[m:]])
    objective = lambda flat: _mixed_value(A, ext, Phi, m, flat.reshape(d, n - m))
    best = objective(start.ravel())
    for _ in range(budget.alt_rounds):
        result = minimize(objective, start.ravel(), method='Nelder-Mead',
                          options={'maxiter': budget.max_iter * d * (n - m), 'xatol': 1e-12,
                                   'fatol': 1e-14, 'adaptive': True})
        if result.fun >= best - 1e-15:
            break
        best, start = float(result.fun), result.x.reshape(d, n - m)
    return best


def _fixed_functional_linear(A: CompactBody, X: FiniteNormedSpace, Phi: np.ndarray,
                             ext: ExtensionSpace, budget: SearchBudget) -> float:
    """min over Y of sup_{x in A} ||x - Y Phi^T x||_X with Phi fixed"""
    d, n = Phi.shape
    problem = WidthProblem(A, X, budget)
    start = np.column_stack([c.functional for c in ext.coefficients])
    objective = lambda flat: problem.operator_sup(np.eye(d) - flat.reshape(d, n) @ Phi.T)[0]
    best = objective(start.ravel())
    for _ in range(budget.alt_rounds):
        result = minimize(objective, start.ravel(), method='Nelder-Mead',
                          options={'maxiter': budget.max_iter * d * n, 'xatol': 1e-12,
                                   'fatol': 1e-14, 'adaptive': True})
        if result.fun >= best - 1e-15:
            break
        best, start = float(result.fun), result.x.reshape(d, n)
    return best * problem.scale


def preabsolute_chain(A: CompactBody, ambient: FiniteNormedSpace, n: int,
                      budget: Optional[SearchBudget] = None,
                      epsilon: Optional[float] = None,
                      sample: Optional[np.ndarray] = None,
                      seeds=(),
                      tol: Optional[float] = None) -> Tuple[List[WidthEstimate], ExtensionSpace, np.ndarray]:
    """Upper bounds on Lambda_{n,m}, m = 0..n, with the extension and functionals used

    Entry m keeps the first m coefficient functions as extension directions and
    approximates with the remaining functionals inside X.
    """
    budget = budget or SearchBudget()
    tol = Config.CHAIN_TOL if tol is None else tol
    log = logger.bind(component='preabsolute_chain', n=n)
    lower, lower_method = certified_lower(A, ambient, n)

    if n == 0:
        radius = linear_search(A, ambient, 0, budget)
        sample = dual_ball_sample(ambient, Config.DUAL_SAMPLE_SIZE, budget.seed) if sample is None else sample
        ext = build_extension(ambient, sample, [])
        return [radius.model_copy(update={'m': 0})], ext, np.zeros((A.dim, 0))

    Phi, gelfand, _ = optimal_functionals(A, ambient, n, epsilon, budget, seeds=seeds)
    if sample is None:
        sample = dual_ball_sample(ambient, Config.DUAL_SAMPLE_SIZE, budget.seed)
    tables = [linearity_filter(c, sample) for c in coefficient_tables(A, sample, Phi, budget.workers)]
    ext = build_extension(ambient, sample, tables)
    log.info("Extension built", samples=len(sample), nonlinear=ext.n_ext)

    linear = linear_search(A, ambient, n, budget)
    values = [min(linear.upper, _fixed_functional_linear(A, ambient, Phi, ext, budget))]
    for m in range(1, n):
        values.append(_optimize_tail(A, ext, Phi, m, budget))
    values.append(extension_width_value(A, ext, Phi).upper)
    if ambient.kind != 'polytope':
        ext = ext.model_copy(update={'slack': extension_slack(A, ambient, Phi, len(sample), budget.seed,
                                                             value=values[-1])})
        log.info("Sampling slack", slack=ext.slack, samples=len(sample))

    chain = []
    running = np.inf
    for m, raw in enumerate(values):
        flags = []
        if raw > running + tol:
            log.warning("Chain increased with m", m=m, raw=raw, previous=running)
            flags.append('chain-monotone-adjusted')
        running = min(running, raw)
        method = ['linear-search'] if m == 0 else ['extension-value'] if m == n else ['partial-extension']
        chain.append(WidthEstimate(n=n, m=m, lower=min(lower, running), upper=running,
                                   method=method + lower_method, flags=flags,
                                   converged=linear.converged and gelfand.converged))
    if values[-1] > gelfand.upper * (1 + (epsilon if epsilon is not None else Config.EPSILON)) + ext.slack + tol:
        log.warning("Extension value above Gelfand value plus epsilon and sampling slack",
                    extension=values[-1], gelfand=gelfand.upper, slack=ext.slack)
    return chain, ext, Phi


def extension_slack(A: CompactBody, ambient: FiniteNormedSpace, Phi: np.ndarray,
                    sample_size: Optional[int] = None, seed: int = 0,
                    value: Optional[float] = None) -> float:
    """Increase of the extension value under one doubling of the dual sample

    value is the extension value on the first sample when the caller has it.
    """
    size = sample_size or Config.DUAL_SAMPLE_SIZE
    counts = (2 * size,) if value is not None else (size, 2 * size)
    values = [] if value is None else [value]
    for count in counts:
        sample = dual_ball_sample(ambient, count, seed)
        tables = [linearity_filter(c, sample) for c in coefficient_tables(A, sample, Phi)]
        values.append(extension_width_value(A, build_extension(ambient, sample, tables), Phi).upper)
    return max(values[1] - values[0], 0.0)


# ---------------------------------------------------------------------------
# strict-gap fixture
# ---------------------------------------------------------------------------

STRICT_GAP_GELFAND = 0.5
STRICT_GAP_LINEAR = 4.0 / 7.0
STRICT_GAP_MARGIN = STRICT_GAP_LINEAR - STRICT_GAP_GELFAND


def strict_gap_fixture() -> Tuple[CompactBody, FiniteNormedSpace, int]:
    """A = B(l_1^3) in ||x|| = max(|x_1|, |x_2|, |x_3|, 2|x_1 + x_2 + x_3|), n = 1

    d^1 = 1/2 at phi = (1, 1, 1) and lambda_1 = 4/7 at P x = <x, (1, 1, 1)> (3/7)(1, 1, 1).
    """
    facets = np.vstack([np.eye(3), -np.eye(3), [[2.0, 2.0, 2.0]], [[-2.0, -2.0, -2.0]]])
    return CompactBody(p=1.0, diag=np.ones(3)), polytope(facets), 1


def hilbert_fixture(dimension: int = 3) -> Tuple[CompactBody, FiniteNormedSpace, int]:
    """diag(1, 1/2, ..., 1/d) . B(l_2) in l_2, n = 1"""
    return CompactBody(p=2.0, diag=1.0 / np.arange(1, dimension + 1)), weighted_lp(dimension, 2.0), 1


def _cube_directions(resolution: int, d: int) -> np.ndarray:
    """Grid on the faces psi_j = 1 of the unit cube; psi and -psi give the same operators"""
    axis = np.linspace(-1.0, 1.0, resolution + 1)
    mesh = np.stack(np.meshgrid(*([axis] * (d - 1)), indexing='ij'), axis=-1).reshape(-1, d - 1)
    faces = [np.insert(mesh, j, 1.0, axis=1) for j in range(d)]
    return np.unique(np.vstack(faces), axis=0)


def _rank_one_linear_value(A: CompactBody, facets: np.ndarray, psi: np.ndarray) -> float:
    """min_w max_j diag_j ||e_j - psi_j w||_X as an LP (l_1 source, polytope target)"""
    d = A.dim
    rows, rhs = [], []
    for j in range(d):
        for f in facets:
            rows.append(np.r_[-A.diag[j] * psi[j] * f, -1.0])
            rhs.append(-A.diag[j] * f[j])
    result = linprog(np.r_[np.zeros(d), 1.0], A_ub=np.array(rows), b_ub=np.array(rhs),
                     bounds=[(None, None)] * (d + 1), method='highs')
    if not result.success:
        raise SpaceDefinitionError(f'Rank-one LP failed: {result.message}')
    return float(result.fun)


def exhaustive_gap_certificate(A: CompactBody, X: FiniteNormedSpace, resolution: int = 64) -> dict:
    """Grid certificate of lambda_1(A, X) - d^1(A, X) > 0

    The Gelfand side is exact per direction, so its grid minimum is an upper
    bound on d^1. The linear side is an exact LP per direction; its grid
    minimum minus the Lipschitz constant times the grid step is a lower bound
    on lambda_1.
    """
    if A.p != 1 or X.kind != 'polytope':
        raise SpaceDefinitionError('Certificate needs an l_1 source and a polytope target')
    problem = WidthProblem(A, X)
    directions = _cube_directions(resolution, A.dim)
    gelfand = np.array([problem.section_sup(psi[:, None])[0] * problem.scale for psi in directions])
    linear = np.array([_rank_one_linear_value(A, X.facets, psi) for psi in directions])

    radius = float(np.max(A.diag * norms(X, np.eye(A.dim))))
    lipschitz = 2.0 * radius * float(np.max(A.diag)) / float(np.min(A.diag))
    step = 1.0 / resolution
    linear_lower = float(np.min(linear)) - lipschitz * step
    gelfand_upper = float(np.min(gelfand))
    report = {
        'resolution': resolution,
        'directions': int(len(directions)),
        'gelfand_upper': gelfand_upper,
        'gelfand_direction': directions[int(np.argmin(gelfand))].tolist(),
        'linear_grid_min': float(np.min(linear)),
        'linear_direction': directions[int(np.argmin(linear))].tolist(),
        'lipschitz': lipschitz,
        'linear_lower': linear_lower,
        'certified_margin': linear_lower - gelfand_upper,
        'certified': linear_lower > gelfand_upper,
    }
    logger.info("Strict-gap certificate", **{k: v for k, v in report.items() if not isinstance(v, list)})
    return report


# ---------------------------------------------------------------------------
# replay files
# ---------------------------------------------------------------------------

def extension_record(ext: ExtensionSpace, Phi: np.ndarray, A: CompactBody) -> ExtensionRecord:
    base = ext.base
    return ExtensionRecord(
        dimension=base.dim,
        n=int(np.asarray(Phi).reshape(base.dim, -1).shape[1]),
        base_kind=base.kind,
        base_p=None if base.kind == 'polytope' else float(base.p),
        base_weights=None if base.kind == 'polytope' else base.weights.tolist(),
        base_facets=base.facets.tolist() if base.kind == 'polytope' else None,
        source_p=float(A.p),
        diag=A.diag.tolist(),
        functionals=np.asarray(Phi).reshape(base.dim, -1).T.tolist(),
        sample=ext.sample.tolist(),
        tables=[c.values.tolist() for c in ext.coefficients],
        nonlinear=[not c.linear for c in ext.coefficients],
        linear_parts=[c.functional.tolist() for c in ext.coefficients],
        slack=float(ext.slack),
    )


def load_extension(record: ExtensionRecord) -> Tuple[ExtensionSpace, np.ndarray, CompactBody]:
    if record.base_kind == 'polytope':
        base = polytope(record.base_facets)
    else:
        base = weighted_lp(record.dimension, record.base_p, record.base_weights)
    coefficients = [CoefficientFunction(values=values, linear=not nonlinear, functional=np.asarray(v))
                    for values, nonlinear, v in zip(record.tables, record.nonlinear, record.linear_parts)]
    Phi = np.asarray(record.functionals, dtype=float).reshape(record.n, record.dimension).T
    A = CompactBody(p=record.source_p, diag=record.diag)
    ext = build_extension(base, record.sample, coefficients).model_copy(update={'slack': record.slack})
    return ext, Phi, A
