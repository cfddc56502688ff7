"""
Kolmogorov, Gelfand and linear widths

Finite-dimensional widths of A = diag . B(l_p^d) in a normed space X are
bracketed by seeded multistart searches over subspaces and operators (upper
side) and by explicit certificates (lower side). Discretized multiplier
classes get the projection estimator and a trigonometric lower bound.

Every inner supremum has an exact path when one exists:
  - polytope or l_inf target: sup over A is a max over facets
  - l_1 source: sup over A is a max over the vertices of A
  - p = 2 source with a weighted l_2 target: singular values
Everything else runs a batched ratio ascent, or the nonlinear power method
for l_s -> l_r operator norms.
"""
from concurrent.futures import ThreadPoolExecutor
from functools import cached_property
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.linalg import null_space, svdvals
from scipy.optimize import linprog, minimize

from classes import FunctionClass, conjugate_exponent, lambda_values
from config import Config
from exceptions import AliasingError, DimensionMismatchError, SpaceDefinitionError
from finite_spaces import (CompactBody, FiniteNormedSpace, dual_space, euclidean_comparison,
                           norms, weighted_lp, weighted_lp_norm)
from fourier_core import Grid, GridSignal, discrete_norm, filter_signal
from models import DualityRow, SearchBudget, WidthEstimate

logger = structlog.get_logger()

LINEAR_MAX_DIMENSION = 6


class DiagonalOperator(BaseModel):
    """u = diag(entries): l_p^d -> l_q^d"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    entries: np.ndarray
    p: float
    q: float

    @field_validator('entries', mode='before')
    @classmethod
    def as_array(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode='after')
    def validate_operator(self):
        if np.any(self.entries <= 0) or np.any(np.diff(self.entries) > 0):
            raise SpaceDefinitionError('Entries must be positive and nonincreasing')
        for name in ('p', 'q'):
            if not 1 < getattr(self, name) < np.inf:
                raise SpaceDefinitionError(f'{name} must lie in (1, inf)')
        return self

    @property
    def d(self) -> int:
        return int(self.entries.size)

    def body(self) -> CompactBody:
        return CompactBody(p=self.p, diag=self.entries)

    def target(self) -> FiniteNormedSpace:
        return weighted_lp(self.d, self.q)


def adjoint(u: DiagonalOperator) -> DiagonalOperator:
    """u*: l_q'^d -> l_p'^d with the same entries"""
    return DiagonalOperator(entries=u.entries, p=conjugate_exponent(u.q), q=conjugate_exponent(u.p))


def svd_oracle(u: DiagonalOperator, n: int) -> WidthEstimate:
    """sigma_{n+1}, equal to d_n = d^n = lambda_n for diagonal operators on l_2"""
    if u.p != 2 or u.q != 2:
        raise SpaceDefinitionError(f'Oracle needs p = q = 2, got p={u.p}, q={u.q}')
    sigma = np.sort(u.entries)[::-1]
    value = float(sigma[n]) if n < u.d else 0.0
    return WidthEstimate(n=n, lower=value, upper=value, method=['svd-oracle'], certified=True)


# ---------------------------------------------------------------------------
# best approximation in l_r
# ---------------------------------------------------------------------------

def _scalar_best_approximation(g: np.ndarray, h: np.ndarray, r: float) -> Tuple[float, float]:
    """Exact min_c ||g - c h||_r for r in {1, inf} by enumerating breakpoints"""
    support = np.abs(h) > 1e-15
    if not np.any(support):
        return 0.0, float(weighted_lp_norm(g, r, np.ones_like(g)))
    if r == 1:
        candidates = g[support] / h[support]
    else:
        gi, gj = np.meshgrid(g, g, indexing='ij')
        hi, hj = np.meshgrid(h, h, indexing='ij')
        with np.errstate(divide='ignore', invalid='ignore'):
            cands = np.concatenate([((gi - gj) / (hi - hj)).ravel(), ((gi + gj) / (hi + hj)).ravel(),
                                    g[support] / h[support]])
        candidates = cands[np.isfinite(cands)]
    residuals = np.abs(g[None, :] - candidates[:, None] * h[None, :])
    values = residuals.sum(axis=1) if r == 1 else residuals.max(axis=1)
    best = int(np.argmin(values))
    return float(candidates[best]), float(values[best])


def _lp_best_approximation(g: np.ndarray, G: np.ndarray, r: float) -> np.ndarray:
    """LP for r in {1, inf}: variables (c, t)"""
    m, n = G.shape
    if np.isinf(r):
        cost = np.r_[np.zeros(n), 1.0]
        A_ub = np.block([[-G, -np.ones((m, 1))], [G, -np.ones((m, 1))]])
        b_ub = np.r_[-g, g]
    else:
        cost = np.r_[np.zeros(n), np.ones(m)]
        A_ub = np.block([[-G, -np.eye(m)], [G, -np.eye(m)]])
        b_ub = np.r_[-g, g]
    result = linprog(cost, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * n + [(0, None)] * (len(cost) - n),
                     method='highs')
    if not result.success:
        raise SpaceDefinitionError(f'Best-approximation LP failed: {result.message}')
    return result.x[:n]


def best_approximation(g: np.ndarray, G: np.ndarray, r: float,
                       tie_break: bool = True) -> Tuple[np.ndarray, float]:
    """Coefficients c minimizing ||g - G c||_r and the residual norm

    r = 2 is least squares, 1 < r < inf a smooth convex problem solved by
    BFGS to gradient norm 1e-10, r in {1, inf} a linear program. For r = inf
    flats the minimal-l_2 coefficient vector is chosen.
    """
    g = np.asarray(g, dtype=float)
    G = np.asarray(G, dtype=float).reshape(len(g), -1)
    n = G.shape[1]
    ones = np.ones(len(g))
    if n == 0:
        return np.zeros(0), float(weighted_lp_norm(g, r, ones))
    if r == 2:
        c = np.linalg.lstsq(G, g, rcond=None)[0]
        return c, float(np.linalg.norm(g - G @ c))
    if r == 1 or np.isinf(r):
        if n == 1:
            c0, value = _scalar_best_approximation(g, G[:, 0], r)
            c = np.array([c0])
        else:
            c = _lp_best_approximation(g, G, r)
            value = float(weighted_lp_norm(g - G @ c, r, ones))
        if tie_break and np.isinf(r):
            c = _minimal_coefficients(g, G, c, value)
            value = float(weighted_lp_norm(g - G @ c, r, ones))
        return c, value

    def objective(c):
        residual = g - G @ c
        power = np.abs(residual) ** (r - 1)
        return np.sum(power * np.abs(residual)), -r * G.T @ (power * np.sign(residual))

    c0 = np.linalg.lstsq(G, g, rcond=None)[0]
    result = minimize(objective, c0, jac=True, method='BFGS', options={'gtol': 1e-10, 'maxiter': 2000})
    c = result.x
    return c, float(weighted_lp_norm(g - G @ c, r, ones))


def _minimal_coefficients(g: np.ndarray, G: np.ndarray, c: np.ndarray, value: float) -> np.ndarray:
    """Among l_inf minimizers, the one of least l_2 norm"""
    bound = value * (1 + 1e-9) + 1e-15
    constraints = [{'type': 'ineq', 'fun': lambda v: bound - (g - G @ v)},
                   {'type': 'ineq', 'fun': lambda v: bound + (g - G @ v)}]
    result = minimize(lambda v: float(v @ v), c, jac=lambda v: 2 * v, method='SLSQP',
                      constraints=constraints, options={'ftol': 1e-14, 'maxiter': 200})
    if result.success and np.max(np.abs(g - G @ result.x)) <= bound * (1 + 1e-9):
        return result.x
    return c


def polytope_distance(x: np.ndarray, U: np.ndarray, facets: np.ndarray) -> float:
    """min_c max_f <x - U c, f>"""
    n = U.shape[1]
    if n == 0:
        return float(np.max(facets @ x))
    m = len(facets)
    cost = np.r_[np.zeros(n), 1.0]
    A_ub = np.hstack([-(facets @ U), -np.ones((m, 1))])
    result = linprog(cost, A_ub=A_ub, b_ub=-(facets @ x), bounds=[(None, None)] * (n + 1), method='highs')
    if not result.success:
        raise SpaceDefinitionError(f'Distance LP failed: {result.message}')
    return float(result.fun)


def _gauge(space: FiniteNormedSpace) -> Tuple[Optional[float], np.ndarray]:
    """(r, F) with ||v||_X = |F v|_r; r = None means max(F v) over polytope facets"""
    if space.kind == 'polytope':
        return None, space.facets
    scale = space.weights if np.isinf(space.p) else space.weights ** (1.0 / space.p)
    return space.p, np.diag(scale)


def _gauge_with_gradient(V: np.ndarray, r: Optional[float]) -> Tuple[np.ndarray, np.ndarray]:
    """Column gauges of V and a (sub)gradient of each"""
    columns = np.arange(V.shape[1])
    if r is None or np.isinf(r):
        magnitude = V if r is None else np.abs(V)
        top = np.argmax(magnitude, axis=0)
        grad = np.zeros_like(V)
        grad[top, columns] = 1.0 if r is None else np.sign(V[top, columns])
        return magnitude[top, columns], grad
    if r == 1:
        return np.sum(np.abs(V), axis=0), np.sign(V)
    magnitude = np.abs(V)
    value = np.sum(magnitude ** r, axis=0) ** (1.0 / r)
    grad = np.sign(V) * magnitude ** (r - 1) / np.maximum(value, 1e-300) ** (r - 1)
    return value, grad


def _duality_map(values: np.ndarray, r: float) -> np.ndarray:
    return np.sign(values) * np.abs(values) ** (r - 1)


# ---------------------------------------------------------------------------
# inner suprema
# ---------------------------------------------------------------------------

class WidthProblem:
    """A normalized to diag[0] = 1 against a target X; searches reuse its start bank"""

    def __init__(self, A: CompactBody, X: FiniteNormedSpace, budget: Optional[SearchBudget] = None):
        if A.dim != X.dim:
            raise DimensionMismatchError(f'Body has dimension {A.dim}, space has {X.dim}')
        self.A = A
        self.X = X
        self.budget = budget or SearchBudget()
        self.d = A.dim
        self.scale = float(A.diag[0])
        self.D = A.diag / self.scale
        self.p = A.p
        self.p_dual = conjugate_exponent(A.p)
        self.logger = logger.bind(component='width_problem', d=self.d)
        self._starts: Dict[int, np.ndarray] = {}

    @cached_property
    def facets(self) -> Optional[np.ndarray]:
        """Facets of B(X*) when the target norm is a max of functionals"""
        if self.X.kind == 'polytope':
            return self.X.facets
        if np.isinf(self.X.p):
            W = np.diag(self.X.weights)
            return np.vstack([W, -W])
        return None

    @cached_property
    def hilbert(self) -> bool:
        return self.p == 2 and self.X.kind == 'lp' and self.X.p == 2

    @cached_property
    def X_dual(self) -> FiniteNormedSpace:
        return dual_space(self.X)

    @cached_property
    def X_gauge(self) -> Tuple[Optional[float], np.ndarray]:
        return _gauge(self.X)

    def starts(self, k: int) -> np.ndarray:
        """Fixed inner start set in R^k"""
        if k not in self._starts:
            count = self.budget.inner_starts
            rng = np.random.default_rng([self.budget.seed, 7919, k])
            basis = np.eye(k)[:min(k, count)]
            extra = rng.standard_normal((max(count - len(basis), 0), k))
            self._starts[k] = np.vstack([basis, extra]) if len(extra) else basis
        return self._starts[k]

    def _maximize_ratio(self, M: np.ndarray, r: Optional[float], B: np.ndarray,
                        s: Optional[float]) -> Tuple[float, bool]:
        """sup_y |M y|_r / |B y|_s from every inner start at once

        The starts are independent blocks of one L-BFGS-B problem with an analytic
        gradient; r = None is the polytope gauge max(M y).
        """
        Z0 = self.starts(M.shape[1])
        count, k = Z0.shape

        def ratios(Y):
            top, top_grad = _gauge_with_gradient(M @ Y, r)
            bottom, bottom_grad = _gauge_with_gradient(B @ Y, s)
            bottom = np.maximum(bottom, 1e-300)
            value = top / bottom
            grad = (M.T @ top_grad - value * (B.T @ bottom_grad)) / bottom
            return value, grad

        def objective(flat):
            value, grad = ratios(flat.reshape(count, k).T)
            return -float(np.sum(value)), -grad.T.ravel()

        result = minimize(objective, Z0.ravel(), jac=True, method='L-BFGS-B',
                          options={'maxiter': self.budget.max_iter})
        final = ratios(result.x.reshape(count, k).T)[0]
        initial = ratios(Z0.T)[0]
        return float(max(np.max(final), np.max(initial))), result.nit < self.budget.max_iter

    def _power_norm(self, M: np.ndarray, r: float, s: float) -> Tuple[float, bool]:
        """|M|_{l_s -> l_r} by the nonlinear power iteration z <- J_s'(M^T J_r(M z)), all starts at once"""
        s_dual = conjugate_exponent(s)
        Z = self.starts(M.shape[1]).T.copy()
        Z /= np.maximum(_gauge_with_gradient(Z, s)[0], 1e-300)
        previous = np.full(Z.shape[1], -1.0)
        best, converged = 0.0, False
        for _ in range(self.budget.max_iter):
            image = M @ Z
            value = _gauge_with_gradient(image, r)[0]
            best = max(best, float(np.max(value)))
            change = np.abs(value - previous)
            if change[int(np.argmax(value))] <= 1e-10 * max(float(np.max(value)), 1e-300):
                converged = True
                break
            previous = value
            back = _duality_map(M.T @ _duality_map(image, r), s_dual)
            size = _gauge_with_gradient(back, s)[0]
            moving = size > 1e-300
            Z[:, moving] = back[:, moving] / size[moving]
        return best, converged

    def operator_sup(self, M: np.ndarray) -> Tuple[float, bool, bool]:
        """sup_{x in A} ||M x||_X on the normalized body: (value, exact, converged)"""
        MD = M * self.D[None, :]
        if self.facets is not None:
            return float(np.max(weighted_lp_norm((self.facets @ M) * self.D, self.p_dual,
                                                 np.ones(self.d)))), True, True
        if self.p == 1:
            return float(np.max(norms(self.X, MD.T))), True, True
        if self.hilbert:
            return float(svdvals(np.sqrt(self.X.weights)[:, None] * MD)[0]), True, True
        r, F = self.X_gauge
        if r is not None and 1 < r < np.inf and 1 < self.p < np.inf:
            value, converged = self._power_norm(F @ MD, r, self.p)
        else:
            value, converged = self._maximize_ratio(F @ MD, r, np.eye(self.d), self.p)
        return value, False, converged

    def section_sup(self, Phi: np.ndarray) -> Tuple[float, bool, bool]:
        """sup{||x||_X : x in A, Phi^T x = 0}"""
        Phi = np.asarray(Phi, dtype=float).reshape(self.d, -1)
        if Phi.shape[1] == 0:
            return self.operator_sup(np.eye(self.d))
        N = null_space(Phi.T * self.D[None, :])
        if N.shape[1] == 0:
            return 0.0, True, True
        if self.facets is not None:
            G = self.D[:, None] * Phi
            value = max(best_approximation(self.D * f, G, self.p_dual, tie_break=False)[1]
                        for f in self.facets)
            return float(value), True, True
        if self.hilbert:
            return float(svdvals(np.sqrt(self.X.weights)[:, None] * (self.D[:, None] * N))[0]), True, True
        r, F = self.X_gauge
        value, converged = self._maximize_ratio(F @ (self.D[:, None] * N), r, N, self.p)
        return value, False, converged

    def deviation_sup(self, U: np.ndarray) -> Tuple[float, bool, bool]:
        """sup_{x in A} dist_X(x, span U)"""
        U = np.asarray(U, dtype=float).reshape(self.d, -1)
        if U.shape[1] == 0:
            return self.operator_sup(np.eye(self.d))
        W = null_space(U.T)
        if W.shape[1] == 0:
            return 0.0, True, True
        if self.p == 1:
            return float(max(self.D[j] * self._distance(np.eye(self.d)[j], U)
                             for j in range(self.d))), True, True
        if self.hilbert:
            _, R = np.linalg.qr((1.0 / np.sqrt(self.X.weights))[:, None] * W)
            return float(svdvals((self.D[:, None] * W) @ np.linalg.inv(R))[0]), True, True
        # dual form: sup over phi in U-perp of ||D phi||_p' / ||phi||_X*
        r, F = _gauge(self.X_dual)
        value, converged = self._maximize_ratio(self.D[:, None] * W, self.p_dual, F @ W, r)
        return value, False, converged

    def _distance(self, x: np.ndarray, U: np.ndarray) -> float:
        if self.facets is not None:
            return polytope_distance(x, U, self.facets)
        root = self.X.weights ** (1.0 / self.X.p)
        return best_approximation(root * x, root[:, None] * U, self.X.p, tie_break=False)[1]

    # -- outer multistart ----------------------------------------------------

    def multistart(self, evaluate: Callable[[np.ndarray], Tuple[float, bool, bool]],
                   seeds: Sequence[np.ndarray], size: int) -> Tuple[np.ndarray, float, bool, bool]:
        """Nelder-Mead from seeds then random starts: (x, value, converged, exact)

        evaluate returns (value, exact, converged) of one inner supremum. Each
        restart keeps its own flags; all reductions run in restart order.
        """
        budget = self.budget
        total = max(budget.restarts, len(seeds))

        def start(i):
            if i < len(seeds):
                return np.asarray(seeds[i], dtype=float).ravel()
            return np.random.default_rng([budget.seed, i]).standard_normal(size)

        def run(i):
            flags = {'exact': True, 'converged': True}

            def objective(flat):
                value, exact, converged = evaluate(flat)
                flags['exact'] = flags['exact'] and exact
                flags['converged'] = flags['converged'] and converged
                return value

            x0 = start(i)
            result = minimize(objective, x0, method='Nelder-Mead',
                              options={'maxiter': budget.max_iter, 'xatol': 1e-10, 'fatol': 1e-13,
                                       'adaptive': True})
            f0 = objective(x0)
            if f0 <= result.fun:
                return x0, f0, True, flags
            return result.x, float(result.fun), result.nit < budget.max_iter, flags

        with ThreadPoolExecutor(max_workers=budget.workers) as pool:
            results = list(pool.map(run, range(total)))
        best = min(range(total), key=lambda i: (results[i][1], i))
        x, value, converged, _ = results[best]
        exact = all(r[3]['exact'] for r in results)
        inner_converged = all(r[3]['converged'] for r in results)
        return x, value, converged and inner_converged, exact


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------

def duality_transfer_lower(A: CompactBody, X: FiniteNormedSpace, n: int) -> float:
    """Lower bound on d_n(A, X) = d^n(u*) through the l_2 relaxation of the adjoint

    u: l_p -> X sends e_j to diag_j e_j; folding the target weights into the
    entries makes u* a diagonal map X* -> l_p'. Relaxing both sides of u* to l_2
    costs the inradius of B(X*) and the l_p' to l_2 comparison, and the relaxed
    width is a singular value. The bound holds for d_n, d^n and lambda_n.
    """
    d = A.dim
    if n >= d:
        return 0.0
    if X.kind == 'polytope':
        entries, inradius = A.diag, euclidean_comparison(X)
    else:
        scale = X.weights if np.isinf(X.p) else X.weights ** (1.0 / X.p)
        entries = A.diag * scale
        inv_q = 0.0 if np.isinf(X.p) else 1.0 / X.p
        inradius = min(1.0, d ** (inv_q - 0.5))
    relaxed = adjoint(DiagonalOperator(entries=np.sort(entries)[::-1], p=2.0, q=2.0))
    inv_p_dual = 1.0 - (0.0 if np.isinf(A.p) else 1.0 / A.p)
    comparison = min(1.0, d ** (inv_p_dual - 0.5))
    return float(inradius * comparison * svd_oracle(relaxed, n).upper)


def certified_lower(A: CompactBody, X: FiniteNormedSpace, n: int) -> Tuple[float, List[str]]:
    """Ball-inclusion, duality-transfer and Bernstein certificates, valid for d_n, d^n and lambda_n"""
    d = A.dim
    if n >= d:
        return 0.0, ['trivial']
    sigma = float(A.diag[n])
    a = euclidean_comparison(X)
    b = min(1.0, d ** (-(1.0 / A.p - 0.5)))
    ball = a * b * sigma

    k = n + 1
    inv_p = 1.0 / A.p
    if X.kind == 'polytope':
        c = a * k ** min(0.0, 0.5 - inv_p)
    else:
        inv_q = 0.0 if np.isinf(X.p) else 1.0 / X.p
        w = np.min(X.weights[:k])
        c = (w if np.isinf(X.p) else w ** inv_q) * k ** min(0.0, inv_q - inv_p)
    bernstein = sigma * c
    transfer = duality_transfer_lower(A, X, n)
    # the transfer bound equals the ball bound on unweighted targets
    if transfer > max(ball, bernstein) * (1 + 1e-12):
        return transfer, ['duality-transfer']
    if bernstein >= ball:
        return float(bernstein), ['bernstein-certificate']
    return float(ball), ['ball-inclusion']


def _finish(problem: WidthProblem, n: int, value: float, method: List[str], exact: bool,
            converged: bool, searched: bool) -> WidthEstimate:
    lower, lower_method = certified_lower(problem.A, problem.X, n)
    upper = value * problem.scale
    if upper < lower:
        problem.logger.warning("Search value below certified lower bound, raising it",
                               n=n, upper=upper, lower=lower)
        upper = lower
    if not converged:
        problem.logger.warning("Search budget exhausted", n=n, method=method, value=upper)
    certified = exact and not searched
    if certified:
        lower = upper
    return WidthEstimate(n=n, lower=min(lower, upper), upper=upper, method=method + lower_method,
                         certified=certified, converged=converged)


def _coordinate_frame(d: int, n: int) -> np.ndarray:
    return np.eye(d)[:, :n]


# ---------------------------------------------------------------------------
# searches
# ---------------------------------------------------------------------------

def gelfand_search(A: CompactBody, ambient: FiniteNormedSpace, n: int,
                   budget: Optional[SearchBudget] = None,
                   seeds: Sequence[np.ndarray] = ()) -> Tuple[WidthEstimate, np.ndarray]:
    """d^n(A, X) bracket and the best functionals found (columns of a d x n matrix)"""
    problem = WidthProblem(A, ambient, budget)
    d = problem.d
    if n >= d:
        return _finish(problem, n, 0.0, ['trivial'], True, True, False), np.eye(d)
    if n == 0:
        value, exact, converged = problem.section_sup(np.zeros((d, 0)))
        return _finish(problem, n, value, ['radius'], exact, converged, False), np.zeros((d, 0))

    start_set = [_coordinate_frame(d, n)] + [np.asarray(s).reshape(d, n) for s in seeds]
    x, value, converged, exact = problem.multistart(lambda flat: problem.section_sup(flat.reshape(d, n)),
                                                    start_set, d * n)
    Phi = x.reshape(d, n)
    estimate = _finish(problem, n, value, ['subspace-search', 'gelfand'], exact, converged, True)
    return estimate, Phi


def kolmogorov_search(A: CompactBody, target: FiniteNormedSpace, n: int,
                      budget: Optional[SearchBudget] = None,
                      seeds: Sequence[np.ndarray] = (),
                      return_subspace: bool = False):
    """d_n(A, X) bracket"""
    problem = WidthProblem(A, target, budget)
    d = problem.d
    if n >= d:
        estimate, U = _finish(problem, n, 0.0, ['trivial'], True, True, False), np.eye(d)
    elif n == 0:
        value, exact, converged = problem.deviation_sup(np.zeros((d, 0)))
        estimate, U = _finish(problem, n, value, ['radius'], exact, converged, False), np.zeros((d, 0))
    else:
        start_set = [_coordinate_frame(d, n)] + [np.asarray(s).reshape(d, n) for s in seeds]
        x, value, converged, _ = problem.multistart(lambda flat: problem.deviation_sup(flat.reshape(d, n)),
                                                    start_set, d * n)
        U = x.reshape(d, n)
        estimate = _finish(problem, n, value, ['subspace-search', 'kolmogorov'], False, converged, True)
    return (estimate, U) if return_subspace else estimate


def linear_search(A: CompactBody, target: FiniteNormedSpace, n: int,
                  budget: Optional[SearchBudget] = None,
                  seeds: Sequence[Tuple[np.ndarray, np.ndarray]] = (),
                  return_operator: bool = False):
    """lambda_n(A, X) bracket over rank-n operators P = B C^T, alternating over B and C"""
    problem = WidthProblem(A, target, budget)
    d = problem.d
    if d > LINEAR_MAX_DIMENSION:
        raise SpaceDefinitionError(f'Linear search supports d <= {LINEAR_MAX_DIMENSION}, got {d}')
    identity = np.eye(d)
    if n >= d:
        estimate = _finish(problem, n, 0.0, ['trivial'], True, True, False)
        return (estimate, (identity, identity)) if return_operator else estimate
    if n == 0:
        value, exact, converged = problem.operator_sup(identity)
        estimate = _finish(problem, n, value, ['radius'], exact, converged, False)
        empty = np.zeros((d, 0))
        return (estimate, (empty, empty)) if return_operator else estimate

    budget = problem.budget
    E = _coordinate_frame(d, n)
    pairs = [(E, E)] + [(np.asarray(B).reshape(d, n), np.asarray(C).reshape(d, n)) for B, C in seeds]
    total = max(budget.restarts, len(pairs))

    def run(i):
        inner = {'converged': True}

        def error(B, C):
            value, _, converged = problem.operator_sup(identity - B @ C.T)
            inner['converged'] = inner['converged'] and converged
            return value

        if i < len(pairs):
            B, C = pairs[i]
        else:
            rng = np.random.default_rng([budget.seed, i])
            B, C = rng.standard_normal((d, n)), rng.standard_normal((d, n))
        value = error(B, C)
        converged = True
        for _ in range(budget.alt_rounds):
            for side in ('range', 'functionals'):
                if side == 'range':
                    result = minimize(lambda b: error(b.reshape(d, n), C), B.ravel(), method='Nelder-Mead',
                                      options={'maxiter': budget.max_iter, 'xatol': 1e-10, 'fatol': 1e-13,
                                               'adaptive': True})
                    candidate = (result.x.reshape(d, n), C)
                else:
                    result = minimize(lambda c: error(B, c.reshape(d, n)), C.ravel(), method='Nelder-Mead',
                                      options={'maxiter': budget.max_iter, 'xatol': 1e-10, 'fatol': 1e-13,
                                               'adaptive': True})
                    candidate = (B, result.x.reshape(d, n))
                if result.fun < value:
                    B, C = candidate
                    value = float(result.fun)
                converged = converged and result.nit < budget.max_iter
        return B, C, value, converged, inner['converged']

    with ThreadPoolExecutor(max_workers=budget.workers) as pool:
        results = list(pool.map(run, range(total)))
    best = min(range(total), key=lambda i: (results[i][2], i))
    B, C, value, converged, _ = results[best]
    inner_converged = all(r[4] for r in results)
    estimate = _finish(problem, n, value, ['operator-search', 'linear'], False,
                       converged and inner_converged, True)
    return (estimate, (B, C)) if return_operator else estimate


def cowidth(A: CompactBody, ambient: FiniteNormedSpace, n: int,
            budget: Optional[SearchBudget] = None) -> WidthEstimate:
    """lambda^n = 2 d^n"""
    estimate, _ = gelfand_search(A, ambient, n, budget)
    return estimate.model_copy(update={'lower': 2 * estimate.lower, 'upper': 2 * estimate.upper,
                                       'method': estimate.method + ['cowidth']})


def width_bundle(A: CompactBody, X: FiniteNormedSpace, n: int,
                 budget: Optional[SearchBudget] = None) -> Dict[str, WidthEstimate]:
    """Linear, Kolmogorov and Gelfand searches with cross-seeding

    The best operator's range seeds the Kolmogorov search and its functionals
    seed the Gelfand search, so both stay at or below the linear value.
    """
    linear, (B, C) = linear_search(A, X, n, budget, return_operator=True)
    kolmogorov = kolmogorov_search(A, X, n, budget, seeds=[B] if 0 < n < A.dim else ())
    gelfand, _ = gelfand_search(A, X, n, budget, seeds=[C] if 0 < n < A.dim else ())
    return {'kolmogorov': kolmogorov, 'gelfand': gelfand, 'linear': linear}


def duality_check(u: DiagonalOperator, n: int, budget: Optional[SearchBudget] = None) -> DualityRow:
    """d^n(u) against d_n(u*) and lambda_n(u) against lambda_n(u*)

    The adjoint searches start from the transposed primal optimizers: the
    functionals D Phi span a subspace for u*, and I - B C^T becomes
    I - (D C)(D^-1 B)^T.
    """
    if u.d > LINEAR_MAX_DIMENSION:
        raise SpaceDefinitionError(f'Duality check supports d <= {LINEAR_MAX_DIMENSION}, got {u.d}')
    budget = budget or SearchBudget()
    v = adjoint(u)
    D = u.entries / u.entries[0]
    inside = 0 < n < u.d
    gelfand, Phi = gelfand_search(u.body(), u.target(), n, budget)
    kolmogorov = kolmogorov_search(v.body(), v.target(), n, budget,
                                   seeds=[D[:, None] * Phi] if inside else ())
    linear, (B, C) = linear_search(u.body(), u.target(), n, budget, return_operator=True)
    linear_adjoint = linear_search(v.body(), v.target(), n, budget,
                                   seeds=[(D[:, None] * C, B / D[:, None])] if inside else ())

    def gap(a, b):
        top = max(a, b)
        return 0.0 if top == 0 else abs(a - b) / top

    row = DualityRow(seed=budget.seed, dimension=u.d, n=n, p=u.p, q=u.q,
                     gelfand=gelfand.upper, kolmogorov_adjoint=kolmogorov.upper,
                     linear=linear.upper, linear_adjoint=linear_adjoint.upper,
                     gelfand_gap=gap(gelfand.upper, kolmogorov.upper),
                     linear_gap=gap(linear.upper, linear_adjoint.upper),
                     converged=all(e.converged for e in (gelfand, kolmogorov, linear, linear_adjoint)))
    logger.info("Duality check", seed=row.seed, p=u.p, q=u.q, n=n,
                gelfand_gap=row.gelfand_gap, linear_gap=row.linear_gap)
    return row


def enforce_monotone(estimates: List[WidthEstimate]) -> List[WidthEstimate]:
    """Running minima of uppers and suffix maxima of lowers along n"""
    ordered = sorted(estimates, key=lambda e: e.n)
    uppers = np.minimum.accumulate([e.upper for e in ordered]) if ordered else []
    lowers = np.maximum.accumulate([e.lower for e in ordered][::-1])[::-1] if ordered else []
    result = []
    for e, upper, lower in zip(ordered, uppers, lowers):
        flags = list(e.flags)
        if upper < e.upper:
            logger.warning("Raw upper estimate increased with n", n=e.n, raw=e.upper, adjusted=float(upper))
            flags.append('upper-monotone-adjusted')
        if lower > e.lower:
            logger.warning("Raw lower estimate increased with n", n=e.n, raw=e.lower, adjusted=float(lower))
            flags.append('lower-monotone-adjusted')
        if lower > upper:
            logger.warning("Bracket conflict after monotone adjustment", n=e.n, lower=float(lower),
                           upper=float(upper))
            flags.append('bracket-conflict')
            upper = lower
        result.append(e.model_copy(update={'upper': float(upper), 'lower': float(lower), 'flags': flags}))
    return result


# ---------------------------------------------------------------------------
# discretized multiplier classes
# ---------------------------------------------------------------------------

def projection_upper_bound(cls: FunctionClass, q: float, n: int, grid: Grid, K: int,
                           budget: Optional[SearchBudget] = None) -> WidthEstimate:
    """sup ||f - S_n f||_q over f = Lambda phi, ||phi||_p <= 1

    Closed form max_{k>n} lambda(k) for p = q = 2. Otherwise a nonlinear power
    iteration phi <- J_p'(T* J_q(T phi)) on the tail multiplier T; the best
    ratio seen is attained, so it bounds the supremum from below.
    """
    budget = budget or SearchBudget()
    if K >= grid.N // 2:
        raise AliasingError(f'K={K} must be below N/2={grid.N // 2}')
    if n > K:
        raise AliasingError(f'n={n} exceeds K={K}')
    if K < 4 * n:
        logger.warning("Tail resolution below 4n", n=n, K=K)
    tail = lambda_values(cls.multiplier, K).copy()
    tail[:n] = 0.0
    if not np.any(tail > 0):
        return WidthEstimate(n=n, lower=0.0, upper=0.0, method=['projection-bound', 'no-tail'],
                             certified=True, rank=2 * n)
    p = cls.p
    if p == 2 and q == 2:
        value = float(np.max(tail))
        return WidthEstimate(n=n, lower=value, upper=value, method=['projection-bound', 'closed-form'],
                             certified=True, rank=2 * n)

    p_dual = conjugate_exponent(p)
    x = grid.nodes
    rng = np.random.default_rng([budget.seed, n])
    starts = [np.cos((n + 1) * x), np.eye(1, grid.N, 0).ravel()]
    starts += [rng.standard_normal(grid.N) for _ in range(max(budget.inner_starts - 2, 0))]

    cap = max(budget.max_iter, Config.POWER_ITER)
    best, best_converged = 0.0, True
    for start in starts:
        phi = GridSignal(grid=grid, values=start / discrete_norm(GridSignal(grid=grid, values=start), p))
        previous, reached, converged = -1.0, 0.0, False
        for _ in range(cap):
            image = filter_signal(phi, tail, cls.beta)
            ratio = discrete_norm(image, q) / discrete_norm(phi, p)
            reached = max(reached, ratio)
            if abs(ratio - previous) <= Config.POWER_RTOL * max(ratio, 1e-300):
                converged = True
                break
            previous = ratio
            back = filter_signal(GridSignal(grid=grid, values=_duality_map(image.values, q)), tail, -cls.beta)
            if not np.any(back.values):
                converged = True
                break
            values = _duality_map(back.values, p_dual)
            phi = GridSignal(grid=grid, values=values / discrete_norm(GridSignal(grid=grid, values=values), p))
        # only the start that attains the bound decides convergence
        if reached > best:
            best, best_converged = reached, converged
    if not best_converged:
        logger.warning("Power iteration budget exhausted", n=n, value=best, iterations=cap)
    return WidthEstimate(n=n, lower=0.0, upper=float(best), method=['projection-bound', 'power-iteration'],
                         certified=False, converged=best_converged, rank=2 * n)


def trig_lower_bound(cls: FunctionClass, q: float, n: int) -> float:
    """Bernstein bound over the trigonometric polynomials of degree n + 1

    The class contains every t of degree <= m = n + 1 with ||t||_2 <= lambda(m)/C_p,
    and that set contains the L_q ball of radius lambda(m)/(C_p c_q). Both
    comparison constants are explicit (Hoelder and Nikolskii).
    """
    m = n + 1
    lam = float(np.min(lambda_values(cls.multiplier, m)))
    p = cls.p
    C_p = (2 * np.pi) ** (1 / p - 0.5) if p <= 2 else (m / np.pi) ** (0.5 - 1 / p)
    c_q = (2 * np.pi) ** (0.5 - 1 / q) if q >= 2 else (m / np.pi) ** (1 / q - 0.5)
    return lam / (C_p * c_q)
