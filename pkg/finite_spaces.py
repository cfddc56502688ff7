"""
Finite-dimensional normed spaces, their duals and compact bodies
"""
from typing import Optional

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection
from scipy.stats import norm as gaussian
from scipy.stats import qmc

from exceptions import DimensionMismatchError, SpaceDefinitionError
from classes import conjugate_exponent

logger = structlog.get_logger()

MAX_DIMENSION = 16


class FiniteNormedSpace(BaseModel):
    """R^d with a weighted l_p norm or a polytope norm max_f <x, f>"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    dim: int = Field(..., description="Dimension d")
    kind: str = Field('lp', description="lp or polytope")
    p: float = Field(2.0, description="Exponent of the weighted l_p norm")
    weights: Optional[np.ndarray] = Field(None, description="Positive weights of the l_p norm")
    facets: Optional[np.ndarray] = Field(None, description="Facet functionals, one per row")

    @field_validator('weights', 'facets', mode='before')
    @classmethod
    def as_array(cls, v):
        return None if v is None else np.asarray(v, dtype=float)

    @model_validator(mode='after')
    def validate_norm(self):
        """Reject bad weights, asymmetric or degenerate facet sets"""
        if not 1 <= self.dim <= MAX_DIMENSION:
            raise SpaceDefinitionError(f'Dimension must lie in [1, {MAX_DIMENSION}], got {self.dim}')
        if self.kind == 'lp':
            if not self.p >= 1:
                raise SpaceDefinitionError(f'Exponent must be at least 1, got {self.p}')
            weights = np.ones(self.dim) if self.weights is None else self.weights
            if weights.shape != (self.dim,) or np.any(weights <= 0) or not np.all(np.isfinite(weights)):
                raise SpaceDefinitionError('Weights must be d positive finite numbers')
            object.__setattr__(self, 'weights', weights)
        elif self.kind == 'polytope':
            F = self.facets
            if F is None or F.ndim != 2 or F.shape[1] != self.dim:
                raise SpaceDefinitionError('Facets must be a (m, d) array')
            for f in F:
                if not np.any(np.all(np.abs(F + f) <= 1e-12 * max(1.0, np.abs(f).max()), axis=1)):
                    raise SpaceDefinitionError(f'Facet set is not symmetric: missing {-f}')
            if np.linalg.matrix_rank(F) < self.dim:
                raise SpaceDefinitionError('Facets do not span the dual space')
        else:
            raise SpaceDefinitionError(f'Unknown norm kind: {self.kind}')
        return self


class CompactBody(BaseModel):
    """A = diag . B(l_p^d)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    p: float = Field(..., description="Exponent of the source ball")
    diag: np.ndarray = Field(..., description="Positive nonincreasing diagonal")

    @field_validator('diag', mode='before')
    @classmethod
    def as_array(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode='after')
    def validate_body(self):
        if self.p < 1:
            raise SpaceDefinitionError(f'Source exponent must be at least 1, got {self.p}')
        if self.diag.ndim != 1 or not 1 <= self.diag.size <= MAX_DIMENSION:
            raise SpaceDefinitionError('Diagonal must be a vector of length 1..16')
        if np.any(self.diag <= 0) or not np.all(np.isfinite(self.diag)):
            raise SpaceDefinitionError('Diagonal entries must be positive')
        if np.any(np.diff(self.diag) > 0):
            raise SpaceDefinitionError('Diagonal entries must be nonincreasing')
        return self

    @property
    def dim(self) -> int:
        return int(self.diag.size)

    @property
    def space(self) -> FiniteNormedSpace:
        """Geometry of the source ball"""
        return weighted_lp(self.dim, self.p)

    def scaled(self, c: float) -> 'CompactBody':
        return CompactBody(p=self.p, diag=abs(c) * self.diag)


def weighted_lp(dim: int, p: float, weights=None) -> FiniteNormedSpace:
    return FiniteNormedSpace(dim=dim, kind='lp', p=p, weights=weights)


def polytope(facets) -> FiniteNormedSpace:
    F = np.asarray(facets, dtype=float)
    return FiniteNormedSpace(dim=F.shape[1], kind='polytope', facets=F)


def _check_dim(space: FiniteNormedSpace, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != space.dim:
        raise DimensionMismatchError(f'Expected dimension {space.dim}, got {x.shape[-1]}')
    return x


def weighted_lp_norm(x: np.ndarray, p: float, weights: np.ndarray) -> np.ndarray:
    """Row-wise (sum w |x|^p)^(1/p); max w|x| for p = inf"""
    if np.isinf(p):
        return np.max(weights * np.abs(x), axis=-1)
    return np.sum(weights * np.abs(x) ** p, axis=-1) ** (1.0 / p)


def norm(space: FiniteNormedSpace, x) -> float:
    """||x||_X"""
    x = _check_dim(space, x)
    if space.kind == 'polytope':
        return float(np.max(space.facets @ x))
    return float(weighted_lp_norm(x, space.p, space.weights))


def norms(space: FiniteNormedSpace, X) -> np.ndarray:
    """Norms of the rows of X"""
    X = _check_dim(space, np.atleast_2d(X))
    if space.kind == 'polytope':
        return np.max(X @ space.facets.T, axis=1)
    return weighted_lp_norm(X, space.p, space.weights)


def dual_space(space: FiniteNormedSpace) -> FiniteNormedSpace:
    """X* as a normed space: l_p' with weights w^(-p'/p), or the polytope on the vertices of B(X)"""
    if space.kind == 'polytope':
        V = polytope_vertices(space)
        return polytope(np.vstack([V, -V]))
    p = space.p
    q = conjugate_exponent(p)
    if p == 1 or np.isinf(p):
        weights = 1.0 / space.weights
    else:
        weights = space.weights ** (-q / p)
    return weighted_lp(space.dim, q, weights)


def dual_norm(space: FiniteNormedSpace, phi) -> float:
    """||phi||_X* = sup{<x, phi> : ||x||_X <= 1}"""
    phi = _check_dim(space, phi)
    if space.kind == 'polytope':
        # support function of the primal ball, read off its facet description
        result = linprog(-phi, A_ub=space.facets, b_ub=np.ones(len(space.facets)),
                         bounds=[(None, None)] * space.dim, method='highs')
        if not result.success:
            raise SpaceDefinitionError(f'Dual norm LP failed: {result.message}')
        return float(max(-result.fun, 0.0))
    return norm(dual_space(space), phi)


def polytope_vertices(space: FiniteNormedSpace) -> np.ndarray:
    """Vertices of the unit ball of a polytope norm"""
    if space.kind != 'polytope':
        raise SpaceDefinitionError('Vertices exist only for polytope norms')
    F = space.facets
    if space.dim == 1:
        r = 1.0 / np.max(np.abs(F[:, 0]))
        return np.array([[r], [-r]])
    halfspaces = np.hstack([F, -np.ones((len(F), 1))])
    hs = HalfspaceIntersection(halfspaces, np.zeros(space.dim))
    V = hs.intersections
    _, keep = np.unique(np.round(V, 10), axis=0, return_index=True)
    return V[np.sort(keep)]


def dual_ball_vertices(space: FiniteNormedSpace) -> np.ndarray:
    """Extreme points of B(X*) = conv(facets) for a polytope norm"""
    if space.kind != 'polytope':
        raise SpaceDefinitionError('Dual vertices exist only for polytope norms')
    F = space.facets
    if space.dim == 1:
        return F[[np.argmax(F[:, 0]), np.argmin(F[:, 0])]]
    return F[np.sort(ConvexHull(F).vertices)]


def dual_ball_sample(space: FiniteNormedSpace, size: int = 1000, seed: int = 0,
                     refinement: int = 0) -> np.ndarray:
    """Deterministic sample of B(X*), one functional per row

    Polytope norms contribute every facet (all dual vertices) plus `refinement`
    random convex combinations. l_p norms give `size` scrambled Halton
    directions mapped to the dual sphere, with the signed coordinate vectors
    always included.
    """
    rng = np.random.default_rng(seed)
    if space.kind == 'polytope':
        F = space.facets
        if refinement <= 0:
            return F.copy()
        pairs = rng.integers(0, len(F), size=(refinement, 2))
        t = rng.random((refinement, 1))
        return np.vstack([F, t * F[pairs[:, 0]] + (1 - t) * F[pairs[:, 1]]])

    d = space.dim
    axes = np.vstack([np.eye(d), -np.eye(d)])
    count = max(size - len(axes), 0)
    rows = [axes]
    if count:
        halton = qmc.Halton(d=d, scramble=True, seed=seed)
        u = np.clip(halton.random(count), 1e-12, 1 - 1e-12)
        rows.append(gaussian.ppf(u))
    directions = np.vstack(rows)
    dual = dual_space(space)
    return directions / norms(dual, directions)[:, None]


def support_function(A: CompactBody, psi) -> float:
    """sup_{x in A} <x, psi> = ||diag . psi||_p'"""
    psi = np.asarray(psi, dtype=float)
    if psi.shape[-1] != A.dim:
        raise DimensionMismatchError(f'Expected dimension {A.dim}, got {psi.shape[-1]}')
    return float(weighted_lp_norm(A.diag * psi, conjugate_exponent(A.p), np.ones(A.dim)))


def euclidean_comparison(space: FiniteNormedSpace) -> float:
    """Largest a with ||x||_X >= a ||x||_2"""
    if space.kind == 'polytope':
        V = polytope_vertices(space)
        return float(1.0 / np.max(np.linalg.norm(V, axis=1)))
    w = np.min(space.weights)
    if np.isinf(space.p):
        return float(w / np.sqrt(space.dim))
    scale = w ** (1.0 / space.p)
    if space.p <= 2:
        return float(scale)
    return float(scale * space.dim ** (1.0 / space.p - 0.5))


def body_boundary_sample(A: CompactBody, count: int, seed: int = 0) -> np.ndarray:
    """Random points of the boundary of A"""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((count, A.dim))
    z /= weighted_lp_norm(z, A.p, np.ones(A.dim))[:, None]
    return z * A.diag
