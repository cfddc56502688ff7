"""
Discrete trigonometric analysis on the circle

Grids, discrete L_p norms, Fourier coefficients without the constant term,
partial sums, multiplier application, kernels and circular convolution.
Quadrature is the trapezoid rule on a uniform grid, exact for band-limited
integrands.
"""
from typing import Callable

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from exceptions import GridError, AliasingError, GridMismatchError
from classes import MultiplierSequence, lambda_values

logger = structlog.get_logger()

TWO_PI = 2.0 * np.pi


class Grid(BaseModel):
    """N equispaced nodes on [0, 2pi)"""
    model_config = ConfigDict(frozen=True)

    N: int = Field(..., description="Number of nodes, even and at least 4")

    @field_validator('N')
    @classmethod
    def validate_size(cls, v):
        """Reject odd or too-small grids"""
        if v < 4 or v % 2:
            raise GridError(f'Grid size must be even and at least 4, got {v}')
        return v

    @property
    def nodes(self) -> np.ndarray:
        return TWO_PI * np.arange(self.N) / self.N

    @property
    def step(self) -> float:
        return TWO_PI / self.N


class GridSignal(BaseModel):
    """Samples of a 2pi-periodic function"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    grid: Grid
    values: np.ndarray

    @field_validator('values', mode='before')
    @classmethod
    def as_array(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode='after')
    def validate_values(self):
        """Values must match the grid and be finite"""
        if self.values.shape != (self.grid.N,):
            raise GridError(f'Expected {self.grid.N} samples, got {self.values.shape}')
        if not np.all(np.isfinite(self.values)):
            raise GridError('Signal samples must be finite')
        return self


class FourierCoeffs(BaseModel):
    """Cosine and sine coefficients for k = 1..K (index 0 holds k = 1)"""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    K: int
    a: np.ndarray
    b: np.ndarray

    @field_validator('a', 'b', mode='before')
    @classmethod
    def as_array(cls, v):
        return np.asarray(v, dtype=float)

    @model_validator(mode='after')
    def validate_lengths(self):
        if self.K < 1 or self.a.shape != (self.K,) or self.b.shape != (self.K,):
            raise AliasingError(f'Coefficient arrays must have length K={self.K}')
        return self

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(1, self.K + 1)


def make_grid(N: int) -> Grid:
    """Uniform grid with N nodes"""
    return Grid(N=N)


def signal_from_function(grid: Grid, f: Callable[[np.ndarray], np.ndarray]) -> GridSignal:
    """Sample a callable on the grid nodes"""
    return GridSignal(grid=grid, values=f(grid.nodes))


def discrete_norm(s: GridSignal, p: float) -> float:
    """((2pi/N) sum |v|^p)^(1/p), the trapezoid rule for the L_p norm with dx"""
    if not 1 < p < np.inf:
        raise ValueError(f'p must lie in (1, inf), got {p}')
    return float((s.grid.step * np.sum(np.abs(s.values) ** p)) ** (1.0 / p))


def fourier_coefficients(s: GridSignal, K: int) -> FourierCoeffs:
    """a_k = (1/pi) int f cos kt dt and b_k likewise, for k = 1..K; the mean is ignored"""
    if K < 1 or K >= s.grid.N // 2:
        raise AliasingError(f'K={K} must satisfy 1 <= K < N/2 = {s.grid.N // 2}')
    spectrum = np.fft.rfft(s.values)[1:K + 1]
    scale = 2.0 / s.grid.N
    return FourierCoeffs(K=K, a=scale * spectrum.real, b=-scale * spectrum.imag)


def partial_sum(c: FourierCoeffs, n: int, grid: Grid) -> GridSignal:
    """Samples of sum_{k<=n} a_k cos kx + b_k sin kx"""
    if n < 0 or n > c.K:
        raise AliasingError(f'n={n} must lie in [0, K={c.K}]')
    if n == 0:
        return GridSignal(grid=grid, values=np.zeros(grid.N))
    phase = np.outer(grid.nodes, np.arange(1, n + 1))
    values = np.cos(phase) @ c.a[:n] + np.sin(phase) @ c.b[:n]
    return GridSignal(grid=grid, values=values)


def synthesize(c: FourierCoeffs, grid: Grid) -> GridSignal:
    """Full synthesis of the coefficient set"""
    return partial_sum(c, c.K, grid)


def apply_multiplier(c: FourierCoeffs, seq: MultiplierSequence, beta: float = 0.0) -> FourierCoeffs:
    """Coefficients of sum lambda(k)(a_k cos(kx - beta pi/2) + b_k sin(kx - beta pi/2))"""
    lam = lambda_values(seq, c.K)
    cs, sn = np.cos(beta * np.pi / 2), np.sin(beta * np.pi / 2)
    return FourierCoeffs(
        K=c.K,
        a=lam * (c.a * cs - c.b * sn),
        b=lam * (c.b * cs + c.a * sn),
    )


def kernel_truncation(seq: MultiplierSequence, N: int) -> int:
    """Smallest K with lambda(K) < 1e-14 lambda(1), capped at N/4"""
    cap = max(1, N // 4)
    lam = lambda_values(seq, cap)
    below = np.nonzero(lam < 1e-14 * lam[0])[0]
    return int(below[0] + 1) if below.size else cap


def kernel_signal(seq: MultiplierSequence, beta: float, grid: Grid, K: int) -> GridSignal:
    """Samples of the truncated kernel sum_{k<=K} lambda(k) cos(kx - beta pi/2)"""
    if K < 1 or K >= grid.N // 2:
        raise AliasingError(f'K={K} must satisfy 1 <= K < N/2 = {grid.N // 2}')
    lam = lambda_values(seq, K)
    phase = np.outer(grid.nodes, np.arange(1, K + 1)) - beta * np.pi / 2
    return GridSignal(grid=grid, values=np.cos(phase) @ lam)


def filter_signal(s: GridSignal, weights: np.ndarray, beta: float = 0.0) -> GridSignal:
    """Multiply frequency k by weights[k-1] e^(-i beta pi/2); the mean and frequencies past the table are dropped"""
    weights = np.asarray(weights, dtype=float)
    if weights.size >= s.grid.N // 2:
        raise AliasingError(f'{weights.size} weights cannot be resolved on N={s.grid.N}')
    spectrum = np.fft.rfft(s.values)
    filtered = np.zeros_like(spectrum)
    filtered[1:weights.size + 1] = spectrum[1:weights.size + 1] * weights * np.exp(-0.5j * np.pi * beta)
    return GridSignal(grid=s.grid, values=np.fft.irfft(filtered, n=s.grid.N))


def convolve(kernel: GridSignal, phi: GridSignal) -> GridSignal:
    """Circular convolution int K(x - y) phi(y) dy by the trapezoid rule"""
    if kernel.grid.N != phi.grid.N:
        raise GridMismatchError(f'Grid mismatch: {kernel.grid.N} vs {phi.grid.N}')
    product = np.fft.rfft(kernel.values) * np.fft.rfft(phi.values)
    values = np.fft.irfft(product, n=phi.grid.N) * phi.grid.step
    return GridSignal(grid=phi.grid, values=values)
