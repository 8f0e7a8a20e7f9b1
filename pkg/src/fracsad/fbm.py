"""Fractional Brownian motion: covariance and exact sampling on a time grid.

Two generators are provided. Circulant embedding (Davies-Harte) is the
default on uniform grids; dense Cholesky factorization of the grid
covariance works on any grid and serves as the cross-check.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.linalg import cholesky

from ._rng import chunk_indices, path_rng
from .errors import DomainError, MethodError, NumericError
from .io import write_csv

EIGEN_CLIP_TOL = 1e-10


@dataclass(frozen=True)
class HurstIndex:
    value: float

    def __post_init__(self):
        if not (0.5 < float(self.value) < 1.0):
            raise DomainError(f"Hurst index must lie in (1/2, 1), got {self.value}")

    def __float__(self):
        return float(self.value)


def hurst_value(H) -> float:
    """Validate and unwrap a Hurst index given as float or HurstIndex."""
    return float(HurstIndex(float(H)))


@dataclass(frozen=True, eq=False)
class TimeGrid:
    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise DomainError("a time grid needs at least two points")
        if pts[0] != 0.0:
            raise DomainError("a time grid must start at 0")
        if np.any(np.diff(pts) <= 0):
            raise DomainError("time grid points must be strictly increasing")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def uniform(cls, T: float, n_steps: int) -> "TimeGrid":
        return cls(np.linspace(0.0, float(T), int(n_steps) + 1))

    def __len__(self):
        return self.points.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self.points, other.points)

    def __hash__(self):
        return hash(self.points.tobytes())

    @property
    def T(self) -> float:
        return float(self.points[-1])

    @property
    def n_steps(self) -> int:
        return self.points.size - 1

    @property
    def is_uniform(self) -> bool:
        d = np.diff(self.points)
        return bool(np.allclose(d, d[0], rtol=1e-12, atol=0.0))

    @property
    def dt(self) -> float:
        if not self.is_uniform:
            raise DomainError("grid is not uniform")
        return self.T / self.n_steps


@dataclass(frozen=True, eq=False)
class FbmPath:
    grid: TimeGrid
    values: np.ndarray
    hurst: float
    seed: int
    path_index: int


def fbm_covariance(s, t, H):
    """E[B_s B_t] = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2."""
    H = hurst_value(H)
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    if np.any(s < 0) or np.any(t < 0):
        raise DomainError("times must be non-negative")
    two_h = 2 * H
    out = 0.5 * (t**two_h + s**two_h - np.abs(t - s) ** two_h)
    return out if out.ndim else float(out)


def fgn_covariance(k, dt, H):
    """Autocovariance at lag ``k`` of fBm increments over steps of length ``dt``."""
    H = hurst_value(H)
    k = np.abs(np.asarray(k, dtype=float))
    if dt <= 0:
        raise DomainError("dt must be positive")
    two_h = 2 * H
    out = 0.5 * dt**two_h * ((k + 1) ** two_h + np.abs(k - 1) ** two_h - 2 * k**two_h)
    return out if out.ndim else float(out)


@lru_cache(maxsize=32)
def circulant_sqrt_eigenvalues(n: int, H: float) -> np.ndarray:
    """Square roots of the circulant-embedding eigenvalues for ``n`` unit-step fGn values.

    Negative eigenvalues down to ``-1e-10 * max`` are clipped to zero; anything
    more negative means the embedding is not valid for this ``(n, H)``.
    """
    lags = np.arange(n + 1)
    c = fgn_covariance(lags, 1.0, H)
    row = np.concatenate([c, c[-2:0:-1]])
    lam = np.fft.fft(row).real
    lam_max = lam.max()
    if lam.min() < -EIGEN_CLIP_TOL * lam_max:
        raise MethodError(
            f"circulant embedding has eigenvalue {lam.min():.3e} < -{EIGEN_CLIP_TOL} * max; "
            "use method='cholesky'"
        )
    lam = np.clip(lam, 0.0, None)
    out = np.sqrt(lam / row.size)
    out.setflags(write=False)
    return out


@lru_cache(maxsize=16)
def _grid_cholesky(points_bytes: bytes, H: float) -> np.ndarray:
    t = np.frombuffer(points_bytes, dtype=float)[1:]
    cov = fbm_covariance(t[:, None], t[None, :], H)
    try:
        L = cholesky(cov, lower=True)
    except np.linalg.LinAlgError as exc:
        raise NumericError("fBm grid covariance is not positive definite after rounding") from exc
    L.setflags(write=False)
    return L


def fgn_increments(n_steps: int, dt: float, H: float, rng: np.random.Generator) -> np.ndarray:
    """One draw of ``n_steps`` fBm increments on a uniform grid via circulant embedding."""
    sq = circulant_sqrt_eigenvalues(int(n_steps), float(H))
    m = sq.size
    z = rng.standard_normal(2 * m)
    w = np.fft.fft(sq * (z[:m] + 1j * z[m:]))
    return w[:n_steps].real * dt**H


def _sample_path(grid: TimeGrid, H: float, rng: np.random.Generator, method: str) -> np.ndarray:
    out = np.empty(len(grid))
    out[0] = 0.0
    if method == "circulant":
        out[1:] = np.cumsum(fgn_increments(grid.n_steps, grid.dt, H, rng))
    elif method == "cholesky":
        L = _grid_cholesky(grid.points.tobytes(), H)
        out[1:] = L @ rng.standard_normal(L.shape[0])
    else:
        raise MethodError(f"unknown fBm method {method!r}")
    return out


def fbm_matrix(grid: TimeGrid, H, seed: int, n_paths: int, method: str = "circulant",
               stream: int = 0, first_index: int = 0, threads: int = 1) -> np.ndarray:
    """Sample fBm paths as an array of shape ``(n_paths, len(grid))``.

    Row ``i`` is driven by the substream ``(seed, first_index + i, stream)``
    alone, so results do not depend on ``n_paths`` or ``threads``.
    """
    H = hurst_value(H)
    if n_paths < 1:
        raise DomainError("n_paths must be >= 1")
    if method == "circulant" and not grid.is_uniform:
        raise MethodError("circulant embedding needs a uniform grid; use method='cholesky'")
    out = np.empty((n_paths, len(grid)))

    def work(rows):
        for i in rows:
            out[i] = _sample_path(grid, H, path_rng(seed, first_index + i, stream), method)

    chunks = chunk_indices(n_paths, threads)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(work, chunks))
    else:
        for rows in chunks:
            work(rows)
    return out


def generate_fbm(grid: TimeGrid, H, seed: int, n_paths: int, method: str = "circulant",
                 threads: int = 1) -> list[FbmPath]:
    values = fbm_matrix(grid, H, seed, n_paths, method=method, threads=threads)
    return [FbmPath(grid, values[i], hurst_value(H), int(seed), i) for i in range(n_paths)]


def write_paths_csv(path, paths) -> str:
    """CSV with header ``path_index,t,value``."""
    rows = (
        (p.path_index, t, v)
        for p in paths
        for t, v in zip(p.grid.points, p.values)
    )
    return write_csv(path, ["path_index", "t", "value"], rows)
