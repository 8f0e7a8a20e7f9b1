"""Simulators for the linear fractional self-attracting diffusion.

Three independent constructions of the same Gaussian law:

* ``gaussian_exact``  draws the grid marginals from N(mean, covariance) with
  the covariance from product-integration quadrature;
* ``representation``  evaluates the kernel representation
  X_t = z + int_0^t h(t, s) dB_s + nu m(t) as a midpoint Riemann-Stieltjes sum;
* ``euler``           steps the path-dependent equation directly.

``representation`` and ``euler`` consume the same fBm increments for a given
(seed, path_index), which makes strong-error comparisons possible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cholesky, eigh
from scipy.stats import ks_2samp

from ._rng import path_rng
from .errors import DomainError, MethodError, NumericError
from .fbm import TimeGrid, fbm_matrix
from .gausscov import covariance_matrix
from .io import write_csv
from .kernel import ModelParams, eval_h, h_integral
from .quadrature import QuadratureSpec

_EXACT_STREAM_OFFSET = 16
PSD_TOL = 1e-10


@dataclass(frozen=True)
class DriftSpec:
    """Interaction drift. ``kind='linear'`` uses (a, nu) from the model."""

    kind: str = "linear"
    phi: Callable | None = None
    lipschitz: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "custom"):
            raise DomainError(f"unknown drift kind {self.kind!r}")
        if self.kind == "custom" and (self.phi is None or self.lipschitz is None):
            raise DomainError("a custom drift needs phi and its Lipschitz constant")


@dataclass(frozen=True, eq=False)
class DiffusionPath:
    grid: TimeGrid
    values: np.ndarray  # (d, n_points)
    params: ModelParams
    method: str
    seed: int
    path_index: int


@dataclass(frozen=True, eq=False)
class PathSet:
    """A batch of simulated paths, ``values`` shaped (n_paths, d, n_points)."""

    grid: TimeGrid
    values: np.ndarray
    params: ModelParams
    method: str
    seed: int

    @property
    def n_paths(self) -> int:
        return self.values.shape[0]

    def component(self, dim: int = 0) -> np.ndarray:
        return self.values[:, dim, :]

    def __getitem__(self, i) -> DiffusionPath:
        return DiffusionPath(self.grid, self.values[i], self.params, self.method, self.seed, int(i))

    def __iter__(self):
        return (self[i] for i in range(self.n_paths))

    def to_csv(self, path) -> str:
        t = self.grid.points
        rows = ((i, d, t[k], self.values[i, d, k])
                for i in range(self.n_paths)
                for d in range(self.values.shape[1])
                for k in range(t.size))
        return write_csv(path, ["path_index", "dim", "t", "value"], rows)


def _driving_increments(grid, params, seed, n_paths, threads):
    out = np.empty((n_paths, params.d, grid.n_steps))
    for dim in range(params.d):
        B = fbm_matrix(grid, params.H, seed, n_paths, method="circulant", stream=dim, threads=threads)
        out[:, dim, :] = np.diff(B, axis=1)
    return out


def _require_uniform(grid):
    if not grid.is_uniform:
        raise MethodError("this simulator needs a uniform grid")


def _require_horizon(grid, params):
    if grid.T > params.T * (1 + 1e-12):
        raise DomainError("grid extends beyond the model horizon T")


def mean_function(grid: TimeGrid, params: ModelParams) -> np.ndarray:
    if params.nu == 0:
        return np.full(len(grid), float(params.z))
    return params.z + params.nu * np.array([h_integral(t, params.a) for t in grid.points])


def psd_factor(cov: np.ndarray, tol: float = PSD_TOL) -> np.ndarray:
    """A matrix L with L L^T = cov; Cholesky when possible, else clipped eigenfactor."""
    try:
        return cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        w, V = eigh(cov)
        if w[0] < -tol * max(w[-1], 1.0):
            raise NumericError(f"covariance not PSD: min eigenvalue {w[0]:.3e}", estimate=w[0])
        return V * np.sqrt(np.clip(w, 0.0, None))


def simulate_gaussian_exact(params: ModelParams, grid: TimeGrid, n_paths: int, seed: int,
                            quad: QuadratureSpec | None = None, threads: int = 1) -> PathSet:
    if len(grid) > 2049:
        raise DomainError("gaussian_exact is limited to 2048 steps")
    _require_horizon(grid, params)
    cov = covariance_matrix(grid.points, params, quad)[1:, 1:]
    L = psd_factor(0.5 * (cov + cov.T))
    mean = mean_function(grid, params)
    n = L.shape[0]
    values = np.empty((n_paths, params.d, len(grid)))
    Z = np.empty((n_paths, params.d, n))
    for i in range(n_paths):
        for dim in range(params.d):
            Z[i, dim] = path_rng(seed, i, _EXACT_STREAM_OFFSET + dim).standard_normal(n)
    values[:, :, 0] = params.z
    values[:, :, 1:] = mean[1:] + Z @ L.T
    return PathSet(grid, values, params, "gaussian_exact", int(seed))


def representation_matrix(grid: TimeGrid, a: float) -> np.ndarray:
    """R[k, i] = h(t_k, midpoint of step i) for i < k, else 0."""
    t = grid.points
    mid = 0.5 * (t[:-1] + t[1:])
    R = eval_h(t[:, None], mid[None, :], a)
    return np.where(mid[None, :] < t[:, None], R, 0.0)


def simulate_representation(params: ModelParams, grid: TimeGrid, n_paths: int, seed: int,
                            threads: int = 1) -> PathSet:
    _require_uniform(grid)
    _require_horizon(grid, params)
    dB = _driving_increments(grid, params, seed, n_paths, threads)
    if params.a == 0:
        # h = 1: the sum telescopes; accumulate in path order so that it matches euler bit for bit
        start = np.full(dB.shape[:2] + (1,), float(params.z))
        values = np.cumsum(np.concatenate([start, dB], axis=-1), axis=-1) + params.nu * grid.points
    else:
        R = representation_matrix(grid, params.a)
        values = dB @ R.T + mean_function(grid, params)
        values[:, :, 0] = params.z
    return PathSet(grid, values, params, "representation", int(seed))


def simulate_euler(params: ModelParams, grid: TimeGrid, n_paths: int, seed: int,
                   drift: DriftSpec | None = None, threads: int = 1) -> PathSet:
    """Euler scheme for X_t = z + B_t + int_0^t [nu + int_0^s Phi(X_s - X_u) du] ds.

    For the linear drift Phi(x) = -a x the inner integral is evaluated from a
    running sum, s X_s - int_0^s X_u du ~ t_k X_k - sum_{j<k} X_j dt, which is
    the same left Riemann sum rearranged and costs O(1) per step.
    """
    drift = drift or DriftSpec()
    _require_uniform(grid)
    _require_horizon(grid, params)
    dt = grid.dt
    lip = params.a if drift.kind == "linear" else drift.lipschitz
    if dt * lip * grid.T > 1:
        raise NumericError(f"step too large for stability guard: dt*L*T = {dt * lip * grid.T:.3g} > 1")
    dB = _driving_increments(grid, params, seed, n_paths, threads)
    n = grid.n_steps
    X = np.empty((n_paths, params.d, n + 1))
    X[:, :, 0] = params.z
    if drift.kind == "linear":
        S = np.zeros((n_paths, params.d))
        for k in range(n):
            xk = X[:, :, k]
            X[:, :, k + 1] = xk + dB[:, :, k] + dt * (params.nu - params.a * (k * dt * xk - S))
            S += xk * dt
    else:
        for k in range(n):
            xk = X[:, :, k]
            inner = drift.phi(xk[:, :, None] - X[:, :, :k]).sum(axis=-1) * dt if k else 0.0
            X[:, :, k + 1] = xk + dB[:, :, k] + dt * (params.nu + inner)
    return PathSet(grid, X, params, "euler", int(seed))


SIMULATORS = {
    "gaussian_exact": simulate_gaussian_exact,
    "representation": simulate_representation,
    "euler": simulate_euler,
}


def simulate(method: str, params: ModelParams, grid: TimeGrid, n_paths: int, seed: int, **kw) -> PathSet:
    try:
        fn = SIMULATORS[method]
    except KeyError:
        raise MethodError(f"unknown simulation method {method!r}") from None
    return fn(params, grid, n_paths, seed, **kw)


# ---------------------------------------------------------------------------
# reporting

@dataclass(frozen=True, eq=False)
class MomentReport:
    t: np.ndarray
    mean: np.ndarray
    se_mean: np.ndarray
    var: np.ndarray
    se_var: np.ndarray
    n_paths: int

    def to_csv(self, path) -> str:
        return write_csv(path, ["t", "mean", "se_mean", "var", "se_var"],
                         zip(self.t, self.mean, self.se_mean, self.var, self.se_var))


def moment_report(paths: PathSet, dim: int = 0) -> MomentReport:
    X = paths.component(dim)
    n = X.shape[0]
    mean = X.mean(axis=0)
    centred = X - mean
    var = (centred**2).sum(axis=0) / (n - 1)
    m4 = (centred**4).mean(axis=0)
    se_var = np.sqrt(np.clip(m4 - var**2, 0.0, None) / n)
    return MomentReport(paths.grid.points.copy(), mean, np.sqrt(var / n), var, se_var, n)


def ks_critical_1pct(n: int, m: int) -> float:
    return 1.628 * np.sqrt((n + m) / (n * m))


def ks_agreement(x, y) -> tuple[float, float]:
    """(KS statistic, 1% critical value) for two samples."""
    return float(ks_2samp(x, y).statistic), float(ks_critical_1pct(len(x), len(y)))


@dataclass(frozen=True)
class SupDecayRow:
    n: float
    eps: float
    sup_freq: float
    sup_se: float
    point_freq: float
    point_se: float
    gap_var: float
    tail_bound: float


def sup_decay_study(params: ModelParams, n_paths: int, seed: int, horizon_list=(1, 2, 3, 4, 6),
                    eps_list=(0.2,), steps_per_unit: int = 16, quad: QuadratureSpec | None = None,
                    threads: int = 1) -> list[SupDecayRow]:
    """Frequencies of sup_{[n, n+1]} |X_t - X_ref| > eps, with X_ref the path at the last horizon.

    Each row also carries the pointwise frequency at t = n and the Gaussian
    tail bound 2 exp(-eps^2 / (2 Var(X_n - X_ref))) that it must respect.
    """
    horizons = sorted(horizon_list)
    ref = horizons[-1]
    windows = [n for n in horizons[:-1] if n + 1 <= ref]
    if not windows:
        raise DomainError("need at least one horizon n with n + 1 <= last horizon")
    p = ModelParams(a=params.a, nu=0.0, z=params.z, H=params.H, T=float(ref), d=1)
    grid = TimeGrid.uniform(ref, int(round(ref * steps_per_unit)))
    X = simulate_gaussian_exact(p, grid, n_paths, seed, quad, threads).component(0)
    cov = covariance_matrix(grid.points, p, quad)
    gap = X - X[:, -1:]
    t = grid.points
    rows = []
    for n in windows:
        win = (t >= n - 1e-12) & (t <= n + 1 + 1e-12)
        sup = np.abs(gap[:, win]).max(axis=1)
        k = int(np.argmin(np.abs(t - n)))
        point = np.abs(gap[:, k])
        v = float(cov[k, k] + cov[-1, -1] - 2 * cov[k, -1])
        for eps in eps_list:
            fs = float(np.mean(sup > eps))
            fp = float(np.mean(point > eps))
            bound = 2 * np.exp(-eps * eps / (2 * v)) if v > 0 else 0.0
            rows.append(SupDecayRow(float(n), float(eps), fs, float(np.sqrt(fs * (1 - fs) / n_paths)),
                                    fp, float(np.sqrt(fp * (1 - fp) / n_paths)), v, float(min(1.0, bound))))
    return rows


def write_sup_decay_csv(path, rows) -> str:
    return write_csv(path, ["n", "eps", "sup_freq", "sup_se", "point_freq", "point_se", "gap_var", "tail_bound"],
                     ((r.n, r.eps, r.sup_freq, r.sup_se, r.point_freq, r.point_se, r.gap_var, r.tail_bound)
                      for r in rows))


def strong_error(params: ModelParams, n_steps: int, n_paths: int, seed: int, threads: int = 1) -> np.ndarray:
    """max_t |X_euler - X_repr| per path with shared driving noise."""
    grid = TimeGrid.uniform(params.T, n_steps)
    xe = simulate_euler(params, grid, n_paths, seed, threads=threads).values
    xr = simulate_representation(params, grid, n_paths, seed, threads=threads).values
    return np.abs(xe - xr).max(axis=(1, 2))

