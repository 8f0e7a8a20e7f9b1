"""Local time and weighted local time: path estimators and Gaussian expectations.

The occupation estimator treats each path as the piecewise-linear interpolant
of its grid values. On a linear segment the set of times spent in the band
[x - eps, x + eps] is a single interval whose ends are found exactly, so the
estimate has no band-edge binning bias.

Expectations use E delta(X_s - x) = rho(x; z, sigma_s^2) for the Gaussian X_s.
The time integrals have algebraic endpoint behaviour at s = 0, which is
factored out: each of sigma_s^2 / s^{2H}, w(s) / s^{2H-1} and the drift
integrand G(s) / s^{2H+1} is a smooth function of s and is replaced by its
Chebyshev interpolant before a Gauss-Jacobi treatment of the power.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.special import ndtr

from .errors import DomainError, ResolutionError
from .gausscov import _h_on, _model_integral, sigma2
from .io import write_csv
from .kernel import ModelParams, WeightTable, eval_h, eval_weight
from .quadrature import QuadratureSpec, gauss_legendre, integrate_left_singular
from .simulate import PathSet

PROFILE_NODES = 24


@dataclass(frozen=True)
class LocalTimeEstimate:
    x: float
    t: float
    value: float
    bandwidth: float
    n_paths: int
    standard_error: float
    per_path: np.ndarray | None = None

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise DomainError("bandwidth must be positive")


def band_time_fractions(A, B, lo, hi):
    """Ends (f1, f2) in [0, 1] of the sub-interval a linear segment A -> B spends in [lo, hi]."""
    A, B = np.broadcast_arrays(np.asarray(A, float), np.asarray(B, float))
    dx = B - A
    flat = dx == 0
    safe = np.where(flat, 1.0, dx)
    e1 = (lo - A) / safe
    e2 = (hi - A) / safe
    f1 = np.clip(np.minimum(e1, e2), 0.0, 1.0)
    f2 = np.clip(np.maximum(e1, e2), 0.0, 1.0)
    inside = (A >= lo) & (A <= hi)
    f1 = np.where(flat, 0.0, f1)
    f2 = np.where(flat, inside.astype(float), f2)
    return f1, f2


def resolution_floor(X: np.ndarray) -> float:
    """Smallest admissible bandwidth: twice the mean absolute step displacement."""
    return 2.0 * float(np.mean(np.abs(np.diff(X, axis=-1))))


def _time_index(paths: PathSet, t: float) -> int:
    pts = paths.grid.points
    k = int(np.searchsorted(pts, t - 1e-12 * max(1.0, t)))
    if k >= pts.size or abs(pts[k] - t) > 1e-9 * max(1.0, t):
        raise DomainError(f"t={t} is not a grid point")
    return k


def _occupation(paths: PathSet, x, t, bandwidth, weights, dim):
    paths.params.require_driftless("local time")
    k = _time_index(paths, t)
    X = paths.component(dim)[:, : k + 1]
    if k == 0:
        return np.zeros(X.shape[0])
    floor = resolution_floor(X)
    if bandwidth < floor:
        raise ResolutionError(f"bandwidth {bandwidth:g} below resolution floor {floor:.4g}")
    pts = paths.grid.points[: k + 1]
    dt = np.diff(pts)
    f1, f2 = band_time_fractions(X[:, :-1], X[:, 1:], x - bandwidth, x + bandwidth)
    if weights is None:
        seg = dt * (f2 - f1)
    else:
        w = np.asarray(weights, float)[: k + 1]
        # exact integral of the linearly interpolated weight over [f1, f2] of each step
        seg = dt * (f2 - f1) * (w[:-1] + (w[1:] - w[:-1]) * 0.5 * (f1 + f2))
    return seg.sum(axis=1) / (2 * bandwidth)


def _summarize(per_path, x, t, bandwidth):
    n = per_path.size
    se = float(per_path.std(ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return LocalTimeEstimate(float(x), float(t), float(per_path.mean()), float(bandwidth), n, se, per_path)


def estimate_local_time(paths: PathSet, x: float, t: float, bandwidth: float, dim: int = 0) -> LocalTimeEstimate:
    """Occupation density (1/2eps) |{s <= t : |X_s - x| <= eps}| averaged over paths."""
    return _summarize(_occupation(paths, x, t, bandwidth, None, dim), x, t, bandwidth)


def estimate_weighted_local_time(paths: PathSet, x: float, t: float, bandwidth: float,
                                 weights: WeightTable, dim: int = 0) -> LocalTimeEstimate:
    """As :func:`estimate_local_time` with the time measure weighted by w(s)."""
    if weights.grid != paths.grid:
        raise DomainError("weight table must live on the path grid")
    return _summarize(_occupation(paths, x, t, bandwidth, weights.weights, dim), x, t, bandwidth)


def start_bias_exponent(H: float, weighted: bool) -> float:
    """Order p of the bandwidth bias c eps^p at x = z.

    The path starts at z, so for s below eps^{1/H} the band cannot resolve
    the density blow-up s^{-H}; rescaling s = eps^{1/H} r gives p = (1-H)/H
    for the plain local time and p = 1 once the weight s^{2H-1} is included.
    """
    return 1.0 if weighted else (1 - H) / H


def extrapolated_local_time(paths: PathSet, x: float, t: float, bandwidth: float,
                            weights: WeightTable | None = None, dim: int = 0,
                            exponent: float | None = None) -> LocalTimeEstimate:
    """Two-bandwidth Richardson estimate from eps and 2 eps, removing the c eps^p bias term.

    The combination is formed per path, so the reported standard error
    accounts for the correlation between the two bandwidths.
    """
    p = start_bias_exponent(paths.params.H, weights is not None) if exponent is None else exponent
    q = 2.0**p
    fine = _occupation(paths, x, t, bandwidth, None if weights is None else weights.weights, dim)
    coarse = _occupation(paths, x, t, 2 * bandwidth, None if weights is None else weights.weights, dim)
    return _summarize((q * fine - coarse) / (q - 1), x, t, bandwidth)


# ---------------------------------------------------------------------------
# Gaussian expectations

def gaussian_density(x, mean, var):
    var = np.asarray(var, float)
    return np.exp(-0.5 * (x - mean) ** 2 / var) / np.sqrt(2 * np.pi * var)


def folded_normal_mean(m, sd):
    """E|Y| for Y ~ N(m, sd^2)."""
    if sd == 0:
        return abs(m)
    return sd * np.sqrt(2 / np.pi) * np.exp(-0.5 * (m / sd) ** 2) + m * (1 - 2 * ndtr(-m / sd))


class RatioProfile:
    """Chebyshev interpolant of f(s) / s^p on [0, t], built from f at Chebyshev nodes."""

    def __init__(self, fn, power: float, t: float, n: int = PROFILE_NODES):
        self.t, self.power = float(t), float(power)
        y = np.cos(np.pi * (np.arange(n) + 0.5) / n)
        s = 0.5 * self.t * (y + 1)
        vals = np.array([fn(float(si)) for si in s]) / s**power
        self.coef = C.chebfit(y, vals, n - 1)

    def ratio(self, s):
        return C.chebval(2 * np.asarray(s, float) / self.t - 1, self.coef)

    def __call__(self, s):
        s = np.asarray(s, float)
        return self.ratio(s) * s**self.power


def sigma2_profile(t, params, quad=None) -> RatioProfile:
    return RatioProfile(lambda s: sigma2(s, params, quad), 2 * params.H, t)


def weight_profile(t, params, quad=None) -> RatioProfile:
    return RatioProfile(lambda s: eval_weight(s, params, quad), 2 * params.H - 1, t)


def _mean_lt(t, x, params, quad, weighted):
    params.require_driftless("local time")
    if t < 0 or t > params.T * (1 + 1e-12):
        raise DomainError(f"t={t} outside [0, T]")
    if t == 0:
        return 0.0
    H = params.H
    var = sigma2_profile(t, params, quad)
    if weighted:
        w = weight_profile(t, params, quad)
        # w rho ~ s^{2H-1} s^{-H}
        f = lambda s: w.ratio(s) * var.ratio(s) ** -0.5 * np.exp(-0.5 * (x - params.z) ** 2 / var(s)) / np.sqrt(2 * np.pi)
        return integrate_left_singular(f, t, H - 1)
    f = lambda s: var.ratio(s) ** -0.5 * np.exp(-0.5 * (x - params.z) ** 2 / var(s)) / np.sqrt(2 * np.pi)
    return integrate_left_singular(f, t, -H)


def analytic_mean_local_time(t: float, x: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """E L_t^x = int_0^t rho(x; z, sigma_s^2) ds."""
    return _mean_lt(t, x, params, quad, weighted=False)


def analytic_mean_weighted_local_time(t: float, x: float, params: ModelParams,
                                      quad: QuadratureSpec | None = None) -> float:
    """E of the weighted local time, int_0^t w(s) rho(x; z, sigma_s^2) ds."""
    return _mean_lt(t, x, params, quad, weighted=True)


def fbm_mean_local_time(t, x, z, H):
    """a = 0, x = z closed form t^{1-H} / ((1-H) sqrt(2 pi))."""
    if x != z:
        raise DomainError("closed form only at x = z")
    return t ** (1 - H) / ((1 - H) * np.sqrt(2 * np.pi))


# ---------------------------------------------------------------------------
# Tanaka identity in expectation

def kernel_time_integral(s: float, q, a: float, n: int = 24):
    """k(s, q) = int_q^s h(u, q) du for q <= s, vectorized over q."""
    q = np.asarray(q, float)
    x, w = gauss_legendre(n)
    span = np.clip(s - q, 0.0, None)
    u = q[..., None] + span[..., None] * x
    return span * (eval_h(u, np.broadcast_to(q[..., None], u.shape), a) @ w)


def integrated_cross_cov(s: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """int_0^s Cov(X_s, X_u) du as one phi-weighted integral of h(s, .) against k(s, .)."""
    quad = quad or QuadratureSpec()
    if s == 0:
        return 0.0
    hs = _h_on(s, params)
    a = params.a
    ks = lambda q: np.where(q <= s, kernel_time_integral(s, np.clip(q, 0, s), a), 0.0)
    return _model_integral(hs, ks, [0.0, s], params, quad, "integrated_cross_cov")


def drift_gap(s: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """G(s) = int_0^s (sigma_s^2 - Cov(X_s, X_u)) du."""
    if s == 0:
        return 0.0
    return s * sigma2(s, params, quad) - integrated_cross_cov(s, params, quad)


def drift_term(t: float, x: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """Expected drift contribution D(t, x) = -2a int_0^t rho(x; z, sigma_s^2) G(s) ds."""
    if t == 0 or params.a == 0:
        return 0.0
    H = params.H
    var = sigma2_profile(t, params, quad)
    g = RatioProfile(lambda s: drift_gap(s, params, quad), 2 * H + 1, t)
    f = lambda s: g.ratio(s) * var.ratio(s) ** -0.5 * np.exp(-0.5 * (x - params.z) ** 2 / var(s)) / np.sqrt(2 * np.pi)
    return -2 * params.a * integrate_left_singular(f, t, H + 1)


@dataclass(frozen=True)
class TanakaReport:
    t: float
    x: float
    E_abs: float
    drift_term: float
    E_weighted_lt: float
    residual: float


def tanaka_report(t: float, x: float, params: ModelParams, quad: QuadratureSpec | None = None) -> TanakaReport:
    """Terms of E|X_t - x| = |z - x| + D(t, x) + E weighted local time, and the residual.

    The stochastic integral part is taken to have zero mean.
    """
    params.require_driftless("Tanaka check")
    if t == 0:
        return TanakaReport(0.0, float(x), abs(params.z - x), 0.0, 0.0, 0.0)
    e_abs = folded_normal_mean(params.z - x, np.sqrt(sigma2(t, params, quad)))
    d = drift_term(t, x, params, quad)
    lt = analytic_mean_weighted_local_time(t, x, params, quad)
    r = e_abs - abs(params.z - x) - d - lt
    return TanakaReport(float(t), float(x), float(e_abs), float(d), float(lt), float(r))


def tanaka_expectation_residual(t: float, x: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    return tanaka_report(t, x, params, quad).residual


def fbm_tanaka_cancellation(t: float, H: float) -> float:
    """a = 0, x = z: sqrt(2/pi) t^H minus int_0^t 2H s^{2H-1} (2 pi s^{2H})^{-1/2} ds, in closed form."""
    e_abs = np.sqrt(2 / np.pi) * t**H
    lt = 2 * H / np.sqrt(2 * np.pi) * t**H / H
    return float(e_abs - lt)


def write_local_time_csv(path, rows) -> str:
    """Rows of (estimate, analytic_mean)."""
    return write_csv(path, ["x", "t", "bandwidth", "estimate", "se", "analytic_mean"],
                     ((e.x, e.t, e.bandwidth, e.value, e.standard_error, m) for e, m in rows))


def write_tanaka_csv(path, reports) -> str:
    return write_csv(path, ["t", "x", "E_abs", "drift_term", "E_weighted_lt", "residual"],
                     ((r.t, r.x, r.E_abs, r.drift_term, r.E_weighted_lt, r.residual) for r in reports))
