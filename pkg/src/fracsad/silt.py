"""Self-intersection local time of the planar process.

beta^eps = int_0^T int_0^t p_eps(X_t - X_s) ds dt with the heat kernel
p_eps(x) = exp(-|x|^2 / (2 eps)) / (2 pi eps). Both coordinates of X are
independent copies of the one-dimensional linear model, so every moment
reduces to the increment variances sigma^2_{t,s} of one coordinate:

    E beta^eps   = (1/2pi) int (eps + sigma^2_{t,s})^{-1}
    Var beta^eps = (1/2pi)^2 int mu^2 / (D (D - mu^2)),  D = (sigma^2_{t,s}+eps)(sigma^2_{t',s'}+eps)

with mu the covariance of the two increments. Increment variances are served
from :class:`IncrementVarianceTable`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad as scipy_quad
from scipy.interpolate import CubicSpline, RectBivariateSpline
from scipy.stats import qmc

from .errors import DomainError, NumericError, ResolutionError
from .gausscov import covariance_matrix, sigma2_increment
from .io import write_csv
from .kernel import ModelParams
from .quadrature import QuadratureSpec, gauss_legendre
from .simulate import PathSet

TWO_PI = 2 * np.pi
SOBOL_SEED = 20240611
_NEAR_FIT_POINTS = 8
_NEAR_CELLS = 3


def heat_kernel(x, epsilon):
    """p_eps(x) for 2-d displacements ``x`` of shape (..., 2)."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    x = np.asarray(x, float)
    r2 = np.sum(x * x, axis=-1)
    return np.exp(-0.5 * r2 / epsilon) / (TWO_PI * epsilon)


def heat_kernel_fourier(x, epsilon) -> float:
    """(2pi)^{-2} int exp(i <xi, x> - eps |xi|^2 / 2) dxi, evaluated as a product of 1-d cosine integrals."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    out = 1.0
    # the Gaussian factor is below e^-40 beyond this cutoff
    cut = np.sqrt(80.0 / epsilon)
    for xk in np.asarray(x, float).ravel():
        f = lambda xi: np.exp(-0.5 * epsilon * xi * xi)
        val = scipy_quad(f, 0, cut, weight="cos", wvar=abs(xk), epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        out *= val / np.pi
    return out


@dataclass(frozen=True)
class RegionT:
    """The set {0 < s < t < T} x {0 < s' < t' < T}."""

    T: float

    def __post_init__(self):
        if self.T <= 0:
            raise DomainError("T must be positive")

    def map_half(self, u, power: float = 3.0):
        """Map unit-cube points onto the half t' < t; returns (s, t, s', t', jacobian).

        Interval lengths are drawn as t y^power so that short intervals, where
        the integrand varies on the scale sigma^2 ~ eps, receive more points.
        """
        u = np.asarray(u, float)
        t = self.T * u[:, 0]
        d = t * u[:, 1] ** power
        tp = t * u[:, 2]
        dp = tp * u[:, 3] ** power
        jac = self.T * t * power * u[:, 1] ** (power - 1) * t * tp * power * u[:, 3] ** (power - 1)
        return t - d, t, tp - dp, tp, jac

    def map_full(self, u, power: float = 3.0):
        u = np.asarray(u, float)
        t = self.T * u[:, 0]
        d = t * u[:, 1] ** power
        tp = self.T * u[:, 2]
        dp = tp * u[:, 3] ** power
        jac = self.T * t * power * u[:, 1] ** (power - 1) * self.T * tp * power * u[:, 3] ** (power - 1)
        return t - d, t, tp - dp, tp, jac


class IncrementVarianceTable:
    """sigma^2_{t,s} on [0, T]^2 by interpolation of quadrature values.

    The ratio R(s, d) = sigma^2_{s+d,s} / d^{2H} is tabulated on a uniform
    (s, d) grid from one covariance matrix on [0, 2T] and interpolated with a
    bicubic spline. Near d = 0 the ratio is not smooth: it has the form
    A(s, d) + d^{2-2H} B(s, d) with A, B smooth and A(s, 0) = 1. Within the
    first few cells the table therefore switches to a per-row least-squares
    fit in the basis d^{2-2H}, d, d^{3-2H}, d^2, with coefficients splined in s.
    """

    def __init__(self, params: ModelParams, n_cells: int = 256, quad: QuadratureSpec | None = None):
        self.params = params
        self.T = float(params.T)
        self.H = float(params.H)
        M = int(n_cells)
        wide = ModelParams(a=params.a, nu=0.0, z=params.z, H=params.H, T=2 * self.T, d=1)
        t = np.linspace(0.0, 2 * self.T, 2 * M + 1)
        C = covariance_matrix(t, wide, quad)
        diag = np.diag(C)
        idx = np.arange(M + 1)
        S, K = idx[:, None], idx[None, :]
        V = diag[S] + diag[S + K] - 2 * C[S, S + K]
        grid = t[: M + 1]
        lengths = np.where(K > 0, grid[K], 1.0)
        R = np.where(K > 0, V / lengths ** (2 * self.H), 1.0)
        self.step = grid[1]
        self._spline = RectBivariateSpline(grid, grid, R, kx=3, ky=3)
        d = grid[1 : _NEAR_FIT_POINTS + 1]
        coef = np.linalg.lstsq(self._near_basis(d), (R[:, 1 : _NEAR_FIT_POINTS + 1] - 1).T, rcond=None)[0]
        self._near = CubicSpline(grid, coef.T)

    def _near_basis(self, d):
        q = 2 - 2 * self.H
        d = np.asarray(d, float)
        return np.stack([d**q, d, d ** (q + 1), d * d], axis=-1)

    def ratio(self, s, d):
        s, d = np.broadcast_arrays(np.asarray(s, float), np.asarray(d, float))
        out = self._spline.ev(s, d)
        near = d < _NEAR_CELLS * self.step
        if np.any(near):
            out = np.array(out, copy=True)
            out[near] = 1 + np.sum(self._near(s[near]) * self._near_basis(d[near]), axis=-1)
        return out

    def __call__(self, t, s):
        """sigma^2 between times ``t`` and ``s`` (any order), vectorized."""
        t, s = np.broadcast_arrays(np.asarray(t, float), np.asarray(s, float))
        lo = np.minimum(t, s)
        d = np.abs(t - s)
        if np.any(lo < -1e-12) or np.any(np.maximum(t, s) > self.T * (1 + 1e-9)):
            raise DomainError("times outside the table range [0, T]")
        out = self.ratio(lo, d) * d ** (2 * self.H)
        return out if out.ndim else float(out)

    def mu(self, s, t, sp, tp):
        """Covariance of X_t - X_s and X_t' - X_s'."""
        return 0.5 * (self(t, sp) + self(s, tp) - self(t, tp) - self(s, sp))

    def d_H(self, s, t, sp, tp):
        return self(t, s) * self(tp, sp) - self.mu(s, t, sp, tp) ** 2

    def spot_check(self, n: int = 100, seed: int = 0, quad: QuadratureSpec | None = None) -> float:
        """Largest relative table error against direct quadrature at ``n`` random pairs.

        Half the pairs are uniform on the triangle and half have log-uniform
        separation down to 1e-6, where the near-diagonal model is in use.
        """
        rng = np.random.default_rng(seed)
        worst = 0.0
        for i in range(n):
            s, t = np.sort(rng.uniform(0, self.T, 2))
            if i % 2:
                t = min(self.T, s + self.T * 10 ** rng.uniform(-6, -1))
            if t == s:
                continue
            direct = sigma2_increment(t, s, self.params, quad)
            worst = max(worst, abs(self(t, s) / direct - 1))
        return worst


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class SiltEstimate:
    epsilon: float
    mc_mean: float
    mc_var: float
    mc_se: float
    mc_var_se: float
    analytic_mean: float
    analytic_var: float
    n_paths: int
    steps: int

    def __post_init__(self):
        if self.epsilon <= 0:
            raise DomainError("epsilon must be positive")
        if self.mc_var < 0 or self.analytic_var < 0:
            raise DomainError("variances must be non-negative")


def beta_resolution_floor(paths: PathSet) -> float:
    """Smallest admissible epsilon: 4 times the largest per-step mean squared displacement."""
    dX = np.diff(paths.values, axis=-1)
    return 4.0 * float(np.max(np.mean(np.sum(dX * dX, axis=1), axis=0)))


def beta_samples(paths: PathSet, epsilons) -> np.ndarray:
    """Per-path trapezoid sums of p_eps over the triangle, shape (len(epsilons), n_paths).

    The trapezoid rule on the square [0, T]^2 halved gives the triangle sum
    with the diagonal at half weight; the integrand is continuous across the
    diagonal, so this keeps second order in the step.
    """
    if paths.values.shape[1] != 2:
        raise DomainError("self-intersection local time needs d = 2 paths")
    paths.params.require_driftless("self-intersection local time")
    grid = paths.grid
    if not grid.is_uniform:
        raise DomainError("uniform grid required")
    eps = np.atleast_1d(np.asarray(epsilons, float))
    floor = beta_resolution_floor(paths)
    if np.any(eps < floor):
        raise ResolutionError(f"epsilon {eps.min():g} below resolution floor {floor:.4g}")
    X = paths.values
    n = grid.n_steps
    dt = grid.dt
    c = np.ones(n + 1)
    c[0] = c[-1] = 0.5
    out = np.zeros((eps.size, X.shape[0]))
    out += (0.5 * np.sum(c * c) / (TWO_PI * eps))[:, None]
    for k in range(1, n + 1):
        diff = X[:, :, k:] - X[:, :, :-k]
        r2 = np.sum(diff * diff, axis=1)
        wk = c[k:] * c[:-k]
        for e, ee in enumerate(eps):
            out[e] += np.exp(-0.5 / ee * r2) @ wk / (TWO_PI * ee)
    return out * dt * dt


def estimate_beta_mc(paths: PathSet, epsilon: float) -> SiltEstimate:
    b = beta_samples(paths, [epsilon])[0]
    n = b.size
    mean = float(b.mean())
    var = float(b.var(ddof=1))
    m4 = float(np.mean((b - mean) ** 4))
    return SiltEstimate(float(epsilon), mean, var, float(np.sqrt(var / n)),
                        float(np.sqrt(max(m4 - var * var, 0.0) / n)), float("nan"), 0.0, n,
                        paths.grid.n_steps)


# ---------------------------------------------------------------------------
# quadrature moments

def analytic_mean_beta(epsilon: float, params: ModelParams, quad: QuadratureSpec | None = None,
                       table: IncrementVarianceTable | None = None, n: int = 48) -> float:
    """(1/2pi) int_0^T int_0^t (eps + sigma^2_{t,s})^{-1} ds dt.

    Tensor Gauss-Legendre in (t, y) with s = t - t y^3; recomputed with twice
    the nodes and rejected if the two disagree beyond 1e-7 relative.
    """
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    table = table or IncrementVarianceTable(params, quad=quad)

    def rule(m):
        x, w = gauss_legendre(m)
        t = params.T * x[:, None]
        y = x[None, :]
        d = t * y**3
        f = 1.0 / (epsilon + table(t, t - d))
        return params.T * np.sum(w[:, None] * w[None, :] * f * 3 * t * y**2) / TWO_PI

    coarse, fine = rule(n), rule(2 * n)
    if abs(fine - coarse) > 1e-7 * abs(fine):
        raise NumericError("mean quadrature did not settle", estimate=fine, error=abs(fine - coarse))
    return float(fine)


def fbm_mean_beta(epsilon: float, H: float, T: float = 1.0) -> float:
    """a = 0 reduction by stationarity of increments: (1/2pi) int_0^T (T - u) / (eps + u^{2H}) du."""
    f = lambda u: (T - u) / (epsilon + u ** (2 * H))
    return scipy_quad(f, 0, T, points=[min(T, 1e-3)], epsabs=1e-14, epsrel=1e-13, limit=200)[0] / TWO_PI


@dataclass(frozen=True)
class QmcEstimate:
    value: float
    error: float
    n_points: int


def _qmc(integrand, n_rep: int, m: int, seed: int) -> tuple[float, float]:
    reps = []
    for r in range(n_rep):
        u = qmc.Sobol(4, scramble=True, seed=np.random.default_rng([seed, r])).random_base2(m)
        u = np.clip(u, 1e-300, 1.0)
        reps.append(integrand(u))
    reps = np.array(reps)
    return float(reps.mean()), float(reps.std(ddof=1) / np.sqrt(n_rep))


def _adaptive_qmc(integrand, rel_tol, m, max_m, n_rep, seed, what) -> QmcEstimate:
    while True:
        val, err = _qmc(integrand, n_rep, m, seed)
        if err <= rel_tol * abs(val) or val == 0:
            return QmcEstimate(val, err, n_rep * 2**m)
        if m >= max_m:
            raise NumericError(f"{what}: sample budget exhausted", estimate=val, error=err)
        m += 1


def analytic_var_beta(epsilon: float, params: ModelParams, quad: QuadratureSpec | None = None,
                      region: RegionT | None = None, table: IncrementVarianceTable | None = None,
                      rel_tol: float = 2e-3, m: int = 14, max_m: int = 18, n_rep: int = 8,
                      seed: int = SOBOL_SEED) -> QmcEstimate:
    """Var beta^eps by randomized Sobol integration over the half t' < t, doubled."""
    if epsilon <= 0:
        raise DomainError("epsilon must be positive")
    region = region or RegionT(params.T)
    table = table or IncrementVarianceTable(params, quad=quad)

    def integrand(u):
        s, t, sp, tp, jac = region.map_half(u)
        a = table(t, s) + epsilon
        b = table(tp, sp) + epsilon
        mu = table.mu(s, t, sp, tp)
        D = a * b
        return 2 * np.mean(jac * mu * mu / (D * (D - mu * mu))) / TWO_PI**2

    return _adaptive_qmc(integrand, rel_tol, m, max_m, n_rep, seed, "analytic_var_beta")


def second_moment_beta(epsilon: float, params: ModelParams, quad: QuadratureSpec | None = None,
                       table: IncrementVarianceTable | None = None, rel_tol: float = 2e-4,
                       m: int = 14, max_m: int = 18, n_rep: int = 8, seed: int = SOBOL_SEED + 1) -> QmcEstimate:
    """E (beta^eps)^2 = (1/2pi)^2 int_T det(Sigma + eps I)^{-1} over the full region."""
    region = RegionT(params.T)
    table = table or IncrementVarianceTable(params, quad=quad)

    def integrand(u):
        s, t, sp, tp, jac = region.map_full(u)
        a = table(t, s) + epsilon
        b = table(tp, sp) + epsilon
        mu = table.mu(s, t, sp, tp)
        return np.mean(jac / (a * b - mu * mu)) / TWO_PI**2

    return _adaptive_qmc(integrand, rel_tol, m, max_m, n_rep, seed, "second_moment_beta")


@dataclass(frozen=True)
class ConvergenceRow:
    epsilon: float
    analytic_var: float
    error: float
    delta_prev: float


def convergence_study(epsilon_seq, params: ModelParams, quad: QuadratureSpec | None = None,
                      table: IncrementVarianceTable | None = None, **qmc_kw) -> list[ConvergenceRow]:
    """Var beta^eps along a decreasing epsilon sequence with successive differences."""
    eps = [float(e) for e in epsilon_seq]
    if any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("epsilon sequence must be strictly decreasing")
    table = table or IncrementVarianceTable(params, quad=quad)
    rows, prev = [], None
    for e in eps:
        v = analytic_var_beta(e, params, table=table, **qmc_kw)
        delta = float("nan") if prev is None else abs(v.value - prev)
        rows.append(ConvergenceRow(e, v.value, v.error, delta))
        prev = v.value
    return rows


def cauchy_shrinking(rows) -> bool:
    d = [r.delta_prev for r in rows[1:]]
    return all(b < a for a, b in zip(d, d[1:]))


# ---------------------------------------------------------------------------
# bound checks on increment covariances

def hstar(y: float, x: float, u, v, params: ModelParams):
    """Product of kernel differences [h(y,u)1(u<=y) - h(x,u)1(u<=x)] [same in v]."""
    from .kernel import KernelDifference

    if not (0 <= x <= y):
        raise DomainError("need 0 <= x <= y")
    g = KernelDifference(y, x, params)
    return g(u) * g(v)


def sample_ordered(case: str, n: int, T: float, rng: np.random.Generator):
    """Random tuples (s, t, s', t') in one of the orderings used by the bounds.

    ``case`` is one of 'overlap' (s < s' < t < t'), 'nested' (s' < s < t < t'),
    'disjoint' (s < t < s' < t') or 'chain' (s <= t <= t', s' unused).
    """
    r = np.sort(rng.uniform(0, T, (n, 4)), axis=1)
    if case == "overlap":
        return r[:, 0], r[:, 2], r[:, 1], r[:, 3]
    if case == "nested":
        return r[:, 1], r[:, 2], r[:, 0], r[:, 3]
    if case == "disjoint":
        return r[:, 0], r[:, 1], r[:, 2], r[:, 3]
    if case == "chain":
        r3 = np.sort(rng.uniform(0, T, (n, 3)), axis=1)
        return r3[:, 0], r3[:, 1], np.full(n, np.nan), r3[:, 2]
    raise DomainError(f"unknown ordering case {case!r}")


@dataclass(frozen=True)
class BoundReport:
    name: str
    n: int
    extreme: float
    violations: int
    """``extreme`` is the minimum ratio for lower bounds and the maximum for upper bounds."""


def _lower_bracket(case, s, t, sp, tp, H):
    p = 2 * H
    if case == "overlap":
        return (t - s) ** p * (tp - t) ** p + (tp - sp) ** p * (sp - s) ** p
    return (t - s) ** p * (tp - sp) ** p


def increment_gap_check(case: str, tuples, params: ModelParams, table: IncrementVarianceTable,
                  abs_tol: float = 1e-12) -> BoundReport:
    """min over tuples of d_H / bracket; a violation is d_H < -abs_tol (Cauchy-Schwarz)."""
    s, t, sp, tp = map(np.asarray, tuples)
    dh = table.d_H(s, t, sp, tp)
    bracket = _lower_bracket(case, s, t, sp, tp, params.H)
    ok = bracket > 0
    ratio = dh[ok] / bracket[ok]
    return BoundReport(f"increment_gap:{case}", int(ok.sum()), float(ratio.min()), int(np.sum(dh < -abs_tol)))


def shared_end_gap(s, t, tp, table):
    """Weighted integral of h*(t', s) - h*(t', t), equal to sigma^2_{t',s} - sigma^2_{t',t}."""
    return table(tp, s) - table(tp, t)


def doubled_increment_cov(s, t, sp, tp, table):
    """Weighted integral of h*(t',s) - h*(t',t) + h*(s',t) - h*(s',s), equal to 2 mu."""
    return table(tp, s) - table(tp, t) + table(sp, t) - table(sp, s)


def fbm_bracket_check(which: str, tuples, params: ModelParams, table: IncrementVarianceTable,
                      tol: float = 1e-10) -> BoundReport:
    """max over tuples of LHS / RHS with the fBm brackets on the right.

    A violation is a tuple whose bracket is (numerically) zero while the left
    side exceeds ``tol``; such tuples are flagged rather than divided.
    """
    s, t, sp, tp = map(np.asarray, tuples)
    p = 2 * params.H
    if which == "chain":
        lhs = shared_end_gap(s, t, tp, table)
        rhs = (tp - s) ** p - (tp - t) ** p
    elif which == "disjoint":
        lhs = doubled_increment_cov(s, t, sp, tp, table)
        rhs = (tp - s) ** p - (tp - t) ** p + (sp - t) ** p - (sp - s) ** p
    else:
        raise DomainError(f"unknown check {which!r}")
    degenerate = rhs <= tol
    violations = int(np.sum(degenerate & (lhs > tol)))
    ratio = lhs[~degenerate] / rhs[~degenerate]
    return BoundReport(which, int((~degenerate).sum()), float(ratio.max()), violations)


def write_silt_csv(path, estimates) -> str:
    return write_csv(path, ["epsilon", "mc_mean", "mc_se", "analytic_mean", "mc_var", "analytic_var", "n_paths", "steps"],
                     ((e.epsilon, e.mc_mean, e.mc_se, e.analytic_mean, e.mc_var, e.analytic_var, e.n_paths, e.steps)
                      for e in estimates))


def write_convergence_csv(path, rows) -> str:
    return write_csv(path, ["epsilon", "analytic_var", "delta_prev"],
                     ((r.epsilon, r.analytic_var, r.delta_prev) for r in rows))
