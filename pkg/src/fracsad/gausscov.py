"""Second-order statistics of the linear model by product integration.

Every quantity here is a double integral

    int int f(u) g(v) phi(u, v) du dv,   phi(u, v) = H(2H-1)|u - v|^{2H-2},

with f, g built from the kernel h. The line singularity of phi is never
sampled: f and g are replaced cell by cell with the straight line through
their values at the two Gauss points, and the moments of phi against
1, u', v', u'v' (local coordinates) are exact closed forms on cells near the
diagonal. Well separated cell pairs use a tensor Gauss-Legendre rule, where
the closed forms would lose digits to cancellation and phi is analytic.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.linalg import eigh, toeplitz
from scipy.special import beta as beta_fn

from .errors import DomainError, NumericError
from .fbm import TimeGrid, hurst_value
from .io import write_csv
from .kernel import KernelDifference, ModelParams, eval_h, eval_h_limit, h_integral
from .quadrature import BoundCheck, QuadratureSpec, gauss_legendre, graded_mesh, uniform_mesh

_G1 = 0.5 - 0.5 / np.sqrt(3.0)
_G2 = 0.5 + 0.5 / np.sqrt(3.0)
_NEAR_RATIO = 1.0   # closed form when gap <= _NEAR_RATIO * max width
_LOW_ORDER_RATIO = 6.0


def phi(u, v, H):
    """H(2H-1)|u - v|^{2H-2}; raises on the diagonal."""
    H = hurst_value(H)
    u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
    if np.any(u == v):
        raise DomainError("phi is singular on the diagonal u = v; integrate with cell moments")
    out = H * (2 * H - 1) * np.abs(u - v) ** (2 * H - 2)
    return out if out.ndim else float(out)


# ---------------------------------------------------------------------------
# cell moments

def _local_moments_closed(d, hu, hv, alpha):
    """Exact int_0^hu int_0^hv u^p v^q |u - v + d|^alpha dv du for pq in 00,10,01,11.

    Uses potentials Psi_pq with d^2 Psi / du dv = u^p v^q |u - v + d|^alpha.
    """
    c2 = (alpha + 1) * (alpha + 2)
    c3 = c2 * (alpha + 3)
    c4 = c3 * (alpha + 4)

    def potentials(u, v):
        x = u - v + d
        ax = np.abs(x)
        K = ax ** (alpha + 2) / c2
        K3 = np.sign(x) * ax ** (alpha + 3) / c3
        K4 = ax ** (alpha + 4) / c4
        return (-K, -u * K + K3, -v * K - K3, -u * v * K - (u - v) * K3 + K4)

    zero = np.zeros_like(np.asarray(hu, dtype=float))
    p11 = potentials(hu, hv)
    p10 = potentials(hu, zero)
    p01 = potentials(zero, hv)
    p00 = potentials(zero, zero)
    return tuple(a - b - c + e for a, b, c, e in zip(p11, p10, p01, p00))


def _local_moments_gl(d, hu, hv, alpha, n):
    x, w = gauss_legendre(n)
    d = np.asarray(d, dtype=float)[..., None, None]
    hu = np.asarray(hu, dtype=float)[..., None, None]
    hv = np.asarray(hv, dtype=float)[..., None, None]
    u = hu * x[:, None]
    v = hv * x[None, :]
    k = (hu * hv) * (w[:, None] * w[None, :]) * np.abs(u - v + d) ** alpha
    return (k.sum(axis=(-1, -2)), (k * u).sum(axis=(-1, -2)),
            (k * v).sum(axis=(-1, -2)), (k * u * v).sum(axis=(-1, -2)))


def _local_moments(d, hu, hv, alpha):
    d = np.asarray(d, dtype=float)
    hu = np.broadcast_to(np.asarray(hu, dtype=float), d.shape)
    hv = np.broadcast_to(np.asarray(hv, dtype=float), d.shape)
    gap = np.maximum(0.0, np.maximum(d - hv, -d - hu))
    wmax = np.maximum(hu, hv)
    out = [np.empty(d.shape) for _ in range(4)]
    tiers = (
        (gap <= _NEAR_RATIO * wmax, None),
        ((gap > _NEAR_RATIO * wmax) & (gap <= _LOW_ORDER_RATIO * wmax), 8),
        (gap > _LOW_ORDER_RATIO * wmax, 4),
    )
    for mask, order in tiers:
        if not np.any(mask):
            continue
        if order is None:
            vals = _local_moments_closed(d[mask], hu[mask], hv[mask], alpha)
        else:
            vals = _local_moments_gl(d[mask], hu[mask], hv[mask], alpha, order)
        for o, v in zip(out, vals):
            o[mask] = v
    return out


def cell_moment(u_range, v_range, H, degree: str = "00") -> float:
    """Exact int int u^p v^q phi(u, v) over a rectangle, ``degree`` in {00, 10, 01, 11}."""
    H = hurst_value(H)
    u0, u1 = map(float, u_range)
    v0, v1 = map(float, v_range)
    if u0 < 0 or v0 < 0 or u1 < u0 or v1 < v0:
        raise DomainError("ranges must be ordered intervals in [0, inf)")
    p, q = int(degree[0]), int(degree[1])
    alpha = 2 * H - 2
    m00, m10, m01, m11 = (float(m) for m in _local_moments_closed(
        np.float64(u0 - v0), np.float64(u1 - u0), np.float64(v1 - v0), alpha))
    # u = u0 + u', v = v0 + v'
    if (p, q) == (0, 0):
        val = m00
    elif (p, q) == (1, 0):
        val = u0 * m00 + m10
    elif (p, q) == (0, 1):
        val = v0 * m00 + m01
    elif (p, q) == (1, 1):
        val = u0 * v0 * m00 + u0 * m01 + v0 * m10 + m11
    else:
        raise DomainError(f"unsupported degree {degree!r}")
    return H * (2 * H - 1) * val


# ---------------------------------------------------------------------------
# moment matrices on a mesh

def _is_uniform(widths):
    return bool(np.allclose(widths, widths[0], rtol=1e-10, atol=0.0))


@lru_cache(maxsize=48)
def _unit_moment_matrices(nodes_bytes: bytes, H: float):
    nodes = np.frombuffer(nodes_bytes, dtype=float)
    alpha = 2 * H - 2
    c = H * (2 * H - 1)
    left, widths = nodes[:-1], np.diff(nodes)
    n = widths.size
    if _is_uniform(widths):
        h = widths[0]
        offs = np.arange(n) * h
        pos = _local_moments(offs, h, h, alpha)    # u cell to the right of v cell
        neg = _local_moments(-offs, h, h, alpha)
        mats = [c * toeplitz(p_, q_) for p_, q_ in zip(pos, neg)]
    else:
        mats = [np.empty((n, n)) for _ in range(4)]
        step = max(1, 2_000_000 // (64 * n))
        for r0 in range(0, n, step):
            rows = slice(r0, min(n, r0 + step))
            d = left[rows, None] - left[None, :]
            hu = np.broadcast_to(widths[rows, None], d.shape)
            hv = np.broadcast_to(widths[None, :], d.shape)
            for m, v in zip(mats, _local_moments(d, hu, hv, alpha)):
                m[rows] = c * v
    for m in mats:
        m.setflags(write=False)
    return tuple(mats)


def moment_matrices(nodes, H):
    """(M00, M10, M01, M11) for the mesh; rows index the u cell, columns the v cell."""
    nodes = np.asarray(nodes, dtype=float)
    scale = nodes[-1]
    unit = np.ascontiguousarray(nodes / scale)
    mats = _unit_moment_matrices(unit.tobytes(), float(H))
    alpha = 2 * H - 2
    return tuple(m * scale ** (alpha + 2 + k) for m, k in zip(mats, (0, 1, 1, 2)))


def gauss_points(nodes):
    nodes = np.asarray(nodes, dtype=float)
    left, widths = nodes[:-1], np.diff(nodes)
    return left + _G1 * widths, left + _G2 * widths


def linear_coefficients(f1, f2, nodes):
    """Local ``a + c u'`` through the Gauss-point values ``f1``, ``f2`` (last axis = cells)."""
    widths = np.diff(np.asarray(nodes, dtype=float))
    slope = (f2 - f1) / ((_G2 - _G1) * widths)
    return f1 - slope * _G1 * widths, slope


def bilinear_form(fa, fc, ga, gc, mats):
    """sum over cell pairs of int int f(u) g(v) phi for coefficient arrays (..., n_cells)."""
    m00, m10, m01, m11 = mats
    return fa @ m00 @ ga.T + fa @ m01 @ gc.T + fc @ m10 @ ga.T + fc @ m11 @ gc.T


def _coeffs(funcs, nodes):
    g1, g2 = gauss_points(nodes)
    f1 = np.array([f(g1) for f in funcs], dtype=float)
    f2 = np.array([f(g2) for f in funcs], dtype=float)
    return linear_coefficients(f1, f2, nodes)


def gram(funcs_u, funcs_v, nodes, H):
    """Matrix of int int f_i(u) g_j(v) phi(u,v) du dv over the mesh span."""
    mats = moment_matrices(nodes, H)
    fa, fc = _coeffs(funcs_u, nodes)
    ga, gc = _coeffs(funcs_v, nodes)
    return bilinear_form(fa, fc, ga, gc, mats)


def _refine(compute, quad: QuadratureSpec, what: str):
    n = quad.cells_per_axis
    prev = compute(n)
    if quad.max_refinements == 0:
        return prev
    for _ in range(quad.max_refinements):
        n *= 2
        cur = compute(n)
        err = np.max(np.abs(cur - prev))
        if err <= quad.rel_tol * np.max(np.abs(cur)) + quad.abs_tol:
            return cur
        prev = cur
    raise NumericError(f"{what}: refinement budget exhausted", estimate=cur, error=err)


def _restricted(f, lo, hi):
    def g(u):
        u = np.asarray(u, dtype=float)
        inside = (u >= lo) & (u <= hi)
        out = np.zeros(u.shape)
        if np.any(inside):
            out[inside] = f(u[inside])
        return out
    return g


def weighted_double_integral(f, g, u_domain, v_domain, H, quad: QuadratureSpec | None = None,
                             breakpoints=()) -> float:
    """int_{u_domain} int_{v_domain} f(u) g(v) phi(u, v) dv du.

    ``f`` and ``g`` must be vectorized and smooth between the domain ends and
    the extra ``breakpoints``; jumps are allowed only there.
    """
    quad = quad or QuadratureSpec()
    H = hurst_value(H)
    (u0, u1), (v0, v1) = map(float, u_domain), map(float, v_domain)
    fu = _restricted(f, u0, u1)
    gv = _restricted(g, v0, v1)
    bp = [u0, u1, v0, v1, *breakpoints]

    def compute(n):
        nodes = graded_mesh(bp, n, quad.grading)
        return gram([fu], [gv], nodes, H)[0, 0]

    return float(_refine(compute, quad, "weighted_double_integral"))


# ---------------------------------------------------------------------------
# statistics of X

def _h_on(t, params):
    a = params.a
    return lambda u: np.where(u <= t, eval_h(t, np.clip(u, 0, t), a), 0.0)


def _model_integral(fu, gv, bp, params: ModelParams, quad, what):
    def compute(n):
        nodes = graded_mesh(bp, n, quad.grading)
        return gram([fu], [gv], nodes, params.H)[0, 0]
    return float(_refine(compute, quad, what))


def _check_time(t, params):
    if t < 0 or t > params.T * (1 + 1e-12):
        raise DomainError(f"time {t} outside [0, T={params.T}]")


def sigma2(t: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """Var X_t with the bracket e^{-a t^2/2} t^{2H} <= Var X_t <= t^{2H} asserted."""
    quad = quad or QuadratureSpec()
    _check_time(t, params)
    if t == 0:
        return 0.0
    f = _h_on(t, params)
    val = _model_integral(f, f, [0.0, t], params, quad, "sigma2")
    upper = t ** (2 * params.H)
    lower = np.exp(-0.5 * params.a * t * t) * upper
    if not (lower * (1 - 1e-6) <= val <= upper * (1 + 1e-6)):
        raise NumericError(f"sigma2({t}) = {val} violates [{lower}, {upper}]", estimate=val)
    return val


def sigma2_increment(t: float, s: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """E(X_t - X_s)^2 for s <= t."""
    quad = quad or QuadratureSpec()
    if s > t:
        raise DomainError("sigma2_increment needs s <= t")
    _check_time(t, params)
    if s == t:
        return 0.0
    g = KernelDifference(t, s, params)
    return max(0.0, _model_integral(g, g, g.breakpoints, params, quad, "sigma2_increment"))


def cross_cov(t: float, s: float, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """Cov(X_t, X_s)."""
    quad = quad or QuadratureSpec()
    _check_time(t, params)
    _check_time(s, params)
    if s == 0 or t == 0:
        return 0.0
    hi, lo = max(s, t), min(s, t)
    return _model_integral(_h_on(hi, params), _h_on(lo, params), [0.0, lo, hi], params, quad, "cross_cov")


def mu_pair(s, t, sp, tp, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """E[(X_t - X_s)(X_tp - X_sp)]."""
    quad = quad or QuadratureSpec()
    for x in (s, t, sp, tp):
        _check_time(x, params)
    if not (s <= t and sp <= tp):
        raise DomainError("need s <= t and sp <= tp")
    g1 = KernelDifference(t, s, params)
    g2 = KernelDifference(tp, sp, params)
    return _model_integral(g1, g2, [0.0, s, t, sp, tp], params, quad, "mu_pair")


def dH(s, t, sp, tp, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """sigma2_{t,s} sigma2_{tp,sp} - mu^2, clipped at 0 within abs_tol."""
    quad = quad or QuadratureSpec()
    v1 = sigma2_increment(t, s, params, quad)
    v2 = sigma2_increment(tp, sp, params, quad)
    mu = mu_pair(s, t, sp, tp, params, quad)
    val = v1 * v2 - mu * mu
    tol = max(quad.abs_tol, 1e-9 * v1 * v2)
    if val < -tol:
        raise NumericError(f"Cauchy-Schwarz violated: d_H = {val}", estimate=val)
    return max(val, 0.0)


def fbm_increment_cov(s, t, sp, tp, H):
    """Closed-form Cov(B_t - B_s, B_tp - B_sp) for fBm."""
    two_h = 2 * H
    return 0.5 * (abs(tp - s) ** two_h + abs(t - sp) ** two_h
                  - abs(tp - t) ** two_h - abs(sp - s) ** two_h)


def mean_path(t, params: ModelParams) -> float:
    """E X_t = z + nu * int_0^t h(t, s) ds."""
    return params.z + params.nu * h_integral(t, params.a)


# ---------------------------------------------------------------------------
# covariance on a set of times

def covariance_matrix(times, params: ModelParams, quad: QuadratureSpec | None = None,
                      cells_per_interval: int | None = None) -> np.ndarray:
    """Cov(X_{t_i}, X_{t_j}) for all pairs, from one shared mesh.

    The mesh has every time as a node. Uniformly spaced times get a uniform
    mesh (``cells_per_interval`` cells per step), which makes the moment
    matrices Toeplitz and cheap even for a few thousand cells.
    """
    quad = quad or QuadratureSpec()
    times = np.asarray(times, dtype=float)
    pos = times[times > 0]
    bp = np.unique(np.concatenate([[0.0], pos]))
    steps = np.diff(bp)
    if _is_uniform(steps):
        k = cells_per_interval or max(1, int(np.ceil(quad.cells_per_axis / steps.size)))
        nodes = uniform_mesh(bp, k)
    else:
        nodes = graded_mesh(bp, max(quad.cells_per_axis, 2 * steps.size), quad.grading, min_cells=2)
    funcs = [_h_on(t, params) for t in bp[1:]]
    C = gram(funcs, funcs, nodes, params.H)
    C = 0.5 * (C + C.T)
    full = np.zeros((bp.size, bp.size))
    full[1:, 1:] = C
    idx = np.searchsorted(bp, times)
    return full[np.ix_(idx, idx)]


def increment_variance_matrix(times, params, quad=None, cov=None) -> np.ndarray:
    """sigma2_{t_i, t_j} = C_ii + C_jj - 2 C_ij."""
    C = covariance_matrix(times, params, quad) if cov is None else cov
    d = np.diag(C)
    return np.clip(d[:, None] + d[None, :] - 2 * C, 0.0, None)


@dataclass(frozen=True, eq=False)
class CovarianceReport:
    times: np.ndarray
    sigma2_t: np.ndarray
    sigma2_incr: np.ndarray
    cross_cov: np.ndarray
    params: ModelParams
    quad: QuadratureSpec = field(default_factory=QuadratureSpec)

    def mu(self, s, t, sp, tp) -> float:
        return mu_pair(s, t, sp, tp, self.params, self.quad)

    def d_H(self, s, t, sp, tp) -> float:
        return dH(s, t, sp, tp, self.params, self.quad)

    def to_csv(self, path) -> str:
        n = self.times.size
        rows = ((self.times[i], self.times[j], self.sigma2_t[i], self.sigma2_incr[i, j], self.cross_cov[i, j])
                for i in range(n) for j in range(n) if j <= i)
        return write_csv(path, ["t", "s", "sigma2_t", "sigma2_incr", "cross_cov"], rows)


def covariance_report(grid: TimeGrid, params: ModelParams, quad: QuadratureSpec | None = None) -> CovarianceReport:
    quad = quad or QuadratureSpec()
    C = covariance_matrix(grid.points, params, quad)
    return CovarianceReport(grid.points, np.diag(C).copy(), increment_variance_matrix(grid.points, params, cov=C),
                            C, params, quad)


def write_dh_csv(path, tuples, params, quad=None) -> str:
    rows = []
    for s, t, sp, tp in tuples:
        rows.append((s, t, sp, tp, mu_pair(s, t, sp, tp, params, quad), dH(s, t, sp, tp, params, quad)))
    return write_csv(path, ["s", "t", "sp", "tp", "mu", "dH"], rows)


# ---------------------------------------------------------------------------
# convergence as t -> infinity

def limit_tail_constant(H: float) -> float:
    """C with int int_{[S,inf)^2} u^-2 v^-2 phi(u,v) du dv = C S^{2H-4}."""
    return H * (2 * H - 1) * 2 * beta_fn(2 * H - 1, 3 - 2 * H) / (4 - 2 * H)


def l2_gap(t: float, params: ModelParams, quad: QuadratureSpec | None = None,
           tail_cut: float | None = None, tail_tol: float = 1e-6) -> float:
    """Upper estimate of E|X_t - X_inf|^2 (nu = 0 part).

    The integrand g = h(t,.) - h(.) on [0, t] and -h(.) on (t, tail_cut] is
    integrated exactly as far as the mesh allows. Beyond ``tail_cut`` the
    bound 0 <= h(u) <= 1/(a u^2) gives a tail norm squared of at most
    ``limit_tail_constant(H) tail_cut^{2H-4} / a^2``, folded in via the triangle
    inequality. A tail bound above ``tail_tol`` is an error.
    """
    quad = quad or QuadratureSpec()
    a, H = params.a, params.H
    if a <= 0:
        raise DomainError("l2_gap needs a > 0")
    if tail_cut is None:
        tail_cut = max(4.0 * t, (limit_tail_constant(H) / (a * a * tail_tol * 1e-2)) ** (1 / (4 - 2 * H)))
    if tail_cut < t:
        raise DomainError("tail_cut must be >= t")
    tail = limit_tail_constant(H) * tail_cut ** (2 * H - 4) / (a * a)
    if tail > tail_tol:
        raise NumericError(f"tail bound {tail:.3e} exceeds {tail_tol:.1e}; increase tail_cut", estimate=tail)

    def g(u):
        u = np.asarray(u, dtype=float)
        return np.where(u <= t, eval_h(t, np.clip(u, 0, t), a), 0.0) - eval_h_limit(u, a)

    def compute(n):
        head = graded_mesh([0.0, t], n, quad.grading) if t > 0 else np.array([0.0])
        if tail_cut > t:
            start = max(t, 1e-3)
            geo = np.geomspace(start, tail_cut, n + 1)
            head = np.concatenate([head, geo[1:]] if start == t else [head, [start], geo[1:]])
        return gram([g], [g], np.unique(head), H)[0, 0]

    core = float(_refine(compute, quad, "l2_gap"))
    return (np.sqrt(max(core, 0.0)) + np.sqrt(tail)) ** 2


def convergence_bound_checks(t: float, params: ModelParams, quad: QuadratureSpec | None = None) -> list[BoundCheck]:
    """Stochastic and deterministic parts of the L2 convergence bound at time t."""
    quad = quad or QuadratureSpec()
    a, H = params.a, params.H

    def diff(u):
        u = np.asarray(u, dtype=float)
        uc = np.clip(u, 0, t)
        return np.where(u <= t, eval_h(t, uc, a) - eval_h_limit(uc, a), 0.0)

    stoch = _model_integral(diff, diff, [0.0, t], params, quad, "convergence_bound")
    x, w = gauss_legendre(64)
    det = 0.0
    for lo, hi in ((0.0, 0.5 * t), (0.5 * t, t)):
        s = lo + (hi - lo) * x
        det += (hi - lo) * np.dot(w, eval_h(t, s, a) - eval_h_limit(s, a))
    return [
        BoundCheck("stochastic", stoch, 2 * H / (a * t ** (2 - 2 * H))),
        BoundCheck("deterministic", abs(det), 1.0 / (a * t)),
    ]


# ---------------------------------------------------------------------------
# local nondeterminism

def _increment_cov(grid: TimeGrid, params, quad):
    C = covariance_matrix(grid.points, params, quad)
    n = len(grid)
    D = np.zeros((n - 1, n))
    D[np.arange(n - 1), np.arange(1, n)] = 1.0
    D[np.arange(n - 1), np.arange(n - 1)] = -1.0
    S = D @ C @ D.T
    S = 0.5 * (S + S.T)
    ev = np.linalg.eigvalsh(S)
    if ev[0] < -1e-10 * ev[-1]:
        raise NumericError("increment covariance is not positive semidefinite", estimate=ev[0])
    return S


def _check_lnd_grid(grid):
    if not (2 <= len(grid) <= 24):
        raise DomainError("local nondeterminism checks need 2..24 grid points")


def lnd_exact(grid: TimeGrid, params: ModelParams, quad: QuadratureSpec | None = None) -> float:
    """Smallest generalized eigenvalue of (increment covariance, diag of increment variances)."""
    _check_lnd_grid(grid)
    S = _increment_cov(grid, params, quad or QuadratureSpec())
    return float(eigh(S, np.diag(np.diag(S)), eigvals_only=True)[0])


def lnd_ratio(grid: TimeGrid, params: ModelParams, quad: QuadratureSpec | None = None,
              n_trials: int = 1000, seed: int = 0) -> float:
    """Random-search estimate of the local-nondeterminism constant (an upper bound on the exact one)."""
    _check_lnd_grid(grid)
    S = _increment_cov(grid, params, quad or QuadratureSpec())
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_trials, S.shape[0]))
    num = np.einsum("ij,jk,ik->i", U, S, U)
    den = (U**2) @ np.diag(S)
    return float(np.min(num / den))
