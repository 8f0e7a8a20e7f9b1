"""Acceptance suite: every criterion as a list of (lhs relation rhs) checks.

Each criterion function takes a :class:`Tier` and returns :class:`Check`
records. ``run_suite`` prints one line per check and per criterion and
writes the records, without timings, to ``verify_results.csv`` so that
repeated runs can be compared byte for byte.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .fbm import TimeGrid, fbm_covariance, fbm_matrix
from .gausscov import (covariance_matrix, increment_variance_matrix, l2_gap, lnd_exact,
                       sigma2, sigma2_increment, convergence_bound_checks)
from .io import write_csv
from .kernel import ModelParams, weight_table
from .localtime import (analytic_mean_local_time, analytic_mean_weighted_local_time,
                        extrapolated_local_time, fbm_tanaka_cancellation, tanaka_report, write_tanaka_csv)
from .quadrature import QuadratureSpec
from .silt import (IncrementVarianceTable, analytic_mean_beta, beta_samples, cauchy_shrinking,
                   convergence_study, increment_gap_check, fbm_bracket_check, sample_ordered, write_convergence_csv)
from .simulate import SIMULATORS, ks_agreement, sup_decay_study, write_sup_decay_csv

# (1/2pi) int_0^1 (1 - u) / (0.1 + u^1.2) du, 30-digit mpmath quadrature
FBM_BETA_MEAN_EPS01_H06 = 0.3040507991983604


@dataclass(frozen=True)
class Tier:
    name: str
    fbm_paths: int = 10_000
    ks_paths: int = 10_000
    bracket_points: int = 50
    ratio_grid_points: int = 60
    sup_paths: int = 1000
    lt_paths: int = 10_000
    beta_paths: int = 4000
    beta_steps: int = 512
    silt_hursts: tuple = (0.55, 0.6, 0.7)
    silt_eps: tuple = (0.4, 0.2, 0.1, 0.05, 0.025)
    qmc_m: int = 14
    bound_tuples: int = 10_000


FULL = Tier("full")
QUICK = Tier("quick", fbm_paths=2000, ks_paths=2000, bracket_points=8, ratio_grid_points=20, sup_paths=300,
             lt_paths=2000, beta_paths=400, beta_steps=256, silt_hursts=(0.6,), silt_eps=(0.4, 0.2, 0.1),
             qmc_m=11, bound_tuples=1000)
TIERS = {"full": FULL, "quick": QUICK}


@dataclass(frozen=True)
class Check:
    criterion: int
    name: str
    lhs: float
    relation: str
    rhs: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs if self.relation == "<=" else self.lhs - self.rhs

    @property
    def passed(self) -> bool:
        return bool(self.margin >= 0)


def _le(c, name, lhs, rhs):
    return Check(c, name, float(lhs), "<=", float(rhs))


def _ge(c, name, lhs, rhs):
    return Check(c, name, float(lhs), ">=", float(rhs))


# ---------------------------------------------------------------------------

def criterion1(tier: Tier, threads: int = 1, out_dir=None, seed: int = 1) -> list[Check]:
    """fBm generator: all pairwise covariances within 4 SE of the closed form."""
    grid = TimeGrid.uniform(1.0, 63)
    t = grid.points[1:]
    checks = []
    for H in (0.55, 0.65, 0.75):
        B = fbm_matrix(grid, H, seed, tier.fbm_paths, threads=threads)[:, 1:]
        n = B.shape[0]
        prod = B[:, :, None] * B[:, None, :]
        emp = prod.mean(axis=0)
        se = prod.std(axis=0, ddof=1) / np.sqrt(n)
        z = np.abs(emp - fbm_covariance(t[:, None], t[None, :], H)) / se
        checks.append(_le(1, f"max |z| covariance H={H}", z.max(), 4.0))
    return checks


def criterion2(tier: Tier, threads: int = 1, out_dir=None, seed: int = 2) -> list[Check]:
    """a = 0 reduction of the variance and of all three simulators."""
    checks = []
    tiny = ModelParams(a=1e-12, H=0.6, T=1.5)
    for t in (0.25, 1.0, 1.5):
        rel = abs(sigma2(t, tiny) / t**1.2 - 1)
        checks.append(_le(2, f"sigma2 rel error t={t}", rel, 1e-8))
    nu = 0.5
    p0 = ModelParams(a=0.0, nu=nu, H=0.6, T=1.0)
    grid = TimeGrid.uniform(1.0, 64)
    ref = fbm_matrix(grid, 0.6, seed + 1000, tier.ks_paths, method="cholesky", threads=threads)[:, -1]
    for name, fn in SIMULATORS.items():
        X = fn(p0, grid, tier.ks_paths, seed, threads=threads).component(0)[:, -1] - nu * grid.T
        d, crit = ks_agreement(X, ref)
        checks.append(_le(2, f"KS {name} vs fBm at T", d, crit))
    return checks


def criterion3(tier: Tier, threads: int = 1, out_dir=None) -> list[Check]:
    """exp(-a t^2/2) t^{2H} <= sigma_t^2 <= t^{2H} on a t-grid."""
    checks = []
    ts = np.linspace(2.0 / tier.bracket_points, 2.0, tier.bracket_points)
    for a in (0.1, 1.0, 10.0):
        for H in (0.55, 0.65, 0.75):
            p = ModelParams(a=a, H=H, T=2.0)
            worst = np.inf
            for t in ts:
                try:
                    v = sigma2(float(t), p)
                except NumericError as exc:
                    v = exc.estimate
                upper = t ** (2 * H)
                worst = min(worst, upper - v, v - np.exp(-0.5 * a * t * t) * upper)
            checks.append(_ge(3, f"bracket margin a={a} H={H}", worst, -1e-8))
    return checks


def criterion4(tier: Tier, threads: int = 1, out_dir=None) -> list[Check]:
    """sigma^2_{t,s} / (t-s)^{2H} bounded above and away from 0, and tending to 1."""
    checks = []
    m = tier.ratio_grid_points
    times = np.linspace(0.0, 2.0, m + 1)
    for H in (0.55, 0.65, 0.75):
        p = ModelParams(a=1.0, H=H, T=2.0)
        V = increment_variance_matrix(times, p, cov=covariance_matrix(times, p))
        i, j = np.triu_indices(m + 1, 1)
        ratio = V[i, j] / (times[j] - times[i]) ** (2 * H)
        checks.append(_ge(4, f"min ratio H={H}", ratio.min(), 1e-12))
        checks.append(_le(4, f"max ratio H={H}", ratio.max(), 1e6))
        worst = max(abs(sigma2_increment(t, t - 1e-3, p) / 1e-3 ** (2 * H) - 1) for t in (0.5, 1.0, 2.0))
        checks.append(_le(4, f"|ratio-1| at t-s=1e-3 H={H}", worst, 5e-2))
    return checks


def criterion5(tier: Tier, threads: int = 1, out_dir=None) -> list[Check]:
    """L2 convergence bounds at t in {0.5, 1, 2, 4} and the size of the gap at t = 6."""
    checks = []
    for t in (0.5, 1.0, 2.0, 4.0):
        p = ModelParams(a=1.0, H=0.6, T=t)
        for b in convergence_bound_checks(t, p):
            checks.append(_ge(5, f"{b.name} bound margin t={t}", b.margin, -1e-8))
    checks.append(_le(5, "l2_gap(6)", l2_gap(6.0, ModelParams(a=1.0, H=0.6, T=6.0)), 1e-3))
    return checks


def criterion6(tier: Tier, threads: int = 1, out_dir=None, seed: int = 6) -> list[Check]:
    """Sup-gap exceedance frequencies decrease in n and respect the Gaussian tail bound."""
    rows = sup_decay_study(ModelParams(a=1.0, H=0.6), tier.sup_paths, seed, horizon_list=(1, 2, 3, 4, 8),
                           eps_list=(0.2, 0.5, 1.0), threads=threads)
    if out_dir:
        write_sup_decay_csv(os.path.join(out_dir, "sup_decay.csv"), rows)
    checks = []
    for eps in (0.2, 0.5, 1.0):
        r = [x for x in rows if x.eps == eps]
        worst = max(b.sup_freq - a.sup_freq - 4 * np.hypot(a.sup_se, b.sup_se) for a, b in zip(r, r[1:]))
        checks.append(_le(6, f"sup freq increase beyond 4SE eps={eps}", worst, 0.0))
        over = max(x.point_freq - x.tail_bound - 4 * x.point_se for x in r)
        checks.append(_le(6, f"freq above tail bound beyond 4SE eps={eps}", over, 0.0))
    return checks


def criterion7(tier: Tier, threads: int = 1, out_dir=None) -> list[Check]:
    grid = TimeGrid.uniform(2.0, 16)
    k = lnd_exact(grid, ModelParams(a=1.0, H=0.6, T=2.0))
    return [_ge(7, "local nondeterminism kappa0", k, 0.01)]


def criterion8(tier: Tier, threads: int = 1, out_dir=None, seed: int = 8) -> list[Check]:
    """Monte Carlo local times at x = z against their Gaussian expectations."""
    p = ModelParams(a=1.0, H=0.6, T=1.0)
    grid = TimeGrid.uniform(1.0, 512)
    paths = SIMULATORS["representation"](p, grid, tier.lt_paths, seed, threads=threads)
    W = weight_table(grid, p)
    checks = []
    for label, weights, exact in (("local time", None, analytic_mean_local_time(1.0, 0.0, p)),
                                  ("weighted local time", W, analytic_mean_weighted_local_time(1.0, 0.0, p))):
        est = extrapolated_local_time(paths, 0.0, 1.0, 0.05, weights)
        checks.append(_le(8, f"{label} |MC - exact|", abs(est.value - exact),
                          max(4 * est.standard_error, 0.05 * exact)))
        wide = extrapolated_local_time(paths, 0.0, 1.0, 0.1, weights)
        checks.append(_le(8, f"{label} half-bandwidth shift", abs(wide.value / est.value - 1), 0.03))
    return checks


def criterion9(tier: Tier, threads: int = 1, out_dir=None) -> list[Check]:
    p = ModelParams(a=1.0, H=0.6, T=1.0)
    reports = [tanaka_report(t, x, p) for t, x in ((0.5, 0.0), (1.0, 0.0), (1.0, 0.5))]
    if out_dir:
        write_tanaka_csv(os.path.join(out_dir, "tanaka.csv"), reports)
    checks = [_le(9, f"|residual| t={r.t} x={r.x}", abs(r.residual), 1e-3 * r.E_abs) for r in reports]
    checks.append(_le(9, "a=0 closed-form cancellation", abs(fbm_tanaka_cancellation(1.0, 0.6)), 1e-10))
    r0 = tanaka_report(1.0, 0.0, ModelParams(a=0.0, H=0.6))
    checks.append(_le(9, "a=0 quadrature residual", abs(r0.residual), 1e-10))
    return checks


def criterion10(tier: Tier, threads: int = 1, out_dir=None, seed: int = 10) -> list[Check]:
    p = ModelParams(a=1.0, H=0.6, T=1.0, d=2)
    grid = TimeGrid.uniform(1.0, tier.beta_steps)
    paths = SIMULATORS["representation"](p, grid, tier.beta_paths, seed, threads=threads)
    eps = (0.5, 0.2, 0.1)
    samples = beta_samples(paths, eps)
    table = IncrementVarianceTable(ModelParams(a=1.0, H=0.6, T=1.0))
    checks = []
    for e, b in zip(eps, samples):
        exact = analytic_mean_beta(e, p, table=table)
        se = b.std(ddof=1) / np.sqrt(b.size)
        checks.append(_le(10, f"beta mean eps={e} |MC - exact|", abs(b.mean() - exact), max(4 * se, 0.03 * exact)))
    v = analytic_mean_beta(0.1, ModelParams(a=1e-12, H=0.6, T=1.0))
    checks.append(_le(10, "a->0 beta mean rel error", abs(v / FBM_BETA_MEAN_EPS01_H06 - 1), 1e-3))
    return checks


def criterion11(tier: Tier, threads: int = 1, out_dir=None) -> list[Check]:
    """Successive differences of Var beta^eps shrink along the epsilon sequence (H < 3/4)."""
    checks = []
    for H in (*tier.silt_hursts, 0.8):
        p = ModelParams(a=1.0, H=H, T=1.0)
        rows = convergence_study(tier.silt_eps, p, m=tier.qmc_m, max_m=tier.qmc_m + 4)
        if out_dir:
            write_convergence_csv(os.path.join(out_dir, f"silt_converge_H{H}.csv"), rows)
        if H < 0.75:
            d = [r.delta_prev for r in rows[1:]]
            worst = max(b - a for a, b in zip(d, d[1:])) if len(d) > 1 else -np.inf
            checks.append(_le(11, f"max successive delta increase H={H}", worst, 0.0))
    return checks


def criterion12(tier: Tier, threads: int = 1, out_dir=None, seed: int = 12) -> list[Check]:
    p = ModelParams(a=1.0, H=0.6, T=1.0)
    table = IncrementVarianceTable(p)
    rng = np.random.default_rng(seed)
    n = tier.bound_tuples
    checks = []
    for case in ("overlap", "nested", "disjoint"):
        r = increment_gap_check(case, sample_ordered(case, n, 1.0, rng), p, table)
        checks.append(_ge(12, f"min d_H ratio {case}", r.extreme, 1e-3))
        checks.append(_le(12, f"Cauchy-Schwarz violations {case}", r.violations, 0))
    for which, case in (("chain", "chain"), ("disjoint", "disjoint")):
        r = fbm_bracket_check(which, sample_ordered(case, n, 1.0, rng), p, table)
        checks.append(_le(12, f"max ratio {which}", r.extreme, 1e3))
        checks.append(_le(12, f"violations {which}", r.violations, 0))
    return checks


CRITERIA = {1: criterion1, 2: criterion2, 3: criterion3, 4: criterion4, 5: criterion5, 6: criterion6,
            7: criterion7, 8: criterion8, 9: criterion9, 10: criterion10, 11: criterion11, 12: criterion12}


def format_check(c: Check) -> str:
    status = "PASS" if c.passed else "FAIL"
    return f"  [{status}] {c.name}: {c.lhs:.6g} {c.relation} {c.rhs:.6g} (margin {c.margin:.3g})"


def run_criterion(k: int, tier: Tier, threads: int = 1, out_dir=None, echo=print) -> list[Check]:
    t0 = time.perf_counter()
    checks = CRITERIA[k](tier, threads=threads, out_dir=out_dir)
    ok = all(c.passed for c in checks)
    echo(f"criterion {k}: {'PASS' if ok else 'FAIL'} ({time.perf_counter() - t0:.1f} s)")
    for c in checks:
        echo(format_check(c))
    return checks


def run_suite(tier: Tier, threads: int = 1, out_dir=None, criteria=None, echo=print) -> list[Check]:
    checks = []
    for k in criteria or sorted(CRITERIA):
        checks.extend(run_criterion(k, tier, threads, out_dir, echo))
    if out_dir:
        write_csv(os.path.join(out_dir, "verify_results.csv"),
                  ["criterion", "check", "lhs", "relation", "rhs", "margin", "passed"],
                  ((c.criterion, c.name, c.lhs, c.relation, c.rhs, c.margin, c.passed) for c in checks))
    return checks
