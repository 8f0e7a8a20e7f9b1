import numpy as np
import pytest

from fracsad.errors import DomainError, ResolutionError
from fracsad.fbm import TimeGrid
from fracsad.gausscov import mu_pair, sigma2_increment
from fracsad.io import read_csv
from fracsad.kernel import ModelParams
from fracsad.silt import (IncrementVarianceTable, RegionT, SiltEstimate, analytic_mean_beta, analytic_var_beta,
                          beta_resolution_floor, beta_samples, cauchy_shrinking, convergence_study,
                          estimate_beta_mc, fbm_mean_beta, heat_kernel, heat_kernel_fourier, hstar,
                          increment_gap_check, fbm_bracket_check, shared_end_gap, sample_ordered, second_moment_beta,
                          write_convergence_csv, write_silt_csv)
from fracsad.simulate import PathSet, simulate_representation

# 30-digit mpmath: (1/2pi) int_0^1 (1 - u) / (0.1 + u^1.2) du
FBM_MEAN_EPS01_H06 = 0.3040507991983604


@pytest.fixture(scope="module")
def table():
    return IncrementVarianceTable(ModelParams(a=1.0, H=0.6))


def test_heat_kernel_values_and_normalization():
    assert heat_kernel(np.zeros(2), 0.5) == pytest.approx(1 / np.pi)
    assert heat_kernel(np.array([1.0, 1.0]), 1.0) == pytest.approx(np.exp(-1) / (2 * np.pi))
    # radial integral of p_eps over the plane
    r = np.linspace(0, 20, 200001)
    vals = heat_kernel(np.stack([r, 0 * r], axis=-1), 0.7) * 2 * np.pi * r
    assert np.trapezoid(vals, r) == pytest.approx(1.0, rel=1e-8)
    with pytest.raises(DomainError):
        heat_kernel(np.zeros(2), 0.0)


@pytest.mark.parametrize("x", [[0.0, 0.0], [0.3, -0.2], [1.0, 2.0]])
@pytest.mark.parametrize("eps", [0.1, 0.5])
def test_heat_kernel_fourier_form(x, eps):
    assert heat_kernel_fourier(x, eps) == pytest.approx(heat_kernel(np.array(x), eps), rel=1e-7, abs=1e-12)


def test_region_maps_stay_inside():
    rng = np.random.default_rng(0)
    u = rng.uniform(size=(1000, 4))
    s, t, sp, tp, jac = RegionT(2.0).map_half(u)
    assert np.all((0 <= s) & (s <= t) & (t <= 2) & (0 <= sp) & (sp <= tp) & (tp <= t)) and np.all(jac >= 0)
    s, t, sp, tp, jac = RegionT(2.0).map_full(u)
    assert np.all((0 <= sp) & (sp <= tp) & (tp <= 2))
    # the Jacobian integrates to the region volume (T^2 / 2)^2
    assert np.mean(RegionT(1.0).map_full(rng.uniform(size=(200000, 4)))[4]) == pytest.approx(0.25, rel=0.02)


def test_table_against_quadrature(table):
    assert table.spot_check(n=20, seed=1) < 1e-4
    p = table.params
    assert table(0.8, 0.3) == pytest.approx(sigma2_increment(0.8, 0.3, p), rel=1e-4)
    assert table(0.3, 0.8) == table(0.8, 0.3)
    assert table(0.5, 0.5) == 0.0
    assert table.mu(0.1, 0.5, 0.3, 0.9) == pytest.approx(mu_pair(0.1, 0.5, 0.3, 0.9, p), rel=1e-4)
    with pytest.raises(DomainError):
        table(1.5, 0.2)


def test_mean_large_epsilon_asymptote(table):
    eps = 1e4
    assert analytic_mean_beta(eps, table.params, table=table) == pytest.approx(1 / (4 * np.pi * eps), rel=1e-4)


def test_mean_fbm_reduction_against_oracle():
    assert fbm_mean_beta(0.1, 0.6) == pytest.approx(FBM_MEAN_EPS01_H06, rel=1e-12)
    p = ModelParams(a=1e-10, H=0.6)
    assert analytic_mean_beta(0.1, p) == pytest.approx(FBM_MEAN_EPS01_H06, rel=1e-6)


def test_variance_two_routes(table):
    p = table.params
    eps = 0.2
    var = analytic_var_beta(eps, p, table=table, m=12, rel_tol=1e-3)
    second = second_moment_beta(eps, p, table=table, m=12, rel_tol=1e-4)
    mean = analytic_mean_beta(eps, p, table=table)
    assert var.value > 0
    assert second.value - mean**2 == pytest.approx(var.value, rel=1e-2)


def test_convergence_rows(table, tmp_path):
    rows = convergence_study([0.4, 0.2, 0.1], table.params, table=table, m=10, rel_tol=5e-2)
    assert np.isnan(rows[0].delta_prev) and rows[1].delta_prev > 0
    assert rows[2].analytic_var > rows[1].analytic_var > rows[0].analytic_var
    assert isinstance(cauchy_shrinking(rows), bool)
    header, body = read_csv(write_convergence_csv(tmp_path / "c.csv", rows))
    assert header == ["epsilon", "analytic_var", "delta_prev"] and len(body) == 3
    with pytest.raises(DomainError):
        convergence_study([0.1, 0.2], table.params, table=table)


def test_beta_sum_of_constant_path_is_triangle_area():
    grid = TimeGrid.uniform(2.0, 16)
    still = PathSet(grid, np.zeros((3, 2, 17)), ModelParams(d=2, T=2.0), "constant", 0)
    b = beta_samples(still, [0.5, 1.0])
    assert np.allclose(b[0], 2.0 / (2 * np.pi * 0.5)) and np.allclose(b[1], 2.0 / (2 * np.pi))


def test_monte_carlo_mean_and_variance(table):
    p2 = ModelParams(a=1.0, H=0.6, d=2)
    paths = simulate_representation(p2, TimeGrid.uniform(1.0, 128), 400, seed=2)
    est = estimate_beta_mc(paths, 0.2)
    target = analytic_mean_beta(0.2, table.params, table=table)
    assert abs(est.mc_mean - target) < max(4 * est.mc_se, 0.03 * target)
    var = analytic_var_beta(0.2, table.params, table=table, m=11, rel_tol=1e-2).value
    assert abs(est.mc_var - var) < 4 * est.mc_var_se + 0.02 * var


def test_beta_input_errors():
    grid = TimeGrid.uniform(1.0, 64)
    one_d = simulate_representation(ModelParams(d=1), grid, 2, 0)
    with pytest.raises(DomainError):
        beta_samples(one_d, [0.2])
    two_d = simulate_representation(ModelParams(d=2), grid, 20, 0)
    with pytest.raises(ResolutionError):
        beta_samples(two_d, [0.5 * beta_resolution_floor(two_d)])
    with pytest.raises(DomainError):
        SiltEstimate(0.0, 1, 1, 1, 1, 1, 1, 1, 1)


def test_silt_csv(tmp_path):
    e = SiltEstimate(0.2, 1.0, 0.1, 0.01, 0.01, 1.0, 0.1, 10, 64)
    header, rows = read_csv(write_silt_csv(tmp_path / "s.csv", [e]))
    assert header[:4] == ["epsilon", "mc_mean", "mc_se", "analytic_mean"] and len(rows) == 1


@pytest.mark.parametrize("case", ["overlap", "nested", "disjoint"])
def test_increment_covariance_lower_bounds(case, table):
    tuples = sample_ordered(case, 2000, 1.0, np.random.default_rng(7))
    r = increment_gap_check(case, tuples, table.params, table)
    assert r.violations == 0 and r.extreme > 0


def test_upper_bounds_by_fbm_brackets(table):
    rng = np.random.default_rng(8)
    r_chain = fbm_bracket_check("chain", sample_ordered("chain", 2000, 1.0, rng), table.params, table)
    r_disjoint = fbm_bracket_check("disjoint", sample_ordered("disjoint", 2000, 1.0, rng), table.params, table)
    for r in (r_chain, r_disjoint):
        assert r.violations == 0 and np.isfinite(r.extreme) and r.extreme < 1e3
    # s = t leaves nothing on either side
    assert shared_end_gap(0.3, 0.3, 0.8, table) == 0.0
    with pytest.raises(DomainError):
        fbm_bracket_check("crossed", sample_ordered("disjoint", 5, 1.0, rng), table.params, table)
    with pytest.raises(DomainError):
        sample_ordered("crossed", 5, 1.0, rng)


def test_hstar_is_product_of_kernel_differences():
    p = ModelParams()
    assert hstar(0.5, 0.5, 0.2, 0.3, p) == 0.0
    assert hstar(1.0, 0.0, 2.0, 0.5, p) == 0.0
    with pytest.raises(DomainError):
        hstar(0.2, 0.5, 0.1, 0.1, p)
