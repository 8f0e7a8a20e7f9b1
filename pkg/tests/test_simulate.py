import numpy as np
import pytest

from fracsad.errors import DomainError, MethodError, NumericError
from fracsad.fbm import TimeGrid, fbm_matrix
from fracsad.gausscov import sigma2
from fracsad.io import read_csv
from fracsad.kernel import ModelParams, h_integral
from fracsad.simulate import (DriftSpec, ks_agreement, ks_critical_1pct, mean_function, moment_report,
                              psd_factor, simulate, simulate_euler, simulate_gaussian_exact,
                              simulate_representation, strong_error, sup_decay_study, write_sup_decay_csv)

GRID = TimeGrid.uniform(1.0, 64)


@pytest.mark.parametrize("method", ["gaussian_exact", "representation", "euler"])
def test_variance_and_mean_match_quadrature(method):
    p = ModelParams(a=1.0, nu=0.7, z=0.3, H=0.6)
    rep = moment_report(simulate(method, p, GRID, 3000, seed=4))
    target_var = sigma2(1.0, p)
    target_mean = 0.3 + 0.7 * h_integral(1.0, 1.0)
    assert abs(rep.var[-1] - target_var) < 4 * rep.se_var[-1] + 0.01 * target_var
    assert abs(rep.mean[-1] - target_mean) < 4 * rep.se_mean[-1] + 0.01
    assert rep.mean[0] == pytest.approx(0.3) and rep.var[0] == pytest.approx(0.0, abs=1e-24)


def test_mean_function_without_drift_is_constant():
    assert np.all(mean_function(GRID, ModelParams(z=1.5)) == 1.5)


def test_strong_error_shrinks_with_steps():
    p = ModelParams(a=1.0, H=0.6)
    e256 = strong_error(p, 256, 200, seed=3)
    e1024 = strong_error(p, 1024, 200, seed=3)
    assert np.quantile(e1024, 0.95) < 1e-2
    assert np.median(e1024) < np.median(e256)


def test_a_zero_simulators_agree_exactly():
    p0 = ModelParams(a=0.0, nu=0.0, z=0.3, H=0.7)
    assert np.array_equal(simulate_euler(p0, GRID, 5, 9).values, simulate_representation(p0, GRID, 5, 9).values)
    # with drift the step-by-step sum of nu dt differs from nu t by roundoff only
    p = ModelParams(a=0.0, nu=0.4, z=0.3, H=0.7)
    e = simulate_euler(p, GRID, 5, 9).values
    r = simulate_representation(p, GRID, 5, 9).values
    assert np.allclose(e, r, rtol=0, atol=1e-13)
    B = fbm_matrix(GRID, 0.7, 9, 5, stream=0)
    assert np.allclose(r[:, 0, :], 0.3 + B + 0.4 * GRID.points, atol=1e-13)


def test_custom_drift_matches_linear():
    p = ModelParams(a=1.0, H=0.65)
    lin = simulate_euler(p, GRID, 6, 2).values
    cus = simulate_euler(p, GRID, 6, 2, drift=DriftSpec("custom", lambda x: -x, 1.0)).values
    assert np.max(np.abs(lin - cus)) < 1e-12


def test_shared_noise_and_reproducibility():
    p = ModelParams(H=0.6, d=2)
    a = simulate_representation(p, GRID, 8, 1).values
    b = simulate_representation(p, GRID, 3, 1, threads=3).values
    assert np.array_equal(a[:3], b)
    assert a.shape == (8, 2, 65)
    assert not np.array_equal(a[:, 0], a[:, 1])


def test_lipschitz_guard():
    with pytest.raises(NumericError):
        simulate_euler(ModelParams(a=50.0, T=1.0), TimeGrid.uniform(1.0, 16), 2, 0)
    with pytest.raises(DomainError):
        DriftSpec("custom", lambda x: x)


def test_method_and_grid_errors():
    p = ModelParams()
    with pytest.raises(MethodError):
        simulate("milstein", p, GRID, 2, 0)
    with pytest.raises(MethodError):
        simulate_representation(p, TimeGrid(np.array([0.0, 0.2, 1.0])), 2, 0)
    with pytest.raises(DomainError):
        simulate_representation(p, TimeGrid.uniform(2.0, 8), 2, 0)


def test_psd_factor_handles_singular_and_rejects_indefinite():
    v = np.array([1.0, 2.0])
    L = psd_factor(np.outer(v, v))
    assert np.allclose(L @ L.T, np.outer(v, v))
    with pytest.raises(NumericError):
        psd_factor(np.array([[1.0, 0.0], [0.0, -1.0]]))


def test_gaussian_exact_distribution_matches_representation():
    p = ModelParams(a=2.0, H=0.7)
    x = simulate_gaussian_exact(p, GRID, 2000, 5).component(0)[:, -1]
    y = simulate_representation(p, GRID, 2000, 6).component(0)[:, -1]
    stat, crit = ks_agreement(x, y)
    assert stat < crit
    assert ks_critical_1pct(100, 100) == pytest.approx(1.628 * np.sqrt(0.02))


def test_csv_outputs(tmp_path):
    ps = simulate_representation(ModelParams(d=2), TimeGrid.uniform(1.0, 2), 2, 0)
    header, rows = read_csv(ps.to_csv(tmp_path / "paths.csv"))
    assert header == ["path_index", "dim", "t", "value"] and len(rows) == 12
    header, rows = read_csv(moment_report(ps, 1).to_csv(tmp_path / "m.csv"))
    assert header == ["t", "mean", "se_mean", "var", "se_var"] and len(rows) == 3
    assert ps[1].path_index == 1 and len(list(ps)) == 2


def test_sup_decay_study_rows(tmp_path):
    p = ModelParams(a=1.0, H=0.6)
    rows = sup_decay_study(p, 200, 0, horizon_list=(1, 2, 4), eps_list=(0.2, 1e6), steps_per_unit=8)
    assert [r.n for r in rows] == [1.0, 1.0, 2.0, 2.0]
    huge = [r for r in rows if r.eps == 1e6]
    assert all(r.sup_freq == 0.0 and r.point_freq == 0.0 for r in huge)
    assert all(r.sup_freq >= r.point_freq for r in rows)
    assert rows[2].gap_var < rows[0].gap_var
    header, _ = read_csv(write_sup_decay_csv(tmp_path / "s.csv", rows))
    assert header[:3] == ["n", "eps", "sup_freq"]
    with pytest.raises(DomainError):
        sup_decay_study(p, 10, 0, horizon_list=(1,))
