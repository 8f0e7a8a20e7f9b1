# %% [markdown]
# # Self-intersection local time of the planar process
#
# beta^eps = int int_{s<t} p_eps(X_t - X_s) ds dt. Its mean is a 2-d
# integral, its variance a 4-d one computed with randomized Sobol points.

# %%
from fracsad.fbm import TimeGrid
from fracsad.kernel import ModelParams
from fracsad.silt import (IncrementVarianceTable, analytic_mean_beta, analytic_var_beta, convergence_study,
                          estimate_beta_mc)
from fracsad.simulate import simulate_representation

p = ModelParams(a=1.0, H=0.6)
table = IncrementVarianceTable(p)
print(f"increment-variance table spot check: {table.spot_check(n=20):.1e}")

paths = simulate_representation(ModelParams(a=1.0, H=0.6, d=2), TimeGrid.uniform(1.0, 256), 1000, seed=5)
for eps in (0.5, 0.2):
    mc = estimate_beta_mc(paths, eps)
    mean = analytic_mean_beta(eps, p, table=table)
    var = analytic_var_beta(eps, p, table=table, m=12, rel_tol=5e-3).value
    print(f"eps={eps}: mean {mc.mc_mean:.4f} +- {mc.mc_se:.4f} vs {mean:.4f}; "
          f"var {mc.mc_var:.5f} +- {mc.mc_var_se:.5f} vs {var:.5f}")

# %% [markdown]
# Along a halving sequence of eps the variance grows and its successive
# differences, for H < 3/4, should eventually shrink.

# %%
for row in convergence_study([0.4, 0.2, 0.1, 0.05], p, table=table, m=12, rel_tol=5e-3):
    print(f"eps={row.epsilon:<6g} var={row.analytic_var:.5f} delta={row.delta_prev:.5f}")
