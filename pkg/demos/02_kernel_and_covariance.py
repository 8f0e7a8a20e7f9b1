# %% [markdown]
# # The solution kernel and the covariance of X
#
# X_t = z + nu m(t) + int_0^t h(t, s) dB_s. The kernel h is evaluated through
# the Mills ratio and stays finite for large a s^2.

# %%
import numpy as np

from fracsad.fbm import TimeGrid
from fracsad.gausscov import covariance_report, l2_gap, lnd_exact, sigma2, convergence_bound_checks
from fracsad.kernel import ModelParams, eval_h, eval_h_limit

for s in (0.5, 2.0, 50.0, 300.0):
    print(f"s={s:6.1f}  h(s+1, s)={eval_h(s + 1, s, 1.0):.6f}  h(s)={eval_h_limit(s, 1.0):.3e}")

# %% [markdown]
# The variance sits between e^{-a t^2/2} t^{2H} and t^{2H}.

# %%
for a in (0.1, 1.0, 10.0):
    p = ModelParams(a=a, H=0.65)
    v = sigma2(1.0, p)
    print(f"a={a:5.1f}  {np.exp(-a / 2):.4f} <= {v:.4f} <= 1")

# %% [markdown]
# Convergence to the limit process, and local nondeterminism on a grid.

# %%
p = ModelParams(a=1.0, H=0.6, T=8.0)
for t in (1.0, 2.0, 4.0):
    checks = ", ".join(f"{c.name} {c.lhs:.4f} <= {c.rhs:.4f}" for c in convergence_bound_checks(t, p))
    print(f"t={t}: gap {l2_gap(t, p):.4f}; {checks}")
print("LND constant, 16 steps on [0, 2]:", lnd_exact(TimeGrid.uniform(2.0, 16), ModelParams(T=2.0)))

# %%
rep = covariance_report(TimeGrid.uniform(1.0, 4), ModelParams())
print(np.round(rep.cross_cov, 5))
