"""
Per-step Lyapunov decrease for gradient descent
===============================================

On a quadratic with curvature in ``[mu, L]`` the squared distance to the
optimum shrinks at every step once ``eta < 2 mu / L**2``.
"""
# %%
from stdw import lyapunov_check

res = lyapunov_check(dim=10, mu=0.5, L=2.0, eta=0.2, steps=200, seed=0)
print("violations:", res.violations)
print("V at steps 0, 10, 100:", res.values[[0, 10, 100]])

# %%
# Using L instead of L**2 in the bound is too optimistic once L > 1.
bad = lyapunov_check(dim=4, mu=2.0, L=2.0, eta=0.9, steps=5, seed=0, bound="literal")
print("violations with the L-form bound:", bad.violations)
