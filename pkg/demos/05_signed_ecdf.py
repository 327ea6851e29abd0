"""Equilibrium distribution of the M/M/1 waiting time from signed atoms.

The estimate F_n is unbiased at every x but need not be monotone or stay
inside [0, 1]; its sup distance to the exact CDF still shrinks with n.
"""

# %%
import numpy as np

from exact_estimation import ImprovedCoupling, build_ecdf, inverse_k, mm1, mm1_reference_cdf
from exact_estimation.models import MM1_FUNCTIONALS

source = ImprovedCoupling(mm1(), MM1_FUNCTIONALS["identity"])

# %%
for n in (1_000, 10_000, 100_000):
    F = build_ecdf(source, n, inverse_k(), seed=0)
    print(f"n={n:>7}: sup |F_n - F| = {F.sup_distance(mm1_reference_cdf):.4f}, mean waiting time {F.mean():.3f} (exact 1)")

# %%
xs = np.array([0.0, 0.5, 1.0, 2.0, 4.0])
print("x      ", xs)
print("F_n(x) ", np.round(F.evaluate(xs), 4))
print("F(x)   ", np.round(mm1_reference_cdf(xs), 4))
table = F.step_table()
print("non-monotone steps:", int(np.sum(np.diff(table[:, 2]) < 0)), "of", len(table))
