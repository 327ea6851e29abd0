"""M/M/1 waiting times: fraction of customers waiting longer than one time unit.

The chain regenerates whenever a customer finds the queue empty.  Horizons
follow P(N >= k) = 1/k; the confidence interval shrinks like one over the
square root of the budget.
"""

# %%
import numpy as np

from exact_estimation import ImprovedCoupling, IndependentCoupling, infinite, inverse_k, mm1, run_budget_ladder
from exact_estimation.estimator import simulate_batch
from exact_estimation.models import MM1_FUNCTIONALS, MM1_TRUTH

scheme = mm1()
f = MM1_FUNCTIONALS["above1"]
budgets = [1e5, 1e6, 1e7]

# %%
print(f"truth {MM1_TRUTH:.6f}")
for source in (IndependentCoupling(scheme, f), ImprovedCoupling(scheme, f)):
    for c, r in zip(budgets, run_budget_ladder(source, budgets, inverse_k(), seed=0)):
        print(f"{source.coupling:>11} {c:8.0e} steps: {r.mean:.4f} +- {r.half_width:.2e} ({r.replicate_count} replicates)")

# %% coupling times with no truncation
for source in (IndependentCoupling(scheme, f), ImprovedCoupling(scheme, f)):
    tau = simulate_batch(source, infinite(), 0, 0, 20000).coupling_time
    print(f"{source.coupling:>11}: mean coupling time {np.mean(tau):.3f}")
