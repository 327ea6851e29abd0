"""Z versus Z* on the chain X' = X/2 + Bernoulli(1/2).

Z pays N steps per replicate, Z* pays N(N+1)/2, so Z* loses ground when the
horizon law has a heavy tail.
"""

# %%
from exact_estimation import ForwardCoupling, BackwardCoupling, geometric, run_budgeted
from exact_estimation.models import AR_FUNCTIONALS, AR_TRUTHS, ar_bernoulli

chain = ar_bernoulli()

# %%
for ratio in (0.5, 0.95):
    law = geometric(ratio)
    print(f"\nN with P(N >= n) = {ratio}^(n-1), budget 1e6 steps")
    for fn, f in AR_FUNCTIONALS.items():
        for source in (ForwardCoupling(chain, f), BackwardCoupling(chain, f)):
            r = run_budgeted(source, 1e6, law, seed=0)
            print(f"  {fn} {source.estimator:>5}: {r.mean:.4f} +- {r.half_width:.2e}"
                  f"  (truth {AR_TRUTHS[fn]:.4f}, {r.replicate_count} replicates)")

# %% a single replicate, step by step
import numpy as np
from exact_estimation import forward_coupled_deltas

s = forward_coupled_deltas(chain, AR_FUNCTIONALS["f1"], 6, np.random.default_rng(1))
print("\ndifferences of one Z replicate:", np.round(s.deltas, 4))
