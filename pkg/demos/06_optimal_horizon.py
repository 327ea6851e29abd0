"""Choosing the horizon law from pilot estimates of the tail covariances v_k.

With v_k non-increasing in ratio the work-variance product E cost * var Z is
minimized by S(k) = sqrt(v_k / v_0).  For f(x) = x on the contracting chain
that law is sqrt(3) 2^-k with product 3.
"""

# %%
import numpy as np

from exact_estimation import ForwardCoupling, estimate_tail_covariances, geometric, optimal_truncation
from exact_estimation import predicted_second_moment, run_fixed_replicates
from exact_estimation.exceptions import MonotonicityViolated
from exact_estimation.models import AR_FUNCTIONALS, ar_bernoulli

# %%
for fn in ("f1", "f2", "f3"):
    source = ForwardCoupling(ar_bernoulli(), AR_FUNCTIONALS[fn])
    v = estimate_tail_covariances(source, 100_000, 20, seed=1)
    print(f"\n{fn}: v_0..4 = {np.round(v[:5], 4)}")
    second = predicted_second_moment(v, geometric(0.5))
    print(f"  predicted E Z^2 under geom:0.5 = {second.value:.4f} (+{second.remainder:.1e} tail)")
    try:
        best = optimal_truncation(v)
    except MonotonicityViolated as exc:
        print("  no square-root law:", exc)
        continue
    for law in (best, geometric(0.3), geometric(0.8)):
        r = run_fixed_replicates(source, 100_000, law, seed=2)
        work = r.total_cost / r.replicate_count
        print(f"  {law.label()[:28]:>28}: E cost {work:.3f} x var {r.sample_variance:.3f} = {work * r.sample_variance:.3f}")
