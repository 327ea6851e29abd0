"""Unbiased estimators of Markov chain equilibrium expectations.

Randomized truncation of coupled telescoping sums for chains that contract
on average and for positive recurrent Harris chains, plus a signed
empirical CDF estimator.
"""

from .contractive import (
    BackwardCoupling,
    ForwardCoupling,
    IteratedFunctionChain,
    LipschitzFunctional,
    backward_coupled_deltas,
    contraction_diagnostic,
    forward_coupled_deltas,
)
from .ecdf import SignedEcdf, build_ecdf
from .estimator import (
    DeltaBatch,
    DeltaStream,
    EstimateReport,
    combine,
    combine_batch,
    estimate_tail_covariances,
    predicted_second_moment,
    run_budget_ladder,
    run_budgeted,
    run_fixed_replicates,
)
from .harris import (
    ImprovedCoupling,
    IndependentCoupling,
    MinorizationScheme,
    improved_coupling_deltas,
    independent_coupling_deltas,
    skeleton,
    step_split,
)
from .models import FiniteOracleChain, ar_bernoulli, mm1, mm1_reference_cdf, stationary_solve
from .truncation import (
    INFINITY,
    TruncationLaw,
    explicit,
    geometric,
    infinite,
    inverse_k,
    optimal_truncation,
    polynomial,
)

__version__ = "0.1.0"
