"""Acceptance checks, one per criterion.

Each check records a ``criterion N: PASS|FAIL ...`` line in ``RESULTS``; the
lines are printed as they are produced and repeated in the pytest terminal
summary.  Run directly with ``python tests/test_acceptance.py`` to print them
without pytest.
"""

import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest
from scipy.stats import chi2_contingency

from exact_estimation import cli
from exact_estimation import truncation as tr
from exact_estimation.contractive import BackwardCoupling, ForwardCoupling
from exact_estimation.ecdf import build_ecdf
from exact_estimation.estimator import (
    combine_batch,
    estimate_tail_covariances,
    predicted_second_moment,
    run_budget_ladder,
    run_budgeted,
    run_fixed_replicates,
    simulate_batch,
)
from exact_estimation.exceptions import MonotonicityViolated
from exact_estimation.harris import ImprovedCoupling, IndependentCoupling, coupled_paths, step_split
from exact_estimation.models import (
    AR_FUNCTIONALS,
    AR_TRUTHS,
    MM1_FUNCTIONALS,
    MM1_TRUTH,
    ar_bernoulli,
    finite_functionals,
    mm1,
    mm1_reference_cdf,
    stationary_solve,
)

sys.path.insert(0, str(Path(__file__).parent))
from conftest import oracle_chains  # noqa: E402

RESULTS = {}

# reference 90% half-widths at 10^6 steps, geometric ratio 1/2
TABLE1_HALF_WIDTHS = {
    ("f1", "z"): 1.1e-2, ("f2", "z"): 6.2e-3, ("f3", "z"): 2.3e-2,
    ("f1", "zstar"): 7.3e-3, ("f2", "zstar"): 4.7e-3, ("f3", "zstar"): 1.6e-2,
}
# same at geometric ratio 0.95
TABLE2_HALF_WIDTHS = {
    ("f1", "z"): 3.3e-2, ("f2", "z"): 1.7e-2, ("f3", "z"): 6.7e-2,
    ("f1", "zstar"): 6.1e-2, ("f2", "zstar"): 3.6e-2, ("f3", "zstar"): 1.3e-1,
}
TABLE3_HALF_WIDTH_1E7 = 8.4e-3
SEED = 0


def record(number, passed, detail):
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'} {detail}"
    RESULTS[number] = line
    print(line)
    return passed


def replicate_values(source, law, n, seed):
    """Per-replicate estimator values and costs for the first ``n`` replicates."""
    zs, costs, taus = [], [], []
    index, remaining = 0, n
    while remaining > 0:
        batch = simulate_batch(source, law, seed, index)
        take = min(remaining, batch.size)
        zs.append(combine_batch(batch, law)[:take])
        costs.append(batch.cost[:take])
        if batch.coupling_time is not None:
            taus.append(batch.coupling_time[:take])
        remaining -= take
        index += 1
    tau = np.concatenate(taus) if taus else None
    return np.concatenate(zs), np.concatenate(costs), tau


def _ar_table(ratio, reference):
    law = tr.geometric(ratio)
    cells, ok = {}, True
    notes = []
    for fn in ("f1", "f2", "f3"):
        for est, cls in (("z", ForwardCoupling), ("zstar", BackwardCoupling)):
            start = time.perf_counter()
            r = run_budgeted(cls(ar_bernoulli(), AR_FUNCTIONALS[fn]), 1e6, law, seed=SEED)
            elapsed = time.perf_counter() - start
            cells[fn, est] = r
            unbiased = abs(r.mean - AR_TRUTHS[fn]) <= 3 * r.standard_error
            factor = r.half_width / reference[fn, est]
            close = 1 / 3 <= factor <= 3
            ok &= unbiased and close and elapsed < 10
            notes.append(f"{fn}/{est} hw={r.half_width:.3g} (x{factor:.2f} of reference, n={r.replicate_count}"
                         f"{'' if unbiased else ', BIASED'}, {elapsed:.2f}s)")
    return ok, cells, "; ".join(notes)


def check_criterion_1():
    ok, cells, notes = _ar_table(0.5, TABLE1_HALF_WIDTHS)
    return record(1, ok, notes), cells


def check_criterion_2(table1_cells=None):
    if table1_cells is None:
        _, table1_cells, _ = _ar_table(0.5, TABLE1_HALF_WIDTHS)
    ok, cells, notes = _ar_table(0.95, TABLE2_HALF_WIDTHS)
    drops = []
    for fn in ("f1", "f2", "f3"):
        before = table1_cells[fn, "zstar"].replicate_count / table1_cells[fn, "z"].replicate_count
        after = cells[fn, "zstar"].replicate_count / cells[fn, "z"].replicate_count
        drops.append(before / after)
    ok &= all(d > 10 for d in drops)
    return record(2, ok, notes + f"; Z*/Z count-ratio drop {min(drops):.2f}x (need > 10)")


def check_criterion_3(max_steps=5e8):
    ladder = [c for c in cli.TABLE3_LADDER if c <= max_steps]
    start = time.perf_counter()
    source = ImprovedCoupling(mm1(), MM1_FUNCTIONALS["above1"])
    reports = run_budget_ladder(source, ladder, tr.inverse_k(), seed=SEED)
    elapsed = time.perf_counter() - start
    within = [abs(r.mean - MM1_TRUTH) <= 3 * r.standard_error for r in reports]
    slope = np.polyfit(np.log(ladder), np.log([r.half_width for r in reports]), 1)[0]
    at_1e7 = reports[ladder.index(1e7)].half_width
    factor = at_1e7 / TABLE3_HALF_WIDTH_1E7
    ok = all(within) and -0.6 <= slope <= -0.4 and 0.5 <= factor <= 2
    detail = (f"{sum(within)}/{len(ladder)} rungs within 3 SE up to {ladder[-1]:.0e} steps; "
              f"slope {slope:.3f}; hw at 1e7 = {at_1e7:.3g} (x{factor:.2f}); {elapsed:.0f}s")
    return record(3, ok, detail)


def check_criterion_4():
    failures, count = [], 0
    for size, chain in oracle_chains().items():
        f = finite_functionals(size)["identity"]
        truth = float(stationary_solve(chain) @ np.arange(size))
        for cls in (IndependentCoupling, ImprovedCoupling):
            for law in (tr.inverse_k(), tr.infinite()):
                r = run_fixed_replicates(cls(chain.scheme(), f), 100_000, law, seed=SEED)
                count += 1
                z = (r.mean - truth) / r.standard_error
                if abs(z) > 3:
                    failures.append(f"size {size} {cls.coupling} {law.label()} z={z:.2f}")
    return record(4, not failures, f"{count - len(failures)}/{count} cases within 3 SE "
                                   + ("; ".join(failures) if failures else ""))


def check_criterion_5():
    cases = [("mm1", mm1(), MM1_FUNCTIONALS["above1"])]
    cases += [(f"finite{size}", chain.scheme(), finite_functionals(size)["identity"])
              for size, chain in oracle_chains().items()]
    notes, ok = [], True
    for name, scheme, f in cases:
        _, _, tau = replicate_values(IndependentCoupling(scheme, f), tr.infinite(), 100_000, SEED)
        _, _, tau_i = replicate_values(ImprovedCoupling(scheme, f), tr.infinite(), 100_000, SEED + 1)
        se = math.sqrt(tau.var(ddof=1) / len(tau) + tau_i.var(ddof=1) / len(tau_i))
        ok &= tau_i.mean() <= tau.mean() + 3 * se
        notes.append(f"{name} E tau'={tau_i.mean():.3f} vs E tau={tau.mean():.3f}")
    return record(5, ok, "; ".join(notes))


def _path_codes(paths, size):
    return (paths.astype(np.int64) * size ** np.arange(paths.shape[1])).sum(axis=1)


def _two_sample_chi2(a, b, min_count=10):
    cells = max(a.max(), b.max()) + 1
    ca, cb = np.bincount(a, minlength=cells), np.bincount(b, minlength=cells)
    common = (ca + cb) >= min_count
    table = np.array([
        np.append(ca[common], ca[~common].sum()),
        np.append(cb[common], cb[~common].sum()),
    ])
    table = table[:, table.sum(axis=0) > 0]
    return chi2_contingency(table)[1]


def check_criterion_6(n=200_000):
    chain = oracle_chains()[5]
    scheme = chain.scheme()
    rng = np.random.default_rng(SEED)
    X, Xp = coupled_paths(scheme, 5, n, rng, improved=True)
    plain = np.empty((n, 6))
    plain[:, 0] = scheme.nu_sampler(rng, n)
    for k in range(1, 6):
        plain[:, k], _ = step_split(scheme, plain[:, k - 1], rng)
    ref = _path_codes(plain, 5)
    p_lead = _two_sample_chi2(_path_codes(X, 5), ref)
    plain2 = np.empty((n, 6))
    plain2[:, 0] = scheme.nu_sampler(rng, n)
    for k in range(1, 6):
        plain2[:, k], _ = step_split(scheme, plain2[:, k - 1], rng)
    p_lag = _two_sample_chi2(_path_codes(Xp[:, :6], 5), _path_codes(plain2, 5))
    ok = p_lead >= 0.01 and p_lag >= 0.01
    return record(6, ok, f"p-value X path {p_lead:.3f}, X' path {p_lag:.3f} (reject below 0.01)")


def check_criterion_7(seeds=range(10)):
    source = ImprovedCoupling(mm1(), MM1_FUNCTIONALS["identity"])
    law = tr.inverse_k()
    small, large = [], []
    for seed in seeds:
        small.append(build_ecdf(source, 1_000, law, seed=seed).sup_distance(mm1_reference_cdf))
        large.append(build_ecdf(source, 100_000, law, seed=seed).sup_distance(mm1_reference_cdf))
    decreasing = sum(b < a for a, b in zip(small, large))
    # the 0.05 bound applies to the default-seed run; the seed ladders test the decrease
    at_default = large[list(seeds).index(SEED)]
    below = sum(v < 0.05 for v in large)
    ok = at_default < 0.05 and decreasing >= 9
    return record(7, ok, f"sup at 1e5 = {at_default:.4f} (seed {SEED}; {below}/{len(large)} seeds below 0.05, "
                         f"max {max(large):.4f}); decreased in {decreasing}/{len(small)} ladders")


def check_criterion_8():
    law = tr.geometric(0.5)
    notes, ok = [], True
    for fn in ("f1", "f2", "f3"):
        source = ForwardCoupling(ar_bernoulli(), AR_FUNCTIONALS[fn])
        v = estimate_tail_covariances(source, 100_000, 30, seed=SEED + 1)
        predicted = predicted_second_moment(v, law)
        z, _, _ = replicate_values(source, law, 100_000, SEED + 2)
        sq = z * z
        se = sq.std(ddof=1) / math.sqrt(len(sq))
        gap = abs(predicted.value + predicted.remainder - sq.mean())
        ok &= gap <= 4 * se
        notes.append(f"{fn} predicted {predicted.value + predicted.remainder:.4f} vs {sq.mean():.4f} "
                     f"({gap / se:.2f} SE)")
    return record(8, ok, "; ".join(notes))


def _work_variance(source, law, n, seed):
    z, cost, _ = replicate_values(source, law, n, seed)
    mean_cost, var = cost.mean(), z.var(ddof=1)
    se_cost = cost.std(ddof=1) / math.sqrt(n)
    centred = (z - z.mean()) ** 2
    se_var = centred.std(ddof=1) / math.sqrt(n)
    product = mean_cost * var
    return product, math.hypot(var * se_cost, mean_cost * se_var)


def check_criterion_9():
    notes, ok = [], True
    for fn in ("f1", "f2", "f3"):
        source = ForwardCoupling(ar_bernoulli(), AR_FUNCTIONALS[fn])
        v = estimate_tail_covariances(source, 100_000, 20, seed=SEED + 1)
        try:
            best = tr.optimal_truncation(v)
        except MonotonicityViolated as exc:
            notes.append(f"{fn} has no square-root law ({exc})")
            continue
        wv, se = _work_variance(source, best, 100_000, SEED + 2)
        parts = [f"{fn} optimal {wv:.3f}"]
        for ratio in (0.3, 0.8):
            other, se_other = _work_variance(source, tr.geometric(ratio), 100_000, SEED + 3)
            ok &= wv <= other + 2 * math.hypot(se, se_other)
            parts.append(f"geom:{ratio} {other:.3f}")
        notes.append(", ".join(parts))
    return record(9, ok, "; ".join(notes))


def check_criterion_10(tmp_dir):
    commands = [
        ["table", "1"],
        ["table", "3", "--max-steps", "1e6"],
        ["run", "--model", "ar-bernoulli", "--estimator", "zstar", "--fn", "f3", "--trunc", "geom:0.8",
         "--steps", "3e5"],
        ["run", "--model", "mm1", "--estimator", "harris-improved", "--trunc", "invk", "--samples", "60000",
         "--format", "json"],
    ]
    mismatched = []
    for i, argv in enumerate(commands):
        outputs = []
        for workers in (1, 2, 3):
            path = Path(tmp_dir) / f"out{i}_{workers}"
            code = cli.main(argv + ["--seed", "5", "--workers", str(workers), "--out", str(path)])
            outputs.append(path.read_bytes() if code == 0 else None)
        if outputs[0] is None or any(o != outputs[0] for o in outputs):
            mismatched.append(" ".join(argv[:2]))
    return record(10, not mismatched, f"{len(commands) - len(mismatched)}/{len(commands)} commands "
                                      "byte-identical across 1, 2 and 3 workers")


@pytest.fixture(scope="module")
def table1_cells():
    return {}


def test_criterion_1_table1(table1_cells):
    passed, cells = check_criterion_1()
    table1_cells.update(cells)
    assert passed, RESULTS[1]


def test_criterion_2_table2(table1_cells):
    assert check_criterion_2(table1_cells or None), RESULTS[2]


def test_criterion_3_table3():
    assert check_criterion_3(), RESULTS[3]


def test_criterion_4_unbiased_on_oracle_chains():
    assert check_criterion_4(), RESULTS[4]


def test_criterion_5_improved_coupling_is_faster():
    assert check_criterion_5(), RESULTS[5]


def test_criterion_6_marginals_preserved():
    assert check_criterion_6(), RESULTS[6]


def test_criterion_7_uniform_convergence():
    assert check_criterion_7(), RESULTS[7]


def test_criterion_8_second_moment_formula():
    assert check_criterion_8(), RESULTS[8]


def test_criterion_9_optimal_law():
    assert check_criterion_9(), RESULTS[9]


def test_criterion_10_determinism(tmp_path):
    assert check_criterion_10(tmp_path), RESULTS[10]


if __name__ == "__main__":
    import tempfile

    _, cells = check_criterion_1()
    check_criterion_2(cells)
    for check in (check_criterion_3, check_criterion_4, check_criterion_5, check_criterion_6,
                  check_criterion_7, check_criterion_8, check_criterion_9):
        check()
    with tempfile.TemporaryDirectory() as tmp:
        check_criterion_10(tmp)
