"""Randomized-truncation estimator, replication and budget accounting.

Every replicate source (forward/backward contractive couplings, the two
regenerative couplings) produces a :class:`DeltaBatch`: the realized
differences of many independent replicates stored in long format, one row
per ``(replicate, k)``.  The estimator for a single replicate is

    Z = sum_{k=0}^{K} delta_k / P(N >= k),

where ``K`` is the realized horizon (``min(N, tau)`` for regenerative runs).

Random numbers are addressed by ``(master_seed, batch_index)``: replicate
``i`` always lives in batch ``i // batch_size`` at position
``i % batch_size``, so reports do not depend on the number of workers.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np
from scipy.stats import norm

from .exceptions import Divergent, EmptyBudget, ZeroSurvival
from .truncation import ExplicitLaw, TruncationLaw

BATCH_SIZE = 16384
DEFAULT_LEVEL = 0.90

CSV_COLUMNS = (
    "estimator",
    "coupling",
    "truncation",
    "n_samples",
    "mean",
    "half_width_90",
    "total_steps",
    "seed",
)


def batch_rng(seed: int, batch_index: int) -> np.random.Generator:
    """Independent generator for one batch of replicates."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(batch_index,)))


@dataclass
class DeltaStream:
    """Realized differences of a single replicate."""

    deltas: np.ndarray
    sampled_n: float
    coupling_time: Optional[float] = None
    cost: float = 0.0
    raw_steps: float = 0.0
    values: Optional[np.ndarray] = None
    prime_values: Optional[np.ndarray] = None

    @property
    def horizon(self) -> int:
        return len(self.deltas) - 1


@dataclass
class DeltaBatch:
    """Differences of ``size`` replicates in long format.

    Row arrays (``rep``, ``k``, ``delta``, ``y``, ``y_prime``, ``live``) are
    ordered by ``k`` and, within one ``k``, by replicate.  ``y`` holds the
    functional of the leading chain at ``k`` and ``y_prime`` that of the
    lagged chain at ``k - 1`` (NaN at ``k = 0``).  ``live`` is False on the
    row at which the two chains couple; that row's delta is zero.
    """

    sampled_n: np.ndarray
    cost: np.ndarray
    raw_steps: np.ndarray
    rep: np.ndarray
    k: np.ndarray
    delta: np.ndarray
    y: np.ndarray
    y_prime: np.ndarray
    live: np.ndarray
    coupling_time: Optional[np.ndarray] = None

    @property
    def size(self) -> int:
        return len(self.sampled_n)

    def stream(self, i: int) -> DeltaStream:
        rows = self.rep == i
        order = np.argsort(self.k[rows], kind="stable")
        tau = None
        if self.coupling_time is not None:
            tau = float(self.coupling_time[i])
        return DeltaStream(
            deltas=self.delta[rows][order],
            sampled_n=float(self.sampled_n[i]),
            coupling_time=tau,
            cost=float(self.cost[i]),
            raw_steps=float(self.raw_steps[i]),
            values=self.y[rows][order],
            prime_values=self.y_prime[rows][order],
        )

    def dense_deltas(self, horizon: int) -> np.ndarray:
        """``(size, horizon + 1)`` matrix of deltas, zero past each stream's end."""
        out = np.zeros((self.size, horizon + 1))
        keep = self.k <= horizon
        out[self.rep[keep], self.k[keep]] = self.delta[keep]
        return out


class _Rows:
    """Accumulates long-format rows step by step."""

    def __init__(self):
        self._parts = []

    def add(self, rep, k, delta, y, y_prime, live=True):
        m = len(rep)
        if m == 0:
            return
        self._parts.append(
            (
                rep,
                np.full(m, k, dtype=np.int64),
                delta,
                y,
                np.broadcast_to(y_prime, (m,)),
                np.broadcast_to(live, (m,)),
            )
        )

    def batch(self, sampled_n, cost, raw_steps, coupling_time=None) -> DeltaBatch:
        if self._parts:
            cols = [np.concatenate(c) for c in zip(*self._parts)]
        else:
            cols = [np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)]
            cols += [np.zeros(0)] * 3 + [np.zeros(0, dtype=bool)]
        return DeltaBatch(
            sampled_n=np.asarray(sampled_n, dtype=float),
            cost=np.asarray(cost, dtype=float),
            raw_steps=np.asarray(raw_steps, dtype=float),
            rep=cols[0].astype(np.int64),
            k=cols[1],
            delta=cols[2].astype(float),
            y=cols[3].astype(float),
            y_prime=cols[4].astype(float),
            live=cols[5].astype(bool),
            coupling_time=coupling_time,
        )


def _weights(law: TruncationLaw, k: np.ndarray) -> np.ndarray:
    s = law.survival_array(k)
    if np.any(s <= 0):
        bad = int(np.asarray(k)[s <= 0][0])
        raise ZeroSurvival(f"P(N >= {bad}) = 0 but a difference was realized at k={bad}")
    return 1.0 / s


def combine(stream: DeltaStream, law: TruncationLaw) -> float:
    """``sum_k delta_k / P(N >= k)`` for one replicate."""
    deltas = np.asarray(stream.deltas, dtype=float)
    w = _weights(law, np.arange(len(deltas)))
    total = 0.0
    for d, wk in zip(deltas, w):
        total += d * wk
    return total


def combine_batch(batch: DeltaBatch, law: TruncationLaw) -> np.ndarray:
    """Vector of estimator values, one per replicate in the batch."""
    if len(batch.k) == 0:
        return np.zeros(batch.size)
    return np.bincount(batch.rep, weights=batch.delta * _weights(law, batch.k), minlength=batch.size)


# --------------------------------------------------------------------------
# replication


@dataclass(frozen=True)
class EstimateReport:
    replicate_count: int
    mean: float
    sample_variance: float
    half_width: float
    confidence_level: float
    total_cost: float
    master_seed: int
    raw_steps: float = 0.0
    estimator: str = ""
    coupling: str = ""
    truncation: str = ""

    @property
    def standard_error(self) -> float:
        return math.sqrt(self.sample_variance / self.replicate_count)

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "coupling": self.coupling,
            "truncation": self.truncation,
            "n_samples": self.replicate_count,
            "mean": self.mean,
            "half_width_90": self.half_width,
            "total_steps": self.total_cost,
            "seed": self.master_seed,
            "raw_steps": self.raw_steps,
            "sample_variance": self.sample_variance,
            "confidence_level": self.confidence_level,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def csv_row(self) -> str:
        return ",".join(
            [
                self.estimator,
                self.coupling,
                self.truncation,
                str(self.replicate_count),
                f"{self.mean:.6g}",
                f"{self.half_width:.6g}",
                f"{self.total_cost:.6g}",
                str(self.master_seed),
            ]
        )


def z_quantile(level: float) -> float:
    return float(norm.ppf(0.5 + level / 2.0))


@dataclass
class _Moments:
    """Streaming count/mean/M2 merged in a fixed order (Chan et al.)."""

    count: int = 0
    mean: float = 0.0
    m2: float = 0.0
    cost: float = 0.0
    raw: float = 0.0

    def add(self, z: np.ndarray, cost: np.ndarray, raw: np.ndarray):
        n = len(z)
        if n == 0:
            return
        bmean = float(np.mean(z))
        bm2 = float(np.sum((z - bmean) ** 2))
        tot = self.count + n
        d = bmean - self.mean
        self.mean += d * n / tot
        self.m2 += bm2 + d * d * self.count * n / tot
        self.count = tot
        self.cost += float(np.sum(cost))
        self.raw += float(np.sum(raw))

    def report(self, level, seed, source, law) -> EstimateReport:
        var = self.m2 / (self.count - 1) if self.count > 1 else 0.0
        hw = z_quantile(level) * math.sqrt(var / self.count)
        return EstimateReport(
            replicate_count=self.count,
            mean=self.mean,
            sample_variance=var,
            half_width=hw,
            confidence_level=level,
            total_cost=self.cost,
            master_seed=seed,
            raw_steps=self.raw,
            estimator=getattr(source, "estimator", ""),
            coupling=getattr(source, "coupling", ""),
            truncation=law.label(),
        )


def simulate_batch(source, law, seed, batch_index, batch_size=BATCH_SIZE) -> DeltaBatch:
    rng = batch_rng(seed, batch_index)
    n = law.sample(rng, batch_size)
    return source.simulate(n, rng)


def _batch_summary(args):
    source, law, seed, index, batch_size = args
    batch = simulate_batch(source, law, seed, index, batch_size)
    return combine_batch(batch, law), batch.cost, batch.raw_steps


def _iter_batches(source, law, seed, batch_size, workers, start=0) -> Iterator:
    """Batch summaries in index order, optionally computed by a process pool."""
    index = start
    if workers <= 1:
        while True:
            yield _batch_summary((source, law, seed, index, batch_size))
            index += 1
    with ProcessPoolExecutor(max_workers=workers) as pool:
        while True:
            wave = [(source, law, seed, index + i, batch_size) for i in range(workers)]
            yield from pool.map(_batch_summary, wave)
            index += workers


def _check_source(source, law):
    if getattr(source, "requires_finite_horizon", False) and not law.is_finite:
        raise ValueError(f"{source.estimator} needs a finite horizon; {law.label()} has mass at infinity")


def run_fixed_replicates(
    source, n: int, law: TruncationLaw, seed: int = 0, level: float = DEFAULT_LEVEL,
    workers: int = 1, batch_size: int = BATCH_SIZE,
) -> EstimateReport:
    """Average of exactly ``n`` independent replicates."""
    if n < 1:
        raise ValueError("n must be positive")
    _check_source(source, law)
    acc = _Moments()
    remaining = n
    for z, cost, raw in _iter_batches(source, law, seed, batch_size, workers):
        take = min(remaining, len(z))
        acc.add(z[:take], cost[:take], raw[:take])
        remaining -= take
        if remaining == 0:
            break
    return acc.report(level, seed, source, law)


def run_budget_ladder(
    source, budgets: Sequence[float], law: TruncationLaw, seed: int = 0,
    level: float = DEFAULT_LEVEL, workers: int = 1, batch_size: int = BATCH_SIZE,
) -> list:
    """Reports for several budgets computed from one replicate sequence.

    The report for budget ``c`` includes the first ``Gamma(c)`` replicates,
    ``Gamma(c) = max{k : cost_1 + ... + cost_k <= c}``; it is identical to
    ``run_budgeted`` with the same seed.
    """
    budgets = [float(c) for c in budgets]
    if any(c <= 0 for c in budgets) or budgets != sorted(budgets):
        raise ValueError("budgets must be positive and increasing")
    _check_source(source, law)
    if getattr(source, "requires_finite_horizon", False) and math.isinf(law.mean):
        raise ValueError("budgeted runs need E N < infinity for the CLT to hold")
    acc = _Moments()
    reports = []
    spent = 0.0
    pending = list(budgets)
    for z, cost, raw in _iter_batches(source, law, seed, batch_size, workers):
        cum = spent + np.cumsum(cost)
        lo = 0
        while pending and cum[-1] > pending[0]:
            cut = int(np.searchsorted(cum, pending[0], side="right"))
            acc.add(z[lo:cut], cost[lo:cut], raw[lo:cut])
            lo = cut
            if acc.count == 0:
                raise EmptyBudget(f"no replicate completes within budget {pending[0]:g}")
            reports.append(acc.report(level, seed, source, law))
            pending.pop(0)
        if not pending:
            break
        acc.add(z[lo:], cost[lo:], raw[lo:])
        spent = float(cum[-1])
    return reports


def run_budgeted(
    source, budget_c: float, law: TruncationLaw, seed: int = 0,
    level: float = DEFAULT_LEVEL, workers: int = 1, batch_size: int = BATCH_SIZE,
) -> EstimateReport:
    """Estimate from the replicates completed within ``budget_c`` cost units."""
    return run_budget_ladder(source, [budget_c], law, seed, level, workers, batch_size)[0]


def budget_count(costs: Sequence[float], budget_c: float) -> int:
    """``Gamma(c)`` for an explicit cost sequence."""
    cum = np.cumsum(np.asarray(costs, dtype=float))
    return int(np.searchsorted(cum, budget_c, side="right"))


# --------------------------------------------------------------------------
# second-moment accounting


class SecondMoment(NamedTuple):
    value: float
    remainder: float


def predicted_second_moment(tail_covariances, law: TruncationLaw, ratio_window: int = 5) -> SecondMoment:
    """``E Z^2 = sum_k v_k / P(N >= k)`` over the supplied horizon.

    The remainder bounds the neglected tail by extrapolating the last
    ``ratio_window`` terms geometrically; a ratio of one or more raises
    :class:`Divergent`.
    """
    v = np.asarray(tail_covariances, dtype=float)
    terms = v * _weights(law, np.arange(len(v)))
    value = float(np.sum(terms))
    mags = np.abs(terms)
    if len(mags) < 2 or mags[-1] == 0.0:
        return SecondMoment(value, 0.0)
    m = min(ratio_window, len(mags) - 1)
    if mags[-1 - m] == 0.0:
        raise Divergent("cannot extrapolate a tail that grows from zero")
    ratio = (mags[-1] / mags[-1 - m]) ** (1.0 / m)
    if ratio >= 1.0:
        raise Divergent(f"second-moment terms do not decay (ratio {ratio:.4g})")
    return SecondMoment(value, float(mags[-1] * ratio / (1.0 - ratio)))


def forced_horizon_law(horizon: int) -> ExplicitLaw:
    """Law with ``N = horizon`` almost surely."""
    return ExplicitLaw(tuple([1.0] * (horizon + 1)), 0.0)


def tail_covariance_samples(source, pilot_n: int, horizon: int, seed: int = 0,
                            batch_size: int = BATCH_SIZE) -> np.ndarray:
    """Per-replicate terms ``delta_k^2 + 2 delta_k sum_{j>k} delta_j``.

    Column means are the tail covariances ``v_k``; cross terms beyond
    ``horizon`` are dropped.
    """
    law = forced_horizon_law(horizon)
    rows = []
    remaining = pilot_n
    index = 0
    while remaining > 0:
        batch = simulate_batch(source, law, seed, index, batch_size)
        d = batch.dense_deltas(horizon)[: min(remaining, batch.size)]
        suffix = np.cumsum(d[:, ::-1], axis=1)[:, ::-1]
        after = np.zeros_like(d)
        after[:, :-1] = suffix[:, 1:]
        rows.append(d * d + 2.0 * d * after)
        remaining -= len(d)
        index += 1
    return np.concatenate(rows)


def estimate_tail_covariances(source, pilot_n: int, horizon: int, seed: int = 0) -> np.ndarray:
    """Pilot estimate of ``v_k = E delta_k^2 + 2 sum_{j>k} E delta_k delta_j``."""
    return tail_covariance_samples(source, pilot_n, horizon, seed).mean(axis=0)
