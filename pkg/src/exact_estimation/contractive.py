"""Couplings for chains that contract on average.

A chain is given as iterated random functions ``X_k = g(X_{k-1}, w_k)`` with
iid noise ``w_k``.  Two couplings of ``(X_{k-1}, X_k)`` are provided:

* forward (estimator ``Z``): run ``A_k = X_k`` and ``B_k``, a copy started one
  step late, with the same noise, so ``delta_k = f(A_k) - f(B_k)``;
* backward (estimator ``Z*``): ``X*_j`` applies the *last* ``j`` noises of
  the replicate to the initial state, so consecutive ``X*_j`` share their
  most recent maps.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .estimator import DeltaStream, _Rows
from .exceptions import DegeneratePair


@dataclass(frozen=True)
class IteratedFunctionChain:
    """Chain ``x -> update(x, noise)`` started from ``initial_state``.

    ``update`` and ``noise_sampler`` are vectorized: ``update`` maps arrays of
    states and noises to an array of states, ``noise_sampler(rng, size)``
    returns ``size`` iid noises.
    """

    initial_state: float
    update: Callable
    noise_sampler: Callable
    metric: Optional[Callable] = None
    contraction_factor_hint: Optional[float] = None
    name: str = ""


@dataclass(frozen=True)
class LipschitzFunctional:
    evaluate: Callable
    lipschitz_constant_hint: Optional[float] = None
    name: str = ""

    def __call__(self, x):
        return np.asarray(self.evaluate(x), dtype=float)


def _as_functional(f):
    return f if isinstance(f, LipschitzFunctional) else LipschitzFunctional(f)


def _initial(chain, size):
    return np.full(size, chain.initial_state, dtype=float)


def _finite_horizons(n):
    n = np.asarray(n, dtype=float)
    if np.any(~np.isfinite(n)):
        raise ValueError("contractive couplings need a finite horizon N")
    return n


@dataclass(frozen=True)
class ForwardCoupling:
    """Replicate source for the linear-cost estimator ``Z``."""

    chain: IteratedFunctionChain
    f: Callable
    estimator = "z"
    coupling = "forward"
    requires_finite_horizon = True

    def simulate(self, n, rng):
        n = _finite_horizons(n)
        f = _as_functional(self.f)
        R = len(n)
        rows = _Rows()
        x0 = _initial(self.chain, R)
        f0 = f(x0)
        rows.add(np.arange(R), 0, f0, f0, np.nan)

        idx = np.flatnonzero(n >= 1)
        a = x0[idx]
        b = a.copy()
        fb = f(b)
        a = self.chain.update(a, self.chain.noise_sampler(rng, len(idx)))
        fa = f(a)
        rows.add(idx, 1, fa - fb, fa, fb)
        k = 1
        while len(idx):
            k += 1
            keep = n[idx] >= k
            idx, a, b = idx[keep], a[keep], b[keep]
            if not len(idx):
                break
            w = self.chain.noise_sampler(rng, len(idx))
            a = self.chain.update(a, w)
            b = self.chain.update(b, w)
            fa, fb = f(a), f(b)
            rows.add(idx, k, fa - fb, fa, fb)

        raw = np.where(n >= 1, 2 * n - 1, 0)
        return rows.batch(n, cost=n, raw_steps=raw)


@dataclass(frozen=True)
class BackwardCoupling:
    """Replicate source for the quadratic-cost estimator ``Z*``.

    States must be scalars.  Replicates sharing the same ``N = m`` are run
    together: at time ``i`` a new copy (``j = m - i + 1``) starts from the
    initial state and every started copy applies noise ``w_i``; after time
    ``m`` copy ``j`` holds ``X*_j``.  Total work is ``m (m + 1) / 2`` updates,
    the same as recomputing each ``X*_j`` from scratch, without storing noise.
    """

    chain: IteratedFunctionChain
    f: Callable
    estimator = "zstar"
    coupling = "backward"
    requires_finite_horizon = True

    def simulate(self, n, rng):
        n = _finite_horizons(n)
        f = _as_functional(self.f)
        R = len(n)
        rows = _Rows()
        f0 = f(_initial(self.chain, 1))[0]
        for m in np.unique(n).astype(np.int64):
            group = np.flatnonzero(n == m)
            g = len(group)
            if m == 0:
                rows.add(group, 0, np.full(g, f0), np.full(g, f0), np.nan)
                continue
            states = np.empty((g, m))
            for i in range(1, m + 1):
                w = self.chain.noise_sampler(rng, g)
                col = m - i
                states[:, col] = self.chain.initial_state
                block = states[:, col:].reshape(-1)
                states[:, col:] = self.chain.update(block, np.repeat(w, i, axis=0)).reshape(g, i)
            fx = np.empty((g, m + 1))
            fx[:, 0] = f0
            fx[:, 1:] = f(states.reshape(-1)).reshape(g, m)
            rows.add(group, 0, fx[:, 0], fx[:, 0], np.nan)
            for j in range(1, m + 1):
                rows.add(group, j, fx[:, j] - fx[:, j - 1], fx[:, j], fx[:, j - 1])
        cost = n * (n + 1) / 2
        return rows.batch(n, cost=cost, raw_steps=cost)


def forward_coupled_deltas(chain, f, sampled_n: int, rng) -> DeltaStream:
    """Differences of one replicate under the forward coupling."""
    return ForwardCoupling(chain, f).simulate(np.array([sampled_n]), rng).stream(0)


def backward_coupled_deltas(chain, f, sampled_n: int, rng) -> DeltaStream:
    """Differences of one replicate under the backward coupling."""
    return BackwardCoupling(chain, f).simulate(np.array([sampled_n]), rng).stream(0)


def contraction_diagnostic(chain, state_pairs, replicates: int, rng) -> float:
    """Largest observed ``E rho^2(g(y, w), g(z, w)) / rho^2(y, z)`` over the pairs.

    A value below one supports the contraction-on-average assumption.
    """
    if chain.metric is None:
        raise ValueError("chain has no metric")
    worst = 0.0
    for y, z in state_pairs:
        d0 = float(chain.metric(np.asarray([y], dtype=float), np.asarray([z], dtype=float))[0])
        if d0 == 0.0:
            raise DegeneratePair(f"states {y!r} and {z!r} are at distance zero")
        w = chain.noise_sampler(rng, replicates)
        gy = chain.update(np.full(replicates, y, dtype=float), w)
        gz = chain.update(np.full(replicates, z, dtype=float), w)
        ratio = float(np.mean(chain.metric(gy, gz) ** 2)) / d0**2
        worst = max(worst, ratio)
    return worst
