"""Regeneration-based couplings for positive recurrent Harris chains.

The chain is described through a lag-one minorization on a small set ``A``:
for ``x`` in ``A`` the transition law splits as
``lam * nu + (1 - lam) * Q(x, .)``.  A step from ``x`` in ``A`` "regenerates"
when the ``nu`` component is chosen.

Two copies are run: ``X`` and a lagged copy ``X'`` that shares ``X_0``.  The
coupling time ``tau`` is the first ``n`` at which ``X`` regenerates at ``n``
and ``X'`` regenerates at ``n - 1``; after that the lag-shifted futures have
the same law, so ``delta_n = (f(X_n) - f(X'_{n-1})) * 1{tau > n}``.  The shared
starting point ``X'_0 = X_0`` does not count as a regeneration of ``X'``: the
event that ``X`` regenerates at time one depends on ``X_0``, so using it
would correlate the coupling time with ``X'_0`` and bias the estimator.
Hence ``tau >= 2``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np
from scipy.stats import ks_2samp

from .estimator import DeltaStream, _Rows, forced_horizon_law, simulate_batch
from .exceptions import HorizonExceeded, MissingResidual

DEFAULT_MAX_STEPS = 10**9


@dataclass(frozen=True)
class MinorizationScheme:
    """Nummelin split of a transition kernel (lag one).

    All callables are vectorized over a leading replicate axis:
    ``in_small_set(x) -> bool array``, ``nu_sampler(rng, size)``,
    ``residual_sampler(x, rng)`` and ``kernel_sampler(x, rng)``.  The residual
    kernel is only needed when ``lam < 1``; the plain kernel is only used off
    the small set.
    """

    in_small_set: Callable
    lam: float
    nu_sampler: Callable
    kernel_sampler: Callable
    residual_sampler: Optional[Callable] = None
    period: int = 1
    name: str = ""

    def __post_init__(self):
        if not 0.0 < self.lam <= 1.0:
            raise ValueError(f"lam must lie in (0, 1], got {self.lam}")
        if self.period < 1:
            raise ValueError("period must be a positive integer")


def _split(scheme, x, in_a, rng):
    out = np.empty_like(x)
    regen = np.zeros(len(x), dtype=bool)
    ia = np.flatnonzero(in_a)
    if len(ia):
        coin = rng.random(len(ia)) < scheme.lam
        hit = ia[coin]
        regen[hit] = True
        out[hit] = scheme.nu_sampler(rng, len(hit))
        miss = ia[~coin]
        if len(miss):
            if scheme.residual_sampler is None:
                raise MissingResidual("lam < 1 needs a residual sampler for states in A")
            out[miss] = scheme.residual_sampler(x[miss], rng)
    off = np.flatnonzero(~in_a)
    if len(off):
        out[off] = scheme.kernel_sampler(x[off], rng)
    return out, regen


def step_split(scheme: MinorizationScheme, x, rng):
    """One split-chain transition from each state in ``x``.

    Returns ``(next_states, regenerated)``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    return _split(scheme, x, np.asarray(scheme.in_small_set(x), dtype=bool), rng)


def _advance_independent(scheme, x, xp, rng):
    x, rx = step_split(scheme, x, rng)
    xp, rxp = step_split(scheme, xp, rng)
    return x, xp, rx & rxp


def _advance_improved(scheme, x, xp, rng):
    in_x = np.asarray(scheme.in_small_set(x), dtype=bool)
    in_xp = np.asarray(scheme.in_small_set(xp), dtype=bool)
    both = in_x & in_xp
    nx = np.empty_like(x)
    nxp = np.empty_like(xp)
    coupled = np.zeros(len(x), dtype=bool)

    jb = np.flatnonzero(both)
    if len(jb):
        coin = rng.random(len(jb)) < scheme.lam
        hit = jb[coin]
        coupled[hit] = True
        xi = scheme.nu_sampler(rng, len(hit))
        nx[hit] = xi
        nxp[hit] = xi
        miss = jb[~coin]
        if len(miss):
            if scheme.residual_sampler is None:
                raise MissingResidual("lam < 1 needs a residual sampler for states in A")
            nx[miss] = scheme.residual_sampler(x[miss], rng)
            nxp[miss] = scheme.residual_sampler(xp[miss], rng)

    solo = np.flatnonzero(~both)
    if len(solo):
        nx[solo], _ = _split(scheme, x[solo], in_x[solo], rng)
        nxp[solo], _ = _split(scheme, xp[solo], in_xp[solo], rng)
    return nx, nxp, coupled


@dataclass(frozen=True)
class _RegenerativeCoupling:
    scheme: MinorizationScheme
    f: Callable
    max_steps: int = DEFAULT_MAX_STEPS
    requires_finite_horizon = False

    def _advance(self, x, xp, rng):
        raise NotImplementedError

    def simulate(self, n, rng):
        n = np.asarray(n, dtype=float)
        R = len(n)
        f = self.f
        rows = _Rows()
        x0 = self.scheme.nu_sampler(rng, R)
        f0 = np.asarray(f(x0), dtype=float)
        rows.add(np.arange(R), 0, f0, f0, np.nan)
        tau = np.full(R, np.inf)
        horizon = np.zeros(R)

        idx = np.flatnonzero(n >= 1)
        xp = x0[idx]
        x, _ = step_split(self.scheme, xp, rng)
        fx, fxp = np.asarray(f(x), dtype=float), f0[idx]
        rows.add(idx, 1, fx - fxp, fx, fxp)
        horizon[idx] = 1
        k = 1
        while len(idx):
            k += 1
            keep = n[idx] >= k
            idx, x, xp = idx[keep], x[keep], xp[keep]
            if not len(idx):
                break
            if k > self.max_steps:
                raise HorizonExceeded(
                    f"{len(idx)} replicate(s) not coupled after {self.max_steps} steps"
                )
            x, xp, coupled = self._advance(x, xp, rng)
            fx = np.asarray(f(x), dtype=float)
            fxp = np.asarray(f(xp), dtype=float)
            rows.add(idx, k, np.where(coupled, 0.0, fx - fxp), fx, fxp, ~coupled)
            horizon[idx] = k
            tau[idx[coupled]] = k
            idx, x, xp = idx[~coupled], x[~coupled], xp[~coupled]

        cost = 2 * horizon
        return rows.batch(n, cost=cost, raw_steps=cost, coupling_time=tau)


@dataclass(frozen=True)
class IndependentCoupling(_RegenerativeCoupling):
    """``X`` and ``X'`` split independently; ``tau`` = first aligned regeneration."""

    estimator = "harris-independent"
    coupling = "independent"

    def _advance(self, x, xp, rng):
        return _advance_independent(self.scheme, x, xp, rng)


@dataclass(frozen=True)
class ImprovedCoupling(_RegenerativeCoupling):
    """Shares the regeneration coin and ``nu`` draw when both copies sit in ``A``.

    On success ``X_{n+1} = X'_n`` pathwise and the replicate stops.  Each
    copy keeps its marginal law, and the coupling time is never later than
    under :class:`IndependentCoupling` on a common probability space.
    """

    estimator = "harris-improved"
    coupling = "improved"

    def _advance(self, x, xp, rng):
        return _advance_improved(self.scheme, x, xp, rng)


def independent_coupling_deltas(scheme, f, sampled_n, rng, max_steps=DEFAULT_MAX_STEPS) -> DeltaStream:
    return IndependentCoupling(scheme, f, max_steps).simulate(np.array([sampled_n], dtype=float), rng).stream(0)


def improved_coupling_deltas(scheme, f, sampled_n, rng, max_steps=DEFAULT_MAX_STEPS) -> DeltaStream:
    return ImprovedCoupling(scheme, f, max_steps).simulate(np.array([sampled_n], dtype=float), rng).stream(0)


def coupled_paths(scheme, steps: int, size: int, rng, improved: bool = True):
    """Paths ``X_0..X_steps`` and ``X'_0..X'_steps`` of the coupled pair.

    The pair is never stopped: after an improved-coupling success the lagged
    copy follows ``X`` one step behind (``X'_k = X_{k+1}``).  Used to check
    that the couplings leave each marginal law unchanged.
    """
    X = np.empty((size, steps + 2))
    Xp = np.empty((size, steps + 1))
    X[:, 0] = scheme.nu_sampler(rng, size)
    Xp[:, 0] = X[:, 0]
    X[:, 1], _ = step_split(scheme, X[:, 0], rng)
    advance = _advance_improved if improved else _advance_independent
    merged = np.zeros(size, dtype=bool)
    for k in range(2, steps + 2):
        old = np.flatnonzero(merged)
        free = np.flatnonzero(~merged)
        nx, nxp, coupled = advance(scheme, X[free, k - 1], Xp[free, k - 2], rng)
        X[free, k] = nx
        Xp[free, k - 1] = nxp
        if len(old):
            X[old, k], _ = step_split(scheme, X[old, k - 1], rng)
            Xp[old, k - 1] = X[old, k]
        if improved:
            merged[free[coupled]] = True
    return X[:, : steps + 1], Xp


@dataclass(frozen=True)
class _Composed:
    kernel: Callable
    times: int

    def __call__(self, x, rng):
        for _ in range(self.times):
            x = self.kernel(x, rng)
        return x


def skeleton(scheme: MinorizationScheme, base_kernel: Callable, p: int) -> MinorizationScheme:
    """Scheme for the ``p``-step chain ``(X_{pn})``.

    ``scheme`` must describe a minorization of the ``p``-step kernel; off the
    small set one skeleton step composes ``p`` draws of ``base_kernel``.
    Both copies start from the same ``X_0`` and hence the same periodic
    sub-class; the estimator then targets the skeleton's limit from that
    sub-class.
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    kernel = base_kernel if p == 1 else _Composed(base_kernel, p)
    return replace(scheme, kernel_sampler=kernel, period=p)


def split_consistency(scheme: MinorizationScheme, states, size: int, rng) -> list:
    """Two-sample KS p-values of split draws against kernel draws per state.

    Small p-values indicate that ``lam * nu + (1 - lam) * Q`` does not match
    the kernel at that state.
    """
    pvalues = []
    for s in states:
        x = np.full(size, s, dtype=float)
        mixed, _ = step_split(scheme, x, rng)
        plain = scheme.kernel_sampler(x, rng)
        pvalues.append(float(ks_2samp(mixed, plain).pvalue))
    return pvalues


def coupling_time_survival(source, pilot_n: int, horizon: int, seed: int = 0) -> np.ndarray:
    """Pilot estimate of ``P(tau >= k)`` for ``k = 0..horizon``."""
    law = forced_horizon_law(horizon)
    taus = []
    remaining, index = pilot_n, 0
    while remaining > 0:
        batch = simulate_batch(source, law, seed, index)
        taus.append(batch.coupling_time[: min(remaining, batch.size)])
        remaining -= batch.size
        index += 1
    tau = np.concatenate(taus)
    return np.array([np.mean(tau >= k) for k in range(horizon + 1)])
