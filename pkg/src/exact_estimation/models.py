"""Example chains: the autoregressive Bernoulli chain, the M/M/1 waiting
time chain and finite Doeblin chains with exactly solvable equilibria."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .contractive import IteratedFunctionChain, LipschitzFunctional
from .exceptions import DomainError, SingularSystem
from .harris import MinorizationScheme, skeleton

# --------------------------------------------------------------------------
# X_{n+1} = X_n / 2 + V_{n+1},  V uniform on {0, 1}


def _ar_update(x, v):
    return 0.5 * x + v


def _ar_noise(rng, size):
    return rng.integers(0, 2, size=size).astype(float)


def _abs_metric(y, z):
    return np.abs(np.asarray(y, dtype=float) - np.asarray(z, dtype=float))


def _identity(x):
    return np.asarray(x, dtype=float)


def _min_one(x):
    return np.minimum(1.0, x)


def _square(x):
    return np.square(x)


AR_FUNCTIONALS = {
    "f1": LipschitzFunctional(_identity, 1.0, "x"),
    "f2": LipschitzFunctional(_min_one, 1.0, "min(1,x)"),
    "f3": LipschitzFunctional(_square, 4.0, "x^2"),
}
# uniform equilibrium on [0, 2]
AR_TRUTHS = {"f1": 1.0, "f2": 0.75, "f3": 4.0 / 3.0}


def ar_bernoulli(initial_state: float = 1.0) -> IteratedFunctionChain:
    return IteratedFunctionChain(
        initial_state=initial_state,
        update=_ar_update,
        noise_sampler=_ar_noise,
        metric=_abs_metric,
        contraction_factor_hint=0.25,
        name="ar-bernoulli",
    )


# --------------------------------------------------------------------------
# M/M/1 waiting times, arrival rate 1/2, service rate 1

ARRIVAL_RATE = 0.5
SERVICE_RATE = 1.0


def exponential_inverse(u, rate):
    """Inverse exponential CDF, ``-ln(u) / rate`` for ``u`` in (0, 1)."""
    u = np.asarray(u, dtype=float)
    if rate <= 0:
        raise DomainError(f"rate must be positive, got {rate}")
    if np.any((u <= 0) | (u >= 1)):
        raise DomainError("u must lie strictly between 0 and 1")
    out = -np.log(u) / rate
    return float(out) if out.ndim == 0 else out


def _increments(rng, size):
    # service of the current customer, then the next interarrival gap
    s = rng.exponential(1.0 / SERVICE_RATE, size)
    a = rng.exponential(1.0 / ARRIVAL_RATE, size)
    return s - a


def _mm1_in_a(w):
    return np.asarray(w) == 0.0


def _mm1_nu(rng, size):
    return np.maximum(_increments(rng, size), 0.0)


def _mm1_kernel(w, rng):
    return np.maximum(w + _increments(rng, len(w)), 0.0)


def _indicator_above_one(w):
    return (np.asarray(w) > 1.0).astype(float)


MM1_FUNCTIONALS = {
    "above1": _indicator_above_one,
    "identity": _identity,
}
MM1_TRUTH = 0.5 * math.exp(-0.5)


def mm1() -> MinorizationScheme:
    """Lindley recursion ``W' = max(W + S - A, 0)`` split on ``A = {0}`` with ``lam = 1``."""
    return MinorizationScheme(
        in_small_set=_mm1_in_a,
        lam=1.0,
        nu_sampler=_mm1_nu,
        kernel_sampler=_mm1_kernel,
        name="mm1",
    )


def mm1_reference_cdf(x):
    """Equilibrium waiting-time CDF: atom 1/2 at zero plus Exp(1/2) with weight 1/2."""
    x = np.asarray(x, dtype=float)
    out = np.where(x < 0, 0.0, 1.0 - 0.5 * np.exp(-0.5 * np.maximum(x, 0.0)))
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# finite chains


def _categorical(cum, rows, rng):
    u = rng.random(len(rows))
    return np.sum(cum[rows] <= u[:, None], axis=1).astype(float)


def _cumulative(p):
    cum = np.cumsum(p, axis=-1)
    cum[..., -1] = 1.0
    return cum


@dataclass(frozen=True)
class FiniteOracleChain:
    """Row-stochastic ``P`` with a Doeblin split on a small set.

    With small set ``A`` (default: every state),
    ``lam = sum_y min_{x in A} P(x, y)``, ``nu = min_x P(x, .) / lam`` and
    ``Q(x, .) = (P(x, .) - lam * nu) / (1 - lam)``.  States are the indices
    ``0..n-1`` stored as floats.
    """

    P: np.ndarray
    small_set: Optional[tuple] = None
    power: int = 1
    lam: float = field(init=False)
    nu: np.ndarray = field(init=False)
    Q: Optional[np.ndarray] = field(init=False)

    def __post_init__(self):
        P = np.array(self.P, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1]:
            raise ValueError("P must be square")
        if np.any(P < 0) or not np.allclose(P.sum(axis=1), 1.0, atol=1e-12):
            raise ValueError("P must be row-stochastic")
        object.__setattr__(self, "P", P)
        n = len(P)
        A = tuple(range(n)) if self.small_set is None else tuple(int(a) for a in self.small_set)
        object.__setattr__(self, "small_set", A)
        Pm = np.linalg.matrix_power(P, self.power)
        floor = Pm[list(A)].min(axis=0)
        lam = float(floor.sum())
        if lam <= 0:
            raise ValueError("no Doeblin column: min over the small set of every column is zero")
        lam = min(lam, 1.0)
        nu = floor / floor.sum()
        Q = None
        if lam < 1.0:
            Q = np.zeros_like(Pm)
            Q[list(A)] = (Pm[list(A)] - lam * nu) / (1.0 - lam)
            Q = np.maximum(Q, 0.0)
        object.__setattr__(self, "lam", lam)
        object.__setattr__(self, "nu", nu)
        object.__setattr__(self, "Q", Q)

    @property
    def size(self) -> int:
        return len(self.P)

    @property
    def transition(self) -> np.ndarray:
        """The kernel the split describes (``P`` raised to ``power``)."""
        return np.linalg.matrix_power(self.P, self.power)

    def in_small_set(self, x):
        return np.isin(np.asarray(x).astype(np.int64), self.small_set)

    def nu_sampler(self, rng, size):
        return _categorical(_cumulative(self.nu)[None, :], np.zeros(size, dtype=np.int64), rng)

    def kernel_sampler(self, x, rng):
        return _categorical(_cumulative(self.P), np.asarray(x).astype(np.int64), rng)

    def residual_sampler(self, x, rng):
        return _categorical(_cumulative(self.Q), np.asarray(x).astype(np.int64), rng)

    def scheme(self) -> MinorizationScheme:
        """Split scheme; for ``power > 1`` off-``A`` steps compose ``power`` draws of ``P``."""
        base = MinorizationScheme(
            in_small_set=self.in_small_set,
            lam=self.lam,
            nu_sampler=self.nu_sampler,
            kernel_sampler=self.kernel_sampler,
            residual_sampler=self.residual_sampler if self.lam < 1.0 else None,
            name=f"finite{self.size}",
        )
        return skeleton(base, self.kernel_sampler, self.power)

    def mixture_residual(self) -> float:
        """Largest entry of ``|lam * nu + (1 - lam) * Q(x, .) - P^power(x, .)|`` over ``A``."""
        Pm = self.transition
        A = list(self.small_set)
        mix = self.lam * self.nu[None, :]
        if self.Q is not None:
            mix = mix + (1.0 - self.lam) * self.Q[A]
        return float(np.max(np.abs(mix - Pm[A])))


def stationary_solve(P) -> np.ndarray:
    """Stationary vector of an irreducible row-stochastic matrix by direct solve."""
    P = np.asarray(P.P if isinstance(P, FiniteOracleChain) else P, dtype=float)
    n = len(P)
    M = P.T - np.eye(n)
    if np.linalg.matrix_rank(M) != n - 1:
        raise SingularSystem("stationary equations are rank deficient beyond one dimension")
    M[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(M, b)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(str(exc)) from exc
    pi = np.maximum(pi, 0.0)
    return pi / pi.sum()


def random_doeblin_matrix(n: int, rng, min_column: float = 0.05) -> np.ndarray:
    """Random row-stochastic matrix whose first column is bounded below."""
    P = rng.random((n, n)) + 0.1
    P /= P.sum(axis=1, keepdims=True)
    P[:, 0] += min_column
    return P / P.sum(axis=1, keepdims=True)


def load_matrix_csv(path) -> FiniteOracleChain:
    with open(path, newline="") as fh:
        rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
    return FiniteOracleChain(np.array(rows))


def finite_functionals(size: int) -> dict:
    """Named test functionals on ``{0, ..., size - 1}``."""
    return {
        "identity": _identity,
        "square": _square,
        "first": _IsState(0),
    }


@dataclass(frozen=True)
class _IsState:
    state: int

    def __call__(self, x):
        return (np.asarray(x) == self.state).astype(float)


def finite_state_function(values):
    """Functional mapping state ``i`` to ``values[i]``."""
    return _Lookup(tuple(float(v) for v in values))


@dataclass(frozen=True)
class _Lookup:
    values: tuple

    def __call__(self, x):
        return np.asarray(self.values)[np.asarray(x).astype(np.int64)]
