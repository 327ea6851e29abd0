"""Randomization (truncation) laws for the horizon ``N``.

A law is described by its survival function ``S(k) = P(N >= k)`` on the
non-negative integers.  ``N`` may take the value ``inf`` when the survival
function has positive mass at infinity.

Sampling uses inverse-survival with a single uniform ``U`` on ``(0, 1]``:
``N = max{k : S(k) >= U}``, so that ``P(N >= k) = P(U <= S(k)) = S(k)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import zeta

from .exceptions import MonotonicityViolated

INFINITY = math.inf

GEOMETRIC = "geometric"
POLYNOMIAL = "polynomial"
INVERSE_K = "inverse-k"
EXPLICIT = "explicit"
INFINITE = "infinite"


class TruncationLaw:
    """Base class; subclasses implement ``survival_array`` and ``_invert``."""

    family: str = ""

    def survival(self, k: int) -> float:
        if k < 0:
            raise ValueError(f"k must be non-negative, got {k}")
        return float(self.survival_array(np.array([k]))[0])

    def survival_array(self, k: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    @property
    def tail_mass_at_infinity(self) -> float:
        return 0.0

    @property
    def mean(self) -> float:
        """``E N = sum_{k>=1} S(k)``; ``inf`` when divergent or N can be infinite."""
        raise NotImplementedError

    @property
    def is_finite(self) -> bool:
        return self.tail_mass_at_infinity == 0.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` horizons as a float array (``inf`` allowed)."""
        u = 1.0 - rng.random(size)
        return self.from_uniform(u)

    def from_uniform(self, u) -> np.ndarray:
        """Deterministic inverse-survival map applied to uniforms in (0, 1]."""
        u = np.atleast_1d(np.asarray(u, dtype=float))
        n = np.zeros_like(u)
        inf_mask = u <= self.tail_mass_at_infinity
        n[inf_mask] = np.inf
        rest = ~inf_mask
        if rest.any():
            n[rest] = self._fixup(u[rest], self._invert(u[rest]))
        return n

    def _invert(self, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _fixup(self, u: np.ndarray, n: np.ndarray) -> np.ndarray:
        # Closed-form inversions can be off by one at ties; enforce the
        # integer contract S(n) >= u > S(n + 1) exactly.
        n = np.maximum(np.floor(n), 0.0)
        for _ in range(64):
            up = self.survival_array(n + 1) >= u
            down = (n > 0) & (self.survival_array(n) < u)
            if not (up.any() or down.any()):
                return n
            n = n + up - down
        raise RuntimeError("inverse-survival fix-up did not converge")

    def label(self) -> str:
        return self.family


@dataclass(frozen=True)
class GeometricLaw(TruncationLaw):
    """``S(n) = r**(n-1)`` for ``n >= 1``, ``S(0) = 1``; hence ``N >= 1``."""

    ratio: float
    family: str = field(default=GEOMETRIC, init=False)

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError(f"geometric ratio must lie in (0, 1), got {self.ratio}")

    def survival_array(self, k):
        k = np.asarray(k, dtype=float)
        return np.where(k <= 1, 1.0, self.ratio ** np.maximum(k - 1.0, 0.0))

    @property
    def mean(self):
        return 1.0 / (1.0 - self.ratio)

    def _invert(self, u):
        return np.floor(np.log(u) / math.log(self.ratio)) + 1.0

    def label(self):
        return f"geom:{self.ratio:g}"


@dataclass(frozen=True)
class PolynomialLaw(TruncationLaw):
    """``S(k) = min(1, c * k**-alpha)`` for ``k >= 1``, ``S(0) = 1``.

    ``alpha = c = 1`` gives the inverse-k law ``S(k) = min(1, 1/k)``.
    """

    alpha: float
    c: float = 1.0

    def __post_init__(self):
        if self.alpha <= 0 or self.c <= 0:
            raise ValueError("polynomial law needs alpha > 0 and c > 0")

    @property
    def family(self):
        return INVERSE_K if (self.alpha == 1.0 and self.c == 1.0) else POLYNOMIAL

    def survival_array(self, k):
        k = np.asarray(k, dtype=float)
        with np.errstate(divide="ignore"):
            tail = self.c * np.power(np.maximum(k, 1.0), -self.alpha)
        return np.where(k <= 0, 1.0, np.minimum(1.0, tail))

    @property
    def mean(self):
        if self.alpha <= 1.0:
            return INFINITY
        # terms equal to one while c * k**-alpha >= 1
        k0 = int(math.floor(self.c ** (1.0 / self.alpha))) + 1
        head = float(k0 - 1)
        return head + self.c * float(zeta(self.alpha, k0))

    def _invert(self, u):
        t = np.power(self.c / u, 1.0 / self.alpha)
        n = np.ceil(t) - 1.0
        return np.minimum(n, 2.0**62)

    def label(self):
        if self.family == INVERSE_K:
            return "invk"
        return f"poly:{self.alpha:g}:{self.c:g}"


@dataclass(frozen=True)
class ExplicitLaw(TruncationLaw):
    """Finitely many survival values plus a tail rule.

    ``values[k] = S(k)`` for ``k <= L``.  Beyond ``L`` the survival function
    continues geometrically, ``S(k) = values[L] * tail_ratio**(k - L)``.  A
    ``tail_ratio`` of one keeps ``S`` constant, i.e. puts mass ``values[L]``
    at infinity.
    """

    values: tuple
    tail_ratio: float = 0.0
    family: str = field(default=EXPLICIT, init=False)

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or len(vals) == 0:
            raise ValueError("explicit law needs at least one survival value")
        if vals[0] != 1.0:
            raise ValueError("explicit law must have S(0) = 1")
        if np.any(np.diff(vals) > 0) or np.any(vals < 0):
            raise ValueError("survival values must be non-increasing and non-negative")
        if not 0.0 <= self.tail_ratio <= 1.0:
            raise ValueError("tail_ratio must lie in [0, 1]")
        object.__setattr__(self, "values", tuple(float(v) for v in vals))

    @property
    def _last(self):
        return len(self.values) - 1

    def survival_array(self, k):
        k = np.asarray(k, dtype=float)
        vals = np.asarray(self.values)
        L = self._last
        inside = np.clip(k, 0, L).astype(np.int64)
        beyond = np.maximum(k - L, 0.0)
        with np.errstate(invalid="ignore"):
            cont = vals[L] * np.power(self.tail_ratio, beyond)
        return np.where(k <= L, vals[inside], cont)

    @property
    def tail_mass_at_infinity(self):
        return self.values[-1] if self.tail_ratio == 1.0 else 0.0

    @property
    def mean(self):
        if self.tail_mass_at_infinity > 0:
            return INFINITY
        head = sum(self.values[1:])
        q = self.tail_ratio
        return head + self.values[-1] * q / (1.0 - q)

    def _invert(self, u):
        vals = np.asarray(self.values)
        L = self._last
        # values are non-increasing: count of entries >= u, minus one
        n = np.searchsorted(-vals, -u, side="right").astype(float) - 1.0
        deep = (u <= vals[L]) & (self.tail_ratio > 0) & (vals[L] > 0)
        if deep.any():
            extra = np.floor(np.log(u[deep] / vals[L]) / math.log(self.tail_ratio))
            n[deep] = L + np.minimum(extra, 2.0**62)
        return n

    def label(self):
        return "seq:" + ",".join(f"{v:g}" for v in self.values)


@dataclass(frozen=True)
class InfiniteLaw(TruncationLaw):
    """Point mass at infinity: ``S(k) = 1`` for every ``k``."""

    family: str = field(default=INFINITE, init=False)

    def survival_array(self, k):
        return np.ones_like(np.asarray(k, dtype=float))

    @property
    def tail_mass_at_infinity(self):
        return 1.0

    @property
    def mean(self):
        return INFINITY

    def _invert(self, u):  # pragma: no cover - every uniform maps to infinity
        return np.full_like(u, np.inf)

    def label(self):
        return "inf"


def geometric(ratio: float) -> GeometricLaw:
    return GeometricLaw(ratio)


def inverse_k() -> PolynomialLaw:
    return PolynomialLaw(1.0, 1.0)


def polynomial(alpha: float, c: float = 1.0) -> PolynomialLaw:
    return PolynomialLaw(alpha, c)


def explicit(values: Sequence[float], tail_ratio: Optional[float] = None) -> ExplicitLaw:
    """Explicit law; the tail ratio defaults to the last observed ratio."""
    values = [float(v) for v in values]
    if tail_ratio is None:
        if len(values) >= 2 and values[-2] > 0:
            tail_ratio = values[-1] / values[-2]
        else:
            tail_ratio = 1.0 if values[-1] > 0 else 0.0
    return ExplicitLaw(tuple(values), min(max(tail_ratio, 0.0), 1.0))


def infinite() -> InfiniteLaw:
    return InfiniteLaw()


def survival(law: TruncationLaw, k: int) -> float:
    return law.survival(k)


def sample(law: TruncationLaw, rng: np.random.Generator):
    """Draw one horizon; returns an ``int`` or ``INFINITY``."""
    n = law.sample(rng, 1)[0]
    return INFINITY if math.isinf(n) else int(n)


def optimal_truncation(tail_covariances, cost_weights=None, rtol=1e-12) -> ExplicitLaw:
    """Survival law minimizing the work-variance product.

    Sets ``S(k) = sqrt(v_k / v_0)``, or ``sqrt((v_k / c_k) / (v_0 / c_0))``
    when per-index cost weights are given (e.g. ``P(tau >= k)`` for
    regenerative couplings).  Only defined when that sequence is
    non-increasing; otherwise :class:`MonotonicityViolated` is raised.
    """
    v = np.asarray(tail_covariances, dtype=float)
    if v.ndim != 1 or len(v) == 0:
        raise ValueError("need a non-empty sequence of tail covariances")
    if not np.all(np.isfinite(v)):
        raise ValueError("tail covariances must be finite")
    if v[0] <= 0:
        raise ValueError("v_0 must be positive")
    if np.any(v < 0):
        raise ValueError("tail covariances must be non-negative for the square-root law")
    if cost_weights is not None:
        c = np.asarray(cost_weights, dtype=float)
        if c.shape != v.shape or np.any(c <= 0):
            raise ValueError("cost weights must be positive and match v in length")
        v = v / c
    s = np.sqrt(v / v[0])
    s[0] = 1.0
    bad = np.nonzero(s[1:] > s[:-1] * (1.0 + rtol))[0]
    if len(bad):
        k = int(bad[0]) + 1
        raise MonotonicityViolated(
            f"candidate survival increases at k={k}: {s[k - 1]:.6g} -> {s[k]:.6g}"
        )
    s = np.minimum.accumulate(s)
    return explicit(s)
