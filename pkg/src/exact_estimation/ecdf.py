"""Signed empirical measure and distribution-function estimator.

Replicate ``j`` contributes an atom ``(Y_0, +1/n)`` and, for each live
``k <= min(tau, N)``, a matched pair ``(Y_k, +1/(n S(k)))`` and
``(Y'_{k-1}, -1/(n S(k)))``.  The resulting ``F_n`` is an unbiased,
non-monotone estimator of the equilibrium CDF of ``Y = f(X)``; values
outside ``[0, 1]`` are legitimate and are never clamped.
"""

from __future__ import annotations

import warnings

import numpy as np

from .estimator import BATCH_SIZE, DeltaBatch, _weights, simulate_batch
from .truncation import TruncationLaw


class SignedEcdf:
    """Atoms ``(value, weight)`` of the signed measure for ``n`` replicates."""

    def __init__(self, replicate_count: int):
        if replicate_count < 1:
            raise ValueError("replicate_count must be positive")
        self.replicate_count = replicate_count
        self._values = []
        self._weights = []
        self._frozen = None
        self.heavy_tail_warning = False

    def _note_law(self, law):
        if law.tail_mass_at_infinity > 0:
            self.heavy_tail_warning = True

    def accumulate(self, values, prime_values, law: TruncationLaw) -> "SignedEcdf":
        """Add one replicate: ``values = Y_0..Y_K`` and ``prime_values = Y'_0..Y'_{K-1}``."""
        y = np.asarray(values, dtype=float)
        yp = np.asarray(prime_values, dtype=float)
        if len(yp) != len(y) - 1:
            raise ValueError("need one lagged value per k >= 1")
        w = _weights(law, np.arange(len(y))) / self.replicate_count
        self._note_law(law)
        self._values += [y, yp]
        self._weights += [w, -w[1:]]
        self._frozen = None
        return self

    def accumulate_batch(self, batch: DeltaBatch, law: TruncationLaw, limit=None) -> "SignedEcdf":
        """Add the first ``limit`` replicates of a batch (all by default).

        The row at which the chains couple carries no atoms, matching the
        zero difference that the estimator ``Z`` uses there.
        """
        use = batch.live.copy()
        if limit is not None:
            use &= batch.rep < limit
        k = batch.k[use]
        w = _weights(law, k) / self.replicate_count
        self._note_law(law)
        first = k == 0
        self._values += [batch.y[use], batch.y_prime[use][~first]]
        self._weights += [w, -w[~first]]
        self._frozen = None
        return self

    def _table(self):
        if self._frozen is None:
            if self._values:
                v = np.concatenate(self._values)
                w = np.concatenate(self._weights)
            else:
                v = w = np.zeros(0)
            order = np.argsort(v, kind="stable")
            v, w = v[order], w[order]
            xs, start = np.unique(v, return_index=True)
            jump = np.add.reduceat(w, start) if len(w) else np.zeros(0)
            self._frozen = (xs, np.cumsum(jump))
        return self._frozen

    @property
    def atoms(self):
        """Distinct atom positions and the net weight at each."""
        xs, cdf = self._table()
        return xs, np.diff(cdf, prepend=0.0)

    @property
    def total_mass(self) -> float:
        _, cdf = self._table()
        return float(cdf[-1]) if len(cdf) else 0.0

    def evaluate(self, x):
        """Right-continuous ``F_n(x)``: total weight at values ``<= x``."""
        xs, cdf = self._table()
        x = np.asarray(x, dtype=float)
        pos = np.searchsorted(xs, x, side="right")
        out = np.where(pos > 0, cdf[np.maximum(pos - 1, 0)] if len(cdf) else 0.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def left_limit(self, x):
        xs, cdf = self._table()
        x = np.asarray(x, dtype=float)
        pos = np.searchsorted(xs, x, side="left")
        out = np.where(pos > 0, cdf[np.maximum(pos - 1, 0)] if len(cdf) else 0.0, 0.0)
        return float(out) if out.ndim == 0 else out

    def mean(self) -> float:
        """``integral y pi_n(dy)``."""
        xs, jumps = self.atoms
        return float(np.sum(xs * jumps))

    def step_table(self):
        """Rows ``(x, F_n(x-), F_n(x))`` at every atom position."""
        xs, cdf = self._table()
        before = np.concatenate([[0.0], cdf[:-1]])
        return np.column_stack([xs, before, cdf])

    def sup_distance(self, reference) -> float:
        """``sup_x |F_n(x) - F(x)|`` for a reference CDF callable.

        Between consecutive atoms ``F_n`` is constant and ``F`` is monotone, so
        the supremum is attained at an atom or at the left limit of the next
        atom (approximated by the preceding floating-point number).
        """
        if self.heavy_tail_warning:
            warnings.warn(
                "truncation law has mass at infinity; uniform convergence of F_n "
                "relies on moments of min(tau, N)",
                RuntimeWarning,
                stacklevel=2,
            )
        xs, cdf = self._table()
        if len(xs) == 0:
            return 1.0
        ref_at = np.asarray(reference(xs), dtype=float)
        ref_left = np.asarray(reference(np.nextafter(xs, -np.inf)), dtype=float)
        before = np.concatenate([[0.0], cdf[:-1]])
        gaps = [
            np.abs(cdf - ref_at),
            np.abs(before - ref_left),
            np.array([abs(cdf[-1] - 1.0)]),
        ]
        return float(max(g.max() for g in gaps))


def accumulate(ecdf: SignedEcdf, values, prime_values, law) -> SignedEcdf:
    return ecdf.accumulate(values, prime_values, law)


def evaluate(ecdf: SignedEcdf, x):
    return ecdf.evaluate(x)


def sup_distance(ecdf: SignedEcdf, reference) -> float:
    return ecdf.sup_distance(reference)


def build_ecdf(source, n: int, law: TruncationLaw, seed: int = 0, batch_size=None) -> SignedEcdf:
    """``F_n`` from the first ``n`` replicates of a regenerative replicate source.

    Uses the same random-number addressing as the estimator runners, so the
    mean of the measure matches the estimator average for equal seeds.
    """
    batch_size = batch_size or BATCH_SIZE
    ecdf = SignedEcdf(n)
    remaining, index = n, 0
    while remaining > 0:
        batch = simulate_batch(source, law, seed, index, batch_size)
        ecdf.accumulate_batch(batch, law, limit=min(remaining, batch.size))
        remaining -= batch.size
        index += 1
    return ecdf
