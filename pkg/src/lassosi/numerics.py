"""Dense linear-algebra and truncated-Gaussian primitives.

Everything here is pure: no shared mutable state, safe to call from any
number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.special import erf, erfc, log_ndtr

from .errors import DegenerateSupport, SingularMatrix

#: Gap below which adjacent intervals are fused during normalization.
#: Consecutive homotopy segments that share an active set meet at exactly
#: equal endpoints, so any positive tolerance fuses them; 1e-10 also mops
#: up round-off from independently computed boundaries.
MERGE_TOL = 1e-10

#: Relative Cholesky pivot threshold signalling a non-general-position design.
SPD_PIVOT_RTOL = 1e-12

_NEG_INF = float("-inf")
_INF = float("inf")


class IntervalUnion:
    """A finite union of disjoint intervals on the extended real line.

    Construction normalizes: drops empty intervals, sorts, and merges any
    pair separated by a gap <= ``merge_tol``. Normalization is idempotent.
    """

    __slots__ = ("intervals",)

    def __init__(self, intervals=(), merge_tol=MERGE_TOL):
        merged: list[list[float]] = []
        for lo, hi in sorted((float(l), float(h)) for l, h in intervals):
            if not hi > lo:
                continue
            if merged and lo - merged[-1][1] <= merge_tol:
                if hi > merged[-1][1]:
                    merged[-1][1] = hi
            else:
                merged.append([lo, hi])
        self.intervals: tuple[tuple[float, float], ...] = tuple(
            (lo, hi) for lo, hi in merged
        )

    @classmethod
    def full(cls) -> "IntervalUnion":
        return cls([(_NEG_INF, _INF)])

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls()

    @property
    def is_empty(self) -> bool:
        return not self.intervals

    @property
    def lower(self) -> float:
        return self.intervals[0][0] if self.intervals else _INF

    @property
    def upper(self) -> float:
        return self.intervals[-1][1] if self.intervals else _NEG_INF

    def contains(self, x: float, atol: float = 0.0) -> bool:
        return any(lo - atol <= x <= hi + atol for lo, hi in self.intervals)

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        a, b = self.intervals, other.intervals
        i = j = 0
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if hi > lo:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalUnion(out)

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion(self.intervals + other.intervals)

    def total_length(self) -> float:
        return sum(hi - lo for lo, hi in self.intervals)

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __eq__(self, other):
        return isinstance(other, IntervalUnion) and self.intervals == other.intervals

    def __hash__(self):
        return hash(self.intervals)

    def __repr__(self):
        body = ", ".join(f"[{lo:.6g}, {hi:.6g}]" for lo, hi in self.intervals)
        return f"IntervalUnion({body})"


@dataclass(frozen=True)
class TruncatedNormal:
    """Normal(mean, variance) restricted to ``support``."""

    mean: float
    variance: float
    support: IntervalUnion = field(default_factory=IntervalUnion.full)

    def __post_init__(self):
        if not self.variance > 0.0:
            raise ValueError(f"variance must be positive, got {self.variance}")
        if self.support.is_empty:
            raise DegenerateSupport("empty truncation support")


def solve_spd(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for symmetric positive-definite A.

    Raises SingularMatrix when factorization fails or a pivot falls below
    ``SPD_PIVOT_RTOL * max(diag(A))`` — the numerical symptom of a design
    that is not in general position.
    """
    return spd_factor(A).solve(B)


class spd_factor:
    """Reusable Cholesky factorization with a pivot-threshold check."""

    __slots__ = ("_chol",)

    def __init__(self, A: np.ndarray):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        try:
            L = scipy.linalg.cholesky(A, lower=True, check_finite=False)
        except scipy.linalg.LinAlgError as exc:
            raise SingularMatrix(str(exc)) from exc
        d = np.diagonal(L)
        thresh = SPD_PIVOT_RTOL * max(np.max(np.diagonal(A)), 0.0)
        if np.min(d * d) < thresh:
            raise SingularMatrix(
                f"Cholesky pivot {np.min(d * d):.3e} below {thresh:.3e}"
            )
        self._chol = L

    def solve(self, B: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve(
            (self._chol, True), np.asarray(B, dtype=float), check_finite=False
        )


_SQRT2 = math.sqrt(2.0)


def std_normal_cdf(x):
    """Standard normal CDF via the complementary error function."""
    return 0.5 * erfc(-np.asarray(x, dtype=float) / _SQRT2)


def _log_diff(la: float, lb: float) -> float:
    """log(exp(la) - exp(lb)) for la >= lb."""
    if lb == _NEG_INF:
        return la
    d = lb - la
    if d >= 0.0:
        return _NEG_INF
    return la + math.log1p(-math.exp(d))


def _log_gauss_mass(lo: float, hi: float) -> float:
    """log of the standard-normal mass on [lo, hi], stable in both tails."""
    if not hi > lo:
        return _NEG_INF
    if lo >= 0.0:
        # Upper tail: difference of complementary CDFs.
        return _log_diff(log_ndtr(-lo), log_ndtr(-hi))
    if hi <= 0.0:
        return _log_diff(log_ndtr(hi), log_ndtr(lo))
    # Straddles zero: split at the mode, both halves add without cancellation.
    mass = 0.5 * (erf(hi / _SQRT2) + erf(-lo / _SQRT2))
    return math.log(mass) if mass > 0.0 else _NEG_INF


def _logsumexp(parts: list[float]) -> float:
    m = max(parts, default=_NEG_INF)
    if m == _NEG_INF:
        return _NEG_INF
    return m + math.log(sum(math.exp(v - m) for v in parts))


def truncnorm_cdf(dist: TruncatedNormal, x: float) -> float:
    """CDF of a truncated normal, computed in log space.

    Far-tail supports (standardized bounds of tens of sigmas and beyond)
    stay well-defined because interval masses are only ever combined as
    log-space sums and a final ratio.
    """
    sd = math.sqrt(dist.variance)
    mean = dist.mean
    den_parts = []
    num_parts = []
    xi = (x - mean) / sd
    for lo, hi in dist.support:
        a = (lo - mean) / sd
        b = (hi - mean) / sd
        den_parts.append(_log_gauss_mass(a, b))
        if xi > a:
            num_parts.append(_log_gauss_mass(a, min(b, xi)))
    log_den = _logsumexp(den_parts)
    if log_den == _NEG_INF or math.isnan(log_den):
        raise DegenerateSupport(
            "truncation support carries no representable Gaussian mass"
        )
    log_num = _logsumexp(num_parts)
    if log_num == _NEG_INF:
        return 0.0
    return min(1.0, math.exp(log_num - log_den))
