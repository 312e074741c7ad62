"""Steering sequences for Halpern-type anchored iterations.

A steering sequence is (lambda_k) with lambda_k in [0, 1], lambda_k -> 0,
sum lambda_k = inf, and sum |lambda_{k+1} - lambda_k| < inf.  The last three
conditions are asymptotic and cannot be decided from any finite prefix, so
this module pairs two mechanisms:

* a ``verified`` flag that only the built-in families set, certifying the
  asymptotic conditions analytically, and
* :func:`validate_prefix`, which checks what a finite window can check
  (range, growth of partial sums, total variation against the family's
  closed-form bound).

Built-in families: :class:`PowerLaw` (lambda_k = c/(k+1)^p, the default being
c=1, p=1), :class:`HarmonicShifted` (1/(k+1+offset)), and :class:`UserTable`
(an explicit finite prefix followed by a verified tail family).  Constant
sequences are not constructible: all-zero and all-one steering is useless
(the iteration either ignores the anchor or never leaves it), and the
parameter ranges rule both out.

``values(count)`` is the canonical evaluation used by the solver engines;
``value(k)`` is the scalar convenience form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tolerances import PROPERTY_SLACK

__all__ = [
    "SteeringSequence",
    "PowerLaw",
    "HarmonicShifted",
    "UserTable",
    "lambda_value",
    "PrefixReport",
    "validate_prefix",
]


class SteeringSequence:
    """Base for steering-coefficient families.

    ``verified`` is True only when the asymptotic steering conditions hold
    analytically for the family; it is never inferred from data.
    """

    verified: bool = False

    def value(self, k: int) -> float:
        raise NotImplementedError

    def values(self, count: int) -> np.ndarray:
        """lambda_0 .. lambda_{count-1} as a float64 array (canonical for runs)."""
        raise NotImplementedError

    def variation_bound(self) -> float | None:
        """Closed-form upper bound on sum_k |lambda_{k+1} - lambda_k|, if known."""
        return None

    def describe(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in self.describe().items() if k != "family")
        return f"{type(self).__name__}({inner})"


class PowerLaw(SteeringSequence):
    """lambda_k = c / (k+1)^p with c in (0,1], p in (0,1].

    In [0,1] termwise, decreasing to 0; the sum diverges for p <= 1, and the
    differences telescope so their absolute sum is exactly c.  All steering
    conditions hold analytically.
    """

    verified = True

    def __init__(self, c: float = 1.0, p: float = 1.0):
        c = float(c)
        p = float(p)
        if not 0.0 < c <= 1.0:
            raise ValueError(f"c must be in (0, 1], got {c}")
        if not 0.0 < p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {p}")
        self.c = c
        self.p = p

    def value(self, k: int) -> float:
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")
        # same ufunc as values(): scalar and vector forms agree bitwise
        denom = np.float64(k + 1)
        if self.p != 1.0:
            denom = np.power(denom, np.float64(self.p))
        return float(self.c / denom)

    def values(self, count: int) -> np.ndarray:
        denom = np.arange(1, count + 1, dtype=np.float64)
        if self.p != 1.0:
            denom = np.power(denom, np.float64(self.p))
        return self.c / denom

    def variation_bound(self) -> float:
        # Monotone decreasing: total variation = lambda_0 - 0 = c.
        return self.c

    def describe(self) -> dict:
        return {"family": "power-law", "c": self.c, "p": self.p}


class HarmonicShifted(SteeringSequence):
    """lambda_k = 1 / (k + 1 + offset) for a nonnegative integer offset."""

    verified = True

    def __init__(self, offset: int = 0):
        offset = int(offset)
        if offset < 0:
            raise ValueError(f"offset must be >= 0, got {offset}")
        self.offset = offset

    def value(self, k: int) -> float:
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")
        return 1.0 / float(k + 1 + self.offset)

    def values(self, count: int) -> np.ndarray:
        return 1.0 / np.arange(1 + self.offset, count + 1 + self.offset, dtype=np.float64)

    def variation_bound(self) -> float:
        return 1.0 / (1.0 + self.offset)

    def describe(self) -> dict:
        return {"family": "harmonic-shifted", "offset": self.offset}


class UserTable(SteeringSequence):
    """Explicit finite prefix, then a verified tail family (re-indexed from 0).

    Out-of-range prefix entries are accepted at construction so that
    :func:`validate_prefix` can report them; they clear ``verified``.  The
    asymptotic conditions are inherited from the tail family, so the sequence
    is verified exactly when the prefix is in range and the tail is verified.
    """

    def __init__(self, values: Sequence[float], then_family: PowerLaw | None = None):
        if then_family is None:
            then_family = PowerLaw()
        if not isinstance(then_family, SteeringSequence):
            raise TypeError(f"then_family must be a steering family, got {then_family!r}")
        prefix = np.asarray(list(values), dtype=np.float64)
        if prefix.ndim != 1:
            raise ValueError("values must be a flat list of reals")
        if prefix.size and not np.all(np.isfinite(prefix)):
            raise ValueError("values must be finite")
        self.prefix = prefix
        self.then_family = then_family
        in_range = bool(np.all((prefix >= 0.0) & (prefix <= 1.0)))
        self.verified = in_range and then_family.verified

    def value(self, k: int) -> float:
        if k < 0:
            raise ValueError(f"k must be >= 0, got {k}")
        n = self.prefix.size
        if k < n:
            return float(self.prefix[k])
        return self.then_family.value(k - n)

    def values(self, count: int) -> np.ndarray:
        n = self.prefix.size
        if count <= n:
            return self.prefix[:count].copy()
        return np.concatenate([self.prefix, self.then_family.values(count - n)])

    def variation_bound(self) -> float | None:
        tail = self.then_family.variation_bound()
        if tail is None:
            return None
        bound = tail
        if self.prefix.size:
            bound += float(np.sum(np.abs(np.diff(self.prefix))))
            bound += abs(self.then_family.value(0) - float(self.prefix[-1]))
        return bound

    def describe(self) -> dict:
        return {
            "family": "user-table",
            "values": [float(v) for v in self.prefix],
            "then": self.then_family.describe(),
        }


def lambda_value(seq: SteeringSequence, k: int) -> float:
    """lambda_k for the sequence (scalar form of ``seq.value``)."""
    return seq.value(k)


@dataclass(frozen=True)
class PrefixReport:
    """What a finite window of a steering sequence can certify."""

    k_checked: int
    range_ok: bool
    first_range_violation: int | None
    divergence_ok: bool
    partial_sum: float
    summability_ok: bool
    variation: float
    variation_bound: float | None
    verified: bool

    @property
    def ok(self) -> bool:
        return self.range_ok and self.divergence_ok and self.summability_ok

    def lines(self) -> list[str]:
        out = []
        if self.range_ok:
            out.append(f"range [0,1] on k<{self.k_checked}: pass")
        else:
            out.append(
                f"range [0,1] on k<{self.k_checked}: FAIL "
                f"(first violation at k={self.first_range_violation})"
            )
        out.append(
            f"partial sum growth: {'pass' if self.divergence_ok else 'FAIL'} "
            f"(sum over window = {self.partial_sum:.6g})"
        )
        if self.variation_bound is None:
            out.append(
                f"total variation: pass (measured {self.variation:.6g}; "
                "no closed-form bound for this family)"
            )
        else:
            out.append(
                f"total variation: {'pass' if self.summability_ok else 'FAIL'} "
                f"(measured {self.variation:.6g} vs bound {self.variation_bound:.6g})"
            )
        out.append(f"asymptotic conditions analytically verified: {self.verified}")
        return out


def validate_prefix(seq: SteeringSequence, K: int) -> PrefixReport:
    """Check the first K terms: range, growing partial sums, total variation.

    Range is checked pointwise.  Divergence cannot be decided from a prefix,
    so the proxy is that the partial sum still grows over the second half of
    the window (finitely many zeros are fine; a sequence that flatlines
    fails).  Total variation over the window is compared with the family's
    closed-form bound when one exists.
    """
    K = int(K)
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    vals = seq.values(K)

    bad = np.flatnonzero((vals < 0.0) | (vals > 1.0))
    range_ok = bad.size == 0
    first_bad = None if range_ok else int(bad[0])

    partial = float(np.sum(vals))
    second_half = float(np.sum(vals[K // 2:]))
    divergence_ok = second_half > 0.0

    variation = float(np.sum(np.abs(np.diff(vals))))
    bound = seq.variation_bound()
    summability_ok = bound is None or variation <= bound + PROPERTY_SLACK

    return PrefixReport(
        k_checked=K,
        range_ok=range_ok,
        first_range_violation=first_bad,
        divergence_ok=divergence_ok,
        partial_sum=partial,
        summability_ok=summability_ok,
        variation=variation,
        variation_bound=bound,
        verified=seq.verified,
    )
