"""Index strings, weighted string families, and countable families.

A *string* is a nonempty tuple of 1-based operator indices ``(t_1, ..., t_q)``;
the string operator applies ``T_{t_1}`` first and ``T_{t_q}`` last.  A
:class:`StringFamily` pairs finitely many distinct strings with strictly
positive weights summing to one; averaging the string operators with those
weights gives the map driven by the solvers.  A family is *fit* for ``m``
operators when every index ``1..m`` appears in at least one string; fitness is
what makes the average's fixed-point set equal the intersection of the
operators' fixed-point sets.

:class:`CountableFamily` covers countably many strings through generator
callables with a certified tail bound.  Truncating at ``epsilon`` keeps the
first ``N`` strings and completes the lost tail mass ``rho_N`` with the
identity operator, so the implemented average ``sum_{r<=N} w_r T[t_r] + rho_N I``
still has total weight one and stays nonexpansive; ``rho_N`` is recorded in
run metadata.  The identity-tail average differs from the exact series by at
most about ``2*epsilon*(||x|| + B)`` per evaluation, with ``B`` a bound on the
string images.

Everything here is immutable; summation is in fixed list order so traces are
bit-reproducible (per-string terms could be evaluated concurrently, but the
reduction order must stay the list order).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .operators import Operator
from .tolerances import MEMBERSHIP_TOL

__all__ = [
    "IndexOutOfRange",
    "StringFamily",
    "apply_string",
    "string_average",
    "validate_fit",
    "FamilyBounds",
    "BoundsViolation",
    "BoundsReport",
    "check_bounds",
    "CountableFamily",
    "Truncation",
    "truncate",
    "truncated_average",
]


class IndexOutOfRange(ValueError):
    """A string references an operator index outside the bound family."""

    def __init__(self, index: int, count: int):
        self.index = int(index)
        self.count = int(count)
        super().__init__(
            f"string index {self.index} is out of range for {self.count} operators "
            f"(valid: 1..{self.count})"
        )


def _as_string(t) -> tuple[int, ...]:
    t = tuple(int(i) for i in t)
    if not t:
        raise ValueError("strings must be nonempty")
    if any(i < 1 for i in t):
        raise ValueError(f"string indices are 1-based positive integers, got {t}")
    return t


@dataclass(frozen=True)
class StringFamily:
    """Finitely many distinct index strings with positive weights summing to 1."""

    strings: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        strings = tuple(_as_string(t) for t in self.strings)
        weights = tuple(float(w) for w in self.weights)
        if not strings:
            raise ValueError("a string family needs at least one string")
        if len(strings) != len(weights):
            raise ValueError(
                f"{len(strings)} strings but {len(weights)} weights"
            )
        if len(set(strings)) != len(strings):
            raise ValueError("duplicate strings are not allowed")
        if any(w <= 0.0 for w in weights):
            raise ValueError(f"weights must be strictly positive, got {weights}")
        total = 0.0
        for w in weights:
            total += w
        if abs(total - 1.0) > MEMBERSHIP_TOL:
            # No silent renormalization: a bad sum is a config bug.
            raise ValueError(f"weights sum to {total!r}, expected 1 within {MEMBERSHIP_TOL}")
        object.__setattr__(self, "strings", strings)
        object.__setattr__(self, "weights", weights)

    @property
    def max_index(self) -> int:
        return max(max(t) for t in self.strings)

    @staticmethod
    def singletons(weights: Sequence[float]) -> "StringFamily":
        """The family {(1), (2), ..., (m)} with the given weights."""
        return StringFamily(
            tuple((i,) for i in range(1, len(tuple(weights)) + 1)),
            tuple(weights),
        )

    @staticmethod
    def single_string(m: int) -> "StringFamily":
        """The family holding only (1, 2, ..., m) with weight one."""
        return StringFamily(((tuple(range(1, m + 1))),), (1.0,))

    def describe(self) -> list[dict]:
        return [
            {"indices": list(t), "weight": w}
            for t, w in zip(self.strings, self.weights)
        ]


def apply_string(operators: Sequence[Operator], t, x) -> np.ndarray:
    """Apply the string operator for ``t``: T_{t_1} first, T_{t_q} last."""
    t = _as_string(t)
    m = len(operators)
    y = np.asarray(x, dtype=float)
    for i in t:
        if i > m:
            raise IndexOutOfRange(i, m)
        y = operators[i - 1].apply(y)
    return y


def string_average(operators: Sequence[Operator], family: StringFamily, x) -> np.ndarray:
    """sum_t w(t) * T[t](x), summed in the family's list order."""
    return _weighted_strings(operators, family.strings, family.weights, x)


def _weighted_strings(operators, strings, weights, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    acc = None
    for t, w in zip(strings, weights):
        term = w * apply_string(operators, t, x)
        acc = term if acc is None else acc + term
    return acc


def validate_fit(family: StringFamily, operator_count: int) -> list[int]:
    """Indices in 1..operator_count missing from every string (empty iff fit)."""
    if operator_count < 1:
        raise ValueError(f"operator_count must be >= 1, got {operator_count}")
    seen: set[int] = set()
    for t in family.strings:
        seen.update(t)
    return [i for i in range(1, operator_count + 1) if i not in seen]


@dataclass(frozen=True)
class FamilyBounds:
    """Admissibility bounds: weights >= min_weight, lengths <= max_length.

    min_weight must lie in (0, 1/operator_count) and max_length must be at
    least operator_count, so that bounded fit families exist.
    """

    min_weight: float
    max_length: int
    operator_count: int

    def __post_init__(self):
        m = int(self.operator_count)
        if m < 1:
            raise ValueError(f"operator_count must be >= 1, got {m}")
        w = float(self.min_weight)
        if not 0.0 < w < 1.0 / m:
            raise ValueError(
                f"min_weight must be in (0, 1/{m}) = (0, {1.0 / m}), got {w}"
            )
        q = int(self.max_length)
        if q < m:
            raise ValueError(
                f"max_length must be >= operator_count ({m}), got {q}"
            )
        object.__setattr__(self, "min_weight", w)
        object.__setattr__(self, "max_length", q)
        object.__setattr__(self, "operator_count", m)


@dataclass(frozen=True)
class BoundsViolation:
    string: tuple[int, ...]
    length: int
    weight: float
    reason: str


@dataclass(frozen=True)
class BoundsReport:
    ok: bool
    violations: tuple[BoundsViolation, ...] = field(default_factory=tuple)


def check_bounds(family: StringFamily, bounds: FamilyBounds) -> BoundsReport:
    """Check every string length <= max_length and weight >= min_weight."""
    violations = []
    for t, w in zip(family.strings, family.weights):
        if len(t) > bounds.max_length:
            violations.append(
                BoundsViolation(t, len(t), w,
                                f"length {len(t)} > max_length {bounds.max_length}")
            )
        if w < bounds.min_weight:
            violations.append(
                BoundsViolation(t, len(t), w,
                                f"weight {w} < min_weight {bounds.min_weight}")
            )
    return BoundsReport(ok=not violations, violations=tuple(violations))


@dataclass(frozen=True)
class Truncation:
    """The retained prefix of a countable family plus its identity tail mass."""

    strings: tuple[tuple[int, ...], ...]
    weights: tuple[float, ...]
    tail_mass: float
    epsilon: float

    @property
    def n_strings(self) -> int:
        return len(self.strings)


class CountableFamily:
    """A countable weighted string family with a certified tail bound.

    ``operator_gen(i)`` returns the i-th operator (1-based), ``string_gen(r)``
    the r-th (string, weight) pair, and ``tail_bound(epsilon)`` an N with
    ``sum_{r>N} w_r <= epsilon``.  Weights must lie strictly inside (0, 1) and
    sum to one analytically, which is why families are built through
    constructors that certify the tail (built-in: geometric weights).  Fitness
    over the countable index set cannot be checked exhaustively at runtime;
    the built-in constructors document it and user generators are flagged
    "asserted by user".
    """

    def __init__(
        self,
        operator_gen: Callable[[int], Operator],
        string_gen: Callable[[int], tuple[tuple[int, ...], float]],
        tail_bound: Callable[[float], int],
        epsilon: float,
        dim: int,
        fitness: str = "asserted by user",
        singleton_strings: bool = False,
        descriptor: dict | None = None,
    ):
        if not 0.0 < float(epsilon) < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {epsilon}")
        self.operator_gen = operator_gen
        self.string_gen = string_gen
        self.tail_bound = tail_bound
        self.epsilon = float(epsilon)
        self.dim = int(dim)
        self.fitness = str(fitness)
        self.singleton_strings = bool(singleton_strings)
        self.descriptor = descriptor
        self._op_cache: dict[int, Operator] = {}

    def operator(self, i: int) -> Operator:
        op = self._op_cache.get(i)
        if op is None:
            if i < 1:
                raise IndexOutOfRange(i, 0)
            op = self.operator_gen(i)
            if op.dim != self.dim:
                raise ValueError(
                    f"operator_gen({i}) has dim {op.dim}, family dim is {self.dim}"
                )
            self._op_cache[i] = op
        return op

    def string(self, r: int) -> tuple[tuple[int, ...], float]:
        t, w = self.string_gen(r)
        t = _as_string(t)
        w = float(w)
        if not 0.0 < w < 1.0:
            raise ValueError(
                f"countable-family weights must lie in (0, 1), string {r} has {w}"
            )
        return t, w

    def truncate(self, epsilon: float | None = None) -> Truncation:
        """Keep the first N = tail_bound(epsilon) strings; identity gets rho_N.

        N comes from the certified tail bound; if float summation leaves
        rho_N above epsilon by rounding dust, further strings are retained
        until rho_N <= epsilon.
        """
        eps = self.epsilon if epsilon is None else float(epsilon)
        if not 0.0 < eps < 1.0:
            raise ValueError(f"epsilon must be in (0, 1), got {eps}")
        n = int(self.tail_bound(eps))
        if n < 1:
            n = 1
        strings = []
        weights = []
        total = 0.0
        for r in range(1, n + 1):
            t, w = self.string(r)
            strings.append(t)
            weights.append(w)
            total += w
        while 1.0 - total > eps:
            r = len(strings) + 1
            t, w = self.string(r)
            strings.append(t)
            weights.append(w)
            total += w
        return Truncation(tuple(strings), tuple(weights), 1.0 - total, eps)

    def describe(self) -> dict:
        if self.descriptor is not None:
            return dict(self.descriptor)
        return {
            "kind": "custom",
            "fitness": self.fitness,
            "epsilon": self.epsilon,
            "dim": self.dim,
        }

    @staticmethod
    def geometric_singletons(
        operator_gen: Callable[[int], Operator],
        ratio: float,
        epsilon: float,
        dim: int,
        descriptor: dict | None = None,
    ) -> "CountableFamily":
        """Singleton strings (r,) with weights (1-ratio)*ratio^(r-1).

        The weights sum to one analytically, the tail after N is ratio^N
        (closed form, certified), and fitness holds because string r covers
        operator r.
        """
        ratio = float(ratio)
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio must be in (0, 1), got {ratio}")

        def string_gen(r: int):
            return (r,), (1.0 - ratio) * ratio ** (r - 1)

        return CountableFamily(
            operator_gen,
            string_gen,
            _geometric_tail_bound(ratio),
            epsilon,
            dim,
            fitness="certified: string r covers operator r",
            singleton_strings=True,
            descriptor=descriptor,
        )

    @staticmethod
    def geometric_strings(
        indices_gen: Callable[[int], Sequence[int]],
        operator_gen: Callable[[int], Operator],
        ratio: float,
        epsilon: float,
        dim: int,
        fitness: str = "asserted by user",
        descriptor: dict | None = None,
    ) -> "CountableFamily":
        """Geometric weights over a user-supplied string generator.

        The tail bound is still certified (it only depends on the weights);
        fitness of the generated strings is the caller's assertion unless a
        stronger note is passed.
        """
        ratio = float(ratio)
        if not 0.0 < ratio < 1.0:
            raise ValueError(f"ratio must be in (0, 1), got {ratio}")

        def string_gen(r: int):
            return tuple(indices_gen(r)), (1.0 - ratio) * ratio ** (r - 1)

        return CountableFamily(
            operator_gen,
            string_gen,
            _geometric_tail_bound(ratio),
            epsilon,
            dim,
            fitness=fitness,
            singleton_strings=False,
            descriptor=descriptor,
        )


def _geometric_tail_bound(ratio: float) -> Callable[[float], int]:
    """Minimal N with ratio^N <= epsilon, decided by the direct predicate.

    The log-ratio formula alone is off-by-one prone when epsilon is an exact
    power of ratio, so the candidate is corrected against ratio**N directly.
    """

    def tail_bound(epsilon: float) -> int:
        n = max(1, int(np.ceil(np.log(epsilon) / np.log(ratio))))
        while ratio ** n > epsilon:
            n += 1
        while n > 1 and ratio ** (n - 1) <= epsilon:
            n -= 1
        return n

    return tail_bound


def truncate(family: CountableFamily, epsilon: float | None = None) -> Truncation:
    """Function form of :meth:`CountableFamily.truncate`."""
    return family.truncate(epsilon)


def truncated_average(family: CountableFamily, trunc: Truncation, x) -> np.ndarray:
    """sum_{r<=N} w_r T[t_r](x) + rho_N * x  (identity-completed tail)."""
    x = np.asarray(x, dtype=float)
    acc = None
    for t, w in zip(trunc.strings, trunc.weights):
        y = x
        for i in t:
            y = family.operator(i).apply(y)
        term = w * y
        acc = term if acc is None else acc + term
    tail = trunc.tail_mass * x
    return tail if acc is None else acc + tail
