"""Halpern-type string-averaging solvers for the best approximation problem.

Every algorithm here is one anchored step applied to a different inner map:

    x^{k+1} = lambda_k * u + (1 - lambda_k) * S_k(x^k)

where u is the anchor, (lambda_k) a steering sequence, and S_k one of

* a fixed weighted string average (static),
* a cyclic schedule of string averages (quasi-dynamic),
* an outer convex combination of several string averages (simultaneous),
* a plain convex combination of the operators (fully simultaneous),
* the full composition of all projections (Halpern-Wittman),
* a truncated countable string average with identity tail (infinite static /
  Combettes).

When the operator family is firmly nonexpansive with common fixed-point set
F and the steering conditions hold, the iterates converge strongly to
P_F(u), the point of F nearest the anchor.

Two engines produce identical plans: a compiled kernel (numba) for long runs
and a plain-numpy loop used as fallback and cross-check.  Variants that are
definitionally equal (for example fully-simultaneous versus static with
singleton strings) normalize to the same plan, so their traces match
bitwise within an engine.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import trace as trace_mod
from .operators import Operator, as_point
from .steering import HarmonicShifted, PowerLaw, SteeringSequence
from .strings import (
    CountableFamily,
    IndexOutOfRange,
    StringFamily,
    Truncation,
    truncated_average,
    validate_fit,
)
from .tolerances import MEMBERSHIP_TOL

try:
    from . import _kernels
except ImportError:  # numba missing: numpy engine only
    _kernels = None

__all__ = [
    "ProblemSpec",
    "AlgorithmVariant",
    "StaticSA",
    "QuasiDynamicSA",
    "SimultaneousSA",
    "FullySimultaneous",
    "StaticProjectionSA",
    "HalpernWittman",
    "InfiniteStaticSA",
    "CombettesSimultaneous",
    "UnfitFamily",
    "SolverError",
    "SolverRun",
    "halpern_step",
    "cyclic_index",
    "step_static",
    "step_quasi_dynamic",
    "step_simultaneous",
    "step_fully_simultaneous",
    "step_halpern_wittman",
    "step_infinite_static",
    "step_combettes",
    "run",
]


class UnfitFamily(ValueError):
    """A string family misses operator indices (its fixed-point identity fails)."""

    def __init__(self, missing: Sequence[int], operator_count: int):
        self.missing = list(missing)
        self.operator_count = int(operator_count)
        super().__init__(
            f"family is not fit for {operator_count} operators: "
            f"missing indices {self.missing}"
        )


class SolverError(RuntimeError):
    """A step failed mid-run; ``partial`` holds the trace recorded so far."""

    def __init__(self, message: str, partial: trace_mod.Trace | None = None):
        super().__init__(message)
        self.partial = partial


class ProblemSpec:
    """Operators (finite list or countable family), anchor u, optional x0.

    x0 defaults to the anchor.  ``witness`` is an optional certified point of
    the common fixed-point set F (test problems always carry one; the
    convergence theory assumes F is nonempty).
    """

    def __init__(
        self,
        operators: Sequence[Operator] | None = None,
        countable: CountableFamily | None = None,
        anchor=None,
        x0=None,
        witness=None,
        name: str | None = None,
    ):
        if (operators is None) == (countable is None):
            raise ValueError("provide exactly one of operators / countable")
        if operators is not None:
            operators = list(operators)
            if not operators:
                raise ValueError("operator family must be nonempty")
            for i, op in enumerate(operators):
                if not isinstance(op, Operator):
                    raise TypeError(f"operators[{i}] is not an Operator: {op!r}")
            dim = operators[0].dim
            for i, op in enumerate(operators):
                if op.dim != dim:
                    raise ValueError(
                        f"operators[{i}] has dim {op.dim}, expected {dim}"
                    )
        else:
            dim = countable.dim
        if anchor is None:
            raise ValueError("anchor u is required")
        self.operators = operators
        self.countable = countable
        self.dim = int(dim)
        self.anchor = as_point(anchor, dim=self.dim, name="anchor")
        self.x0 = None if x0 is None else as_point(x0, dim=self.dim, name="x0")
        self.witness = (
            None if witness is None else as_point(witness, dim=self.dim, name="witness")
        )
        self.name = name

    @property
    def is_countable(self) -> bool:
        return self.countable is not None

    @property
    def operator_count(self) -> int:
        if self.operators is None:
            raise ValueError("countable problems have no finite operator count")
        return len(self.operators)

    def start_point(self) -> np.ndarray:
        return (self.anchor if self.x0 is None else self.x0).copy()


def _check_weights(weights, what: str) -> tuple[float, ...]:
    weights = tuple(float(w) for w in weights)
    if not weights:
        raise ValueError(f"{what} must be nonempty")
    if any(w <= 0.0 for w in weights):
        raise ValueError(f"{what} must be strictly positive, got {weights}")
    total = 0.0
    for w in weights:
        total += w
    if abs(total - 1.0) > MEMBERSHIP_TOL:
        raise ValueError(f"{what} sum to {total!r}, expected 1 within {MEMBERSHIP_TOL}")
    return weights


class AlgorithmVariant:
    """Base class for the solver variants."""

    algorithm: str

    def describe(self) -> dict:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}()"


class StaticSA(AlgorithmVariant):
    """One fixed fit string family, averaged every step."""

    algorithm = "static"

    def __init__(self, family: StringFamily):
        if not isinstance(family, StringFamily):
            raise TypeError(f"family must be a StringFamily, got {family!r}")
        self.family = family

    def describe(self):
        return {"algorithm": self.algorithm, "family": self.family.describe()}


class StaticProjectionSA(StaticSA):
    """Static string averaging over projection operators only."""

    algorithm = "static-projection"


class QuasiDynamicSA(AlgorithmVariant):
    """A finite schedule of fit families applied cyclically (k mod size)."""

    algorithm = "quasi-dynamic"

    def __init__(self, schedule: Sequence[StringFamily]):
        schedule = tuple(schedule)
        if not schedule:
            raise ValueError("schedule must be nonempty")
        for i, sf in enumerate(schedule):
            if not isinstance(sf, StringFamily):
                raise TypeError(f"schedule[{i}] must be a StringFamily, got {sf!r}")
        self.schedule = schedule

    def describe(self):
        return {
            "algorithm": self.algorithm,
            "schedule": [sf.describe() for sf in self.schedule],
        }


class SimultaneousSA(AlgorithmVariant):
    """All schedule families applied every step, combined with outer weights."""

    algorithm = "simultaneous"

    def __init__(self, schedule: Sequence[StringFamily], outer_weights):
        schedule = tuple(schedule)
        if not schedule:
            raise ValueError("schedule must be nonempty")
        for i, sf in enumerate(schedule):
            if not isinstance(sf, StringFamily):
                raise TypeError(f"schedule[{i}] must be a StringFamily, got {sf!r}")
        outer = _check_weights(outer_weights, "outer weights")
        if len(outer) != len(schedule):
            raise ValueError(
                f"{len(schedule)} families but {len(outer)} outer weights"
            )
        self.schedule = schedule
        self.outer_weights = outer

    def describe(self):
        return {
            "algorithm": self.algorithm,
            "schedule": [sf.describe() for sf in self.schedule],
            "outer_weights": list(self.outer_weights),
        }


class FullySimultaneous(AlgorithmVariant):
    """Plain weighted average of the operators (singleton strings)."""

    algorithm = "fully-simultaneous"

    def __init__(self, weights):
        self.weights = _check_weights(weights, "weights")

    def describe(self):
        return {"algorithm": self.algorithm, "weights": list(self.weights)}


class HalpernWittman(AlgorithmVariant):
    """Full composition of all projections, lambda_k = 1/(k+1), x0 = u."""

    algorithm = "halpern-wittman"

    def describe(self):
        return {"algorithm": self.algorithm}


class InfiniteStaticSA(AlgorithmVariant):
    """Truncated countable string average with identity tail."""

    algorithm = "infinite-static"

    def describe(self):
        return {"algorithm": self.algorithm}


class CombettesSimultaneous(AlgorithmVariant):
    """Countable weighted operator average: singleton-string countable family."""

    algorithm = "combettes"

    def describe(self):
        return {"algorithm": self.algorithm}


# ---------------------------------------------------------------------------
# single-step reference forms


def halpern_step(u, lam: float, s_of_x) -> np.ndarray:
    """lam * u + (1 - lam) * s_of_x with lam in [0, 1]."""
    u = as_point(u, name="u")
    s = as_point(s_of_x, dim=u.size, name="s_of_x")
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must be in [0, 1], got {lam}")
    return lam * u + (1.0 - lam) * s


def cyclic_index(k: int, size: int) -> int:
    """1-based cyclic control: (k mod size) + 1."""
    if size < 1:
        raise ValueError(f"size must be >= 1, got {size}")
    if k < 0:
        raise ValueError(f"k must be >= 0, got {k}")
    return k % size + 1


def _string_image(operators, t, x) -> np.ndarray:
    y = x
    for i in t:
        if i < 1 or i > len(operators):
            raise IndexOutOfRange(i, len(operators))
        y = operators[i - 1].apply(y)
    return y


def _family_average(operators, family: StringFamily, x) -> np.ndarray:
    acc = np.zeros_like(x)
    for t, w in zip(family.strings, family.weights):
        acc = acc + w * _string_image(operators, t, x)
    return acc


def step_static(operators, family: StringFamily, u, steering: SteeringSequence,
                x, k: int) -> np.ndarray:
    x = as_point(x, name="x")
    return halpern_step(u, steering.value(k), _family_average(operators, family, x))


def step_quasi_dynamic(operators, schedule, u, steering: SteeringSequence,
                       x, k: int) -> np.ndarray:
    x = as_point(x, name="x")
    sf = schedule[cyclic_index(k, len(schedule)) - 1]
    return halpern_step(u, steering.value(k), _family_average(operators, sf, x))


def step_simultaneous(operators, schedule, outer_weights, u,
                      steering: SteeringSequence, x, k: int) -> np.ndarray:
    x = as_point(x, name="x")
    acc = np.zeros_like(x)
    for sf, ow in zip(schedule, outer_weights):
        acc = acc + float(ow) * _family_average(operators, sf, x)
    return halpern_step(u, steering.value(k), acc)


def step_fully_simultaneous(operators, weights, u, steering: SteeringSequence,
                            x, k: int) -> np.ndarray:
    x = as_point(x, name="x")
    acc = np.zeros_like(x)
    for op, w in zip(operators, weights):
        acc = acc + float(w) * op.apply(x)
    return halpern_step(u, steering.value(k), acc)


def step_halpern_wittman(operators, u, x, k: int) -> np.ndarray:
    """Composition of all operators, first index first; lambda_k = 1/(k+1)."""
    x = as_point(x, name="x")
    y = x
    for op in operators:
        y = op.apply(y)
    return halpern_step(u, 1.0 / (k + 1), y)


def step_infinite_static(countable: CountableFamily, u,
                         steering: SteeringSequence, x, k: int,
                         epsilon: float | None = None) -> np.ndarray:
    x = as_point(x, name="x")
    trunc = countable.truncate(epsilon)
    return halpern_step(u, steering.value(k), truncated_average(countable, trunc, x))


def step_combettes(countable: CountableFamily, u, steering: SteeringSequence,
                   x, k: int, epsilon: float | None = None) -> np.ndarray:
    if not countable.singleton_strings:
        raise ValueError(
            "the countable weighted-operator variant needs singleton strings"
        )
    return step_infinite_static(countable, u, steering, x, k, epsilon)


# ---------------------------------------------------------------------------
# normalized execution plan


@dataclass(frozen=True)
class _Plan:
    """Normalized form every variant lowers to (indices 0-based)."""

    operators: tuple
    families: tuple            # per family: tuple of strings (tuples of 0-based idx)
    weights: tuple             # per family: tuple of weights
    outer_weights: tuple
    simultaneous: bool
    tail_mass: float = 0.0
    epsilon: float | None = None
    truncation: Truncation | None = None


def _lower_family(family: StringFamily, m: int):
    missing = validate_fit(family, m)
    if missing:
        raise UnfitFamily(missing, m)
    if family.max_index > m:
        raise IndexOutOfRange(family.max_index, m)
    strings = tuple(tuple(i - 1 for i in t) for t in family.strings)
    return strings, family.weights


def _require_finite(problem: ProblemSpec, variant) -> list:
    if problem.is_countable:
        raise ValueError(
            f"variant {variant.algorithm!r} needs a finite operator family, "
            "not a countable one"
        )
    return problem.operators


def _require_projections(operators, algorithm: str):
    for i, op in enumerate(operators, start=1):
        if not op.is_projection:
            raise ValueError(
                f"{algorithm} requires projection operators; operator {i} "
                f"({op.kind}) is not one"
            )


def _lower_countable(problem: ProblemSpec, variant,
                     epsilon: float | None) -> _Plan:
    fam = problem.countable
    if fam is None:
        raise ValueError(
            f"variant {variant.algorithm!r} needs a countable family problem"
        )
    if isinstance(variant, CombettesSimultaneous) and not fam.singleton_strings:
        raise ValueError(
            "the countable weighted-operator variant needs singleton strings"
        )
    trunc = fam.truncate(epsilon)
    max_idx = max(max(t) for t in trunc.strings)
    operators = tuple(fam.operator(i) for i in range(1, max_idx + 1))
    strings = tuple(tuple(i - 1 for i in t) for t in trunc.strings)
    return _Plan(
        operators=operators,
        families=(strings,),
        weights=(trunc.weights,),
        outer_weights=(1.0,),
        simultaneous=False,
        tail_mass=trunc.tail_mass,
        epsilon=trunc.epsilon,
        truncation=trunc,
    )


def _build_plan(problem: ProblemSpec, variant: AlgorithmVariant,
                epsilon: float | None) -> _Plan:
    if isinstance(variant, (InfiniteStaticSA, CombettesSimultaneous)):
        return _lower_countable(problem, variant, epsilon)
    ops = _require_finite(problem, variant)
    m = len(ops)
    if isinstance(variant, StaticSA):  # covers StaticProjectionSA
        if isinstance(variant, StaticProjectionSA):
            _require_projections(ops, variant.algorithm)
        strings, weights = _lower_family(variant.family, m)
        return _Plan(tuple(ops), (strings,), (weights,), (1.0,), False)
    if isinstance(variant, QuasiDynamicSA):
        fams, wts = [], []
        for sf in variant.schedule:
            s, w = _lower_family(sf, m)
            fams.append(s)
            wts.append(w)
        ones = tuple(1.0 for _ in fams)
        return _Plan(tuple(ops), tuple(fams), tuple(wts), ones, False)
    if isinstance(variant, SimultaneousSA):
        fams, wts = [], []
        for sf in variant.schedule:
            s, w = _lower_family(sf, m)
            fams.append(s)
            wts.append(w)
        return _Plan(tuple(ops), tuple(fams), tuple(wts),
                     variant.outer_weights, True)
    if isinstance(variant, FullySimultaneous):
        if len(variant.weights) != m:
            raise ValueError(
                f"{m} operators but {len(variant.weights)} weights"
            )
        strings = tuple((i,) for i in range(m))
        return _Plan(tuple(ops), (strings,), (variant.weights,), (1.0,), False)
    if isinstance(variant, HalpernWittman):
        _require_projections(ops, variant.algorithm)
        return _Plan(tuple(ops), ((tuple(range(m)),),), ((1.0,),), (1.0,), False)
    raise TypeError(f"unknown variant: {variant!r}")


def _plan_arrays(plan: _Plan):
    str_w, flat_idx, str_off, fam_off = [], [], [0], [0]
    for strings, weights in zip(plan.families, plan.weights):
        for t, w in zip(strings, weights):
            str_w.append(w)
            flat_idx.extend(t)
            str_off.append(len(flat_idx))
        fam_off.append(len(str_w))
    return (
        np.array(str_w, dtype=np.float64),
        np.array(str_off, dtype=np.int64),
        np.array(flat_idx, dtype=np.int64),
        np.array(fam_off, dtype=np.int64),
        np.array(plan.outer_weights, dtype=np.float64),
    )


def _run_kernel(plan: _Plan, u, x0, lam, max_iter, rec_ks):
    table = _kernels.encode_operators(plan.operators)
    str_w, str_off, flat_idx, fam_off, outer_w = _plan_arrays(plan)
    xs, sn = _kernels.run_loop(
        table.op_kind, table.op_off, table.op_par,
        str_w, str_off, flat_idx, fam_off, outer_w,
        np.int64(1 if plan.simultaneous else 0),
        np.float64(plan.tail_mass),
        u, x0, lam, np.int64(max_iter), rec_ks, np.int64(table.tmp_size),
    )
    return rec_ks, xs, sn


def _run_numpy(plan: _Plan, u, x0, lam, max_iter, rec_ks,
               stop_step_norm: float | None = None):
    x = x0.copy()
    n_fam = len(plan.families)
    n_rec = rec_ks.size
    xs = np.empty((n_rec, x.size))
    sn = np.zeros(n_rec)
    ptr = 0
    if n_rec and rec_ks[0] == 0:
        xs[0] = x
        ptr = 1
    stopped_at = None
    last_step = 0.0
    try:
        for k in range(max_iter):
            if plan.simultaneous:
                acc = np.zeros_like(x)
                for f in range(n_fam):
                    s = np.zeros_like(x)
                    for t, w in zip(plan.families[f], plan.weights[f]):
                        y = x
                        for i in t:
                            y = plan.operators[i].apply(y)
                        s = s + w * y
                    acc = acc + plan.outer_weights[f] * s
            else:
                f = k % n_fam
                acc = np.zeros_like(x)
                for t, w in zip(plan.families[f], plan.weights[f]):
                    y = x
                    for i in t:
                        y = plan.operators[i].apply(y)
                    acc = acc + w * y
            if plan.tail_mass > 0.0:
                acc = acc + plan.tail_mass * x
            lk = lam[k]
            x_new = lk * u + (1.0 - lk) * acc
            d = x_new - x
            last_step = float(np.sqrt(d @ d))
            x = x_new
            if ptr < n_rec and rec_ks[ptr] == k + 1:
                xs[ptr] = x
                sn[ptr] = last_step
                ptr += 1
            if stop_step_norm is not None and last_step <= stop_step_norm:
                stopped_at = k + 1
                break
    except Exception as exc:
        partial = trace_mod.Trace(
            rec_ks[:ptr], lam[rec_ks[:ptr].clip(max=max_iter - 1)],
            sn[:ptr], np.full(ptr, np.nan), xs[:ptr],
        )
        raise SolverError(f"step failed at k={k}: {exc}", partial) from exc
    if stopped_at is None:
        return rec_ks, xs, sn
    keep = int(np.searchsorted(rec_ks[:ptr], stopped_at, side="right"))
    ks = rec_ks[:keep]
    xs = xs[:keep]
    sn = sn[:keep]
    if ks.size == 0 or ks[-1] != stopped_at:
        ks = np.append(ks, stopped_at)
        xs = np.vstack([xs, x[None, :]])
        sn = np.append(sn, last_step)
    return ks, xs, sn


@dataclass
class SolverRun:
    """Result of :func:`run`: the trace plus everything that produced it."""

    variant: AlgorithmVariant
    steering: SteeringSequence
    max_iter: int
    record_every: int
    trace: trace_mod.Trace
    truncation_epsilon: float | None = None
    tail_mass: float = 0.0
    engine: str = "kernel"
    problem_name: str | None = None

    @property
    def final_x(self) -> np.ndarray:
        return self.trace.final_x

    def metadata(self) -> dict:
        return {
            "variant": self.variant.describe(),
            "steering": self.steering.describe(),
            "max_iter": int(self.max_iter),
            "record_every": int(self.record_every),
            "epsilon": self.truncation_epsilon,
            "tail_mass": self.tail_mass if self.truncation_epsilon is not None else None,
            "engine": self.engine,
            "problem": self.problem_name,
        }


def _is_one_over_kplus1(steering: SteeringSequence) -> bool:
    if isinstance(steering, PowerLaw):
        return steering.c == 1.0 and steering.p == 1.0
    if isinstance(steering, HarmonicShifted):
        return steering.offset == 0
    return False


def run(
    problem: ProblemSpec,
    variant: AlgorithmVariant,
    steering: SteeringSequence | None = None,
    max_iter: int = 1000,
    record_every: int = 100,
    oracle=None,
    engine: str = "auto",
    epsilon: float | None = None,
    stop_step_norm: float | None = None,
) -> SolverRun:
    """Iterate the variant from x^0 for max_iter steps and record a trace.

    Rows are recorded at k = 0, every record_every-th step, and max_iter;
    ``oracle`` (a point) fills the oracle_dist column on recorded rows.
    ``engine`` is "auto" (compiled kernel when the operators support it),
    "kernel", or "numpy".  ``stop_step_norm`` enables the optional early stop
    on ||x^{k+1} - x^k||, off by default, and a caveat applies: steering
    drives a lambda_k-sized drift toward u, so a small step norm does not
    certify closeness to P_F(u).  Early stopping runs on the numpy engine.
    """
    if steering is None:
        steering = PowerLaw()
    if not isinstance(steering, SteeringSequence):
        raise TypeError(f"steering must be a SteeringSequence, got {steering!r}")
    if not steering.verified:
        raise ValueError(
            "steering sequence is not verified (out-of-range entries or "
            "unknown asymptotics); refusing to iterate with it"
        )
    max_iter = int(max_iter)
    if max_iter < 1:
        raise ValueError(f"max_iter must be >= 1, got {max_iter}")
    record_every = int(record_every)

    if isinstance(variant, HalpernWittman):
        if not _is_one_over_kplus1(steering):
            raise ValueError(
                "halpern-wittman fixes lambda_k = 1/(k+1); use the default "
                "steering or another variant"
            )
        if problem.x0 is not None and not np.array_equal(problem.x0, problem.anchor):
            raise ValueError("halpern-wittman requires x0 = u (the anchor)")

    plan = _build_plan(problem, variant, epsilon)
    u = problem.anchor
    x0 = problem.start_point()
    lam = steering.values(max_iter)
    rec_ks = trace_mod.record_grid(max_iter, record_every)

    if engine not in ("auto", "kernel", "numpy"):
        raise ValueError(f"engine must be auto|kernel|numpy, got {engine!r}")
    use = engine
    if use == "auto":
        if _kernels is None or stop_step_norm is not None:
            use = "numpy"
        else:
            try:
                _kernels.encode_operators(plan.operators)
                use = "kernel"
            except _kernels.KernelUnsupported:
                use = "numpy"
    if use == "kernel":
        if _kernels is None:
            raise RuntimeError("compiled kernel unavailable (numba not importable)")
        if stop_step_norm is not None:
            raise ValueError("step-norm stopping runs on the numpy engine only")
        ks, xs, sn = _run_kernel(plan, u, x0, lam, max_iter, rec_ks)
    else:
        ks, xs, sn = _run_numpy(plan, u, x0, lam, max_iter, rec_ks, stop_step_norm)

    dists = np.full(ks.size, np.nan)
    if oracle is not None:
        oracle = as_point(oracle, dim=problem.dim, name="oracle")
        dists = np.linalg.norm(xs - oracle, axis=1)

    tr = trace_mod.Trace(ks, steering.values(int(ks[-1]) + 1)[ks], sn, dists, xs)
    result = SolverRun(
        variant=variant,
        steering=steering,
        max_iter=max_iter,
        record_every=record_every,
        trace=tr,
        truncation_epsilon=plan.epsilon,
        tail_mass=plan.tail_mass,
        engine=use,
        problem_name=problem.name,
    )
    tr.metadata = result.metadata()
    return result
