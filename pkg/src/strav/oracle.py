"""Independent ground truth for best-approximation solutions.

Two oracles for the nearest point to an anchor in a feasible set, built to be
auditable rather than fast:

* :func:`kkt_project`: exhaustive active-set enumeration for polyhedral /
  affine sets at desk scale (dimension <= 6, at most 12 inequalities, so at
  most 2^12 candidate active sets).  Every subset of the inequalities is
  treated as a candidate active set, the equality-constrained least-distance
  problem is solved in closed form through the normal equations, and the
  feasible candidate with nonnegative inequality multipliers and minimal
  distance wins.  The minimizer is unique by strict convexity of the
  objective, so the search is exact.
* :func:`grid_project`: brute force over a bounded grid, dimension <= 3.
  Accepts either a :class:`PolyhedralSpec` or an arbitrary feasibility
  predicate, which is how problems mixing ball constraints are cross-checked
  (the enumeration oracle is polyhedral-only by design).

Neither oracle shares any code with the solver engines; that independence is
the point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import (
    AffineSubspace,
    Box,
    Halfspace,
    Hyperplane,
    Identity,
    RelaxedProjection,
    as_point,
)
from .tolerances import FEASIBILITY_TOL, MULTIPLIER_TOL, RANK_TOL

__all__ = [
    "PolyhedralSpec",
    "InfeasibleSpec",
    "EnumerationLimit",
    "box_inequalities",
    "polyhedral_from_operators",
    "kkt_project",
    "grid_project",
    "sample_feasible",
]

MAX_KKT_DIM = 6
MAX_KKT_INEQUALITIES = 12


class InfeasibleSpec(ValueError):
    """No feasible candidate exists (the constraint set is empty)."""


class EnumerationLimit(ValueError):
    """The spec exceeds the exhaustive oracle's size limits."""


def _as_rows(pairs, dim: int, label: str) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    rhs = []
    for j, (a, b) in enumerate(pairs):
        a = as_point(a, dim=dim, name=f"{label}[{j}].a")
        if not np.any(a):
            raise ValueError(f"{label}[{j}] has a zero normal vector")
        b = float(b)
        if not np.isfinite(b):
            raise ValueError(f"{label}[{j}].b must be finite, got {b}")
        rows.append(a)
        rhs.append(b)
    if rows:
        return np.array(rows, dtype=float), np.array(rhs, dtype=float)
    return np.zeros((0, dim), dtype=float), np.zeros(0, dtype=float)


@dataclass(frozen=True)
class PolyhedralSpec:
    """A polyhedron {x : A_ineq x <= b_ineq, A_eq x = b_eq} in R^dim."""

    inequalities: tuple
    equalities: tuple
    dim: int

    def __post_init__(self):
        dim = int(self.dim)
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        A_in, b_in = _as_rows(self.inequalities, dim, "inequalities")
        A_eq, b_eq = _as_rows(self.equalities, dim, "equalities")
        ineq = tuple((A_in[j].copy(), float(b_in[j])) for j in range(A_in.shape[0]))
        eq = tuple((A_eq[j].copy(), float(b_eq[j])) for j in range(A_eq.shape[0]))
        object.__setattr__(self, "inequalities", ineq)
        object.__setattr__(self, "equalities", eq)
        object.__setattr__(self, "dim", dim)

    def _matrices(self):
        A_in = np.array([a for a, _ in self.inequalities], dtype=float).reshape(
            len(self.inequalities), self.dim
        )
        b_in = np.array([b for _, b in self.inequalities], dtype=float)
        A_eq = np.array([a for a, _ in self.equalities], dtype=float).reshape(
            len(self.equalities), self.dim
        )
        b_eq = np.array([b for _, b in self.equalities], dtype=float)
        return A_in, b_in, A_eq, b_eq

    def residual(self, x) -> float:
        """Worst constraint violation at x (0 means feasible)."""
        x = as_point(x, dim=self.dim, name="x")
        A_in, b_in, A_eq, b_eq = self._matrices()
        r = 0.0
        if len(b_in):
            r = max(r, float(np.max(A_in @ x - b_in)))
        if len(b_eq):
            r = max(r, float(np.max(np.abs(A_eq @ x - b_eq))))
        return max(r, 0.0)

    def is_feasible(self, x, tol: float = FEASIBILITY_TOL) -> bool:
        return self.residual(x) <= tol


def box_inequalities(lo, hi) -> list[tuple[np.ndarray, float]]:
    """Coordinate bounds as halfspace rows; infinite bounds are dropped."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if lo.shape != hi.shape or lo.ndim != 1:
        raise ValueError("lo and hi must be 1-D arrays of equal length")
    if np.any(lo > hi):
        raise ValueError("box has lo > hi")
    dim = lo.size
    rows: list[tuple[np.ndarray, float]] = []
    for i in range(dim):
        e = np.zeros(dim)
        if np.isfinite(hi[i]):
            e_hi = e.copy()
            e_hi[i] = 1.0
            rows.append((e_hi, float(hi[i])))
        if np.isfinite(lo[i]):
            e_lo = e.copy()
            e_lo[i] = -1.0
            rows.append((e_lo, float(-lo[i])))
    return rows


def polyhedral_from_operators(operators) -> PolyhedralSpec:
    """The common fixed-point set of the operators as a polyhedron.

    Halfspaces and boxes contribute inequalities, hyperplanes and affine
    subspaces equalities; a relaxed projection has the same fixed-point set
    as its inner operator for any alpha in (0, 1], so it contributes its
    inner's constraints.  Operators with non-polyhedral fixed sets (balls)
    raise a ValueError naming the offending kind.
    """
    operators = list(operators)
    if not operators:
        raise ValueError("operator family must be nonempty")
    dim = operators[0].dim
    ineqs: list = []
    eqs: list = []
    for i, op in enumerate(operators, start=1):
        base = op
        while isinstance(base, RelaxedProjection):
            base = base.inner
        if isinstance(base, Halfspace):
            ineqs.append((base.a.copy(), base.b))
        elif isinstance(base, Hyperplane):
            eqs.append((base.a.copy(), base.b))
        elif isinstance(base, Box):
            ineqs.extend(box_inequalities(base.lo, base.hi))
        elif isinstance(base, AffineSubspace):
            eqs.extend((base.A[j].copy(), float(base.b[j]))
                       for j in range(base.A.shape[0]))
        elif isinstance(base, Identity):
            pass
        else:
            raise ValueError(
                f"operator {i} ({base.kind}) has no polyhedral fixed-point form"
            )
    return PolyhedralSpec(tuple(ineqs), tuple(eqs), dim)


def kkt_project(spec: PolyhedralSpec, u) -> np.ndarray:
    """Nearest feasible point to u by exhaustive active-set enumeration.

    Rank-deficient candidate active sets are skipped (a full-rank subset
    describing the same face always exists).  Raises
    :class:`InfeasibleSpec` when no candidate survives.
    """
    u = as_point(u, dim=spec.dim, name="u")
    n_in = len(spec.inequalities)
    if spec.dim > MAX_KKT_DIM:
        raise EnumerationLimit(
            f"kkt_project handles dim <= {MAX_KKT_DIM}, got {spec.dim}"
        )
    if n_in > MAX_KKT_INEQUALITIES:
        raise EnumerationLimit(
            f"kkt_project handles <= {MAX_KKT_INEQUALITIES} inequalities, got {n_in}"
        )

    if spec.is_feasible(u):
        return u.copy()

    A_in, b_in, A_eq, b_eq = spec._matrices()
    n_eq = len(b_eq)

    best: np.ndarray | None = None
    best_dist = np.inf
    for mask in range(1 << n_in):
        active = [j for j in range(n_in) if mask >> j & 1]
        rows = n_eq + len(active)
        if rows == 0 or rows > spec.dim:
            continue
        A = np.vstack([A_eq, A_in[active]]) if active else A_eq
        b = np.concatenate([b_eq, b_in[active]]) if active else b_eq

        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= RANK_TOL:
            continue

        G = A @ A.T
        nu = np.linalg.solve(G, A @ u - b)
        if np.any(nu[n_eq:] < -MULTIPLIER_TOL):
            continue
        x = u - A.T @ nu
        if not spec.is_feasible(x):
            continue
        d = float(np.linalg.norm(x - u))
        if d < best_dist:
            best_dist = d
            best = x

    if best is None:
        raise InfeasibleSpec("no feasible KKT candidate; the constraint set is empty")
    return best


def _feasibility_test(spec_or_test, tol: float):
    if isinstance(spec_or_test, PolyhedralSpec):
        return lambda x: spec_or_test.is_feasible(x, tol)
    if callable(spec_or_test):
        return spec_or_test
    raise TypeError(
        f"expected a PolyhedralSpec or a feasibility predicate, got {spec_or_test!r}"
    )


def grid_project(spec_or_test, u, resolution: float, box,
                 tol: float = FEASIBILITY_TOL) -> np.ndarray:
    """Brute-force nearest feasible grid point to u inside a bounded box.

    ``box`` is a (lo, hi) pair spanning the search region; the grid steps by
    ``resolution`` along every axis.  Agreement with :func:`kkt_project` is
    only up to the grid pitch, about resolution * sqrt(dim).
    """
    resolution = float(resolution)
    if resolution <= 0.0:
        raise ValueError(f"resolution must be positive, got {resolution}")
    lo, hi = box
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    dim = lo.size
    if hi.shape != lo.shape or lo.ndim != 1:
        raise ValueError("box must be a (lo, hi) pair of equal-length 1-D arrays")
    if dim > 3:
        raise ValueError(f"grid_project handles dim <= 3, got {dim}")
    u = as_point(u, dim=dim, name="u")

    axes = [np.arange(lo[i], hi[i] + resolution / 2, resolution) for i in range(dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)

    if isinstance(spec_or_test, PolyhedralSpec):
        if spec_or_test.dim != dim:
            raise ValueError(
                f"spec dim {spec_or_test.dim} does not match box dim {dim}"
            )
        A_in, b_in, A_eq, b_eq = spec_or_test._matrices()
        ok = np.ones(points.shape[0], dtype=bool)
        if len(b_in):
            ok &= np.all(points @ A_in.T - b_in <= tol, axis=1)
        if len(b_eq):
            ok &= np.all(np.abs(points @ A_eq.T - b_eq) <= tol, axis=1)
    else:
        test = _feasibility_test(spec_or_test, tol)
        ok = np.fromiter((bool(test(p)) for p in points), dtype=bool,
                         count=points.shape[0])

    feasible = points[ok]
    if feasible.shape[0] == 0:
        raise InfeasibleSpec("no feasible grid point in the search box")
    d = np.linalg.norm(feasible - u, axis=1)
    return feasible[int(np.argmin(d))].copy()


def sample_feasible(spec_or_test, box, count: int, rng,
                    tol: float = FEASIBILITY_TOL,
                    max_draws: int = 1_000_000) -> np.ndarray:
    """Rejection-sample feasible points uniformly from a bounding box."""
    lo, hi = box
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    dim = lo.size
    test = _feasibility_test(spec_or_test, tol)
    out = np.empty((count, dim), dtype=float)
    have = 0
    drawn = 0
    while have < count:
        n = min(4096, max_draws - drawn)
        if n <= 0:
            raise InfeasibleSpec(
                f"could not sample {count} feasible points in {max_draws} draws"
            )
        batch = rng.uniform(lo, hi, size=(n, dim))
        drawn += n
        for p in batch:
            if test(p):
                out[have] = p
                have += 1
                if have == count:
                    break
    return out
