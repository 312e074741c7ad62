"""Firmly nonexpansive operators on R^n and their numeric predicates.

Every built-in operator is the exact closed-form projection onto a closed
convex set, or a relaxation (1-alpha)*I + alpha*P of one.  Projections onto
closed convex sets are firmly nonexpansive (FNE); relaxations with
alpha in (0,1] stay FNE.  All operators are immutable after construction and
``apply`` is pure, so concurrent evaluation needs no synchronization.

Points are plain 1-D float64 numpy arrays; :func:`as_point` is the validating
constructor used at API boundaries.  Operators never mutate their argument
and may return it unchanged when it is already a fixed point.
"""

from __future__ import annotations

import numpy as np

from .tolerances import MEMBERSHIP_TOL, RANK_TOL

__all__ = [
    "DimensionMismatch",
    "as_point",
    "Operator",
    "Halfspace",
    "Hyperplane",
    "Box",
    "Ball",
    "AffineSubspace",
    "RelaxedProjection",
    "Identity",
    "apply",
    "fne_residual",
    "qne_residual",
    "fixed_point_residual",
]


class DimensionMismatch(ValueError):
    """Raised when two objects disagree about the ambient dimension."""

    def __init__(self, expected: int, got: int, what: str = "point"):
        self.expected = int(expected)
        self.got = int(got)
        super().__init__(
            f"dimension mismatch: operator has dim {self.expected}, "
            f"{what} has dim {self.got}"
        )


def as_point(x, dim: int | None = None, name: str = "point") -> np.ndarray:
    """Validate and convert ``x`` to a 1-D float64 array.

    Entries must be finite; ``dim``, when given, must match exactly.
    """
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < 1:
        raise ValueError(f"{name} must have at least one coordinate")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} has non-finite entries: {arr}")
    if dim is not None and arr.size != dim:
        raise DimensionMismatch(dim, arr.size, what=name)
    return arr


class Operator:
    """Base class: a firmly nonexpansive self-map of R^n.

    Subclasses set ``kind`` (config tag), ``is_projection`` and implement
    ``_apply``.  ``membership_residual`` is defined for projection kinds and
    measures how far a point is from the operator's target set (0 iff inside,
    computed from the set description, not from ``_apply``).
    """

    kind: str = "operator"
    is_projection: bool = False

    def __init__(self, dim: int):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.dim = int(dim)

    def apply(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise DimensionMismatch(self.dim, x.size if x.ndim == 1 else -1)
        return self._apply(x)

    __call__ = apply

    def _apply(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def membership_residual(self, x) -> float:
        raise NotImplementedError(f"{self.kind} is not a projection kind")

    def params(self) -> dict:
        """JSON-ready parameter record mirroring the config schema."""
        raise NotImplementedError

    def describe(self) -> dict:
        d = {"kind": self.kind}
        d.update(self.params())
        return d

    def __repr__(self):
        fields = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({fields})"


class Halfspace(Operator):
    """Projection onto {x : <a, x> <= b}."""

    kind = "halfspace"
    is_projection = True

    def __init__(self, a, b: float):
        a = as_point(a, name="normal a")
        super().__init__(a.size)
        nrm2 = float(a @ a)
        if nrm2 == 0.0:
            raise ValueError("halfspace normal a must be nonzero")
        self.a = a
        self.b = float(b)
        self._nrm2 = nrm2
        self._nrm = float(np.sqrt(nrm2))

    def _apply(self, x):
        viol = float(self.a @ x) - self.b
        if viol <= 0.0:
            return x
        return x - (viol / self._nrm2) * self.a

    def membership_residual(self, x):
        return max(0.0, (float(self.a @ x) - self.b) / self._nrm)

    def params(self):
        return {"a": self.a.tolist(), "b": self.b}


class Hyperplane(Operator):
    """Projection onto {x : <a, x> = b}."""

    kind = "hyperplane"
    is_projection = True

    def __init__(self, a, b: float):
        a = as_point(a, name="normal a")
        super().__init__(a.size)
        nrm2 = float(a @ a)
        if nrm2 == 0.0:
            raise ValueError("hyperplane normal a must be nonzero")
        self.a = a
        self.b = float(b)
        self._nrm2 = nrm2
        self._nrm = float(np.sqrt(nrm2))

    def _apply(self, x):
        viol = float(self.a @ x) - self.b
        return x - (viol / self._nrm2) * self.a

    def membership_residual(self, x):
        return abs(float(self.a @ x) - self.b) / self._nrm

    def params(self):
        return {"a": self.a.tolist(), "b": self.b}


class Box(Operator):
    """Componentwise clamp onto {x : lo <= x <= hi}.  lo == hi is allowed."""

    kind = "box"
    is_projection = True

    def __init__(self, lo, hi):
        lo = as_point(lo, name="lo")
        hi = as_point(hi, dim=lo.size, name="hi")
        if np.any(lo > hi):
            raise ValueError(f"box requires lo <= hi componentwise, got lo={lo}, hi={hi}")
        super().__init__(lo.size)
        self.lo = lo
        self.hi = hi

    def _apply(self, x):
        return np.clip(x, self.lo, self.hi)

    def membership_residual(self, x):
        return float(max(np.max(self.lo - x), np.max(x - self.hi), 0.0))

    def params(self):
        return {"lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Ball(Operator):
    """Radial projection onto the closed ball B(center, radius).

    radius == 0 is allowed: the operator is the constant map to the center,
    which is still firmly nonexpansive.
    """

    kind = "ball"
    is_projection = True

    def __init__(self, center, radius: float):
        center = as_point(center, name="center")
        radius = float(radius)
        if radius < 0.0:
            raise ValueError(f"radius must be >= 0, got {radius}")
        super().__init__(center.size)
        self.center = center
        self.radius = radius

    def _apply(self, x):
        d = x - self.center
        dist = float(np.sqrt(d @ d))
        if dist <= self.radius:
            return x
        if dist == 0.0:
            return self.center.copy()
        return self.center + (self.radius / dist) * d

    def membership_residual(self, x):
        d = x - self.center
        return max(0.0, float(np.sqrt(d @ d)) - self.radius)

    def params(self):
        return {"center": self.center.tolist(), "radius": self.radius}


class AffineSubspace(Operator):
    """Projection onto {x : <a_i, x> = b_i for every row}.

    Rows must be linearly independent (rank test with cutoff RANK_TOL at
    construction).  The projection is x - M (A x - b) with
    M = A^T (A A^T)^{-1}, precomputed once.
    """

    kind = "affine"
    is_projection = True

    def __init__(self, rows):
        rows = list(rows)
        if not rows:
            raise ValueError("affine subspace needs at least one row")
        normals = [as_point(a, name="row normal") for a, _ in rows]
        dim = normals[0].size
        for a in normals[1:]:
            if a.size != dim:
                raise DimensionMismatch(dim, a.size, what="row normal")
        super().__init__(dim)
        self.A = np.array(normals)                       # (r, n)
        self.b = np.array([float(b) for _, b in rows])   # (r,)
        r = self.A.shape[0]
        if r > dim:
            raise ValueError(f"more rows ({r}) than dimensions ({dim})")
        sv = np.linalg.svd(self.A, compute_uv=False)
        if sv[-1] <= RANK_TOL:
            raise ValueError(
                f"affine rows are linearly dependent (min singular value {sv[-1]:.3e})"
            )
        gram = self.A @ self.A.T
        self._M = self.A.T @ np.linalg.inv(gram)         # (n, r)

    def _apply(self, x):
        return x - self._M @ (self.A @ x - self.b)

    def membership_residual(self, x):
        return float(np.max(np.abs(self.A @ x - self.b)))

    def params(self):
        return {
            "rows": [
                {"a": a.tolist(), "b": float(b)} for a, b in zip(self.A, self.b)
            ]
        }


class RelaxedProjection(Operator):
    """(1-alpha)*I + alpha*inner with alpha in (0, 1].

    alpha == 1.0 delegates to the inner operator directly, so that path is
    bitwise equal to ``inner.apply``.
    """

    kind = "relaxed"

    def __init__(self, inner: Operator, alpha: float):
        if not isinstance(inner, Operator):
            raise TypeError(f"inner must be an Operator, got {type(inner).__name__}")
        alpha = float(alpha)
        if not 0.0 < alpha <= 1.0:
            raise ValueError(f"alpha must be in (0, 1], got {alpha}")
        super().__init__(inner.dim)
        self.inner = inner
        self.alpha = alpha

    @property
    def is_projection(self):  # type: ignore[override]
        return self.alpha == 1.0 and self.inner.is_projection

    def _apply(self, x):
        if self.alpha == 1.0:
            return self.inner._apply(x)
        return (1.0 - self.alpha) * x + self.alpha * self.inner._apply(x)

    def membership_residual(self, x):
        if self.alpha == 1.0:
            return self.inner.membership_residual(x)
        raise NotImplementedError("relaxed operator with alpha < 1 is not a projection")

    def params(self):
        return {"inner": self.inner.describe(), "alpha": self.alpha}


class Identity(Operator):
    """The identity map (projection onto all of R^n)."""

    kind = "identity"
    is_projection = True

    def __init__(self, dim: int):
        super().__init__(dim)

    def _apply(self, x):
        return x

    def membership_residual(self, x):
        return 0.0

    def params(self):
        return {"dim": self.dim}


def apply(op: Operator, x) -> np.ndarray:
    """Evaluate ``op`` at ``x`` (function form of ``op.apply``)."""
    return op.apply(x)


def fne_residual(op: Operator, x, y) -> float:
    """<x-y, T(x)-T(y)> - ||T(x)-T(y)||^2.

    Nonnegative (up to float slack) exactly when T is firmly nonexpansive
    on the pair; every built-in kind satisfies this.
    """
    x = as_point(x, dim=op.dim, name="x")
    y = as_point(y, dim=op.dim, name="y")
    tx = op.apply(x)
    ty = op.apply(y)
    d = tx - ty
    return float((x - y) @ d - d @ d)


def qne_residual(op: Operator, x, y_fixed) -> float:
    """||x - y|| - ||T(x) - y|| for a fixed point y of T.

    ``y_fixed`` must satisfy ||T(y)-y|| <= MEMBERSHIP_TOL; the residual is
    nonnegative (up to float slack) because any FNE operator with a fixed
    point is quasi-nonexpansive.
    """
    x = as_point(x, dim=op.dim, name="x")
    y = as_point(y_fixed, dim=op.dim, name="y_fixed")
    res = fixed_point_residual(op, y)
    if res > MEMBERSHIP_TOL:
        raise ValueError(
            f"y_fixed is not a fixed point: ||T(y)-y|| = {res:.3e} > {MEMBERSHIP_TOL}"
        )
    tx = op.apply(x)
    return float(np.linalg.norm(x - y) - np.linalg.norm(tx - y))


def fixed_point_residual(op: Operator, x) -> float:
    """||T(x) - x||; zero iff x is a fixed point of T."""
    x = as_point(x, dim=op.dim, name="x")
    return float(np.linalg.norm(op.apply(x) - x))
