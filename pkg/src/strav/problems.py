"""Shipped test problems with witnesses, oracle forms, and known solutions.

Four problems cover the solver surface:

* ``p1`` two-halfspace corner: F is the nonpositive orthant of R^2.
* ``p2`` three-halfspace triangle: F = {x >= 0, x_1 + x_2 <= 1} in R^2.
* ``p3`` affine line meets a box in R^3: F = {(t, t, t) : t in [0, 1]}.
* ``p4`` countable shrinking halfspaces H_i = {x_1 <= 1 + 1/i} with
  geometric singleton strings; F = {x_1 <= 1}, and the best approximation
  of the anchor has the closed form of a single halfspace projection.

Each problem carries a feasibility witness (a certified point of F), a
bounding box for sampling and grid search, the known solution for its
default anchor, and (for the finite problems) the polyhedral form the
enumeration oracle consumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .operators import AffineSubspace, Box, Halfspace, as_point
from .oracle import PolyhedralSpec, box_inequalities
from .solvers import ProblemSpec
from .strings import CountableFamily

__all__ = [
    "ShippedProblem",
    "make_shrinking_halfspaces",
    "problem_p1",
    "problem_p2",
    "problem_p3",
    "problem_p4",
    "shipped_problems",
    "get_problem",
]


@dataclass(frozen=True)
class ShippedProblem:
    key: str
    title: str
    spec: ProblemSpec
    polyhedral: PolyhedralSpec | None
    box: tuple
    solution: np.ndarray | None


def make_shrinking_halfspaces(a, b: float, ratio: float, epsilon: float,
                              coefficient: float = 1.0) -> CountableFamily:
    """Countable family over H_i = {<a, x> <= b + coefficient/i}.

    Singleton strings with geometric weights (1-ratio)*ratio^(r-1).  The
    intersection of the H_i is {<a, x> <= b} for positive coefficient.
    """
    a = as_point(a, name="a")
    b = float(b)
    coefficient = float(coefficient)
    if coefficient <= 0.0:
        raise ValueError(f"coefficient must be positive, got {coefficient}")

    def operator_gen(i: int) -> Halfspace:
        return Halfspace(a, b + coefficient / i)

    return CountableFamily.geometric_singletons(
        operator_gen,
        ratio=ratio,
        epsilon=epsilon,
        dim=a.size,
        descriptor={
            "kind": "geometric-singletons",
            "ratio": float(ratio),
            "epsilon": float(epsilon),
            "operators": {
                "generator": "shrinking-halfspace",
                "a": a.tolist(),
                "b": b,
                "coefficient": coefficient,
            },
        },
    )


def problem_p1() -> ShippedProblem:
    """Two halfspaces x_1 <= 0 and x_2 <= 0; u = (2, 2); P_F(u) = (0, 0)."""
    ops = [Halfspace([1.0, 0.0], 0.0), Halfspace([0.0, 1.0], 0.0)]
    spec = ProblemSpec(
        operators=ops, anchor=[2.0, 2.0], witness=[-1.0, -1.0], name="p1"
    )
    poly = PolyhedralSpec(
        (([1.0, 0.0], 0.0), ([0.0, 1.0], 0.0)), (), 2
    )
    return ShippedProblem(
        key="p1",
        title="two-halfspace corner",
        spec=spec,
        polyhedral=poly,
        box=(np.array([-3.0, -3.0]), np.array([3.0, 3.0])),
        solution=np.array([0.0, 0.0]),
    )


def problem_p2() -> ShippedProblem:
    """Triangle x_1 >= 0, x_2 >= 0, x_1 + x_2 <= 1; u = (2, 2)."""
    ops = [
        Halfspace([-1.0, 0.0], 0.0),
        Halfspace([0.0, -1.0], 0.0),
        Halfspace([1.0, 1.0], 1.0),
    ]
    spec = ProblemSpec(
        operators=ops, anchor=[2.0, 2.0], witness=[0.2, 0.2], name="p2"
    )
    poly = PolyhedralSpec(
        (([-1.0, 0.0], 0.0), ([0.0, -1.0], 0.0), ([1.0, 1.0], 1.0)), (), 2
    )
    return ShippedProblem(
        key="p2",
        title="three-halfspace triangle",
        spec=spec,
        polyhedral=poly,
        box=(np.array([-1.0, -1.0]), np.array([2.0, 2.0])),
        solution=np.array([0.5, 0.5]),
    )


def problem_p3() -> ShippedProblem:
    """Line x_1 = x_2 = x_3 intersected with the unit box; u = (2, 0.5, -1)."""
    line = AffineSubspace([
        ([1.0, -1.0, 0.0], 0.0),
        ([0.0, 1.0, -1.0], 0.0),
    ])
    box = Box([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])
    spec = ProblemSpec(
        operators=[line, box],
        anchor=[2.0, 0.5, -1.0],
        witness=[0.0, 0.0, 0.0],
        name="p3",
    )
    poly = PolyhedralSpec(
        tuple(box_inequalities([0.0, 0.0, 0.0], [1.0, 1.0, 1.0])),
        (([1.0, -1.0, 0.0], 0.0), ([0.0, 1.0, -1.0], 0.0)),
        3,
    )
    return ShippedProblem(
        key="p3",
        title="affine line meets unit box",
        spec=spec,
        polyhedral=poly,
        box=(np.array([-1.0, -1.0, -1.0]), np.array([2.0, 2.0, 2.0])),
        solution=np.array([0.5, 0.5, 0.5]),
    )


def problem_p4(ratio: float = 0.96, epsilon: float = 1e-12) -> ShippedProblem:
    """Countable halfspaces x_1 <= 1 + 1/i; u = (3, 0); P_F(u) = (1, 0).

    The default ratio keeps enough weight on the deep halfspaces (large i)
    for the truncated average to pull iterates to x_1 = 1 at desk scale; a
    fast-decaying ratio starves them and convergence stalls far from F's
    boundary long before 10^6 steps.
    """
    fam = make_shrinking_halfspaces([1.0, 0.0], 1.0, ratio, epsilon)
    spec = ProblemSpec(
        countable=fam, anchor=[3.0, 0.0], witness=[1.0, 0.0], name="p4"
    )
    return ShippedProblem(
        key="p4",
        title="countable shrinking halfspaces",
        spec=spec,
        polyhedral=None,
        box=(np.array([-2.0, -2.0]), np.array([4.0, 4.0])),
        solution=np.array([1.0, 0.0]),
    )


def shipped_problems() -> dict:
    return {
        "p1": problem_p1,
        "p2": problem_p2,
        "p3": problem_p3,
        "p4": problem_p4,
    }


def get_problem(key: str) -> ShippedProblem:
    builders = shipped_problems()
    k = str(key).lower()
    if k not in builders:
        raise KeyError(
            f"unknown shipped problem {key!r} (available: {sorted(builders)})"
        )
    return builders[k]()
