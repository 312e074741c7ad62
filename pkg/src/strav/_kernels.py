"""Compiled iteration kernel (numba) over a flat operator encoding.

The solver loop is a long scalar recurrence (x^{k+1} depends on x^k), which
pure numpy cannot batch; per-step Python dispatch costs three orders of
magnitude at a million iterations.  This module flattens the built-in
operator kinds into a tagged union over one float64 parameter array and runs
the whole Halpern loop inside one njit function.

Encoding (kind tag, parameter layout at the operator's offset, n = dim):

====  ===========  =====================================================
tag   kind         parameters
====  ===========  =====================================================
0     identity     (none)
1     halfspace    b, <a,a>, a_0..a_{n-1}
2     hyperplane   b, <a,a>, a_0..a_{n-1}
3     box          lo_0..lo_{n-1}, hi_0..hi_{n-1}
4     ball         radius, center_0..center_{n-1}
5     affine       r, A row-major (r*n), b (r), M row-major (n*r)
6     relaxed      alpha, inner tag, inner parameters
====  ===========  =====================================================

Nested relaxations collapse to one alpha product at encode time
((1-a2)I + a2((1-a1)I + a1 T) = (1-a1*a2)I + a1*a2*T).  Operators outside
the built-in kinds raise :class:`KernelUnsupported`; callers fall back to
the numpy engine.

The arithmetic inside the kernel mirrors the numpy operator expressions
term for term, so a given plan produces the same mathematical sequence on
both engines (bitwise equality is only promised within one engine, where
identical plans share identical instruction streams).
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .operators import (
    AffineSubspace,
    Ball,
    Box,
    Halfspace,
    Hyperplane,
    Identity,
    Operator,
    RelaxedProjection,
)

__all__ = ["KernelUnsupported", "OperatorTable", "encode_operators", "run_loop"]

KIND_IDENTITY = 0
KIND_HALFSPACE = 1
KIND_HYPERPLANE = 2
KIND_BOX = 3
KIND_BALL = 4
KIND_AFFINE = 5
KIND_RELAXED = 6


class KernelUnsupported(TypeError):
    """The operator family cannot be flattened for the compiled kernel."""


def _encode_base(op: Operator) -> tuple[int, list[float]]:
    if isinstance(op, Identity):
        return KIND_IDENTITY, []
    if isinstance(op, Halfspace):
        return KIND_HALFSPACE, [op.b, op._nrm2, *op.a.tolist()]
    if isinstance(op, Hyperplane):
        return KIND_HYPERPLANE, [op.b, op._nrm2, *op.a.tolist()]
    if isinstance(op, Box):
        return KIND_BOX, [*op.lo.tolist(), *op.hi.tolist()]
    if isinstance(op, Ball):
        return KIND_BALL, [op.radius, *op.center.tolist()]
    if isinstance(op, AffineSubspace):
        r = op.A.shape[0]
        return KIND_AFFINE, [
            float(r),
            *op.A.ravel().tolist(),
            *op.b.tolist(),
            *op._M.ravel().tolist(),
        ]
    raise KernelUnsupported(
        f"operator kind {type(op).__name__!r} has no kernel encoding"
    )


def _encode_one(op: Operator) -> tuple[int, list[float]]:
    alpha = 1.0
    while isinstance(op, RelaxedProjection):
        alpha *= op.alpha
        op = op.inner
    kind, par = _encode_base(op)
    if alpha == 1.0:
        return kind, par
    return KIND_RELAXED, [alpha, float(kind), *par]


class OperatorTable:
    """Flattened operator family ready for :func:`run_loop`."""

    def __init__(self, operators):
        kinds = []
        offsets = []
        params: list[float] = []
        tmp_size = 1
        for op in operators:
            kind, par = _encode_one(op)
            kinds.append(kind)
            offsets.append(len(params))
            params.extend(par)
            base = op
            while isinstance(base, RelaxedProjection):
                base = base.inner
            if isinstance(base, AffineSubspace):
                tmp_size = max(tmp_size, base.A.shape[0])
        self.op_kind = np.array(kinds, dtype=np.int64)
        self.op_off = np.array(offsets, dtype=np.int64)
        self.op_par = np.array(params, dtype=np.float64)
        self.tmp_size = int(tmp_size)


def encode_operators(operators) -> OperatorTable:
    return OperatorTable(operators)


@njit(cache=True, inline="always")
def _apply_base(kind, par, p0, x, tmp):
    n = x.shape[0]
    if kind == 1:  # halfspace: project only when <a,x> > b
        v = -par[p0]
        for j in range(n):
            v += par[p0 + 2 + j] * x[j]
        if v > 0.0:
            c = v / par[p0 + 1]
            for j in range(n):
                x[j] -= c * par[p0 + 2 + j]
    elif kind == 2:  # hyperplane
        v = -par[p0]
        for j in range(n):
            v += par[p0 + 2 + j] * x[j]
        c = v / par[p0 + 1]
        for j in range(n):
            x[j] -= c * par[p0 + 2 + j]
    elif kind == 3:  # box clamp
        for j in range(n):
            if x[j] < par[p0 + j]:
                x[j] = par[p0 + j]
            elif x[j] > par[p0 + n + j]:
                x[j] = par[p0 + n + j]
    elif kind == 4:  # ball: radial pull only outside
        r = par[p0]
        d2 = 0.0
        for j in range(n):
            d = x[j] - par[p0 + 1 + j]
            d2 += d * d
        d2 = np.sqrt(d2)
        if d2 > r:
            c = r / d2
            for j in range(n):
                x[j] = par[p0 + 1 + j] + c * (x[j] - par[p0 + 1 + j])
    elif kind == 5:  # affine: x -= M (A x - b)
        r = int(par[p0])
        for i in range(r):
            s = -par[p0 + 1 + r * n + i]
            for j in range(n):
                s += par[p0 + 1 + i * n + j] * x[j]
            tmp[i] = s
        base = p0 + 1 + r * n + r
        for j in range(n):
            s = 0.0
            for i in range(r):
                s += par[base + j * r + i] * tmp[i]
            x[j] -= s


@njit(cache=True, inline="always")
def _apply_op(kind, par, p0, x, tmp, stash):
    if kind == 6:  # relaxed: (1-alpha) x + alpha T(x)
        alpha = par[p0]
        inner = int(par[p0 + 1])
        n = x.shape[0]
        for j in range(n):
            stash[j] = x[j]
        _apply_base(inner, par, p0 + 2, x, tmp)
        for j in range(n):
            x[j] = (1.0 - alpha) * stash[j] + alpha * x[j]
    else:
        _apply_base(kind, par, p0, x, tmp)


@njit(cache=True)
def run_loop(op_kind, op_off, op_par,
             str_w, str_off, flat_idx, fam_off, outer_w,
             simultaneous, tail_mass, u, x0, lam, max_iter, rec_ks, tmp_size):
    """Run max_iter Halpern steps, recording x and step norm at rec_ks.

    Families hold strings [fam_off[f], fam_off[f+1]); string si holds the
    0-based operator indices flat_idx[str_off[si]:str_off[si+1]] applied in
    order (first index first).  simultaneous=1 sums all families with
    outer_w; simultaneous=0 cycles one family per step (f = k mod n_fam).
    tail_mass adds an identity term after the string sum.
    """
    n = x0.shape[0]
    x = x0.copy()
    y = np.empty(n)
    s = np.empty(n)
    acc = np.empty(n)
    tmp = np.empty(tmp_size)
    stash = np.empty(n)
    n_fam = fam_off.shape[0] - 1
    n_rec = rec_ks.shape[0]
    xs = np.empty((n_rec, n))
    sn = np.zeros(n_rec)
    ptr = 0
    if ptr < n_rec and rec_ks[0] == 0:
        for j in range(n):
            xs[0, j] = x[j]
        ptr = 1
    for k in range(max_iter):
        if simultaneous == 1:
            for j in range(n):
                acc[j] = 0.0
            for f in range(n_fam):
                for j in range(n):
                    s[j] = 0.0
                for si in range(fam_off[f], fam_off[f + 1]):
                    for j in range(n):
                        y[j] = x[j]
                    for t in range(str_off[si], str_off[si + 1]):
                        i = flat_idx[t]
                        _apply_op(op_kind[i], op_par, op_off[i], y, tmp, stash)
                    w = str_w[si]
                    for j in range(n):
                        s[j] += w * y[j]
                ow = outer_w[f]
                for j in range(n):
                    acc[j] += ow * s[j]
        else:
            f = k % n_fam
            for j in range(n):
                acc[j] = 0.0
            for si in range(fam_off[f], fam_off[f + 1]):
                for j in range(n):
                    y[j] = x[j]
                for t in range(str_off[si], str_off[si + 1]):
                    i = flat_idx[t]
                    _apply_op(op_kind[i], op_par, op_off[i], y, tmp, stash)
                w = str_w[si]
                for j in range(n):
                    acc[j] += w * y[j]
        if tail_mass > 0.0:
            for j in range(n):
                acc[j] += tail_mass * x[j]
        lk = lam[k]
        stepsq = 0.0
        for j in range(n):
            xn = lk * u[j] + (1.0 - lk) * acc[j]
            d = xn - x[j]
            stepsq += d * d
            x[j] = xn
        if ptr < n_rec and rec_ks[ptr] == k + 1:
            for j in range(n):
                xs[ptr, j] = x[j]
            sn[ptr] = np.sqrt(stepsq)
            ptr += 1
    return xs, sn
