"""Structured grids, the discrete elliptic operator A(t), and discrete L_p norms.

The operator is obtained from a discrete bilinear form with lumped, uniform
node weights ``h^N``:

* principal part: face differences ``a_ii`` (face value = mean of the two
  node values) plus, in 2-D, a cell-centred cross term for ``a_12 = a_21``;
* ``d_i(a_i u)``: conservative face fluxes, centred or upwind;
* ``b_i d_i u``: node differences, centred or upwind;
* ``c0 u`` on the diagonal and ``-d0 / h`` on Robin boundary nodes.

Boundary conditions come out of the form itself: Dirichlet nodes are
eliminated, Neumann/Robin nodes are kept and see no flux from outside the
box (the ghost value that cancels the conormal flux, including ``a_i u``).
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

from .errors import DomainError, PreconditionError


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform lattice on ``[0, L_1] x ... x [0, L_N]`` with ``cells[i]`` cells per axis.

    Dirichlet grids carry the interior nodes only; Neumann/Robin grids carry
    every lattice node.  Nodes are ordered C-style over the lattice.
    """

    lengths: tuple
    cells: tuple
    bc: str = "dirichlet"

    def __post_init__(self):
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        if len(self.lengths) != len(self.cells) or len(self.cells) not in (1, 2):
            raise DomainError("grid must be 1-D or 2-D with one cell count per axis")
        if min(self.cells) < 3:
            raise DomainError("need at least 3 cells per axis")
        if min(self.lengths) <= 0:
            raise DomainError("axis lengths must be positive")
        if self.bc not in ("dirichlet", "neumann", "robin"):
            raise DomainError(f"unknown boundary kind {self.bc!r}")

    @property
    def dim(self):
        return len(self.cells)

    @property
    def h(self):
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def weight(self):
        """Quadrature weight ``h^N`` attached to every node."""
        return float(np.prod(self.h))

    @property
    def lattice_shape(self):
        return tuple(n + 1 for n in self.cells)

    @cached_property
    def active(self):
        """Flat lattice indices of the unknowns."""
        shape = self.lattice_shape
        mask = np.ones(shape, dtype=bool)
        if self.bc == "dirichlet":
            for axis in range(self.dim):
                sl = [slice(None)] * self.dim
                sl[axis] = 0
                mask[tuple(sl)] = False
                sl[axis] = -1
                mask[tuple(sl)] = False
        return np.flatnonzero(mask.ravel())

    @property
    def size(self):
        return len(self.active)

    @property
    def shape(self):
        """Shape of the unknowns when reshaped onto the lattice."""
        if self.bc == "dirichlet":
            return tuple(n - 1 for n in self.cells)
        return self.lattice_shape

    @cached_property
    def lattice_points(self):
        axes = [np.linspace(0.0, L, n + 1) for L, n in zip(self.lengths, self.cells)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @property
    def points(self):
        """Coordinates of the unknowns, shape ``(size, dim)``."""
        return self.lattice_points[self.active]

    def sample(self, func):
        """Evaluate ``func(x)`` (``x`` of shape ``(size, dim)``) at the unknowns."""
        return np.asarray(func(self.points), dtype=float).reshape(self.size)


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    matrix: sp.csr_matrix
    grid: SpaceGrid
    t: float


def _lattice_index(shape):
    return np.arange(int(np.prod(shape))).reshape(shape)


def _pairs(idx, axis):
    lo = [slice(None)] * idx.ndim
    hi = [slice(None)] * idx.ndim
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    return idx[tuple(lo)].ravel(), idx[tuple(hi)].ravel()


def _neighbors(idx, axis):
    """(minus, plus) neighbour indices along ``axis``; -1 marks outside the box."""
    minus = np.full(idx.shape, -1)
    plus = np.full(idx.shape, -1)
    src = [slice(None)] * idx.ndim
    dst = [slice(None)] * idx.ndim
    src[axis], dst[axis] = slice(0, -1), slice(1, None)
    minus[tuple(dst)] = idx[tuple(src)]
    plus[tuple(src)] = idx[tuple(dst)]
    return minus.ravel(), plus.ravel()


class _Triplets:
    def __init__(self):
        self.rows, self.cols, self.vals = [], [], []

    def add(self, r, c, v):
        r, c, v = np.broadcast_arrays(np.asarray(r), np.asarray(c), np.asarray(v, dtype=float))
        self.rows.append(r.ravel())
        self.cols.append(c.ravel())
        self.vals.append(v.ravel())

    def tocsr(self, n):
        if not self.rows:
            return sp.csr_matrix((n, n))
        return sp.csr_matrix((np.concatenate(self.vals),
                              (np.concatenate(self.rows), np.concatenate(self.cols))),
                             shape=(n, n))


def assemble_operator(a0, grid, t, positivity_safe=False):
    """Sparse matrix of the delay-free elliptic operator at time ``t``.

    With ``positivity_safe`` the first-order terms are upwinded so that every
    off-diagonal entry is nonnegative whenever ``a_12 = 0``; then
    ``I - dt A`` is a Z-matrix for every ``dt > 0``.
    """
    if not a0.is_flat:
        raise PreconditionError("assemble_operator needs a flattened coefficient set (c1 = 0)")
    if a0.dim != grid.dim:
        raise PreconditionError(f"coefficient dimension {a0.dim} != grid dimension {grid.dim}")
    if not np.allclose(a0.lengths, grid.lengths, rtol=1e-12, atol=0):
        raise PreconditionError("coefficient domain and grid lengths differ")
    if a0.bc != grid.bc:
        raise PreconditionError(f"coefficient bc {a0.bc!r} != grid bc {grid.bc!r}")

    shape = grid.lattice_shape
    idx = _lattice_index(shape)
    pts = grid.lattice_points
    h = grid.h
    n_all = idx.size
    trip = _Triplets()

    def nodal(f):
        return np.asarray(f(t, pts), dtype=float).reshape(n_all)

    for k in range(grid.dim):
        L, R = _pairs(idx, k)

        akk = nodal(a0.a[k][k])
        coef = 0.5 * (akk[L] + akk[R]) / h[k] ** 2
        trip.add(L, R, coef)
        trip.add(R, L, coef)
        trip.add(L, L, -coef)
        trip.add(R, R, -coef)

        ak = nodal(a0.a_vec[k])
        af = 0.5 * (ak[L] + ak[R]) / h[k]
        if positivity_safe:
            pos = af > 0
            trip.add(L[pos], R[pos], af[pos])
            trip.add(R[pos], R[pos], -af[pos])
            neg = ~pos
            trip.add(L[neg], L[neg], af[neg])
            trip.add(R[neg], L[neg], -af[neg])
        else:
            half = 0.5 * af
            trip.add(L, L, half)
            trip.add(L, R, half)
            trip.add(R, L, -half)
            trip.add(R, R, -half)

        bk = nodal(a0.b[k])
        minus, plus = _neighbors(idx, k)
        nodes = idx.ravel()
        if positivity_safe:
            fwd = (bk > 0) & (plus >= 0)
            trip.add(nodes[fwd], plus[fwd], bk[fwd] / h[k])
            trip.add(nodes[fwd], nodes[fwd], -bk[fwd] / h[k])
            bwd = (bk < 0) & (minus >= 0)
            trip.add(nodes[bwd], nodes[bwd], bk[bwd] / h[k])
            trip.add(nodes[bwd], minus[bwd], -bk[bwd] / h[k])
        else:
            c = bk / (2.0 * h[k])
            # outside neighbours take the node's own value
            p_idx = np.where(plus >= 0, plus, nodes)
            m_idx = np.where(minus >= 0, minus, nodes)
            trip.add(nodes, p_idx, c)
            trip.add(nodes, m_idx, -c)

    if grid.dim == 2:
        a12 = nodal(a0.a[0][1])
        c00 = idx[:-1, :-1].ravel()
        c10 = idx[1:, :-1].ravel()
        c01 = idx[:-1, 1:].ravel()
        c11 = idx[1:, 1:].ravel()
        corners = (c00, c10, c01, c11)
        acell = 0.25 * (a12[c00] + a12[c10] + a12[c01] + a12[c11])
        gx = np.array([-1.0, 1.0, -1.0, 1.0]) / (2.0 * h[0])
        gy = np.array([-1.0, -1.0, 1.0, 1.0]) / (2.0 * h[1])
        block = -(np.outer(gx, gy) + np.outer(gy, gx))
        if np.any(acell != 0):
            for r in range(4):
                for c in range(4):
                    trip.add(corners[r], corners[c], acell * block[r, c])

    trip.add(idx.ravel(), idx.ravel(), nodal(a0.c0))

    if a0.bc == "robin":
        d0 = nodal(a0.d0)
        for k in range(grid.dim):
            sl_lo = [slice(None)] * grid.dim
            sl_hi = [slice(None)] * grid.dim
            sl_lo[k], sl_hi[k] = 0, -1
            for sl in (sl_lo, sl_hi):
                b_nodes = idx[tuple(sl)].ravel()
                trip.add(b_nodes, b_nodes, -d0[b_nodes] / h[k])

    full = trip.tocsr(n_all)
    act = grid.active
    if len(act) != n_all:
        full = full[act][:, act]
    full.sum_duplicates()
    full.sort_indices()
    return DiscreteOperator(matrix=full.tocsr(), grid=grid, t=float(t))


def _norm_exponent(p):
    if isinstance(p, str):
        if p.lower() in ("inf", "infinity"):
            return np.inf
        p = float(p)
    p = float(p)
    if not p >= 1:
        raise DomainError(f"norm exponent must be >= 1, got {p}")
    return p


def discrete_norm(u, p, grid):
    """Weighted discrete ``L_p`` norm ``(sum |u_i|^p h^N)^(1/p)``; max modulus for ``p = inf``."""
    p = _norm_exponent(p)
    u = np.asarray(u, dtype=float)
    if u.size == 0:
        return 0.0
    if np.isinf(p):
        return float(np.max(np.abs(u)))
    w = grid.weight if isinstance(grid, SpaceGrid) else float(grid)
    if p == 1:
        return float(np.sum(np.abs(u)) * w)
    if p == 2:
        return float(np.sqrt(np.dot(u, u) * w))
    return float((np.sum(np.abs(u) ** p) * w) ** (1.0 / p))


def spectral_norm(K, tol=1e-10, maxiter=5000, seed=0):
    """Largest singular value via power iteration on ``K^T K``."""
    K = np.asarray(K, dtype=float)
    if not np.any(K):
        return 0.0
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(K.shape[1])
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxiter):
        y = K.T @ (K @ x)
        new = float(np.linalg.norm(y))
        if new == 0.0:
            return 0.0
        x = y / new
        if abs(new - est) <= tol * new:
            est = new
            break
        est = new
    return float(np.sqrt(est))


def operator_pq_norm(kernel, grid, p, q):
    """Induced norm of ``kernel`` between weighted discrete ``L_p`` and ``L_q``.

    Only the four pairs with exact formulas are supported:
    (1,1), (2,2), (inf,inf) and (1,inf).
    """
    p, q = _norm_exponent(p), _norm_exponent(q)
    K = np.asarray(kernel, dtype=float)
    w = grid.weight if isinstance(grid, SpaceGrid) else float(grid)
    if (p, q) == (1, 1):
        return float(np.max(np.sum(np.abs(K), axis=0)))
    if np.isinf(p) and np.isinf(q):
        return float(np.max(np.sum(np.abs(K), axis=1)))
    if p == 1 and np.isinf(q):
        return float(np.max(np.abs(K)) / w)
    if (p, q) == (2, 2):
        # a dense SVD is cheaper and exact for small kernels
        return float(np.linalg.norm(K, 2)) if max(K.shape) <= 400 else spectral_norm(K)
    raise DomainError(f"unsupported norm pair ({p}, {q})")


def write_matrix_csv(matrix, path):
    """Dense matrix to CSV, one row per line, full float precision."""
    M = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in M:
            writer.writerow([repr(float(v)) for v in row])
