"""Discrete evolution family U(t, s) of the delay-free problem.

The time grid ``t_k = k * dt`` is part of a propagator's identity: every
``propagate`` call replays the same per-step solves, so composition over
aligned intervals is exact to the last bit.
"""
from __future__ import annotations

import math
import threading
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coefficients import adjoint_coefficients
from .discretization import assemble_operator, operator_pq_norm
from .errors import DomainError, PreconditionError

SCHEMES = ("backward_euler", "crank_nicolson")

_ALIGN_TOL = 1e-7


@dataclass(frozen=True)
class PropagatorOptions:
    scheme: str = "backward_euler"
    dt: float = 1e-3
    positivity_safe: bool = False

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise DomainError(f"scheme must be one of {SCHEMES}")
        if not self.dt > 0:
            raise DomainError("dt must be positive")


class Propagator:
    """Evolution family for a flattened coefficient set on a fixed grid.

    Per-step operators and factorizations are built lazily and cached by
    step index (a single entry when the coefficients are autonomous).
    """

    def __init__(self, a0, grid, options=None, cache_size=4096):
        if not a0.is_flat:
            raise PreconditionError("a propagator needs a flattened coefficient set")
        self.a0 = a0
        self.grid = grid
        self.options = options or PropagatorOptions()
        self.autonomous = a0.is_autonomous
        self._cache_size = cache_size
        self._ops = OrderedDict()
        self._lus = OrderedDict()
        self._lock = threading.Lock()
        self._adjoint = None
        self._eye = sp.identity(grid.size, format="csc")

    @property
    def dt(self):
        return self.options.dt

    @property
    def theta(self):
        return 1.0 if self.options.scheme == "backward_euler" else 0.5

    @property
    def n_steps(self):
        return int(round(self.a0.T / self.dt))

    def step_index(self, t):
        x = t / self.dt
        k = int(round(x))
        if abs(x - k) > _ALIGN_TOL:
            raise DomainError(f"time {t} is not on the dt={self.dt} grid")
        if k < 0 or k > self.n_steps:
            raise DomainError(f"time {t} outside [0, {self.a0.T}]")
        return k

    def _key(self, k):
        return 0 if self.autonomous else k

    def _cached(self, store, key, build):
        with self._lock:
            if key in store:
                store.move_to_end(key)
                return store[key]
        value = build()
        with self._lock:
            store[key] = value
            if len(store) > self._cache_size:
                store.popitem(last=False)
        return value

    def operator(self, k):
        """Sparse ``A(t_k)``."""
        key = self._key(k)
        return self._cached(self._ops, key, lambda: assemble_operator(
            self.a0, self.grid, key * self.dt, self.options.positivity_safe).matrix)

    def lhs(self, k):
        """Factorization of ``I - theta dt A(t_k)``."""
        key = self._key(k)

        def build():
            A = self.operator(k)
            return spla.splu((self._eye - (self.theta * self.dt) * A).tocsc())

        return self._cached(self._lus, key, build)

    def step(self, k, u, source=None):
        """Advance ``u`` from ``t_k`` to ``t_{k+1}``; ``source`` enters as ``dt * source``."""
        rhs = u
        if self.options.scheme == "crank_nicolson":
            rhs = u + (0.5 * self.dt) * (self.operator(k) @ u)
        if source is not None:
            rhs = rhs + self.dt * source
        return self.lhs(k + 1).solve(rhs)

    def adjoint(self):
        """Propagator of the backward problem's coefficient set (cached)."""
        if self._adjoint is None:
            self._adjoint = Propagator(adjoint_coefficients(self.a0), self.grid, self.options,
                                       self._cache_size)
        return self._adjoint


def _span(P, s, t):
    k0, k1 = P.step_index(s), P.step_index(t)
    if k0 > k1:
        raise DomainError(f"need s <= t, got s={s}, t={t}")
    return k0, k1


def propagate(P, s, t, u):
    """``U(t, s) u``.  ``u`` may also be a matrix whose columns are states."""
    k0, k1 = _span(P, s, t)
    u = np.array(u, dtype=float)
    for k in range(k0, k1):
        u = P.step(k, u)
    return u


def verify_cocycle(P, s, t1, t2, u):
    """Relative 2-norm residual of ``U(t2,t1) U(t1,s) u - U(t2,s) u``."""
    if not (s <= t1 <= t2):
        raise DomainError("need s <= t1 <= t2")
    lhs = propagate(P, t1, t2, propagate(P, s, t1, u))
    rhs = propagate(P, s, t2, u)
    denom = np.linalg.norm(u)
    return float(np.linalg.norm(lhs - rhs) / denom) if denom > 0 else float(np.linalg.norm(lhs - rhs))


def propagate_kernel(P, s, t):
    """Dense matrix of ``U(t, s)``; column j is the image of the j-th unit state."""
    return propagate(P, s, t, np.eye(P.grid.size))


def kernels_at(P, s, times):
    """Kernels ``U(t, s)`` for ascending ``times``, marched incrementally.

    For autonomous coefficients an increment whose length equals an already
    computed span reuses that kernel (``U(t+d, t) = U(s+d, s)``).
    """
    times = list(times)
    k_s = P.step_index(s)
    steps = [P.step_index(t) for t in times]
    if any(b < a for a, b in zip([k_s] + steps, steps)):
        raise DomainError("times must be ascending and not before s")
    by_span = {0: None}
    out = []
    K = np.eye(P.grid.size)
    k_prev = k_s
    for k in steps:
        inc = k - k_prev
        if inc == 0:
            pass
        elif P.autonomous and inc in by_span and by_span[inc] is not None:
            K = by_span[inc] @ K
        else:
            K = propagate(P, k_prev * P.dt, k * P.dt, K)
        by_span.setdefault(k - k_s, K)
        out.append(K)
        k_prev = k
    return out


def adjoint_propagate(P, t, s, v, mode="transpose"):
    """Backward solution ``U*(s, t) v`` of the adjoint problem.

    ``mode="transpose"`` replays the transposed step matrices in reverse (the
    exact discrete dual of ``propagate``); ``mode="backward_pde"`` assembles
    the adjoint coefficient set and marches the backward equation from ``t``
    down to ``s`` with the same scheme.
    """
    k0, k1 = _span(P, s, t)
    v = np.array(v, dtype=float)
    if mode == "transpose":
        cn = P.options.scheme == "crank_nicolson"
        for k in range(k1, k0, -1):
            v = P.lhs(k).solve(v, trans="T")
            if cn:
                v = v + (0.5 * P.dt) * (P.operator(k - 1).T @ v)
        return v
    if mode == "backward_pde":
        Q = P.adjoint()
        cn = Q.options.scheme == "crank_nicolson"
        for k in range(k1 - 1, k0 - 1, -1):
            rhs = v + (0.5 * Q.dt) * (Q.operator(k + 1) @ v) if cn else v
            v = Q.lhs(k).solve(rhs)
        return v
    raise DomainError(f"unknown adjoint mode {mode!r}")


def growth_rate(P):
    """``gamma = max(0, sup c0)`` from the descriptor."""
    return max(0.0, P.a0.c0.upper_bound())


def estimate_M_gamma(P, p, sample_pairs):
    """Constants ``M >= 1`` and ``gamma >= 0`` with ``||U(t,s)||_p <= M e^{gamma (t-s)}``
    on the sampled pairs.

    Pairs sharing a start time are served by a single kernel march.
    """
    if not sample_pairs:
        raise DomainError("need at least one (s, t) pair")
    if p not in (1, 2, math.inf, "inf"):
        raise DomainError(f"unsupported p={p}")
    p = math.inf if p == "inf" else p
    gamma = growth_rate(P)
    M = 1.0
    by_start = {}
    for s, t in sample_pairs:
        if t < s:
            raise DomainError("sample pairs need s <= t")
        by_start.setdefault(P.step_index(s), set()).add(P.step_index(t))
    for ks, kts in sorted(by_start.items()):
        kts = sorted(kts)
        kernels = kernels_at(P, ks * P.dt, [k * P.dt for k in kts])
        for kt, K in zip(kts, kernels):
            nrm = operator_pq_norm(K, P.grid, p, p)
            M = max(M, nrm * math.exp(-gamma * (kt - ks) * P.dt))
    return M, gamma


def all_pairs(P, t_end=None, stride=1):
    """Every aligned pair ``(s, t)`` with ``s <= t`` on a strided step grid."""
    k_end = P.n_steps if t_end is None else P.step_index(t_end)
    ks = list(range(0, k_end + 1, stride))
    if ks[-1] != k_end:
        ks.append(k_end)
    return [(i * P.dt, j * P.dt) for n, i in enumerate(ks) for j in ks[n:]]


@dataclass
class SmoothingFit:
    slope: float
    times: list
    norms: list
    flagged: list = field(default_factory=list)


def smoothing_exponent_fit(P, times, resolve_factor=4.0):
    """Least-squares slope of ``log ||U(t,0)||_{1->inf}`` against ``log t``.

    Times with ``t < resolve_factor * h_max^2`` lie in the unresolved regime
    and are flagged instead of fitted.
    """
    hmax = max(P.grid.h)
    times = sorted(float(t) for t in times)
    flagged = [t for t in times if t < resolve_factor * hmax ** 2]
    used = [t for t in times if t not in flagged]
    if len(used) < 2:
        raise DomainError("need at least two resolved times to fit a slope")
    kernels = kernels_at(P, 0.0, used)
    norms = [operator_pq_norm(K, P.grid, 1, math.inf) for K in kernels]
    slope = float(np.polyfit(np.log(used), np.log(norms), 1)[0])
    return SmoothingFit(slope=slope, times=used, norms=norms, flagged=flagged)
