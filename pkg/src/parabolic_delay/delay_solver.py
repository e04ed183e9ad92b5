"""Mild solutions of the delay problem by marching and by Picard iteration.

Times are handled as global step indices ``g`` with ``t = g * dt``.  When a
history segment has exactly one sample per step (``K * dt == 1``) its nodes
sit on the same global grid, so a restart from a tail history replays the
original run bit for bit.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import Constant, flatten, phi, sup_bound_K
from .discretization import discrete_norm
from .errors import CausalityError, DomainError, InvariantViolation, PreconditionError
from .propagator import Propagator, PropagatorOptions, all_pairs, estimate_M_gamma

_SNAP = 1e-9


def _split(x):
    """Integer part and fraction of a grid coordinate, snapping near-integers."""
    j = round(x)
    if abs(x - j) < _SNAP:
        return int(j), 0.0
    j = math.floor(x)
    return int(j), x - j


def _lerp(a, b, w):
    return (1.0 - w) * a + w * b


@dataclass(eq=False)
class HistorySegment:
    """Initial data on ``[-1, 0]``: ``states[i]`` is the value at ``theta_i = -1 + i/K``."""

    states: np.ndarray

    def __post_init__(self):
        states = np.array(self.states, dtype=float)
        if states.ndim != 2 or states.shape[0] < 2:
            raise DomainError("a history needs shape (K+1, n) with K >= 1")
        self.states = states

    @property
    def K(self):
        return self.states.shape[0] - 1

    @property
    def thetas(self):
        return -1.0 + np.arange(self.K + 1) / self.K

    def __call__(self, theta):
        if not (-1.0 - 1e-12 <= theta <= 1e-12):
            raise DomainError(f"theta={theta} outside [-1, 0]")
        j, w = _split((min(max(theta, -1.0), 0.0) + 1.0) * self.K)
        if w == 0.0:
            return self.states[j].copy()
        return _lerp(self.states[j], self.states[j + 1], w)

    def __add__(self, other):
        if not isinstance(other, HistorySegment) or other.states.shape != self.states.shape:
            return NotImplemented
        return HistorySegment(self.states + other.states)

    def __mul__(self, alpha):
        return HistorySegment(float(alpha) * self.states)

    __rmul__ = __mul__

    def sup_norm(self, p, grid):
        """``||u0||_{C([-1,0], L_p)}``; linear interpolation peaks at nodes."""
        return max(discrete_norm(s, p, grid) for s in self.states)

    @classmethod
    def constant(cls, u, K=1):
        u = np.asarray(u, dtype=float)
        return cls(np.repeat(u[None, :], K + 1, axis=0))

    @classmethod
    def from_function(cls, func, grid, K):
        """Sample ``func(theta, points)`` at ``K + 1`` uniform times."""
        thetas = -1.0 + np.arange(K + 1) / K
        return cls(np.array([np.asarray(func(th, grid.points), dtype=float) * np.ones(grid.size)
                             for th in thetas]))


@dataclass(eq=False)
class Trajectory:
    """Solution nodes ``t_j = (start_index + j) * dt`` plus the history behind them."""

    start_index: int
    dt: float
    states: np.ndarray
    history: HistorySegment
    grid: object = None
    frontier: int = 0
    coefficients: object = None
    delay: object = None
    options: object = None
    info: dict = field(default_factory=dict)

    @property
    def start(self):
        return self.start_index * self.dt

    @property
    def end(self):
        return (self.start_index + self.frontier) * self.dt

    @property
    def times(self):
        return (self.start_index + np.arange(self.frontier + 1)) * self.dt

    @property
    def nodes(self):
        return self.states[: self.frontier + 1]

    @property
    def aligned(self):
        return abs(self.history.K * self.dt - 1.0) < _SNAP

    def node(self, g):
        """State at global step index ``g`` (history nodes need alignment)."""
        local = g - self.start_index
        if local > self.frontier:
            raise CausalityError(f"step {g} lies beyond the computed frontier")
        if local >= 0:
            return self.states[local]
        if not self.aligned or local + self.history.K < 0:
            raise DomainError(f"step {g} is not a stored node")
        return self.history.states[local + self.history.K]

    def __call__(self, tau):
        return evaluate_delayed(self, tau)

    def restrict(self, t1):
        """The same trajectory cut at ``t1`` (a node time)."""
        local = _index(t1, self.dt) - self.start_index
        if not 0 <= local <= self.frontier:
            raise DomainError(f"t1={t1} outside [{self.start}, {self.end}]")
        return Trajectory(self.start_index, self.dt, self.states[: local + 1], self.history,
                          self.grid, local, self.coefficients, self.delay, self.options,
                          dict(self.info))

    def tail_history(self, t1, K=None):
        """Restart data ``theta -> u(t1 + theta)``, one sample per step by default."""
        if K is None:
            K = int(round(1.0 / self.dt))
        tail = [evaluate_delayed(self, t1 - 1.0 + i / K) for i in range(K)]
        tail.append(self.node(_index(t1, self.dt)).copy())
        return HistorySegment(np.array(tail))


def _index(t, dt):
    j, w = _split(t / dt)
    if w != 0.0:
        raise DomainError(f"time {t} is not on the dt={dt} grid")
    return j


def evaluate_delayed(traj, tau):
    """``u(tau)`` by linear interpolation over history and computed nodes."""
    s = traj.start
    if tau < s - 1.0 - 1e-12:
        raise DomainError(f"tau={tau} precedes the history window [{s - 1}, {s}]")
    if tau < s and not traj.aligned:
        return traj.history(tau - s)
    j, w = _split(tau / traj.dt)
    j = max(j, traj.start_index - traj.history.K) if traj.aligned else max(j, traj.start_index)
    if j - traj.start_index > traj.frontier or (w > 0 and j + 1 - traj.start_index > traj.frontier):
        raise CausalityError(f"tau={tau} lies beyond the computed frontier t={traj.end}")
    if w == 0.0:
        return traj.node(j).copy()
    return _lerp(traj.node(j), traj.node(j + 1), w)


def multiply_c1(a, t, v, grid):
    """Pointwise product ``c1(t, x_i) v_i``."""
    if isinstance(a.c1, Constant):
        return a.c1.value * np.asarray(v, dtype=float)
    return a.c1(t, grid.points) * np.asarray(v, dtype=float)


def _c1_nodal(a, grid):
    if isinstance(a.c1, Constant):
        value = a.c1.value
        return lambda t: value
    if a.c1.time_independent:
        values = a.c1(0.0, grid.points)
        return lambda t: values
    pts = grid.points
    return lambda t: a.c1(t, pts)


def _setup(a, grid, u0, horizon, opts, propagator):
    if a.dim != grid.dim or a.bc != grid.bc:
        raise PreconditionError("grid does not match the coefficient set")
    if u0.states.shape[1] != grid.size:
        raise PreconditionError(f"history states have {u0.states.shape[1]} entries, "
                                f"grid has {grid.size} unknowns")
    if propagator is None:
        propagator = Propagator(flatten(a), grid, opts or PropagatorOptions())
    elif propagator.grid != grid or propagator.a0.to_dict() != flatten(a).to_dict():
        raise PreconditionError("propagator was built for a different principal part or grid")
    P = propagator
    s, T = horizon if horizon is not None else (0.0, a.T)
    k_s, k_T = P.step_index(s), P.step_index(T)
    if k_T < k_s:
        raise DomainError("horizon must satisfy s <= T")
    states = np.empty((k_T - k_s + 1, grid.size))
    states[0] = u0.states[-1]
    traj = Trajectory(k_s, P.dt, states, u0, grid, 0, a, None, P.options)
    return P, traj, k_T - k_s


def _delay_source(a, R, traj, c1, g):
    t = g * traj.dt
    tau = phi(R, t)
    if tau > t + 1e-12:
        raise CausalityError(f"phi(R, {t}) = {tau} exceeds t (negative delay)")
    return c1(t) * evaluate_delayed(traj, tau)


def mild_solve_march(a, grid, u0, R, horizon=None, opts=None, propagator=None):
    """March the source-augmented one-step scheme across ``horizon``.

    The delay term enters explicitly at the left end of each step (its
    argument ``t_k - R(t_k)`` never exceeds ``t_k``).
    """
    P, traj, n = _setup(a, grid, u0, horizon, opts, propagator)
    traj.delay = R
    c1 = None if a.is_flat else _c1_nodal(a, grid)
    u = traj.states[0]
    for k in range(n):
        g = traj.start_index + k
        f = None if c1 is None else _delay_source(a, R, traj, c1, g)
        u = P.step(g, u, f)
        traj.states[k + 1] = u
        traj.frontier = k + 1
    traj.info["method"] = "march"
    return traj


def picard_theta0(M, K, gamma, T):
    """Local existence length ``1 / (2 M K e^{gamma T})``, capped at ``T``."""
    if M < 1 or K < 0 or gamma < 0:
        raise DomainError("need M >= 1, K >= 0, gamma >= 0")
    if K == 0:
        return float(T)
    return min(float(T), 1.0 / (2.0 * M * K * math.exp(gamma * T)))


def default_norm_pairs(P, s, T, samples=32):
    """Sample pairs for estimating ``M, gamma`` on ``[s, T]``."""
    k_s, k_T = P.step_index(s), P.step_index(T)
    stride = max(1, (k_T - k_s) // samples)
    if P.autonomous:
        ks = list(range(k_s, k_T + 1, stride))
        if ks[-1] != k_T:
            ks.append(k_T)
        return [(s, k * P.dt) for k in ks]
    return [(u, v) for u, v in all_pairs(P, T, stride=stride) if u >= s - 1e-12]


def mild_solve_picard(a, grid, u0, R, horizon=None, opts=None, tol=1e-10, p=2, M=None,
                      gamma=None, max_iter=100, propagator=None):
    """Fixed point of the chunked contraction map, chunks glued in time order.

    Each sweep applies the map to the previous iterate on the current chunk:
    the memory integral uses left-rectangle nodes whose delayed arguments read
    the accepted past or the previous iterate.  Chunks have length at most
    half the local existence length from ``picard_theta0``.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    P, traj, n = _setup(a, grid, u0, horizon, opts, propagator)
    traj.delay = R
    s, T = traj.start, traj.start + n * P.dt
    K = sup_bound_K(a)
    if M is None or gamma is None:
        M_est, g_est = estimate_M_gamma(P, p, default_norm_pairs(P, s, T))
        M = M_est if M is None else M
        gamma = g_est if gamma is None else gamma
    theta0 = picard_theta0(M, K, gamma, a.T)
    chunk = max(1, int(math.floor(0.5 * theta0 / P.dt + _SNAP)))
    c1 = None if a.is_flat else _c1_nodal(a, grid)
    iterations, bounds = [], []
    k = 0
    while k < n:
        k_end = min(k + chunk, n)
        old = np.repeat(traj.states[k][None, :], k_end - k, axis=0)
        traj.states[k + 1: k_end + 1] = old
        traj.frontier = k_end
        first = None
        for it in range(1, max_iter + 1):
            new = np.empty_like(old)
            u = traj.states[k]
            for j in range(k, k_end):
                g = traj.start_index + j
                f = None if c1 is None else _delay_source(a, R, traj, c1, g)
                u = P.step(g, u, f)
                new[j - k] = u
            change = max(discrete_norm(d, p, grid) for d in new - old)
            traj.states[k + 1: k_end + 1] = new
            old = new
            if first is None:
                first = change
            if change < tol:
                break
        else:
            raise InvariantViolation(
                f"Picard iteration did not converge in {max_iter} sweeps on chunk "
                f"[{(traj.start_index + k) * P.dt}, {(traj.start_index + k_end) * P.dt}]",
                tag="contraction")
        iterations.append(it)
        bounds.append(1 if first < tol else math.ceil(math.log(tol / first) / math.log(0.5)) + 1)
        k = k_end
    traj.info.update(method="picard", M=M, gamma=gamma, K=K, theta0=theta0,
                     chunk_steps=chunk, iterations=iterations, iteration_bounds=bounds)
    return traj


def glue(v1, v2):
    """Concatenate ``v1`` on ``[s-1, s1]`` with ``v2`` restarted at ``s1``."""
    if v1.dt != v2.dt:
        raise PreconditionError("trajectories use different time steps")
    local = v2.start_index - v1.start_index
    if not 0 <= local <= v1.frontier:
        raise PreconditionError("v2 does not start inside v1's node range")
    try:
        expected = v1.tail_history(v2.start, K=v2.history.K)
    except (DomainError, CausalityError) as exc:
        raise PreconditionError(f"cannot restrict v1 to v2's history window: {exc}") from None
    if not np.array_equal(expected.states, v2.history.states):
        raise PreconditionError("v2's history is not v1 restricted to [s1-1, s1]")
    if local == 0:
        return v2
    states = np.concatenate([v1.states[:local], v2.nodes])
    info = dict(v1.info)
    info["glued_at"] = list(info.get("glued_at", [])) + [v2.start] + list(v2.info.get("glued_at", []))
    return Trajectory(v1.start_index, v1.dt, states, v1.history, v1.grid,
                      len(states) - 1, v1.coefficients, v1.delay, v1.options, info)


def _grid_dict(grid):
    return {"lengths": list(grid.lengths), "cells": list(grid.cells), "bc": grid.bc}


def trajectory_metadata(traj):
    meta = {
        "grid": _grid_dict(traj.grid),
        "start": traj.start, "end": traj.end, "dt": traj.dt, "history_K": traj.history.K,
        "coefficients": traj.coefficients.to_dict() if traj.coefficients is not None else None,
        "delay": traj.delay.to_dict() if traj.delay is not None else None,
        "options": None if traj.options is None else {
            "scheme": traj.options.scheme, "dt": traj.options.dt,
            "positivity_safe": traj.options.positivity_safe},
    }
    for key in ("method", "M", "gamma", "K", "theta0", "chunk_steps", "iterations"):
        if key in traj.info:
            meta[key] = traj.info[key]
    if traj.coefficients is not None:
        meta.setdefault("K", sup_bound_K(traj.coefficients))
        meta["alpha0"] = traj.coefficients.alpha0
    return meta


def write_trajectory_csv(traj, path, meta_path=None):
    """One row per time node (history first, from ``t = s - 1``); columns ``t, u_0, ...``.

    The metadata sidecar defaults to ``path`` with a ``.json`` suffix.
    """
    K = traj.history.K
    hist_t = traj.start - 1.0 + np.arange(K) / K
    times = np.concatenate([hist_t, traj.times])
    values = np.concatenate([traj.history.states[:K], traj.nodes])
    table = np.column_stack([times, values])
    header = ",".join(["t"] + [f"u{i}" for i in range(values.shape[1])])
    np.savetxt(path, table, delimiter=",", header=header, comments="", fmt="%.17g",
               newline="\r\n")
    meta_path = meta_path or str(path).rsplit(".", 1)[0] + ".json"
    with open(meta_path, "w") as fh:
        json.dump(trajectory_metadata(traj), fh, indent=2, sort_keys=True)
    return meta_path
