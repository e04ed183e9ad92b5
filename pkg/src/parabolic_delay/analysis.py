"""History norms, a priori bounds and continuous-dependence experiments."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .coefficients import ShiftedDelay, flatten, oscillatory_family, sup_bound_K
from .delay_solver import (default_norm_pairs, evaluate_delayed, mild_solve_march,
                           mild_solve_picard)
from .discretization import discrete_norm
from .errors import DomainError, InvariantViolation, PreconditionError
from .propagator import Propagator, PropagatorOptions, all_pairs, estimate_M_gamma

_EPS = 1e-12
SLACK = 0.10


def _node_table(traj, p):
    """Times and L_p norms of history and trajectory nodes, ascending, no duplicate seam."""
    K = traj.history.K
    hist_t = traj.start - 1.0 + np.arange(K) / K
    hist_n = [discrete_norm(s, p, traj.grid) for s in traj.history.states[:K]]
    traj_n = [discrete_norm(s, p, traj.grid) for s in traj.nodes]
    return np.concatenate([hist_t, traj.times]), np.array(hist_n + traj_n)


def delta(traj, t, p):
    """``sup_{theta in [-1,0]} ||u(t + theta)||_p`` over the nodes of the window."""
    if not (traj.start - _EPS <= t <= traj.end + _EPS):
        raise DomainError(f"t={t} outside [{traj.start}, {traj.end}]")
    times, norms = _node_table(traj, p)
    inside = (times >= t - 1.0 - _EPS) & (times <= t + _EPS)
    ends = [discrete_norm(evaluate_delayed(traj, tau), p, traj.grid)
            for tau in (max(t - 1.0, traj.start - 1.0), min(t, traj.end))]
    return float(max(ends + list(norms[inside])))


def delta_profile(traj, p):
    """``delta`` at every trajectory node, returned as ``(times, values)``."""
    times, norms = _node_table(traj, p)
    out = np.empty(traj.frontier + 1)
    offset = traj.history.K
    for j, t in enumerate(traj.times):
        lo = int(np.searchsorted(times, t - 1.0 - _EPS, side="left"))
        left = discrete_norm(evaluate_delayed(traj, t - 1.0), p, traj.grid)
        out[j] = max(left, float(norms[lo: offset + j + 1].max()))
    return traj.times, out


def gronwall_constants(M, K, gamma, T):
    """``(M1, M2) = (M e^{gamma T}, M K e^{gamma T})``."""
    scale = M * math.exp(gamma * T)
    return scale, scale * K


def global_bound(M1, M2, T):
    """``M1 e^{M2 T}``, the uniform bound on ``||u(t)|| / ||u0||_C``."""
    return M1 * math.exp(M2 * T)


@dataclass
class GronwallResult:
    passed: bool
    max_ratio: float
    times: np.ndarray
    deltas: np.ndarray
    bounds: np.ndarray

    def __bool__(self):
        return self.passed


def gronwall_check(traj, M1, M2, p):
    """Compare ``delta(t)`` with ``M1 delta(s) e^{M2 (t - s)}`` at every node."""
    times, deltas = delta_profile(traj, p)
    d0 = deltas[0]
    if d0 == 0.0:
        if np.any(deltas > 0):
            raise InvariantViolation("zero initial history produced a nonzero trajectory",
                                     tag="linearity")
        zeros = np.zeros_like(deltas)
        return GronwallResult(True, 0.0, times, deltas, zeros)
    bounds = M1 * d0 * np.exp(M2 * (times - traj.start))
    ratios = deltas / bounds
    max_ratio = float(ratios.max())
    return GronwallResult(bool(max_ratio <= 1.0), max_ratio, times, deltas, bounds)


def stability_constant(trajs, p):
    """Largest ``||u(t)||_p / ||u0||_{C([-1,0], L_p)}`` over a suite."""
    trajs = list(trajs)
    if not trajs:
        raise DomainError("suite must be nonempty")
    best = 0.0
    for tr in trajs:
        base = tr.history.sup_norm(p, tr.grid)
        if base == 0.0:
            continue
        peak = max(discrete_norm(s, p, tr.grid) for s in tr.nodes)
        best = max(best, peak / base)
    return best


def sup_difference(u, v, p, t_from=None):
    """``sup ||u(t) - v(t)||_p`` over shared nodes with ``t >= t_from``.

    Without ``t_from`` the history window is included as well.
    """
    if u.start_index != v.start_index or u.frontier != v.frontier or u.dt != v.dt:
        raise PreconditionError("trajectories live on different time grids")
    grid = u.grid
    diffs = u.nodes - v.nodes
    if t_from is not None:
        diffs = diffs[u.times >= t_from - _EPS]
    best = max((discrete_norm(d, p, grid) for d in diffs), default=0.0)
    if t_from is None and u.history.states.shape == v.history.states.shape:
        hist = u.history.states - v.history.states
        best = max(best, max(discrete_norm(d, p, grid) for d in hist))
    return float(best)


@dataclass
class ExperimentReport:
    scenario: str
    parameter: str
    values: list
    errors: list
    bounds: list = field(default_factory=list)
    checks: dict = field(default_factory=dict)
    constants: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def __post_init__(self):
        if any(not (e >= 0) for e in self.errors):
            raise InvariantViolation("error metrics must be nonnegative", tag="report")

    @property
    def passed(self):
        return all(self.checks.values())

    def rows(self):
        bounds = self.bounds or [None] * len(self.errors)
        return [(v, e, b, b is None or e <= b)
                for v, e, b in zip(self.values, self.errors, bounds)]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([self.parameter, "E", "bound", "pass"])
            for v, e, b, ok in self.rows():
                writer.writerow([repr(v), repr(float(e)), "" if b is None else repr(float(b)),
                                 "true" if ok else "false"])

    def summary(self):
        return {"scenario": self.scenario, "parameter": self.parameter,
                "values": list(self.values), "errors": [float(e) for e in self.errors],
                "bounds": [float(b) for b in self.bounds],
                "checks": {k: bool(v) for k, v in self.checks.items()},
                "passed": bool(self.passed), "constants": dict(self.constants),
                "notes": list(self.notes)}

    def write_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True,
                      default=lambda o: o.item() if isinstance(o, np.generic) else str(o))


def _map(fn, items, threads):
    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def _propagator(a, grid, opts, propagator):
    return propagator or Propagator(flatten(a), grid, opts or PropagatorOptions())


def _ladder_checks(errors, ratio=4.0):
    checks = {"decay": bool(errors[-1] <= errors[0] / ratio)}
    checks["monotone"] = all(e1 <= (1.0 + SLACK) * e0 for e0, e1 in zip(errors, errors[1:]))
    return checks


def estimate_constants(a, P, p, horizon=None, stride=None):
    """``M, gamma, K`` and derived ``M1, M2, Mbar`` for bound checks on ``horizon``.

    With ``stride=1`` every aligned pair is sampled, which makes the bound
    checks rigorous for the backward Euler recursion.
    """
    s, T = horizon if horizon is not None else (0.0, a.T)
    if stride is None:
        pairs = default_norm_pairs(P, s, T)
    else:
        pairs = [(u, v) for u, v in all_pairs(P, T, stride) if u >= s - _EPS]
    M, gamma = estimate_M_gamma(P, p, pairs)
    K = sup_bound_K(a)
    M1, M2 = gronwall_constants(M, K, gamma, T - s)
    return {"M": M, "gamma": gamma, "K": K, "M1": M1, "M2": M2,
            "Mbar": global_bound(M1, M2, T - s)}


def ic_continuity_experiment(a, grid, R, u0, w, eps_list=(1e-1, 1e-2, 1e-3, 1e-4, 1e-5),
                             opts=None, p=2, horizon=None, constants=None, propagator=None,
                             threads=1, scenario="ic"):
    """Errors ``sup_{[-1,T]} ||u(u0 + eps w) - u(u0)||_p`` along a vanishing ladder."""
    eps_list = [float(e) for e in eps_list]
    if any(e < 0 for e in eps_list) or any(e1 > e0 for e0, e1 in zip(eps_list, eps_list[1:])):
        raise DomainError("eps ladder must be nonnegative and nonincreasing")
    P = _propagator(a, grid, opts, propagator)
    consts = constants or estimate_constants(a, P, p, horizon)
    base = mild_solve_march(a, grid, u0, R, horizon, propagator=P)

    def run(eps):
        if eps == 0.0:
            return 0.0
        u = mild_solve_march(a, grid, u0 + eps * w, R, horizon, propagator=P)
        return sup_difference(u, base, p)

    errors = _map(run, eps_list, threads)
    wn = w.sup_norm(p, grid)
    lip = consts["M1"] * math.exp(consts["M2"] * (base.end - base.start))
    bounds = [lip * e * wn for e in eps_list]
    dev = 0.0
    for (e0, E0), (e1, E1) in zip(zip(eps_list, errors), zip(eps_list[1:], errors[1:])):
        if e0 > 0 and e1 > 0 and E0 > 0:
            dev = max(dev, abs((E1 / E0) / (e1 / e0) - 1.0))
    checks = {"lipschitz": all(E <= b for E, b in zip(errors, bounds)),
              "homogeneous": dev <= 1e-8}
    consts = dict(consts, homogeneity_deviation=dev, lipschitz_constant=lip)
    return ExperimentReport(scenario, "eps", eps_list, errors, bounds, checks, consts)


def coefficient_convergence_experiment(a, grid, R, u0, T1, m_list=(4, 8, 16, 32, 64),
                                       amplitude=1.0, opts=None, p=2, horizon=None,
                                       propagator=None, threads=1, scenario="coeff"):
    """``E(m) = sup_{[T1,T]} ||u(a_m) - u(a)||_p`` for oscillating delay coefficients."""
    P = _propagator(a, grid, opts, propagator)
    s, T = horizon if horizon is not None else (0.0, a.T)
    if not (s < T1 <= T):
        raise DomainError("T1 must lie in (s, T]")
    for m in m_list:
        if m * P.dt / a.T > 0.1:
            raise DomainError(f"m={m} is unresolved by dt={P.dt}: need m*dt/T <= 0.1, "
                              "decrease dt")
    base = mild_solve_march(a, grid, u0, R, horizon, propagator=P)
    family = [oscillatory_family(a, m, amplitude) for m in m_list]
    same_principal = all(flatten(am).to_dict() == flatten(a).to_dict() for am in family)

    def run(am):
        return sup_difference(mild_solve_march(am, grid, u0, R, horizon, propagator=P),
                              base, p, t_from=T1)

    errors = _map(run, family, threads)
    checks = _ladder_checks(errors)
    checks["principal_part_fixed"] = same_principal
    if amplitude != 0:
        checks["positive"] = all(e > 0 for e in errors)
    notes = ["decay criterion E(last) <= E(first)/4 is a calibrated proxy"]
    return ExperimentReport(scenario, "m", list(m_list), errors, [], checks,
                            {"amplitude": amplitude, "T1": T1}, notes)


def delay_convergence_experiment(a, grid, u0, R, m_list=(4, 8, 16, 32, 64), opts=None, p=2,
                                 horizon=None, propagator=None, threads=1, scenario="delay",
                                 delays=None):
    """``E(m) = sup_{[0,T]} ||u(R_m) - u(R)||_p`` with ``R_m = min(1, R + 1/m)`` by default."""
    P = _propagator(a, grid, opts, propagator)
    delays = delays if delays is not None else [ShiftedDelay(R, 1.0 / m) for m in m_list]
    for Rm in delays:
        lo, hi = Rm.bounds()
        if lo < 0 or hi > 1:
            raise DomainError("perturbed delay leaves [0, 1]")
    base = mild_solve_march(a, grid, u0, R, horizon, propagator=P)

    def run(Rm):
        return sup_difference(mild_solve_march(a, grid, u0, Rm, horizon, propagator=P),
                              base, p, t_from=base.start)

    errors = _map(run, delays, threads)
    return ExperimentReport(scenario, "m", list(m_list), errors, [], _ladder_checks(errors))


def joint_convergence_experiment(a, grid, u0, R, w, m_list=(4, 8, 16, 32, 64), amplitude=1.0,
                                 opts=None, p=2, horizon=None, propagator=None, threads=1,
                                 scenario="joint"):
    """Perturb coefficients, delay and history together (``a_m``, ``R + 1/m``, ``u0 + w/m``).

    The joint error is compared with the sum of the three single-parameter errors.
    """
    P = _propagator(a, grid, opts, propagator)
    base = mild_solve_march(a, grid, u0, R, horizon, propagator=P)

    def run(m):
        am = oscillatory_family(a, m, amplitude)
        Rm = ShiftedDelay(R, 1.0 / m)
        um = u0 + (1.0 / m) * w
        t0 = base.start

        def err(coef, delay, hist):
            tr = mild_solve_march(coef, grid, hist, delay, horizon, propagator=P)
            return sup_difference(tr, base, p, t_from=t0)

        return err(am, Rm, um), err(am, R, u0) + err(a, Rm, u0) + err(a, R, um)

    pairs = _map(run, list(m_list), threads)
    errors = [j for j, _ in pairs]
    bounds = [(1.0 + SLACK) * s for _, s in pairs]
    checks = _ladder_checks(errors)
    checks["triangle"] = all(e <= b for e, b in zip(errors, bounds))
    return ExperimentReport(scenario, "m", list(m_list), errors, bounds, checks,
                            {"amplitude": amplitude})


def picard_march_gap(a, grid, u0, R, opts=None, p=2, tol=None, horizon=None, propagator=None,
                     M=None, gamma=None):
    """Run both solvers; return ``(gap, envelope, picard_trajectory)``.

    The envelope is ``5 dt (1 + K) ||u0||_C``.
    """
    P = _propagator(a, grid, opts, propagator)
    norm0 = u0.sup_norm(p, grid)
    tol = tol if tol is not None else max(1e-8 * norm0, 1e-300)
    march = mild_solve_march(a, grid, u0, R, horizon, propagator=P)
    picard = mild_solve_picard(a, grid, u0, R, horizon, tol=tol, p=p, M=M, gamma=gamma,
                               propagator=P)
    gap = sup_difference(picard, march, p, t_from=march.start)
    envelope = 5.0 * P.dt * (1.0 + sup_bound_K(a)) * norm0
    return gap, envelope, picard


__all__ = [
    "delta", "delta_profile", "gronwall_constants", "global_bound", "GronwallResult",
    "gronwall_check", "stability_constant", "sup_difference", "ExperimentReport",
    "estimate_constants", "ic_continuity_experiment", "coefficient_convergence_experiment",
    "delay_convergence_experiment", "joint_convergence_experiment", "picard_march_gap",
]
