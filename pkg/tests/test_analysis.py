import csv
import json
import math

import numpy as np
import pytest

from parabolic_delay import (ConstantDelay, DomainError, HistorySegment, InvariantViolation,
                             Propagator, PropagatorOptions, SpaceGrid, Trajectory,
                             coefficient_set, coefficient_convergence_experiment,
                             delay_convergence_experiment, delta, delta_profile,
                             estimate_constants, flatten, global_bound, gronwall_check,
                             gronwall_constants, ic_continuity_experiment,
                             joint_convergence_experiment, mild_solve_march, picard_march_gap,
                             stability_constant)
from parabolic_delay.analysis import ExperimentReport, sup_difference
from parabolic_delay.discretization import discrete_norm
from parabolic_delay.scenarios import benchmark, mode_profile, random_history


def heat_traj(T=2.0, n=16, dt=0.02, c1=0.0, r=0.5, bc="dirichlet", scale=1.0):
    grid = SpaceGrid((1.0,), (n,), bc)
    a = coefficient_set(T=T, bc=bc, c1=c1)
    u0 = HistorySegment.constant(scale * mode_profile(grid, (1,)), int(round(1 / dt)))
    opts = PropagatorOptions("backward_euler", dt)
    return mild_solve_march(a, grid, u0, ConstantDelay(r), opts=opts)


def test_constants_formulae():
    assert gronwall_constants(2.0, 3.0, 0.0, 1.0) == (2.0, 6.0)
    M1, M2 = gronwall_constants(1.0, 1.0, 1.0, 2.0)
    assert M1 == pytest.approx(math.e ** 2) and M2 == pytest.approx(math.e ** 2)
    assert global_bound(2.0, 0.5, 2.0) == pytest.approx(2 * math.e)


def test_delta_constant_trajectory():
    grid = SpaceGrid((1.0,), (8,), "neumann")
    a = coefficient_set(T=1.0, bc="neumann")
    u0 = HistorySegment.constant(np.full(grid.size, 3.0), 10)
    traj = mild_solve_march(a, grid, u0, ConstantDelay(0.2),
                            opts=PropagatorOptions("backward_euler", 0.1))
    c = discrete_norm(np.full(grid.size, 3.0), 2, grid)
    for t in (0.0, 0.35, 1.0):
        assert delta(traj, t, 2) == pytest.approx(c, rel=1e-12)


def test_delta_at_zero_is_history_sup():
    traj = heat_traj()
    hist = traj.history
    assert delta(traj, 0.0, 2) == hist.sup_norm(2, traj.grid)
    with pytest.raises(DomainError):
        delta(traj, 2.5, 2)


def test_delta_decaying_heat_is_left_endpoint():
    traj = heat_traj()
    for t in (1.0, 1.3, 2.0):
        g = int(round(t / traj.dt)) - int(round(1 / traj.dt))
        assert delta(traj, t, 2) == pytest.approx(discrete_norm(traj.node(g), 2, traj.grid),
                                                  rel=1e-14)
    times, prof = delta_profile(traj, 2)
    assert np.all(np.diff(prof) <= 1e-15)
    for t, d in zip(times[::10], prof[::10]):
        assert d == pytest.approx(delta(traj, t, 2), rel=1e-14)


@pytest.mark.parametrize("c1", [0.0, 2.0, -3.0])
def test_delta_continuity_along_trajectory(c1):
    traj = heat_traj(c1=c1, r=0.3)
    times, prof = delta_profile(traj, "inf")
    K = traj.history.K
    allnodes = np.concatenate([traj.history.states[:K], traj.nodes])
    steps = [discrete_norm(d, "inf", traj.grid) for d in np.diff(allnodes, axis=0)]
    for j in range(len(prof) - 1):
        window = steps[j: j + K + 1]
        assert abs(prof[j + 1] - prof[j]) <= max(window) + 1e-14


def test_gronwall_zero_history():
    traj = heat_traj(c1=1.0, scale=0.0)
    res = gronwall_check(traj, 1.0, 1.0, 2)
    assert res.passed and res.max_ratio == 0.0


def test_gronwall_linearity_violation():
    traj = heat_traj(scale=0.0)
    states = traj.states.copy()
    states[5:] += 1.0
    bad = Trajectory(traj.start_index, traj.dt, states, traj.history, traj.grid, traj.frontier)
    with pytest.raises(InvariantViolation) as exc:
        gronwall_check(bad, 1.0, 1.0, 2)
    assert exc.value.tag == "linearity"


def test_gronwall_pure_heat():
    traj = heat_traj()
    P = Propagator(flatten(traj.coefficients), traj.grid, traj.options)
    c = estimate_constants(traj.coefficients, P, 2)
    res = gronwall_check(traj, c["M1"], c["M2"], 2)
    assert res.passed and res.max_ratio <= 1.0 / c["M1"] + 1e-12


def test_gronwall_with_delay_coupling():
    traj = heat_traj(c1=3.0, r=0.4)
    P = Propagator(flatten(traj.coefficients), traj.grid, traj.options)
    c = estimate_constants(traj.coefficients, P, 2, stride=1)
    assert gronwall_check(traj, c["M1"], c["M2"], 2).passed


def test_stability_constant():
    assert stability_constant([heat_traj()], 2) <= 1.0
    a = stability_constant([heat_traj(c1=2.0)], 1)
    b = stability_constant([heat_traj(c1=2.0, scale=10.0)], 1)
    assert a == pytest.approx(b, rel=1e-12)
    with pytest.raises(DomainError):
        stability_constant([], 2)


def test_sup_difference_rejects_mismatched_grids():
    with pytest.raises(Exception):
        sup_difference(heat_traj(), heat_traj(dt=0.01), 2)


def test_report_round_trip(tmp_path):
    rep = ExperimentReport("s", "m", [4, 8], [0.2, 0.1], [0.3, 0.05], {"ok": True})
    assert rep.rows()[1][3] is False
    rep.write_csv(tmp_path / "r.csv")
    rows = list(csv.reader((tmp_path / "r.csv").open(newline="")))
    assert rows[0] == ["m", "E", "bound", "pass"]
    assert rows[2][3] == "false"
    rep.write_json(tmp_path / "r.json")
    assert json.loads((tmp_path / "r.json").read_text())["passed"] is True
    with pytest.raises(InvariantViolation):
        ExperimentReport("s", "m", [1], [-1.0])


def small_benchmark():
    sc = benchmark(n=16, dt=0.01, T=1.0)
    return sc


def test_ic_continuity_homogeneous_and_lipschitz():
    sc = small_benchmark()
    w = random_history(np.random.default_rng(1), sc.grid, sc.u0.K)
    rep = ic_continuity_experiment(sc.a, sc.grid, sc.R, sc.u0, w, (1e-1, 1e-3, 1e-5, 0.0),
                                   opts=sc.opts, threads=2)
    assert rep.errors[-1] == 0.0
    assert rep.checks["homogeneous"] and rep.checks["lipschitz"]
    with pytest.raises(DomainError):
        ic_continuity_experiment(sc.a, sc.grid, sc.R, sc.u0, w, (1e-3, 1e-1), opts=sc.opts)


def test_coefficient_experiment_zero_amplitude():
    sc = small_benchmark()
    rep = coefficient_convergence_experiment(sc.a, sc.grid, sc.R, sc.u0, 0.5, (2, 4, 8),
                                             amplitude=0.0, opts=sc.opts)
    assert rep.errors == [0.0, 0.0, 0.0]
    assert rep.checks["principal_part_fixed"]


def test_coefficient_experiment_refuses_unresolved():
    sc = small_benchmark()
    with pytest.raises(DomainError):
        coefficient_convergence_experiment(sc.a, sc.grid, sc.R, sc.u0, 0.5, (4, 16), opts=sc.opts)
    with pytest.raises(DomainError):
        coefficient_convergence_experiment(sc.a, sc.grid, sc.R, sc.u0, 0.0, (4,), opts=sc.opts)


def test_delay_experiment_identity_and_bounds():
    sc = small_benchmark()
    rep = delay_convergence_experiment(sc.a, sc.grid, sc.u0, sc.R, (4, 8),
                                       opts=sc.opts, delays=[sc.R, sc.R])
    assert rep.errors == [0.0, 0.0]
    with pytest.raises(DomainError):
        delay_convergence_experiment(sc.a, sc.grid, sc.u0, sc.R, (4,), opts=sc.opts,
                                     delays=[_Wide()])


class _Wide(ConstantDelay):
    def __init__(self):
        super().__init__(0.5)

    def bounds(self):
        return (0.0, 1.5)


def test_delay_experiment_decays_for_constant_shift():
    sc = benchmark(n=16, dt=0.005, T=1.0)
    rep = delay_convergence_experiment(sc.a, sc.grid, sc.u0, sc.R, (4, 8, 16, 32), opts=sc.opts)
    assert rep.passed
    # Lipschitz dependence on a constant delay: m * E(m) stays bounded
    scaled = [m * e for m, e in zip(rep.values, rep.errors)]
    assert max(scaled) <= 2.0 * min(scaled)


def test_joint_experiment_triangle():
    sc = benchmark(n=16, dt=0.005, T=1.0)
    w = random_history(np.random.default_rng(2), sc.grid, sc.u0.K)
    rep = joint_convergence_experiment(sc.a, sc.grid, sc.u0, sc.R, w, (4, 8, 16), opts=sc.opts)
    assert rep.checks["triangle"]


def test_picard_march_gap_small():
    sc = small_benchmark()
    gap, envelope, pic = picard_march_gap(sc.a, sc.grid, sc.u0, sc.R, sc.opts)
    assert gap <= envelope
    assert pic.info["method"] == "picard"
