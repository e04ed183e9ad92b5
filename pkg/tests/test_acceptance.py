"""Acceptance criteria, each at its stated tolerance.

Every test records its outcome through the ``criterion`` fixture; the
terminal summary prints one pass/fail line per criterion.
"""
import json
import math
from pathlib import Path

import numpy as np
import pytest
from numpy.polynomial import Polynomial

from parabolic_delay import (Propagator, PropagatorOptions, SinusoidTime, SpaceGrid,
                             adjoint_propagate, cli, coefficient_convergence_experiment,
                             coefficient_set, delay_convergence_experiment, discrete_norm,
                             estimate_constants, flatten, gronwall_check,
                             ic_continuity_experiment, mild_solve_march, picard_march_gap,
                             propagate, propagate_kernel, smoothing_exponent_fit,
                             stability_constant, verify_cocycle)
from parabolic_delay.oracle import DelayOdeSpec, EigenmodeSpec, delay_ode_steps
from parabolic_delay.scenarios import benchmark, random_history, random_scenario, random_suite

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
SCHEMES = ("backward_euler", "crank_nicolson")


def heat_propagator(n, dt, T, scheme="crank_nicolson"):
    grid = SpaceGrid((1.0,), (n,), "dirichlet")
    return Propagator(coefficient_set(T=T), grid, PropagatorOptions(scheme, dt))


def test_c1_propagator_accuracy_and_order(criterion):
    spec = EigenmodeSpec()
    t = 0.1
    P = heat_propagator(256, 1e-4, t)
    u0 = spec.profile(P.grid.points)
    exact = math.exp(-spec.eigenvalue * t) * u0
    err = discrete_norm(propagate(P, 0.0, t, u0) - exact, 2, P.grid) \
        / discrete_norm(exact, 2, P.grid)

    # time order against the semi-discrete solution exp(-lambda_h t) of the same grid
    lam_h = spec.discrete_eigenvalue(P.grid.h)
    ref = math.exp(-lam_h * t) * u0
    dts = (0.01, 0.005, 0.0025, 0.00125)
    errs = [discrete_norm(propagate(heat_propagator(256, dt, t), 0.0, t, u0) - ref, 2, P.grid)
            for dt in dts]
    orders = [math.log2(e0 / e1) for e0, e1 in zip(errs, errs[1:])]
    ok = err <= 1e-3 and all(abs(o - 2.0) <= 0.3 for o in orders)
    criterion(1, ok, f"rel L2 error {err:.2e} (<= 1e-3), CN orders "
                     + ", ".join(f"{o:.3f}" for o in orders) + " (2 +- 0.3)")
    assert ok


def test_c2_cocycle_exact(criterion):
    rng = np.random.default_rng(2024)
    worst = 0.0
    for case in range(50):
        sc = random_scenario(case, scheme=SCHEMES[case % 2])
        P = Propagator(flatten(sc.a), sc.grid, sc.opts)
        k = np.sort(rng.integers(0, P.n_steps + 1, size=3))
        u = rng.standard_normal(sc.grid.size)
        worst = max(worst, verify_cocycle(P, *(k * P.dt), u))
    ok = worst == 0.0
    criterion(2, ok, f"max residual {worst!r} over 50 cases (== 0.0)")
    assert ok


def nonsymmetric(n, dt, scheme="backward_euler"):
    grid = SpaceGrid((1.0,), (n,), "dirichlet")
    a = coefficient_set(T=1.0, a=[[SinusoidTime(1.0, 0.3, 4.0)]], a_vec=[0.4],
                        b=[SinusoidTime(1.5, 0.5, 3.0)], c0=-0.5)
    return Propagator(a, grid, PropagatorOptions(scheme, dt))


def test_c3_duality(criterion):
    rng = np.random.default_rng(3)
    worst = 0.0
    for case in range(50):
        sc = random_scenario(1000 + case, scheme=SCHEMES[case % 2])
        assert sc.a.b[0].base != 0.0 or sc.a.b[0].amplitude != 0.0
        P = Propagator(flatten(sc.a), sc.grid, sc.opts)
        k0, k1 = np.sort(rng.integers(0, P.n_steps + 1, size=2))
        u, v = rng.standard_normal((2, sc.grid.size))
        lhs = propagate(P, k0 * P.dt, k1 * P.dt, u) @ v
        rhs = u @ adjoint_propagate(P, k1 * P.dt, k0 * P.dt, v, "transpose")
        worst = max(worst, abs(lhs - rhs) / (np.linalg.norm(u) * np.linalg.norm(v)))

    gaps = []
    for n, dt in ((128, 1e-3), (256, 5e-4)):
        P = nonsymmetric(n, dt)
        x = P.grid.points[:, 0]
        v = np.sin(np.pi * x) + 0.5 * np.sin(3 * np.pi * x) * x
        a = adjoint_propagate(P, 0.5, 0.0, v, "transpose")
        b = adjoint_propagate(P, 0.5, 0.0, v, "backward_pde")
        gaps.append(float(np.linalg.norm(a - b) / np.linalg.norm(a)))
    ok = worst <= 1e-10 and gaps[0] <= 5e-2 and gaps[1] < gaps[0]
    criterion(3, ok, f"transpose residual {worst:.1e} (<= 1e-10); backward-PDE gap "
                     f"{gaps[0]:.2e} at n=128 (<= 5e-2) -> {gaps[1]:.2e} after halving")
    assert ok


def random_positive_set(rng):
    dim = 1 + int(rng.integers(2))
    bc = ("dirichlet", "neumann", "robin")[rng.integers(3)]
    diag = [SinusoidTime(b, rng.uniform(0, 0.4) * b, rng.uniform(1, 6))
            for b in rng.uniform(0.5, 2.0, dim)]
    a = [[diag[i] if i == j else 0.0 for j in range(dim)] for i in range(dim)]
    coef = coefficient_set(dim=dim, T=0.2, bc=bc, a=a,
                           a_vec=list(rng.uniform(-1, 1, dim)),
                           b=[SinusoidTime(rng.uniform(-2, 2), rng.uniform(0, 1), 5.0)
                              for _ in range(dim)],
                           c0=-float(rng.uniform(0, 2)),
                           d0=float(rng.uniform(0, 2)) if bc == "robin" else 0.0)
    cells = (int(rng.choice([16, 24, 32])),) if dim == 1 else (8, 10)
    return coef, SpaceGrid((1.0,) * dim, cells, bc)


def test_c4_kernel_positivity(criterion):
    rng = np.random.default_rng(4)
    worst = math.inf
    for _ in range(20):
        a, grid = random_positive_set(rng)
        P = Propagator(a, grid, PropagatorOptions("backward_euler", 1e-3, positivity_safe=True))
        K = propagate_kernel(P, 0.05, 0.15)
        worst = min(worst, float(K.min() / K.max()))
    ok = worst >= -1e-12
    criterion(4, ok, f"min kernel entry / max entry {worst:.2e} over 20 sets (>= -1e-12)")
    assert ok


def test_c5_smoothing_1d(criterion):
    P = heat_propagator(512, 1e-4, 0.064, "backward_euler")
    fit = smoothing_exponent_fit(P, [0.004 * 2 ** k for k in range(5)])
    ok = abs(fit.slope + 0.5) <= 0.075
    criterion(5, ok, f"1-D slope {fit.slope:.4f} (-0.5 +- 0.075)")
    assert ok


@pytest.mark.slow
def test_c5_smoothing_2d(criterion):
    grid = SpaceGrid((1.0, 1.0), (64, 64), "dirichlet")
    P = Propagator(coefficient_set(dim=2, T=0.032), grid, PropagatorOptions("backward_euler", 2e-4))
    fit = smoothing_exponent_fit(P, [0.002 * 2 ** k for k in range(5)])
    ok = abs(fit.slope + 1.0) <= 0.15
    criterion(5, ok, f"2-D slope {fit.slope:.4f} (-1.0 +- 0.15)")
    assert ok


@pytest.mark.parametrize("scheme", SCHEMES)
def test_c6_eigenmode_benchmark(criterion, scheme):
    r, c, T = 0.5, 4.0, 2.0
    sc = benchmark(n=256, dt=1e-4, T=T, r=r, c=c, scheme=scheme)
    traj = mild_solve_march(sc.a, sc.grid, sc.u0, sc.R, opts=sc.opts)
    x = delay_ode_steps(DelayOdeSpec(math.pi ** 2, c, r, Polynomial([1.0, 1.0])), T)
    mode = EigenmodeSpec().profile(sc.grid.points)
    exact = np.outer(x(traj.times), mode)
    err = np.max(np.abs(traj.nodes - exact)) / np.max(np.abs(exact))
    ok = err <= 1e-3
    criterion(6, ok, f"{scheme} sup rel error {err:.2e} (<= 1e-3)")
    assert ok


def test_c6_picard_vs_march(criterion):
    worst_gap, worst_iters, bounded = 0.0, 0, True
    for sc in random_suite(20, seed=0, small_delay=True):
        gap, env, pic = picard_march_gap(sc.a, sc.grid, sc.u0, sc.R, sc.opts, p=sc.p)
        worst_gap = max(worst_gap, gap / env)
        its = pic.info["iterations"]
        worst_iters = max(worst_iters, max(its))
        bounded &= all(i <= b for i, b in zip(its, pic.info["iteration_bounds"]))
    ok = worst_gap <= 1.0 and worst_iters <= 8 and bounded
    criterion(6, ok, f"Picard-march gap / envelope {worst_gap:.1e} (<= 1), "
                     f"max sweeps per chunk {worst_iters} (<= 8)")
    assert ok


@pytest.fixture(scope="module")
def suite():
    """20 random scenarios with their trajectories and all-pairs constants."""
    out = []
    for sc in random_suite(20, seed=100):
        P = Propagator(flatten(sc.a), sc.grid, sc.opts)
        consts = estimate_constants(sc.a, P, sc.p, stride=1)
        traj = mild_solve_march(sc.a, sc.grid, sc.u0, sc.R, propagator=P)
        out.append((sc, P, consts, traj))
    return out


def test_c7_gronwall_suite(criterion, suite):
    worst, worst_stab, ok = 0.0, 0.0, True
    for sc, _, consts, traj in suite:
        res = gronwall_check(traj, consts["M1"], consts["M2"], sc.p)
        stab = stability_constant([traj], sc.p)
        ok &= res.passed and stab <= consts["Mbar"]
        worst = max(worst, res.max_ratio)
        worst_stab = max(worst_stab, stab / consts["Mbar"])
    criterion(7, ok, f"max Gronwall ratio {worst:.6f} (<= 1), "
                     f"max stability / Mbar {worst_stab:.3f} (<= 1) over 20 scenarios")
    assert ok


def test_c8_ic_continuity_suite(criterion, suite):
    worst_dev, worst_lip, ok = 0.0, 0.0, True
    for i, (sc, P, consts, _) in enumerate(suite):
        w = random_history(np.random.default_rng(500 + i), sc.grid, sc.u0.K)
        rep = ic_continuity_experiment(sc.a, sc.grid, sc.R, sc.u0, w, p=sc.p,
                                       constants=consts, propagator=P)
        ok &= rep.passed
        worst_dev = max(worst_dev, rep.constants["homogeneity_deviation"])
        worst_lip = max(worst_lip, max(e / b for e, b in zip(rep.errors, rep.bounds)))
    ok &= worst_dev <= 1e-8
    criterion(8, ok, f"homogeneity deviation {worst_dev:.1e} (<= 1e-8), "
                     f"max error / Lipschitz bound {worst_lip:.3f} (<= 1)")
    assert ok


def test_c9_coefficient_continuity(criterion):
    sc = benchmark()
    rep = coefficient_convergence_experiment(sc.a, sc.grid, sc.R, sc.u0, 0.5, opts=sc.opts)
    E = rep.errors
    ok = E[-1] <= E[0] / 4 and rep.checks["monotone"] and rep.checks["positive"]
    criterion(9, ok, f"E(4) {E[0]:.3e} -> E(64) {E[-1]:.3e} (ratio {E[0] / E[-1]:.1f} >= 4), "
                     f"monotone within 10%: {rep.checks['monotone']}")
    assert ok


def test_c10_delay_continuity(criterion):
    sc = benchmark()
    rep = delay_convergence_experiment(sc.a, sc.grid, sc.u0, sc.R, opts=sc.opts)
    E = rep.errors
    ok = E[-1] <= E[0] / 4
    criterion(10, ok, f"E(4) {E[0]:.3e} -> E(64) {E[-1]:.3e} (ratio {E[0] / E[-1]:.1f} >= 4)")
    assert ok


def _snapshot(root):
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*"))
            if p.is_file()}


def test_c11_determinism(criterion, tmp_path):
    runs = []
    for config in sorted(CONFIGS.glob("*.json")):
        cfg = json.loads(config.read_text())
        commands = ["sweep"] if "sweep" in cfg else list(cfg.get("experiments", {})) + ["solve"]
        for command in commands:
            runs.append((config, command))
    same = True
    for config, command in runs:
        snaps = []
        for rep, threads in (("a", "1"), ("b", "4")):
            out = tmp_path / rep / config.stem / command
            code = cli.main([command, "--config", str(config), "--out", str(out),
                             "--threads", threads])
            assert code == 0
            snaps.append(_snapshot(out))
        same &= snaps[0] == snaps[1] and len(snaps[0]) > 0
    criterion(11, same, f"{len(runs)} config/command runs byte-identical across reruns "
                        "(1 vs 4 threads)")
    assert same
