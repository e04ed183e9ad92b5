"""Ready-made problems: the 1-D heat-with-delay benchmark and seeded random suites."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import (ConstantDelay, PiecewiseConstantDelay, SampledDelay, SinusoidDelay,
                           SinusoidTime, coefficient_set)
from .delay_solver import HistorySegment
from .discretization import SpaceGrid
from .propagator import PropagatorOptions


@dataclass
class Scenario:
    name: str
    a: object
    grid: SpaceGrid
    R: object
    u0: HistorySegment
    opts: PropagatorOptions
    p: object = 2
    extras: dict = field(default_factory=dict)


def mode_profile(grid, k):
    """Sine modes for Dirichlet grids, cosine modes otherwise."""
    trig = np.sin if grid.bc == "dirichlet" else np.cos
    x = grid.points
    out = np.ones(grid.size)
    for axis, ki in enumerate(k):
        out *= trig(ki * math.pi * x[:, axis] / grid.lengths[axis])
    return out


def history_steps(dt):
    """Samples on ``[-1, 0]`` matching the step grid when ``1/dt`` is an integer."""
    K = int(round(1.0 / dt))
    return K if abs(K * dt - 1.0) < 1e-9 else max(2, int(math.ceil(1.0 / dt)))


def benchmark(n=64, dt=1e-3, T=2.0, r=0.3, c=1.0, scheme="backward_euler", slope=1.0):
    """Dirichlet heat on (0,1) with ``c1 = c``, constant delay ``r`` and history
    ``(1 + slope * theta) sin(pi x)``."""
    grid = SpaceGrid((1.0,), (n,), "dirichlet")
    a = coefficient_set(T=T, c1=c)
    mode = mode_profile(grid, (1,))
    K = history_steps(dt)
    u0 = HistorySegment(np.array([(1.0 + slope * th) * mode for th in -1.0 + np.arange(K + 1) / K]))
    return Scenario("heat-delay", a, grid, ConstantDelay(r), u0, PropagatorOptions(scheme, dt))


def random_history(rng, grid, K, modes=3):
    """Smooth random initial data: a few spatial modes with polynomial/trigonometric time profiles."""
    th = -1.0 + np.arange(K + 1) / K
    states = np.zeros((K + 1, grid.size))
    for k in range(1, modes + 1):
        shape = mode_profile(grid, (k,) * grid.dim)
        c0, c1, c2 = rng.uniform(-1, 1, size=3)
        omega = rng.uniform(1, 6)
        states += np.outer(c0 + c1 * th + c2 * np.sin(omega * th), shape) / k
    return HistorySegment(states)


def random_delay(rng, small=False):
    hi = 0.1 if small else 1.0
    kind = rng.integers(4)
    if kind == 0:
        return ConstantDelay(rng.uniform(0, hi))
    if kind == 1:
        mean = rng.uniform(0.2, 0.8) * hi
        amp = 0.9 * min(mean, hi - mean) * rng.uniform()
        return SinusoidDelay(mean, amp, rng.uniform(1, 10), rng.uniform(0, 2 * math.pi))
    if kind == 2:
        return PiecewiseConstantDelay(tuple(np.sort(rng.uniform(0, 1, 2))),
                                      tuple(rng.uniform(0, hi, 3)))
    nodes = np.linspace(0, 1.5, 5)
    return SampledDelay(tuple(nodes), tuple(rng.uniform(0, hi, 5)))


def random_scenario(seed, scheme="backward_euler", dt=0.01, small_delay=False, p=None):
    """A seeded 1-D problem with time-dependent coefficients and a random delay."""
    rng = np.random.default_rng(seed)
    bc = ("dirichlet", "neumann", "robin")[rng.integers(3)]
    n = int(rng.choice([12, 16, 24]))
    T = float(rng.choice([1.0, 1.5]))
    base = rng.uniform(0.5, 1.5)
    diffusion = SinusoidTime(base, rng.uniform(0, 0.3) * base, rng.uniform(1, 6))
    a_vec = [float(rng.uniform(-0.5, 0.5))]
    b = [SinusoidTime(rng.uniform(-1, 1), rng.uniform(0, 0.5), rng.uniform(1, 6))]
    c0 = float(rng.uniform(-1.0, 0.5))
    if rng.uniform() < 0.5:
        c1 = float(rng.uniform(-2, 2))
    else:
        c1 = SinusoidTime(rng.uniform(-1.5, 1.5), rng.uniform(0, 1), rng.uniform(1, 8))
    d0 = float(rng.uniform(0, 2)) if bc == "robin" else 0.0
    a = coefficient_set(T=T, bc=bc, a=[[diffusion]], a_vec=a_vec, b=b, c0=c0, c1=c1, d0=d0)
    grid = SpaceGrid((1.0,), (n,), bc)
    u0 = random_history(rng, grid, history_steps(dt))
    if p is None:
        p = (1, 2, "inf")[seed % 3]
    return Scenario(f"random-{seed}", a, grid, random_delay(rng, small_delay), u0,
                    PropagatorOptions(scheme, dt, positivity_safe=True), p)


def random_suite(count=20, seed=0, **kwargs):
    return [random_scenario(seed + i, **kwargs) for i in range(count)]
