"""
Heat equation with a constant delay
===================================

u_t = u_xx + c u(t - r) with history (1 + theta) sin(pi x).  The solution
stays a multiple x(t) of sin(pi x) and x solves the scalar delay equation
x' = -pi^2 x + c x(t - r), which the method of steps integrates accurately.
"""

import math

import numpy as np
from numpy.polynomial import Polynomial

from parabolic_delay import mild_solve_march, write_trajectory_csv
from parabolic_delay.oracle import DelayOdeSpec, delay_ode_steps
from parabolic_delay.scenarios import benchmark

r, c, T = 0.5, 4.0, 2.0
sc = benchmark(n=256, dt=1e-4, T=T, r=r, c=c, scheme="crank_nicolson")
traj = mild_solve_march(sc.a, sc.grid, sc.u0, sc.R, opts=sc.opts)

x = delay_ode_steps(DelayOdeSpec(math.pi ** 2, c, r, Polynomial([1.0, 1.0])), T)
mode = np.sin(math.pi * sc.grid.points[:, 0])

print("   t     solver amp   oracle amp")
for t in (0.0, 0.25, 0.5, 1.0, 1.5, 2.0):
    u = traj(t)
    print(f"{t:5.2f}   {u @ mode / (mode @ mode):11.6f}  {x(t):11.6f}")

exact = np.outer(x(traj.times), mode)
print(f"sup relative error {np.max(np.abs(traj.nodes - exact)) / np.max(np.abs(exact)):.2e}")

# History rows come first, so the table starts at t = -1
write_trajectory_csv(traj.restrict(0.1), "benchmark_trajectory.csv")
print("wrote benchmark_trajectory.csv and its .json sidecar")
