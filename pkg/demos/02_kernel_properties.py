"""
Kernel positivity, duality and smoothing
========================================

Three structural facts about the discrete evolution family with variable,
non-symmetric coefficients.
"""

import numpy as np

from parabolic_delay import (Propagator, PropagatorOptions, SinusoidTime, SpaceGrid,
                             adjoint_propagate, coefficient_set, propagate, propagate_kernel,
                             smoothing_exponent_fit)

grid = SpaceGrid((1.0,), (64,), "robin")
a = coefficient_set(T=0.5, bc="robin", a=[[SinusoidTime(1.0, 0.3, 4.0)]], a_vec=[0.3],
                    b=[SinusoidTime(1.0, 0.5, 3.0)], c0=-0.2, d0=1.0)

# Upwinded first-order terms keep the backward Euler kernel nonnegative
P = Propagator(a, grid, PropagatorOptions("backward_euler", 1e-3, positivity_safe=True))
K = propagate_kernel(P, 0.1, 0.2)
print(f"kernel entries in [{K.min():.3e}, {K.max():.3e}]")

# Transposed steps in reverse order give the exact discrete adjoint
rng = np.random.default_rng(1)
u, v = rng.standard_normal((2, grid.size))
lhs = propagate(P, 0.1, 0.4, u) @ v
rhs = u @ adjoint_propagate(P, 0.4, 0.1, v, "transpose")
print(f"<Uu, v> - <u, U*v> = {lhs - rhs:.2e}")

# Marching the backward adjoint equation agrees up to discretization error
pde = adjoint_propagate(P, 0.4, 0.1, v, "backward_pde")
exact = adjoint_propagate(P, 0.4, 0.1, v, "transpose")
print(f"backward PDE vs transpose: {np.linalg.norm(pde - exact) / np.linalg.norm(exact):.2e}")

# ||U(t,0)||_{1->inf} grows like t^{-1/2} for short times in one dimension
heat = Propagator(coefficient_set(T=0.064), SpaceGrid((1.0,), (512,), "dirichlet"),
                  PropagatorOptions("backward_euler", 1e-4))
fit = smoothing_exponent_fit(heat, [0.004 * 2 ** k for k in range(5)])
for t, n in zip(fit.times, fit.norms):
    print(f"  t={t:<6g} ||U||_1->inf = {n:8.3f}")
print(f"fitted exponent {fit.slope:.4f}")
