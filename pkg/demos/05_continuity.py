"""
Continuous dependence on data
=============================

The benchmark solution moves continuously with the initial history, with
oscillating delay coefficients (weak-* convergence) and with the delay map.
"""

import numpy as np

from parabolic_delay import (coefficient_convergence_experiment, delay_convergence_experiment,
                             ic_continuity_experiment)
from parabolic_delay.scenarios import benchmark, random_history

sc = benchmark()
w = random_history(np.random.default_rng(3), sc.grid, sc.u0.K)


def show(rep):
    print(f"{rep.scenario}: checks {rep.checks}")
    for v, e, b, _ in rep.rows():
        bound = "" if b is None else f"   bound {b:.3e}"
        print(f"  {rep.parameter}={v:<8g} E={e:.3e}{bound}")


# Errors are exactly linear in eps and below M1 exp(M2 T) eps ||w||
show(ic_continuity_experiment(sc.a, sc.grid, sc.R, sc.u0, w, opts=sc.opts, scenario="initial data"))

# c1 + sin(2 pi m t / T) converges weakly-* to c1; compare on [0.5, T]
show(coefficient_convergence_experiment(sc.a, sc.grid, sc.R, sc.u0, 0.5, opts=sc.opts,
                                        scenario="coefficients"))

# R + 1/m converges pointwise to R
show(delay_convergence_experiment(sc.a, sc.grid, sc.u0, sc.R, opts=sc.opts, scenario="delay"))
