"""Closed-form and quadrature references used as ground truth in tests.

These deliberately avoid the implicit stepping used by the solvers: heat
modes are plain exponentials, and the scalar delay equation
``x' = -lam x + c x(t - r)`` is advanced interval by interval through its
variation-of-constants formula with composite Simpson quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainError


@dataclass(frozen=True)
class EigenmodeSpec:
    dim: int = 1
    bc: str = "dirichlet"
    k: tuple = (1,)
    alpha: float = 1.0
    c0: float = 0.0
    lengths: tuple = (1.0,)

    def __post_init__(self):
        if self.bc not in ("dirichlet", "neumann"):
            raise DomainError("eigenmodes exist in closed form for Dirichlet/Neumann only")
        if len(self.k) != self.dim or len(self.lengths) != self.dim:
            raise DomainError("need one mode index and one length per axis")
        if self.alpha <= 0:
            raise DomainError("alpha must be positive")

    @property
    def eigenvalue(self):
        return self.alpha * sum((ki * math.pi / L) ** 2 for ki, L in zip(self.k, self.lengths))

    def profile(self, x):
        """Mode shape at points ``x`` of shape ``(npts, dim)``."""
        x = np.asarray(x, dtype=float).reshape(-1, self.dim)
        trig = np.sin if self.bc == "dirichlet" else np.cos
        out = np.ones(len(x))
        for axis, (ki, L) in enumerate(zip(self.k, self.lengths)):
            out *= trig(ki * math.pi * x[:, axis] / L)
        return out

    def discrete_eigenvalue(self, h):
        """Eigenvalue of the 3-point (per axis) Dirichlet Laplacian for this mode."""
        if self.bc != "dirichlet":
            raise DomainError("the sampled mode is a discrete eigenvector only for Dirichlet")
        return self.alpha * sum(4.0 / hi ** 2 * math.sin(ki * math.pi * hi / (2 * L)) ** 2
                                for ki, hi, L in zip(self.k, h, self.lengths))


def heat_mode_solution(spec, t):
    """Amplitude ``exp((c0 - lambda_k) t)`` of a separated heat solution."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    return math.exp((spec.c0 - spec.eigenvalue) * t)


@dataclass(frozen=True)
class DelayOdeSpec:
    lam: float
    c: float
    r: float
    history: object  # numpy Polynomial or callable on [-r, 0]

    def __post_init__(self):
        if not (0 < self.r <= 1):
            raise DomainError("delay r must lie in (0, 1]")
        if self.lam < 0:
            raise DomainError("decay lam must be >= 0")

    def g(self, theta):
        return np.asarray(self.history(np.asarray(theta, dtype=float)), dtype=float) \
            * np.ones_like(np.asarray(theta, dtype=float))


@dataclass
class DelayOdeSolution:
    times: np.ndarray
    values: np.ndarray
    spec: DelayOdeSpec
    _spline: Callable = None

    def __post_init__(self):
        lam, c, r = self.spec.lam, self.spec.c, self.spec.r
        delayed = np.array([self._delayed(t) for t in self.times])
        slope = -lam * self.values + c * delayed
        self._spline = CubicHermiteSpline(self.times, self.values, slope)

    def _delayed(self, t):
        tau = t - self.spec.r
        if tau <= 0:
            return float(self.spec.g(tau))
        return float(np.interp(tau, self.times, self.values))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.where(t < 0, self.spec.g(np.minimum(t, 0.0)), self._spline(np.maximum(t, 0.0)))
        return float(out) if out.ndim == 0 else out


def _poly_exp_integral(P, lam, t):
    """``int_0^t exp(-lam (t - s)) P(s) ds`` in closed form."""
    if lam == 0:
        Q = P.integ()
        return Q(t) - Q(0.0)
    # antiderivative of e^{lam s} P(s) is e^{lam s} Q(s) with lam Q + Q' = P
    Q = Polynomial([0.0])
    deriv = P
    sign = 1.0
    for k in range(P.degree() + 1):
        Q = Q + sign * deriv / lam ** (k + 1)
        deriv = deriv.deriv()
        sign = -sign
    return Q(t) - np.exp(-lam * t) * Q(0.0)


def delay_ode_steps(spec, T, substeps=2000):
    """Method-of-steps solution of ``x' = -lam x + c x(t - r)`` on ``[0, T]``.

    Returns a ``DelayOdeSolution`` sampled on a uniform grid with
    ``substeps`` cells per delay interval; calling it interpolates with cubic
    Hermite pieces that use the exact derivative.
    """
    if T > 10:
        raise DomainError("horizon limited to T <= 10")
    if substeps < 1000:
        raise DomainError("need at least 1000 substeps per delay interval")
    lam, c, r = spec.lam, spec.c, spec.r
    S = int(substeps)
    h = r / S
    n_int = max(1, int(math.ceil(T / r - 1e-12)))
    local = np.arange(S + 1) * h
    prev = spec.g(local - r)
    x_start = float(spec.g(0.0))
    times = [np.array([0.0])]
    values = [np.array([x_start])]
    # the closed form loses digits to 1/lam^k terms when lam*r is tiny
    poly = isinstance(spec.history, Polynomial) and (lam == 0 or lam * r > 1e-3)
    for j in range(n_int):
        t0 = j * r
        if j == 0 and poly:
            shifted = spec.history(Polynomial([-r, 1.0]))
            integral = _poly_exp_integral(shifted, lam, local)
        else:
            # weights referenced to the interval end keep exponents <= 0
            F = cumulative_simpson(np.exp(-lam * (r - local)) * prev, dx=h, initial=0.0)
            integral = np.exp(lam * (r - local)) * F
        cur = np.exp(-lam * local) * x_start + c * integral
        times.append(t0 + local[1:])
        values.append(cur[1:])
        prev = cur
        x_start = float(cur[-1])
    times = np.concatenate(times)
    values = np.concatenate(values)
    keep = times <= T + 1e-12
    return DelayOdeSolution(times[keep], values[keep], spec)
