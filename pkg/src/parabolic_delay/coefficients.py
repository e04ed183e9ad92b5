"""Coefficient descriptors, delay maps and the families used in continuity runs.

A coefficient set bundles every field of the delay equation

    u_t = sum_i d_i( sum_j a_ij d_j u + a_i u ) + sum_i b_i d_i u + c0 u + c1 u(t - R(t))

together with the boundary field ``d0`` and the boundary kind.  Fields are
closed-form or tabulated descriptors so that sup-bounds and ellipticity can
be computed from them directly.

Spatial arrays inside descriptors are node samples on a uniform lattice that
spans the box ``[0, L_1] x ... x [0, L_N]`` (endpoints included) and are
interpolated linearly, clamped at the edges.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .errors import DomainError, InvariantViolation

BC_KINDS = ("dirichlet", "neumann", "robin")

_TIME_SLACK = 1e-12


def _as_points(x, dim):
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1, 1)
    elif x.ndim == 1:
        x = x.reshape(-1, 1) if dim == 1 else x.reshape(1, -1)
    if x.shape[1] != dim:
        raise DomainError(f"points have dimension {x.shape[1]}, expected {dim}")
    return x


def _interp_space(values, lengths, x):
    """Linear interpolation of node samples ``values`` at points ``x``.

    ``values`` is a scalar (spatially constant) or an array with one axis per
    space dimension.  Returns an array with one entry per point.
    """
    if np.ndim(values) == 0:
        return np.full(np.shape(x)[0] if np.ndim(x) else 1, float(values))
    values = np.asarray(values, dtype=float)
    dim = values.ndim
    pts = _as_points(x, dim)
    if lengths is None:
        lengths = (1.0,) * dim
    idx = []
    wts = []
    for axis in range(dim):
        m = values.shape[axis]
        if m == 1:
            idx.append(np.zeros(len(pts), dtype=int))
            wts.append(np.zeros(len(pts)))
            continue
        f = np.clip(pts[:, axis] / lengths[axis], 0.0, 1.0) * (m - 1)
        i0 = np.minimum(np.floor(f).astype(int), m - 2)
        idx.append(i0)
        wts.append(f - i0)
    if dim == 1:
        v = values
        if v.shape[0] == 1:
            return np.full(len(pts), v[0])
        i, w = idx[0], wts[0]
        return (1 - w) * v[i] + w * v[i + 1]
    v = values
    i, wi = idx[0], wts[0]
    j, wj = idx[1], wts[1]
    i1 = np.minimum(i + 1, v.shape[0] - 1)
    j1 = np.minimum(j + 1, v.shape[1] - 1)
    return ((1 - wi) * (1 - wj) * v[i, j] + wi * (1 - wj) * v[i1, j]
            + (1 - wi) * wj * v[i, j1] + wi * wj * v[i1, j1])


def _maxabs(values):
    return float(np.max(np.abs(np.asarray(values, dtype=float))))


def _tolist(values):
    return values.tolist() if isinstance(values, np.ndarray) else values


def _freeze(values):
    if np.ndim(values) == 0:
        return float(values)
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Scalar fields
# ---------------------------------------------------------------------------

class ScalarField:
    """Base class for coefficient descriptors.

    Subclasses implement ``__call__(t, x)`` vectorized over an ``(npts, dim)``
    point array, ``sup_bound()``, ``time_independent`` and ``to_dict()``.
    """

    kind = "abstract"

    def __call__(self, t, x):
        raise NotImplementedError

    def sup_bound(self):
        raise NotImplementedError

    def upper_bound(self):
        """Signed upper bound (ess sup, not of the modulus)."""
        raise NotImplementedError

    def scaled(self, factor):
        raise NotImplementedError

    @property
    def time_independent(self):
        raise NotImplementedError

    def time_breaks(self):
        """Times where the descriptor switches value (used for sampling)."""
        return ()

    def to_dict(self):
        raise NotImplementedError

    def same_as(self, other):
        return isinstance(other, ScalarField) and self.to_dict() == other.to_dict()


@dataclass(frozen=True, eq=False)
class Constant(ScalarField):
    value: float

    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))

    def __call__(self, t, x):
        return np.full(np.shape(x)[0] if np.ndim(x) else 1, self.value)

    def sup_bound(self):
        return abs(self.value)

    def upper_bound(self):
        return self.value

    def scaled(self, factor):
        return Constant(factor * self.value)

    @property
    def time_independent(self):
        return True

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True, eq=False)
class SinusoidTime(ScalarField):
    """``(base + amplitude * sin(omega * t + phase)) * profile(x)``."""

    base: float
    amplitude: float
    omega: float
    phase: float = 0.0
    profile: object = None
    lengths: tuple | None = None

    kind = "sinusoid_time"

    def __post_init__(self):
        for name in ("base", "amplitude", "omega", "phase"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if self.profile is not None:
            object.__setattr__(self, "profile", _freeze(self.profile))

    def __call__(self, t, x):
        scale = self.base + self.amplitude * math.sin(self.omega * t + self.phase)
        if self.profile is None:
            return np.full(np.shape(x)[0] if np.ndim(x) else 1, scale)
        return scale * _interp_space(self.profile, self.lengths, x)

    def sup_bound(self):
        prof = 1.0 if self.profile is None else _maxabs(self.profile)
        return (abs(self.base) + abs(self.amplitude)) * prof

    def upper_bound(self):
        if self.profile is None:
            pmin = pmax = 1.0
        else:
            pmin, pmax = float(np.min(self.profile)), float(np.max(self.profile))
        amp = abs(self.amplitude)
        return max((self.base + s) * p for s in (-amp, amp) for p in (pmin, pmax))

    def scaled(self, factor):
        return SinusoidTime(factor * self.base, factor * self.amplitude, self.omega,
                            self.phase, self.profile, self.lengths)

    @property
    def time_independent(self):
        return self.amplitude == 0.0 or self.omega == 0.0

    def to_dict(self):
        d = {"kind": self.kind, "base": self.base, "amplitude": self.amplitude,
             "omega": self.omega, "phase": self.phase}
        if self.profile is not None:
            d["profile"] = _tolist(self.profile)
            if self.lengths is not None:
                d["lengths"] = list(self.lengths)
        return d


@dataclass(frozen=True, eq=False)
class PiecewiseConstantTime(ScalarField):
    """Right-continuous step function in time: piece k holds on ``[b_{k-1}, b_k)``."""

    breakpoints: tuple
    values: tuple
    lengths: tuple | None = None

    kind = "piecewise_constant_time"

    def __post_init__(self):
        breaks = tuple(float(b) for b in self.breakpoints)
        if any(b1 <= b0 for b0, b1 in zip(breaks, breaks[1:])):
            raise DomainError("breakpoints must be strictly ascending")
        if len(self.values) != len(breaks) + 1:
            raise DomainError("need exactly len(breakpoints) + 1 values")
        object.__setattr__(self, "breakpoints", breaks)
        object.__setattr__(self, "values", tuple(_freeze(v) for v in self.values))

    def _piece(self, t):
        return int(np.searchsorted(self.breakpoints, t, side="right"))

    def __call__(self, t, x):
        v = self.values[self._piece(t)]
        return _interp_space(v, self.lengths, x)

    def sup_bound(self):
        return max(_maxabs(v) for v in self.values)

    def upper_bound(self):
        return max(float(np.max(v)) for v in self.values)

    def scaled(self, factor):
        return PiecewiseConstantTime(self.breakpoints, tuple(factor * np.asarray(v) for v in self.values),
                                     self.lengths)

    @property
    def time_independent(self):
        return len(self.values) == 1

    def time_breaks(self):
        return self.breakpoints

    def to_dict(self):
        d = {"kind": self.kind, "breakpoints": list(self.breakpoints),
             "values": [_tolist(v) for v in self.values]}
        if self.lengths is not None:
            d["lengths"] = list(self.lengths)
        return d


@dataclass(frozen=True, eq=False)
class SampledGrid(ScalarField):
    """Tabulated field: nearest time node, linear interpolation in space."""

    time_nodes: tuple
    space_arrays: tuple
    lengths: tuple | None = None

    kind = "sampled_grid"

    def __post_init__(self):
        nodes = tuple(float(t) for t in self.time_nodes)
        if not nodes or any(b <= a for a, b in zip(nodes, nodes[1:])):
            raise DomainError("time_nodes must be nonempty and strictly ascending")
        if len(self.space_arrays) != len(nodes):
            raise DomainError("one space array per time node is required")
        object.__setattr__(self, "time_nodes", nodes)
        object.__setattr__(self, "space_arrays", tuple(_freeze(v) for v in self.space_arrays))

    def _nearest(self, t):
        nodes = np.asarray(self.time_nodes)
        return int(np.argmin(np.abs(nodes - t)))

    def __call__(self, t, x):
        v = self.space_arrays[self._nearest(t)]
        return _interp_space(v, self.lengths, x)

    def sup_bound(self):
        return max(_maxabs(v) for v in self.space_arrays)

    def upper_bound(self):
        return max(float(np.max(v)) for v in self.space_arrays)

    def scaled(self, factor):
        return SampledGrid(self.time_nodes, tuple(factor * np.asarray(v) for v in self.space_arrays),
                           self.lengths)

    @property
    def time_independent(self):
        return len(self.time_nodes) == 1

    def time_breaks(self):
        n = self.time_nodes
        return tuple(0.5 * (a + b) for a, b in zip(n, n[1:]))

    def to_dict(self):
        d = {"kind": self.kind, "time_nodes": list(self.time_nodes),
             "space_arrays": [_tolist(v) for v in self.space_arrays]}
        if self.lengths is not None:
            d["lengths"] = list(self.lengths)
        return d


@dataclass(frozen=True, eq=False)
class SumField(ScalarField):
    """Pointwise sum of descriptors; produced by perturbation families."""

    terms: tuple

    kind = "sum"

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def __call__(self, t, x):
        return sum(term(t, x) for term in self.terms)

    def sup_bound(self):
        return sum(term.sup_bound() for term in self.terms)

    def upper_bound(self):
        return sum(term.upper_bound() for term in self.terms)

    def scaled(self, factor):
        return SumField(tuple(term.scaled(factor) for term in self.terms))

    @property
    def time_independent(self):
        return all(term.time_independent for term in self.terms)

    def time_breaks(self):
        return tuple(sorted({b for term in self.terms for b in term.time_breaks()}))

    def to_dict(self):
        return {"kind": self.kind, "terms": [term.to_dict() for term in self.terms]}


_FIELD_KINDS = {
    "constant": lambda d: Constant(d["value"]),
    "sinusoid_time": lambda d: SinusoidTime(
        d["base"], d["amplitude"], d["omega"], d.get("phase", 0.0),
        d.get("profile"), _opt_tuple(d.get("lengths"))),
    "piecewise_constant_time": lambda d: PiecewiseConstantTime(
        d["breakpoints"], d["values"], _opt_tuple(d.get("lengths"))),
    "sampled_grid": lambda d: SampledGrid(
        d["time_nodes"], d["space_arrays"], _opt_tuple(d.get("lengths"))),
    "sum": lambda d: SumField(tuple(field_from_dict(t) for t in d["terms"])),
}


def _opt_tuple(v):
    return None if v is None else tuple(float(x) for x in v)


def as_field(value):
    """Wrap a number as ``Constant``; pass descriptors and tagged dicts through."""
    if isinstance(value, ScalarField):
        return value
    if isinstance(value, dict):
        return field_from_dict(value)
    return Constant(value)


def field_from_dict(d):
    try:
        builder = _FIELD_KINDS[d["kind"]]
    except KeyError:
        raise DomainError(f"unknown field kind {d.get('kind')!r}") from None
    return builder(d)


def evaluate_field(f, t, x, T, lengths):
    """Value of descriptor ``f`` at a single point ``(t, x)`` of ``[0,T] x closure(D)``."""
    if not (-_TIME_SLACK <= t <= T + _TIME_SLACK):
        raise DomainError(f"t={t} outside [0, {T}]")
    pt = np.atleast_1d(np.asarray(x, dtype=float))
    if pt.shape != (len(lengths),):
        raise DomainError(f"point {x} does not match a {len(lengths)}-dimensional domain")
    if np.any(pt < -_TIME_SLACK) or np.any(pt > np.asarray(lengths) + _TIME_SLACK):
        raise DomainError(f"x={x} outside the closed domain")
    return float(f(t, pt.reshape(1, -1))[0])


# ---------------------------------------------------------------------------
# Delay maps
# ---------------------------------------------------------------------------

class DelayMap:
    """A delay ``R`` with ``0 <= R(t) <= 1``; call it to get ``R(t)``."""

    kind = "abstract"

    def __call__(self, t):
        raise NotImplementedError

    def bounds(self):
        """(lower, upper) envelope computable from the descriptor."""
        raise NotImplementedError

    def to_dict(self):
        raise NotImplementedError

    def _check(self):
        lo, hi = self.bounds()
        if lo < 0.0 or hi > 1.0:
            raise DomainError(f"delay values must lie in [0, 1], got range [{lo}, {hi}]")


@dataclass(frozen=True, eq=False)
class ConstantDelay(DelayMap):
    r: float

    kind = "constant"

    def __post_init__(self):
        object.__setattr__(self, "r", float(self.r))
        self._check()

    def __call__(self, t):
        return np.full(np.shape(t), self.r) if np.ndim(t) else self.r

    def bounds(self):
        return self.r, self.r

    def to_dict(self):
        return {"kind": self.kind, "r": self.r}


@dataclass(frozen=True, eq=False)
class PiecewiseConstantDelay(DelayMap):
    breakpoints: tuple
    values: tuple

    kind = "piecewise_constant_time"

    def __post_init__(self):
        object.__setattr__(self, "breakpoints", tuple(float(b) for b in self.breakpoints))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.values) != len(self.breakpoints) + 1:
            raise DomainError("need exactly len(breakpoints) + 1 values")
        self._check()

    def __call__(self, t):
        vals = np.asarray(self.values)
        out = vals[np.searchsorted(self.breakpoints, t, side="right")]
        return float(out) if np.ndim(t) == 0 else out

    def bounds(self):
        return min(self.values), max(self.values)

    def to_dict(self):
        return {"kind": self.kind, "breakpoints": list(self.breakpoints),
                "values": list(self.values)}


@dataclass(frozen=True, eq=False)
class SampledDelay(DelayMap):
    """Piecewise linear through ``(nodes, values)``, constant beyond the ends."""

    nodes: tuple
    values: tuple

    kind = "sampled_time"

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(float(b) for b in self.nodes))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if len(self.nodes) != len(self.values) or not self.nodes:
            raise DomainError("nodes and values must be nonempty and of equal length")
        self._check()

    def __call__(self, t):
        out = np.interp(t, self.nodes, self.values)
        return float(out) if np.ndim(t) == 0 else out

    def bounds(self):
        return min(self.values), max(self.values)

    def to_dict(self):
        return {"kind": self.kind, "nodes": list(self.nodes), "values": list(self.values)}


@dataclass(frozen=True, eq=False)
class SinusoidDelay(DelayMap):
    mean: float
    amplitude: float
    omega: float
    phase: float = 0.0

    kind = "sinusoid_time"

    def __post_init__(self):
        for name in ("mean", "amplitude", "omega", "phase"):
            object.__setattr__(self, name, float(getattr(self, name)))
        self._check()

    def __call__(self, t):
        return self.mean + self.amplitude * np.sin(self.omega * np.asarray(t) + self.phase) \
            if np.ndim(t) else self.mean + self.amplitude * math.sin(self.omega * t + self.phase)

    def bounds(self):
        return self.mean - abs(self.amplitude), self.mean + abs(self.amplitude)

    def to_dict(self):
        return {"kind": self.kind, "mean": self.mean, "amplitude": self.amplitude,
                "omega": self.omega, "phase": self.phase}


@dataclass(frozen=True, eq=False)
class ShiftedDelay(DelayMap):
    """``min(1, max(0, base(t) + shift))``: the perturbed maps of delay experiments."""

    base: DelayMap
    shift: float

    kind = "shifted"

    def __post_init__(self):
        object.__setattr__(self, "shift", float(self.shift))

    def __call__(self, t):
        return np.clip(self.base(t) + self.shift, 0.0, 1.0)

    def bounds(self):
        lo, hi = self.base.bounds()
        return min(1.0, max(0.0, lo + self.shift)), min(1.0, max(0.0, hi + self.shift))

    def to_dict(self):
        return {"kind": self.kind, "base": self.base.to_dict(), "shift": self.shift}


_DELAY_KINDS = {
    "constant": lambda d: ConstantDelay(d["r"]),
    "piecewise_constant_time": lambda d: PiecewiseConstantDelay(d["breakpoints"], d["values"]),
    "sampled_time": lambda d: SampledDelay(d["nodes"], d["values"]),
    "sinusoid_time": lambda d: SinusoidDelay(d["mean"], d["amplitude"], d["omega"],
                                             d.get("phase", 0.0)),
    "shifted": lambda d: ShiftedDelay(delay_from_dict(d["base"]), d["shift"]),
}


def delay_from_dict(d):
    try:
        builder = _DELAY_KINDS[d["kind"]]
    except KeyError:
        raise DomainError(f"unknown delay kind {d.get('kind')!r}") from None
    return builder(d)


def phi(R, t, T=None):
    """Relative time delay ``t - R(t)``."""
    if t < -_TIME_SLACK or (T is not None and t > T + _TIME_SLACK):
        raise DomainError(f"t={t} outside [0, {T}]")
    return t - float(R(t))


# ---------------------------------------------------------------------------
# Coefficient sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class CoefficientSet:
    """All coefficient fields of the delay equation on ``[0,T] x box(lengths)``."""

    dim: int
    T: float
    lengths: tuple
    a: tuple            # dim x dim principal part a_ij
    a_vec: tuple        # a_i, inside the divergence
    b: tuple            # b_i, first-order drift
    c0: ScalarField
    c1: ScalarField
    d0: ScalarField
    bc: str = "dirichlet"
    alpha0: float = field(init=False, default=float("nan"))

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError("only N = 1 or N = 2 is supported")
        if self.bc not in BC_KINDS:
            raise DomainError(f"bc must be one of {BC_KINDS}")
        if len(self.lengths) != self.dim or min(self.lengths) <= 0:
            raise DomainError("lengths must be positive, one per axis")
        if self.T <= 0:
            raise DomainError("T must be positive")
        a = tuple(tuple(as_field(f) for f in row) for row in self.a)
        if len(a) != self.dim or any(len(row) != self.dim for row in a):
            raise DomainError("a must be a dim x dim matrix of fields")
        a_vec = tuple(as_field(f) for f in self.a_vec)
        b = tuple(as_field(f) for f in self.b)
        if len(a_vec) != self.dim or len(b) != self.dim:
            raise DomainError("a_vec and b need one field per axis")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "a_vec", a_vec)
        object.__setattr__(self, "b", b)
        object.__setattr__(self, "c0", as_field(self.c0))
        object.__setattr__(self, "c1", as_field(self.c1))
        object.__setattr__(self, "d0", as_field(self.d0))
        object.__setattr__(self, "lengths", tuple(float(v) for v in self.lengths))
        object.__setattr__(self, "T", float(self.T))
        self._check_symmetric()
        samples = verification_samples(self)
        if self.bc == "robin":
            for t, x in samples:
                if np.any(self.d0(t, x) < 0):
                    raise InvariantViolation("Robin boundary field d0 must be >= 0", tag="Y2")
        alpha0 = ellipticity_constant(self, samples)
        if alpha0 <= 0:
            raise InvariantViolation(
                f"sampled ellipticity constant {alpha0} is not positive", tag="DA3")
        object.__setattr__(self, "alpha0", alpha0)

    def _check_symmetric(self):
        for i in range(self.dim):
            for j in range(i + 1, self.dim):
                if not self.a[i][j].same_as(self.a[j][i]):
                    raise InvariantViolation("a_ij must equal a_ji as descriptors", tag="DA3")

    def all_fields(self):
        out = [f for row in self.a for f in row]
        return out + list(self.a_vec) + list(self.b) + [self.c0, self.c1, self.d0]

    @property
    def is_autonomous(self):
        return all(f.time_independent for f in self.all_fields())

    @property
    def is_flat(self):
        return isinstance(self.c1, Constant) and self.c1.value == 0.0

    @property
    def has_first_order(self):
        zero = [isinstance(f, Constant) and f.value == 0.0 for f in self.a_vec + self.b]
        return not all(zero)

    def to_dict(self):
        return {
            "dim": self.dim, "T": self.T, "lengths": list(self.lengths), "bc": self.bc,
            "a": [[f.to_dict() for f in row] for row in self.a],
            "a_vec": [f.to_dict() for f in self.a_vec],
            "b": [f.to_dict() for f in self.b],
            "c0": self.c0.to_dict(), "c1": self.c1.to_dict(), "d0": self.d0.to_dict(),
        }


def coefficients_from_dict(d):
    dim = int(d.get("dim", 1))
    zero = [{"kind": "constant", "value": 0.0}] * dim
    default_a = [[{"kind": "constant", "value": 1.0 if i == j else 0.0} for j in range(dim)]
                 for i in range(dim)]
    return CoefficientSet(
        dim=dim, T=float(d.get("T", 1.0)), lengths=tuple(d.get("lengths", [1.0] * dim)),
        a=tuple(tuple(field_from_dict(f) if isinstance(f, dict) else as_field(f) for f in row)
                for row in d.get("a", default_a)),
        a_vec=tuple(as_field(f) for f in d.get("a_vec", zero)),
        b=tuple(as_field(f) for f in d.get("b", zero)),
        c0=as_field(d.get("c0", 0.0)), c1=as_field(d.get("c1", 0.0)),
        d0=as_field(d.get("d0", 0.0)), bc=d.get("bc", "dirichlet"))


def coefficient_set(dim=1, T=1.0, lengths=None, bc="dirichlet", diffusion=1.0,
                    a=None, a_vec=None, b=None, c0=0.0, c1=0.0, d0=0.0):
    """Convenience constructor; numbers are wrapped as ``Constant`` fields.

    Without ``a`` the principal part is ``diffusion`` times the identity.
    """
    lengths = tuple(lengths) if lengths is not None else (1.0,) * dim
    if a is None:
        a = [[diffusion if i == j else 0.0 for j in range(dim)] for i in range(dim)]
    if a_vec is None:
        a_vec = [0.0] * dim
    if b is None:
        b = [0.0] * dim
    return CoefficientSet(dim=dim, T=T, lengths=lengths,
                          a=tuple(tuple(row) for row in a), a_vec=tuple(a_vec),
                          b=tuple(b), c0=c0, c1=c1, d0=d0, bc=bc)


def verification_samples(a, n_time=33, n_space=9):
    """Sample set ``[(t, points)]`` used for sampled invariants.

    Times: a uniform grid on ``[0, T]`` plus every descriptor breakpoint and
    the midpoints around it; space: a uniform lattice including the boundary.
    """
    times = set(np.linspace(0.0, a.T, n_time).tolist())
    for f in a.all_fields():
        for br in f.time_breaks():
            for t in (br, br - 1e-9, br + 1e-9):
                if 0.0 <= t <= a.T:
                    times.add(t)
    axes = [np.linspace(0.0, L, n_space) for L in a.lengths]
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    return [(t, pts) for t in sorted(times)]


def adjoint_coefficients(a0):
    """Coefficients of the backward (adjoint) problem:
    ``(a_ji, a_i := -b_i, b_i := -a_i, c0, d0)``."""
    a_t = tuple(tuple(a0.a[j][i] for j in range(a0.dim)) for i in range(a0.dim))
    return replace(a0, a=a_t,
                   a_vec=tuple(f.scaled(-1.0) for f in a0.b),
                   b=tuple(f.scaled(-1.0) for f in a0.a_vec))


def flatten(a):
    """The delay-free companion of ``a``: identical except ``c1 = 0``."""
    if a.is_flat:
        return a
    return replace(a, c1=Constant(0.0))


def sup_bound_K(a):
    """Upper bound for ``ess sup_t ||c1(t, .)||_inf`` taken from the descriptor."""
    return a.c1.sup_bound()


def ellipticity_constant(a, samples: Sequence):
    """Minimum over ``samples`` of the smallest eigenvalue of ``[a_ij(t, x)]``."""
    if not samples:
        raise DomainError("need a nonempty sample set")
    for i in range(a.dim):
        for j in range(i + 1, a.dim):
            if not a.a[i][j].same_as(a.a[j][i]):
                raise InvariantViolation("a_ij must equal a_ji as descriptors", tag="DA3")
    lowest = math.inf
    for t, x in samples:
        pts = _as_points(x, a.dim)
        if a.dim == 1:
            lam = a.a[0][0](t, pts)
        else:
            p = a.a[0][0](t, pts)
            q = a.a[1][1](t, pts)
            r = a.a[0][1](t, pts)
            lam = 0.5 * (p + q) - np.sqrt(0.25 * (p - q) ** 2 + r * r)
        lowest = min(lowest, float(np.min(lam)))
    return lowest


def oscillatory_family(a, m, amplitude):
    """``a`` with ``c1`` replaced by ``c1 + amplitude * sin(2 pi m t / T)``.

    As ``m`` grows the perturbation tends to zero weak-* while the flattened
    set stays fixed.
    """
    if int(m) != m or m <= 0:
        raise DomainError("m must be a positive integer")
    if amplitude == 0:
        return a
    omega = 2.0 * math.pi * m / a.T
    wave = SinusoidTime(0.0, amplitude, omega)
    c1 = a.c1
    if isinstance(c1, Constant):
        new = SinusoidTime(c1.value, amplitude, omega)
    else:
        new = SumField((c1, wave))
    return replace(a, c1=new)
