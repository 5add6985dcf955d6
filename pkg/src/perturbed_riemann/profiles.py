"""Initial data: periodic perturbations glued to a compact middle part.

The composite initial datum is

    u0(x) = u_left  + w_left(x)   for x < -N,
    u0(x) = u_right + w_right(x)  for x >  N,

with zero-average periodic ``w_left``, ``w_right``. Inside ``[-N, N]`` the
datum is stored as a *deviation* from the glued background (``u_left +
w_left`` for ``x < 0``, ``u_right + w_right`` for ``x > 0``), so every integral
of ``u0`` minus its background is compactly supported by construction.

All primitives are exact: sinusoids and sawtooths in closed form, sampled
data as piecewise quadratics (primitive of the piecewise-linear interpolant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy import optimize

from perturbed_riemann.flux import FluxModel

Array = Any


class PreconditionError(ValueError):
    """An operation was called outside its documented regime."""


# {{{ piecewise linear functions


@dataclass(frozen=True)
class PiecewiseLinear:
    """Piecewise-linear function on ``[nodes[0], nodes[-1]]``, zero outside.

    Repeated nodes encode jumps. ``primitive`` is ``int_0^x``.
    """

    nodes: np.ndarray
    values: np.ndarray
    _cumulative: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        nodes = np.asarray(self.nodes, dtype=np.float64)
        values = np.asarray(self.values, dtype=np.float64)
        if nodes.ndim != 1 or nodes.shape != values.shape or nodes.size < 2:
            raise ValueError("nodes and values must be 1d arrays of equal size >= 2")
        if np.any(np.diff(nodes) < 0):
            raise ValueError("nodes must be nondecreasing")
        if not np.all(np.isfinite(values)):
            raise ValueError("values must be finite")

        cum = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(nodes) * (values[1:] + values[:-1]))])
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "_cumulative", cum)

    @classmethod
    def zero(cls, N: float) -> PiecewiseLinear:
        return cls(np.array([-N, N]), np.zeros(2))

    @property
    def support(self) -> tuple[float, float]:
        return float(self.nodes[0]), float(self.nodes[-1])

    @property
    def mass(self) -> float:
        return float(self._cumulative[-1])

    def _locate(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        k = np.searchsorted(self.nodes, x, side="right") - 1
        k = np.clip(k, 0, self.nodes.size - 2)
        return k, np.clip(x, self.nodes[0], self.nodes[-1])

    def value(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        k, xc = self._locate(x)
        x0, x1 = self.nodes[k], self.nodes[k + 1]
        v0, v1 = self.values[k], self.values[k + 1]
        width = x1 - x0
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = np.where(width > 0, (xc - x0) / np.where(width > 0, width, 1.0), 0.0)
        v = v0 + lam * (v1 - v0)
        inside = (x >= self.nodes[0]) & (x <= self.nodes[-1])
        return np.where(inside, v, 0.0)

    def _cumulative_at(self, x: np.ndarray) -> np.ndarray:
        k, xc = self._locate(x)
        x0 = self.nodes[k]
        v0 = self.values[k]
        width = self.nodes[k + 1] - x0
        with np.errstate(divide="ignore", invalid="ignore"):
            slope = np.where(width > 0, (self.values[k + 1] - v0) / np.where(width > 0, width, 1.0), 0.0)
        dx = xc - x0
        return self._cumulative[k] + dx * (v0 + 0.5 * slope * dx)

    def primitive(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        return self._cumulative_at(x) - self._cumulative_at(np.float64(0.0))

    def breakpoints(self) -> np.ndarray:
        return np.unique(self.nodes)


# }}}


# {{{ periodic profiles


_ANALYTIC_KINDS = ("zero", "sin", "cos", "sawtooth")


@dataclass(frozen=True)
class PeriodicProfile:
    """Zero-average periodic perturbation.

    ``kind`` is one of ``zero``, ``sin``, ``cos``, ``sawtooth`` (analytic, with
    ``amplitude`` and ``phase``) or ``samples`` (values on the open uniform
    grid ``k p / n``, linearly interpolated with periodic wrap).
    """

    period: float
    kind: str = "zero"
    amplitude: float = 0.0
    phase: float = 0.0
    samples: np.ndarray | None = None
    _cumulative: np.ndarray | None = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.period > 0 and math.isfinite(self.period)):
            raise ValueError(f"period must be positive, got {self.period}")
        if self.kind == "samples":
            if self.samples is None or len(self.samples) == 0:
                raise ValueError("empty sample set")
            s = np.asarray(self.samples, dtype=np.float64)
            if not np.all(np.isfinite(s)):
                raise ValueError("samples must be finite")
            h = self.period / s.size
            ext = np.append(s, s[0])
            cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (ext[1:] + ext[:-1]))])
            object.__setattr__(self, "samples", s)
            object.__setattr__(self, "_cumulative", cum)
        elif self.kind not in _ANALYTIC_KINDS:
            raise ValueError(f"unknown profile kind '{self.kind}'")

    # {{{ constructors

    @classmethod
    def zero(cls, period: float = 1.0) -> PeriodicProfile:
        return cls(period=period)

    @classmethod
    def sin(cls, amplitude: float, period: float, phase: float = 0.0) -> PeriodicProfile:
        """``amplitude * sin(2 pi (x - phase) / period)``."""
        return cls(period=period, kind="sin", amplitude=amplitude, phase=phase)

    @classmethod
    def cos(cls, amplitude: float, period: float, phase: float = 0.0) -> PeriodicProfile:
        """``amplitude * cos(2 pi (x - phase) / period)``."""
        return cls(period=period, kind="cos", amplitude=amplitude, phase=phase)

    @classmethod
    def sawtooth(cls, amplitude: float, period: float, phase: float = 0.0) -> PeriodicProfile:
        """Ramp from ``-amplitude`` to ``amplitude`` over each period."""
        return cls(period=period, kind="sawtooth", amplitude=amplitude, phase=phase)

    # }}}

    @property
    def is_zero(self) -> bool:
        if self.kind == "samples":
            return not np.any(self.samples)
        return self.kind == "zero" or self.amplitude == 0.0

    @property
    def _sin_phase(self) -> float:
        # cos(2 pi (x - phi) / p) = sin(2 pi (x - phi + p / 4) / p)
        return self.phase - 0.25 * self.period if self.kind == "cos" else self.phase

    def value(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        p = self.period
        if self.kind == "zero":
            return np.zeros_like(x)
        if self.kind in ("sin", "cos"):
            return self.amplitude * np.sin(2.0 * np.pi * (x - self._sin_phase) / p)
        if self.kind == "sawtooth":
            theta = np.mod((x - self.phase) / p, 1.0)
            return self.amplitude * (2.0 * theta - 1.0)

        n = self.samples.size
        r = np.mod(x, p) / (p / n)
        k = np.minimum(np.floor(r).astype(np.intp), n - 1)
        lam = r - k
        return (1.0 - lam) * self.samples[k] + lam * self.samples[(k + 1) % n]

    def _periodic_part(self, x: np.ndarray) -> np.ndarray:
        """A periodic primitive of the profile (up to an additive constant)."""
        p = self.period
        if self.kind in ("sin", "cos"):
            arg = 2.0 * np.pi * (x - self._sin_phase) / p
            return -self.amplitude * p / (2.0 * np.pi) * np.cos(arg)
        if self.kind == "sawtooth":
            theta = np.mod((x - self.phase) / p, 1.0)
            return self.amplitude * p * (theta * theta - theta)

        n = self.samples.size
        h = p / n
        xm = np.mod(x, p)
        k = np.minimum(np.floor(xm / h).astype(np.intp), n - 1)
        dx = xm - k * h
        v0 = self.samples[k]
        slope = (self.samples[(k + 1) % n] - v0) / h
        return self._cumulative[k] + dx * (v0 + 0.5 * slope * dx)

    def primitive(self, x: Array) -> Array:
        """``int_0^x w(y) dy``; periodic in ``x`` by construction."""
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "zero":
            return np.zeros_like(x)
        return self._periodic_part(x) - self._periodic_part(np.float64(0.0))

    @property
    def average(self) -> float:
        if self.kind == "samples":
            return float(self._cumulative[-1] / self.period)
        return 0.0

    @property
    def sup_norm(self) -> float:
        if self.kind == "samples":
            return float(np.max(np.abs(self.samples)))
        return abs(self.amplitude) if self.kind != "zero" else 0.0

    @property
    def bounds(self) -> tuple[float, float]:
        if self.kind == "samples":
            return float(self.samples.min()), float(self.samples.max())
        a = self.sup_norm
        return -a, a

    def _primitive_candidates(self) -> np.ndarray:
        """Points of one period where the primitive can attain its minimum."""
        p = self.period
        if self.kind == "samples":
            n = self.samples.size
            h = p / n
            s0 = self.samples
            s1 = np.roll(s0, -1)
            nodes = np.arange(n) * h
            # interior upward zero crossings of the linear pieces
            up = (s0 < 0) & (s1 > 0)
            cross = nodes[up] + h * (-s0[up]) / (s1[up] - s0[up])
            return np.concatenate([nodes, cross])
        if self.kind in ("sin", "cos"):
            z = self._sin_phase if self.amplitude > 0 else self._sin_phase + 0.5 * p
            return np.array([0.0, z])
        if self.kind == "sawtooth":
            z = self.phase + 0.5 * p if self.amplitude > 0 else self.phase
            return np.array([0.0, z])
        return np.array([0.0])

    def argmin_primitive(self) -> tuple[float, float]:
        return argmin_primitive(self)

    @property
    def primitive_min(self) -> float:
        return argmin_primitive(self)[1]

    @property
    def argmin_in_period(self) -> float:
        return argmin_primitive(self)[0]


def sample_periodic(func: Any, period: float, n: int = 1024) -> np.ndarray:
    """Samples of ``func`` on the open uniform grid ``k period / n``."""
    x = np.arange(n) * (period / n)
    return np.asarray(func(x), dtype=np.float64)


def normalize_zero_average(samples: Array, period: float) -> tuple[PeriodicProfile, float]:
    """Remove the average of periodic samples.

    Returns the zero-average profile and the subtracted constant (to be folded
    into the far-field state by the caller).
    """
    s = np.asarray(samples, dtype=np.float64)
    if s.size == 0:
        raise ValueError("empty sample set")
    if not (period > 0):
        raise ValueError(f"period must be positive, got {period}")
    if not np.all(np.isfinite(s)):
        raise ValueError("samples must be finite")

    # trapezoid rule on the periodic interpolant = arithmetic mean of the samples
    mean = float(np.mean(s))
    profile = PeriodicProfile(period=period, kind="samples", samples=s - mean)
    residual = profile.average
    if residual != 0.0:
        profile = PeriodicProfile(period=period, kind="samples", samples=profile.samples - residual)
        mean += residual
    return profile, mean


def argmin_primitive(profile: PeriodicProfile) -> tuple[float, float]:
    """Smallest ``z`` in ``[0, p)`` minimising ``int_0^x w``, and the minimum."""
    p = profile.period
    if profile.is_zero:
        return 0.0, 0.0

    z = np.mod(profile._primitive_candidates(), p)
    z = np.where(z >= p, 0.0, z)
    w = profile.primitive(z)
    wmin = float(np.min(w))
    tol = 1.0e-13 * (1.0 + profile.sup_norm * p)
    best = float(np.min(z[w <= wmin + tol]))
    return best, float(profile.primitive(np.float64(best)))


# }}}


# {{{ composite initial data


@dataclass(frozen=True)
class CompositeInitialData:
    """Periodically perturbed Riemann datum with a compact middle part."""

    u_left: float
    u_right: float
    profile_left: PeriodicProfile
    profile_right: PeriodicProfile
    N: float
    middle: PiecewiseLinear | None = None

    def __post_init__(self) -> None:
        if not (self.N > 0 and math.isfinite(self.N)):
            raise ValueError(f"N must be positive, got {self.N}")
        middle = self.middle if self.middle is not None else PiecewiseLinear.zero(self.N)
        lo, hi = middle.support
        if lo < -self.N - 1.0e-12 or hi > self.N + 1.0e-12:
            raise ValueError(f"middle part must be supported in [-N, N] = [{-self.N}, {self.N}]")
        for prof in (self.profile_left, self.profile_right):
            if abs(prof.average) > 1.0e-12:
                raise ValueError("periodic profiles must have zero average")
        object.__setattr__(self, "middle", middle)

    # {{{ constructors

    @classmethod
    def riemann(cls, u_left: float, u_right: float, N: float = 1.0) -> CompositeInitialData:
        return cls(u_left, u_right, PeriodicProfile.zero(), PeriodicProfile.zero(), N)

    @classmethod
    def periodic(cls, ubar: float, profile: PeriodicProfile, N: float | None = None) -> CompositeInitialData:
        """Purely periodic datum ``ubar + w`` (same background on both sides)."""
        return cls(ubar, ubar, profile, profile, profile.period if N is None else N)

    def with_N(self, N: float) -> CompositeInitialData:
        """The same ``u0`` re-expressed with a wider middle window."""
        if N < self.N:
            raise ValueError("can only widen the middle window")
        return CompositeInitialData(
            self.u_left, self.u_right, self.profile_left, self.profile_right, N, self.middle
        )

    # }}}

    @property
    def has_middle(self) -> bool:
        return bool(np.any(self.middle.values != 0.0))

    @property
    def is_shock(self) -> bool:
        return self.u_left > self.u_right

    @property
    def max_period(self) -> float:
        return max(self.profile_left.period, self.profile_right.period)

    def background(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        return np.where(
            x < 0,
            self.u_left + self.profile_left.value(x),
            self.u_right + self.profile_right.value(x),
        )

    def value(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        return self.background(x) + self.middle.value(x)

    def background_primitive(self, x: Array) -> Array:
        x = np.asarray(x, dtype=np.float64)
        return np.where(
            x < 0,
            self.u_left * x + self.profile_left.primitive(x),
            self.u_right * x + self.profile_right.primitive(x),
        )

    def primitive(self, x: Array) -> Array:
        """``int_0^x u0(y) dy``, exact for every ``x``."""
        x = np.asarray(x, dtype=np.float64)
        return self.background_primitive(x) + self.middle.primitive(x)

    def breakpoints(self) -> np.ndarray:
        return np.unique(np.concatenate([[-self.N, 0.0, self.N], self.middle.breakpoints()]))

    @property
    def total_range(self) -> tuple[float, float]:
        """Tight interval containing every value of ``u0``."""
        return _total_range(self)

    @property
    def sup_norm(self) -> float:
        lo, hi = self.total_range
        return max(abs(lo), abs(hi))

    @property
    def range_width(self) -> float:
        lo, hi = self.total_range
        return hi - lo


def _total_range(data: CompositeInitialData) -> tuple[float, float]:
    lo_l, hi_l = data.profile_left.bounds
    lo_r, hi_r = data.profile_right.bounds
    lo = min(data.u_left + lo_l, data.u_right + lo_r)
    hi = max(data.u_left + hi_l, data.u_right + hi_r)

    # the middle part: dense sampling plus breakpoints, one-sided at jumps
    x = np.concatenate([
        np.linspace(-data.N, data.N, 8193),
        data.breakpoints(),
    ])
    eps = 1.0e-12 * max(1.0, data.N)
    x = np.concatenate([x, x - eps, x + eps])
    x = x[(x >= -data.N) & (x <= data.N)]
    v = data.value(x)
    # piecewise-linear middle values are exact at nodes; the background between
    # nodes is bounded by the profile bounds already accounted for above
    return float(min(lo, v.min())), float(max(hi, v.max()))


# }}}


# {{{ quantities derived from the initial data


def shift_X_infinity(data: CompositeInitialData) -> float:
    """Asymptotic shift of the perturbed shock relative to ``s t``."""
    if not data.u_left > data.u_right:
        raise PreconditionError("the shift is defined for u_left > u_right (shock case)")

    _, wl_min = argmin_primitive(data.profile_left)
    _, wr_min = argmin_primitive(data.profile_right)
    # the deviation is supported in [-N, N]
    mass = float(data.middle.primitive(np.float64(data.N)) - data.middle.primitive(np.float64(-data.N)))
    return (mass - wl_min + wr_min) / (data.u_left - data.u_right)


def _minimize_on_grid(func: Any, a: float, b: float, extra: Array, step: float) -> tuple[float, float]:
    """Global minimum of ``func`` on ``[a, b]``: dense scan + Brent polish.

    ``extra`` are points (kinks, jumps) always included in the scan.
    """
    n = max(int(math.ceil((b - a) / step)), 2)
    extra = np.asarray(extra, dtype=np.float64)
    x = np.unique(np.concatenate([np.linspace(a, b, n + 1), extra[(extra >= a) & (extra <= b)]]))
    v = func(x)
    k = int(np.argmin(v))
    best_x, best_v = float(x[k]), float(v[k])

    lo = float(x[max(k - 1, 0)])
    hi = float(x[min(k + 1, x.size - 1)])
    if hi > lo:
        res = optimize.minimize_scalar(
            lambda s: float(func(np.float64(s))),
            bounds=(lo, hi),
            method="bounded",
            options={"xatol": 1.0e-13 * max(1.0, abs(lo), abs(hi))},
        )
        if res.fun < best_v:
            best_x, best_v = float(res.x), float(res.fun)
    return best_x, best_v


def is_divide(
    data: CompositeInitialData,
    ubar: float,
    x0: float,
    *,
    tolerance: float | None = None,
    step: float | None = None,
) -> bool:
    """Whether ``x = x0 + f'(ubar) t`` is a divide, i.e. ``u`` stays ``ubar``
    along it; equivalently ``int_{x0}^x (u0 - ubar) >= 0`` for all ``x``.

    The tails beyond the scanned window are decided by the far-field states:
    going left requires ``u_left <= ubar``, going right ``u_right >= ubar``. One
    full period beyond ``[-N, N]`` (and ``x0``) on each side then determines
    the infimum.
    """
    if data.u_left > ubar or data.u_right < ubar:
        return False

    pl, pr = data.profile_left.period, data.profile_right.period
    a = min(x0, -data.N) - pl
    b = max(x0, data.N) + pr
    if tolerance is None:
        w = max(data.profile_left.sup_norm * pl, data.profile_right.sup_norm * pr)
        tolerance = 1.0e-9 * (1.0 + w)
    if step is None:
        step = min(pl, pr) / 2048

    U0 = float(data.primitive(np.float64(x0)))

    def running(x):
        return data.primitive(x) - U0 - ubar * (x - x0)

    _, vmin = _minimize_on_grid(running, a, b, np.append(data.breakpoints(), x0), step)
    return vmin >= -tolerance


def gamma_curve(
    side: str, k: int, t: float, data: CompositeInitialData, flux: FluxModel
) -> float:
    """Divide of the left (right) periodic solution through ``z - k p``
    (``z + k p``) moving with speed ``f'(u_left)`` (``f'(u_right)``)."""
    if k < 0:
        raise ValueError("k must be nonnegative")
    if side == "left":
        z, _ = argmin_primitive(data.profile_left)
        return z - k * data.profile_left.period + float(flux.fprime(data.u_left)) * t
    if side == "right":
        z, _ = argmin_primitive(data.profile_right)
        return z + k * data.profile_right.period + float(flux.fprime(data.u_right)) * t
    raise ValueError(f"side must be 'left' or 'right', got {side!r}")


def smallest_K(data: CompositeInitialData) -> int:
    """Smallest ``K >= 0`` with ``z_l - K p_l <= -N`` and ``z_r + K p_r >= N``."""
    zl, _ = argmin_primitive(data.profile_left)
    zr, _ = argmin_primitive(data.profile_right)
    kl = math.ceil((zl + data.N) / data.profile_left.period)
    kr = math.ceil((data.N - zr) / data.profile_right.period)
    return max(kl, kr, 0)


def initial_invariants(data: CompositeInitialData, K: int | None = None) -> tuple[float, float]:
    """``P0 = min_x int_{z_l - K p_l}^x (u0 - u_left)`` and
    ``Q0 = max_x int_x^{z_r + K p_r} (u0 - u_right)``."""
    if data.u_left > data.u_right:
        raise PreconditionError("invariants are defined for u_left <= u_right")
    Kmin = smallest_K(data)
    if K is None:
        K = Kmin
    elif K < Kmin:
        raise PreconditionError(f"K = {K} too small; need K >= {Kmin}")

    pl, pr = data.profile_left.period, data.profile_right.period
    zl, _ = argmin_primitive(data.profile_left)
    zr, _ = argmin_primitive(data.profile_right)
    gl = zl - K * pl
    gr = zr + K * pr
    a, b = gl - pl, gr + pr
    step = min(pl, pr, data.N) / 2048
    extra = np.concatenate([data.breakpoints(), [gl, gr]])

    Ul = float(data.primitive(np.float64(gl)))
    Ur = float(data.primitive(np.float64(gr)))

    _, P0 = _minimize_on_grid(
        lambda x: data.primitive(x) - Ul - data.u_left * (x - gl), a, b, extra, step
    )
    _, negQ0 = _minimize_on_grid(
        lambda x: -(Ur - data.primitive(x) - data.u_right * (gr - x)), a, b, extra, step
    )
    return P0, -negQ0


# }}}
