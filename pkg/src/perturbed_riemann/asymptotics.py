"""Large-time measurements on entropy solutions.

Everything here is a measurement made on a :class:`VariationalSolver` (the
field provider) together with the two periodic solutions flanking it:

* :func:`locate_shock` -- position ``X(t)`` of the perturbed shock,
* :func:`track_invariants` -- the extremal primitives ``P(t)``, ``Q(t)``,
* :func:`decay_study` -- sup-norm errors against the asymptotic profile and
  their log-log slope,
* :func:`sqrt_bound_check` -- growth of the deviation zone around the
  background characteristics,
* :func:`merge_time_estimate`, :func:`gluing_deviation`,
  :func:`entropy_constant`.

The edges of the zone where ``u`` differs from the flanking periodic
solutions are taken as the innermost sample points where the deviation
exceeds ``1e-4`` times the range of ``u0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy import optimize

from perturbed_riemann.flux import sigma
from perturbed_riemann.laxoleinik import (
    RiemannSolution,
    VariationalSolver,
    reference_solvers,
)
from perturbed_riemann.profiles import (
    PreconditionError,
    argmin_primitive,
    initial_invariants,
    shift_X_infinity,
    smallest_K,
)

Array = Any

DEVIATION_FACTOR = 1.0e-4


class EstimatorDisagreement(RuntimeError):
    """The mass and transition shock estimates are more than a period apart."""


class InsufficientData(ValueError):
    """Too few usable points for a decay fit."""


# {{{ reports


@dataclass(frozen=True)
class DecayReport:
    times: np.ndarray
    errors: np.ndarray
    fitted_slope: float
    fitted_constant: float
    r_squared: float
    exact: bool = False

    def __post_init__(self) -> None:
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.errors < 0):
            raise ValueError("errors must be nonnegative")


@dataclass(frozen=True)
class ShockTrace:
    times: np.ndarray
    positions: np.ndarray
    predicted: np.ndarray
    transition: np.ndarray
    widths: np.ndarray

    @property
    def residuals(self) -> np.ndarray:
        return self.positions - self.predicted


@dataclass(frozen=True)
class InvariantTrace:
    times: np.ndarray
    P_values: np.ndarray
    Q_values: np.ndarray
    P0: float
    Q0: float

    @property
    def P_drift(self) -> float:
        return float(np.max(np.abs(self.P_values - self.P0)))

    @property
    def Q_drift(self) -> float:
        return float(np.max(np.abs(self.Q_values - self.Q0)))


@dataclass(frozen=True)
class EnvelopeReport:
    times: np.ndarray
    left_edges: np.ndarray
    right_edges: np.ndarray
    left_distance: np.ndarray
    right_distance: np.ndarray
    growth_factor: float = 1.1

    @property
    def left_ratio(self) -> np.ndarray:
        return self.left_distance / np.sqrt(self.times)

    @property
    def right_ratio(self) -> np.ndarray:
        return self.right_distance / np.sqrt(self.times)

    @staticmethod
    def _bounded(ratio: np.ndarray, factor: float) -> bool:
        n = ratio.size
        for i in range(max(n // 2, 1), n):
            if ratio[i] > factor * np.max(ratio[:i]) and ratio[i] > 0:
                return False
        return True

    @property
    def bounded(self) -> bool:
        return self._bounded(self.left_ratio, self.growth_factor) and self._bounded(
            self.right_ratio, self.growth_factor
        )


@dataclass(frozen=True)
class ShockEstimate:
    t: float
    mass: float
    transition: float
    width: float
    zone: tuple[float, float]


# }}}


# {{{ fitting


def fit_loglog(times: Array, errors: Array, floor: float = 1.0e-13) -> tuple[float, float, float, int]:
    """Least-squares ``log e = slope log t + log C`` on points with ``e > floor``.

    Returns ``(slope, C, r_squared, n_used)``; NaNs when fewer than two points
    are usable.
    """
    t = np.asarray(times, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    keep = e > floor
    n = int(np.count_nonzero(keep))
    if n < 2:
        return math.nan, math.nan, math.nan, n

    lt, le = np.log(t[keep]), np.log(e[keep])
    slope, intercept = np.polyfit(lt, le, 1)
    pred = slope * lt + intercept
    ss_res = float(np.sum((le - pred) ** 2))
    ss_tot = float(np.sum((le - le.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(math.exp(intercept)), r2, n


def make_decay_report(times: Array, errors: Array, *, min_points: int = 5,
                      exact_below: float = 1.0e-10) -> DecayReport:
    t = np.asarray(times, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if np.all(e < exact_below):
        return DecayReport(t, e, math.nan, math.nan, math.nan, exact=True)
    slope, const, r2, n = fit_loglog(t, e)
    if n < min_points:
        raise InsufficientData(f"only {n} usable points for the decay fit (need {min_points})")
    return DecayReport(t, e, slope, const, r2)


# }}}


# {{{ geometry helpers


class Harness:
    """A solver together with its flanking periodic solutions.

    :arg margin: half-width ``W`` of the measurement windows; defaults to four
        of the larger period.
    :arg points_per_period: sampling density for sup norms and zone edges.
    :arg K: divide index used for the initial invariants and as a floor for
        the far divides; defaults to the smallest valid one.
    """

    def __init__(self, solver: VariationalSolver, *, margin: float | None = None,
                 points_per_period: int = 64, K: int | None = None) -> None:
        self.solver = solver
        self.data = solver.data
        self.flux = solver.flux
        self.left, self.right = reference_solvers(solver)
        self.margin = 4.0 * self.data.max_period if margin is None else float(margin)
        self.points_per_period = int(points_per_period)
        kmin = smallest_K(solver.data)
        if K is not None and K < kmin:
            raise PreconditionError(f"K = {K} is below the smallest valid K = {kmin}")
        self.K = kmin if K is None else int(K)
        self.threshold = DEVIATION_FACTOR * max(self.data.range_width, 1.0e-12)

        d = self.data
        self.zl, _ = argmin_primitive(d.profile_left)
        self.zr, _ = argmin_primitive(d.profile_right)
        self.speed_left = float(self.flux.fprime(d.u_left))
        self.speed_right = float(self.flux.fprime(d.u_right))

    @property
    def dx(self) -> float:
        p = min(self.data.profile_left.period, self.data.profile_right.period)
        return p / self.points_per_period

    def npoints(self, a: float, b: float) -> int:
        return max(int(math.ceil((b - a) / self.dx)) + 1, 2)

    def cone(self, t: float) -> tuple[float, float]:
        """Outside this interval ``u`` equals the flanking periodic solutions."""
        return -self.data.N + self.solver.s_min * t, self.data.N + self.solver.s_max * t

    def divide_K(self, t_max: float) -> int:
        """Smallest ``K`` whose divides stay left/right of the cone up to ``t_max``."""
        d = self.data
        pl, pr = d.profile_left.period, d.profile_right.period
        kl = math.ceil((self.zl + d.N + (self.speed_left - self.solver.s_min) * t_max) / pl) + 1
        kr = math.ceil((d.N - self.zr + (self.solver.s_max - self.speed_right) * t_max) / pr) + 1
        return max(kl, kr, self.K)

    def gamma(self, side: str, k: int, t: float) -> float:
        if side == "left":
            return self.zl - k * self.data.profile_left.period + self.speed_left * t
        return self.zr + k * self.data.profile_right.period + self.speed_right * t

    def fields(self, x: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return (
            self.solver.evaluate(x, t),
            self.left.evaluate(x, t),
            self.right.evaluate(x, t),
        )

    def deviation_zone(self, x: np.ndarray, u: np.ndarray, ul: np.ndarray,
                       ur: np.ndarray) -> tuple[int | None, int | None]:
        """Indices of the first sample deviating from ``u_l`` and of the last
        deviating from ``u_r`` (``None`` when there is none)."""
        dev_l = np.flatnonzero(np.abs(u - ul) > self.threshold)
        dev_r = np.flatnonzero(np.abs(u - ur) > self.threshold)
        first = int(dev_l[0]) if dev_l.size else None
        last = int(dev_r[-1]) if dev_r.size else None
        return first, last

    @property
    def riemann(self) -> RiemannSolution:
        return RiemannSolution(self.data.u_left, self.data.u_right, self.flux)


# }}}


# {{{ shock location


def _periodic_primitive_left(h: Harness, X: float, t: float) -> float:
    """``int_{Gamma}^{X} (u_l - u_left)`` from the left divide just below ``X``."""
    pl = h.data.profile_left.period
    base = h.zl + h.speed_left * t
    g = base + pl * math.floor((X - base) / pl)
    v = h.left.value(np.array([g, X]), t)
    return float(v[1] - v[0] - h.data.u_left * (X - g))


def _periodic_primitive_right(h: Harness, X: float, t: float) -> float:
    """``int_{X}^{Gamma} (u_r - u_right)`` up to the right divide just above ``X``."""
    pr = h.data.profile_right.period
    base = h.zr + h.speed_right * t
    g = base + pr * math.ceil((X - base) / pr)
    v = h.right.value(np.array([X, g]), t)
    return float(v[1] - v[0] - h.data.u_right * (g - X))


def shock_mass_estimate(h: Harness, t: float, K1: int | None = None) -> float:
    r"""Shock position from the mass balance between two far divides.

    With :math:`\Gamma_{l,r}` divides outside the perturbed cone,

    .. math::

        \int_{\Gamma_l}^{\Gamma_r} u \,dx
            = \bar u_l (X - \Gamma_l) + \Phi_l(X)
            + \bar u_r (\Gamma_r - X) + \Phi_r(X),

    where :math:`\Phi_{l,r}` are primitives of the periodic solutions minus
    their averages, measured from their divides. This is solved for ``X``.
    """
    d = h.data
    ul, ur = d.u_left, d.u_right
    K_needed = h.divide_K(t)
    if K1 is None:
        K1 = K_needed
    elif K1 < K_needed:
        raise PreconditionError(f"K1 = {K1} too small at t = {t}; need K1 >= {K_needed}")

    gl = h.gamma("left", K1, t)
    gr = h.gamma("right", K1, t)
    mass = h.solver.integral(gl, gr, t)
    rhs = mass + ul * gl - ur * gr
    jump = ul - ur
    X0 = rhs / jump

    if d.profile_left.is_zero and d.profile_right.is_zero:
        return X0

    def g(X: float) -> float:
        return jump * X + _periodic_primitive_left(h, X, t) + _periodic_primitive_right(h, X, t) - rhs

    pl, pr = d.profile_left.period, d.profile_right.period
    delta = 2.0 * (pl * d.profile_left.sup_norm + pr * d.profile_right.sup_norm) / jump + 1.0e-9
    a, b = X0 - delta, X0 + delta
    ga, gb = g(a), g(b)
    for _ in range(20):
        if ga <= 0 <= gb:
            break
        delta *= 2.0
        a, b = X0 - delta, X0 + delta
        ga, gb = g(a), g(b)
    else:
        raise RuntimeError(f"could not bracket the shock position at t = {t}")
    return float(optimize.brentq(g, a, b, xtol=1.0e-13, rtol=4.0 * np.finfo(float).eps))


def shock_transition_estimate(h: Harness, t: float, center: float) -> tuple[float, float, tuple[float, float]]:
    """Midpoint of the interval between the last sample matching ``u_l`` and
    the first matching ``u_r``; returns ``(midpoint, width, zone)``."""
    W = h.margin
    a, b = center - W, center + W
    x = np.linspace(a, b, h.npoints(a, b))
    u, ul, ur = h.fields(x, t)
    first, last = h.deviation_zone(x, u, ul, ur)

    if first is None:
        first = x.size - 1
    if last is None:
        last = 0
    lo = x[max(first - 1, 0)]
    hi = x[min(last + 1, x.size - 1)]
    zone = (float(x[first]), float(x[last]))
    if first > last:
        # single transition cell between two matching samples: bisect the jump,
        # padding by a sample since the jump may sit on a node
        pos, _, _ = h.solver.locate_jump(float(lo - h.dx), float(hi + h.dx), t)
        return pos, 0.0, zone
    return 0.5 * (lo + hi), float(hi - lo), zone


def shock_estimates(h: Harness, t: float, K1: int | None = None) -> ShockEstimate:
    if not h.data.is_shock:
        raise PreconditionError("shock location needs u_left > u_right")
    mass = shock_mass_estimate(h, t, K1)
    trans, width, zone = shock_transition_estimate(h, t, mass)
    return ShockEstimate(t=float(t), mass=mass, transition=trans, width=width, zone=zone)


def locate_shock(solver: VariationalSolver | Harness, t: float, K1: int | None = None,
                 **kwargs: Any) -> float:
    """``X(t)`` by the mass method, cross-checked by the transition method."""
    h = solver if isinstance(solver, Harness) else Harness(solver, **kwargs)
    est = shock_estimates(h, t, K1)
    tol = h.data.max_period
    if abs(est.mass - est.transition) > tol:
        raise EstimatorDisagreement(
            f"t = {t}: mass estimate {est.mass:.6g} and transition estimate "
            f"{est.transition:.6g} differ by more than {tol:g}"
        )
    return est.mass


def shock_trace(h: Harness, times: Sequence[float], K1: int | None = None) -> ShockTrace:
    times = np.asarray(times, dtype=np.float64)
    s = h.riemann.speed
    X_inf = shift_X_infinity(h.data)
    ests = [shock_estimates(h, t, K1) for t in times]
    return ShockTrace(
        times=times,
        positions=np.array([e.mass for e in ests]),
        predicted=s * times + X_inf,
        transition=np.array([e.transition for e in ests]),
        widths=np.array([e.width for e in ests]),
    )


def merge_time_estimate(solver: VariationalSolver | Harness, t_max: float,
                        times: Sequence[float] | None = None) -> float | None:
    """First sampled time at which the transition zone is at most a period wide."""
    h = solver if isinstance(solver, Harness) else Harness(solver)
    if not h.data.is_shock:
        raise PreconditionError("merge time needs u_left > u_right")
    if times is None:
        times = 2.0 ** np.arange(-2.0, math.log2(t_max) + 0.25, 0.25)
    tol = h.data.max_period
    for t in times:
        if t > t_max:
            break
        X = shock_mass_estimate(h, t)
        _, width, _ = shock_transition_estimate(h, t, X)
        if width <= tol:
            return float(t)
    return None


# }}}


# {{{ gluing


def gluing_deviation(h: Harness, t: float, halfwidth: float | None = None) -> tuple[float, tuple[float, float]]:
    """Largest ``|u - u_l|`` left of the transition zone and ``|u - u_r|`` right
    of it. Returns ``(deviation, zone)``."""
    d = h.data
    if d.is_shock:
        center = shock_mass_estimate(h, t)
        W = 3.0 * h.margin if halfwidth is None else halfwidth
        a, b = center - W, center + W
    else:
        a, b = h.cone(t)
        W = h.margin if halfwidth is None else halfwidth
        a, b = a - W, b + W

    x = np.linspace(a, b, h.npoints(a, b))
    u, ul, ur = h.fields(x, t)
    first, last = h.deviation_zone(x, u, ul, ur)
    if first is None and last is None:
        return float(max(np.max(np.abs(u - ul)), np.max(np.abs(u - ur)))), (math.nan, math.nan)

    lo = first if first is not None else x.size
    hi = last if last is not None else -1
    dev_left = np.abs(u[:lo] - ul[:lo])
    dev_right = np.abs(u[hi + 1:] - ur[hi + 1:])
    dev = max(dev_left.max(initial=0.0), dev_right.max(initial=0.0))
    # a sharp jump gives first > last; the zone is then the cell holding it
    za, zb = float(x[min(lo, x.size - 1)]), float(x[max(hi, 0)])
    return float(dev), (min(za, zb), max(za, zb))


# }}}


# {{{ decay


def shock_side_errors(h: Harness, t: float) -> tuple[float, float, float]:
    """``(sup_{x<X} |u - u_left|, sup_{x>X} |u - u_right|, X)`` on ``X +- W``."""
    X = locate_shock(h, t)
    # staggered so that no node sits on the shock itself
    n = int(math.ceil(h.margin / h.dx))
    x = X + (np.arange(-n, n) + 0.5) * h.dx
    u = h.solver.evaluate(x, t)
    left = x < X
    sl = float(np.max(np.abs(u[left] - h.data.u_left), initial=0.0))
    sr = float(np.max(np.abs(u[~left] - h.data.u_right), initial=0.0))
    return sl, sr, X


def sup_error(h: Harness, t: float, target: str) -> float:
    d = h.data
    if target == "shock":
        sl, sr, X = shock_side_errors(h, t)
        return sl + sr + abs(X - h.riemann.speed * t - shift_X_infinity(d))

    if target == "periodic":
        p = d.profile_left.period
        n = max(h.points_per_period, 64)
        x = np.linspace(0.0, p, 4 * n + 1)
        u = h.solver.evaluate(x, t)
        return float(np.max(np.abs(u - d.u_left)))

    if target not in ("rarefaction", "constant"):
        raise ValueError(f"unknown decay target '{target}'")
    if target == "rarefaction" and not d.u_left < d.u_right:
        raise PreconditionError("rarefaction target needs u_left < u_right")
    if target == "constant" and d.u_left != d.u_right:
        raise PreconditionError("constant target needs u_left == u_right")

    smax = max(abs(h.solver.s_min), abs(h.solver.s_max))
    a = -smax * t - h.margin - d.N
    b = smax * t + h.margin + d.N
    x = np.linspace(a, b, h.npoints(a, b))
    u = h.solver.evaluate(x, t)
    ref = h.riemann.evaluate(x, t)
    return float(np.max(np.abs(u - ref)))


def decay_study(target: str, solver: VariationalSolver | Harness, times: Sequence[float],
                *, min_points: int = 5, **kwargs: Any) -> DecayReport:
    """Sup-norm errors at ``times`` and their log-log slope.

    ``target`` is ``shock`` (side sup norms plus shift residual), ``rarefaction``,
    ``constant`` or ``periodic``.
    """
    h = solver if isinstance(solver, Harness) else Harness(solver, **kwargs)
    times = np.asarray(times, dtype=np.float64)
    errors = np.array([sup_error(h, float(t), target) for t in times])
    return make_decay_report(times, errors, min_points=min_points)


# }}}


# {{{ invariants and envelopes


def track_invariants(solver: VariationalSolver | Harness, times: Sequence[float],
                     K2: int | None = None, dx: float | None = None) -> InvariantTrace:
    """``P(t) = min_x int_{Gamma_l}^x (u - u_left)`` and
    ``Q(t) = max_x int_x^{Gamma_r} (u - u_right)`` with divides ``Gamma`` that
    stay outside the perturbed cone up to ``max(times)``."""
    h = solver if isinstance(solver, Harness) else Harness(solver)
    d = h.data
    if d.u_left > d.u_right:
        raise PreconditionError("invariants need u_left <= u_right")
    times = np.asarray(times, dtype=np.float64)
    K_needed = h.divide_K(float(times.max()))
    if K2 is None:
        K2 = K_needed
    elif K2 < K_needed:
        raise PreconditionError(f"K2 = {K2} too small; need K2 >= {K_needed}")
    if dx is None:
        dx = h.dx

    P0, Q0 = initial_invariants(d, h.K)
    P, Q = [], []
    for t in times:
        gl = h.gamma("left", K2, t)
        gr = h.gamma("right", K2, t)
        n = max(int(math.ceil((gr - gl) / dx)) + 1, 2)
        x = np.linspace(gl, gr, n)
        V = h.solver.value(x, t)
        P.append(float(np.min(V - V[0] - d.u_left * (x - gl))))
        Q.append(float(np.max(V[-1] - V - d.u_right * (gr - x))))
    return InvariantTrace(times, np.array(P), np.array(Q), P0, Q0)


def deviation_edges(h: Harness, t: float) -> tuple[float, float]:
    """Left and right edges of the zone where ``u`` leaves ``u_l`` / ``u_r``."""
    a, b = h.cone(t)
    a, b = a - h.margin, b + h.margin
    x = np.linspace(a, b, h.npoints(a, b))
    u, ul, ur = h.fields(x, t)
    first, last = h.deviation_zone(x, u, ul, ur)
    left = float(x[first]) if first is not None else h.speed_left * t
    right = float(x[last]) if last is not None else h.speed_right * t
    return left, right


def sqrt_bound_check(solver: VariationalSolver | Harness, times: Sequence[float],
                     growth_factor: float = 1.1) -> EnvelopeReport:
    """Distances of the deviation-zone edges from ``f'(u_left) t`` and
    ``f'(u_right) t``, to be compared against ``sqrt(t)``."""
    h = solver if isinstance(solver, Harness) else Harness(solver)
    if h.data.u_left > h.data.u_right:
        raise PreconditionError("the sqrt(t) envelope applies to u_left <= u_right")
    times = np.asarray(times, dtype=np.float64)
    edges = np.array([deviation_edges(h, float(t)) for t in times])
    dl = np.abs(edges[:, 0] - h.speed_left * times)
    dr = np.abs(edges[:, 1] - h.speed_right * times)
    return EnvelopeReport(times, edges[:, 0], edges[:, 1], dl, dr, growth_factor)


# }}}


# {{{ entropy


def entropy_constant(solver: VariationalSolver, t: float, window: tuple[float, float],
                     npoints: int, offsets: Sequence[int] = (1, 2, 4, 8)) -> float:
    """``max t (u(x + a) - u(x)) / a`` over sample pairs ``a = k dx``."""
    x = np.linspace(window[0], window[1], int(npoints))
    u = solver.evaluate(x, t)
    best = -math.inf
    for k in offsets:
        if k >= x.size:
            continue
        a = x[k:] - x[:-k]
        best = max(best, float(np.max(t * (u[k:] - u[:-k]) / a)))
    return best


# }}}
