r"""Entropy solutions from the Lax-Oleinik variational formula.

For a convex flux the entropy solution is

.. math::

    u(x, t) = (f')^{-1}\left(\frac{x - y^*}{t}\right), \qquad
    y^* = \operatorname{argmin}_y G(y), \qquad
    G(y) = U_0(y) + t f^*\left(\frac{x - y}{t}\right),

with :math:`U_0` the primitive of the initial datum. The minimum value
:math:`V(x, t) = G(y^*)` satisfies :math:`\partial_x V = u`, so integrals and
cell averages of :math:`u` are exact differences of :math:`V`.

Minimisation is done in two stages. A uniform scan of ``y`` locates the
discrete minimiser for every ``x`` of a sorted batch; since the kernel is a
convex function of ``x - y`` the (leftmost) minimisers are nondecreasing in
``x`` and a divide-and-conquer sweep costs ``O((n_x + n_y) log n_x)``. The
basin of the discrete minimiser, and those of the two neighbouring ``x``, are
then refined to machine precision by bisection on
:math:`G'(y) = u_0(y) - (f')^{-1}((x - y) / t)`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from perturbed_riemann.flux import FluxModel, sigma
from perturbed_riemann.profiles import CompositeInitialData, PeriodicProfile

Array = Any


# {{{ riemann solutions


@dataclass(frozen=True)
class RiemannSolution:
    u_left: float
    u_right: float
    flux: FluxModel
    kind: str = field(init=False)
    speed: float = field(init=False)

    def __post_init__(self) -> None:
        if self.u_left > self.u_right:
            kind, speed = "shock", float(sigma(self.flux, self.u_left, self.u_right))
        elif self.u_left < self.u_right:
            kind, speed = "rarefaction", math.nan
        else:
            kind, speed = "constant", float(self.flux.fprime(self.u_left))
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "speed", speed)

    def evaluate(self, x: Array, t: float) -> Array:
        return riemann_evaluate(self, x, t)


def riemann_evaluate(rs: RiemannSolution, x: Array, t: float) -> Array:
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=np.float64)
    ul, ur = rs.u_left, rs.u_right

    if rs.kind == "shock":
        out = np.where(x < rs.speed * t, ul, ur)
    elif rs.kind == "constant":
        out = np.full_like(x, ul)
    else:
        sl, sr = float(rs.flux.fprime(ul)), float(rs.flux.fprime(ur))
        s = np.clip(x / t, sl, sr)
        fan = rs.flux.fprime_inv(s)
        out = np.where(x <= sl * t, ul, np.where(x > sr * t, ur, fan))
    return out[()] if out.ndim == 0 else out


# }}}


# {{{ solution field


@dataclass(frozen=True)
class SolutionField:
    """``u(., t)`` sampled at uniform nodes.

    ``value`` holds :math:`V(x, t)`, so ``cell_averages`` are the exact means
    of ``u`` over the cells between nodes. ``shocks`` rows are
    ``(position, u(x-), u(x+))`` of the discontinuities found between nodes.
    """

    t: float
    x: np.ndarray
    u: np.ndarray
    value: np.ndarray
    shocks: np.ndarray

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def cell_averages(self) -> np.ndarray:
        return np.diff(self.value) / np.diff(self.x)

    @property
    def cell_centers(self) -> np.ndarray:
        return 0.5 * (self.x[1:] + self.x[:-1])

    @property
    def shock_positions(self) -> np.ndarray:
        return self.shocks[:, 0] if self.shocks.size else np.empty(0)


# }}}


# {{{ monotone argmin


def _monotone_argmin(cost: Any, a: np.ndarray, b: np.ndarray, rightmost: bool) -> np.ndarray:
    """Row argmins of a totally monotone cost over staircase ranges.

    Row ``i`` searches columns ``a[i] .. b[i]`` (both nondecreasing). Each
    level of the recursion is processed as one vectorised batch.
    """
    n = a.size
    result = np.empty(n, dtype=np.intp)

    ilo = np.array([0])
    ihi = np.array([n - 1])
    jlo = np.array([a[0]])
    jhi = np.array([b[-1]])

    while ilo.size:
        mid = (ilo + ihi) // 2
        lo = np.maximum(jlo, a[mid])
        hi = np.minimum(jhi, b[mid])
        lens = hi - lo + 1
        ends = np.cumsum(lens)
        starts = ends - lens

        offsets = np.arange(ends[-1]) - np.repeat(starts, lens)
        jj = np.repeat(lo, lens) + offsets
        vals = cost(np.repeat(mid, lens), jj)

        mins = np.minimum.reduceat(vals, starts)
        hits = np.flatnonzero(vals <= np.repeat(mins, lens))
        if rightmost:
            pos = hits[np.searchsorted(hits, ends, side="left") - 1]
        else:
            pos = hits[np.searchsorted(hits, starts, side="left")]
        jstar = jj[pos]
        result[mid] = jstar

        left = ilo <= mid - 1
        right = mid + 1 <= ihi
        ilo, ihi, jlo, jhi = (
            np.concatenate([ilo[left], mid[right] + 1]),
            np.concatenate([mid[left] - 1, ihi[right]]),
            np.concatenate([jlo[left], jstar[right]]),
            np.concatenate([jstar[left], jhi[right]]),
        )

    return result


# }}}


# {{{ variational solver


@dataclass(frozen=True)
class _Minimum:
    y: np.ndarray
    u: np.ndarray
    value: np.ndarray


class VariationalSolver:
    """Pointwise entropy solution for :class:`CompositeInitialData`.

    :arg scan_resolution: coarse ``y`` grid points per unit length.
    :arg refine_tolerance: relative width of the final bracket in ``y``.
    """

    def __init__(
        self,
        flux: FluxModel,
        data: CompositeInitialData,
        *,
        scan_resolution: int = 1024,
        refine_tolerance: float = 1.0e-14,
    ) -> None:
        lo, hi = data.total_range
        wlo, whi = flux.working_range
        if lo < wlo or hi > whi:
            flux = flux.fitted_to(lo, hi)

        self.flux = flux
        self.data = data
        self.scan_resolution = int(scan_resolution)
        self.refine_tolerance = float(refine_tolerance)

        self.u_min, self.u_max = lo, hi
        self.s_min = float(flux.fprime(lo))
        self.s_max = float(flux.fprime(hi))
        self.jump_threshold = 1.0e-4 * max(hi - lo, 1.0e-12)

    def primitive(self, y: Array) -> Array:
        return self.data.primitive(y)

    def _objective(self, x: Array, y: Array, t: float) -> Array:
        return self.data.primitive(y) + t * self.flux.legendre((x - y) / t)

    def _slope(self, x: Array, y: Array, t: float) -> Array:
        s = np.clip((x - y) / t, self.s_min, self.s_max)
        return self.data.value(y) - self.flux.fprime_inv(s)

    # {{{ refinement

    def _refine(self, x: np.ndarray, t: float, ylo: np.ndarray, yhi: np.ndarray) -> np.ndarray:
        """Local minimiser of ``G`` in ``[ylo, yhi]`` for every ``x``."""
        glo = self._slope(x, ylo, t)
        ghi = self._slope(x, yhi, t)
        bracketed = (glo <= 0) & (ghi >= 0)

        a, b = ylo.copy(), yhi.copy()
        tol = self.refine_tolerance * np.maximum(1.0, np.abs(a) + np.abs(b))
        for _ in range(200):
            m = 0.5 * (a + b)
            neg = self._slope(x, m, t) <= 0
            a = np.where(neg, m, a)
            b = np.where(neg, b, m)
            if np.all(b - a <= tol):
                break
        y_bisect = 0.5 * (a + b)

        if np.all(bracketed):
            return y_bisect

        # golden section where the derivative does not change sign cleanly
        invphi = (math.sqrt(5.0) - 1.0) / 2.0
        a, b = ylo.copy(), yhi.copy()
        c = b - invphi * (b - a)
        d = a + invphi * (b - a)
        fc = self._objective(x, c, t)
        fd = self._objective(x, d, t)
        for _ in range(100):
            left = fc <= fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
            c_new = b - invphi * (b - a)
            d_new = a + invphi * (b - a)
            c, d = np.where(left, c_new, d), np.where(left, c, d_new)
            fc, fd = (
                np.where(left, self._objective(x, c, t), fd),
                np.where(left, fc, self._objective(x, d, t)),
            )
            if np.all(b - a <= tol):
                break
        y_golden = 0.5 * (a + b)

        # endpoints are candidates too (minimum on a kink or a bracket edge)
        best = np.where(bracketed, y_bisect, y_golden)
        vals = self._objective(x, best, t)
        for cand in (ylo, yhi):
            vc = self._objective(x, cand, t)
            take = (~bracketed) & (vc < vals)
            best = np.where(take, cand, best)
            vals = np.where(take, vc, vals)
        return best

    # }}}

    def _minimize(
        self,
        x: np.ndarray,
        t: float,
        side: str,
        ybounds: tuple[float, float] | None = None,
    ) -> _Minimum:
        """Global minimiser of ``G`` for sorted ``x``."""
        if side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {side!r}")
        rightmost = side == "right"

        lo = x - self.s_max * t
        hi = x - self.s_min * t
        if ybounds is not None:
            lo = np.maximum(lo, ybounds[0])
            hi = np.minimum(hi, ybounds[1])
            if np.any(lo > hi):
                raise ValueError("empty minimisation interval")

        width = (self.s_max - self.s_min) * t
        if width <= 1.0e-14 * max(1.0, abs(t)):
            # constant datum: the characteristic is unique
            y = lo
            return _Minimum(y, np.full_like(x, self.u_min), self._objective(x, y, t))

        h = min(1.0 / self.scan_resolution, width / 64.0)
        j0 = math.floor(lo.min() / h) - 1
        j1 = math.ceil(hi.max() / h) + 1
        y = (j0 + np.arange(j1 - j0 + 1)) * h
        U = self.data.primitive(y)

        a = np.ceil(lo / h).astype(np.intp) - j0
        b = np.floor(hi / h).astype(np.intp) - j0
        # intervals narrower than one grid cell: keep the nearest node
        narrow = a > b
        if np.any(narrow):
            near = np.rint(0.5 * (lo + hi) / h).astype(np.intp) - j0
            a = np.where(narrow, near, a)
            b = np.where(narrow, near, b)
        a = np.maximum.accumulate(a)
        b = np.maximum.accumulate(b)

        legendre = self.flux.legendre
        smin, smax = self.s_min, self.s_max

        def cost(i, j):
            s = np.clip((x[i] - y[j]) / t, smin, smax)
            return U[j] + t * legendre(s)

        jstar = _monotone_argmin(cost, a, b, rightmost)

        # candidate basins: own minimiser and the neighbours'
        n = x.size
        cands = [jstar]
        if n > 1:
            cands.append(np.concatenate([jstar[:1], jstar[:-1]]))
            cands.append(np.concatenate([jstar[1:], jstar[-1:]]))

        idx = np.arange(n)
        ys, vs = [], []
        for jc in cands:
            # local discrete polish of the candidate within the admissible range
            win = jc[:, None] + np.arange(-4, 5)[None, :]
            win = np.clip(win, a[:, None], b[:, None])
            wv = cost(np.repeat(idx, win.shape[1]), win.ravel()).reshape(win.shape)
            if rightmost:
                k = win.shape[1] - 1 - np.argmin(wv[:, ::-1], axis=1)
            else:
                k = np.argmin(wv, axis=1)
            jb = win[idx, k]

            ylo = np.maximum(y[np.maximum(jb - 1, 0)], lo)
            yhi = np.minimum(y[np.minimum(jb + 1, y.size - 1)], hi)
            ylo = np.minimum(ylo, yhi)
            yr = self._refine(x, t, ylo, yhi)
            vr = self._objective(x, yr, t)
            # never worse than the grid node itself
            vnode = U[jb] + t * legendre(np.clip((x - y[jb]) / t, smin, smax))
            worse = vnode < vr
            ys.append(np.where(worse, y[jb], yr))
            vs.append(np.where(worse, vnode, vr))

        Y = np.stack(ys, axis=1)
        Vv = np.stack(vs, axis=1)
        vmin = Vv.min(axis=1)
        tol = 1.0e-12 * (1.0 + np.abs(vmin))
        ok = Vv <= (vmin + tol)[:, None]
        if rightmost:
            ystar = np.where(ok, Y, -np.inf).max(axis=1)
        else:
            ystar = np.where(ok, Y, np.inf).min(axis=1)
        vstar = Vv[idx, np.argmax(ok & (Y == ystar[:, None]), axis=1)]

        s = np.clip((x - ystar) / t, smin, smax)
        return _Minimum(ystar, self.flux.fprime_inv(s), vstar)

    def _solve(self, x: Array, t: float, side: str = "left",
               ybounds: tuple[float, float] | None = None) -> tuple[np.ndarray, _Minimum]:
        if not t > 0:
            raise ValueError(f"t must be positive, got {t}")
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        order = np.argsort(x, kind="stable")
        m = self._minimize(x[order], float(t), side, ybounds)
        inv = np.empty_like(order)
        inv[order] = np.arange(order.size)
        return x, _Minimum(m.y[inv], m.u[inv], m.value[inv])

    # {{{ public api

    def evaluate(self, x: Array, t: float, side: str = "left") -> Array:
        """``u(x-, t)`` (``side="left"``) or ``u(x+, t)`` (``side="right"``)."""
        if t == 0:
            return self.data.value(x)
        scalar = np.ndim(x) == 0
        _, m = self._solve(x, t, side)
        return float(m.u[0]) if scalar else m.u

    def minimizer(self, x: Array, t: float, side: str = "left") -> Array:
        scalar = np.ndim(x) == 0
        _, m = self._solve(x, t, side)
        return float(m.y[0]) if scalar else m.y

    def value(self, x: Array, t: float) -> Array:
        """:math:`V(x, t)`, whose ``x``-derivative is ``u``."""
        if t == 0:
            return self.data.primitive(x)
        scalar = np.ndim(x) == 0
        _, m = self._solve(x, t, "left")
        return float(m.value[0]) if scalar else m.value

    def integral(self, a: float, b: float, t: float) -> float:
        """``int_a^b u(x, t) dx``."""
        v = self.value(np.array([a, b]), t)
        return float(v[1] - v[0])

    def cell_averages(self, edges: Array, t: float) -> np.ndarray:
        edges = np.asarray(edges, dtype=np.float64)
        return np.diff(self.value(edges, t)) / np.diff(edges)

    def locate_jump(self, xa: float, xb: float, t: float, *, maxiter: int = 60) -> tuple[float, float, float]:
        """Bisect ``[xa, xb]`` down to the largest drop of ``u``.

        Returns ``(position, u(x-), u(x+))``; a smooth decrease converges to
        equal one-sided values.
        """
        _, m = self._solve(np.array([xa, xb]), t, "left")
        ya, yb = float(m.y[0]), float(m.y[1])
        ua, ub = float(m.u[0]), float(m.u[1])
        pad = 2.0 / self.scan_resolution
        bounds = (min(ya, yb) - pad, max(ya, yb) + pad)

        a, b = xa, xb
        for _ in range(maxiter):
            if b - a <= 1.0e-13 * max(1.0, abs(a), abs(b)):
                break
            xm = 0.5 * (a + b)
            lo = max(bounds[0], xm - self.s_max * t)
            hi = min(bounds[1], xm - self.s_min * t)
            _, mm = self._solve(np.array([xm]), t, "left", (lo, hi) if lo <= hi else None)
            um = float(mm.u[0])
            if ua - um >= um - ub:
                b, ub = xm, um
            else:
                a, ua = xm, um
        return 0.5 * (a + b), ua, ub

    def sample_field(self, window: tuple[float, float], t: float, resolution: int) -> SolutionField:
        """Sample ``u(., t)`` at ``resolution`` uniform nodes of ``window``."""
        a, b = window
        if not (b > a):
            raise ValueError(f"degenerate window {window}")
        if resolution < 2:
            raise ValueError("resolution must be >= 2")
        if not t > 0:
            raise ValueError(f"t must be positive, got {t}")

        x = np.linspace(a, b, int(resolution))
        _, m = self._solve(x, t, "left")

        drops = np.flatnonzero(m.u[:-1] - m.u[1:] > self.jump_threshold)
        shocks = []
        for i in drops:
            pos, um, up = self.locate_jump(float(x[i]), float(x[i + 1]), t)
            if um - up > self.jump_threshold:
                shocks.append((pos, um, up))
        shocks_arr = np.array(shocks, dtype=np.float64).reshape(-1, 3)

        return SolutionField(t=float(t), x=x, u=m.u, value=m.value, shocks=shocks_arr)

    # }}}


# }}}


# {{{ periodic references


def periodic_data(profile: PeriodicProfile, ubar: float) -> CompositeInitialData:
    return CompositeInitialData.periodic(ubar, profile)


def periodic_solver(profile: PeriodicProfile, ubar: float, flux: FluxModel, **kwargs: Any) -> VariationalSolver:
    return VariationalSolver(flux, periodic_data(profile, ubar), **kwargs)


def periodic_reference(
    profile: PeriodicProfile, ubar: float, flux: FluxModel, x: Array, t: float, **kwargs: Any
) -> Array:
    """The purely periodic entropy solution with datum ``ubar + w``."""
    return periodic_solver(profile, ubar, flux, **kwargs).evaluate(x, t)


def reference_solvers(solver: VariationalSolver) -> tuple[VariationalSolver, VariationalSolver]:
    """Solvers for the left and right periodic solutions flanking ``solver``.

    Flux range and scan resolution are shared so that both sides are
    discretised exactly like the composite problem.
    """
    data = solver.data
    kw = {"scan_resolution": solver.scan_resolution, "refine_tolerance": solver.refine_tolerance}
    left = VariationalSolver(solver.flux, periodic_data(data.profile_left, data.u_left), **kw)
    right = VariationalSolver(solver.flux, periodic_data(data.profile_right, data.u_right), **kw)
    return left, right


# }}}
