"""Strictly convex flux functions.

A :class:`FluxModel` bundles ``f``, ``f'``, ``f''``, the inverse of ``f'``
and the Legendre transform ``f*(s) = sup_u [s u - f(u)]`` on a closed working
range of states. Everything downstream (the variational solver, the Godunov
oracle, the asymptotic harness) only talks to fluxes through this interface.

.. autoclass:: FluxModel
.. autofunction:: sigma
.. autofunction:: legendre_transform
.. autofunction:: builtin_fluxes
.. autofunction:: make_flux
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Callable

import numpy as np

Array = Any
ScalarFn = Callable[[Array], Array]


class DomainError(ValueError):
    """A state or speed lies outside the flux working range."""


# slack for range checks; states produced by the solvers sit on the boundary
_RANGE_SLACK = 1.0e-9


def _newton_bisect(
    g: ScalarFn,
    dg: ScalarFn,
    target: Array,
    lo: float,
    hi: float,
    *,
    tol: float = 1.0e-12,
    maxiter: int = 100,
) -> Array:
    """Solve ``g(u) = target`` for increasing ``g`` on ``[lo, hi]``.

    Newton steps that leave the current bracket are replaced by bisection.
    """
    target = np.asarray(target, dtype=np.float64)
    a = np.full(target.shape, lo, dtype=np.float64)
    b = np.full(target.shape, hi, dtype=np.float64)
    u = np.clip(0.5 * (a + b), lo, hi)

    for _ in range(maxiter):
        r = g(u) - target
        a = np.where(r < 0, u, a)
        b = np.where(r > 0, u, b)

        d = dg(u)
        with np.errstate(divide="ignore", invalid="ignore"):
            un = u - r / d
        bad = ~np.isfinite(un) | (un <= a) | (un >= b)
        un = np.where(bad, 0.5 * (a + b), un)

        done = np.abs(un - u) < tol
        u = un
        if np.all(done | (b - a < tol)):
            break

    return u


@dataclass(frozen=True)
class FluxModel:
    """A strictly convex flux on a closed working range.

    ``fprime_inv`` and ``legendre`` may be ``None``; numeric fallbacks
    (Newton with bisection safeguard, then ``s u* - f(u*)``) are used then.
    """

    name: str
    f: ScalarFn
    fprime: ScalarFn
    fsecond: ScalarFn
    fprime_inv_exact: ScalarFn | None = None
    legendre_exact: ScalarFn | None = None
    working_range: tuple[float, float] = (-10.0, 10.0)
    params: dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        lo, hi = self.working_range
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise DomainError(f"invalid working range {self.working_range}")

    # {{{ ranges

    @property
    def speed_range(self) -> tuple[float, float]:
        lo, hi = self.working_range
        return float(self.fprime(lo)), float(self.fprime(hi))

    @property
    def convexity_floor(self) -> float:
        """Smallest sampled ``f''`` on the working range (may be 0 at an
        isolated degenerate point, e.g. the quartic flux at ``u = 0``)."""
        u = np.linspace(*self.working_range, 2049)
        return float(np.min(self.fsecond(u)))

    @property
    def max_speed(self) -> float:
        return float(max(abs(s) for s in self.speed_range))

    def with_range(self, lo: float, hi: float) -> FluxModel:
        return replace(self, working_range=(float(lo), float(hi)))

    def fitted_to(self, lo: float, hi: float, margin: float = 1.0) -> FluxModel:
        """Working range ``[lo - margin, hi + margin]`` inflated from data."""
        return self.with_range(lo - margin, hi + margin)

    def check_states(self, *us: Array) -> None:
        lo, hi = self.working_range
        slack = _RANGE_SLACK * max(1.0, abs(lo), abs(hi))
        for u in us:
            u = np.asarray(u)
            if np.any(~np.isfinite(u)) or np.any(u < lo - slack) or np.any(u > hi + slack):
                raise DomainError(
                    f"state outside working range [{lo}, {hi}] of flux '{self.name}'"
                )

    def check_speeds(self, s: Array) -> None:
        lo, hi = self.speed_range
        slack = _RANGE_SLACK * max(1.0, abs(lo), abs(hi))
        s = np.asarray(s)
        if np.any(~np.isfinite(s)) or np.any(s < lo - slack) or np.any(s > hi + slack):
            raise DomainError(
                f"speed outside [{lo}, {hi}] for flux '{self.name}'"
            )

    # }}}

    # {{{ derived quantities

    def fprime_inv(self, s: Array) -> Array:
        if self.fprime_inv_exact is not None:
            return self.fprime_inv_exact(s)
        lo, hi = self.working_range
        return _newton_bisect(self.fprime, self.fsecond, s, lo, hi)

    def legendre(self, s: Array) -> Array:
        if self.legendre_exact is not None:
            return self.legendre_exact(s)
        u = self.fprime_inv(s)
        return s * u - self.f(u)

    @property
    def sonic_point(self) -> float:
        """Minimiser of ``f`` over the working range."""
        lo, hi = self.working_range
        slo, shi = self.speed_range
        if slo >= 0.0:
            return lo
        if shi <= 0.0:
            return hi
        return float(self.fprime_inv(np.float64(0.0)))

    # }}}


def sigma(flux: FluxModel, u: Array, v: Array) -> Array:
    """Averaged characteristic speed ``int_0^1 f'(u + theta (v - u)) dtheta``.

    This is the Rankine-Hugoniot speed ``(f(u) - f(v)) / (u - v)``; for nearly
    equal states the quotient is replaced by ``f'((u + v) / 2)``.
    """
    flux.check_states(u, v)
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)

    d = u - v
    scale = np.maximum(1.0, np.maximum(np.abs(u), np.abs(v)))
    close = np.abs(d) < 1.0e-9 * scale
    with np.errstate(divide="ignore", invalid="ignore"):
        quotient = (flux.f(u) - flux.f(v)) / np.where(close, 1.0, d)
    result = np.where(close, flux.fprime(0.5 * (u + v)), quotient)
    return result[()] if result.ndim == 0 else result


def legendre_transform(flux: FluxModel, s: Array) -> Array:
    """``f*(s)`` for ``s`` in the speed range ``[f'(u_min), f'(u_max)]``."""
    flux.check_speeds(s)
    result = np.asarray(flux.legendre(np.asarray(s, dtype=np.float64)))
    return result[()] if result.ndim == 0 else result


# {{{ built-in fluxes


def _burgers(working_range: tuple[float, float]) -> FluxModel:
    return FluxModel(
        name="burgers",
        f=lambda u: 0.5 * u * u,
        fprime=lambda u: u,
        fsecond=lambda u: np.ones_like(np.asarray(u, dtype=np.float64)),
        fprime_inv_exact=lambda s: np.asarray(s, dtype=np.float64),
        legendre_exact=lambda s: 0.5 * s * s,
        working_range=working_range,
    )


def _quartic(working_range: tuple[float, float]) -> FluxModel:
    return FluxModel(
        name="quartic",
        f=lambda u: 0.25 * u**4,
        fprime=lambda u: u**3,
        fsecond=lambda u: 3.0 * u**2,
        fprime_inv_exact=np.cbrt,
        legendre_exact=lambda s: 0.75 * np.abs(s) ** (4.0 / 3.0),
        working_range=working_range,
    )


def _cosh(working_range: tuple[float, float]) -> FluxModel:
    return FluxModel(
        name="cosh",
        f=np.cosh,
        fprime=np.sinh,
        fsecond=np.cosh,
        fprime_inv_exact=np.arcsinh,
        legendre_exact=lambda s: s * np.arcsinh(s) - np.sqrt(1.0 + s * s),
        working_range=working_range,
    )


_BUILTIN = {
    "burgers": _burgers,
    "quartic": _quartic,
    "cosh": _cosh,
}


def builtin_fluxes(working_range: tuple[float, float] = (-10.0, 10.0)) -> list[FluxModel]:
    return [make(working_range) for make in _BUILTIN.values()]


def flux_names() -> list[str]:
    return list(_BUILTIN)


def make_flux(name: str, working_range: tuple[float, float] = (-10.0, 10.0)) -> FluxModel:
    try:
        return _BUILTIN[name](working_range)
    except KeyError:
        raise ValueError(
            f"unknown flux '{name}' (available: {', '.join(_BUILTIN)})"
        ) from None


# }}}
