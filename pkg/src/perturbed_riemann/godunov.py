"""First-order Godunov finite volumes with the exact convex Riemann flux.

This is the independent oracle for the variational solver: it shares only the
flux model and the exact initial cell averages with it.

Two boundary modes are supported. ``"periodic"`` wraps the window.
``"background"`` pads one ghost cell on each side with the initial background
cell average just outside the window and keeps it frozen; the error this
introduces travels inward at most one cell per step, so a driver that pads the
window by ``t_final * max|f'| / cfl`` gets an exact interior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from perturbed_riemann.flux import FluxModel
from perturbed_riemann.profiles import CompositeInitialData

BOUNDARIES = ("periodic", "background")


def godunov_flux(flux: FluxModel, ul: np.ndarray, ur: np.ndarray) -> np.ndarray:
    """Exact Riemann flux: ``min f`` on ``[ul, ur]`` if ``ul <= ur``, else
    ``max(f(ul), f(ur))``."""
    ul = np.asarray(ul, dtype=np.float64)
    ur = np.asarray(ur, dtype=np.float64)
    us = flux.sonic_point

    fl = flux.f(ul)
    fr = flux.f(ur)
    expanding = ul <= ur
    lo = np.minimum(ul, ur)
    hi = np.maximum(ul, ur)
    fmin = flux.f(np.clip(us, lo, hi))
    out = np.where(expanding, fmin, np.maximum(fl, fr))
    return out[()] if out.ndim == 0 else out


@dataclass(frozen=True)
class FvState:
    cell_averages: np.ndarray
    dx: float
    window: tuple[float, float]
    t: float = 0.0
    cfl: float = 0.9
    ghosts: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.cell_averages.size == 0:
            raise ValueError("empty state")
        if not (0.0 < self.cfl <= 1.0):
            raise ValueError(f"cfl must be in (0, 1], got {self.cfl}")

    @property
    def centers(self) -> np.ndarray:
        a, _ = self.window
        return a + (np.arange(self.cell_averages.size) + 0.5) * self.dx

    @property
    def edges(self) -> np.ndarray:
        a, _ = self.window
        return a + np.arange(self.cell_averages.size + 1) * self.dx

    @property
    def mass(self) -> float:
        return float(np.sum(self.cell_averages) * self.dx)


def initial_state(
    data: CompositeInitialData,
    window: tuple[float, float],
    ncells: int,
    *,
    cfl: float = 0.9,
) -> FvState:
    """Exact initial cell averages on ``ncells`` uniform cells of ``window``."""
    a, b = window
    if not (b > a) or ncells < 1:
        raise ValueError("need a nondegenerate window and at least one cell")
    dx = (b - a) / ncells
    edges = a + np.arange(-1, ncells + 2) * dx
    avg = np.diff(data.primitive(edges)) / dx
    return FvState(
        cell_averages=avg[1:-1].copy(),
        dx=dx,
        window=(a, b),
        cfl=cfl,
        ghosts=(float(avg[0]), float(avg[-1])),
    )


def _padded(state: FvState, boundary: str) -> np.ndarray:
    u = state.cell_averages
    if boundary == "periodic":
        return np.concatenate([u[-1:], u, u[:1]])
    if boundary == "background":
        if state.ghosts is None:
            raise ValueError("background boundary needs ghost values")
        gl, gr = state.ghosts
        return np.concatenate([[gl], u, [gr]])
    raise ValueError(f"unknown boundary '{boundary}' (expected one of {BOUNDARIES})")


def stable_dt(state: FvState, flux: FluxModel, boundary: str = "periodic") -> float:
    speed = float(np.max(np.abs(flux.fprime(_padded(state, boundary)))))
    return math.inf if speed == 0.0 else state.cfl * state.dx / speed


def step(
    state: FvState,
    flux: FluxModel,
    boundary: str = "periodic",
    dt: float | None = None,
) -> FvState:
    """One conservative update ``u -= dt / dx (F_{i+1/2} - F_{i-1/2})``."""
    up = _padded(state, boundary)
    if dt is None:
        dt = stable_dt(state, flux, boundary)
        if not math.isfinite(dt):
            # all characteristic speeds vanish: nothing moves
            return state
    F = godunov_flux(flux, up[:-1], up[1:])
    u = state.cell_averages - dt / state.dx * (F[1:] - F[:-1])
    return replace(state, cell_averages=u, t=state.t + dt)


def run_until(
    state: FvState,
    flux: FluxModel,
    t_final: float,
    boundary: str = "periodic",
) -> FvState:
    if t_final < state.t:
        raise ValueError(f"t_final = {t_final} is before the current time {state.t}")

    while state.t < t_final:
        dt = stable_dt(state, flux, boundary)
        remaining = t_final - state.t
        if dt >= remaining or remaining <= 1.0e-14 * max(1.0, t_final):
            state = step(state, flux, boundary, dt=remaining)
            state = replace(state, t=float(t_final))
            break
        state = step(state, flux, boundary, dt=dt)
    return state


def background_window(
    data: CompositeInitialData,
    flux: FluxModel,
    window: tuple[float, float],
    t_final: float,
    dx: float,
    cfl: float = 0.9,
) -> tuple[tuple[float, float], int, int]:
    """Pad ``window`` so frozen ghost cells cannot reach it before ``t_final``.

    Returns the padded window, its cell count, and the number of padding
    cells on each side. ``window`` is assumed to be a multiple of ``dx``.
    """
    lo, hi = data.total_range
    smax = max(abs(float(flux.fprime(lo))), abs(float(flux.fprime(hi))))
    # numerical information moves one cell per step, i.e. at speed smax / cfl
    pad_cells = int(math.ceil(t_final * smax / (cfl * dx))) + 4
    a, b = window
    ncells = int(round((b - a) / dx))
    if not math.isclose(ncells * dx, b - a, rel_tol=1.0e-10):
        raise ValueError("window length must be a multiple of dx")
    return (a - pad_cells * dx, b + pad_cells * dx), ncells + 2 * pad_cells, pad_cells


def solve_on_window(
    data: CompositeInitialData,
    flux: FluxModel,
    window: tuple[float, float],
    t_final: float,
    dx: float,
    *,
    cfl: float = 0.9,
    boundary: str = "background",
) -> FvState:
    """Godunov cell averages on ``window`` at ``t_final``.

    With ``boundary="background"`` the computation runs on a padded window and
    only the requested cells are returned.
    """
    lo, hi = data.total_range
    flux = flux.fitted_to(lo, hi) if (lo < flux.working_range[0] or hi > flux.working_range[1]) else flux
    if boundary == "periodic":
        n = int(round((window[1] - window[0]) / dx))
        state = initial_state(data, window, n, cfl=cfl)
        return run_until(state, flux, t_final, "periodic")

    padded, n, pad = background_window(data, flux, window, t_final, dx, cfl)
    state = initial_state(data, padded, n, cfl=cfl)
    state = run_until(state, flux, t_final, "background")
    inner = state.cell_averages[pad:n - pad].copy()
    return FvState(inner, state.dx, window, state.t, cfl)
