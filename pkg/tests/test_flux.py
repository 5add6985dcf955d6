from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from perturbed_riemann.flux import (
    DomainError,
    FluxModel,
    builtin_fluxes,
    flux_names,
    legendre_transform,
    make_flux,
    sigma,
)

RANGE = (-3.0, 3.0)
FLUXES = builtin_fluxes(RANGE)
states = st.floats(*RANGE, allow_nan=False)


# {{{ sigma


def test_sigma_burgers_is_midpoint(burgers):
    assert sigma(burgers, 1.0, -1.0) == 0.0
    assert sigma(burgers, 0.3, 0.9) == pytest.approx(0.6, abs=1e-15)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
def test_sigma_degenerate_is_fprime(flux):
    for u in (-1.5, 0.0, 0.7):
        assert sigma(flux, u, u) == pytest.approx(float(flux.fprime(u)), rel=1e-14)


def test_sigma_quartic_by_hand_and_quadrature():
    q = make_flux("quartic")
    assert sigma(q, 1.0, 0.0) == pytest.approx(0.25, abs=1e-15)
    val, _ = integrate.quad(lambda th: q.fprime(1.0 + th * (0.0 - 1.0)), 0.0, 1.0)
    assert val == pytest.approx(0.25, abs=1e-12)


def test_sigma_near_equal_states_is_stable():
    c = make_flux("cosh")
    u = 1.234
    assert sigma(c, u, u + 1e-12) == pytest.approx(np.sinh(u), rel=1e-10)


def test_sigma_out_of_range():
    f = make_flux("burgers", (-1.0, 1.0))
    with pytest.raises(DomainError):
        sigma(f, 0.0, 2.0)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
@given(u=states, v=states)
def test_sigma_between_endpoint_speeds(flux, u, v):
    s = sigma(flux, u, v)
    lo, hi = sorted((float(flux.fprime(u)), float(flux.fprime(v))))
    tol = 1e-9 * max(1.0, abs(lo), abs(hi))
    assert lo - tol <= s <= hi + tol


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
@given(a=states, b=states, c=states)
def test_sigma_monotone_in_second_state(flux, a, b, c):
    u, s, v = sorted((a, b, c), reverse=True)
    tol = 1e-9 * max(1.0, abs(float(flux.fprime(u))))
    assert sigma(flux, u, v) <= sigma(flux, u, s) + tol


def test_sigma_random_pairs_bounds():
    rng = np.random.default_rng(7)
    for flux in FLUXES:
        u, v = rng.uniform(*RANGE, size=(2, 1000))
        s = sigma(flux, u, v)
        lo = np.minimum(flux.fprime(u), flux.fprime(v))
        hi = np.maximum(flux.fprime(u), flux.fprime(v))
        assert np.all(s >= lo - 1e-9 * np.maximum(1, np.abs(lo)))
        assert np.all(s <= hi + 1e-9 * np.maximum(1, np.abs(hi)))


# }}}


# {{{ legendre


def test_legendre_burgers_closed_form(burgers):
    assert legendre_transform(burgers, 2.0) == 2.0


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
def test_legendre_at_speed_of_zero(flux):
    s0 = float(flux.fprime(0.0))
    assert legendre_transform(flux, s0) == pytest.approx(-float(flux.f(0.0)), abs=1e-12)


def test_legendre_quartic_against_grid():
    q = make_flux("quartic")
    assert legendre_transform(q, 1.0) == pytest.approx(0.75, abs=1e-14)
    u = np.linspace(-3, 3, 600001)
    assert np.max(1.0 * u - q.f(u)) == pytest.approx(0.75, abs=1e-9)


def test_legendre_speed_out_of_range(burgers):
    with pytest.raises(DomainError):
        legendre_transform(burgers, 11.0)


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
@given(u=states, w=states)
def test_fenchel_young(flux, u, w):
    s = float(flux.fprime(w))
    fs = float(flux.legendre(s))
    assert flux.f(u) + fs >= s * u - 1e-9 * max(1.0, abs(s * u))
    # equality at s = f'(u)
    su = float(flux.fprime(u))
    assert abs(flux.f(u) + flux.legendre(su) - u * su) < 1e-10 * max(1.0, abs(u * su))


def test_numeric_fallbacks_match_closed_forms():
    for flux in FLUXES:
        bare = FluxModel(flux.name, flux.f, flux.fprime, flux.fsecond, working_range=RANGE)
        s = np.linspace(*flux.speed_range, 41)[1:-1]
        np.testing.assert_allclose(bare.fprime_inv(s), flux.fprime_inv(s), atol=1e-10)
        np.testing.assert_allclose(bare.legendre(s), flux.legendre(s), atol=1e-9)


# }}}


# {{{ builtins


def test_builtin_inverses():
    assert make_flux("burgers").fprime_inv(0.37) == 0.37
    assert make_flux("cosh").fprime_inv(1.2) == pytest.approx(np.arcsinh(1.2))
    assert make_flux("quartic").fprime_inv(1.0) == 1.0


@pytest.mark.parametrize("flux", FLUXES, ids=lambda f: f.name)
def test_fprime_strictly_increasing_and_invertible(flux):
    u = np.linspace(*flux.working_range, 1001)
    assert np.all(np.diff(flux.fprime(u)) > 0)
    np.testing.assert_allclose(flux.fprime_inv(flux.fprime(u)), u, atol=1e-10)


def test_unknown_flux():
    assert set(flux_names()) >= {"burgers", "quartic", "cosh"}
    with pytest.raises(ValueError, match="unknown flux"):
        make_flux("burger")


def test_invalid_working_range():
    with pytest.raises(DomainError):
        make_flux("burgers", (1.0, 1.0))


def test_fitted_range():
    f = make_flux("burgers").fitted_to(-0.5, 2.0)
    assert f.working_range == (-1.5, 3.0)


# }}}
