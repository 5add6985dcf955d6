from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import composite
from perturbed_riemann.flux import make_flux
from perturbed_riemann.laxoleinik import (
    RiemannSolution,
    VariationalSolver,
    periodic_reference,
    riemann_evaluate,
)
from perturbed_riemann.profiles import CompositeInitialData, PeriodicProfile, PiecewiseLinear

SIN = PeriodicProfile.sin(1.0, 2 * math.pi)


@pytest.fixture(scope="module")
def sin_solver(burgers):
    return VariationalSolver(burgers, CompositeInitialData.periodic(0.0, SIN))


@pytest.fixture(scope="module")
def perturbed_shock(burgers, wiggles):
    return VariationalSolver(burgers, composite(1.0, -1.0, *wiggles))


@pytest.fixture(scope="module")
def cosh_rarefaction(wiggles):
    mid = PiecewiseLinear(np.array([-1.0, -0.2, 0.4]), np.array([0.0, 0.6, 0.0]))
    return VariationalSolver(make_flux("cosh"), composite(-0.5, 0.7, *wiggles, N=1.5, middle=mid))


# {{{ closed forms


def test_rarefaction_fan(burgers):
    s = VariationalSolver(burgers, CompositeInitialData.riemann(-1.0, 1.0))
    assert s.evaluate(0.5, 1.0) == pytest.approx(0.5, abs=1e-12)


def test_stationary_shock(burgers):
    s = VariationalSolver(burgers, CompositeInitialData.riemann(1.0, -1.0))
    x = np.array([-3.0, -0.4, -1e-6, 1e-6, 0.4, 3.0])
    np.testing.assert_allclose(s.evaluate(x, 2.0), [1, 1, 1, -1, -1, -1], atol=1e-12)


def test_riemann_evaluate_examples(burgers):
    assert riemann_evaluate(RiemannSolution(1.0, -1.0, burgers), -0.1, 1.0) == 1.0
    assert riemann_evaluate(RiemannSolution(-1.0, 1.0, burgers), 0.0, 5.0) == 0.0
    q = make_flux("quartic")
    assert riemann_evaluate(RiemannSolution(-1.0, 1.0, q), 3.0, 3.0) == pytest.approx(1.0, abs=1e-12)


def test_riemann_kinds(burgers):
    assert RiemannSolution(1.0, -0.5, burgers).kind == "shock"
    assert RiemannSolution(1.0, -0.5, burgers).speed == pytest.approx(0.25)
    assert RiemannSolution(-1.0, 1.0, burgers).kind == "rarefaction"
    assert RiemannSolution(0.3, 0.3, burgers).kind == "constant"


@pytest.mark.parametrize("name", ["burgers", "quartic", "cosh"])
def test_variational_matches_riemann(name):
    f = make_flux(name)
    x = np.linspace(-4, 4, 81) + 1e-3
    for ul, ur in ((-1.0, 1.0), (1.0, -0.5), (0.4, 0.4)):
        s = VariationalSolver(f, CompositeInitialData.riemann(ul, ur))
        exact = RiemannSolution(ul, ur, s.flux).evaluate(x, 2.0)
        np.testing.assert_allclose(s.evaluate(x, 2.0), exact, atol=1e-9)


def test_time_zero_and_negative(perturbed_shock):
    x = np.linspace(-3, 3, 7)
    np.testing.assert_array_equal(perturbed_shock.evaluate(x, 0.0), perturbed_shock.data.value(x))
    with pytest.raises(ValueError):
        perturbed_shock.evaluate(x, -1.0)


# }}}


# {{{ brute-force oracle


def brute_value(solver, x: float, t: float, n: int = 400001) -> float:
    """min_y U0(y) + t f*((x - y) / t) on a dense y-grid plus the data kinks."""
    a, b = x - solver.s_max * t, x - solver.s_min * t
    # kinks of U0 sit at the breakpoints of u0; the grid must contain them
    bp = solver.data.breakpoints()
    y = np.concatenate([np.linspace(a, b, n), bp[(bp > a) & (bp < b)]])
    G = solver.data.primitive(y) + t * solver.flux.legendre((x - y) / t)
    return float(G.min())


@given(x=st.floats(-6.0, 6.0), t=st.sampled_from([0.5, 2.0, 7.0]))
def test_value_matches_grid_oracle(cosh_rarefaction, x, t):
    v = cosh_rarefaction.value(np.array([x]), t)[0]
    ref = brute_value(cosh_rarefaction, x, t)
    # the solver finds the true minimum, which can only be below the grid one
    assert ref - 1e-7 <= v <= ref + 1e-12


@given(x=st.floats(-5.0, 5.0), t=st.sampled_from([0.7, 3.0, 11.0]))
def test_value_matches_grid_oracle_shock(perturbed_shock, x, t):
    v = perturbed_shock.value(np.array([x]), t)[0]
    ref = brute_value(perturbed_shock, x, t)
    assert ref - 1e-7 <= v <= ref + 1e-12


def test_derivative_of_value_is_u(cosh_rarefaction):
    t = 3.0
    x = np.linspace(-4, 4, 8001)
    V = cosh_rarefaction.value(x, t)
    u = cosh_rarefaction.evaluate(0.5 * (x[1:] + x[:-1]), t)
    avg = np.diff(V) / np.diff(x)
    # cell means and midpoint values agree to O(dx) away from shocks
    assert np.median(np.abs(avg - u)) < 1e-5


# }}}


# {{{ solution properties


@given(x=st.floats(-8.0, 8.0), t=st.floats(0.1, 40.0))
def test_maximum_principle_and_one_sided_limits(perturbed_shock, x, t):
    lo, hi = perturbed_shock.data.total_range
    um = perturbed_shock.evaluate(x, t, side="left")
    up = perturbed_shock.evaluate(x, t, side="right")
    assert lo - 1e-12 <= up <= um + 1e-12 <= hi + 2e-12


def test_oleinik_entropy_sin(sin_solver):
    for t in (10.0, 20.0, 40.0):
        x = np.linspace(0, 2 * math.pi, 4097)
        u = sin_solver.evaluate(x, t)
        for k in (1, 2, 4, 8):
            a = x[k:] - x[:-k]
            assert np.max(t * (u[k:] - u[:-k]) / a) <= 1.05


def test_conservation_between_divides(burgers, wiggles):
    d = composite(-1.0, 1.0, *wiggles)
    s = VariationalSolver(burgers, d)
    f = s.flux

    def boundary_flux(ub):
        return float(f.f(ub) - f.fprime(ub) * ub)

    from perturbed_riemann.asymptotics import Harness

    h = Harness(s)
    K = h.divide_K(20.0)
    M0 = s.integral(h.gamma("left", K, 0.0), h.gamma("right", K, 0.0), 0.0)
    for t in (1.0, 5.0, 20.0):
        gl, gr = h.gamma("left", K, t), h.gamma("right", K, t)
        M = s.integral(gl, gr, t)
        expected = M0 + t * (boundary_flux(d.u_left) - boundary_flux(d.u_right))
        assert abs(M - expected) < 1e-6 * (gr - gl)


# }}}


# {{{ periodic references


def test_periodic_reference_zero(burgers):
    x = np.linspace(-3, 3, 13)
    np.testing.assert_array_equal(periodic_reference(PeriodicProfile.zero(), 0.7, burgers, x, 4.0), 0.7)


def test_periodic_reference_is_periodic(burgers, wiggles):
    wl, _ = wiggles
    x = np.linspace(-2, 2, 41) + 0.0137
    a = periodic_reference(wl, 0.3, burgers, x, 6.0)
    b = periodic_reference(wl, 0.3, burgers, x + wl.period, 6.0)
    np.testing.assert_allclose(a, b, atol=1e-9)


def test_periodic_sin_sup_norm(sin_solver):
    for t in (10.0, 20.0):
        x = np.linspace(0, 2 * math.pi, 2049)
        sup = np.max(np.abs(sin_solver.evaluate(x, t)))
        assert 0.8 * math.pi / t <= sup <= 1.2 * math.pi / t


# }}}


# {{{ sampled fields


def test_sample_field_constant(burgers):
    s = VariationalSolver(burgers, CompositeInitialData.riemann(0.25, 0.25))
    fld = s.sample_field((-2, 2), 3.0, 101)
    np.testing.assert_array_equal(fld.u, 0.25)
    assert fld.shocks.shape == (0, 3)


def test_sample_field_single_shock(burgers):
    s = VariationalSolver(burgers, CompositeInitialData.riemann(1.0, 0.0))
    fld = s.sample_field((-5, 5), 4.0, 1001)
    assert fld.shocks.shape[0] == 1
    assert fld.shocks[0, 0] == pytest.approx(2.0, abs=1e-9)
    assert fld.shocks[0, 1:] == pytest.approx([1.0, 0.0], abs=1e-9)


def test_sample_field_sawtooth_one_jump_per_period(sin_solver):
    fld = sin_solver.sample_field((0.5, 0.5 + 2 * math.pi), 10.0, 2049)
    assert fld.shocks.shape[0] == 1
    assert fld.shocks[0, 0] == pytest.approx(math.pi, abs=1e-6)


def test_sample_field_rejects_bad_windows(sin_solver):
    with pytest.raises(ValueError):
        sin_solver.sample_field((1.0, 1.0), 1.0, 10)
    with pytest.raises(ValueError):
        sin_solver.sample_field((0.0, 1.0), 1.0, 1)


def test_cell_averages_exact(perturbed_shock):
    fld = perturbed_shock.sample_field((-3, 3), 5.0, 601)
    edges = fld.x
    np.testing.assert_allclose(perturbed_shock.cell_averages(edges, 5.0), fld.cell_averages, atol=1e-12)
    assert np.sum(fld.cell_averages * fld.dx) == pytest.approx(perturbed_shock.integral(-3, 3, 5.0), abs=1e-11)


# }}}
