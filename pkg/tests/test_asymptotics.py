from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import composite
from perturbed_riemann import asymptotics as asy
from perturbed_riemann.godunov import solve_on_window
from perturbed_riemann.laxoleinik import VariationalSolver
from perturbed_riemann.profiles import (
    CompositeInitialData,
    PeriodicProfile,
    PiecewiseLinear,
    PreconditionError,
    initial_invariants,
    shift_X_infinity,
)


def harness(flux, data, **kw):
    return asy.Harness(VariationalSolver(flux, data), **kw)


# {{{ fitting


@given(slope=st.floats(-2.0, -0.2), C=st.floats(0.01, 10.0))
def test_fit_recovers_power_law(slope, C):
    t = 2.0 ** np.arange(3, 9)
    s, c, r2, n = asy.fit_loglog(t, C * t**slope)
    assert s == pytest.approx(slope, abs=1e-10)
    assert c == pytest.approx(C, rel=1e-9)
    assert r2 == pytest.approx(1.0, abs=1e-12) and n == t.size


def test_fit_ignores_tiny_errors():
    t = 2.0 ** np.arange(6)
    e = 1.0 / t
    e[2] = 1e-14
    s, _, _, n = asy.fit_loglog(t, e)
    assert n == 5 and s == pytest.approx(-1.0, abs=1e-12)


def test_decay_report_flags_exact_and_insufficient():
    t = np.arange(1.0, 6.0)
    assert asy.make_decay_report(t, np.full(5, 1e-12)).exact
    with pytest.raises(asy.InsufficientData):
        asy.make_decay_report(t[:4], 1.0 / t[:4])
    with pytest.raises(ValueError):
        asy.DecayReport(np.array([2.0, 1.0]), np.ones(2), 0, 0, 0)
    with pytest.raises(ValueError):
        asy.DecayReport(np.array([1.0, 2.0]), np.array([1.0, -1.0]), 0, 0, 0)


# }}}


# {{{ shock location


@pytest.mark.parametrize("ul,ur", [(1.0, -1.0), (1.0, 0.0), (0.5, -2.0)])
def test_clean_shock_exact(burgers, ul, ur):
    h = harness(burgers, CompositeInitialData.riemann(ul, ur))
    s = 0.5 * (ul + ur)
    for t in (1.0, 4.0, 9.0):
        est = asy.shock_estimates(h, t)
        assert est.mass == pytest.approx(s * t, abs=1e-12)
        assert est.transition == pytest.approx(s * t, abs=1e-9)
        assert asy.locate_shock(h, t) == pytest.approx(s * t, abs=1e-12)


def test_cos_left_residual_decays(burgers):
    d = composite(1.0, -1.0, PeriodicProfile.cos(0.3, 1.0), PeriodicProfile.zero(), N=1.0)
    h = harness(burgers, d)
    X_inf = shift_X_infinity(d)
    assert X_inf == pytest.approx(0.3 / (4 * math.pi))
    res = np.array([abs(asy.locate_shock(h, t) - X_inf) for t in (4.0, 8.0, 16.0, 32.0, 64.0)])
    assert np.all(np.diff(res) <= 0)
    assert res[-1] < 2e-3


def test_compact_bump_shift_against_godunov(burgers):
    mid = PiecewiseLinear(np.array([-0.5, 0.0, 0.5]), np.array([0.0, 0.8, 0.0]))
    d = CompositeInitialData(1.0, 0.0, PeriodicProfile.zero(), PeriodicProfile.zero(), 1.0, mid)
    h = harness(burgers, d)
    t = 12.0
    X = asy.locate_shock(h, t)
    assert X == pytest.approx(0.5 * t + 0.4, abs=1e-9)
    # Godunov: conservative shock position from the total mass on a window
    dx = 2.0**-7
    a, b = -2.0, 12.0
    fv = solve_on_window(d, burgers, (a, b), t, dx)
    X_fv = a + np.sum(fv.cell_averages) * dx  # u = 1 left of X, 0 right of it
    assert abs(X_fv - X) < 2 * dx


def test_shock_trace_invariants(burgers, wiggles):
    h = harness(burgers, composite(1.0, -0.5, *wiggles))
    tr = asy.shock_trace(h, [2.0, 4.0, 8.0, 16.0])
    np.testing.assert_array_equal(tr.residuals, tr.positions - tr.predicted)
    speeds = np.abs(np.diff(tr.positions) / np.diff(tr.times))
    assert np.all(speeds <= h.flux.max_speed)
    assert np.all(np.abs(tr.transition - tr.positions) < h.data.max_period)


def test_estimator_disagreement_raises(burgers, wiggles, monkeypatch):
    h = harness(burgers, composite(1.0, -1.0, *wiggles))
    monkeypatch.setattr(asy, "shock_transition_estimate", lambda h, t, c: (c + 5.0, 0.0, (c, c)))
    with pytest.raises(asy.EstimatorDisagreement):
        asy.locate_shock(h, 8.0)


def test_K1_too_small(burgers, wiggles):
    h = harness(burgers, composite(1.0, -1.0, *wiggles))
    with pytest.raises(PreconditionError):
        asy.locate_shock(h, 8.0, K1=0)


def test_shock_requires_shock_data(burgers, wiggles):
    h = harness(burgers, composite(-1.0, 1.0, *wiggles))
    with pytest.raises(PreconditionError):
        asy.locate_shock(h, 8.0)


# }}}


# {{{ merge time and gluing


def test_merge_time_clean_shock(burgers):
    h = harness(burgers, CompositeInitialData.riemann(1.0, -1.0))
    assert asy.merge_time_estimate(h, 8.0, times=[0.5, 1.0, 2.0]) == 0.5


def test_merge_time_perturbed(burgers, wiggles):
    h = harness(burgers, composite(1.0, -1.0, *wiggles))
    T = asy.merge_time_estimate(h, 64.0)
    assert T is not None and T < 50


def test_merge_time_near_degenerate_reports(burgers):
    d = composite(0.025, -0.025, PeriodicProfile.sin(0.5, 1.0), PeriodicProfile.sin(0.5, 1.0), N=1.0)
    T = asy.merge_time_estimate(harness(burgers, d), 16.0)
    assert T is None or T > 0


def test_gluing(burgers, wiggles):
    h = harness(burgers, composite(1.0, -1.0, *wiggles))
    dev, zone = asy.gluing_deviation(h, 16.0)
    assert dev < 1e-8
    assert zone[0] - 1.0 <= asy.locate_shock(h, 16.0) <= zone[1] + 1.0


# }}}


# {{{ invariants


def test_invariants_zero_perturbation(burgers):
    h = harness(burgers, CompositeInitialData.riemann(0.3, 0.3))
    tr = asy.track_invariants(h, [1.0, 5.0])
    np.testing.assert_allclose(tr.P_values, 0.0, atol=1e-14)
    np.testing.assert_allclose(tr.Q_values, 0.0, atol=1e-14)


def test_invariants_rarefaction_dip(burgers, wiggles):
    mid = PiecewiseLinear(np.array([-1.5, -1.0, -0.5]), np.array([0.0, -0.4, 0.0]))
    d = composite(-1.0, 1.0, *wiggles, middle=mid)
    h = harness(burgers, d)
    tr = asy.track_invariants(h, [1.0, 5.0, 25.0])
    tol = 5 * h.dx * d.sup_norm
    assert tr.P0 == pytest.approx(-0.2, abs=1e-12)
    assert tr.P_drift <= tol and tr.Q_drift <= tol


def test_invariants_constant_case(burgers):
    d = composite(0.0, 0.0, PeriodicProfile.sin(1.0, 1.0), PeriodicProfile.sin(1.0, 1.5))
    h = harness(burgers, d)
    tr = asy.track_invariants(h, [1.0, 5.0, 25.0])
    P0, _ = initial_invariants(d)
    np.testing.assert_allclose(tr.P_values, P0, atol=5 * h.dx * d.sup_norm)


def test_invariants_K2_too_small(burgers, wiggles):
    h = harness(burgers, composite(-1.0, 1.0, *wiggles))
    with pytest.raises(PreconditionError):
        asy.track_invariants(h, [1.0, 50.0], K2=1)


def test_invariants_need_ordered_states(burgers, wiggles):
    with pytest.raises(PreconditionError):
        asy.track_invariants(harness(burgers, composite(1.0, -1.0, *wiggles)), [1.0])


# }}}


# {{{ decay and envelopes


def test_decay_exact_for_clean_shock(burgers):
    h = harness(burgers, CompositeInitialData.riemann(1.0, -1.0))
    rep = asy.decay_study("shock", h, [2.0, 4.0, 8.0, 16.0, 32.0])
    assert rep.exact


def test_decay_periodic_slope(burgers):
    h = harness(burgers, CompositeInitialData.periodic(0.0, PeriodicProfile.sin(1.0, 2 * math.pi)))
    rep = asy.decay_study("periodic", h, [10.0, 20.0, 40.0, 80.0, 160.0])
    assert -1.15 <= rep.fitted_slope <= -0.85


def test_decay_target_preconditions(burgers, wiggles):
    h = harness(burgers, composite(1.0, -1.0, *wiggles))
    with pytest.raises(PreconditionError):
        asy.sup_error(h, 4.0, "rarefaction")
    with pytest.raises(ValueError):
        asy.sup_error(h, 4.0, "nonsense")


def test_envelope_zero_perturbations(burgers):
    h = harness(burgers, CompositeInitialData.riemann(-1.0, 1.0))
    rep = asy.sqrt_bound_check(h, [2.0, 4.0, 8.0, 16.0])
    assert np.all(rep.left_distance <= 1.0) and np.all(rep.right_distance <= 1.0)
    assert rep.bounded


def test_envelope_bounded_ratio_logic():
    t = np.array([1.0, 4.0, 16.0, 64.0])
    ok = asy.EnvelopeReport(t, t, t, np.array([1.0, 1.5, 2.0, 4.0]), np.sqrt(t))
    assert ok.bounded
    bad = asy.EnvelopeReport(t, t, t, np.array([1.0, 2.0, 8.0, 32.0]), np.sqrt(t))
    assert not bad.bounded


# }}}
