"""Study drivers used by the command line.

Each driver turns an :class:`~perturbed_riemann.config.ExperimentConfig` into
a :class:`StudyResult`: named tables (written as CSV by the caller) and a list
of threshold checks. Drivers never touch the filesystem.
"""

from __future__ import annotations

import math
from concurrent.futures import Executor
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

from perturbed_riemann import asymptotics as asy
from perturbed_riemann.config import ExperimentConfig
from perturbed_riemann.godunov import solve_on_window
from perturbed_riemann.laxoleinik import VariationalSolver
from perturbed_riemann.profiles import (
    CompositeInitialData,
    shift_X_infinity,
)


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    threshold: float | tuple[float, float] | None
    op: str
    passed: bool

    def as_dict(self) -> dict[str, Any]:
        thr = list(self.threshold) if isinstance(self.threshold, tuple) else self.threshold
        return {"name": self.name, "value": _json_float(self.value), "op": self.op,
                "threshold": thr, "passed": bool(self.passed)}


def _json_float(x: float) -> float | None:
    return None if x is None or not math.isfinite(x) else float(x)


def check_le(name: str, value: float, bound: float) -> Check:
    return Check(name, float(value), float(bound), "<=", bool(value <= bound))


def check_lt(name: str, value: float, bound: float) -> Check:
    return Check(name, float(value), float(bound), "<", bool(value < bound))


def check_in(name: str, value: float, lo: float, hi: float) -> Check:
    return Check(name, float(value), (float(lo), float(hi)), "in", bool(lo <= value <= hi))


def check_true(name: str, flag: bool) -> Check:
    return Check(name, float(bool(flag)), None, "true", bool(flag))


@dataclass
class Table:
    columns: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self) -> None:
        self.rows = np.asarray(self.rows, dtype=np.float64).reshape(-1, len(self.columns))


@dataclass
class StudyResult:
    name: str
    tables: dict[str, Table] = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    info: dict[str, Any] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)


def _map(executor: Executor | None, fn: Callable[[float], Any], items: Sequence[float]) -> list[Any]:
    """Deterministic fan-out: results are ordered by input index."""
    if executor is None:
        return [fn(x) for x in items]
    return list(executor.map(fn, items))


def make_harness(cfg: ExperimentConfig, data: CompositeInitialData | None = None) -> asy.Harness:
    solver = VariationalSolver(cfg.flux, cfg.data if data is None else data,
                               scan_resolution=cfg.scan_resolution)
    K = cfg.K if data is None else None
    return asy.Harness(solver, margin=cfg.margin, points_per_period=cfg.points_per_period, K=K)


def _decay_checks(prefix: str, report: asy.DecayReport, slope_max: float) -> list[Check]:
    if report.exact:
        return [check_true(f"{prefix}_exact", True)]
    return [check_le(f"{prefix}_slope", report.fitted_slope, slope_max)]


def _decay_info(report: asy.DecayReport) -> dict[str, Any]:
    return {
        "fitted_slope": _json_float(report.fitted_slope),
        "fitted_constant": _json_float(report.fitted_constant),
        "r_squared": _json_float(report.r_squared),
        "exact": report.exact,
    }


# {{{ shock


def shock_study(cfg: ExperimentConfig, executor: Executor | None = None) -> StudyResult:
    thr = cfg.thresholds["shock"]
    h = make_harness(cfg)
    times = cfg.times
    X_inf = shift_X_infinity(cfg.data)
    s = h.riemann.speed

    ests = _map(executor, lambda t: asy.shock_estimates(h, float(t)), times)
    X = np.array([e.mass for e in ests])
    trans = np.array([e.transition for e in ests])
    predicted = s * times + X_inf
    residual = X - predicted
    abs_res = np.abs(residual)

    sides = _map(executor, lambda t: asy.shock_side_errors(h, float(t)), times)
    sup_l = np.array([a for a, _, _ in sides])
    sup_r = np.array([b for _, b, _ in sides])
    errors = sup_l + sup_r + abs_res

    result = StudyResult("shock")
    result.tables["shock_trace"] = Table(("t", "value", "predicted", "residual"),
                                         np.column_stack([times, X, predicted, residual]))
    result.tables["shock_transition"] = Table(("t", "value", "predicted", "residual"),
                                              np.column_stack([times, trans, X, trans - X]))
    result.tables["shock_decay"] = Table(("t", "value"), np.column_stack([times, errors]))
    result.tables["shock_sup_left"] = Table(("t", "value"), np.column_stack([times, sup_l]))
    result.tables["shock_sup_right"] = Table(("t", "value"), np.column_stack([times, sup_r]))

    # fits skip the transient before 4x the merge time
    merge = asy.merge_time_estimate(h, float(times[-1]))
    cutoff = 4.0 * merge if merge is not None else 0.0
    fit = times >= cutoff
    if np.count_nonzero(fit) < 2:
        fit = np.ones(times.size, dtype=bool)

    tol = cfg.data.max_period
    result.checks.append(check_le("estimator_gap", float(np.max(np.abs(trans - X))), tol))

    if np.all(abs_res < thr["exact_tolerance"]):
        result.checks.append(check_lt("residual_exact", float(abs_res.max()), thr["exact_tolerance"]))
    else:
        slope, _, r2, _ = asy.fit_loglog(times[fit], abs_res[fit])
        result.checks.append(check_le("residual_slope", slope, thr["residual_slope_max"]))
        result.checks.append(check_lt("final_residual", float(abs_res[-1]), thr["final_residual_max"]))
        if thr["monotone"]:
            mono = bool(np.all(np.diff(abs_res[1:]) <= 0)) if abs_res.size > 2 else True
            result.checks.append(check_true("residual_monotone_after_first", mono))
        result.info["residual_fit"] = {"slope": _json_float(slope), "r_squared": _json_float(r2)}

    for side, sup in (("left", sup_l), ("right", sup_r)):
        rep = asy.make_decay_report(times[fit], sup[fit], min_points=2)
        result.checks.extend(_decay_checks(f"sup_{side}", rep, thr["side_slope_max"]))
        result.info[f"sup_{side}_fit"] = _decay_info(rep)

    t_glue = float(times[len(times) // 2])
    dev, zone = asy.gluing_deviation(h, t_glue)
    result.checks.append(check_lt("gluing_deviation", dev, thr["gluing_max"]))

    result.info.update({
        "fit_cutoff": cutoff,
        "fit_points": int(np.count_nonzero(fit)),
        "X_infinity": X_inf,
        "shock_speed": s,
        "merge_time": merge,
        "gluing_time": t_glue,
        "gluing_zone": [_json_float(z) for z in zone],
    })
    return result


# }}}


# {{{ rarefaction / constant


def _envelope(result: StudyResult, h: asy.Harness, times: np.ndarray, growth: float) -> None:
    rep = asy.sqrt_bound_check(h, times, growth_factor=growth)
    result.tables["envelope_left"] = Table(("t", "value"), np.column_stack([rep.times, rep.left_ratio]))
    result.tables["envelope_right"] = Table(("t", "value"), np.column_stack([rep.times, rep.right_ratio]))
    result.checks.append(check_true("envelope_bounded", rep.bounded))


def _invariants(result: StudyResult, cfg: ExperimentConfig, h: asy.Harness, times: np.ndarray,
                factor: float) -> None:
    tr = asy.track_invariants(h, times)
    tol = factor * h.dx * cfg.data.sup_norm
    result.tables["invariant_P"] = Table(("t", "value", "predicted", "residual"),
                                         np.column_stack([tr.times, tr.P_values,
                                                          np.full(times.size, tr.P0), tr.P_values - tr.P0]))
    result.tables["invariant_Q"] = Table(("t", "value", "predicted", "residual"),
                                         np.column_stack([tr.times, tr.Q_values,
                                                          np.full(times.size, tr.Q0), tr.Q_values - tr.Q0]))
    result.checks.append(check_le("invariant_P_drift", tr.P_drift, tol))
    result.checks.append(check_le("invariant_Q_drift", tr.Q_drift, tol))
    result.info.update({"P0": tr.P0, "Q0": tr.Q0, "invariant_tolerance": tol})


def background_study(kind: str, cfg: ExperimentConfig, executor: Executor | None = None) -> StudyResult:
    thr = cfg.thresholds[kind]
    h = make_harness(cfg)
    times = cfg.times
    errors = np.array(_map(executor, lambda t: asy.sup_error(h, float(t), kind), times))

    result = StudyResult(kind)
    result.tables[f"{kind}_decay"] = Table(("t", "value"), np.column_stack([times, errors]))
    rep = asy.make_decay_report(times, errors, min_points=min(5, times.size))
    result.checks.extend(_decay_checks("decay", rep, thr["slope_max"]))
    result.info["decay_fit"] = _decay_info(rep)

    if kind == "rarefaction" and thr["sqrt_dominated"] and not rep.exact:
        bound = errors[0] * np.sqrt(times[0] / times)
        result.checks.append(check_true("sqrt_dominated", bool(np.all(errors <= bound * (1 + 1e-12)))))

    _invariants(result, cfg, h, times, thr["invariant_factor"])
    _envelope(result, h, cfg.envelope_times, thr["envelope_growth"])
    return result


# }}}


# {{{ periodic


def periodic_study(cfg: ExperimentConfig, executor: Executor | None = None) -> StudyResult:
    thr = cfg.thresholds["periodic"]
    data = CompositeInitialData.periodic(cfg.data.u_left, cfg.data.profile_left)
    h = make_harness(cfg, data)
    times = cfg.times
    p = data.profile_left.period
    f2 = float(cfg.flux.fsecond(data.u_left))

    errors = np.array(_map(executor, lambda t: asy.sup_error(h, float(t), "periodic"), times))
    predicted = p / (2.0 * times * f2) if f2 > 0 else np.full(times.size, math.nan)

    result = StudyResult("periodic")
    result.tables["periodic_decay"] = Table(("t", "value", "predicted", "residual"),
                                            np.column_stack([times, errors, predicted, errors - predicted]))
    rep = asy.make_decay_report(times, errors, min_points=min(5, times.size))
    result.info["decay_fit"] = _decay_info(rep)
    if rep.exact:
        result.checks.append(check_true("decay_exact", True))
        return result

    result.checks.append(check_in("decay_slope", rep.fitted_slope, thr["slope_min"], thr["slope_max"]))
    if f2 > 0:
        rel = float(np.max(np.abs(errors / predicted - 1.0)))
        result.checks.append(check_le("amplitude_rel_error", rel, thr["amplitude_rel_tol"]))

    # one-sided Lipschitz constant against 1 / min f''
    floor = float(np.min(cfg.flux.fsecond(np.linspace(*data.total_range, 1025))))
    n = 4 * cfg.points_per_period + 1
    E = np.array(_map(executor, lambda t: asy.entropy_constant(h.solver, float(t), (0.0, p), n), times))
    result.tables["periodic_entropy"] = Table(("t", "value"), np.column_stack([times, E]))
    if floor > 0:
        result.checks.append(check_le("entropy_constant", float(E.max()), thr["entropy_factor"] / floor))
    result.info["entropy_ideal"] = 1.0 / floor if floor > 0 else None
    return result


# }}}


# {{{ oracle comparison


def _same_profile(a: Any, b: Any) -> bool:
    if (a.kind, a.period, a.amplitude, a.phase) != (b.kind, b.period, b.amplitude, b.phase):
        return False
    if a.samples is None or b.samples is None:
        return a.samples is b.samples
    return bool(np.array_equal(a.samples, b.samples))


class WindowError(ValueError):
    """The comparison window cannot give valid boundary data."""


def compare_oracles(cfg: ExperimentConfig, executor: Executor | None = None) -> StudyResult:
    """L1 / Linf gaps between variational and Godunov cell averages."""
    thr = cfg.thresholds["compare"]
    spec = cfg.compare
    a, b = spec["window"]
    data = cfg.data

    if spec["boundary"] == "periodic":
        p = data.profile_left.period
        periodic = (data.u_left == data.u_right and not data.has_middle
                    and _same_profile(data.profile_left, data.profile_right))
        nper = (b - a) / p
        if not periodic or abs(nper - round(nper)) > 1.0e-9 * max(nper, 1.0):
            raise WindowError(
                "periodic boundaries need purely periodic data and a window spanning "
                f"a whole number of periods (window length {b - a}, period {p})"
            )

    solver = VariationalSolver(cfg.flux, data, scan_resolution=cfg.scan_resolution)
    rng = data.range_width

    def one(job: tuple[float, float]) -> tuple[float, float, float, float]:
        t, dx = job
        fv = solve_on_window(data, cfg.flux, (a, b), t, dx, cfl=spec["cfl"], boundary=spec["boundary"])
        ref = solver.cell_averages(fv.edges, t)
        diff = np.abs(fv.cell_averages - ref)
        return t, dx, float(np.sum(diff) * dx), float(np.max(diff))

    jobs = [(float(t), float(dx)) for t in spec["times"] for dx in spec["dx"]]
    rows = np.array(_map(executor, one, jobs)).reshape(-1, 4)

    result = StudyResult("compare")
    result.tables["compare"] = Table(("t", "dx", "l1", "linf"), rows)
    orders = []
    for t in spec["times"]:
        sub = rows[rows[:, 0] == t]
        for _, dx, l1, _ in sub:
            if l1 < thr["exact_tolerance"]:
                result.checks.append(check_lt(f"l1_gap_exact[t={t:g},dx={dx:g}]", l1, thr["exact_tolerance"]))
            else:
                result.checks.append(check_le(f"l1_gap[t={t:g},dx={dx:g}]", l1 / (dx * rng), thr["gap_factor"]))
        for (_, dx0, g0, _), (_, dx1, g1, _) in zip(sub[:-1], sub[1:]):
            if g0 < thr["exact_tolerance"] or g1 < thr["exact_tolerance"]:
                continue
            ratio = g0 / g1
            orders.append(math.log(ratio) / math.log(dx0 / dx1))
            result.checks.append(check_in(f"gap_ratio[t={t:g},dx={dx0:g}->{dx1:g}]", ratio,
                                          thr["ratio_min"], thr["ratio_max"]))
    result.info["order_estimates"] = orders
    result.info["range"] = rng
    return result


# }}}


def run_study(kind: str, cfg: ExperimentConfig, executor: Executor | None = None) -> StudyResult:
    if kind == "shock":
        return shock_study(cfg, executor)
    if kind in ("rarefaction", "constant"):
        return background_study(kind, cfg, executor)
    if kind == "periodic":
        return periodic_study(cfg, executor)
    if kind == "compare":
        return compare_oracles(cfg, executor)
    raise ValueError(f"unknown study '{kind}'")
