"""Experiment configuration files.

Configs are YAML documents. Every key has an explicit default (see
:data:`DEFAULTS`); the fully resolved config is written back into the run
summary. Validation errors carry the line of the offending key.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from perturbed_riemann.flux import FluxModel, flux_names, make_flux
from perturbed_riemann.profiles import (
    CompositeInitialData,
    PeriodicProfile,
    PiecewiseLinear,
    normalize_zero_average,
    smallest_K,
)

STUDY_KINDS = ("shock", "rarefaction", "constant", "periodic", "compare")
PROFILE_KINDS = ("zero", "sin", "cos", "sawtooth", "samples")

DEFAULT_THRESHOLDS: dict[str, dict[str, Any]] = {
    "shock": {
        "residual_slope_max": -0.85,
        "side_slope_max": -0.85,
        "final_residual_max": 5.0e-3,
        "monotone": True,
        "exact_tolerance": 1.0e-8,
        "gluing_max": 1.0e-6,
    },
    "rarefaction": {
        "slope_max": -0.45,
        "sqrt_dominated": True,
        "invariant_factor": 5.0,
        "envelope_growth": 1.1,
    },
    "constant": {
        "slope_max": -0.45,
        "invariant_factor": 5.0,
        "envelope_growth": 1.1,
    },
    "periodic": {
        "slope_min": -1.15,
        "slope_max": -0.85,
        "amplitude_rel_tol": 0.2,
        "entropy_factor": 1.05,
    },
    "compare": {
        "gap_factor": 3.0,
        "ratio_min": 1.5,
        "ratio_max": 2.5,
        "exact_tolerance": 1.0e-12,
    },
}

DEFAULTS: dict[str, Any] = {
    "flux": {"name": "burgers", "params": {}},
    "states": {"left": 1.0, "right": -1.0},
    "profiles": {
        "left": {"kind": "zero", "amplitude": 0.0, "period": 1.0, "phase": 0.0},
        "right": {"kind": "zero", "amplitude": 0.0, "period": 1.0, "phase": 0.0},
    },
    "middle": {"N": 1.0, "nodes": [], "values": [], "bump": None},
    "times": {"t0": 8.0, "ratio": 2.0, "count": 5},
    "envelope_times": {"t0": 4.0, "ratio": 2.0, "count": 7},
    "resolution": {"scan": 1024, "points_per_period": 64, "margin": None},
    "compare": {
        "window": [-4.0, 4.0],
        "dx": [2.0**-8, 2.0**-9],
        "times": [5.0],
        "cfl": 0.9,
        "boundary": "background",
    },
    "K": None,
    "studies": ["shock"],
    "thresholds": {},
    "output": None,
}


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and its line."""


# {{{ yaml with line numbers


def _marks(node: yaml.Node, path: tuple = ()) -> dict[tuple, int]:
    out = {path: node.start_mark.line + 1}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            key = k.value
            out[path + (key,)] = k.start_mark.line + 1
            for p, line in _marks(v, path + (key,)).items():
                out.setdefault(p, line)
    elif isinstance(node, yaml.SequenceNode):
        for i, v in enumerate(node.value):
            out.update(_marks(v, path + (i,)))
    return out


def _merge(base: dict[str, Any], override: dict[str, Any]) -> dict[str, Any]:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("params",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


# }}}


# {{{ resolved config


@dataclass(frozen=True)
class ExperimentConfig:
    raw: dict[str, Any]
    flux: FluxModel
    data: CompositeInitialData
    studies: tuple[str, ...]
    times: np.ndarray
    envelope_times: np.ndarray
    thresholds: dict[str, dict[str, Any]]
    scan_resolution: int
    points_per_period: int
    margin: float | None
    K: int | None
    compare: dict[str, Any]
    output: str | None
    source: str = "<string>"
    folded_means: dict[str, float] = field(default_factory=dict)

    def resolved(self) -> dict[str, Any]:
        """The config with every default filled in (as written to summaries)."""
        out = copy.deepcopy(self.raw)
        out["thresholds"] = copy.deepcopy(self.thresholds)
        out["times"] = [float(t) for t in self.times]
        out["envelope_times"] = [float(t) for t in self.envelope_times]
        return out


class _Validator:
    def __init__(self, marks: dict[tuple, int], source: str) -> None:
        self.marks = marks
        self.source = source

    def error(self, path: tuple, msg: str) -> ConfigError:
        p = path
        while p and p not in self.marks:
            p = p[:-1]
        line = self.marks.get(p)
        where = f"{self.source}:{line}" if line is not None else self.source
        key = ".".join(str(k) for k in path) or "<root>"
        return ConfigError(f"{where}: {key}: {msg}")

    def number(self, value: Any, path: tuple, *, positive: bool = False) -> float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(path, f"expected a number, got {value!r}")
        v = float(value)
        if not math.isfinite(v):
            raise self.error(path, "must be finite")
        if positive and v <= 0:
            raise self.error(path, f"must be positive, got {v}")
        return v

    def integer(self, value: Any, path: tuple, minimum: int = 1) -> int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(path, f"expected an integer, got {value!r}")
        if value < minimum:
            raise self.error(path, f"must be >= {minimum}")
        return int(value)

    def mapping(self, value: Any, path: tuple) -> dict[str, Any]:
        if not isinstance(value, dict):
            raise self.error(path, "expected a mapping")
        return value

    def known_keys(self, value: dict[str, Any], allowed: Any, path: tuple) -> None:
        for k in value:
            if k not in allowed:
                raise self.error(path + (k,), f"unknown key (allowed: {', '.join(sorted(allowed))})")


def _profile(v: _Validator, spec: dict[str, Any], path: tuple) -> tuple[PeriodicProfile, float]:
    v.mapping(spec, path)
    v.known_keys(spec, ("kind", "amplitude", "period", "phase", "samples"), path)
    kind = spec.get("kind", "zero")
    if kind not in PROFILE_KINDS:
        raise v.error(path + ("kind",), f"unknown profile kind '{kind}' (expected one of {', '.join(PROFILE_KINDS)})")
    period = v.number(spec.get("period", 1.0), path + ("period",), positive=True)

    if kind == "samples":
        samples = spec.get("samples")
        if not isinstance(samples, list) or len(samples) < 2:
            raise v.error(path + ("samples",), "need a list of at least two samples")
        vals = np.array([v.number(s, path + ("samples", i)) for i, s in enumerate(samples)])
        return normalize_zero_average(vals, period)

    amplitude = v.number(spec.get("amplitude", 0.0), path + ("amplitude",))
    phase = v.number(spec.get("phase", 0.0), path + ("phase",))
    if kind == "zero":
        return PeriodicProfile.zero(period), 0.0
    return getattr(PeriodicProfile, kind)(amplitude, period, phase), 0.0


def _middle(v: _Validator, spec: dict[str, Any], path: tuple) -> tuple[float, PiecewiseLinear | None]:
    v.mapping(spec, path)
    v.known_keys(spec, ("N", "nodes", "values", "bump"), path)
    N = v.number(spec.get("N", 1.0), path + ("N",), positive=True)

    bump = spec.get("bump")
    nodes = spec.get("nodes") or []
    values = spec.get("values") or []
    if bump is not None and (nodes or values):
        raise v.error(path + ("bump",), "give either a bump or nodes/values, not both")

    if bump is not None:
        v.mapping(bump, path + ("bump",))
        v.known_keys(bump, ("center", "width", "mass"), path + ("bump",))
        c = v.number(bump.get("center", 0.0), path + ("bump", "center"))
        w = v.number(bump.get("width", 1.0), path + ("bump", "width"), positive=True)
        m = v.number(bump.get("mass", 0.0), path + ("bump", "mass"))
        nodes = [c - w / 2, c, c + w / 2]
        values = [0.0, 2.0 * m / w, 0.0]
    else:
        if len(nodes) != len(values):
            raise v.error(path + ("values",), "nodes and values must have the same length")
        nodes = [v.number(x, path + ("nodes", i)) for i, x in enumerate(nodes)]
        values = [v.number(x, path + ("values", i)) for i, x in enumerate(values)]

    if not nodes:
        return N, None
    if len(nodes) < 2:
        raise v.error(path + ("nodes",), "need at least two nodes")
    if np.any(np.diff(nodes) < 0):
        raise v.error(path + ("nodes",), "nodes must be nondecreasing")
    if nodes[0] < -N or nodes[-1] > N:
        raise v.error(path + ("nodes",), f"support [{nodes[0]}, {nodes[-1]}] not inside [-N, N] = [{-N}, {N}]")
    try:
        return N, PiecewiseLinear(np.array(nodes), np.array(values))
    except ValueError as exc:
        raise v.error(path, str(exc)) from None


def _times(v: _Validator, spec: Any, path: tuple) -> np.ndarray:
    if isinstance(spec, list):
        times = np.array([v.number(t, path + (i,), positive=True) for i, t in enumerate(spec)])
    else:
        v.mapping(spec, path)
        v.known_keys(spec, ("t0", "ratio", "count"), path)
        t0 = v.number(spec.get("t0", 8.0), path + ("t0",), positive=True)
        ratio = v.number(spec.get("ratio", 2.0), path + ("ratio",), positive=True)
        count = v.integer(spec.get("count", 5), path + ("count",))
        times = t0 * ratio ** np.arange(count)
    if times.size == 0:
        raise v.error(path, "empty time schedule")
    if np.any(np.diff(times) <= 0):
        raise v.error(path, "times must be strictly increasing")
    return times


def _check_convex(v: _Validator, flux: FluxModel) -> None:
    u = np.linspace(*flux.working_range, 4097)
    fp = flux.fprime(u)
    if np.any(np.diff(fp) <= 0):
        raise v.error(("flux",), f"flux '{flux.name}' is not strictly convex on {flux.working_range}")


def _study_preconditions(v: _Validator, studies: list[str], data: CompositeInitialData) -> None:
    ul, ur = data.u_left, data.u_right
    for i, s in enumerate(studies):
        path = ("studies", i)
        if s == "shock" and not ul > ur:
            raise v.error(path, f"shock study needs states.left > states.right (got {ul}, {ur})")
        if s == "rarefaction" and not ul < ur:
            raise v.error(path, f"rarefaction study needs states.left < states.right (got {ul}, {ur})")
        if s == "constant" and ul != ur:
            raise v.error(path, f"constant study needs states.left == states.right (got {ul}, {ur})")
        if s == "periodic" and (ul != ur or data.has_middle):
            raise v.error(path, "periodic study needs equal states and no middle deviation")


def parse_config(text: str, source: str = "<string>") -> ExperimentConfig:
    try:
        node = yaml.compose(text, Loader=yaml.SafeLoader)
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"{source}:{mark.line + 1}" if mark is not None else source
        raise ConfigError(f"{where}: YAML parse error: {getattr(exc, 'problem', exc)}") from None
    if doc is None:
        doc = {}
    marks = _marks(node) if node is not None else {}
    v = _Validator(marks, source)
    v.mapping(doc, ())
    v.known_keys(doc, DEFAULTS.keys(), ())

    raw = _merge(DEFAULTS, doc)

    fspec = v.mapping(raw["flux"], ("flux",))
    v.known_keys(fspec, ("name", "params"), ("flux",))
    name = fspec.get("name")
    if name not in flux_names():
        raise v.error(("flux", "name"), f"unknown flux '{name}' (available: {', '.join(flux_names())})")
    if fspec.get("params"):
        raise v.error(("flux", "params"), f"flux '{name}' takes no parameters")

    states = v.mapping(raw["states"], ("states",))
    v.known_keys(states, ("left", "right"), ("states",))
    ul = v.number(states["left"], ("states", "left"))
    ur = v.number(states["right"], ("states", "right"))

    profiles = v.mapping(raw["profiles"], ("profiles",))
    v.known_keys(profiles, ("left", "right"), ("profiles",))
    pl, mean_l = _profile(v, profiles["left"], ("profiles", "left"))
    pr, mean_r = _profile(v, profiles["right"], ("profiles", "right"))
    N, middle = _middle(v, raw["middle"], ("middle",))

    # nonzero sample means are folded into the far-field states
    ul += mean_l
    ur += mean_r
    try:
        data = CompositeInitialData(ul, ur, pl, pr, N, middle)
    except ValueError as exc:
        raise v.error(("middle",), str(exc)) from None

    flux = make_flux(name)
    lo, hi = data.total_range
    flux = flux.fitted_to(lo, hi)
    _check_convex(v, flux)

    studies = raw["studies"]
    if isinstance(studies, str):
        studies = [studies]
    if not isinstance(studies, list) or not studies:
        raise v.error(("studies",), "expected a nonempty list of study kinds")
    for i, s in enumerate(studies):
        if s not in STUDY_KINDS:
            raise v.error(("studies", i), f"unknown study '{s}' (expected one of {', '.join(STUDY_KINDS)})")
    if len(set(studies)) != len(studies):
        raise v.error(("studies",), "duplicate study")
    _study_preconditions(v, studies, data)

    K = raw["K"]
    if K is not None:
        K = v.integer(K, ("K",), minimum=smallest_K(data))
    times = _times(v, raw["times"], ("times",))
    envelope_times = _times(v, raw["envelope_times"], ("envelope_times",))

    res = v.mapping(raw["resolution"], ("resolution",))
    v.known_keys(res, ("scan", "points_per_period", "margin"), ("resolution",))
    scan = v.integer(res["scan"], ("resolution", "scan"), minimum=16)
    ppp = v.integer(res["points_per_period"], ("resolution", "points_per_period"), minimum=64)
    margin = res["margin"]
    if margin is not None:
        margin = v.number(margin, ("resolution", "margin"), positive=True)

    cmp_spec = v.mapping(raw["compare"], ("compare",))
    v.known_keys(cmp_spec, DEFAULTS["compare"].keys(), ("compare",))
    window = cmp_spec["window"]
    if not isinstance(window, list) or len(window) != 2:
        raise v.error(("compare", "window"), "expected [a, b]")
    a = v.number(window[0], ("compare", "window", 0))
    b = v.number(window[1], ("compare", "window", 1))
    if not b > a:
        raise v.error(("compare", "window"), "need a < b")
    dxs = cmp_spec["dx"]
    if not isinstance(dxs, list) or not dxs:
        raise v.error(("compare", "dx"), "expected a nonempty list")
    dxs = [v.number(d, ("compare", "dx", i), positive=True) for i, d in enumerate(dxs)]
    for i, d in enumerate(dxs):
        n = (b - a) / d
        if abs(n - round(n)) > 1.0e-9 * n:
            raise v.error(("compare", "dx", i), f"window length {b - a} is not a multiple of dx = {d}")
    cmp_times = _times(v, cmp_spec["times"], ("compare", "times"))
    cfl = v.number(cmp_spec["cfl"], ("compare", "cfl"), positive=True)
    if cfl > 1:
        raise v.error(("compare", "cfl"), "must be <= 1")
    boundary = cmp_spec["boundary"]
    if boundary not in ("periodic", "background"):
        raise v.error(("compare", "boundary"), f"unknown boundary '{boundary}'")
    compare = {"window": (a, b), "dx": dxs, "times": cmp_times, "cfl": cfl, "boundary": boundary}

    thr_spec = v.mapping(raw["thresholds"], ("thresholds",))
    v.known_keys(thr_spec, DEFAULT_THRESHOLDS.keys(), ("thresholds",))
    thresholds = copy.deepcopy(DEFAULT_THRESHOLDS)
    for study, over in thr_spec.items():
        v.mapping(over, ("thresholds", study))
        v.known_keys(over, DEFAULT_THRESHOLDS[study].keys(), ("thresholds", study))
        for k, val in over.items():
            if isinstance(DEFAULT_THRESHOLDS[study][k], bool):
                if not isinstance(val, bool):
                    raise v.error(("thresholds", study, k), "expected true or false")
                thresholds[study][k] = val
            else:
                thresholds[study][k] = v.number(val, ("thresholds", study, k))

    output = raw["output"]
    if output is not None and not isinstance(output, str):
        raise v.error(("output",), "expected a path")

    raw["studies"] = list(studies)
    return ExperimentConfig(
        raw=raw,
        flux=flux,
        data=data,
        studies=tuple(studies),
        times=times,
        envelope_times=envelope_times,
        thresholds=thresholds,
        scan_resolution=scan,
        points_per_period=ppp,
        margin=margin,
        K=K,
        compare=compare,
        output=output,
        source=source,
        folded_means={"left": mean_l, "right": mean_r},
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config: {exc.strerror}") from None
    return parse_config(text, str(path))


# }}}
