"""Scenario files: strict TOML schema, defaults, validation and digests.

A scenario document is overlaid on the shipped ``default_scenario.toml``,
so any block or key may be omitted. Unknown keys, wrong types and violated
invariants are rejected with an error naming the dotted key.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .circuits import CircuitParams
from .control import DEFAULT_RULES, ControllerSettings, FuzzyTuner, PidGains, _check_table
from .engine import DutyCycle, SimConfig
from .errors import ConfigError, ConfigSyntaxError, DomainError, InvariantError, UnknownKeyError
from .physics import (
    ActuatorParams,
    FluidProperties,
    LoadParams,
    PumpParams,
    ReliefValveParams,
    ValveParams,
)

FLOAT, INT, STR, BOOL, POINTS, RANGE, TABLE = "float", "int", "str", "bool", "points", "range", "table"

SCHEMA: dict[str, dict[str, Any]] = {
    "fluid": {"bulk_modulus": FLOAT, "density": FLOAT},
    "actuator": {"piston_area": FLOAT, "chamber_volume": FLOAT, "leakage_resistance": FLOAT,
                 "stroke_limit": FLOAT},
    "load": {"mass": FLOAT, "viscous_coeff": FLOAT, "stiffness": FLOAT},
    "valve": {"flow_gain": FLOAT, "flow_pressure_coeff": FLOAT, "leakage_coeff": FLOAT,
              "discharge_coeff": FLOAT, "max_area": FLOAT, "spool_limit": FLOAT},
    "relief": {"cracking_pressure": FLOAT, "override_gradient": FLOAT},
    "pump": {"supply_flow": FLOAT},
    "circuit": {"spool_time_constant": FLOAT, "pfcv_flow_law": STR},
    "duty": {"duration": FLOAT, "setpoint": POINTS, "load": POINTS},
    "controller": {
        "kp": FLOAT, "ki": FLOAT, "kd": FLOAT, "gain_spread": FLOAT,
        "kp_range": RANGE, "ki_range": RANGE, "kd_range": RANGE,
        "error_range": FLOAT, "error_rate_range": FLOAT, "fuzzy": BOOL,
        "integral_limit": FLOAT, "derivative_filter": FLOAT,
        "rules": {"kp": TABLE, "ki": TABLE, "kd": TABLE},
    },
    "sim": {"dt": FLOAT, "log_decimation": INT, "integrator": STR},
    "output": {"directory": STR},
}

# keys where inf is meaningful (no limit / perfect seal)
_INFINITE_OK = {"controller.integral_limit", "actuator.leakage_resistance"}

# dataclass field -> config key, where they differ
_RENAMED = {
    "duty": {"setpoint_points": "setpoint", "load_points": "load"},
}


def default_scenario_text() -> str:
    return resources.files("hydrosim").joinpath("data/default_scenario.toml").read_text(encoding="utf-8")


def _loads(text: str) -> dict:
    try:
        return tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        line = getattr(exc, "lineno", None)
        col = getattr(exc, "colno", None)
        msg = getattr(exc, "msg", None) or str(exc)
        raise ConfigSyntaxError(f"TOML syntax error: {msg}", line, col) from None


def _check_value(key: str, kind: str, value: Any) -> Any:
    def bad(expected: str):
        return InvariantError(key, f"expected {expected}, got {value!r}")

    if kind == FLOAT:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise bad("a number")
        value = float(value)
        if math.isnan(value) or (math.isinf(value) and key not in _INFINITE_OK):
            raise bad("a finite number")
        return value
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise bad("an integer")
        return value
    if kind == STR:
        if not isinstance(value, str):
            raise bad("a string")
        return value
    if kind == BOOL:
        if not isinstance(value, bool):
            raise bad("true or false")
        return value
    if kind == POINTS:
        if not isinstance(value, list) or not value:
            raise bad("a non-empty list of [time, value] pairs")
        out = []
        for pair in value:
            if (not isinstance(pair, list) or len(pair) != 2
                    or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in pair)):
                raise bad("a non-empty list of [time, value] pairs")
            out.append([float(pair[0]), float(pair[1])])
        return out
    if kind == RANGE:
        if (not isinstance(value, list) or len(value) != 2
                or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in value)):
            raise bad("[min, max]")
        return [float(value[0]), float(value[1])]
    if kind == TABLE:
        if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
            raise bad("a 5x5 array of consequent labels")
        return [list(r) for r in value]
    raise AssertionError(kind)


def _validate_tree(doc: dict, schema: dict, prefix: str = "") -> dict:
    out = {}
    for key, value in doc.items():
        dotted = f"{prefix}{key}"
        if key not in schema:
            raise UnknownKeyError(dotted)
        expected = schema[key]
        if isinstance(expected, dict):
            if not isinstance(value, dict):
                raise InvariantError(dotted, "expected a table")
            out[key] = _validate_tree(value, expected, dotted + ".")
        else:
            out[key] = _check_value(dotted, expected, value)
    return out


def _merge(base: dict, over: dict) -> dict:
    out = dict(base)
    for key, value in over.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def _build(section: str, cls, values: dict, **extra):
    renamed = _RENAMED.get(section, {})
    kwargs = {f: values[renamed.get(f, f)] for f in cls.__dataclass_fields__ if renamed.get(f, f) in values}
    kwargs.update(extra)
    try:
        return cls(**kwargs)
    except DomainError as exc:
        msg = str(exc)
        if exc.field and msg.startswith(exc.field + ":"):
            msg = msg[len(exc.field) + 1:].strip()
        name = renamed.get(exc.field, exc.field) if exc.field else None
        raise InvariantError(f"{section}.{name}" if name else section, msg) from None


def canonical_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


@dataclass(frozen=True)
class ScenarioConfig:
    params: CircuitParams
    duty: DutyCycle
    controller: ControllerSettings
    sim: SimConfig
    output_dir: str
    document: dict = field(repr=False, compare=False)

    @property
    def digest(self) -> str:
        """SHA-256 of the canonical JSON form of the fully-defaulted document."""
        return hashlib.sha256(canonical_json(self.document).encode()).hexdigest()


def _controller(doc: dict) -> ControllerSettings:
    c = doc["controller"]
    base = PidGains(c["kp"], c["ki"], c["kd"])
    for name in ("kp", "ki", "kd"):
        if getattr(base, name) < 0:
            raise InvariantError(f"controller.{name}", "must be >= 0")
    spread = c["gain_spread"]
    if not 0 < spread < 1:
        raise InvariantError("controller.gain_spread", "must be in (0, 1)")
    ranges = {}
    for name, gain in zip(("kp", "ki", "kd"), base):
        lo, hi = c.get(f"{name}_range", (gain * (1 - spread), gain * (1 + spread)))
        if not 0 <= lo < hi:
            key = f"controller.{name}_range" if f"{name}_range" in c else f"controller.{name}"
            raise InvariantError(key, f"gain range must satisfy 0 <= min < max, got {(lo, hi)!r}")
        ranges[f"{name}_range"] = (lo, hi)
    for key in ("error_range", "error_rate_range"):
        if not (c[key] > 0 and math.isfinite(c[key])):
            raise InvariantError(f"controller.{key}", "must be a positive finite number")
    rules = dict(DEFAULT_RULES)
    for name, table in c.get("rules", {}).items():
        try:
            rules[name] = _check_table(name, table)
        except ConfigError as exc:
            raise InvariantError(f"controller.rules.{name}", str(exc)) from None
    tuner = FuzzyTuner(c["error_range"], c["error_rate_range"], rules=rules, **ranges)
    if not c["integral_limit"] > 0:
        raise InvariantError("controller.integral_limit", "must be > 0")
    if not (c["derivative_filter"] >= 0 and math.isfinite(c["derivative_filter"])):
        raise InvariantError("controller.derivative_filter", "must be >= 0")
    return ControllerSettings(base, tuner, c["fuzzy"], c["integral_limit"], c["derivative_filter"])


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate a scenario document (TOML text)."""
    user = _validate_tree(_loads(text), SCHEMA)
    doc = _merge(_validate_tree(_loads(default_scenario_text()), SCHEMA), user)

    parts = dict(
        fluid=_build("fluid", FluidProperties, doc["fluid"]),
        actuator=_build("actuator", ActuatorParams, doc["actuator"]),
        load=_build("load", LoadParams, doc["load"]),
        control_valve=_build("valve", ValveParams, doc["valve"]),
        relief=_build("relief", ReliefValveParams, doc["relief"]),
        pump=_build("pump", PumpParams, doc["pump"]),
    )
    params = _build("circuit", CircuitParams, doc["circuit"], **parts)
    duty = _build("duty", DutyCycle, doc["duty"])
    sim = _build("sim", SimConfig, doc["sim"])
    controller = _controller(doc)

    if sim.dt > params.spool_time_constant / 5:
        raise InvariantError("sim.dt", f"must not exceed circuit.spool_time_constant / 5 "
                                       f"({params.spool_time_constant / 5:g} s)")
    try:
        sim.steps(duty.duration)
    except DomainError as exc:
        raise InvariantError("sim.dt", str(exc)) from None
    x_max = params.actuator.stroke_limit
    for t, x in duty.setpoint_points:
        if not 0 <= x <= x_max:
            raise InvariantError("duty.setpoint", f"position {x} at t={t} outside [0, actuator.stroke_limit={x_max}]")
    if not doc["output"]["directory"]:
        raise InvariantError("output.directory", "must not be empty")

    return ScenarioConfig(params, duty, controller, sim, doc["output"]["directory"], doc)


def load_config(path: str | Path) -> ScenarioConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text)
