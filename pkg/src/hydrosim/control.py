"""Fuzzy gain-scheduled PID position controller.

Two-input Mamdani tuner (error, error rate), five triangular sets per input,
min-AND, singleton consequents and centroid defuzzification. The tuned gains
feed a discrete PID with a trapezoidal integrator and conditional
anti-windup.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ConfigError, DomainError

INPUT_LABELS = ("NL", "NS", "Z", "PS", "PL")
OUTPUT_LEVELS = {"S": 0.0, "MS": 0.25, "M": 0.5, "ML": 0.75, "L": 1.0}

# rows: error NL..PL, columns: error rate NL..PL
DEFAULT_RULES = {
    # big error, or error still growing -> stiffer
    "kp": (
        ("L", "L", "ML", "ML", "M"),
        ("L", "ML", "M", "M", "MS"),
        ("ML", "M", "MS", "M", "ML"),
        ("MS", "M", "M", "ML", "L"),
        ("M", "ML", "ML", "L", "L"),
    ),
    # integrate hardest near the target, back off far from it
    "ki": (
        ("S", "S", "S", "MS", "M"),
        ("S", "MS", "M", "M", "ML"),
        ("M", "ML", "L", "ML", "M"),
        ("ML", "M", "M", "MS", "S"),
        ("M", "MS", "S", "S", "S"),
    ),
    # damp fast approaches close to the target
    "kd": (
        ("MS", "S", "S", "S", "MS"),
        ("M", "MS", "S", "MS", "M"),
        ("ML", "M", "MS", "M", "ML"),
        ("M", "MS", "S", "MS", "M"),
        ("MS", "S", "S", "S", "MS"),
    ),
}


class PidGains(NamedTuple):
    kp: float
    ki: float
    kd: float


class PidState(NamedTuple):
    integral: float = 0.0
    previous_error: float | None = None
    previous_output: float = 0.0
    derivative: float = 0.0


def membership(x: float, tri: tuple[float, float, float]) -> float:
    """Degree of ``x`` in the triangular set ``(a, b, c)``.

    A degenerate edge (``a == b`` or ``b == c``) is allowed and simply puts
    the peak on the boundary. Values beyond the boundary get 0, so callers
    that want shoulders clamp the input to the universe first.
    """
    a, b, c = tri
    if not a <= b <= c:
        raise ConfigError(f"malformed triangular set {tri!r}: need a <= b <= c")
    if x == b:
        return 1.0
    if x <= a or x >= c:
        return 0.0
    if x < b:
        return (x - a) / (b - a)
    return (c - x) / (c - b)


def triangular_partition(half_width: float) -> tuple[tuple[float, float, float], ...]:
    """Five evenly spaced sets on ``[-half_width, half_width]`` with 50 % overlap."""
    h = half_width / 2.0
    return (
        (-half_width, -half_width, -h),
        (-half_width, -h, 0.0),
        (-h, 0.0, h),
        (0.0, h, half_width),
        (h, half_width, half_width),
    )


def _check_table(name: str, table) -> tuple[tuple[str, ...], ...]:
    rows = tuple(tuple(row) for row in table)
    if len(rows) != 5 or any(len(r) != 5 for r in rows):
        raise ConfigError(f"rule table {name!r} must be 5x5")
    for row in rows:
        for label in row:
            if label not in OUTPUT_LEVELS:
                raise ConfigError(f"rule table {name!r}: unknown consequent {label!r}")
    for i in range(5):
        for j in range(5):
            if rows[i][j] != rows[4 - i][4 - j]:
                raise ConfigError(
                    f"rule table {name!r} is not symmetric under sign flip: "
                    f"({INPUT_LABELS[i]},{INPUT_LABELS[j]}) != ({INPUT_LABELS[4 - i]},{INPUT_LABELS[4 - j]})"
                )
    return rows


@dataclass(frozen=True)
class FuzzyTuner:
    error_range: float  # m, universe is [-error_range, error_range]
    rate_range: float  # m/s
    kp_range: tuple[float, float]
    ki_range: tuple[float, float]
    kd_range: tuple[float, float]
    rules: dict = field(default_factory=lambda: dict(DEFAULT_RULES))

    def __post_init__(self):
        if not (self.error_range > 0 and math.isfinite(self.error_range)):
            raise ConfigError("error_range must be a positive finite number")
        if not (self.rate_range > 0 and math.isfinite(self.rate_range)):
            raise ConfigError("rate_range must be a positive finite number")
        for name in ("kp", "ki", "kd"):
            lo, hi = getattr(self, f"{name}_range")
            if not (0 <= lo < hi):
                raise ConfigError(f"{name}_range must satisfy 0 <= min < max, got {(lo, hi)!r}")
        if set(self.rules) != {"kp", "ki", "kd"}:
            raise ConfigError("rules must define exactly kp, ki and kd tables")
        checked = {k: _check_table(k, v) for k, v in self.rules.items()}
        object.__setattr__(self, "rules", checked)
        object.__setattr__(self, "_error_sets", triangular_partition(self.error_range))
        object.__setattr__(self, "_rate_sets", triangular_partition(self.rate_range))
        levels = {k: tuple(tuple(OUTPUT_LEVELS[c] for c in row) for row in t) for k, t in checked.items()}
        object.__setattr__(self, "_levels", levels)

    @classmethod
    def around(cls, base: PidGains, spread: float = 0.5, **kwargs) -> "FuzzyTuner":
        """Tuner whose gain ranges are ``base * (1 -/+ spread)``."""
        ranges = {f"{n}_range": (g * (1.0 - spread), g * (1.0 + spread)) for n, g in zip(("kp", "ki", "kd"), base)}
        return cls(**ranges, **kwargs)


def _fuzzify(x: float, limit: float, sets) -> list[tuple[int, float]]:
    x = min(max(x, -limit), limit)
    out = []
    for i, tri in enumerate(sets):
        mu = membership(x, tri)
        if mu > 0.0:
            out.append((i, mu))
    return out


def fuzzy_tune(error: float, error_rate: float, tuner: FuzzyTuner) -> PidGains:
    """Schedule PID gains from the tracking error and its rate."""
    if not (math.isfinite(error) and math.isfinite(error_rate)):
        raise DomainError("fuzzy_tune inputs must be finite")
    mu_e = _fuzzify(error, tuner.error_range, tuner._error_sets)
    mu_r = _fuzzify(error_rate, tuner.rate_range, tuner._rate_sets)
    if not mu_e or not mu_r:
        raise ConfigError("membership sets do not cover the input universe")
    gains = []
    for name in ("kp", "ki", "kd"):
        table = tuner._levels[name]
        # sort so a sign-flipped input sums the same terms in the same order
        fired = sorted((min(a, b), table[i][j]) for i, a in mu_e for j, b in mu_r)
        num = den = 0.0
        for w, level in fired:
            num += w * level
            den += w
        lo, hi = getattr(tuner, f"{name}_range")
        gains.append(lo + (num / den) * (hi - lo))
    return PidGains(*gains)


def pid_step(
    gains: PidGains,
    state: PidState,
    error: float,
    dt: float,
    u_min: float = -1.0,
    u_max: float = 1.0,
    integral_limit: float = math.inf,
    derivative_filter: float = 0.0,
) -> tuple[float, PidState]:
    """One controller update. Returns the saturated output and the new state.

    With no error history the previous error is taken equal to the current
    one, so the first step has no derivative kick and a rectangular integral.
    The integrator is frozen while the output sits on a rail and the error
    pushes further into it.
    """
    if not dt > 0:
        raise DomainError("dt must be > 0", field="dt")
    e_prev = error if state.previous_error is None else state.previous_error

    d_raw = (error - e_prev) / dt
    if derivative_filter > 0.0:
        d = (derivative_filter * state.derivative + dt * d_raw) / (derivative_filter + dt)
    else:
        d = d_raw

    integral = state.integral + 0.5 * (error + e_prev) * dt
    integral = min(max(integral, -integral_limit), integral_limit)
    pd = gains.kp * error + gains.kd * d
    raw = pd + gains.ki * integral
    if (raw > u_max and error > 0.0) or (raw < u_min and error < 0.0):
        integral = state.integral
        raw = pd + gains.ki * integral
    u = min(max(raw, u_min), u_max)
    return u, PidState(integral, error, u, d)


@dataclass(frozen=True)
class ControllerSettings:
    """Everything the closed loop needs besides the plant."""

    base_gains: PidGains
    tuner: FuzzyTuner
    fuzzy: bool = True
    integral_limit: float = math.inf
    derivative_filter: float = 0.0
    u_min: float = -1.0
    u_max: float = 1.0

    def __post_init__(self):
        if not self.u_min < self.u_max:
            raise ConfigError("controller output limits must satisfy u_min < u_max")
        if not self.integral_limit > 0:
            raise ConfigError("integral_limit must be > 0")
        if self.derivative_filter < 0:
            raise ConfigError("derivative_filter must be >= 0")

    def gains(self, error: float, error_rate: float) -> PidGains:
        if self.fuzzy:
            return fuzzy_tune(error, error_rate, self.tuner)
        return self.base_gains

    def step(self, gains: PidGains, state: PidState, error: float, dt: float) -> tuple[float, PidState]:
        return pid_step(gains, state, error, dt, self.u_min, self.u_max, self.integral_limit,
                        self.derivative_filter)
