"""Fixed-step closed-loop simulation of a circuit over a duty cycle."""

from __future__ import annotations

import bisect
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .circuits import (
    CircuitKind,
    CircuitParams,
    CircuitState,
    DERIVATIVES,
    command_to_valve,
    enforce_limits,
    equilibrium_state,
)
from .control import ControllerSettings, PidState
from .errors import DomainError, NumericalBlowup

INTEGRATORS = ("rk4", "semi_implicit_euler")

LOG_COLUMNS = (
    "t", "X", "v", "P1", "P2", "x_v", "setpoint", "u",
    "Q_s", "Q1", "Q2", "Q_bypass", "p_supply", "power_W", "energy_J",
)


@dataclass(frozen=True)
class DutyCycle:
    """Piecewise-linear setpoint and piecewise-constant load over ``[0, duration]``.

    Both profiles are lists of ``(time, value)`` breakpoints starting at
    ``t = 0``. The setpoint is held flat after its last breakpoint; a load
    breakpoint applies from its time until the next one.
    """

    setpoint_points: tuple[tuple[float, float], ...]
    load_points: tuple[tuple[float, float], ...]
    duration: float

    def __post_init__(self):
        for name in ("setpoint_points", "load_points"):
            pts = tuple((float(t), float(x)) for t, x in getattr(self, name))
            if not pts:
                raise DomainError(f"{name}: at least one breakpoint required", field=name)
            if pts[0][0] != 0.0:
                raise DomainError(f"{name}: first breakpoint must be at t = 0", field=name)
            times = [t for t, _ in pts]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise DomainError(f"{name}: breakpoint times must be strictly increasing", field=name)
            if not all(math.isfinite(x) for _, x in pts):
                raise DomainError(f"{name}: values must be finite", field=name)
            object.__setattr__(self, name, pts)
        if not (self.duration >= 0 and math.isfinite(self.duration)):
            raise DomainError("duration: must be >= 0", field="duration")
        object.__setattr__(self, "_sp_t", [t for t, _ in self.setpoint_points])
        object.__setattr__(self, "_ld_t", [t for t, _ in self.load_points])

    def setpoint(self, t: float) -> float:
        pts = self.setpoint_points
        i = bisect.bisect_right(self._sp_t, t) - 1
        if i >= len(pts) - 1:
            return pts[-1][1]
        (t0, x0), (t1, x1) = pts[i], pts[i + 1]
        return x0 + (x1 - x0) * (t - t0) / (t1 - t0)

    def load(self, t: float) -> float:
        return self.load_points[bisect.bisect_right(self._ld_t, t) - 1][1]

    def phases(self) -> list[tuple[str, float, float]]:
        """``(kind, start, end)`` with kind in extension/hold/retraction, merged and clipped to the run."""
        edges = [t for t in self._sp_t if t < self.duration] + [self.duration]
        out: list[tuple[str, float, float]] = []
        for a, b in zip(edges, edges[1:]):
            x0, x1 = self.setpoint(a), self.setpoint(b)
            kind = "extension" if x1 > x0 else "retraction" if x1 < x0 else "hold"
            if out and out[-1][0] == kind:
                out[-1] = (kind, out[-1][1], b)
            else:
                out.append((kind, a, b))
        return out

    def plateaus(self) -> list[tuple[float, float, float]]:
        """``(start, end, value)`` for every flat stretch of the setpoint."""
        return [(a, b, self.setpoint(a)) for kind, a, b in self.phases() if kind == "hold"]


@dataclass(frozen=True)
class SimConfig:
    dt: float = 1e-3
    log_decimation: int = 1
    integrator: str = "rk4"

    def __post_init__(self):
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise DomainError("dt: must be > 0", field="dt")
        if not (isinstance(self.log_decimation, int) and self.log_decimation >= 1):
            raise DomainError("log_decimation: must be an integer >= 1", field="log_decimation")
        if self.integrator not in INTEGRATORS:
            raise DomainError(f"integrator: must be one of {INTEGRATORS}", field="integrator")

    def steps(self, duration: float) -> int:
        n = round(duration / self.dt)
        if abs(n * self.dt - duration) > 1e-9 * max(duration, self.dt):
            raise DomainError(f"dt: duration {duration} is not a whole number of steps of {self.dt}", field="dt")
        return n


@dataclass
class TimeSeriesLog:
    """Uniformly sampled trajectory; one numpy column per entry of :data:`LOG_COLUMNS`."""

    kind: CircuitKind
    columns: dict[str, np.ndarray]
    phases: list[tuple[str, float, float]] = field(default_factory=list)

    def __getattr__(self, name):
        try:
            return self.__dict__["columns"][name]
        except KeyError:
            raise AttributeError(name) from None

    def __len__(self) -> int:
        return len(self.columns["t"])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self.columns[c] for c in LOG_COLUMNS])


def rk4_step(rhs: Callable[[Sequence[float]], Sequence[float]], y: Sequence[float], dt: float,
             k1: Sequence[float] | None = None, t: float = 0.0) -> tuple[float, ...]:
    """Classical fourth-order Runge-Kutta step for an autonomous ``rhs``.

    ``k1`` may be passed when the caller already evaluated ``rhs(y)``.
    Raises :class:`NumericalBlowup` if the result is not finite or an
    evaluation overflows.
    """
    if not dt > 0:
        raise DomainError("dt must be > 0", field="dt")
    h2 = 0.5 * dt
    try:
        if k1 is None:
            k1 = rhs(y)
        k2 = rhs([a + h2 * k for a, k in zip(y, k1)])
        k3 = rhs([a + h2 * k for a, k in zip(y, k2)])
        k4 = rhs([a + dt * k for a, k in zip(y, k3)])
        h6 = dt / 6.0
        out = tuple(a + h6 * (p + 2.0 * q + 2.0 * r + s) for a, p, q, r, s in zip(y, k1, k2, k3, k4))
        finite = math.isfinite(math.fsum(abs(x) for x in out))
    except OverflowError:
        raise NumericalBlowup(t + dt, y) from None
    if not finite:
        raise NumericalBlowup(t + dt, out)
    return out


def semi_implicit_euler_step(rhs, y, dt, k1=None, t: float = 0.0, position: int = 0, velocity: int = 1):
    """Symplectic Euler: explicit for everything, then position from the updated velocity."""
    if not dt > 0:
        raise DomainError("dt must be > 0", field="dt")
    try:
        if k1 is None:
            k1 = rhs(y)
        out = [a + dt * k for a, k in zip(y, k1)]
        out[position] = y[position] + dt * out[velocity]
        finite = math.isfinite(math.fsum(abs(x) for x in out))
    except OverflowError:
        raise NumericalBlowup(t + dt, y) from None
    if not finite:
        raise NumericalBlowup(t + dt, out)
    return tuple(out)


_STEPPERS = {"rk4": rk4_step, "semi_implicit_euler": semi_implicit_euler_step}


def _bumpless_integral(controller: ControllerSettings, command: float) -> float:
    ki = controller.gains(0.0, 0.0).ki
    if ki <= 0.0:
        return 0.0
    integral = command / ki
    return min(max(integral, -controller.integral_limit), controller.integral_limit)


def run_scenario(
    kind: CircuitKind,
    params: CircuitParams,
    duty: DutyCycle,
    controller: ControllerSettings,
    sim: SimConfig,
    initial_state: CircuitState | None = None,
    open_loop: Callable[[float], float] | None = None,
) -> TimeSeriesLog:
    """Integrate one circuit under closed-loop control and return the log.

    By default the run starts from a static hold at the initial setpoint
    with the controller integrator preset to the holding command. Passing
    ``open_loop`` replaces the controller with a valve command ``u(t)``.
    """
    kind = CircuitKind(kind)
    if sim.dt > params.spool_time_constant / 5.0:
        raise DomainError("dt: must not exceed spool_time_constant / 5", field="dt")
    x_max = params.actuator.stroke_limit
    for _, x in duty.setpoint_points:
        if not 0.0 <= x <= x_max:
            raise DomainError(f"setpoint {x} outside [0, {x_max}]", field="setpoint_points")

    n_steps = sim.steps(duty.duration)
    dt = sim.dt
    deriv = DERIVATIVES[kind]
    step = _STEPPERS[sim.integrator]

    if initial_state is None:
        state, command0 = equilibrium_state(kind, params, duty.setpoint(0.0), duty.load(0.0))
        pid = PidState(integral=_bumpless_integral(controller, command0))
    else:
        state = CircuitState(*initial_state)
        pid = PidState()
    state = tuple(state)

    rows: list[tuple[float, ...]] = []
    energy = 0.0
    power_prev = 0.0
    e_prev = None
    for n in itertools.count():
        t = n * dt
        sp = duty.setpoint(t)
        force = duty.load(t)
        if open_loop is not None:
            u = open_loop(t)
        else:
            e = sp - state[0]
            rate = 0.0 if e_prev is None else (e - e_prev) / dt
            e_prev = e
            c, pid = controller.step(controller.gains(e, rate), pid, e, dt)
            u = command_to_valve(kind, c)

        rates, flows = deriv(state, u, params, force)
        power = flows.supply_pressure * flows.pump_flow
        if n:
            energy += 0.5 * (power_prev + power) * dt
        power_prev = power
        if n % sim.log_decimation == 0:
            rows.append((t, *state, sp, u, flows.pump_flow, flows.to_actuator, flows.from_actuator,
                         flows.bypass_flow, flows.supply_pressure, power, energy))
        if n >= n_steps:
            break
        state = step(lambda y: deriv(y, u, params, force)[0], state, dt, k1=rates, t=t)
        state = enforce_limits(state, params, kind)

    data = np.array(rows, dtype=float).reshape(-1, len(LOG_COLUMNS))
    columns = {name: data[:, i].copy() for i, name in enumerate(LOG_COLUMNS)}
    return TimeSeriesLog(kind, columns, duty.phases())


def max_pairwise_deviation(runs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Largest ``|x_i - x_j|`` between any two ``(t, x)`` runs on the grid of the first."""
    grid = runs[0][0]
    resampled = [np.interp(grid, t, x) for t, x in runs]
    worst = 0.0
    for a, b in itertools.combinations(resampled, 2):
        worst = max(worst, float(np.max(np.abs(a - b))))
    return worst


def convergence_check(
    kind: CircuitKind,
    params: CircuitParams,
    duty: DutyCycle,
    controller: ControllerSettings,
    dt_list: Sequence[float],
    integrator: str = "rk4",
) -> float:
    """Max position deviation (m) between runs at each step size in ``dt_list``."""
    if list(dt_list) != sorted(dt_list, reverse=True):
        raise DomainError("dt_list must be sorted in descending order", field="dt_list")
    runs = []
    for dt in dt_list:
        log = run_scenario(kind, params, duty, controller, SimConfig(dt, 1, integrator))
        runs.append((log.t, log.X))
    return max_pairwise_deviation(runs)
