"""Plant models for the two valve topologies.

State vector order is ``(X, v, P1, P2, x_v)`` everywhere. Both derivative
functions return ``(rates, flows)`` where ``rates`` is a tuple in state order
and ``flows`` is a :class:`FlowBreakdown` evaluated at the given state.

PDCV: a 4/3 proportional directional valve meters flow into the cylinder;
whatever the pump delivers beyond that returns to tank over the relief
valve, so the pump works at the relief pressure.

PFCV: the directional valve is held fully open and a proportional flow
control valve bleeds the surplus pump flow from the driven chamber to tank,
so the pump works at the load pressure. The return side is at atmosphere.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

from .errors import DomainError
from .physics import (
    ActuatorParams,
    FluidProperties,
    LoadParams,
    PumpParams,
    ReliefValveParams,
    ValveParams,
    chamber_pressure_rate,
    internal_leakage,
    linear_valve_flow,
    load_acceleration,
    load_pressure,
    orifice_flow,
    relief_valve_flow,
)


class CircuitKind(str, enum.Enum):
    PDCV = "pdcv"
    PFCV = "pfcv"


class CircuitState(NamedTuple):
    X: float  # m
    v: float  # m/s
    P1: float  # Pa, bore side (driven chamber)
    P2: float  # Pa, rod side; fixed at 0 for PFCV
    x_v: float  # m, spool travel


class FlowBreakdown(NamedTuple):
    pump_flow: float
    to_actuator: float  # Q1
    from_actuator: float  # Q2
    bypass_flow: float  # Q0 through the PFCV, or relief flow for PDCV
    supply_pressure: float  # pump outlet pressure
    relief_flow: float
    load_flow: float  # signed Q_L (PDCV) or chamber inflow Q2 (PFCV)


FLOW_LAWS = ("orifice", "linear")


@dataclass(frozen=True)
class CircuitParams:
    fluid: FluidProperties
    actuator: ActuatorParams
    load: LoadParams
    control_valve: ValveParams
    relief: ReliefValveParams
    pump: PumpParams
    spool_time_constant: float = 0.01  # s
    pfcv_flow_law: str = "orifice"

    def __post_init__(self):
        if not self.spool_time_constant > 0:
            raise DomainError("spool_time_constant: must be > 0", field="spool_time_constant")
        if self.pfcv_flow_law not in FLOW_LAWS:
            raise DomainError(f"pfcv_flow_law: must be one of {FLOW_LAWS}", field="pfcv_flow_law")


def _spool_rate(u: float, x_v: float, params: CircuitParams) -> float:
    return (u * params.control_valve.spool_limit - x_v) / params.spool_time_constant


def pdcv_derivatives(state: Sequence[float], u: float, params: CircuitParams, load_force_offset: float = 0.0):
    """Right-hand side of the PDCV circuit.

    The load pressure is the integrated quantity; chamber pressures move
    symmetrically about the mid level so that ``P1 - P2 = P_L`` and
    ``dP1/dt = -dP2/dt = dP_L/dt / 2``. Valve flow beyond the pump delivery
    is impossible, so the load flow saturates at ``Q_s``.
    """
    X, v, P1, P2, x_v = state
    act, valve, pump = params.actuator, params.control_valve, params.pump

    p_load = load_pressure(P1, P2)
    q_valve = linear_valve_flow(valve.flow_gain, x_v, valve.flow_pressure_coeff, p_load)
    q_load = math.copysign(min(abs(q_valve), pump.supply_flow), q_valve)
    leak = internal_leakage(P1, P2, act.leakage_resistance)

    # V/(2*beta) * dP_L/dt = Q_L - A*v - P_L/R_lkg
    dp_load = chamber_pressure_rate(q_load - act.piston_area * v - leak, act.chamber_volume / 2.0,
                                    params.fluid.bulk_modulus)
    dv = load_acceleration(p_load, act.piston_area, params.load.mass, params.load.viscous_coeff, v,
                           params.load.stiffness, X) - load_force_offset / params.load.mass
    rates = (v, dv, 0.5 * dp_load, -0.5 * dp_load, _spool_rate(u, x_v, params))

    to_act = abs(q_load)
    q_relief = pump.supply_flow - to_act
    if q_relief > 0.0:
        p_supply = params.relief.pressure_at(q_relief)
    else:
        p_inlet = P1 if q_load >= 0.0 else P2
        p_supply = min(max(p_inlet, 0.0), params.relief.cracking_pressure)
    flows = FlowBreakdown(pump.supply_flow, to_act, to_act, q_relief, p_supply, q_relief, q_load)
    return rates, flows


def bypass_flow(x_v: float, p1: float, params: CircuitParams) -> float:
    """Flow through the PFCV from the driven chamber to tank."""
    valve = params.control_valve
    if params.pfcv_flow_law == "linear":
        return linear_valve_flow(valve.flow_gain, x_v, valve.leakage_coeff, p1)
    return orifice_flow(valve.discharge_coeff, valve.opening_area(x_v), p1, params.fluid.density)


def pfcv_derivatives(state: Sequence[float], u: float, params: CircuitParams, load_force_offset: float = 0.0):
    """Right-hand side of the PFCV circuit.

    Pump flow not taken by the relief valve (``Q1``) splits into the bypass
    (``Q0``) and the cylinder (``Q2 = Q1 - Q0``).
    """
    X, v, P1, _P2, x_v = state
    act, pump = params.actuator, params.pump

    q_relief = relief_valve_flow(P1, params.relief)
    q1 = pump.supply_flow - q_relief
    q0 = bypass_flow(x_v, P1, params)
    q2 = q1 - q0
    leak = internal_leakage(P1, 0.0, act.leakage_resistance)

    dp1 = chamber_pressure_rate(q2 - act.piston_area * v - leak, act.chamber_volume, params.fluid.bulk_modulus)
    dv = load_acceleration(P1, act.piston_area, params.load.mass, params.load.viscous_coeff, v,
                           params.load.stiffness, X) - load_force_offset / params.load.mass
    rates = (v, dv, dp1, 0.0, _spool_rate(u, x_v, params))
    flows = FlowBreakdown(pump.supply_flow, q1, q2, q0, max(P1, 0.0), q_relief, q2)
    return rates, flows


DERIVATIVES = {CircuitKind.PDCV: pdcv_derivatives, CircuitKind.PFCV: pfcv_derivatives}


def derivatives(kind: CircuitKind, state, u, params, load_force_offset=0.0):
    return DERIVATIVES[CircuitKind(kind)](state, u, params, load_force_offset)


def command_to_valve(kind: CircuitKind, command: float) -> float:
    """Map a position-controller output in [-1, 1] (positive extends) to a valve command.

    The PDCV spool follows the command directly. The PFCV is a bypass, so
    extending means closing it: -1 is fully open, +1 fully closed.
    """
    if kind is CircuitKind.PDCV:
        return command
    return 0.5 * (1.0 - command)


def valve_to_command(kind: CircuitKind, u: float) -> float:
    if kind is CircuitKind.PDCV:
        return u
    return 1.0 - 2.0 * u


def enforce_limits(state: Sequence[float], params: CircuitParams, kind: CircuitKind | None = None) -> CircuitState:
    """Apply end stops, the cavitation floor and the spool travel limit.

    For the PDCV only the load pressure ``P1 - P2`` is dynamic, so the
    chambers are re-split about ``max(p_crack / 2, |P_L| / 2)``: the low side
    floors at 0 and the load pressure itself is never altered by the clamp.
    Without ``kind`` each pressure is clamped on its own.
    """
    X, v, P1, P2, x_v = state
    x_max = params.actuator.stroke_limit
    if X <= 0.0:
        X = 0.0
        if v < 0.0:
            v = 0.0
    elif X >= x_max:
        X = x_max
        if v > 0.0:
            v = 0.0
    if kind is CircuitKind.PDCV:
        p_load = P1 - P2
        p_mid = max(0.5 * params.relief.cracking_pressure, 0.5 * abs(p_load))
        P1, P2 = p_mid + 0.5 * p_load, p_mid - 0.5 * p_load
    if P1 < 0.0:
        P1 = 0.0
    if P2 < 0.0:
        P2 = 0.0
    xv_max = params.control_valve.spool_limit
    if x_v > xv_max:
        x_v = xv_max
    elif x_v < -xv_max:
        x_v = -xv_max
    return CircuitState(X, v, P1, P2, x_v)


def equilibrium_state(kind: CircuitKind, params: CircuitParams, position: float,
                      load_force_offset: float = 0.0) -> tuple[CircuitState, float]:
    """Static hold at ``position``: returns the state and the matching controller output.

    The spool opening is clipped to its travel, in which case the returned
    state is the closest achievable one rather than a true equilibrium.
    """
    kind = CircuitKind(kind)
    act, valve, load = params.actuator, params.control_valve, params.load
    p_hold = max((load_force_offset + load.stiffness * position) / act.piston_area, 0.0)
    xv_max = valve.spool_limit

    if kind is CircuitKind.PDCV:
        q_leak = p_hold / act.leakage_resistance
        x_v = (q_leak + valve.flow_pressure_coeff * p_hold) / valve.flow_gain
        x_v = min(max(x_v, -xv_max), xv_max)
        p_mid = max(0.5 * params.relief.cracking_pressure, 0.5 * p_hold)
        state = CircuitState(position, 0.0, p_mid + 0.5 * p_hold, p_mid - 0.5 * p_hold, x_v)
        return state, valve_to_command(kind, x_v / xv_max)

    q1 = params.pump.supply_flow - relief_valve_flow(p_hold, params.relief)
    q0 = q1 - p_hold / act.leakage_resistance
    if params.pfcv_flow_law == "linear":
        x_v = (q0 + valve.leakage_coeff * p_hold) / valve.flow_gain
    elif p_hold > 0.0:
        area = q0 / (valve.discharge_coeff * math.sqrt(2.0 * p_hold / params.fluid.density))
        x_v = area / valve.max_area * xv_max
    else:
        x_v = xv_max
    x_v = min(max(x_v, 0.0), xv_max)
    state = CircuitState(position, 0.0, p_hold, 0.0, x_v)
    return state, valve_to_command(kind, x_v / xv_max)


def linearize_bypass(valve: ValveParams, fluid: FluidProperties, pressure: float) -> tuple[float, float]:
    """Coefficients ``(K_q, K_L)`` of the linear bypass law fitted at ``pressure``.

    The orifice flow is proportional to spool opening, so matching both the
    flow and its spool sensitivity at the operating point leaves no pressure
    term: ``K_L`` comes out as zero and the fit is exact along the spool axis.
    """
    if not pressure > 0:
        raise DomainError("pressure: linearization point must be > 0", field="pressure")
    k_q = valve.discharge_coeff * valve.max_area / valve.spool_limit * math.sqrt(2.0 * pressure / fluid.density)
    return k_q, 0.0
