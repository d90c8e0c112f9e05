"""Component-level hydraulic relations.

Every function here is pure and works on SI scalars. The circuit models in
:mod:`hydrosim.circuits` are assembled from these terms only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError


def _require(ok: bool, field: str, message: str) -> None:
    if not ok:
        raise DomainError(f"{field}: {message}", field=field)


def _finite(**values: float) -> None:
    for name, value in values.items():
        if not math.isfinite(value):
            raise DomainError(f"{name} must be finite, got {value!r}", field=name)


@dataclass(frozen=True)
class FluidProperties:
    bulk_modulus: float  # Pa
    density: float  # kg/m^3

    def __post_init__(self):
        _require(self.bulk_modulus > 0, "bulk_modulus", "must be > 0")
        _require(self.density > 0, "density", "must be > 0")


@dataclass(frozen=True)
class ActuatorParams:
    piston_area: float  # m^2, same on both sides of the piston
    chamber_volume: float  # m^3
    leakage_resistance: float  # Pa.s/m^3; inf means a perfect seal
    stroke_limit: float  # m

    def __post_init__(self):
        _require(self.piston_area > 0, "piston_area", "must be > 0")
        _require(self.chamber_volume > 0, "chamber_volume", "must be > 0")
        _require(self.leakage_resistance > 0, "leakage_resistance", "must be > 0")
        _require(self.stroke_limit > 0, "stroke_limit", "must be > 0")


@dataclass(frozen=True)
class LoadParams:
    mass: float  # kg
    viscous_coeff: float  # N.s/m
    stiffness: float  # N/m

    def __post_init__(self):
        _require(self.mass > 0, "mass", "must be > 0")
        _require(self.viscous_coeff >= 0, "viscous_coeff", "must be >= 0")
        _require(self.stiffness >= 0, "stiffness", "must be >= 0")


@dataclass(frozen=True)
class ValveParams:
    flow_gain: float  # K_q, (m^3/s)/m
    flow_pressure_coeff: float  # K_c, (m^3/s)/Pa
    leakage_coeff: float  # K_L, (m^3/s)/Pa
    discharge_coeff: float  # C_d
    max_area: float  # m^2, orifice area at full spool stroke
    spool_limit: float  # m

    def __post_init__(self):
        _require(self.flow_gain > 0, "flow_gain", "must be > 0")
        _require(self.flow_pressure_coeff >= 0, "flow_pressure_coeff", "must be >= 0")
        _require(self.leakage_coeff >= 0, "leakage_coeff", "must be >= 0")
        _require(0 < self.discharge_coeff <= 1, "discharge_coeff", "must be in (0, 1]")
        _require(self.max_area > 0, "max_area", "must be > 0")
        _require(self.spool_limit > 0, "spool_limit", "must be > 0")

    def opening_area(self, x_v: float) -> float:
        """Orifice area for spool travel ``x_v`` (linear port, closed at 0)."""
        return self.max_area * min(max(x_v, 0.0), self.spool_limit) / self.spool_limit


@dataclass(frozen=True)
class ReliefValveParams:
    cracking_pressure: float  # Pa
    override_gradient: float  # (m^3/s)/Pa above cracking

    def __post_init__(self):
        _require(self.cracking_pressure > 0, "cracking_pressure", "must be > 0")
        _require(self.override_gradient > 0, "override_gradient", "must be > 0")

    def pressure_at(self, flow: float) -> float:
        """Inverse characteristic: inlet pressure while passing ``flow`` > 0."""
        return self.cracking_pressure + flow / self.override_gradient


@dataclass(frozen=True)
class PumpParams:
    supply_flow: float  # m^3/s, fixed displacement at constant speed

    def __post_init__(self):
        _require(self.supply_flow > 0, "supply_flow", "must be > 0")


def orifice_flow(discharge_coeff: float, area: float, delta_p: float, density: float) -> float:
    """Turbulent orifice flow, signed with the pressure drop."""
    _finite(discharge_coeff=discharge_coeff, area=area, delta_p=delta_p, density=density)
    _require(0 < discharge_coeff <= 1, "discharge_coeff", "must be in (0, 1]")
    _require(area >= 0, "area", "must be >= 0")
    _require(density > 0, "density", "must be > 0")
    if delta_p == 0.0 or area == 0.0:
        return 0.0
    q = discharge_coeff * area * math.sqrt(2.0 * abs(delta_p) / density)
    return q if delta_p > 0 else -q


def linear_valve_flow(flow_gain: float, x_v: float, flow_pressure_coeff: float, load_pressure: float) -> float:
    """Linearized valve flow ``K_q*x_v - K_c*P_L``."""
    _finite(flow_gain=flow_gain, x_v=x_v, flow_pressure_coeff=flow_pressure_coeff, load_pressure=load_pressure)
    return flow_gain * x_v - flow_pressure_coeff * load_pressure


def chamber_pressure_rate(net_flow: float, volume: float, bulk_modulus: float) -> float:
    """Pressure build-up rate of a compressible volume fed by ``net_flow``."""
    _require(volume > 0, "volume", "must be > 0")
    _require(bulk_modulus > 0, "bulk_modulus", "must be > 0")
    return bulk_modulus * net_flow / volume


def internal_leakage(p1: float, p2: float, resistance: float) -> float:
    """Laminar cross-piston leakage from chamber 1 to chamber 2."""
    _require(resistance > 0, "leakage_resistance", "must be > 0")
    return (p1 - p2) / resistance


def load_acceleration(
    drive_pressure: float,
    area: float,
    mass: float,
    viscous_coeff: float,
    velocity: float,
    stiffness: float,
    position: float,
) -> float:
    """Newton's law for the piston and its lumped load."""
    _require(mass > 0, "mass", "must be > 0")
    return (drive_pressure * area - viscous_coeff * velocity - stiffness * position) / mass


def relief_valve_flow(pressure: float, relief: ReliefValveParams) -> float:
    """Relief flow: closed up to cracking, then a linear override slope."""
    if pressure <= relief.cracking_pressure:
        return 0.0
    return relief.override_gradient * (pressure - relief.cracking_pressure)


def load_pressure(p1: float, p2: float) -> float:
    return p1 - p2


def load_flow(q1: float, q2: float) -> float:
    return (q1 + q2) / 2.0


__all__ = [
    "FluidProperties",
    "ActuatorParams",
    "LoadParams",
    "ValveParams",
    "ReliefValveParams",
    "PumpParams",
    "orifice_flow",
    "linear_valve_flow",
    "chamber_pressure_rate",
    "internal_leakage",
    "load_acceleration",
    "relief_valve_flow",
    "load_pressure",
    "load_flow",
]
