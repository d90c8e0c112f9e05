"""Hydraulic actuator simulator comparing a directional-valve circuit with a bypass flow-control circuit."""

__version__ = "0.1.0"
