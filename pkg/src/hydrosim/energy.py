"""Pump energy accounting and the two-circuit comparison report."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError

PHASE_KINDS = ("extension", "hold", "retraction")


def hydraulic_power(pressure: float, flow: float) -> float:
    """Hydraulic power in W for a pressure in Pa and a flow in m^3/s."""
    return pressure * flow


@dataclass(frozen=True)
class EnergyReport:
    total_energy: float  # kJ
    peak_power: float  # kW
    mean_power: float  # kW
    phases: dict[str, float] = field(default_factory=dict)  # kJ per phase kind
    duration: float = 0.0  # s

    @classmethod
    def zero(cls, duration: float = 0.0) -> "EnergyReport":
        return cls(0.0, 0.0, 0.0, {k: 0.0 for k in PHASE_KINDS}, duration)

    def to_dict(self) -> dict:
        return asdict(self)


def _trapezoid(t: np.ndarray, p: np.ndarray) -> float:
    return float(np.sum(0.5 * (p[1:] + p[:-1]) * np.diff(t)))


def _window(t: np.ndarray, p: np.ndarray, a: float, b: float) -> float:
    """Trapezoid over ``[a, b]``; ends falling between samples are interpolated linearly."""
    a, b = max(a, t[0]), min(b, t[-1])
    if b <= a:
        return 0.0
    inside = (t > a) & (t < b)
    tt = np.concatenate(([a], t[inside], [b]))
    pp = np.concatenate(([np.interp(a, t, p)], p[inside], [np.interp(b, t, p)]))
    return _trapezoid(tt, pp)


def energy_report(t: Sequence[float], power: Sequence[float],
                  phases: Sequence[tuple[str, float, float]] = ()) -> EnergyReport:
    """Integrate a sampled power signal (W) with the trapezoidal rule.

    ``phases`` are ``(kind, start, end)`` windows; their energies are summed
    per kind. Needs at least two samples with strictly increasing times.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(power, dtype=float)
    if t.ndim != 1 or t.shape != p.shape:
        raise DomainError("time and power must be 1-D arrays of equal length")
    if len(t) < 2:
        raise DomainError("energy needs at least two samples")
    if np.any(np.diff(t) <= 0):
        raise DomainError("sample times must be strictly increasing")
    if not (np.all(np.isfinite(t)) and np.all(np.isfinite(p))):
        raise DomainError("time and power must be finite")

    total = _trapezoid(t, p)
    by_kind = {k: 0.0 for k in PHASE_KINDS}
    for kind, a, b in phases:
        by_kind[kind] = by_kind.get(kind, 0.0) + _window(t, p, a, b)
    duration = float(t[-1] - t[0])
    return EnergyReport(
        total_energy=total / 1e3,
        peak_power=float(np.max(p)) / 1e3,
        mean_power=total / duration / 1e3,
        phases={k: v / 1e3 for k, v in by_kind.items()},
        duration=duration,
    )


def accumulate_energy(log, phases: Sequence[tuple[str, float, float]] | None = None) -> EnergyReport:
    """Pump energy over a simulation log, from its ``p_supply * Q_s`` power column."""
    if log is None or len(log) == 0:
        raise DomainError("cannot integrate an empty log")
    return energy_report(log.t, log.power_W, log.phases if phases is None else phases)


@dataclass(frozen=True)
class ComparisonReport:
    baseline: EnergyReport  # PDCV
    proposed: EnergyReport  # PFCV
    saving_percent: float

    def to_dict(self) -> dict:
        return {
            "baseline": self.baseline.to_dict(),
            "proposed": self.proposed.to_dict(),
            "saving_percent": self.saving_percent,
        }


def saving_percent(baseline_kj: float, proposed_kj: float) -> float:
    if not baseline_kj > 0:
        raise DomainError(f"baseline energy must be > 0, got {baseline_kj!r}", field="baseline")
    return 100.0 * (baseline_kj - proposed_kj) / baseline_kj


def compare(baseline: EnergyReport, proposed: EnergyReport) -> ComparisonReport:
    return ComparisonReport(baseline, proposed, saving_percent(baseline.total_energy, proposed.total_energy))


def render_table(report: ComparisonReport) -> str:
    """Aligned plain-text table: both systems in kJ and the saving in percent."""
    rows = [
        ("System", "Energy Consumption (kJ)"),
        ("Conventional system with PDCV", f"{report.baseline.total_energy:.3f}"),
        ("Proposed system with PFCV", f"{report.proposed.total_energy:.3f}"),
        ("Energy Saving", f"{report.saving_percent:.2f}%"),
    ]
    width = max(len(r[0]) for r in rows) + 4
    lines = [f"{a:<{width}}{b}" for a, b in rows]
    lines.insert(1, "-" * (width + len(rows[0][1])))
    return "\n".join(lines) + "\n"


def render_phase_table(report: ComparisonReport) -> str:
    lines = [f"{'Phase':<14}{'PDCV (kJ)':>12}{'PFCV (kJ)':>12}"]
    for kind in PHASE_KINDS:
        lines.append(f"{kind:<14}{report.baseline.phases.get(kind, 0.0):>12.3f}"
                     f"{report.proposed.phases.get(kind, 0.0):>12.3f}")
    return "\n".join(lines) + "\n"


def to_json(report: ComparisonReport) -> str:
    data = report.to_dict()
    data["saving_percent_rounded"] = round(report.saving_percent, 2)
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"
