"""Command-line front end: ``hydrosim {simulate,compare,calibrate,validate}``.

Exit codes: 0 success, 1 configuration error (including a zero-energy
baseline), 2 numerical blowup, 3 calibration infeasible.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import tomlkit
from scipy.optimize import brentq

from . import __version__
from .circuits import CircuitKind
from .config import ScenarioConfig, load_config, parse_config
from .energy import (
    ComparisonReport,
    EnergyReport,
    accumulate_energy,
    compare,
    render_phase_table,
    render_table,
    to_json,
)
from .engine import LOG_COLUMNS, TimeSeriesLog, run_scenario
from .errors import CalibrationInfeasible, ConfigError, DomainError, NumericalBlowup

log = logging.getLogger("hydrosim")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_INFEASIBLE = 0, 1, 2, 3


# --- running --------------------------------------------------------------

def simulate(cfg: ScenarioConfig, kind: CircuitKind) -> tuple[TimeSeriesLog, EnergyReport]:
    result = run_scenario(kind, cfg.params, cfg.duty, cfg.controller, cfg.sim)
    if len(result) < 2:
        return result, EnergyReport.zero(cfg.duty.duration)
    return result, accumulate_energy(result)


def _simulate_text(text: str, kind: str):
    # worker entry point: re-parse so nothing but plain text crosses the process boundary
    return simulate(parse_config(text), CircuitKind(kind))


def run_both(cfg: ScenarioConfig, text: str | None = None, jobs: int = 1):
    """Run PDCV then PFCV on the same scenario; returns ``{kind: (log, report)}``."""
    kinds = (CircuitKind.PDCV, CircuitKind.PFCV)
    if jobs > 1 and text is not None:
        with ProcessPoolExecutor(max_workers=min(jobs, 2)) as pool:
            futures = {k: pool.submit(_simulate_text, text, k.value) for k in kinds}
            return {k: f.result() for k, f in futures.items()}
    return {k: simulate(cfg, k) for k in kinds}


def compare_config(cfg: ScenarioConfig) -> ComparisonReport:
    runs = run_both(cfg)
    return compare(runs[CircuitKind.PDCV][1], runs[CircuitKind.PFCV][1])


# --- output ---------------------------------------------------------------

def _fmt(x: float) -> str:
    return repr(float(x))


def csv_text(result: TimeSeriesLog, digest: str) -> str:
    """Time series as CSV: a digest comment line, the header, then one row per sample."""
    lines = [f"# config_sha256={digest} circuit={result.kind.value}", ",".join(LOG_COLUMNS)]
    cols = [result.columns[c].tolist() for c in LOG_COLUMNS]
    lines.extend(",".join(map(_fmt, row)) for row in zip(*cols))
    return "\n".join(lines) + "\n"


def power_csv_text(runs, digest: str) -> str:
    pdcv, pfcv = runs[CircuitKind.PDCV][0], runs[CircuitKind.PFCV][0]
    lines = [f"# config_sha256={digest} circuit=pdcv,pfcv", "t,power_pdcv_W,power_pfcv_W"]
    for t, a, b in zip(pdcv.t.tolist(), pdcv.power_W.tolist(), pfcv.power_W.tolist()):
        lines.append(f"{_fmt(t)},{_fmt(a)},{_fmt(b)}")
    return "\n".join(lines) + "\n"


def _json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _timestamp() -> str:
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = int(epoch) if epoch is not None else int(time.time())
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


def write_outputs(out_dir: Path, files: dict[str, str], digest: str, command: str) -> Path:
    """Write ``files`` (name -> text) plus a ``manifest.json`` listing them."""
    out_dir.mkdir(parents=True, exist_ok=True)
    inventory = []
    for name in sorted(files):
        data = files[name].encode("utf-8")
        (out_dir / name).write_bytes(data)
        inventory.append({"name": name, "bytes": len(data), "sha256": hashlib.sha256(data).hexdigest()})
    manifest = {
        "tool": "hydrosim",
        "version": __version__,
        "command": command,
        "config_sha256": digest,
        "timestamp": _timestamp(),
        "files": inventory,
    }
    path = out_dir / "manifest.json"
    path.write_bytes(_json(manifest).encode("utf-8"))
    return path


# --- commands -------------------------------------------------------------

def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(f"ok {cfg.digest}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    kind = CircuitKind(args.circuit)
    result, report = simulate(cfg, kind)
    files = {
        f"{kind.value}.csv": csv_text(result, cfg.digest),
        f"{kind.value}_energy.json": _json(report.to_dict()),
    }
    write_outputs(Path(args.out or cfg.output_dir), files, cfg.digest, "simulate")
    print(f"{kind.value}: {report.total_energy:.3f} kJ over {report.duration:g} s")
    return EXIT_OK


def cmd_compare(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    runs = run_both(cfg, text, args.jobs)
    report = compare(runs[CircuitKind.PDCV][1], runs[CircuitKind.PFCV][1])
    table = render_table(report)
    files = {
        "pdcv.csv": csv_text(runs[CircuitKind.PDCV][0], cfg.digest),
        "pfcv.csv": csv_text(runs[CircuitKind.PFCV][0], cfg.digest),
        "power_comparison.csv": power_csv_text(runs, cfg.digest),
        "comparison.txt": table + "\n" + render_phase_table(report),
        "comparison.json": to_json(report),
    }
    write_outputs(Path(args.out or cfg.output_dir), files, cfg.digest, "compare")
    print(table, end="")
    return EXIT_OK


def _peak_load_pressure(cfg: ScenarioConfig) -> float:
    """Highest static holding pressure the duty cycle asks for."""
    x_peak = max(x for _, x in cfg.duty.setpoint_points)
    f_peak = max(f for _, f in cfg.duty.load_points)
    return (f_peak + cfg.params.load.stiffness * x_peak) / cfg.params.actuator.piston_area


def _with(cfg: ScenarioConfig, cracking: float, supply: float) -> ScenarioConfig:
    p = cfg.params
    params = replace(p, relief=replace(p.relief, cracking_pressure=cracking),
                     pump=replace(p.pump, supply_flow=supply))
    return replace(cfg, params=params)


def calibrate(cfg: ScenarioConfig, target: float, relief_range: tuple[float, float],
              supply_multipliers=(1.0,), tolerance: float = 1.0):
    """Find a relief cracking pressure (and supply flow) whose saving is ``target`` percent.

    For each supply multiplier in turn the saving is bracketed over
    ``relief_range`` and solved with Brent's method. Returns
    ``(cracking_pressure, supply_flow, multiplier, saving)`` for the first hit within
    ``tolerance`` percentage points; raises :class:`CalibrationInfeasible`.
    """
    lo, hi = relief_range
    base_supply = cfg.params.pump.supply_flow
    tried = []
    for m in supply_multipliers:
        supply = base_supply * m

        def miss(p, supply=supply):
            try:
                return compare_config(_with(cfg, p, supply)).saving_percent - target
            except (NumericalBlowup, DomainError):
                return float("nan")

        f_lo, f_hi = miss(lo), miss(hi)
        log.info("supply x%g: saving %.3f%% .. %.3f%%", m, f_lo + target, f_hi + target)
        tried.append((m, f_lo + target, f_hi + target))
        # (|miss|, cracking, saving) for every point we know the saving at
        candidates = [(abs(f), p, f + target) for f, p in ((f_lo, lo), (f_hi, hi))]
        if f_lo * f_hi < 0:
            p = brentq(miss, lo, hi, xtol=1.0, rtol=1e-10, maxiter=60)
            f = miss(p)
            candidates.append((abs(f), p, f + target))
        hits = [c for c in candidates if c[0] <= tolerance]
        if hits:
            _, p, saving = min(hits)
            return p, supply, m, saving
    detail = "; ".join(f"supply x{m:g}: {a:.2f}%..{b:.2f}%" for m, a, b in tried)
    raise CalibrationInfeasible(
        f"no relief setting in [{lo:g}, {hi:g}] Pa reaches {target}% +/- {tolerance} ({detail})")


def annotated_config(text: str, cracking: float, supply: float, multiplier: float,
                     target: float, saving: float) -> str:
    """Copy of ``text`` with the calibrated values written in; existing comments are kept."""
    doc = tomlkit.parse(text)
    notes = (
        ("relief", "cracking_pressure", cracking, f"calibrated to a {target:g}% saving, compare gives {saving:.2f}%"),
        ("pump", "supply_flow", supply, f"calibration supply multiplier x{multiplier:g}"),
    )
    for section, key, value, note in notes:
        if section not in doc:
            doc[section] = tomlkit.table()
        old = doc[section].get(key)
        previous = old.trivia.comment.lstrip("#").strip() if hasattr(old, "trivia") else ""
        item = tomlkit.item(float(value))
        item.comment(f"{previous}; {note}" if previous else note)
        doc[section][key] = item
    return tomlkit.dumps(doc)


def cmd_calibrate(args) -> int:
    text = Path(args.config).read_text(encoding="utf-8")
    cfg = parse_config(text)
    if not 0 < args.target < 50:
        raise ConfigError(f"--target must be in (0, 50), got {args.target}")
    if args.relief_range:
        box = tuple(args.relief_range)
    else:
        p_peak = _peak_load_pressure(cfg)
        box = (0.9 * p_peak, 1.5 * p_peak)
    if not 0 < box[0] < box[1]:
        raise ConfigError(f"--relief-range must satisfy 0 < low < high, got {box}")
    cracking, supply, multiplier, saving = calibrate(cfg, args.target, box, args.supply_multipliers)
    out = annotated_config(text, cracking, supply, multiplier, args.target, saving)
    parse_config(out)  # never emit a file we would reject
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_bytes(out.encode("utf-8"))
    print(f"cracking_pressure = {cracking:.6g} Pa, supply_flow = {supply:.6g} m^3/s, saving = {saving:.2f}%")
    return EXIT_OK


# --- entry point ----------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hydrosim", description="Hydraulic actuator circuit simulator.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one circuit and write its time series")
    p.add_argument("--config", required=True)
    p.add_argument("--circuit", required=True, choices=[k.value for k in CircuitKind])
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="run both circuits and write the energy comparison")
    p.add_argument("--config", required=True)
    p.add_argument("--out", help="output directory (default: output.directory)")
    p.add_argument("--jobs", type=int, default=1, help="run the two circuits in parallel when > 1")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("calibrate", help="fit the relief setting to a target saving")
    p.add_argument("--config", required=True)
    p.add_argument("--target", required=True, type=float, help="saving in percent, in (0, 50)")
    p.add_argument("--out", required=True, help="path of the calibrated config to write")
    p.add_argument("--relief-range", nargs=2, type=float, metavar=("LOW", "HIGH"),
                   help="cracking pressure search box in Pa (default 0.9x..1.5x peak load pressure)")
    p.add_argument("--supply-multipliers", nargs="+", type=float, default=[1.0, 1.25, 0.8],
                   help="pump flow multipliers tried in order")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("validate", help="parse and check a config without running it")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalBlowup as exc:
        print(f"numerical blowup: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CalibrationInfeasible as exc:
        print(f"calibration infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
