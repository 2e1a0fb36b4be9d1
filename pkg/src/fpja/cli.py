"""Command-line entry point: ``fpja <command> --config <path> --out <path>``.

Each command writes one data table (CSV with a ``#`` header, or JSON) and a
sidecar ``<out>.manifest.json`` holding the echoed inputs, library versions
and timing.  Data files are deterministic; everything run-dependent lives in
the manifest.
"""

from __future__ import annotations

import argparse
import json
import math
import platform
import sys
import time
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .config import DeviceConfig, load_config
from .coupled_modes import A_S, C_S, gain_summary, sweep_scattering, to_db
from .errors import ConfigError, FPJAError
from .noise import added_noise_fpja, noise_report
from .quadrature import lo_phase_response, squeezing_metrics
from .stability import characteristic_roots, performance_bounds, routh_coefficients, stability_region
from .tuning import program_device

MHZ = 2 * math.pi * 1e6
SIG_DIGITS = 12


@dataclass
class Table:
    columns: list[str]
    units: list[str]
    rows: list[list[Any]]
    summary: dict[str, Any] = field(default_factory=dict)


def fmt(x: Any) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.{SIG_DIGITS}g}"
    return str(x)


def _json_value(x: Any) -> Any:
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(f"{x:.{SIG_DIGITS}g}") if math.isfinite(x) else str(x)
    if isinstance(x, dict):
        return {k: _json_value(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_value(v) for v in x]
    return x


# -- commands ------------------------------------------------------------------

def cmd_sweep(cfg: DeviceConfig) -> Table:
    modes, pumps = cfg.mode_params(), cfg.pump_set()
    delta_mhz = cfg.grid("delta_mhz")
    res = sweep_scattering(modes, pumps, delta_mhz * MHZ)
    cols = {
        "S_ac_db": res.power_db(A_S, C_S),
        "S_ca_db": res.power_db(C_S, A_S),
        "S_aa_db": res.power_db(A_S, A_S),
        "S_cc_db": res.power_db(C_S, C_S),
    }
    rows = [[d, *(c[i] for c in cols.values()), res.singular[i]] for i, d in enumerate(delta_mhz)]
    centre = int(np.argmin(np.abs(delta_mhz)))
    return Table(
        ["delta_mhz", *cols, "singular"], ["MHz", "dB", "dB", "dB", "dB", "flag"], rows,
        {"forward_db_at_zero": cols["S_ac_db"][centre], "reverse_db_at_zero": cols["S_ca_db"][centre],
         "bandwidth_3db_mhz": res.bandwidth_3db / MHZ,
         "return_loss_band_mhz": res.return_loss_band / MHZ,
         "return_loss_db": res.return_loss_db},
    )


def cmd_quadrature(cfg: DeviceConfig) -> Table:
    modes, pumps = cfg.mode_params(), cfg.pump_set()
    gains = gain_summary(modes, pumps)
    rep = noise_report(modes, pumps, chain=cfg.chain_noise)
    resp = lo_phase_response(gains, cfg.grid("lo_phase_rad"), rep.covariance, cfg.chain_noise.photons)
    rows = [[t, g, n, nc] for t, g, n, nc in
            zip(resp.theta, resp.gain_db, resp.noise_floor, resp.noise_floor_chain)]
    sq = squeezing_metrics(gains)
    return Table(
        ["lo_phase_rad", "gain_db", "noise_floor", "noise_floor_chain"],
        ["rad", "dB", "quanta", "quanta"], rows,
        {"gain_x_db": gains.gain_x_db, "gain_y_db": gains.gain_y_db,
         "gain_s_db": gains.gain_s_db, "gain_i_db": gains.gain_i_db,
         "sqrt_gx_gy": sq.sqrt_product_signed, "ideal_squeezing_deviation": sq.ideal_squeezing_deviation},
    )


def cmd_noise(cfg: DeviceConfig) -> Table:
    modes, pumps = cfg.mode_params(), cfg.pump_set()
    rep = noise_report(modes, pumps, chain=cfg.chain_noise)
    gains = gain_summary(modes, pumps)
    bounds = performance_bounds(modes)
    values = [
        ("gain_x_db", "dB", float(to_db(rep.gain_x))),
        ("n_add_fpja", "photons", rep.n_add_fpja),
        ("n_add_fpja_formula", "photons", added_noise_fpja(gains.beta_ab_mag, sqrt_gain_x=gains.sqrt_GX)),
        ("n_chain", "photons", rep.n_chain[0]),
        ("n_add_total", "photons", rep.n_add_total),
        ("eta_meas", "1", rep.eta_meas),
        ("eta_low", "1", rep.eta_low),
        ("eta_high", "1", rep.eta_high),
        ("eta_max_bound", "1", bounds.max_eta),
    ]
    return Table(["quantity", "unit", "value"], ["", "", ""], [list(v) for v in values])


def cmd_stability(cfg: DeviceConfig) -> Table:
    modes, pumps = cfg.mode_params(), cfg.pump_set()
    ab, bc, ac, bb = pumps.magnitudes
    region = stability_region(modes, ab, cfg.grid("gain_db"), cfg.grid("loop_phase_rad"), beta_ac_mag=ac)
    rows = []
    for i, g in enumerate(region.gain_db):
        for j, phi in enumerate(region.phi_loop):
            state = "unknown" if region.unknown[i, j] else ("stable" if region.stable[i, j] else "unstable")
            rows.append([g, phi, region.beta_bb[i], state, region.margin[i, j]])
    summary = {"threshold_db": region.threshold_db, "threshold_phi0_db": region.threshold_phi0_db,
               "config_stable": characteristic_roots(modes, pumps).stable}
    try:
        summary["routh_stable_at_config"] = routh_coefficients(modes, ab, bb, pumps.phi_loop, ac, bc).stable
    except FPJAError:
        pass
    return Table(["gain_db", "phi_loop_rad", "beta_bb", "state", "margin_rad_s"],
                 ["dB", "rad", "1", "", "rad/s"], rows, summary)


def cmd_tune(cfg: DeviceConfig) -> Table:
    if cfg.targets is None:
        raise ConfigError("tune needs a 'targets' section")
    modes = cfg.mode_params()
    res = program_device(modes, cfg.targets)
    rows = []
    for rep in res.stage_reports:
        p = rep.pumps
        S = rep.S
        rows.append([rep.name, abs(p.beta_ab), abs(p.beta_bc), abs(p.beta_ac), abs(p.beta_bb), p.phi_loop,
                     float(to_db(abs(S[A_S, C_S]) ** 2)), float(to_db(abs(S[C_S, A_S]) ** 2)),
                     float(to_db(abs(S[A_S, A_S]) ** 2)), float(to_db(abs(S[C_S, C_S]) ** 2))])
    return Table(
        ["stage", "beta_ab", "beta_bc", "beta_ac", "beta_bb", "phi_loop_rad",
         "S_ac_db", "S_ca_db", "S_aa_db", "S_cc_db"],
        ["", "1", "1", "1", "1", "rad", "dB", "dB", "dB", "dB"], rows,
        {"gain_x_db": res.gain_x_db, "stable": res.stable},
    )


def cmd_bounds(cfg: DeviceConfig) -> Table:
    b = performance_bounds(cfg.mode_params())
    values = [("min_sqrt_GY", b.min_sqrt_GY), ("min_n_add", b.min_n_add),
              ("max_eta", b.max_eta), ("max_beta_ab_sq", b.max_beta_ab_sq)]
    return Table(["quantity", "value"], ["", ""], [list(v) for v in values])


COMMANDS: dict[str, Callable[[DeviceConfig], Table]] = {
    "sweep": cmd_sweep,
    "quadrature": cmd_quadrature,
    "noise": cmd_noise,
    "stability": cmd_stability,
    "tune": cmd_tune,
    "bounds": cmd_bounds,
}


# -- output --------------------------------------------------------------------

def render_csv(command: str, table: Table) -> str:
    lines = [f"# fpja {command}"]
    for k, v in table.summary.items():
        lines.append(f"# {k} = {fmt(v)}")
    lines.append("# units: " + ",".join(table.units))
    lines.append(",".join(table.columns))
    lines.extend(",".join(fmt(x) for x in row) for row in table.rows)
    return "\n".join(lines) + "\n"


def render_json(command: str, table: Table) -> str:
    doc = {
        "command": command,
        "columns": table.columns,
        "units": table.units,
        "summary": _json_value(table.summary),
        "rows": _json_value(table.rows),
    }
    return json.dumps(doc, indent=1) + "\n"


def manifest_path(out: Path) -> Path:
    return out.with_name(out.name + ".manifest.json")


def _versions() -> dict[str, str]:
    out = {"python": platform.python_version()}
    for pkg in ("artifact", "numpy", "scipy", "pyyaml"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "unknown"
    return out


def run_command(command: str, cfg: DeviceConfig, out: Path, fmt_name: str = "csv",
                argv: list[str] | None = None) -> int:
    t0 = time.perf_counter()
    table = COMMANDS[command](cfg)
    text = render_csv(command, table) if fmt_name == "csv" else render_json(command, table)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(text)
    manifest = {
        "command": command,
        "argv": argv or [],
        "config": cfg.to_dict(),
        "output": str(out),
        "format": fmt_name,
        "rows": len(table.rows),
        "versions": _versions(),
        "started_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
        "elapsed_s": time.perf_counter() - t0,
    }
    manifest_path(out).write_text(json.dumps(manifest, indent=1, default=str) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fpja", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=sorted(COMMANDS))
    p.add_argument("--config", required=True, help="config file, or 'paper_device' for the bundled one")
    p.add_argument("--out", required=True, type=Path, help="output data file")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="override a config entry, e.g. sweep.delta_mhz.points=101 (repeatable)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return p


def _report_error(command: str, exc: Exception, code: int, category: str) -> int:
    err = {"error": category, "command": command, "message": str(exc), "exit_code": code}
    stage = getattr(exc, "stage", None)
    if stage:
        err["stage"] = stage
    ceiling = getattr(exc, "ceiling_db", None)
    if ceiling is not None:
        err["ceiling_db"] = ceiling
    print(json.dumps(err), file=sys.stderr)
    return code


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.override)
        return run_command(args.command, cfg, args.out, args.format,
                           argv if argv is not None else sys.argv[1:])
    except FPJAError as exc:
        return _report_error(args.command, exc, exc.exit_code, exc.category)
    except ValueError as exc:
        return _report_error(args.command, exc, 2, type(exc).__name__)


if __name__ == "__main__":
    sys.exit(main())
