"""Command-line interface.

Subcommands: darkstates, slowlight, store, scan-transmission,
sweep-field, fit-beat.  Each writes CSV result files plus a ``manifest``
into the output directory.  Exit codes: 0 success, 2 configuration
error, 3 numerical failure, 4 fit failure.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, analysis, config as cfgmod
from .constants import TWO_PI
from .dynamics import NumericalError
from .hamiltonian import dark_states, driven_dark_dimension
from .polariton import group_velocity_from_coupling
from .propagation import expected_delay, measure_delay, transmission
from .protocol import (
    run_storage,
    scan_transmission,
    slow_light_schedule,
    storage_grid,
    sweep_field,
)
from .runio import file_sha256, read_csv, write_csv, write_manifest

SUBCOMMANDS = (
    "darkstates",
    "slowlight",
    "store",
    "scan-transmission",
    "sweep-field",
    "fit-beat",
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_FIT = 4


def _error(code: int, kind: str, message: str) -> int:
    print(f"ERROR code={code} kind={kind} msg={message}", file=sys.stderr)
    return code


def _load(args) -> cfgmod.RunConfig:
    if args.config:
        text = Path(args.config).read_text(encoding="utf-8")
    else:
        text = ""
    return cfgmod.parse_config(text, preset_override=args.preset)


def _runtime(cfg):
    scheme = cfgmod.build_scheme_from(cfg)
    medium = cfgmod.build_medium_from(cfg)
    drive = cfgmod.build_drive_from(cfg)
    return scheme, medium, drive


def _csv_meta(cfg, subcommand: str, seed: int) -> dict:
    return {
        "tool": "tripodsim",
        "version": __version__,
        "subcommand": subcommand,
        "preset": cfg.get("run", "preset"),
        "seed": seed,
    }


def _cmd_darkstates(cfg, out: Path, meta, threads: int) -> int:
    scheme, medium, drive = _runtime(cfg)
    norm = math.hypot(cfg.get("input", "alpha"), cfg.get("input", "beta"))
    amp = cfg.get("input", "signal_amp")
    s1 = amp * cfg.get("input", "alpha") / norm
    s2 = amp * cfg.get("input", "beta") / norm * np.exp(1j * cfg.get("input", "rel_phase"))
    basis = dark_states(scheme, drive, (s1, s2))
    n_driven = driven_dark_dimension(scheme, drive, (s1, s2))
    labels, modes, amps = [], [], []
    for k in range(basis.shape[1]):
        for i, lbl in enumerate(scheme.labels):
            labels.append(lbl)
            modes.append(k)
            amps.append(basis[i, k])
    write_csv(
        out / "darkstates.csv",
        {"state": np.array(labels), "mode": np.array(modes),
         "amplitude": np.array(amps)},
        {**meta, "variant": scheme.variant, "n_dark": basis.shape[1],
         "n_driven_dark": n_driven},
    )
    return EXIT_OK


def _cmd_slowlight(cfg, out: Path, meta, threads: int) -> int:
    scheme, medium, drive = _runtime(cfg)
    sigma = cfg.get("slowlight", "sigma")
    t_center = cfg.get("slowlight", "t_center")
    length = cfg.get("grid", "length")
    delay_expected = expected_delay(medium, drive.omega_c, length)
    t_total = cfg.get("slowlight", "t_total")
    if t_total <= 0:
        t_total = t_center + delay_expected + 6.0 * sigma + 2.0
    norm = math.hypot(cfg.get("input", "alpha"), cfg.get("input", "beta"))
    amp = cfg.get("input", "signal_amp")
    schedule = slow_light_schedule(
        drive.omega_c, amp, sigma, t_center, t_total
    ).with_spinor(
        cfg.get("input", "alpha") / norm,
        cfg.get("input", "beta") / norm,
        cfg.get("input", "rel_phase"),
    )
    grid = cfgmod.build_grid_from(cfg, scheme, medium, drive, schedule)
    from .propagation import propagate

    record = propagate(scheme, medium, drive, schedule, grid)
    for side, name in (("in", "trace_in.csv"), ("out", "trace_out.csv")):
        write_csv(
            out / name,
            {
                "t_us": record.tau,
                "I_s1": record.intensity("s1", side),
                "I_s2": record.intensity("s2", side),
                "I_detected": record.detected_intensity(side),
            },
            meta,
        )
    rows_which, rows_delay, rows_trans = [], [], []
    for which in ("s1", "s2", "total"):
        rows_which.append(which)
        rows_delay.append(measure_delay(record, which))
        rows_trans.append(transmission(record, which))
    write_csv(
        out / "delay.csv",
        {"field": np.array(rows_which), "delay_us": np.array(rows_delay),
         "transmission": np.array(rows_trans)},
        {**meta,
         "expected_delay_us": delay_expected,
         "v_g_mm_per_us": group_velocity_from_coupling(
             medium.coupling_density, drive.omega_c),
         "length_mm": length},
    )
    return EXIT_OK


def _cmd_store(cfg, out: Path, meta, threads: int) -> int:
    scheme, medium, drive = _runtime(cfg)
    schedule = cfgmod.build_storage_schedule_from(cfg)
    grid = cfgmod.build_grid_from(cfg, scheme, medium, drive, schedule)
    result = run_storage(scheme, medium, drive, schedule, grid)
    rec = result.record
    for side, name in (("in", "trace_in.csv"), ("out", "trace_out.csv")):
        write_csv(
            out / name,
            {
                "t_us": rec.tau,
                "I_s1": rec.intensity("s1", side),
                "I_s2": rec.intensity("s2", side),
                "I_detected": rec.detected_intensity(side),
            },
            {**meta, "efficiency": result.efficiency},
        )
    write_csv(
        out / "spinwave.csv",
        {"z_mm": result.z, "sigma_plus": result.sigma_plus_z,
         "sigma_minus": result.sigma_minus_z},
        {**meta, "t_snapshot_us": result.window.t_mid_dark},
    )
    t_fit, y_fit = result.retrieved_trace()
    used_hint = False
    try:
        fit = analysis.fit_beat(t_fit, y_fit)
    except analysis.NoBeatError:
        used_hint = True
        fit = analysis.fit_beat(
            t_fit, y_fit, f0=drive.signal_freq_difference / TWO_PI
        )
    write_csv(
        out / "beatfit.csv",
        {k: np.array([v]) for k, v in fit.as_dict().items()},
        {**meta,
         "window_t0_us": result.retrieval_window[0],
         "window_t1_us": result.retrieval_window[1],
         "f0_hint_used": used_hint,
         "efficiency": result.efficiency,
         "retrieval_efficiency": result.retrieval_efficiency},
    )
    return EXIT_OK


def _cmd_scan(cfg, out: Path, meta, threads: int) -> int:
    scheme, medium, drive = _runtime(cfg)
    span = cfg.get("scan", "delta_max")
    n = cfg.get("scan", "n_points")
    deltas = np.linspace(-span, span, n)
    tmap = scan_transmission(
        scheme, medium, drive, deltas, deltas,
        length=cfg.get("scan", "length"),
        signal_amp=cfg.get("scan", "signal_amp"),
        crosscheck_points=cfg.get("scan", "crosscheck"),
        threads=threads,
    )
    d1g, d2g = np.meshgrid(tmap.delta1, tmap.delta2, indexing="ij")
    write_csv(
        out / "scanmap.csv",
        {
            "delta1_rad_us": d1g.ravel(),
            "delta2_rad_us": d2g.ravel(),
            "T_total": tmap.total.ravel(),
            "T_s1": tmap.signal1.ravel(),
            "T_s2": tmap.signal2.ravel(),
        },
        {**meta, "n_delta1": n, "n_delta2": n,
         "n_failures": len(tmap.failures)},
    )
    cc = tmap.crosschecks
    write_csv(
        out / "crosscheck.csv",
        {
            "delta1_rad_us": np.array([c[0] for c in cc]),
            "delta2_rad_us": np.array([c[1] for c in cc]),
            "T_fast": np.array([c[2] for c in cc]),
            "T_propagated": np.array([c[3] for c in cc]),
        },
        meta,
    )
    return EXIT_OK


def _cmd_sweep(cfg, out: Path, meta, threads: int) -> int:
    scheme, medium, drive = _runtime(cfg)
    schedule = cfgmod.build_storage_schedule_from(cfg)
    grid = cfgmod.build_grid_from(cfg, scheme, medium, drive, schedule)
    b_values = np.linspace(
        cfg.get("sweep", "b_min"), cfg.get("sweep", "b_max"),
        cfg.get("sweep", "n_points"),
    )
    b_ref = cfg.get("sweep", "b_ref") or None
    result = sweep_field(
        scheme, medium, drive, schedule, grid, b_values,
        b_ref=b_ref,
        diff_freq_offset=cfg.get("sweep", "diff_freq_offset"),
        threads=threads,
    )
    rows = {
        "B_G": [], "delta1_rad_us": [], "delta2_rad_us": [],
        "f_beat_MHz": [], "f_err_MHz": [], "phase_rad": [],
        "visibility": [], "tau_us": [], "ok": [],
    }
    for p in result.points:
        rows["B_G"].append(p.b_field)
        rows["delta1_rad_us"].append(p.delta1)
        rows["delta2_rad_us"].append(p.delta2)
        ok = p.fit is not None
        rows["ok"].append(int(ok))
        rows["f_beat_MHz"].append(p.fit.frequency if ok else np.nan)
        rows["f_err_MHz"].append(p.fit.frequency_err if ok else np.nan)
        rows["phase_rad"].append(p.fit.phase if ok else np.nan)
        rows["visibility"].append(p.fit.visibility if ok else np.nan)
        rows["tau_us"].append(p.fit.tau if ok else np.nan)
    write_csv(
        out / "sweep.csv",
        {k: np.array(v) for k, v in rows.items()},
        {**meta, "diff_freq_rad_us": result.diff_freq,
         "n_failed": sum(1 for p in result.points if p.fit is None)},
    )
    lin = result.linear_fit()
    write_csv(
        out / "linfit.csv",
        {
            "slope_MHz_per_G": np.array([lin.slope]),
            "slope_err_MHz_per_G": np.array([lin.slope_err]),
            "intercept_MHz": np.array([lin.intercept]),
            "intercept_err_MHz": np.array([lin.intercept_err]),
            "r_squared": np.array([lin.r_squared]),
        },
        meta,
    )
    return EXIT_OK


def _cmd_fitbeat(cfg, out: Path, meta, threads: int) -> int:
    trace_file = cfg.get("fitbeat", "trace_file")
    if not trace_file:
        raise cfgmod.ConfigError("[fitbeat] trace_file is required")
    path = Path(trace_file)
    if not path.exists():
        raise cfgmod.ConfigError(f"[fitbeat] trace_file not found: {path}")
    _, data = read_csv(path)
    if "t_us" not in data:
        raise cfgmod.ConfigError(f"[fitbeat] {path} has no t_us column")
    ycol = "I_detected" if "I_detected" in data else [
        c for c in data if c != "t_us"
    ][0]
    t0, t1 = cfg.get("fitbeat", "t0"), cfg.get("fitbeat", "t1")
    window = (t0, t1) if t1 > t0 else None
    f0 = cfg.get("fitbeat", "f0") or None
    fit = analysis.fit_beat(data["t_us"], data[ycol], window=window, f0=f0)
    write_csv(
        out / "beatfit.csv",
        {k: np.array([v]) for k, v in fit.as_dict().items()},
        {**meta, "trace_file": str(path), "column": ycol},
    )
    return EXIT_OK


_HANDLERS = {
    "darkstates": _cmd_darkstates,
    "slowlight": _cmd_slowlight,
    "store": _cmd_store,
    "scan-transmission": _cmd_scan,
    "sweep-field": _cmd_sweep,
    "fit-beat": _cmd_fitbeat,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tripodsim",
        description="Tripod-EIT light storage simulator",
    )
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", type=str, default="", help="INI config file")
    parser.add_argument("--out", type=str, default=".", help="output directory")
    parser.add_argument("--preset", choices=("paper", "desk"), default=None)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args(argv)

    t_start = time.monotonic()
    try:
        cfg = _load(args)
    except FileNotFoundError as exc:
        return _error(EXIT_CONFIG, "config", f"config file not found: {exc.filename}")
    except cfgmod.ConfigError as exc:
        return _error(EXIT_CONFIG, "config", str(exc))

    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        return _error(EXIT_CONFIG, "config", f"cannot create output dir: {exc}")

    meta = _csv_meta(cfg, args.subcommand, args.seed)
    try:
        code = _HANDLERS[args.subcommand](cfg, out, meta, max(args.threads, 1))
    except cfgmod.ConfigError as exc:
        return _error(EXIT_CONFIG, "config", str(exc))
    except analysis.AnalysisError as exc:
        return _error(EXIT_FIT, "fit", str(exc))
    except (NumericalError, ValueError) as exc:
        return _error(EXIT_NUMERICAL, "numerical", str(exc))

    manifest = {
        "subcommand": args.subcommand,
        "code_version": __version__,
        "preset": cfg.get("run", "preset"),
        "seed": args.seed,
        "threads": args.threads,
        "wall_time_s": round(time.monotonic() - t_start, 3),
    }
    write_manifest(out / "manifest", manifest)
    resolved = cfgmod.serialize(cfg)
    (out / "config_resolved.ini").write_text(resolved, encoding="utf-8")
    with (out / "manifest").open("a", encoding="utf-8") as fh:
        fh.write("config_resolved_sha256 = "
                 f"{file_sha256(out / 'config_resolved.ini')}\n")
        fh.write("--- resolved config ---\n")
        fh.write(resolved)
    return code


if __name__ == "__main__":
    sys.exit(main())
