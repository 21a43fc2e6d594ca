"""Run configuration: INI-style parsing, validation, presets.

Grammar: ``[section]`` headers, ``key = value`` lines, ``#`` comments and
blank lines.  Unknown sections or keys are rejected with their line
number; missing keys fall back to the selected preset (``paper`` by
default).  ``serialize`` emits a file that parses back to an identical
configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .constants import C_LIGHT, GAMMA_RB_D1
from .hamiltonian import DriveConfig
from .levels import VARIANTS, LevelScheme, build_scheme
from .propagation import Grid, MediumParams
from .protocol import (
    PulseSchedule,
    slow_light_schedule,
    storage_grid,
    storage_schedule,
)


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{message}")


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {raw!r}")


def _positive(x: float) -> bool:
    return x > 0


def _nonneg(x: float) -> bool:
    return x >= 0


# key -> (type, validator or None, constraint description)
_SPEC = {
    "run": {
        "preset": (str, lambda v: v in ("paper", "desk"), "paper or desk"),
    },
    "scheme": {
        "variant": (str, lambda v: v in VARIANTS, "tripod4 or zeeman8"),
        "gamma": (float, _positive, "> 0"),
        "leakage": (bool, None, ""),
    },
    "medium": {
        "g": (float, _positive, "> 0"),
        "n_density": (float, _positive, "> 0"),
        "gamma_g": (float, _nonneg, ">= 0"),
    },
    "drive": {
        "omega_c": (float, _positive, "> 0"),
        "delta": (float, None, ""),
        "delta1": (float, None, ""),
        "delta2": (float, None, ""),
        "b_field": (float, _nonneg, ">= 0"),
        "g_factor": (float, _positive, "> 0"),
    },
    "input": {
        "alpha": (float, _nonneg, ">= 0"),
        "beta": (float, _nonneg, ">= 0"),
        "rel_phase": (float, None, ""),
        "signal_amp": (float, _positive, "> 0"),
        "diff_freq_offset": (float, None, ""),
    },
    "schedule": {
        "t_signal": (float, _positive, "> 0"),
        "edge": (float, _positive, "> 0"),
        "ramp": (float, _positive, "> 0"),
        "t_dark": (float, _nonneg, ">= 0"),
        "tail": (float, _nonneg, ">= 0"),
    },
    "grid": {
        "nz": (int, lambda v: v >= 2, ">= 2"),
        "length": (float, _positive, "> 0"),
        "dt_bound": (float, _positive, "> 0"),
    },
    "slowlight": {
        "sigma": (float, _positive, "> 0"),
        "t_center": (float, _positive, "> 0"),
        "t_total": (float, _nonneg, ">= 0 (0 = auto)"),
    },
    "scan": {
        "delta_max": (float, _positive, "> 0"),
        "n_points": (int, lambda v: v >= 3, ">= 3"),
        "signal_amp": (float, _positive, "> 0"),
        "crosscheck": (int, _nonneg, ">= 0"),
        "length": (float, _positive, "> 0"),
    },
    "sweep": {
        "b_min": (float, _positive, "> 0"),
        "b_max": (float, _positive, "> 0"),
        "n_points": (int, lambda v: v >= 2, ">= 2"),
        "b_ref": (float, _nonneg, ">= 0 (0 = sweep midpoint)"),
        "diff_freq_offset": (float, None, ""),
    },
    "fitbeat": {
        "trace_file": (str, None, ""),
        "t0": (float, None, ""),
        "t1": (float, None, ""),
        "f0": (float, _nonneg, ">= 0 (0 = from spectrum)"),
    },
    "output": {
        "prefix": (str, None, ""),
    },
}


def _coupling_for_target(omega_c: float, v_g: float) -> float:
    """G that makes the tripod group velocity equal v_g at this control."""
    return 2.0 * omega_c**2 * (C_LIGHT / v_g - 1.0)


def _preset(name: str) -> dict:
    """Baseline key values.

    paper: full Zeeman manifold with leakage, v_g = 1.7 mm/us over a
    50 mm cell, 20 us pulses, 10 us dark time, 150 mG bias.
    desk: ideal tripod at v_g = 2.0 mm/us with weak dephasing; same
    sequence, faster to run.
    """
    if name == "paper":
        omega_c, v_g = 37.0, 1.7
        g = 15.0
        base = {
            ("scheme", "variant"): "zeeman8",
            ("scheme", "leakage"): True,
            ("medium", "gamma_g"): 0.02,
            ("grid", "nz"): 121,
        }
    elif name == "desk":
        omega_c, v_g = 30.0, 2.0
        g = 15.0
        base = {
            ("scheme", "variant"): "tripod4",
            ("scheme", "leakage"): False,
            ("medium", "gamma_g"): 0.001,
            ("grid", "nz"): 81,
        }
    else:
        raise ConfigError(f"unknown preset {name!r}")
    coupling = _coupling_for_target(omega_c, v_g)
    values = {
        ("run", "preset"): name,
        ("scheme", "gamma"): GAMMA_RB_D1,
        ("medium", "g"): g,
        ("medium", "n_density"): coupling / g**2,
        ("drive", "omega_c"): omega_c,
        ("drive", "delta"): 0.0,
        ("drive", "delta1"): 0.0,
        ("drive", "delta2"): 0.0,
        ("drive", "b_field"): 0.150,
        ("drive", "g_factor"): 0.5,
        ("input", "alpha"): 1.0,
        ("input", "beta"): 1.0,
        ("input", "rel_phase"): 0.0,
        ("input", "signal_amp"): 0.3,
        ("input", "diff_freq_offset"): 0.0,
        ("schedule", "t_signal"): 20.0,
        ("schedule", "edge"): 1.0,
        ("schedule", "ramp"): 1.0,
        ("schedule", "t_dark"): 10.0,
        ("schedule", "tail"): 6.0,
        ("grid", "length"): 50.0,
        ("grid", "dt_bound"): 0.05,
        ("slowlight", "sigma"): 4.0,
        ("slowlight", "t_center"): 14.0,
        ("slowlight", "t_total"): 0.0,
        ("scan", "delta_max"): 1.5,
        ("scan", "n_points"): 21,
        ("scan", "signal_amp"): 0.03,
        ("scan", "crosscheck"): 3,
        ("scan", "length"): 50.0,
        ("sweep", "b_min"): 0.05,
        ("sweep", "b_max"): 0.30,
        ("sweep", "n_points"): 6,
        ("sweep", "b_ref"): 0.0,
        ("sweep", "diff_freq_offset"): 0.0,
        ("fitbeat", "trace_file"): "",
        ("fitbeat", "t0"): 0.0,
        ("fitbeat", "t1"): 0.0,
        ("fitbeat", "f0"): 0.0,
        ("output", "prefix"): "",
    }
    values.update(base)
    return values


@dataclass
class RunConfig:
    """Fully resolved configuration (every key has a value)."""

    values: dict = field(default_factory=dict)

    def get(self, section: str, key: str):
        return self.values[(section, key)]

    def sections(self) -> list[str]:
        return list(_SPEC.keys())


def parse_config(text: str, preset_override: str | None = None) -> RunConfig:
    """Parse and validate INI-style text into a RunConfig.

    Preset resolution order: ``preset_override`` argument, then the
    file's ``[run] preset`` key, then ``paper``.  All other file keys
    overlay the preset baseline.
    """
    entries: dict[tuple[str, str], tuple[str, int]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in _SPEC:
                raise ConfigError(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if section is None:
            raise ConfigError("key before any [section] header", lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SPEC[section]:
            raise ConfigError(f"unknown key {key!r} in section [{section}]", lineno)
        if (section, key) in entries:
            raise ConfigError(f"duplicate key {key!r} in section [{section}]", lineno)
        entries[(section, key)] = (value, lineno)

    preset_name = preset_override
    if preset_name is None and ("run", "preset") in entries:
        raw, lineno = entries[("run", "preset")]
        if raw not in ("paper", "desk"):
            raise ConfigError(f"preset must be paper or desk, got {raw!r}", lineno)
        preset_name = raw
    if preset_name is None:
        preset_name = "paper"

    values = _preset(preset_name)
    for (section, key), (raw, lineno) in entries.items():
        typ, check, constraint = _SPEC[section][key]
        try:
            if typ is bool:
                val = _parse_bool(raw)
            elif typ is int:
                val = int(raw)
            elif typ is float:
                val = float(raw)
                if not math.isfinite(val):
                    raise ValueError("value must be finite")
            else:
                val = raw
        except ValueError as exc:
            raise ConfigError(
                f"[{section}] {key}: {exc if typ is bool else f'cannot parse {raw!r} as {typ.__name__}'}",
                lineno,
            ) from None
        if check is not None and not check(val):
            raise ConfigError(
                f"[{section}] {key} = {raw} out of range (must be {constraint})",
                lineno,
            )
        values[(section, key)] = val
    values[("run", "preset")] = preset_name

    cfg = RunConfig(values)
    _cross_validate(cfg)
    return cfg


def _cross_validate(cfg: RunConfig):
    if cfg.get("sweep", "b_max") < cfg.get("sweep", "b_min"):
        raise ConfigError("[sweep] b_max must be >= b_min")
    if cfg.get("schedule", "t_signal") <= 2 * cfg.get("schedule", "edge"):
        raise ConfigError("[schedule] t_signal must exceed twice the edge time")
    if cfg.get("input", "alpha") == 0 and cfg.get("input", "beta") == 0:
        raise ConfigError("[input] alpha and beta cannot both be zero")


def serialize(cfg: RunConfig) -> str:
    lines = []
    for section in _SPEC:
        lines.append(f"[{section}]")
        for key in _SPEC[section]:
            val = cfg.values[(section, key)]
            if isinstance(val, bool):
                val = "true" if val else "false"
            elif isinstance(val, float):
                val = repr(val)
            lines.append(f"{key} = {val}")
        lines.append("")
    return "\n".join(lines)


# Builders from configuration to runtime objects.

def build_scheme_from(cfg: RunConfig) -> LevelScheme:
    return build_scheme(
        cfg.get("scheme", "variant"),
        cfg.get("scheme", "gamma"),
        cfg.get("scheme", "leakage"),
        b_field=cfg.get("drive", "b_field"),
        g_factor=cfg.get("drive", "g_factor"),
    )


def build_medium_from(cfg: RunConfig) -> MediumParams:
    return MediumParams(
        g=cfg.get("medium", "g"),
        n_density=cfg.get("medium", "n_density"),
        gamma_g=cfg.get("medium", "gamma_g"),
    )


def build_drive_from(cfg: RunConfig) -> DriveConfig:
    offset = cfg.get("input", "diff_freq_offset")
    return DriveConfig(
        omega_c=cfg.get("drive", "omega_c"),
        delta=cfg.get("drive", "delta"),
        delta1=cfg.get("drive", "delta1") - 0.5 * offset,
        delta2=cfg.get("drive", "delta2") + 0.5 * offset,
        b_field=cfg.get("drive", "b_field"),
        g_factor=cfg.get("drive", "g_factor"),
    )


def build_storage_schedule_from(cfg: RunConfig) -> PulseSchedule:
    sched = storage_schedule(
        omega_c=cfg.get("drive", "omega_c"),
        signal_amp=cfg.get("input", "signal_amp"),
        t_signal=cfg.get("schedule", "t_signal"),
        edge=cfg.get("schedule", "edge"),
        ramp=cfg.get("schedule", "ramp"),
        t_dark=cfg.get("schedule", "t_dark"),
        tail=cfg.get("schedule", "tail"),
    )
    norm = math.hypot(cfg.get("input", "alpha"), cfg.get("input", "beta"))
    return sched.with_spinor(
        cfg.get("input", "alpha") / norm,
        cfg.get("input", "beta") / norm,
        cfg.get("input", "rel_phase"),
    )


def build_grid_from(cfg: RunConfig, scheme: LevelScheme, medium: MediumParams,
                    drive: DriveConfig, schedule: PulseSchedule) -> Grid:
    grid = storage_grid(
        scheme, medium, drive, schedule,
        nz=cfg.get("grid", "nz"),
        dt_bound=cfg.get("grid", "dt_bound"),
    )
    length = cfg.get("grid", "length")
    return Grid(nz=grid.nz, length=length, nt=grid.nt, t_max=grid.t_max)
