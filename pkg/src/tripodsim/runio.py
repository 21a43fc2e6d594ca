"""Result persistence: CSV files with metadata headers, run manifests.

Every CSV starts with ``# key=value`` metadata lines followed by one
header row; column names carry units (``delay_us``, ``f_beat_MHz``,
``B_G``).  Floats are written with a fixed 12-significant-digit format so
identical runs produce byte-identical files.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

_FLOAT_FMT = "{:.12g}"


def _format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return _FLOAT_FMT.format(float(v))
    return str(v)


def write_csv(path: Path, columns: dict[str, np.ndarray], meta: dict) -> Path:
    """Write named columns (equal length) with metadata lines.

    Complex columns are split into ``<name>_re`` / ``<name>_im``.
    """
    path = Path(path)
    cols: dict[str, np.ndarray] = {}
    for name, arr in columns.items():
        arr = np.asarray(arr)
        if np.iscomplexobj(arr):
            cols[f"{name}_re"] = arr.real
            cols[f"{name}_im"] = arr.imag
        else:
            cols[name] = arr
    lengths = {len(a) for a in cols.values()}
    if len(lengths) != 1:
        raise ValueError(f"column lengths differ: {lengths}")

    lines = [f"# {k}={_format_value(v)}" for k, v in meta.items()]
    lines.append(",".join(cols.keys()))
    names = list(cols.keys())
    n = lengths.pop()
    for i in range(n):
        lines.append(",".join(_format_value(cols[name][i]) for name in names))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def read_csv(path: Path) -> tuple[dict[str, str], dict[str, np.ndarray]]:
    """Read a CSV written by :func:`write_csv`; returns (meta, columns)."""
    meta: dict[str, str] = {}
    header: list[str] | None = None
    rows: list[list[str]] = []
    for raw in Path(path).read_text(encoding="utf-8").splitlines():
        if not raw.strip():
            continue
        if raw.startswith("#"):
            body = raw[1:].strip()
            if "=" in body:
                k, _, v = body.partition("=")
                meta[k.strip()] = v.strip()
            continue
        if header is None:
            header = [h.strip() for h in raw.split(",")]
        else:
            rows.append(raw.split(","))
    if header is None:
        raise ValueError(f"{path}: no header row")
    data = {name: np.array([float(r[i]) for r in rows])
            for i, name in enumerate(header)}
    return meta, data


def write_manifest(path: Path, entries: dict) -> Path:
    path = Path(path)
    lines = [f"{k} = {_format_value(v)}" for k, v in entries.items()]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def file_sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
