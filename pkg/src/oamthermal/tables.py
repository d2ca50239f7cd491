"""Comma-separated tables with ``# key=value`` header comments."""

from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Dict, Mapping, Sequence, Tuple

import numpy as np

from .analysis import OamSpectrum, ThermalFit
from .errors import ConfigError


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def write_table(path, columns: Mapping[str, Sequence], meta: Mapping[str, object] = ()) -> Path:
    """Write equal-length columns; returns the path written."""
    path = Path(path)
    names = list(columns)
    lengths = {len(columns[k]) for k in names}
    if len(lengths) > 1:
        raise ValueError("columns must have equal length")
    buf = io.StringIO()
    for k, v in dict(meta).items():
        buf.write(f"# {k}={_fmt(v)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(names)
    for row in zip(*(columns[k] for k in names)):
        writer.writerow([_fmt(v) for v in row])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def read_table(path) -> Tuple[Dict[str, str], Dict[str, list]]:
    """Return ``(meta, columns)``; values stay strings."""
    path = Path(path)
    try:
        lines = path.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read table {path}: {exc}") from exc
    meta = {}
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body))
    if not rows:
        raise ConfigError(f"table {path} has no header row")
    header, data = rows[0], rows[1:]
    columns = {h: [r[i] for r in data] for i, h in enumerate(header)}
    return meta, columns


def write_spectrum(path, spectrum: OamSpectrum, meta: Mapping[str, object] = ()) -> Path:
    cols = {"ell": spectrum.ells, "p": spectrum.p}
    errors = spectrum.errors if spectrum.errors is not None else np.zeros_like(spectrum.p)
    cols["error"] = errors
    if spectrum.counts is not None:
        cols["count"] = spectrum.counts
    return write_table(path, cols, meta)


def read_spectrum(path) -> OamSpectrum:
    """Load a spectrum table; a ``count`` column takes precedence over ``p``."""
    _, cols = read_table(path)
    if "ell" not in cols:
        raise ConfigError(f"{path}: missing 'ell' column")
    ells = [int(v) for v in cols["ell"]]
    if "count" in cols:
        return OamSpectrum.from_counts(ells, [int(float(v)) for v in cols["count"]])
    if "p" not in cols:
        raise ConfigError(f"{path}: need a 'p' or 'count' column")
    p = np.array([float(v) for v in cols["p"]])
    errors = None
    if "error" in cols:
        e = np.array([float(v) if v else 0.0 for v in cols["error"]])
        if np.any(e > 0):
            errors = e * p.sum()
    return OamSpectrum.from_weights(ells, p, errors)


def write_fit(path, fit: ThermalFit, meta: Mapping[str, object] = ()) -> Path:
    record = fit.to_record()
    return write_table(path, {k: [v] for k, v in record.items()}, meta)
