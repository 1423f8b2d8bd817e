"""CSV serialization with fixed, locale-free number formatting."""

from __future__ import annotations

import hashlib
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np


def fmt(x) -> str:
    """Six significant digits, ``.`` separator; ints are written verbatim."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if x is None:
        return ""
    return f"{float(x):.6g}"


def round6(x):
    """Round a float to six significant digits (``None`` passes through)."""
    if x is None:
        return None
    x = float(x)
    if not np.isfinite(x):
        return None
    return float(f"{x:.6g}")


def digest(samples: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(samples, dtype="<f8").tobytes()).hexdigest()[:16]


def combine_digests(digests: Sequence[str]) -> str:
    return hashlib.sha256(",".join(digests).encode()).hexdigest()[:16]


def header_line(meta: Mapping[str, object]) -> str:
    parts = []
    for key, value in meta.items():
        if isinstance(value, float):
            value = fmt(value)
        parts.append(f"{key}={value}")
    return "# " + " ".join(parts)


def write_csv(
    path: Path | str,
    columns: Sequence[str],
    rows: Iterable[Sequence[object]],
    meta: Mapping[str, object] | None = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    if meta:
        lines.append(header_line(meta))
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(v if isinstance(v, str) else fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def read_csv(path: Path | str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Parse a file written by :func:`write_csv` into (meta, columns, rows)."""
    meta: dict[str, str] = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        if line.startswith("#"):
            for item in line[1:].split():
                key, _, value = item.partition("=")
                meta[key] = value
        elif not columns:
            columns = line.split(",")
        elif line:
            rows.append(line.split(","))
    return meta, columns, rows


def write_widths(path, widths, meta=None) -> Path:
    return write_csv(path, ["index", "width_seconds"], enumerate(widths), meta)


def write_waveform(path, samples, meta=None) -> Path:
    return write_csv(path, ["sample_index", "volts"], enumerate(samples), meta)


def write_density(path, freqs, values, meta=None) -> Path:
    return write_csv(path, ["freq_hz", "psd_v2_per_hz"], zip(freqs, values), meta)


def write_lines(path, lines, meta=None) -> Path:
    return write_csv(
        path, ["k", "freq_hz", "power_v2"], ((ln.k, ln.freq, ln.power) for ln in lines), meta
    )
