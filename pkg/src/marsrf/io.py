"""CSV readers/writers. Numbers are written with enough digits to round-trip."""

from __future__ import annotations

import csv
import os
import tempfile
from pathlib import Path
from typing import Iterable, List, Optional, Sequence

import numpy as np

from .freqdomain import SpectralDensity
from .stability import AdevCurve

PSD_HEADER = ("freq_hz", "psd_rad2_per_hz")
PSD_DBC_HEADER = ("freq_hz", "psd_dbc_per_hz")
ADEV_HEADER = ("tau_s", "adev", "n_samples")
SERIES_HEADER = ("t_s", "phi_rad")


def fmt(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.17e}"


def write_atomic(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _table(header: Sequence[str], rows: Iterable[Sequence], comments=()) -> str:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def _parse(lines, source="<text>"):
    comments, header, rows = [], None, []
    for line in lines:
        line = line.rstrip("\r\n")
        if not line:
            continue
        if line.startswith("#"):
            comments.append(line[1:].strip())
        elif header is None:
            header = next(csv.reader([line]))
        else:
            rows.append(next(csv.reader([line])))
    if header is None:
        raise ValueError(f"{source}: missing header line")
    return comments, header, rows


def _read(path):
    with open(path, newline="") as fh:
        return _parse(fh, str(path))


def read_comments(path) -> List[str]:
    return _read(path)[0]


def write_psd_csv(path, psd: SpectralDensity, comments=(), dbc: bool = False) -> Path:
    if dbc:
        rows = zip(psd.freqs, psd.dbc())
        return write_atomic(path, _table(PSD_DBC_HEADER, rows, comments))
    return write_atomic(path, _table(PSD_HEADER, zip(psd.freqs, psd.values), comments))


def read_psd_csv(path) -> SpectralDensity:
    _, header, rows = _read(path)
    data = np.array(rows, dtype=float).reshape(-1, 2)
    if tuple(header) == PSD_DBC_HEADER:
        return SpectralDensity(data[:, 0], 2 * 10 ** (data[:, 1] / 10))
    if tuple(header) != PSD_HEADER:
        raise ValueError(f"{path}: unexpected header {header}")
    return SpectralDensity(data[:, 0], data[:, 1])


def write_adev_csv(path, curve: AdevCurve, comments=()) -> Path:
    counts = curve.counts if curve.counts is not None else [""] * len(curve.taus)
    return write_atomic(path, _table(ADEV_HEADER, zip(curve.taus, curve.sigmas, counts),
                                     comments))


def read_adev_csv(path) -> AdevCurve:
    return _adev_rows(*_read(path)[1:], str(path))


def read_adev_csv_text(text: str) -> AdevCurve:
    return _adev_rows(*_parse(text.splitlines())[1:])


def _adev_rows(header, rows, source="<text>") -> AdevCurve:
    if tuple(header) != ADEV_HEADER:
        raise ValueError(f"{source}: unexpected header {header}")
    taus = [float(r[0]) for r in rows]
    sig = [float(r[1]) for r in rows]
    counts = None if any(r[2] == "" for r in rows) else [int(r[2]) for r in rows]
    return AdevCurve(taus, sig, counts)


def write_rows_csv(path, rows: List[dict], columns: Optional[Sequence[str]] = None,
                   comments=()) -> Path:
    if columns is None:
        columns = list(rows[0]) if rows else []
    return write_atomic(path, _table(columns, ([r.get(c, "") for c in columns]
                                              for r in rows), comments))


def read_rows_csv(path) -> List[dict]:
    _, header, rows = _read(path)
    out = []
    for r in rows:
        d = {}
        for k, v in zip(header, r):
            try:
                d[k] = float(v)
            except ValueError:
                d[k] = v
        out.append(d)
    return out


def write_series(path, times, phase, comments=()) -> Path:
    """``.npy`` writes a (n, 2) binary array, anything else CSV."""
    path = Path(path)
    if path.suffix == ".npy":
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.tmp.npy")
        np.save(tmp, np.column_stack([times, phase]))
        os.replace(tmp, path)
        return path
    return write_atomic(path, _table(SERIES_HEADER, zip(times, phase), comments))
