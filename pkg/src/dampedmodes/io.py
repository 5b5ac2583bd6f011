"""Plot-data and summary files.

Floats are written with ``repr`` (shortest round-trip decimal), files are
UTF-8 with LF line endings, and ``summary.json`` has sorted keys so reruns
produce byte-identical output.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
import tempfile
from pathlib import Path

import numpy as np

from .errors import InvalidArgument
from .spectral import Trajectory

SERIES = "series.csv"
SUMMARY = "summary.json"
MANIFEST = "manifest.json"


def _num(x) -> str:
    return repr(float(x))


def jsonable(obj):
    """Convert numpy scalars/arrays and non-finite floats into JSON-safe values."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    return obj


def dumps(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def atomic_write(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def series_header(n_modes: int, polar: bool) -> list[str]:
    cols = ["t", "E", "tE"] + [f"e_{k}" for k in range(1, n_modes + 1)]
    if polar:
        for k in range(1, n_modes + 1):
            cols += [f"rho_{k}", f"theta_{k}"]
    return cols


def series_table(traj: Trajectory, polar: bool = False) -> np.ndarray:
    cols = [traj.t[:, None], traj.energy[:, None], traj.rescaled_energy[:, None],
            traj.modal_energy]
    if polar:
        rho, theta = traj.polar
        inter = np.empty((len(traj), 2 * traj.n_modes))
        inter[:, 0::2], inter[:, 1::2] = rho, theta
        cols.append(inter)
    return np.hstack(cols)


def write_series(traj: Trajectory, path: Path, polar: bool = False) -> None:
    table = series_table(traj, polar)
    lines = [",".join(series_header(traj.n_modes, polar))]
    lines += [",".join(map(_num, row)) for row in table]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def read_series(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return header, data


def emit_outputs(traj: Trajectory | None, out_dir, summary: dict, polar: bool = False) -> list[Path]:
    """Write ``series.csv`` (when ``traj`` is given) and ``summary.json`` into ``out_dir``.

    An empty trajectory is rejected before anything is written; if a write
    fails, files created by this call are removed.
    """
    if traj is not None and len(traj) == 0:
        raise InvalidArgument("empty trajectory: nothing to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        if traj is not None:
            p = out / SERIES
            written.append(p)
            write_series(traj, p, polar)
        p = out / SUMMARY
        written.append(p)
        atomic_write(p, dumps(summary))
    except BaseException:
        for p in written:
            if p.exists():
                p.unlink()
        raise
    return written
