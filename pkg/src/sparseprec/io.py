"""File formats: precoder CSV, metric CSV/JSON, atomic writes."""
from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path

import numpy as np


def atomic_write_text(path, text: str) -> Path:
    """Write via a temp file in the target directory and rename into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def _fmt(v: float) -> str:
    # repr round-trips a float exactly
    return repr(float(v))


def complex_matrix_to_csv(P) -> str:
    """One row per matrix row; columns ``re0,im0,re1,im1,...``."""
    P = np.atleast_2d(np.asarray(P, dtype=complex))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([f"{part}{j}" for j in range(P.shape[1]) for part in ("re", "im")])
    for row in P:
        w.writerow([_fmt(x) for z in row for x in (z.real, z.imag)])
    return buf.getvalue()


def complex_matrix_from_csv(text: str) -> np.ndarray:
    rows = list(csv.reader(io.StringIO(text)))
    header, body = rows[0], [r for r in rows[1:] if r]
    if len(header) % 2:
        raise ValueError("precoder CSV needs re/im column pairs")
    vals = np.array([[float(x) for x in r] for r in body])
    if vals.size == 0:
        raise ValueError("precoder CSV has no rows")
    return vals[:, 0::2] + 1j * vals[:, 1::2]


def save_complex_matrix(path, P) -> Path:
    return atomic_write_text(path, complex_matrix_to_csv(P))


def load_complex_matrix(path) -> np.ndarray:
    return complex_matrix_from_csv(Path(path).read_text())


def dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
