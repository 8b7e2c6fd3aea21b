"""File formats: trajectory CSV, binary PGM frames, JSON reports and parameter files."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(path: str | Path, times: np.ndarray, states: np.ndarray) -> None:
    """Header ``t,y0,...,y{d-1}``, one row per time, 17 significant digits."""
    states = np.asarray(states, dtype=float)
    d = states.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"y{i}" for i in range(d)])
        for t, row in zip(times, states):
            w.writerow([_fmt(t)] + [_fmt(v) for v in row])


def read_trajectory_csv(path: str | Path) -> tuple[np.ndarray, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[0] != "t" or header[1:] != [f"y{i}" for i in range(len(header) - 1)]:
        raise ValueError(f"{path}: unexpected trajectory header {header}")
    data = np.array([[float(v) for v in r] for r in body], dtype=float).reshape(len(body), len(header))
    return data[:, 0], data[:, 1:]


def write_table_csv(path: str | Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def to_gray8(field: np.ndarray) -> np.ndarray:
    """Linear map of ``[0, max(field)]`` onto ``0..255``; all-zero if the max is not positive."""
    field = np.asarray(field, dtype=float)
    top = float(field.max())
    if not top > 0.0:
        return np.zeros(field.shape, dtype=np.uint8)
    return np.clip(np.rint(field / top * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path: str | Path, field: np.ndarray) -> None:
    """Binary (P5) 8-bit PGM; rows of the array are image rows."""
    img = to_gray8(field)
    h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(img.tobytes())


def read_pgm(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    if parts[0] != b"P5":
        raise ValueError(f"{path}: not a binary PGM")
    w, h, maxval = int(parts[1]), int(parts[2]), int(parts[3])
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM is supported")
    pixels = raw[len(raw) - w * h :]
    return np.frombuffer(pixels, dtype=np.uint8).reshape(h, w)


def dumps_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(dumps_json(obj))


def read_json(path: str | Path):
    return json.loads(Path(path).read_text())


def write_params(path: str | Path, theta: np.ndarray) -> None:
    """Flat JSON array of reals."""
    Path(path).write_text(json.dumps([float(v) for v in np.ravel(theta)]) + "\n")


def read_params(path: str | Path) -> np.ndarray:
    data = read_json(path)
    if not isinstance(data, list) or not all(isinstance(v, (int, float)) for v in data):
        raise ValueError(f"{path}: parameter file must be a flat JSON array of numbers")
    return np.array(data, dtype=float)
