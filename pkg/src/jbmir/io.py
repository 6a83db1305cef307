"""File formats: lossless CSV for fields and data, 16-bit PGM for viewing."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import DataError


def _header(meta: dict | None) -> str:
    if not meta:
        return ""
    return "; ".join(f"{k}={_fmt(v)}" for k, v in meta.items())


def _fmt(v) -> str:
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, values: np.ndarray, meta: dict | None = None):
    """Write a 2D array with full double precision; ``meta`` becomes a ``#`` comment line."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savetxt(path, np.atleast_2d(values), delimiter=",", fmt="%.17g", header=_header(meta), comments="# ")


def read_csv(path, shape: tuple[int, int] | None = None) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing data file: {path}")
    try:
        a = np.loadtxt(path, delimiter=",", comments="#", ndmin=2)
    except ValueError as exc:
        raise DataError(f"cannot parse {path}: {exc}") from exc
    if shape is not None and a.shape != tuple(shape):
        raise DataError(f"{path} holds a {a.shape} array, expected {tuple(shape)}")
    return a


def read_meta(path) -> dict:
    """Parse the ``# key=value; ...`` header line of a CSV written by :func:`write_csv`."""
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        return {}
    meta = {}
    for item in first[1:].strip().split(";"):
        if "=" in item:
            k, v = item.split("=", 1)
            meta[k.strip()] = v.strip()
    return meta


def write_pgm16(path, f: np.ndarray, window: tuple[float, float]):
    """Binary 16-bit graymap, linearly windowed to ``window = (lo, hi)``.

    Row 0 of ``f`` is the top image row. The window is recorded as a comment.
    """
    lo, hi = window
    if hi <= lo:
        raise ValueError("display window must have hi > lo")
    f = np.asarray(f, dtype=float)
    scaled = np.clip((f - lo) / (hi - lo), 0.0, 1.0)
    pix = np.rint(scaled * 65535).astype(">u2")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    ny, nx = f.shape
    header = f"P5\n# window {lo!r} {hi!r}\n{nx} {ny}\n65535\n".encode("ascii")
    path.write_bytes(header + pix.tobytes())


def read_pgm16(path) -> tuple[np.ndarray, tuple[float, float] | None]:
    """Return the raw 16-bit pixels and the recorded window, if any."""
    data = Path(path).read_bytes()
    tokens, window, pos = [], None, 0
    while len(tokens) < 4:
        end = data.index(b"\n", pos)
        line = data[pos:end].decode("ascii")
        pos = end + 1
        if line.startswith("#"):
            parts = line[1:].split()
            if parts and parts[0] == "window":
                window = (float(parts[1]), float(parts[2]))
            continue
        tokens += line.split()
    if tokens[0] != "P5":
        raise DataError(f"{path} is not a binary graymap")
    nx, ny = int(tokens[1]), int(tokens[2])
    pix = np.frombuffer(data[pos:], dtype=">u2", count=nx * ny).reshape(ny, nx)
    return pix.astype(np.uint16), window
