"""On-disk formats: AVDE matrix dumps, report CSV, binary PGM/PPM images."""

from __future__ import annotations

import csv
import io
import os
import struct
import tempfile
from pathlib import Path
from typing import Iterable

import numpy as np

from .errors import FormatError

AVDE_MAGIC = b"AVDE"
AVDE_VERSION = 1
_HEADER = struct.Struct("<4sIII")

CSV_HEADER = ("prompt", "n_targets", "step", "layer", "token", "component_norm",
              "cs_before", "cs_after", "fid")


def atomic_write(path: str | os.PathLike, data: bytes) -> None:
    """Write ``data`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def avde_bytes(matrix) -> bytes:
    m = np.asarray(matrix, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"AVDE stores 2-D matrices, got shape {m.shape}")
    rows, cols = m.shape
    return _HEADER.pack(AVDE_MAGIC, AVDE_VERSION, rows, cols) + m.astype("<f8").tobytes(order="C")


def parse_avde(data: bytes) -> np.ndarray:
    if len(data) < _HEADER.size:
        raise FormatError("truncated AVDE header")
    magic, version, rows, cols = _HEADER.unpack_from(data)
    if magic != AVDE_MAGIC:
        raise FormatError(f"bad AVDE magic {magic!r}")
    if version != AVDE_VERSION:
        raise FormatError(f"unsupported AVDE version {version}")
    expected = _HEADER.size + 8 * rows * cols
    if len(data) != expected:
        raise FormatError(f"AVDE payload is {len(data)} bytes, expected {expected}")
    return np.frombuffer(data, dtype="<f8", offset=_HEADER.size).reshape(rows, cols).astype(np.float64)


def write_avde(path, matrix) -> None:
    atomic_write(path, avde_bytes(matrix))


def read_avde(path) -> np.ndarray:
    return parse_avde(Path(path).read_bytes())


def fmt_float(x: float) -> str:
    return format(float(x), ".17g")


def report_rows(report) -> Iterable[tuple]:
    S, L, T = report.component_norms.shape
    for step in range(S):
        for layer in range(L):
            for token in range(T):
                yield (
                    report.prompt,
                    report.n_targets,
                    step,
                    layer,
                    token,
                    fmt_float(report.component_norms[step, layer, token]),
                    fmt_float(report.cs_before),
                    fmt_float(report.cs_after),
                    fmt_float(report.fid),
                )


def csv_bytes(header: Iterable[str], rows: Iterable[Iterable]) -> bytes:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue().encode("utf-8")


def write_report_csv(path, report) -> None:
    atomic_write(path, csv_bytes(CSV_HEADER, report_rows(report)))


def minmax_gray(values) -> np.ndarray:
    """Scale to 0..255; a constant image maps to all zeros."""
    a = np.asarray(values, dtype=np.float64)
    lo, hi = float(a.min()), float(a.max())
    if hi <= lo:
        return np.zeros(a.shape, dtype=np.uint8)
    return np.rint((a - lo) / (hi - lo) * 255.0).astype(np.uint8)


def pgm_bytes(gray: np.ndarray) -> bytes:
    g = np.asarray(gray)
    if g.ndim != 2 or g.dtype != np.uint8:
        raise ValueError("PGM needs a 2-D uint8 array")
    h, w = g.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + g.tobytes(order="C")


def ppm_bytes(rgb: np.ndarray) -> bytes:
    a = np.asarray(rgb)
    if a.ndim != 3 or a.shape[2] != 3 or a.dtype != np.uint8:
        raise ValueError("PPM needs an (H, W, 3) uint8 array")
    h, w, _ = a.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + a.tobytes(order="C")


def component_heatmap(component) -> np.ndarray:
    """|erased component| as an image: one column per token, one row per channel."""
    return minmax_gray(np.abs(np.asarray(component, dtype=np.float64)).T)


def diverging_rgb(values, scale: float) -> np.ndarray:
    """Blue-white-red rendering of signed values divided by ``scale``."""
    x = np.zeros_like(values) if scale <= 0 else np.clip(values / scale, -1.0, 1.0)
    rgb = np.empty(x.shape + (3,))
    pos = np.clip(x, 0.0, None)
    neg = np.clip(-x, 0.0, None)
    rgb[..., 0] = 1.0 - neg
    rgb[..., 1] = 1.0 - pos - neg
    rgb[..., 2] = 1.0 - pos
    return np.rint(rgb * 255.0).astype(np.uint8)


def side_by_side(before, after, zoom: int = 8) -> np.ndarray:
    """Before/after feature maps on a shared colour scale with a grey divider."""
    before = np.asarray(before, dtype=np.float64)
    after = np.asarray(after, dtype=np.float64)
    scale = float(max(np.abs(before).max(), np.abs(after).max()))
    gap = np.full((before.shape[0], 1, 3), 128, dtype=np.uint8)
    img = np.concatenate([diverging_rgb(before, scale), gap, diverging_rgb(after, scale)], axis=1)
    return img.repeat(zoom, axis=0).repeat(zoom, axis=1)
