"""ASCII portable-graymap (P2) rendering with a raw-value CSV beside it."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import ParameterDomainError

__all__ = ["MAXVAL", "MID_GRAY", "heatmap_pixels", "render_heatmap"]

MAXVAL = 255
MID_GRAY = 128


def heatmap_pixels(table):
    """Linear min-max scaling to 0..255; a constant table maps to mid-gray.

    Returns ``(pixels, constant)``.
    """
    a = np.asarray(table, dtype=float)
    if a.ndim != 2 or a.size == 0:
        raise ParameterDomainError("heatmap needs a non-empty 2-D table")
    if not np.all(np.isfinite(a)):
        raise ParameterDomainError("heatmap values must be finite")
    lo, hi = float(a.min()), float(a.max())
    if hi == lo:
        return np.full(a.shape, MID_GRAY, dtype=int), True
    scaled = (a - lo) * (MAXVAL / (hi - lo))
    return np.clip(np.floor(scaled + 0.5), 0, MAXVAL).astype(int), False


def render_heatmap(table, path):
    """Write ``path`` (P2) and ``path`` with suffix ``.csv`` (``row,col,value``).

    Returns ``(pgm_path, csv_path, note)`` where ``note`` is ``None`` unless the
    table was constant.
    """
    pixels, constant = heatmap_pixels(table)
    a = np.asarray(table, dtype=float)
    path = Path(path)
    rows, cols = pixels.shape
    lines = ["P2", f"{cols} {rows}", str(MAXVAL)]
    lines += [" ".join(str(int(p)) for p in row) for row in pixels]
    path.write_text("\n".join(lines) + "\n")
    csv_path = path.with_suffix(".csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("row", "col", "value"))
        for i in range(rows):
            for j in range(cols):
                w.writerow((i, j, repr(float(a[i, j]))))
    note = f"constant field ({float(a.flat[0])!r}) rendered as mid-gray {MID_GRAY}" if constant else None
    return path, csv_path, note
