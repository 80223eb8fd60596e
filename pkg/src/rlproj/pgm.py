"""Plain (P2) portable-graymap output for reconstruction snapshots."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError


def write_pgm(path, image: np.ndarray, maxval: int = 255) -> None:
    """Write one grayscale image (values in [0, 1]) as an ascii P2 file.

    Sample lines are wrapped to stay under the format's 70-character limit.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2:
        raise ShapeError(f"expected a 2-d image, got shape {img.shape}")
    levels = np.clip(np.rint(img * maxval), 0, maxval).astype(int)
    lines = ["P2", f"{img.shape[1]} {img.shape[0]}", str(maxval)]
    tokens = [str(v) for v in levels.ravel()]
    current = ""
    for tok in tokens:
        if current and len(current) + 1 + len(tok) > 69:
            lines.append(current)
            current = tok
        else:
            current = f"{current} {tok}" if current else tok
    if current:
        lines.append(current)
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path) -> np.ndarray:
    """Read an ascii P2 file back into floats in [0, 1]."""
    tokens = []
    for line in Path(path).read_text().splitlines():
        body = line.split("#", 1)[0]
        tokens.extend(body.split())
    if not tokens or tokens[0] != "P2":
        raise FormatError(f"{path}: not a plain P2 graymap")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    vals = np.array([int(t) for t in tokens[4 : 4 + w * h]], dtype=np.float64)
    if vals.size != w * h:
        raise FormatError(f"{path}: expected {w * h} samples, found {vals.size}")
    return (vals / maxval).reshape(h, w)


def side_by_side(left: np.ndarray, right: np.ndarray, gap: int = 2) -> np.ndarray:
    """Original and reconstruction next to each other with a white divider."""
    if left.shape[0] != right.shape[0]:
        raise ShapeError(f"row mismatch {left.shape} vs {right.shape}")
    divider = np.ones((left.shape[0], gap))
    return np.hstack([left, divider, right])
