"""Grayscale image files (8/16-bit PNG, ASCII PGM) and key-value sidecars.

Pixel values travel as doubles in [0, 1]; files store them quantized to the
chosen bit depth.  A sidecar is a flat ``key = value`` text file next to an
image, used to make degradation runs replayable.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image

from .errors import DtgvError


class ImageIoError(DtgvError, ValueError):
    pass


_MAXVAL = {8: 255, 16: 65535}


def write_image(path, values: np.ndarray, bit_depth: int = 16) -> None:
    """Write an array of values in [0, 1] as PNG or ASCII PGM (by extension)."""
    if bit_depth not in _MAXVAL:
        raise ImageIoError(f"unsupported bit depth {bit_depth}")
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 2:
        raise ImageIoError(f"expected a 2-D image, got shape {arr.shape}")
    maxval = _MAXVAL[bit_depth]
    quant = np.rint(np.clip(arr, 0.0, 1.0) * maxval).astype(np.uint32)
    suffix = os.path.splitext(str(path))[1].lower()
    if suffix == ".pgm":
        _write_pgm(path, quant, maxval)
    elif suffix == ".png":
        dtype = np.uint8 if bit_depth == 8 else np.uint16
        Image.fromarray(quant.astype(dtype)).save(str(path))
    else:
        raise ImageIoError(f"unsupported image extension {suffix!r}")


def _write_pgm(path, quant: np.ndarray, maxval: int) -> None:
    h, w = quant.shape
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"P2\n{w} {h}\n{maxval}\n")
        for row in quant:
            fh.write(" ".join(str(int(v)) for v in row))
            fh.write("\n")


def read_image(path) -> np.ndarray:
    """Read a grayscale image file back to doubles in [0, 1]."""
    path = str(path)
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    suffix = os.path.splitext(path)[1].lower()
    if suffix == ".pgm":
        return _read_pgm(path)
    with Image.open(path) as im:
        arr = np.asarray(im).astype(np.float64)
    if arr.ndim == 3:  # collapse color to luminance
        arr = arr.mean(axis=2)
    if arr.max() > 255:
        return arr / 65535.0
    return arr / 255.0


def _read_pgm(path) -> np.ndarray:
    with open(path, "r", encoding="ascii") as fh:
        tokens = []
        for line in fh:
            line = line.split("#", 1)[0]
            tokens.extend(line.split())
    if not tokens or tokens[0] != "P2":
        raise ImageIoError(f"{path}: not an ASCII PGM file")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.array([int(t) for t in tokens[4:4 + w * h]], dtype=np.float64)
    if data.size != w * h:
        raise ImageIoError(f"{path}: truncated PGM data")
    return data.reshape(h, w) / maxval


def sidecar_path(image_path) -> str:
    return str(image_path) + ".meta"


def write_sidecar(image_path, entries: dict) -> None:
    with open(sidecar_path(image_path), "w", encoding="utf-8") as fh:
        for key, value in entries.items():
            fh.write(f"{key} = {value}\n")


def read_sidecar(image_path) -> dict:
    path = sidecar_path(image_path)
    entries = {}
    if not os.path.exists(path):
        return entries
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, value = line.partition("=")
            entries[key.strip()] = value.strip()
    return entries


def read_manifest(path) -> dict:
    """Flat key = value manifest; keys are normalized to underscores."""
    if not os.path.exists(str(path)):
        raise FileNotFoundError(str(path))
    entries = {}
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ImageIoError(f"manifest line without '=': {line!r}")
            entries[key.strip().replace("-", "_")] = value.strip()
    return entries
