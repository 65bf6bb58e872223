"""Binary PGM/PPM (P5/P6) reading and writing, plus CSV depth grids."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from presbysim.errors import InvalidArgument


def _tokens(data: bytes, count: int) -> tuple[list[int], int]:
    out, i = [], 0
    while len(out) < count:
        while i < len(data) and data[i:i + 1].isspace():
            i += 1
        if data[i:i + 1] == b"#":
            while i < len(data) and data[i:i + 1] not in (b"\n", b"\r"):
                i += 1
            continue
        j = i
        while j < len(data) and not data[j:j + 1].isspace():
            j += 1
        if j == i:
            raise InvalidArgument("truncated netpbm header")
        out.append(int(data[i:j]))
        i = j
    return out, i + 1  # exactly one whitespace byte precedes the raster


def read_pnm(path: str | Path) -> np.ndarray:
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P5", b"P6"):
        raise InvalidArgument(f"{path}: not a binary PGM/PPM file")
    (width, height, maxval), start = _tokens(data[2:], 3)
    start += 2
    if not (0 < maxval < 65536):
        raise InvalidArgument(f"{path}: bad maxval {maxval}")
    channels = 3 if magic == b"P6" else 1
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    n = width * height * channels
    raster = np.frombuffer(data, dtype=dtype, count=n, offset=start)
    shape = (height, width, 3) if channels == 3 else (height, width)
    return raster.reshape(shape).astype(np.uint16 if maxval > 255 else np.uint8)


def write_pnm(path: str | Path, image: np.ndarray):
    img = np.asarray(image)
    if img.ndim == 3 and img.shape[2] == 3:
        magic = b"P6"
    elif img.ndim == 2:
        magic = b"P5"
    else:
        raise InvalidArgument(f"cannot write image of shape {img.shape}")
    if img.dtype == np.uint8:
        maxval, raster = 255, img.tobytes()
    elif img.dtype == np.uint16:
        maxval, raster = 65535, img.astype(">u2").tobytes()
    else:
        raise InvalidArgument(f"unsupported dtype {img.dtype}; convert to uint8/uint16 first")
    h, w = img.shape[:2]
    Path(path).write_bytes(magic + f"\n{w} {h}\n{maxval}\n".encode() + raster)


def read_depth(path: str | Path) -> np.ndarray:
    """Depth map in millimetres from a 16-bit PGM or a CSV grid."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        depth = np.loadtxt(path, delimiter=",", dtype=float, ndmin=2)
    else:
        depth = read_pnm(path)
        if depth.ndim != 2:
            raise InvalidArgument(f"{path}: depth map must be single-channel")
        depth = depth.astype(float)
    if not np.all(depth > 0):
        raise InvalidArgument(f"{path}: depth values must be positive")
    return depth
