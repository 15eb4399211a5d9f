"""Binary PGM/PPM images, named-feature CSV vectors, and bounding-box sidecars."""

from __future__ import annotations

import csv
import io
from pathlib import Path

import numpy as np

from .errors import InputFormatError
from .models.datasets import BoundingBox


def _header_tokens(raw: bytes, count: int):
    """First ``count`` whitespace-separated header tokens (skipping ``#`` comments) and the data offset."""
    tokens, pos, n = [], 0, len(raw)
    while len(tokens) < count:
        while pos < n and raw[pos : pos + 1].isspace():
            pos += 1
        if pos < n and raw[pos : pos + 1] == b"#":
            while pos < n and raw[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not raw[pos : pos + 1].isspace() and raw[pos : pos + 1] != b"#":
            pos += 1
        if start == pos:
            raise InputFormatError("truncated image header")
        tokens.append(raw[start:pos].decode("ascii", errors="replace"))
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def decode_pnm(raw: bytes) -> np.ndarray:
    """(H, W, C) float64 in [0, 1] from P5 (C = 1) or P6 (C = 3) bytes with maxval < 256."""
    tokens, offset = _header_tokens(raw, 4)
    magic = tokens[0]
    if magic not in ("P5", "P6"):
        raise InputFormatError(f"unsupported image type {magic!r}; expected binary PGM (P5) or PPM (P6)")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError:
        raise InputFormatError(f"bad image header {tokens}") from None
    if width < 1 or height < 1 or not 0 < maxval < 256:
        raise InputFormatError(f"unsupported image geometry {width}x{height} maxval {maxval}")
    channels = 1 if magic == "P5" else 3
    count = width * height * channels
    data = raw[offset : offset + count]
    if len(data) != count:
        raise InputFormatError(f"image raster truncated: {len(data)} of {count} bytes")
    pixels = np.frombuffer(data, dtype=np.uint8).astype(np.float64)
    return pixels.reshape(height, width, channels) / maxval


def encode_pgm(gray) -> bytes:
    """P5 bytes for a 2-D array of integer intensities in 0..255."""
    gray = np.asarray(gray)
    if gray.ndim != 2:
        raise ValueError(f"PGM needs a 2-D array, got shape {gray.shape}")
    h, w = gray.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + gray.astype(np.uint8).tobytes()


def encode_ppm(rgb) -> bytes:
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"PPM needs an (H, W, 3) array, got shape {rgb.shape}")
    h, w, _ = rgb.shape
    return f"P6\n{w} {h}\n255\n".encode("ascii") + rgb.astype(np.uint8).tobytes()


def to_bytes_image(image) -> np.ndarray:
    """Round [0, 1] floats to 8-bit levels."""
    return np.clip(np.rint(np.asarray(image, dtype=np.float64) * 255), 0, 255).astype(np.uint8)


def save_image(image, path) -> None:
    """Write an (H, W, 1) or (H, W, 3) image in [0, 1] as PGM or PPM."""
    image = np.asarray(image)
    pixels = to_bytes_image(image)
    data = encode_pgm(pixels[..., 0]) if image.shape[-1] == 1 else encode_ppm(pixels)
    Path(path).write_bytes(data)


def heatmap_levels(importance) -> np.ndarray:
    """8-bit intensities proportional to importance: the largest value is 255 and zero is black."""
    importance = np.asarray(importance, dtype=np.float64)
    if np.any(importance < 0):
        raise ValueError("heatmap importance must be nonnegative")
    peak = importance.max() if importance.size else 0.0
    if peak == 0:
        return np.zeros(importance.shape, dtype=np.uint8)
    return np.rint(importance / peak * 255).astype(np.uint8)


def save_heatmap(importance, path) -> None:
    importance = np.asarray(importance, dtype=np.float64)
    if importance.ndim == 1:
        importance = importance[None, :]
    Path(path).write_bytes(encode_pgm(heatmap_levels(importance)))


# -- feature vectors -----------------------------------------------------------


def read_feature_csv(path) -> tuple[list[str], np.ndarray]:
    """Named-feature vector: a header row of names and one row of values, or ``name,value`` rows."""
    text = Path(path).read_text(encoding="utf-8")
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if not rows:
        raise InputFormatError(f"{path}: empty feature file")
    try:
        if len(rows) == 2 and len(rows[0]) == len(rows[1]) and len(rows[0]) > 2:
            names, values = rows[0], [float(v) for v in rows[1]]
        else:
            if rows[0][0].strip().lower() in ("name", "feature"):
                rows = rows[1:]
            if any(len(r) != 2 for r in rows):
                raise InputFormatError(f"{path}: expected 'name,value' rows")
            names, values = [r[0] for r in rows], [float(r[1]) for r in rows]
    except ValueError as exc:
        if isinstance(exc, InputFormatError):
            raise
        raise InputFormatError(f"{path}: non-numeric feature value ({exc})") from None
    values = np.asarray(values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise InputFormatError(f"{path}: non-finite feature value")
    return [n.strip() for n in names], values


def write_feature_csv(names, values, path, header=("feature", "value")) -> None:
    lines = [",".join(header)]
    lines += [f"{name},{float(v)!r}" for name, v in zip(names, np.asarray(values).reshape(-1))]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_input(path):
    """``(names or None, array)`` from a PGM/PPM image or a feature CSV, chosen by file content."""
    path = Path(path)
    raw = path.read_bytes()
    if raw[:2] in (b"P5", b"P6"):
        return None, decode_pnm(raw)
    if raw[:1] == b"P" and raw[1:2].isdigit():
        raise InputFormatError(f"{path}: only binary PGM (P5) and PPM (P6) images are supported")
    return read_feature_csv(path)


# -- boxes ---------------------------------------------------------------------


def read_boxes(path) -> list[BoundingBox]:
    boxes = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if len(parts) != 4:
                raise ValueError
            boxes.append(BoundingBox(*(int(p) for p in parts)))
        except ValueError:
            raise InputFormatError(f"{path}:{lineno}: expected 'x0 y0 x1 y1' integers") from None
    return boxes


def write_boxes(boxes, path) -> None:
    Path(path).write_text("".join(f"{b.x0} {b.y0} {b.x1} {b.y1}\n" for b in boxes), encoding="utf-8")
