"""Deterministic quick-look heatmaps: a minimal self-contained PNG writer.

No plotting dependency: scanlines are zlib-compressed at a fixed level, so
rendering the same snapshot twice produces byte-identical files. Grayscale
by default, or a 33-anchor viridis-style lookup table with linear
interpolation.
"""

from __future__ import annotations

import struct
import zlib

import numpy as np

from .spectral import Field

# 33 equally spaced RGB anchors of the viridis table
_VIRIDIS = np.array([
    (0.2670, 0.0049, 0.3294), (0.2770, 0.0503, 0.3757), (0.2823, 0.0950, 0.4173),
    (0.2829, 0.1359, 0.4534), (0.2788, 0.1755, 0.4834), (0.2706, 0.2141, 0.5071),
    (0.2590, 0.2515, 0.5247), (0.2450, 0.2877, 0.5373), (0.2297, 0.3224, 0.5457),
    (0.2143, 0.3556, 0.5512), (0.1994, 0.3876, 0.5546), (0.1856, 0.4186, 0.5568),
    (0.1727, 0.4488, 0.5579), (0.1607, 0.4785, 0.5581), (0.1490, 0.5081, 0.5573),
    (0.1378, 0.5375, 0.5549), (0.1276, 0.5669, 0.5506), (0.1206, 0.5964, 0.5436),
    (0.1206, 0.6258, 0.5335), (0.1323, 0.6550, 0.5197), (0.1579, 0.6838, 0.5017),
    (0.1966, 0.7118, 0.4792), (0.2461, 0.7389, 0.4520), (0.3041, 0.7647, 0.4199),
    (0.3692, 0.7889, 0.3829), (0.4401, 0.8111, 0.3410), (0.5160, 0.8312, 0.2943),
    (0.5958, 0.8487, 0.2433), (0.6785, 0.8637, 0.1895), (0.7624, 0.8764, 0.1371),
    (0.8456, 0.8873, 0.0997), (0.9261, 0.8973, 0.1041), (0.9932, 0.9062, 0.1439),
])


class RenderError(ValueError):
    """Unsupported snapshot shape or options."""


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (struct.pack(">I", len(payload)) + tag + payload
            + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF))


def write_png(path, pixels: np.ndarray) -> None:
    """uint8 pixels of shape (height, width) gray or (height, width, 3) RGB."""
    pixels = np.asarray(pixels, dtype=np.uint8)
    if pixels.ndim == 2:
        color_type, channels = 0, 1
    elif pixels.ndim == 3 and pixels.shape[2] == 3:
        color_type, channels = 2, 3
    else:
        raise RenderError(f"unsupported pixel array shape {pixels.shape}")
    height, width = pixels.shape[:2]
    raw = bytearray()
    flat = pixels.reshape(height, width * channels)
    for row in flat:
        raw.append(0)  # filter type 0
        raw.extend(row.tobytes())
    header = struct.pack(">IIBBBBB", width, height, 8, color_type, 0, 0, 0)
    with open(path, "wb") as fh:
        fh.write(b"\x89PNG\r\n\x1a\n")
        fh.write(_chunk(b"IHDR", header))
        fh.write(_chunk(b"IDAT", zlib.compress(bytes(raw), 6)))
        fh.write(_chunk(b"IEND", b""))


def _normalize(values: np.ndarray):
    vmin = float(values.min())
    vmax = float(values.max())
    if vmax > vmin:
        unit = (values - vmin) / (vmax - vmin)
    else:
        unit = np.full(values.shape, 0.5)
    return unit, vmin, vmax


def _apply_viridis(unit: np.ndarray) -> np.ndarray:
    pos = unit * (len(_VIRIDIS) - 1)
    lo = np.clip(np.floor(pos).astype(int), 0, len(_VIRIDIS) - 2)
    frac = (pos - lo)[..., None]
    rgb = _VIRIDIS[lo] * (1.0 - frac) + _VIRIDIS[lo + 1] * frac
    return np.round(255.0 * rgb).astype(np.uint8)


def render_heatmap(field: Field, out_path, cmap: str = "gray"):
    """Render a 2D field; returns (png_path, sidecar_path).

    The first grid axis runs along the image width, the second from the
    bottom row upward. A sidecar text file records the data range.
    """
    if field.grid.dims != 2:
        raise RenderError(f"heatmap rendering needs a 2D snapshot, got dims={field.grid.dims}")
    unit, vmin, vmax = _normalize(field.values)
    img = unit.T[::-1, :]  # rows = second axis, top row = largest coordinate
    if cmap == "gray":
        pixels = np.round(255.0 * img).astype(np.uint8)
    elif cmap == "viridis":
        pixels = _apply_viridis(img)
    else:
        raise RenderError(f"unknown colormap {cmap!r} (use 'gray' or 'viridis')")
    out_path = str(out_path)
    write_png(out_path, pixels)
    sidecar = out_path + ".minmax.txt"
    with open(sidecar, "w") as fh:
        fh.write(f"min = {vmin!r}\nmax = {vmax!r}\n")
        fh.write(f"width = {field.grid.resolution[0]}\nheight = {field.grid.resolution[1]}\n")
        fh.write(f"cmap = {cmap}\n")
    return out_path, sidecar
