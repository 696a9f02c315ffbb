"""Field snapshot files and CSV export.

Snapshot layout (little-endian): 8-byte magic ``CHTFLD01``, int32 dims,
``dims`` float64 lengths, ``dims`` int32 resolution, then the row-major
float64 values.
"""

from __future__ import annotations

import struct

import numpy as np

from .spectral import Field, Grid

MAGIC = b"CHTFLD01"


class SnapshotError(ValueError):
    """Malformed snapshot file."""


def save_snapshot(field: Field, path) -> None:
    g = field.grid
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<i", g.dims))
        fh.write(struct.pack(f"<{g.dims}d", *g.lengths))
        fh.write(struct.pack(f"<{g.dims}i", *g.resolution))
        fh.write(np.ascontiguousarray(field.values, dtype="<f8").tobytes())


def load_snapshot(path) -> Field:
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise SnapshotError(f"bad magic {magic!r} in {path}")
        (dims,) = struct.unpack("<i", fh.read(4))
        if dims not in (1, 2, 3):
            raise SnapshotError(f"bad dims {dims} in {path}")
        lengths = struct.unpack(f"<{dims}d", fh.read(8 * dims))
        resolution = struct.unpack(f"<{dims}i", fh.read(4 * dims))
        grid = Grid(dims, lengths, resolution)
        raw = fh.read(8 * grid.npoints)
        if len(raw) != 8 * grid.npoints:
            raise SnapshotError(f"truncated snapshot {path}")
        values = np.frombuffer(raw, dtype="<f8").reshape(grid.shape)
    return Field(grid, values.astype(np.float64))


def export_csv(field: Field, path) -> None:
    """Index columns then value, row-major point order."""
    g = field.grid
    cols = ["i", "j", "k"][: g.dims]
    with open(path, "w") as fh:
        fh.write(",".join(cols + ["value"]) + "\n")
        for idx, v in zip(np.ndindex(*g.shape), field.values.ravel()):
            fh.write(",".join(str(i) for i in idx) + f",{float(v)!r}\n")
