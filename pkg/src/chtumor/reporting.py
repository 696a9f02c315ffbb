"""CSV and key-value report files: fixed column orders, repr-exact floats.

Every file starts with a comment line carrying the command name and the run
seed, so outputs are self-describing and reproducible byte for byte.
"""

from __future__ import annotations

from .solver import ENERGY_COLUMNS


class ReportError(ValueError):
    """Malformed report file."""


def _fmt(v):
    return repr(float(v))


class EnergyCSV:
    """Streaming writer for the per-step energy table."""

    def __init__(self, path, seed=None, command="simulate", extra=None):
        self._fh = open(path, "w")
        if seed is not None:
            tail = f" {extra}" if extra else ""
            self._fh.write(f"# chtumor {command} seed={seed}{tail}\n")
        self._fh.write(",".join(ENERGY_COLUMNS) + "\n")

    def write_row(self, row):
        if len(row) != len(ENERGY_COLUMNS):
            raise ReportError(f"row has {len(row)} fields, expected {len(ENERGY_COLUMNS)}")
        self._fh.write(",".join(_fmt(v) for v in row) + "\n")

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def write_energy_csv_rows(path, rows, seed=None, command="simulate"):
    with EnergyCSV(path, seed=seed, command=command) as out:
        for row in rows:
            out.write_row(row)


def read_energy_csv(path):
    """Rows of an energy CSV as dicts of floats (comment lines skipped)."""
    rows = []
    with open(path) as fh:
        header = None
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split(",")
            if header is None:
                header = parts
                missing = [c for c in ENERGY_COLUMNS if c not in header]
                if missing:
                    raise ReportError(f"{path}:{lineno}: missing columns {missing}")
                continue
            if len(parts) != len(header):
                raise ReportError(f"{path}:{lineno}: expected {len(header)} fields, got {len(parts)}")
            try:
                rows.append({k: float(v) for k, v in zip(header, parts)})
            except ValueError as exc:
                raise ReportError(f"{path}:{lineno}: {exc}") from None
    if header is None:
        raise ReportError(f"{path}: empty file")
    return rows


def write_kv_summary(path, pairs, seed=None, command=None):
    """Plain `key = value` summary file."""
    with open(path, "w") as fh:
        if seed is not None:
            fh.write(f"# chtumor {command or 'summary'} seed={seed}\n")
        for k, v in pairs.items():
            if isinstance(v, float):
                fh.write(f"{k} = {v!r}\n")
            else:
                fh.write(f"{k} = {v}\n")


def write_table_csv(path, columns, rows, seed=None, command=None):
    """Generic CSV with a fixed column list; floats via repr, rest via str."""
    with open(path, "w") as fh:
        if seed is not None:
            fh.write(f"# chtumor {command or 'table'} seed={seed}\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            cells = [_fmt(v) if isinstance(v, float) else str(v) for v in row]
            fh.write(",".join(cells) + "\n")
