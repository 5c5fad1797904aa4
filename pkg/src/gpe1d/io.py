"""Observable CSV files, GPF1 field snapshots and density heatmaps.

GPF1 layout (little-endian)::

    offset  size  field
    0       4     magic  b"GPF1"
    4       4     version (uint32, currently 1)
    8       8     n_points (uint64)
    16      8     length (float64)
    24      8     time (float64)
    32      8     lambda at that time (float64)
    40      16*n  (re, im) float64 pairs

Heatmaps are written as a CSV density matrix (rows = times, columns =
positions, full precision) and an 8-bit binary PGM (P5) image, with the
grey-level mapping bounds in a JSON sidecar.
"""
from __future__ import annotations

import json
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import GridMismatchError, OutputError
from .grid import ComplexField, Grid1D
from .model import ObservableRecord

__all__ = [
    "SnapshotHeader",
    "OBSERVABLE_COLUMNS",
    "write_observables",
    "read_observables",
    "write_snapshot",
    "read_snapshot",
    "CSVObservableSink",
    "SnapshotDirSink",
    "DensitySink",
    "emit_heatmap",
    "read_pgm",
]

MAGIC = b"GPF1"
VERSION = 1
_HEADER = struct.Struct("<4sIQddd")
OBSERVABLE_COLUMNS = ObservableRecord.field_names()


def _fmt(x: float) -> str:
    return repr(float(x))


@dataclass(frozen=True)
class SnapshotHeader:
    n_points: int
    length: float
    time: float
    lambda_at_time: float
    magic: bytes = MAGIC
    version: int = VERSION

    def pack(self) -> bytes:
        return _HEADER.pack(self.magic, self.version, self.n_points, self.length,
                            self.time, self.lambda_at_time)

    @classmethod
    def unpack(cls, data: bytes) -> "SnapshotHeader":
        if len(data) < _HEADER.size:
            raise ValueError("truncated GPF1 header")
        magic, version, n, length, t, lam = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}, expected {MAGIC!r}")
        return cls(n, length, t, lam, magic, version)


def write_observables(records, path) -> None:
    """CSV with header ``t,norm,free_energy,mu_mean,mu_var,dissipation_rate,ground_mode_occ``."""
    try:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(OBSERVABLE_COLUMNS) + "\n")
            for r in records:
                fh.write(",".join(_fmt(v) for v in r.as_tuple()) + "\n")
    except OSError as exc:
        raise OutputError(f"writing {path} failed: {exc}") from exc


def read_observables(path) -> list[ObservableRecord]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header != OBSERVABLE_COLUMNS:
            raise ValueError(f"unexpected observable header {header}")
        return [ObservableRecord(*map(float, line.split(","))) for line in fh if line.strip()]


def write_snapshot(psi: ComplexField, header: SnapshotHeader | None = None, path=None,
                   time: float = 0.0, lam: float = 0.0) -> None:
    if path is None:
        raise ValueError("path is required")
    g = psi.grid
    if header is None:
        header = SnapshotHeader(g.n_points, g.length, time, lam)
    if header.n_points != g.n_points or header.length != g.length:
        raise GridMismatchError("snapshot header does not match the field's grid")
    payload = np.ascontiguousarray(psi.values, dtype="<c16").tobytes()
    try:
        with open(path, "wb") as fh:
            fh.write(header.pack())
            fh.write(payload)
    except OSError as exc:
        raise OutputError(f"writing {path} failed: {exc}") from exc


def read_snapshot(path) -> tuple[ComplexField, SnapshotHeader]:
    data = Path(path).read_bytes()
    header = SnapshotHeader.unpack(data)
    expected = _HEADER.size + 16 * header.n_points
    if len(data) != expected:
        raise ValueError(f"GPF1 file has {len(data)} bytes, expected {expected}")
    values = np.frombuffer(data, dtype="<c16", offset=_HEADER.size)
    return ComplexField(Grid1D(header.n_points, header.length), values), header


class CSVObservableSink:
    """Streams observable records to a CSV file as they arrive."""

    def __init__(self, path):
        self.path = Path(path)
        try:
            self._fh = open(self.path, "w", newline="")
            self._fh.write(",".join(OBSERVABLE_COLUMNS) + "\n")
        except OSError as exc:
            raise OutputError(f"cannot open {self.path}: {exc}") from exc
        self.count = 0

    def observe(self, record):
        self._fh.write(",".join(_fmt(v) for v in record.as_tuple()) + "\n")
        self.count += 1

    def close(self):
        if not self._fh.closed:
            self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SnapshotDirSink:
    """Writes each snapshot to ``directory/snap_NNNNNN.gpf``."""

    def __init__(self, directory, prefix: str = "snap"):
        self.directory = Path(directory)
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
        except OSError as exc:
            raise OutputError(f"cannot create {self.directory}: {exc}") from exc
        self.prefix = prefix
        self.paths = []

    def snapshot(self, t, lam, psi):
        path = self.directory / f"{self.prefix}_{len(self.paths):06d}.gpf"
        write_snapshot(psi, path=path, time=t, lam=lam)
        self.paths.append(path)


class DensitySink:
    """Keeps ``(t, lam, field)`` snapshots in memory for heatmaps and tracking."""

    def __init__(self):
        self.snapshots = []

    def snapshot(self, t, lam, psi):
        self.snapshots.append((t, lam, psi))


def emit_heatmap(snapshots, path) -> dict:
    """Write ``<path>.csv``, ``<path>.pgm`` and ``<path>.json`` from snapshots.

    ``snapshots`` holds ``(t, lam, field)`` triples or bare fields.  Grey
    levels map density linearly, min to 0 and max to 255; a constant density
    maps to 128.  Returns the sidecar metadata.
    """
    items = [s if isinstance(s, tuple) else (float(i), 0.0, s) for i, s in enumerate(snapshots)]
    if len(items) < 2:
        raise ValueError("a heatmap needs at least two snapshots")
    grid = items[0][2].grid
    for _, _, psi in items:
        if psi.grid != grid:
            raise GridMismatchError("snapshots on different grids")
    times = np.array([t for t, _, _ in items])
    rho = np.array([np.abs(psi.values) ** 2 for _, _, psi in items])
    lo, hi = float(rho.min()), float(rho.max())
    if hi > lo:
        gray = np.rint(255.0 * (rho - lo) / (hi - lo)).astype(np.uint8)
    else:
        gray = np.full(rho.shape, 128, dtype=np.uint8)
    base = Path(path)
    meta = {
        "rows": "time",
        "columns": "position",
        "n_times": int(rho.shape[0]),
        "n_points": grid.n_points,
        "length": grid.length,
        "spacing": grid.spacing,
        "density_min": lo,
        "density_max": hi,
        "gray_min": 0 if hi > lo else 128,
        "gray_max": 255 if hi > lo else 128,
        "times": [float(t) for t in times],
        "lambdas": [float(l) for _, l, _ in items],
    }
    try:
        with open(base.with_suffix(".csv"), "w") as fh:
            for row in rho:
                fh.write(",".join(_fmt(v) for v in row) + "\n")
        with open(base.with_suffix(".pgm"), "wb") as fh:
            fh.write(f"P5\n{rho.shape[1]} {rho.shape[0]}\n255\n".encode("ascii"))
            fh.write(gray.tobytes())
        with open(base.with_suffix(".json"), "w") as fh:
            json.dump(meta, fh, indent=2)
    except OSError as exc:
        raise OutputError(f"writing heatmap {base} failed: {exc}") from exc
    return meta


def read_pgm(path) -> np.ndarray:
    """Read an 8-bit binary PGM written by :func:`emit_heatmap`."""
    data = Path(path).read_bytes()
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a P5 graymap")
    width, height = map(int, parts[1].split())
    if int(parts[2]) != 255:
        raise ValueError("only 8-bit graymaps are supported")
    return np.frombuffer(parts[3], dtype=np.uint8, count=width * height).reshape(height, width)
