"""Snapshot matrices, projection onto a basis, and the ``.opsw`` container.

Binary layout (little-endian)::

    magic    4s   b"OPSW"
    version  u32
    kind     u32  0 snapshots, 1 basis, 2 reduced trajectory, 3 reduced model
    nx, ny   u32  grid point counts (0 when not tied to a grid)
    rows     u32  row count of the data matrix
    cols     u32  column count of the data matrix
    mu       f64  parameter value (NaN when not parametric)
    n_aux    u32  length of the auxiliary vector
    n_meta   u32  byte length of the JSON metadata
    meta     n_meta bytes, UTF-8 JSON
    aux      f64[n_aux]        sample times, or singular values for a basis
    data     f64[rows * cols]  column-major
    crc      u32  CRC-32 of every preceding byte
"""

import csv
import json
import struct
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .grid import Grid2D

MAGIC = b"OPSW"
VERSION = 1
KIND_SNAPSHOTS, KIND_BASIS, KIND_REDUCED, KIND_MODEL = 0, 1, 2, 3
_HEADER = struct.Struct("<4sIIIIIIdII")


class FormatError(ValueError):
    """Raised for malformed or corrupted ``.opsw`` files."""


@dataclass(frozen=True)
class SnapshotSet:
    """Trajectory ``data[:, k] = w(times[k]; parameter)``."""

    parameter: float
    times: np.ndarray
    data: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2 or data.shape[1] != times.size:
            raise ValueError(f"data shape {data.shape} does not match {times.size} sample times")
        if times.size > 1 and not np.all(np.diff(times) > 0):
            raise ValueError("sample times must be strictly increasing")
        if not np.all(np.isfinite(data)):
            raise ValueError("snapshot data contains non-finite values")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "data", data)

    @property
    def grid(self) -> Grid2D | None:
        d = self.meta.get("grid")
        return Grid2D.from_descriptor(d) if d else None

    def subsample(self, stride: int) -> "SnapshotSet":
        return SnapshotSet(self.parameter, self.times[::stride], self.data[:, ::stride], dict(self.meta))

    def window(self, t_max: float) -> "SnapshotSet":
        keep = self.times <= t_max + 1e-9
        return SnapshotSet(self.parameter, self.times[keep], self.data[:, keep], dict(self.meta))


@dataclass(frozen=True)
class ReducedSnapshotSet:
    """Reduced coordinates ``data = V^T S`` and their time derivatives."""

    parameter: float
    times: np.ndarray
    data: np.ndarray
    ddata: np.ndarray

    def __post_init__(self):
        if np.shape(self.data) != np.shape(self.ddata):
            raise ValueError("reduced states and derivatives differ in shape")
        if np.shape(self.data)[1] != len(self.times):
            raise ValueError("reduced data does not match sample times")

    @property
    def r(self) -> int:
        return self.data.shape[0]


@dataclass
class GlobalSnapshots:
    matrix: np.ndarray
    boundaries: list[int]
    parameters: list[float]


def concat(sets) -> GlobalSnapshots:
    """Column-concatenate snapshot sets sharing grid and time axis."""
    sets = list(sets)
    if not sets:
        raise ValueError("no snapshot sets to concatenate")
    ref = sets[0]
    for s in sets[1:]:
        if s.data.shape[0] != ref.data.shape[0]:
            raise ValueError("snapshot sets have different state dimensions")
        if s.meta.get("grid") != ref.meta.get("grid"):
            raise ValueError("snapshot sets were computed on different grids")
        if s.times.shape != ref.times.shape or not np.array_equal(s.times, ref.times):
            raise ValueError("snapshot sets have different time axes")
    bounds = list(np.cumsum([0] + [s.data.shape[1] for s in sets]))
    return GlobalSnapshots(np.hstack([s.data for s in sets]), [int(b) for b in bounds],
                           [s.parameter for s in sets])


def project(snapshots: SnapshotSet, V: np.ndarray, derivatives=None, mode: str = "exact",
            rhs=None, stride: int = 1) -> ReducedSnapshotSet:
    """Project a snapshot set onto the columns of ``V``.

    Derivatives come from ``derivatives`` (full-order, N x K) when given,
    else from ``rhs`` in ``"exact"`` mode, else from finite differences of
    the reduced states in ``"fd"`` mode. ``stride`` keeps every
    ``stride``-th sample afterwards.
    """
    from .integrate import finite_difference

    V = np.asarray(V)
    if V.shape[0] != snapshots.data.shape[0]:
        raise ValueError(f"basis has {V.shape[0]} rows, snapshots have {snapshots.data.shape[0]}")
    reduced = V.T @ snapshots.data
    if derivatives is not None:
        dreduced = V.T @ derivatives
    elif mode == "exact":
        if rhs is None:
            raise ValueError("exact derivative mode needs the full-order right-hand side")
        X = snapshots.data
        dreduced = np.hstack([V.T @ rhs(X[:, k:k + 64].T).T for k in range(0, X.shape[1], 64)])
    elif mode == "fd":
        dreduced = finite_difference(reduced, float(snapshots.times[1] - snapshots.times[0]))
    else:
        raise ValueError(f"unknown derivative mode {mode!r}")
    sl = slice(None, None, stride)
    return ReducedSnapshotSet(snapshots.parameter, snapshots.times[sl], reduced[:, sl], dreduced[:, sl])


# Persistence.

def write_container(path, kind, data, aux=(), mu=float("nan"), nx=0, ny=0, meta=None):
    data = np.asarray(data, dtype="<f8")
    if data.ndim == 1:
        data = data[:, None]
    aux = np.asarray(aux, dtype="<f8").ravel()
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode()
    rows, cols = data.shape
    buf = bytearray(_HEADER.pack(MAGIC, VERSION, kind, nx, ny, rows, cols, float(mu),
                                 aux.size, len(meta_bytes)))
    buf += meta_bytes
    buf += aux.tobytes()
    buf += np.asfortranarray(data).tobytes(order="F")
    buf += struct.pack("<I", zlib.crc32(buf) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(buf))


def read_container(path, kind=None) -> dict:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size + 4:
        raise FormatError(f"{path}: file too short")
    magic, version, k, nx, ny, rows, cols, mu, n_aux, n_meta = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported format version {version}")
    if kind is not None and k != kind:
        raise FormatError(f"{path}: expected container kind {kind}, found {k}")
    expected = _HEADER.size + n_meta + 8 * n_aux + 8 * rows * cols + 4
    if len(raw) != expected:
        raise FormatError(f"{path}: size {len(raw)} does not match header ({expected})")
    (crc,) = struct.unpack_from("<I", raw, len(raw) - 4)
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != crc:
        raise FormatError(f"{path}: checksum mismatch")
    pos = _HEADER.size
    meta = json.loads(raw[pos:pos + n_meta].decode())
    pos += n_meta
    aux = np.frombuffer(raw, dtype="<f8", count=n_aux, offset=pos).astype(float)
    pos += 8 * n_aux
    data = np.frombuffer(raw, dtype="<f8", count=rows * cols, offset=pos)
    data = data.reshape((rows, cols), order="F").astype(float)
    return {"kind": k, "nx": nx, "ny": ny, "mu": mu, "meta": meta, "aux": aux, "data": data}


def save(path, snapshots: SnapshotSet) -> None:
    g = snapshots.meta.get("grid") or {}
    write_container(path, KIND_SNAPSHOTS, snapshots.data, snapshots.times, snapshots.parameter,
                    int(g.get("nx", 0)), int(g.get("ny", 0)), snapshots.meta)


def load(path) -> SnapshotSet:
    c = read_container(path, KIND_SNAPSHOTS)
    return SnapshotSet(c["mu"], c["aux"], c["data"], c["meta"])


def save_reduced(path, times, states, mu, meta=None) -> None:
    write_container(path, KIND_REDUCED, states, times, mu, meta=meta)


def load_reduced(path):
    c = read_container(path, KIND_REDUCED)
    return c["aux"], c["data"], c["mu"], c["meta"]


def export_csv(path, snapshots: SnapshotSet) -> None:
    """One row per sample time: ``t`` followed by every state entry."""
    n = snapshots.data.shape[0]
    grid = snapshots.grid
    if grid is not None and n == 3 * grid.size:
        names = [f"{var}[{j}][{i}]" for var in ("ut", "vt", "h")
                 for j in range(grid.ny) for i in range(grid.nx)]
    else:
        names = [f"w{k}" for k in range(n)]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + names)
        for k, t in enumerate(snapshots.times):
            writer.writerow([repr(float(t))] + [repr(float(x)) for x in snapshots.data[:, k]])
