"""Versioned binary dumps of path and sheet samples.

Layout (all little-endian):
    magic   4 bytes  b"AFSM"
    version u16      currently 1
    kind    u8       1 = path, 2 = sheet
    family  1 byte   ASCII root-system family letter
    rank    u8
    s_steps u32
    t_steps u32      0 for paths
    seed    u64      first integer found in the sample's provenance, else 0
    sigma   f64      path variance; 0 for sheets
    [t_grid t_steps * f64]            sheets only
    payload u64 count, then count f64  row-major increments

Stability: the format is append-only within a major version; readers reject
unknown magic/version/kind and mismatched root systems.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import DomainError
from .groupsim import PathSample, SheetSample
from .rootsys import RootSystem

_MAGIC = b"AFSM"
_VERSION = 1
_HEADER = struct.Struct("<4sHBcBIIQd")
_KIND_PATH = 1
_KIND_SHEET = 2


def _seed_of(provenance: tuple) -> int:
    for item in provenance:
        if isinstance(item, (int, np.integer)):
            return int(item) & ((1 << 64) - 1)
    return 0


def _write_payload(fh, arr: np.ndarray) -> None:
    flat = np.ascontiguousarray(arr, dtype="<f8").ravel()
    fh.write(struct.pack("<Q", flat.size))
    fh.write(flat.tobytes())


def _read_exact(fh, count: int) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise DomainError("truncated sample file")
    return data


def _read_payload(fh) -> np.ndarray:
    (count,) = struct.unpack("<Q", _read_exact(fh, 8))
    return np.frombuffer(_read_exact(fh, 8 * count), dtype="<f8").astype(float)


def save_path(rs: RootSystem, path: PathSample, filename: str) -> None:
    """Write one PathSample to a binary file."""
    with open(filename, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC,
                _VERSION,
                _KIND_PATH,
                rs.family.encode(),
                rs.rank,
                path.steps,
                0,
                _seed_of(path.provenance),
                path.sigma,
            )
        )
        _write_payload(fh, path.increments)


def save_sheet(rs: RootSystem, sheet: SheetSample, filename: str) -> None:
    """Write one SheetSample to a binary file."""
    with open(filename, "wb") as fh:
        fh.write(
            _HEADER.pack(
                _MAGIC,
                _VERSION,
                _KIND_SHEET,
                rs.family.encode(),
                rs.rank,
                sheet.s_steps,
                sheet.t_steps,
                _seed_of(sheet.provenance),
                0.0,
            )
        )
        fh.write(np.ascontiguousarray(sheet.t_grid, dtype="<f8").tobytes())
        _write_payload(fh, sheet.increments)


def _read_header(fh, rs: RootSystem):
    magic, version, kind, family, rank, s_steps, t_steps, seed, sigma = _HEADER.unpack(
        _read_exact(fh, _HEADER.size)
    )
    if magic != _MAGIC:
        raise DomainError("not a sample file (bad magic)")
    if version != _VERSION:
        raise DomainError(f"unsupported sample file version {version}")
    if family.decode() != rs.family or rank != rs.rank:
        raise DomainError(
            f"sample file is for {family.decode()}{rank}, "
            f"not {rs.family}{rs.rank}"
        )
    return kind, s_steps, t_steps, seed, sigma


def load_path(rs: RootSystem, filename: str) -> PathSample:
    """Read a PathSample written by save_path; validates the root system."""
    with open(filename, "rb") as fh:
        kind, s_steps, t_steps, seed, sigma = _read_header(fh, rs)
        if kind != _KIND_PATH:
            raise DomainError("sample file holds a sheet, not a path")
        data = _read_payload(fh)
    if data.size != s_steps * rs.dim_algebra:
        raise DomainError("payload size does not match the header")
    return PathSample(
        sigma=sigma,
        steps=s_steps,
        increments=data.reshape(s_steps, rs.dim_algebra),
        provenance=(seed, "loaded"),
    )


def load_sheet(rs: RootSystem, filename: str) -> SheetSample:
    """Read a SheetSample written by save_sheet; validates the root system."""
    with open(filename, "rb") as fh:
        kind, s_steps, t_steps, seed, _sigma = _read_header(fh, rs)
        if kind != _KIND_SHEET:
            raise DomainError("sample file holds a path, not a sheet")
        t_grid = np.frombuffer(_read_exact(fh, 8 * t_steps), dtype="<f8").astype(float)
        data = _read_payload(fh)
    if data.size != t_steps * s_steps * rs.dim_algebra:
        raise DomainError("payload size does not match the header")
    return SheetSample(
        s_steps=s_steps,
        t_grid=t_grid,
        increments=data.reshape(t_steps, s_steps, rs.dim_algebra),
        provenance=(seed, "loaded"),
    )
