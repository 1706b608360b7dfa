"""Binary round-trips for path and sheet samples."""

import struct

import numpy as np
import pytest

from affsim.errors import DomainError
from affsim.groupsim import sample_bm_path, sample_sheet
from affsim.rng import stream
from affsim.sampleio import load_path, load_sheet, save_path, save_sheet


def test_path_round_trip(rs1, tmp_path):
    path = sample_bm_path(rs1, 0.7, 32, stream(1, "io"), provenance=(1, "io"))
    fn = tmp_path / "path.bin"
    save_path(rs1, path, str(fn))
    back = load_path(rs1, str(fn))
    assert back.sigma == path.sigma
    assert back.steps == path.steps
    np.testing.assert_array_equal(back.increments, path.increments)
    assert back.provenance == (1, "loaded")


def test_sheet_round_trip(rs2, tmp_path):
    sheet = sample_sheet(rs2, 8, np.array([0.5, 1.25]), stream(2, "io"), provenance=(2,))
    fn = tmp_path / "sheet.bin"
    save_sheet(rs2, sheet, str(fn))
    back = load_sheet(rs2, str(fn))
    assert back.s_steps == sheet.s_steps
    np.testing.assert_array_equal(back.t_grid, sheet.t_grid)
    np.testing.assert_array_equal(back.increments, sheet.increments)


def test_kind_mismatch_rejected(rs1, tmp_path):
    path = sample_bm_path(rs1, 1.0, 4, stream(3, "io"))
    fn = tmp_path / "path.bin"
    save_path(rs1, path, str(fn))
    with pytest.raises(DomainError, match="path"):
        load_sheet(rs1, str(fn))


def test_rootsystem_mismatch_rejected(rs1, rs2, tmp_path):
    path = sample_bm_path(rs2, 1.0, 4, stream(4, "io"))
    fn = tmp_path / "path.bin"
    save_path(rs2, path, str(fn))
    with pytest.raises(DomainError, match="A2"):
        load_path(rs1, str(fn))


def test_bad_magic_rejected(rs1, tmp_path):
    fn = tmp_path / "junk.bin"
    fn.write_bytes(b"NOPE" + b"\x00" * 64)
    with pytest.raises(DomainError, match="magic"):
        load_path(rs1, str(fn))


def test_unknown_version_rejected(rs1, tmp_path):
    path = sample_bm_path(rs1, 1.0, 4, stream(5, "io"))
    fn = tmp_path / "path.bin"
    save_path(rs1, path, str(fn))
    raw = bytearray(fn.read_bytes())
    raw[4:6] = struct.pack("<H", 99)
    fn.write_bytes(bytes(raw))
    with pytest.raises(DomainError, match="version"):
        load_path(rs1, str(fn))


def test_truncated_file_rejected(rs1, tmp_path):
    path = sample_bm_path(rs1, 1.0, 16, stream(6, "io"))
    fn = tmp_path / "path.bin"
    save_path(rs1, path, str(fn))
    raw = fn.read_bytes()
    fn.write_bytes(raw[: len(raw) - 9])
    with pytest.raises(DomainError, match="truncated"):
        load_path(rs1, str(fn))
