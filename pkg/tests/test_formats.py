import hashlib
import struct

import numpy as np
import pytest

from diracfdtd.formats import (SERIES_HEADER, SNAPSHOT_META_SIZE, FormatError, name_hash, read_series,
                               read_snapshot, snapshot_bytes, write_series, write_snapshot)
from diracfdtd.observables import ObservableRecord, ObservableSeries


def test_two_by_two_zero_snapshot_size(tmp_path):
    path = write_snapshot(tmp_path / "a.bin", np.zeros((2, 2)), 0.0, 1, 0, "x")
    assert SNAPSHOT_META_SIZE == 24
    assert path.stat().st_size == 16 + 8 + 32 + 24


def test_snapshot_layout_by_hand():
    data = np.array([[1.0, 2.0, 3.0]])
    raw = snapshot_bytes(data, 0.25, 2, 7, "fig8_two_solenoids")
    assert raw[:8] == b"DFDTSNAP"
    assert struct.unpack("<H", raw[8:10]) == (1,)
    assert raw[10:16] == bytes(6)
    assert struct.unpack("<II", raw[16:24]) == (1, 3)
    assert struct.unpack("<3d", raw[24:48]) == (1.0, 2.0, 3.0)
    t, ax, idx, h = struct.unpack("<dIIQ", raw[48:])
    digest = hashlib.sha256(b"fig8_two_solenoids").digest()[:8]
    assert (t, ax, idx) == (0.25, 2, 7)
    assert h == int.from_bytes(digest, "big") == name_hash("fig8_two_solenoids")


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    data = rng.standard_normal((5, 7))
    p = write_snapshot(tmp_path / "s.bin", data, 1.5, 1, 3, "demo")
    back, meta = read_snapshot(p)
    assert np.array_equal(back, data)
    assert (meta.time, meta.axis, meta.index, meta.name_hash) == (1.5, 1, 3, name_hash("demo"))
    again = write_snapshot(tmp_path / "t.bin", back, meta.time, meta.axis, meta.index, "demo")
    assert again.read_bytes() == p.read_bytes()


def test_snapshot_rejects_bad_files(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(b"NOTASNAP" + bytes(60))
    with pytest.raises(FormatError):
        read_snapshot(p)
    good = snapshot_bytes(np.zeros((2, 2)), 0.0, 0, 0, "x")
    p.write_bytes(good[:-1])
    with pytest.raises(FormatError):
        read_snapshot(p)
    with pytest.raises(FormatError):
        snapshot_bytes(np.zeros(3), 0.0, 0, 0, "x")


def test_empty_series_is_header_only(tmp_path):
    p = write_series(tmp_path / "e.csv", ObservableSeries())
    assert p.read_bytes() == (SERIES_HEADER + "\n").encode()
    assert read_series(p).shape == (0, 15)


def _record(t):
    return ObservableRecord(t=t, norm=1 - 1e-13, center=np.array([0.1, 1 / 3, -2e-300]),
                            velocity=np.array([0.7, 0.0, -1e-17]), energy=0.7362199,
                            p_mech=np.array([0.53, 0.0, 1e-9]), p_canon=np.array([0.5, 2 / 7, 0.0]))


def test_series_round_trip_exact(tmp_path):
    series = ObservableSeries([_record(0.0), _record(1e-4)])
    p = write_series(tmp_path / "s.csv", series)
    raw = p.read_bytes()
    assert b"\r" not in raw and raw.endswith(b"\n")
    arr = read_series(p)
    assert arr.shape == (2, 15)
    assert arr[0, 3] == 1 / 3 and arr[1, 13] == 2 / 7 and arr[0, 4] == -2e-300
    p2 = write_series(tmp_path / "s2.csv", arr.tolist())
    assert p2.read_bytes() == raw


def test_series_errors(tmp_path):
    with pytest.raises(FormatError):
        write_series(tmp_path / "x.csv", [[1.0, 2.0]])
    p = tmp_path / "y.csv"
    p.write_text("t,x\n1,2\n")
    with pytest.raises(FormatError):
        read_series(p)
