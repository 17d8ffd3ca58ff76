import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pamsim.dataset import (
    DatasetFormatError,
    DatasetRecord,
    DatasetTruncationWarning,
    DatasetWriter,
    HEADER_SIZE,
    RECORD_SIZE,
    read_dataset,
    read_dataset_arrays,
    read_record_at,
)

f32 = st.floats(allow_nan=False, allow_infinity=False, width=32)


def quantized_record(ts, values8a, values8b, values4a, values4b):
    return DatasetRecord.quantize(ts, values8a, values8b, values4a, values4b)


@st.composite
def record_streams(draw):
    deltas = draw(st.lists(st.integers(1, 10 ** 12), min_size=0, max_size=30))
    recs = []
    t = 0
    for d in deltas:
        t += d
        recs.append(quantized_record(
            t,
            draw(st.lists(f32, min_size=8, max_size=8)),
            draw(st.lists(f32, min_size=8, max_size=8)),
            draw(st.lists(f32, min_size=4, max_size=4)),
            draw(st.lists(f32, min_size=4, max_size=4))))
    return recs


class TestRoundTrip:
    def test_empty_file_is_16_bytes(self, tmp_path):
        path = tmp_path / "empty.dat"
        with DatasetWriter(path):
            pass
        assert path.stat().st_size == 16
        out = read_dataset(path)
        assert out.records == () and not out.aborted
        assert (out.sample_rate, out.num_muscles, out.num_joints) == (500, 8, 4)

    def test_file_size_arithmetic(self, tmp_path):
        path = tmp_path / "thousand.dat"
        with DatasetWriter(path) as w:
            for i in range(1000):
                w.append_raw(i * 2_000_000 + 1, [0.0] * 8, [0.0] * 8,
                             [0.0] * 4, [0.0] * 4)
        assert path.stat().st_size == 16 + 104 * 1000

    @given(recs=record_streams())
    @settings(max_examples=60, deadline=None)
    def test_bit_exact_roundtrip(self, recs, tmp_path_factory):
        path = tmp_path_factory.mktemp("ds") / "roundtrip.dat"
        with DatasetWriter(path) as w:
            for r in recs:
                w.append(r)
        out = read_dataset(path)
        assert list(out.records) == recs

    def test_quantize_rounds_to_f32(self):
        rec = quantized_record(5, [0.1] * 8, [0.2] * 8, [0.3] * 4, [0.4] * 4)
        assert rec.pressure_obs[0] == np.float32(0.1)
        assert rec.pressure_obs[0] != 0.1


class TestValidation:
    def _write_file(self, path, n=3):
        with DatasetWriter(path) as w:
            for i in range(n):
                w.append_raw((i + 1) * 2_000_000, [1.0] * 8, [2.0] * 8,
                             [0.5] * 4, [0.1] * 4)

    def test_bad_magic(self, tmp_path):
        path = tmp_path / "bad.dat"
        self._write_file(path)
        data = bytearray(path.read_bytes())
        data[3] ^= 0xFF
        path.write_bytes(bytes(data))
        with pytest.raises(DatasetFormatError):
            read_dataset(path)
        with pytest.raises(DatasetFormatError):
            read_dataset_arrays(path)

    def test_truncated_trailing_record_warns_and_returns_complete(self, tmp_path):
        path = tmp_path / "trunc.dat"
        self._write_file(path, n=3)
        data = path.read_bytes()
        path.write_bytes(data[:-11])
        with pytest.warns(DatasetTruncationWarning):
            out = read_dataset(path)
        assert len(out.records) == 2

    def test_writer_rejects_non_monotone(self, tmp_path):
        with DatasetWriter(tmp_path / "x.dat") as w:
            w.append_raw(10, [0.0] * 8, [0.0] * 8, [0.0] * 4, [0.0] * 4)
            with pytest.raises(ValueError):
                w.append_raw(10, [0.0] * 8, [0.0] * 8, [0.0] * 4, [0.0] * 4)

    def test_reader_rejects_non_monotone(self, tmp_path):
        path = tmp_path / "mono.dat"
        self._write_file(path, n=2)
        data = bytearray(path.read_bytes())
        # swap the two records
        a = HEADER_SIZE
        b = HEADER_SIZE + RECORD_SIZE
        data[a:b], data[b:b + RECORD_SIZE] = data[b:b + RECORD_SIZE], data[a:b]
        path.write_bytes(bytes(data))
        with pytest.raises(DatasetFormatError):
            read_dataset(path)
        with pytest.raises(DatasetFormatError):
            read_dataset_arrays(path)

    def test_error_marker_terminates(self, tmp_path):
        path = tmp_path / "abort.dat"
        with DatasetWriter(path) as w:
            w.append_raw(1, [0.0] * 8, [0.0] * 8, [0.0] * 4, [0.0] * 4)
            w.write_error_marker()
        out = read_dataset(path)
        assert out.aborted and len(out.records) == 1
        arr, aborted = read_dataset_arrays(path)
        assert aborted and len(arr) == 1

    def test_read_record_at(self, tmp_path):
        path = tmp_path / "seek.dat"
        self._write_file(path, n=5)
        rec = read_record_at(path, 3)
        assert rec.timestamp_ns == 4 * 2_000_000
        with pytest.raises(DatasetFormatError):
            read_record_at(path, 99)

    def test_arrays_reader_matches_record_reader(self, tmp_path):
        path = tmp_path / "both.dat"
        self._write_file(path, n=7)
        out = read_dataset(path)
        arr, _ = read_dataset_arrays(path)
        assert len(arr) == len(out.records)
        for i, rec in enumerate(out.records):
            assert int(arr["timestamp_ns"][i]) == rec.timestamp_ns
            assert tuple(arr["joint_pos"][i]) == rec.joint_pos
