"""Append-only binary proprioceptive log: 16-byte header + 104-byte records.

Little-endian. Values are stored as f32 (the simulator's f64 state is rounded
at log time); timestamps are u64 nanoseconds and must increase monotonically.
A record whose timestamp is the all-bits-set sentinel marks an aborted
episode and terminates the file.
"""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import PamsimError

DATASET_MAGIC = 0x50414D44
DATASET_VERSION = 1
_HEADER_STRUCT = struct.Struct("<IBHBB7x")
_RECORD_STRUCT = struct.Struct("<Q8f8f4f4f")
HEADER_SIZE = _HEADER_STRUCT.size
RECORD_SIZE = _RECORD_STRUCT.size
assert HEADER_SIZE == 16
assert RECORD_SIZE == 104

ERROR_MARKER_TIMESTAMP = 0xFFFF_FFFF_FFFF_FFFF


class DatasetFormatError(PamsimError):
    """File does not parse as a proprioceptive dataset."""


class DatasetTruncationWarning(UserWarning):
    """File ends in a partial record; complete records were still returned."""


@dataclass(frozen=True)
class DatasetRecord:
    timestamp_ns: int
    pressure_obs: tuple[float, ...]   # 8, f32-representable
    pressure_des: tuple[float, ...]   # 8
    joint_pos: tuple[float, ...]      # 4
    joint_vel: tuple[float, ...]      # 4

    @classmethod
    def quantize(cls, timestamp_ns, pressure_obs, pressure_des, joint_pos, joint_vel):
        """Build a record with all values rounded to f32, as the file stores them."""
        packed = _RECORD_STRUCT.pack(timestamp_ns, *pressure_obs, *pressure_des,
                                     *joint_pos, *joint_vel)
        return _unpack_record(packed)


def _unpack_record(data: bytes) -> DatasetRecord:
    fields = _RECORD_STRUCT.unpack(data)
    return DatasetRecord(
        timestamp_ns=fields[0],
        pressure_obs=tuple(fields[1:9]),
        pressure_des=tuple(fields[9:17]),
        joint_pos=tuple(fields[17:21]),
        joint_vel=tuple(fields[21:25]))


@dataclass(frozen=True)
class DatasetFile:
    sample_rate: int
    num_muscles: int
    num_joints: int
    records: tuple[DatasetRecord, ...]
    aborted: bool


class DatasetWriter:
    """Streaming single-writer append-only recorder."""

    def __init__(self, path):
        self._fh = open(path, "wb")
        self._fh.write(_HEADER_STRUCT.pack(DATASET_MAGIC, DATASET_VERSION, 500, 8, 4))
        self._last_timestamp = -1

    def append(self, record: DatasetRecord) -> None:
        self.append_raw(record.timestamp_ns, record.pressure_obs,
                        record.pressure_des, record.joint_pos, record.joint_vel)

    def append_raw(self, timestamp_ns, pressure_obs, pressure_des,
                   joint_pos, joint_vel) -> None:
        if timestamp_ns <= self._last_timestamp:
            raise ValueError(
                f"timestamps must increase: {timestamp_ns} after {self._last_timestamp}")
        self._last_timestamp = timestamp_ns
        try:
            raw = _RECORD_STRUCT.pack(timestamp_ns, *pressure_obs,
                                      *pressure_des, *joint_pos, *joint_vel)
        except OverflowError:
            # values beyond f32 range (diverging run): saturate to +-inf like
            # IEEE narrowing instead of refusing to log
            with np.errstate(over="ignore"):
                vals = [float(np.float32(v)) for chunk in
                        (pressure_obs, pressure_des, joint_pos, joint_vel)
                        for v in chunk]
            raw = _RECORD_STRUCT.pack(timestamp_ns, *vals)
        self._fh.write(raw)

    def write_error_marker(self) -> None:
        """Terminate the file after an aborted episode."""
        zeros = (0.0,) * 8
        self._fh.write(_RECORD_STRUCT.pack(ERROR_MARKER_TIMESTAMP, *zeros, *zeros,
                                           *zeros[:4], *zeros[:4]))

    def flush(self) -> None:
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False


def _check_header(data: bytes, path) -> tuple[int, int, int]:
    if len(data) < HEADER_SIZE:
        raise DatasetFormatError(f"{path}: shorter than the {HEADER_SIZE}-byte header")
    magic, version, sample_rate, num_muscles, num_joints = _HEADER_STRUCT.unpack(
        data[:HEADER_SIZE])
    if magic != DATASET_MAGIC:
        raise DatasetFormatError(f"{path}: bad magic 0x{magic:08X}")
    if version != DATASET_VERSION:
        raise DatasetFormatError(f"{path}: unsupported version {version}")
    return sample_rate, num_muscles, num_joints


def read_record_at(path, index: int) -> DatasetRecord:
    """Read a single record by index without loading the file."""
    p = Path(path)
    with open(p, "rb") as fh:
        header = fh.read(HEADER_SIZE)
        _check_header(header, p)
        fh.seek(HEADER_SIZE + index * RECORD_SIZE)
        raw = fh.read(RECORD_SIZE)
    if len(raw) != RECORD_SIZE:
        raise DatasetFormatError(f"{p}: no complete record at index {index}")
    rec = _unpack_record(raw)
    if rec.timestamp_ns == ERROR_MARKER_TIMESTAMP:
        raise DatasetFormatError(f"{p}: record {index} is the abort marker")
    return rec


_RECORD_DTYPE = np.dtype([
    ("timestamp_ns", "<u8"),
    ("pressure_obs", "<f4", (8,)),
    ("pressure_des", "<f4", (8,)),
    ("joint_pos", "<f4", (4,)),
    ("joint_vel", "<f4", (4,)),
])
assert _RECORD_DTYPE.itemsize == RECORD_SIZE


def read_dataset_arrays(path):
    """Bulk reader: the complete records as a numpy structured array.

    Returns (array, aborted). Validates header and timestamp monotonicity.
    """
    p = Path(path)
    data = p.read_bytes()
    _check_header(data, p)
    body = data[HEADER_SIZE:]
    n_complete, leftover = divmod(len(body), RECORD_SIZE)
    if leftover:
        warnings.warn(f"{p}: {leftover} trailing bytes form a truncated record",
                      DatasetTruncationWarning, stacklevel=2)
        body = body[:n_complete * RECORD_SIZE]
    arr = np.frombuffer(body, dtype=_RECORD_DTYPE)
    aborted = False
    markers = np.flatnonzero(arr["timestamp_ns"] == ERROR_MARKER_TIMESTAMP)
    if markers.size:
        arr = arr[:markers[0]]
        aborted = True
    ts = arr["timestamp_ns"]
    if ts.size > 1 and not np.all(np.diff(ts.astype(np.int64)) > 0):
        raise DatasetFormatError(f"{p}: non-monotone timestamps")
    return arr, aborted


def read_dataset(path) -> DatasetFile:
    """Read a full dataset file, validating header and timestamp monotonicity."""
    p = Path(path)
    data = p.read_bytes()
    sample_rate, num_muscles, num_joints = _check_header(data, p)
    body = data[HEADER_SIZE:]
    n_complete, leftover = divmod(len(body), RECORD_SIZE)
    if leftover:
        warnings.warn(
            f"{leftover} trailing bytes form a truncated record",
            DatasetTruncationWarning, stacklevel=2)
    records = []
    aborted = False
    last_ts = -1
    for i in range(n_complete):
        rec = _unpack_record(body[i * RECORD_SIZE:(i + 1) * RECORD_SIZE])
        if rec.timestamp_ns == ERROR_MARKER_TIMESTAMP:
            aborted = True
            break
        if rec.timestamp_ns <= last_ts:
            raise DatasetFormatError(
                f"non-monotone timestamp {rec.timestamp_ns} at record {i}")
        last_ts = rec.timestamp_ns
        records.append(rec)
    return DatasetFile(sample_rate=sample_rate, num_muscles=num_muscles,
                       num_joints=num_joints, records=tuple(records),
                       aborted=aborted)
