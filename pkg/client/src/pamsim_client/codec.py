"""Wire codec for the pamsim UDP protocol, written against the byte layout.

Independent of the server implementation on purpose: agreement between the
two codecs is pinned by shared golden fixture files.

Layout (little-endian, no padding beyond the documented pad byte):

  state  (280 B): u32 magic, u8 version, u8 type=0x01, u8 mode, u8 error,
                  u64 seq, u64 timestamp_ns, 4xf64 pos, 4xf64 vel,
                  8xf64 pressure_obs, 8xf64 pressure_des, 8xf64 valve
  command (80 B): u32 magic, u8 version, u8 type=0x02, u8 mode, u8 pad=0,
                  u64 seq, 8xf64 targets
"""

from __future__ import annotations

import math
import struct
from typing import NamedTuple

MAGIC = 0x50414D32
VERSION = 1
TYPE_STATE = 0x01
TYPE_COMMAND = 0x02

MODE_PRESSURE = 0
MODE_POSITION = 1

STATE_SIZE = 280
COMMAND_SIZE = 80

_STATE = struct.Struct("<IBBBBQQ32d")
_COMMAND = struct.Struct("<IBBBBQ8d")


class ClientError(Exception):
    """Base error of the client SDK."""


class ClientProtocolError(ClientError):
    """Malformed or unexpected packet."""


class ClientTimeoutError(ClientError):
    """No state packet arrived within the configured timeout."""


class RobotState(NamedTuple):
    seq: int
    timestamp_ns: int
    mode: int
    error_code: int
    joint_pos: tuple          # 4 x rad
    joint_vel: tuple          # 4 x rad/s
    pressure_obs: tuple       # 8 x bar
    pressure_des: tuple       # 8 x bar
    valve: tuple              # 8 x normalized


def decode_state(data: bytes) -> RobotState:
    if len(data) != STATE_SIZE:
        raise ClientProtocolError(f"state packet must be {STATE_SIZE} bytes, got {len(data)}")
    magic, version, msg_type, mode, error_code, seq, ts, *values = _STATE.unpack(data)
    if magic != MAGIC:
        raise ClientProtocolError(f"bad magic 0x{magic:08X}")
    if version != VERSION:
        raise ClientProtocolError(f"unsupported version {version}")
    if msg_type != TYPE_STATE:
        raise ClientProtocolError(f"not a state packet (type 0x{msg_type:02X})")
    return RobotState(
        seq=seq, timestamp_ns=ts, mode=mode, error_code=error_code,
        joint_pos=tuple(values[0:4]), joint_vel=tuple(values[4:8]),
        pressure_obs=tuple(values[8:16]), pressure_des=tuple(values[16:24]),
        valve=tuple(values[24:32]))


def encode_state(state: RobotState) -> bytes:
    return _STATE.pack(MAGIC, VERSION, TYPE_STATE, state.mode, state.error_code,
                       state.seq, state.timestamp_ns,
                       *state.joint_pos, *state.joint_vel, *state.pressure_obs,
                       *state.pressure_des, *state.valve)


def encode_command(mode: int, seq: int, targets) -> bytes:
    targets = tuple(float(t) for t in targets)
    if len(targets) != 8:
        raise ValueError("command needs exactly 8 target slots")
    if mode not in (MODE_PRESSURE, MODE_POSITION):
        raise ValueError(f"invalid mode {mode}")
    for t in targets:
        if not math.isfinite(t):
            raise ValueError("targets must be finite")
    return _COMMAND.pack(MAGIC, VERSION, TYPE_COMMAND, mode, 0, seq, *targets)


def decode_command(data: bytes):
    """(mode, seq, targets) of a command datagram, mainly for fixture tests."""
    if len(data) != COMMAND_SIZE:
        raise ClientProtocolError(f"command packet must be {COMMAND_SIZE} bytes, got {len(data)}")
    magic, version, msg_type, mode, pad, seq, *targets = _COMMAND.unpack(data)
    if magic != MAGIC:
        raise ClientProtocolError(f"bad magic 0x{magic:08X}")
    if version != VERSION:
        raise ClientProtocolError(f"unsupported version {version}")
    if msg_type != TYPE_COMMAND:
        raise ClientProtocolError(f"not a command packet (type 0x{msg_type:02X})")
    if pad != 0:
        raise ClientProtocolError("nonzero pad byte")
    return mode, seq, tuple(targets)
