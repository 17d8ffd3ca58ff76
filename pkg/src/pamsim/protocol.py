"""Bit-exact wire messages of the PLC-emulation UDP protocol.

Little-endian, fixed size: 280-byte state packets, 80-byte command packets.
Decoding is total: arbitrary input bytes raise typed ProtocolError subclasses
and nothing else.

Muscle channel order everywhere: joint-major, agonist first, i.e.
[j0 agonist, j0 antagonist, j1 agonist, ...].
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass

from .errors import PamsimError

MAGIC = 0x50414D32
VERSION = 1
MSG_TYPE_STATE = 0x01
MSG_TYPE_COMMAND = 0x02

MODE_PRESSURE = 0
MODE_POSITION = 1

ERROR_OK = 0
ERROR_WATCHDOG = 1
ERROR_MODE_MISMATCH = 2
ERROR_INTEGRATION_DIVERGED = 3
ERROR_BAD_COMMAND = 4  # malformed datagram (not in the base registry)

_STATE_STRUCT = struct.Struct("<IBBBBQQ4d4d8d8d8d")
_COMMAND_STRUCT = struct.Struct("<IBBBBQ8d")

STATE_PACKET_SIZE = _STATE_STRUCT.size
COMMAND_PACKET_SIZE = _COMMAND_STRUCT.size
assert STATE_PACKET_SIZE == 280
assert COMMAND_PACKET_SIZE == 80


class ProtocolError(PamsimError):
    """Base for all wire decode failures."""


class FramingError(ProtocolError):
    """Datagram has the wrong length."""


class MagicError(ProtocolError):
    """Datagram does not start with the protocol magic."""


class VersionError(ProtocolError):
    """Unsupported protocol version."""


class PayloadError(ProtocolError):
    """Structurally valid datagram with inadmissible field values."""


class ModeError(ProtocolError):
    """Command mode disagrees with the session control mode."""


@dataclass(frozen=True)
class StatePacket:
    mode: int
    error_code: int
    seq: int
    timestamp_ns: int
    joint_pos: tuple[float, ...]      # 4 x rad
    joint_vel: tuple[float, ...]      # 4 x rad/s
    pressure_obs: tuple[float, ...]   # 8 x bar
    pressure_des: tuple[float, ...]   # 8 x bar
    valve: tuple[float, ...]          # 8 x normalized


@dataclass(frozen=True)
class CommandPacket:
    mode: int                         # 0 = pressure, 1 = position
    seq: int
    targets: tuple[float, ...]        # 8 x f64


def encode_state(pkt: StatePacket) -> bytes:
    if len(pkt.joint_pos) != 4 or len(pkt.joint_vel) != 4:
        raise ValueError("state packet needs 4 joint positions and velocities")
    if len(pkt.pressure_obs) != 8 or len(pkt.pressure_des) != 8 or len(pkt.valve) != 8:
        raise ValueError("state packet needs 8-wide pressure and valve channels")
    return _STATE_STRUCT.pack(
        MAGIC, VERSION, MSG_TYPE_STATE, pkt.mode & 0xFF, pkt.error_code & 0xFF,
        pkt.seq, pkt.timestamp_ns,
        *pkt.joint_pos, *pkt.joint_vel,
        *pkt.pressure_obs, *pkt.pressure_des, *pkt.valve)


def decode_state(data: bytes) -> StatePacket:
    if len(data) != STATE_PACKET_SIZE:
        raise FramingError(f"state packet must be {STATE_PACKET_SIZE} bytes, got {len(data)}")
    fields = _STATE_STRUCT.unpack(data)
    magic, version, msg_type, mode, error_code, seq, timestamp = fields[:7]
    if magic != MAGIC:
        raise MagicError(f"bad magic 0x{magic:08X}")
    if version != VERSION:
        raise VersionError(f"unsupported version {version}")
    if msg_type != MSG_TYPE_STATE:
        raise PayloadError(f"unexpected message type 0x{msg_type:02X}")
    rest = fields[7:]
    return StatePacket(
        mode=mode, error_code=error_code, seq=seq, timestamp_ns=timestamp,
        joint_pos=tuple(rest[0:4]), joint_vel=tuple(rest[4:8]),
        pressure_obs=tuple(rest[8:16]), pressure_des=tuple(rest[16:24]),
        valve=tuple(rest[24:32]))


def encode_command(pkt: CommandPacket) -> bytes:
    if len(pkt.targets) != 8:
        raise ValueError("command packet needs 8 targets")
    if pkt.mode not in (MODE_PRESSURE, MODE_POSITION):
        raise ValueError(f"invalid command mode {pkt.mode}")
    return _COMMAND_STRUCT.pack(MAGIC, VERSION, MSG_TYPE_COMMAND, pkt.mode, 0,
                                pkt.seq, *pkt.targets)


def decode_command(data: bytes, session_mode: int | None = None) -> CommandPacket:
    """Decode and validate a command datagram.

    If session_mode is given, a structurally valid command in the wrong mode
    raises ModeError (reported by the service as error_code 2).
    """
    if len(data) != COMMAND_PACKET_SIZE:
        raise FramingError(f"command packet must be {COMMAND_PACKET_SIZE} bytes, got {len(data)}")
    fields = _COMMAND_STRUCT.unpack(data)
    magic, version, msg_type, mode, pad, seq = fields[:6]
    targets = fields[6:]
    if magic != MAGIC:
        raise MagicError(f"bad magic 0x{magic:08X}")
    if version != VERSION:
        raise VersionError(f"unsupported version {version}")
    if msg_type != MSG_TYPE_COMMAND:
        raise PayloadError(f"unexpected message type 0x{msg_type:02X}")
    if mode not in (MODE_PRESSURE, MODE_POSITION):
        raise PayloadError(f"unknown command mode {mode}")
    if pad != 0:
        raise PayloadError(f"nonzero pad byte {pad}")
    for t in targets:
        if not math.isfinite(t):
            raise PayloadError("non-finite command target")
    if mode == MODE_POSITION and any(t != 0.0 for t in targets[4:]):
        raise PayloadError("position command with nonzero tail targets")
    if session_mode is not None and mode != session_mode:
        raise ModeError(f"command mode {mode} != session mode {session_mode}")
    return CommandPacket(mode=mode, seq=seq, targets=tuple(targets))
