"""Blocking step(action) -> state interface against a running service."""

from __future__ import annotations

import socket
import time

from .codec import (
    MODE_POSITION,
    MODE_PRESSURE,
    ClientProtocolError,
    ClientTimeoutError,
    RobotState,
    decode_state,
    encode_command,
)

_ACTION_LENGTH = {MODE_PRESSURE: 8, MODE_POSITION: 4}


class ClientSession:
    """One UDP session; the control mode is fixed at construction.

    Not thread-safe: one session per socket, one caller at a time. Multiple
    sessions against the same server are fine.
    """

    def __init__(self, address: tuple[str, int], mode: str | int = "pressure",
                 timeout: float = 1.0):
        if mode in ("pressure", MODE_PRESSURE):
            self.mode = MODE_PRESSURE
        elif mode in ("position", MODE_POSITION):
            self.mode = MODE_POSITION
        else:
            raise ValueError(f"unknown mode {mode!r}")
        self.address = (str(address[0]), int(address[1]))
        self.timeout = float(timeout)
        self.last_seq = 0
        self._send_seq = 0
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.settimeout(self.timeout)
        self._sock.connect(self.address)

    def step(self, action) -> RobotState:
        """Send one command; return the next state packet with a newer seq."""
        action = tuple(float(a) for a in action)
        expected = _ACTION_LENGTH[self.mode]
        if len(action) != expected:
            raise ValueError(
                f"{'pressure' if self.mode == MODE_PRESSURE else 'position'} "
                f"mode needs {expected} values, got {len(action)}")
        targets = action if self.mode == MODE_PRESSURE else action + (0.0,) * 4
        self._send_seq += 1
        self._sock.send(encode_command(self.mode, self._send_seq, targets))
        return self._await_newer_state()

    def _await_newer_state(self) -> RobotState:
        deadline = time.monotonic() + self.timeout
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise ClientTimeoutError(f"no state packet within {self.timeout}s")
            self._sock.settimeout(remaining)
            try:
                data = self._sock.recv(4096)
            except socket.timeout:
                raise ClientTimeoutError(
                    f"no state packet within {self.timeout}s") from None
            except ConnectionRefusedError:
                # ICMP port-unreachable from an absent server: keep waiting
                # until the timeout budget runs out
                continue
            state = decode_state(data)
            if state.seq <= self.last_seq:
                raise ClientProtocolError(
                    f"sequence regressed: got {state.seq} after {self.last_seq}")
            self.last_seq = state.seq
            return state

    def close(self) -> None:
        self._sock.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
        return False
