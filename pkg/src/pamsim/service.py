"""PLC-emulation control service.

A transport-free core applies latest-command-wins semantics, steps the
simulator once per tick and emits one encoded state packet per tick; the
watchdog counts ticks (250 ticks = 500 ms at the 500 Hz rate), so scripted
replays reproduce it deterministically. Transports wrap the core: a UDP
server (real-time paced or lockstep) and an offline script runner.
"""

from __future__ import annotations

import logging
import select
import socket
import threading
import time
from dataclasses import dataclass

import numpy as np

from . import protocol
from .engine import ControlMode, Session, TICK_DT
from .errors import IntegrationDivergedError, PamsimError

log = logging.getLogger(__name__)


class ScriptError(PamsimError):
    """Malformed command script."""


class ServiceCore:
    """Latest-command mailbox plus the tick loop body.

    Concurrency contract: submit_* and tick may be called from different
    threads only under external ordering (the UDP server serializes them);
    the core itself is plain sequential state.
    """

    def __init__(self, session: Session, watchdog_ticks: int | None = None):
        self.session = session
        self.mode = session.mode
        self.watchdog_ticks = (watchdog_ticks if watchdog_ticks is not None
                               else session.config.watchdog_ticks)
        self.seq = 0
        self._targets: np.ndarray | None = None
        self._ticks_since_command = 0
        self._pending_reject = 0
        self._halted = False

    @property
    def halted(self) -> bool:
        return self._halted

    @property
    def watchdog_active(self) -> bool:
        return self._ticks_since_command >= self.watchdog_ticks

    def submit_datagram(self, data: bytes) -> protocol.CommandPacket | None:
        """Decode one datagram; failures are remembered for the next packet."""
        try:
            cmd = protocol.decode_command(data, session_mode=int(self.mode))
        except protocol.ModeError:
            self._pending_reject = protocol.ERROR_MODE_MISMATCH
            return None
        except protocol.ProtocolError:
            self._pending_reject = protocol.ERROR_BAD_COMMAND
            return None
        self.submit_command(cmd)
        return cmd

    def submit_command(self, cmd: protocol.CommandPacket) -> None:
        if cmd.mode != int(self.mode):
            self._pending_reject = protocol.ERROR_MODE_MISMATCH
            return
        if self.mode == ControlMode.PRESSURE_TARGET:
            self._targets = np.asarray(cmd.targets, dtype=np.float64)
        else:
            self._targets = np.asarray(cmd.targets[:4], dtype=np.float64)
        self._ticks_since_command = 0

    def tick(self) -> bytes:
        """Advance one tick and return the encoded state packet."""
        watchdog = self.watchdog_active
        if not self._halted:
            try:
                self.session.step(None if watchdog else self._targets)
            except IntegrationDivergedError:
                self._halted = True
        self._ticks_since_command += 1
        if self._halted:
            error = protocol.ERROR_INTEGRATION_DIVERGED
        elif self._pending_reject:
            error = self._pending_reject
        elif watchdog:
            error = protocol.ERROR_WATCHDOG
        else:
            error = protocol.ERROR_OK
        self._pending_reject = 0
        self.seq += 1
        # direct pack of the hot path; byte-identical to
        # encode_state(self.state_packet(error)) (covered by a test)
        s = self.session
        m = s.config.muscle
        span = m.p_max - m.p_min
        valve = (s.p_des - s.p_obs)
        valve /= span
        np.clip(valve, -1.0, 1.0, out=valve)
        return protocol._STATE_STRUCT.pack(
            protocol.MAGIC, protocol.VERSION, protocol.MSG_TYPE_STATE,
            int(self.mode), error, self.seq, s.time_ns,
            *s.q.tolist(), *s.v.tolist(), *s.p_obs.tolist(),
            *s.p_des.tolist(), *valve.tolist())

    def state_packet(self, error_code: int) -> protocol.StatePacket:
        s = self.session
        return protocol.StatePacket(
            mode=int(self.mode), error_code=error_code, seq=self.seq,
            timestamp_ns=s.time_ns,
            joint_pos=tuple(s.q), joint_vel=tuple(s.v),
            pressure_obs=tuple(s.p_obs), pressure_des=tuple(s.p_des),
            valve=tuple(s.valve_positions()))


# ---------------------------------------------------------------------------
# scripted replay

@dataclass(frozen=True)
class ScriptEntry:
    tick: int
    command: protocol.CommandPacket


def parse_script(text: str) -> list[ScriptEntry]:
    """Tick-stamped command list.

    Line format: `<tick> pressure p0 .. p7` or `<tick> position q0 .. q3`,
    '#' comments. A command stamped T is submitted before tick T runs; two
    commands on the same tick resolve latest-wins by line order.
    """
    entries = []
    seq = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            tick = int(parts[0])
            kind = parts[1]
            values = [float(x) for x in parts[2:]]
        except (IndexError, ValueError):
            raise ScriptError(f"line {lineno}: expected '<tick> <mode> <targets...>'") from None
        if tick < 0:
            raise ScriptError(f"line {lineno}: negative tick")
        seq += 1
        if kind == "pressure":
            if len(values) != 8:
                raise ScriptError(f"line {lineno}: pressure command needs 8 targets")
            cmd = protocol.CommandPacket(mode=protocol.MODE_PRESSURE, seq=seq,
                                         targets=tuple(values))
        elif kind == "position":
            if len(values) != 4:
                raise ScriptError(f"line {lineno}: position command needs 4 targets")
            cmd = protocol.CommandPacket(mode=protocol.MODE_POSITION, seq=seq,
                                         targets=tuple(values) + (0.0,) * 4)
        else:
            raise ScriptError(f"line {lineno}: unknown mode {kind!r}")
        entries.append(ScriptEntry(tick=tick, command=cmd))
    entries.sort(key=lambda e: (e.tick, e.command.seq))
    return entries


def run_script(core: ServiceCore, entries, n_ticks: int, sink=None) -> int:
    """Deterministic offline replay: emit one packet per tick into sink.

    Returns the number of ticks run. `sink` is any object with write(bytes),
    or None to discard packets (throughput measurements).
    """
    by_tick: dict[int, list[protocol.CommandPacket]] = {}
    for e in entries:
        by_tick.setdefault(e.tick, []).append(e.command)
    for t in range(n_ticks):
        for cmd in by_tick.get(t, ()):
            core.submit_command(cmd)
        pkt = core.tick()
        if sink is not None:
            sink.write(pkt)
    return n_ticks


# ---------------------------------------------------------------------------
# UDP transports

class UdpServer:
    """UDP front end for a ServiceCore.

    RealTime pacing runs a deadline loop at 500 Hz, draining the socket while
    waiting so the freshest command is applied each tick (latest wins); the
    reply goes to the most recent sender. Unpaced mode runs in lockstep: each
    drained batch of datagrams triggers exactly one tick, so a stop-and-wait
    client gets one state packet per command at full speed.
    """

    def __init__(self, core: ServiceCore, bind=("127.0.0.1", 0),
                 pacing: str = "realtime"):
        if pacing not in ("realtime", "unpaced"):
            raise ValueError(f"unknown pacing {pacing!r}")
        self.core = core
        self.pacing = pacing
        self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self._sock.bind(bind)
        self.address = self._sock.getsockname()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._last_sender = None
        self.ticks_run = 0

    def start(self) -> None:
        self._thread = threading.Thread(target=self.run_loop, daemon=True)
        self._thread.start()

    def stop(self) -> None:
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
        if self._sock is not None:
            self._sock.close()
            self._sock = None

    def run_loop(self, max_ticks: int | None = None,
                 duration_s: float | None = None) -> None:
        try:
            if self.pacing == "realtime":
                self._run_realtime(max_ticks, duration_s)
            else:
                self._run_lockstep(max_ticks, duration_s)
        except OSError:
            if not self._stop.is_set():
                raise

    def _drain(self) -> bool:
        got = False
        while True:
            try:
                data, sender = self._sock.recvfrom(4096)
            except BlockingIOError:
                break
            except OSError as exc:
                if not self._stop.is_set():
                    log.warning("recv failed, retrying next tick: %s", exc)
                break
            self._last_sender = sender
            self.core.submit_datagram(data)
            got = True
        return got

    def _send(self, pkt: bytes) -> None:
        if self._last_sender is not None:
            try:
                self._sock.sendto(pkt, self._last_sender)
            except OSError as exc:
                # transient send failures must not break the loop
                log.warning("send to %s failed: %s", self._last_sender, exc)

    def _run_realtime(self, max_ticks, duration_s) -> None:
        self._sock.setblocking(False)
        start = time.monotonic()
        deadline = start
        while not self._stop.is_set():
            if max_ticks is not None and self.ticks_run >= max_ticks:
                break
            if duration_s is not None and time.monotonic() - start >= duration_s:
                break
            deadline += TICK_DT
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    break
                r, _, _ = select.select([self._sock], [], [], remaining)
                if r:
                    self._drain()
                if self._stop.is_set():
                    return
            self._drain()
            pkt = self.core.tick()
            self.ticks_run += 1
            self._send(pkt)

    def _run_lockstep(self, max_ticks, duration_s) -> None:
        self._sock.setblocking(False)
        start = time.monotonic()
        while not self._stop.is_set():
            if max_ticks is not None and self.ticks_run >= max_ticks:
                break
            if duration_s is not None and time.monotonic() - start >= duration_s:
                break
            r, _, _ = select.select([self._sock], [], [], 0.05)
            if not r:
                continue
            if self._drain():
                pkt = self.core.tick()
                self.ticks_run += 1
                self._send(pkt)
