#!/usr/bin/env python3
"""Generate the shared codec fixtures consumed by the client SDK tests.

100 seeded random packets (state and command), stored as hex bytes plus the
decoded field values. Regenerating with the same seed must reproduce the file
byte for byte; tests/test_golden.py enforces that.
"""

import json
import struct
import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from pamsim import protocol  # noqa: E402

SEED = 0x50414D32
COUNT = 100


def random_f64(rng, n):
    """Finite doubles with full random bit patterns (exercise exactness)."""
    out = []
    while len(out) < n:
        bits = rng.integers(0, 2 ** 64, dtype=np.uint64)
        val = struct.unpack("<d", struct.pack("<Q", int(bits)))[0]
        if np.isfinite(val):
            out.append(float(val))
    return out


def main():
    rng = np.random.default_rng(SEED)
    packets = []
    for i in range(COUNT):
        if i % 2 == 0:
            floats = random_f64(rng, 32)
            pkt = protocol.StatePacket(
                mode=int(rng.integers(0, 2)),
                error_code=int(rng.integers(0, 5)),
                seq=int(rng.integers(0, 2 ** 63)),
                timestamp_ns=int(rng.integers(0, 2 ** 63)),
                joint_pos=tuple(floats[0:4]),
                joint_vel=tuple(floats[4:8]),
                pressure_obs=tuple(floats[8:16]),
                pressure_des=tuple(floats[16:24]),
                valve=tuple(floats[24:32]))
            raw = protocol.encode_state(pkt)
            packets.append({
                "kind": "state",
                "hex": raw.hex(),
                "fields": {
                    "mode": pkt.mode, "error_code": pkt.error_code,
                    "seq": pkt.seq, "timestamp_ns": pkt.timestamp_ns,
                    "joint_pos": list(pkt.joint_pos),
                    "joint_vel": list(pkt.joint_vel),
                    "pressure_obs": list(pkt.pressure_obs),
                    "pressure_des": list(pkt.pressure_des),
                    "valve": list(pkt.valve),
                }})
        else:
            mode = int(rng.integers(0, 2))
            if mode == protocol.MODE_POSITION:
                targets = tuple(random_f64(rng, 4)) + (0.0,) * 4
            else:
                targets = tuple(random_f64(rng, 8))
            pkt = protocol.CommandPacket(mode=mode,
                                         seq=int(rng.integers(0, 2 ** 63)),
                                         targets=targets)
            raw = protocol.encode_command(pkt)
            packets.append({
                "kind": "command",
                "hex": raw.hex(),
                "fields": {"mode": pkt.mode, "seq": pkt.seq,
                           "targets": list(pkt.targets)}})
    doc = {"seed": SEED, "count": COUNT, "packets": packets}
    out = Path(__file__).resolve().parent.parent / "golden" / "packet_fixtures.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(doc, indent=1) + "\n")
    print(f"wrote {out} ({len(packets)} packets)")


if __name__ == "__main__":
    main()
