"""Cross-implementation codec agreement via the shared golden fixtures."""

import json
from pathlib import Path

import pytest

from pamsim_client import codec

FIXTURES = Path(__file__).resolve().parents[2] / "golden" / "packet_fixtures.json"


@pytest.fixture(scope="module")
def fixtures():
    doc = json.loads(FIXTURES.read_text())
    assert doc["count"] == 100
    return doc["packets"]


def test_all_100_packets_decode_to_identical_fields(fixtures):
    states = commands = 0
    for entry in fixtures:
        raw = bytes.fromhex(entry["hex"])
        f = entry["fields"]
        if entry["kind"] == "state":
            states += 1
            st = codec.decode_state(raw)
            assert st.mode == f["mode"]
            assert st.error_code == f["error_code"]
            assert st.seq == f["seq"]
            assert st.timestamp_ns == f["timestamp_ns"]
            assert list(st.joint_pos) == f["joint_pos"]
            assert list(st.joint_vel) == f["joint_vel"]
            assert list(st.pressure_obs) == f["pressure_obs"]
            assert list(st.pressure_des) == f["pressure_des"]
            assert list(st.valve) == f["valve"]
        else:
            commands += 1
            mode, seq, targets = codec.decode_command(raw)
            assert mode == f["mode"]
            assert seq == f["seq"]
            assert list(targets) == f["targets"]
    assert states + commands == 100
    assert states > 0 and commands > 0


def test_all_100_packets_reencode_to_identical_bytes(fixtures):
    for entry in fixtures:
        raw = bytes.fromhex(entry["hex"])
        f = entry["fields"]
        if entry["kind"] == "state":
            st = codec.RobotState(
                seq=f["seq"], timestamp_ns=f["timestamp_ns"], mode=f["mode"],
                error_code=f["error_code"],
                joint_pos=tuple(f["joint_pos"]), joint_vel=tuple(f["joint_vel"]),
                pressure_obs=tuple(f["pressure_obs"]),
                pressure_des=tuple(f["pressure_des"]),
                valve=tuple(f["valve"]))
            assert codec.encode_state(st) == raw
        else:
            assert codec.encode_command(f["mode"], f["seq"], f["targets"]) == raw


def test_sizes_and_magic():
    raw = codec.encode_command(codec.MODE_PRESSURE, 1, [2.5] * 8)
    assert len(raw) == codec.COMMAND_SIZE == 80
    assert raw[:4] == bytes([0x32, 0x4D, 0x41, 0x50])
    with pytest.raises(codec.ClientProtocolError):
        codec.decode_state(raw)  # wrong size for a state packet
