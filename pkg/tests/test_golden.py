"""The committed golden fixtures must match regeneration and decode cleanly."""

import json
import subprocess
import sys
from pathlib import Path

from pamsim import protocol

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "golden" / "packet_fixtures.json"


def test_fixture_file_reproducible(tmp_path):
    current = FIXTURES.read_bytes()
    script = ROOT / "scripts" / "make_golden_fixtures.py"
    # regenerate into a scratch tree and compare
    scratch = tmp_path / "pkg"
    (scratch / "scripts").mkdir(parents=True)
    (scratch / "src").symlink_to(ROOT / "src")
    (scratch / "scripts" / "make_golden_fixtures.py").write_bytes(script.read_bytes())
    subprocess.run([sys.executable, str(scratch / "scripts" / "make_golden_fixtures.py")],
                   check=True, capture_output=True)
    regenerated = (scratch / "golden" / "packet_fixtures.json").read_bytes()
    assert regenerated == current


def test_fixtures_decode_to_stated_fields():
    doc = json.loads(FIXTURES.read_text())
    assert doc["count"] == 100
    for entry in doc["packets"]:
        raw = bytes.fromhex(entry["hex"])
        f = entry["fields"]
        if entry["kind"] == "state":
            pkt = protocol.decode_state(raw)
            assert pkt.mode == f["mode"]
            assert pkt.error_code == f["error_code"]
            assert pkt.seq == f["seq"]
            assert pkt.timestamp_ns == f["timestamp_ns"]
            assert list(pkt.joint_pos) == f["joint_pos"]
            assert list(pkt.joint_vel) == f["joint_vel"]
            assert list(pkt.pressure_obs) == f["pressure_obs"]
            assert list(pkt.pressure_des) == f["pressure_des"]
            assert list(pkt.valve) == f["valve"]
            assert protocol.encode_state(pkt) == raw
        else:
            pkt = protocol.decode_command(raw)
            assert pkt.mode == f["mode"]
            assert pkt.seq == f["seq"]
            assert list(pkt.targets) == f["targets"]
            assert protocol.encode_command(pkt) == raw
