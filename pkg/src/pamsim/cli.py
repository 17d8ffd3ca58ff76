"""Single `pamsim` executable: serve, sysid, forcemap, longrun, stats, replay.

Every command ends by printing one JSON summary line (command, config hash,
seed, duration, output paths, status) on stdout. Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
import time
from pathlib import Path

from . import __version__
from .config import config_hash, load_config
from .engine import ControlMode, Session, TICK_DT
from .errors import PamsimError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RUNTIME = 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    p = _Parser(prog="pamsim", description=__doc__)
    p.add_argument("--version", action="version", version=f"pamsim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="config file (key = value)")
        sp.add_argument("--seed", type=int, default=0)

    sp = sub.add_parser("serve", help="run the UDP control service")
    common(sp)
    sp.add_argument("--bind", default="127.0.0.1:7342", help="host:port")
    sp.add_argument("--pacing", choices=["realtime", "unpaced"], default="realtime")
    sp.add_argument("--mode", choices=["pressure", "position"], default="pressure")
    sp.add_argument("--script", default=None,
                    help="tick-stamped command list; runs an offline replay")
    sp.add_argument("--ticks", type=int, default=None,
                    help="tick count for scripted replay / tick limit for serving")
    sp.add_argument("--out", default=None,
                    help="file for the emitted packet stream (scripted replay)")
    sp.add_argument("--duration-s", type=float, default=None)

    sp = sub.add_parser("sysid", help="multisine excitation and BLA/SNLR estimate")
    common(sp)
    sp.add_argument("--dof", type=int, required=True, choices=range(4))
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--transport", choices=["inprocess", "udp"], default="inprocess")
    sp.add_argument("--amplitude", type=float, default=None,
                    help="per-line excitation amplitude, bar")
    sp.add_argument("--realizations", type=int, default=None)
    sp.add_argument("--periods", type=int, default=None)

    sp = sub.add_parser("forcemap", help="collision peak-force map")
    common(sp)
    sp.add_argument("--velocities", default="0.12:1.94:14",
                    help="tip speed grid start:stop:count, m/s")
    sp.add_argument("--out", required=True, help="output CSV path")

    sp = sub.add_parser("longrun", help="long-term episode program")
    common(sp)
    sp.add_argument("--episodes", type=int, required=True)
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--multisine-duration", type=float, default=None)

    sp = sub.add_parser("stats", help="repeatability statistics over a run directory")
    common(sp)
    sp.add_argument("--in", dest="in_dir", required=True)
    sp.add_argument("--window", type=int, default=400)
    sp.add_argument("--out", required=True, help="output CSV path")
    sp.add_argument("--multisine-duration", type=float, default=None,
                    help="episode timing if the run used a non-default value")

    sp = sub.add_parser("replay", help="re-emit a dataset file over UDP at 500 Hz")
    common(sp)
    sp.add_argument("--in", dest="in_file", required=True)
    sp.add_argument("--target", required=True, help="host:port")

    return p


def _parse_address(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    if not host or not port.isdigit():
        raise _UsageError(f"address must be host:port, got {text!r}")
    return host, int(port)


def _summary(command, cfg, seed, started, outputs, status="ok"):
    return json.dumps({
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "duration_s": round(time.monotonic() - started, 6),
        "outputs": sorted(str(o) for o in outputs),
        "status": status,
    }, sort_keys=True)


def _cmd_serve(args, cfg):
    from .service import ServiceCore, UdpServer, parse_script, run_script

    mode = ControlMode.POSITION_TARGET if args.mode == "position" \
        else ControlMode.PRESSURE_TARGET
    core = ServiceCore(Session(cfg, mode=mode))
    outputs = []
    if args.script is not None:
        entries = parse_script(Path(args.script).read_text())
        n_ticks = args.ticks
        if n_ticks is None:
            n_ticks = (entries[-1].tick + 1 if entries else 0) + cfg.watchdog_ticks
        if args.out is not None:
            outputs.append(args.out)
            with open(args.out, "wb") as sink:
                run_script(core, entries, n_ticks, sink)
        else:
            run_script(core, entries, n_ticks, None)
        return outputs
    server = UdpServer(core, _parse_address(args.bind), pacing=args.pacing)
    print(f"pamsim serve listening on {server.address[0]}:{server.address[1]} "
          f"mode={args.mode} pacing={args.pacing}", flush=True)
    try:
        server.run_loop(max_ticks=args.ticks, duration_s=args.duration_s)
    except KeyboardInterrupt:
        pass
    return outputs


def _cmd_sysid(args, cfg):
    from .sysid import ExcitationDesign, Transport, run_sysid_session

    overrides = {}
    if args.amplitude is not None:
        overrides["amplitude"] = args.amplitude
    if args.realizations is not None:
        overrides["realizations"] = args.realizations
    if args.periods is not None:
        overrides["periods"] = args.periods
    design = ExcitationDesign(**overrides)
    transport = Transport.UDP if args.transport == "udp" else Transport.IN_PROCESS
    result = run_sysid_session(args.dof, design, transport=transport,
                               config=cfg, seed=args.seed, out_dir=args.out)
    return [result.summary_path, *result.log_paths]


def _cmd_forcemap(args, cfg):
    from .forcemap import build_force_map, parse_velocity_grid, write_force_map_csv

    velocities = parse_velocity_grid(args.velocities)
    entries = build_force_map(velocities, config=cfg)
    write_force_map_csv(args.out, entries)
    return [args.out]


def _cmd_longrun(args, cfg):
    from .longrun import EpisodeSpec, run_longrun

    template = EpisodeSpec()
    if args.multisine_duration is not None:
        template = EpisodeSpec(multisine_duration=args.multisine_duration)
    run_longrun(args.episodes, args.seed, args.out, config=cfg,
                spec_template=template)
    return [args.out]


def _cmd_stats(args, cfg):
    from .longrun import EpisodeSpec, collect_finals, repeatability, write_stats_csv

    spec = EpisodeSpec()
    if args.multisine_duration is not None:
        spec = EpisodeSpec(multisine_duration=args.multisine_duration)
    finals = collect_finals(args.in_dir, spec)
    stats = repeatability(finals, window=args.window)
    write_stats_csv(args.out, stats)
    return [args.out]


def _cmd_replay(args, cfg):
    from . import protocol
    from .dataset import read_dataset_arrays

    records, _ = read_dataset_arrays(args.in_file)
    target = _parse_address(args.target)
    sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
    m = cfg.muscle
    span = m.p_max - m.p_min
    deadline = time.monotonic()
    for seq in range(len(records)):
        rec = records[seq]
        valve = [min(max((d - o) / span, -1.0), 1.0)
                 for o, d in zip(rec["pressure_obs"], rec["pressure_des"])]
        pkt = protocol.StatePacket(
            mode=protocol.MODE_PRESSURE, error_code=protocol.ERROR_OK,
            seq=seq + 1, timestamp_ns=int(rec["timestamp_ns"]),
            joint_pos=tuple(float(x) for x in rec["joint_pos"]),
            joint_vel=tuple(float(x) for x in rec["joint_vel"]),
            pressure_obs=tuple(float(x) for x in rec["pressure_obs"]),
            pressure_des=tuple(float(x) for x in rec["pressure_des"]),
            valve=tuple(valve))
        sock.sendto(protocol.encode_state(pkt), target)
        deadline += TICK_DT
        delay = deadline - time.monotonic()
        if delay > 0:
            time.sleep(delay)
    sock.close()
    return []


_COMMANDS = {
    "serve": _cmd_serve,
    "sysid": _cmd_sysid,
    "forcemap": _cmd_forcemap,
    "longrun": _cmd_longrun,
    "stats": _cmd_stats,
    "replay": _cmd_replay,
}


def main(argv=None) -> int:
    started = time.monotonic()
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args.config)
        outputs = _COMMANDS[args.command](args, cfg)
        print(_summary(args.command, cfg, args.seed, started, outputs))
        return EXIT_OK
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyboardInterrupt:
        return EXIT_RUNTIME
    except (PamsimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        try:
            print(_summary(args.command, load_config(None), args.seed, started,
                           [], status="error"))
        except Exception:
            pass
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
