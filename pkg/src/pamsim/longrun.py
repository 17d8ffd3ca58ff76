"""Long-term episode program and repeatability statistics.

An episode is: randomly phased multisine exploration, an open-loop reset
(medium -> minimum -> medium pressures), the repeatability snapshot at the
last reset tick, then fixed-target motions at two speeds. Every tick goes to
the 500 Hz binary dataset; the arm state carries over between episodes, which
is what makes the reset snapshot a meaningful repeatability probe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import NUM_JOINTS, NUM_MUSCLES, SimConfig
from .dataset import DatasetWriter, read_record_at
from .engine import ControlMode, Session, TICK_DT
from .errors import DesignError, InsufficientDataError, IntegrationDivergedError
from .sysid import ExcitationDesign, MultisineSignal

EPISODE_FILE_FMT = "episode_{:06d}.dat"

DEFAULT_FIXED_SETS = (
    (4.0, 1.0, 4.0, 1.0, 4.0, 1.0, 4.0, 1.0),
    (1.0, 4.0, 1.0, 4.0, 1.0, 4.0, 1.0, 4.0),
    (4.0, 1.0, 1.0, 4.0, 4.0, 1.0, 1.0, 4.0),
    (2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5),
)


def _default_multisine() -> ExcitationDesign:
    return ExcitationDesign(amplitude=0.1)


@dataclass(frozen=True)
class EpisodeSpec:
    """One episode of the long-term program; all actions are open loop."""

    seed: object = 0
    multisine: ExcitationDesign = field(default_factory=_default_multisine)
    multisine_duration: float = 30.0
    reset_dwells: tuple[float, float, float] = (2.0, 2.0, 2.0)
    fixed_sets_slow: tuple[tuple[float, ...], ...] = DEFAULT_FIXED_SETS
    slow_dwell: float = 3.0
    fixed_sets_fast: tuple[tuple[float, ...], ...] = DEFAULT_FIXED_SETS
    fast_dwell: float = 0.5

    def __post_init__(self):
        if max(self.multisine.lines) > 10.0:
            raise DesignError("episode multisine lines must stay at or below 10 Hz")
        if len(self.reset_dwells) != 3:
            raise DesignError("reset needs exactly the [medium, minimum, medium] dwells")
        for sets in (self.fixed_sets_slow, self.fixed_sets_fast):
            for s in sets:
                if len(s) != NUM_MUSCLES:
                    raise DesignError("fixed target sets must have 8 pressures")

    def phase_ticks(self) -> dict[str, int]:
        t = {
            "multisine": _ticks(self.multisine_duration),
            "reset": sum(_ticks(d) for d in self.reset_dwells),
            "slow": len(self.fixed_sets_slow) * _ticks(self.slow_dwell),
            "fast": len(self.fixed_sets_fast) * _ticks(self.fast_dwell),
        }
        t["total"] = sum(t.values())
        return t

    def snapshot_offset(self) -> int:
        """Tick index (within the episode) of the repeatability snapshot."""
        return self.phase_ticks()["multisine"] + self.phase_ticks()["reset"] - 1


def _ticks(duration_s: float) -> int:
    n = round(duration_s / TICK_DT)
    if abs(n * TICK_DT - duration_s) > 1e-9:
        raise DesignError(f"duration {duration_s}s is not a whole number of 2 ms ticks")
    return int(n)


def build_episode_schedule(spec: EpisodeSpec, config: SimConfig) -> np.ndarray:
    """Desired pressures for every tick of the episode, shape (ticks, 8)."""
    med = config.medium_pressure
    mini = config.minimum_pressure
    m = config.muscle
    parts = []

    n_ms = _ticks(spec.multisine_duration)
    rng = np.random.default_rng(spec.seed)
    phases = rng.uniform(0.0, 2.0 * np.pi, size=(NUM_JOINTS, len(spec.multisine.lines)))
    block = np.full((n_ms, NUM_MUSCLES), med)
    for j in range(NUM_JOINTS):
        u = MultisineSignal(spec.multisine, phases[j]).samples(n_ms)
        block[:, 2 * j] = med + 0.5 * u
        block[:, 2 * j + 1] = med - 0.5 * u
    parts.append(block)

    for level, dwell in zip((med, mini, med), spec.reset_dwells):
        parts.append(np.full((_ticks(dwell), NUM_MUSCLES), level))

    for sets, dwell in ((spec.fixed_sets_slow, spec.slow_dwell),
                        (spec.fixed_sets_fast, spec.fast_dwell)):
        for target_set in sets:
            parts.append(np.tile(np.asarray(target_set, dtype=np.float64),
                                 (_ticks(dwell), 1)))

    schedule = np.concatenate(parts, axis=0)
    np.clip(schedule, m.p_min, m.p_max, out=schedule)
    return schedule


@dataclass(frozen=True)
class EpisodeSummary:
    index: int
    final_reset_position: tuple[float, ...]   # 4 x rad
    ticks: int
    start_tick: int


def run_episode(spec: EpisodeSpec, session: Session, recorder: DatasetWriter,
                index: int = 0, config: SimConfig | None = None) -> EpisodeSummary:
    """Execute one episode on a live session, recording every tick."""
    if session.mode != ControlMode.PRESSURE_TARGET:
        raise DesignError("episodes run in pressure mode")
    cfg = config if config is not None else session.config
    schedule = build_episode_schedule(spec, cfg)
    snapshot_at = spec.snapshot_offset()
    start_tick = session.tick
    final = None
    try:
        for t in range(schedule.shape[0]):
            session.step(schedule[t])
            recorder.append_raw(session.time_ns, session.p_obs, session.p_des,
                                session.q, session.v)
            if t == snapshot_at:
                final = tuple(float(x) for x in session.q)
    except IntegrationDivergedError:
        recorder.write_error_marker()
        recorder.flush()
        raise
    return EpisodeSummary(index=index, final_reset_position=final,
                          ticks=schedule.shape[0], start_tick=start_tick)


def run_longrun(episodes: int, seed: int, out_dir, config: SimConfig | None = None,
                spec_template: EpisodeSpec | None = None) -> list[EpisodeSummary]:
    """Run a seeded sequence of episodes, one dataset file per episode."""
    cfg = config if config is not None else SimConfig()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    session = Session(cfg, mode=ControlMode.PRESSURE_TARGET)
    template = spec_template if spec_template is not None else EpisodeSpec()
    summaries = []
    for i in range(episodes):
        spec = EpisodeSpec(
            seed=(seed, i),
            multisine=template.multisine,
            multisine_duration=template.multisine_duration,
            reset_dwells=template.reset_dwells,
            fixed_sets_slow=template.fixed_sets_slow,
            slow_dwell=template.slow_dwell,
            fixed_sets_fast=template.fixed_sets_fast,
            fast_dwell=template.fast_dwell)
        with DatasetWriter(out / EPISODE_FILE_FMT.format(i)) as recorder:
            summaries.append(run_episode(spec, session, recorder, index=i, config=cfg))
    _write_episode_csv(out / "episodes.csv", summaries)
    return summaries


def _write_episode_csv(path, summaries) -> None:
    with open(path, "w") as fh:
        fh.write("episode,start_tick,ticks,final_q0,final_q1,final_q2,final_q3\n")
        for s in summaries:
            qs = ",".join(repr(float(q)) for q in s.final_reset_position)
            fh.write(f"{s.index},{s.start_tick},{s.ticks},{qs}\n")


@dataclass(frozen=True)
class RepeatabilityStats:
    """Moving statistics of the per-episode reset positions."""

    window: int
    finals: np.ndarray          # (episodes, 4)
    episode_index: np.ndarray   # (n_windows,) index of each window's last episode
    rel_mean: np.ndarray        # (n_windows, 4), moving mean minus first-window mean
    std: np.ndarray             # (n_windows, 4), sample std per window
    headline_std: np.ndarray    # (n_windows,), std averaged over the 4 DoFs


def repeatability(finals, window: int = 400) -> RepeatabilityStats:
    """Trailing-window moving mean (relative to the first window) and std."""
    finals = np.asarray(finals, dtype=np.float64)
    if finals.ndim == 1:
        finals = finals[:, None]
    episodes = finals.shape[0]
    if window < 2:
        raise InsufficientDataError("window must be >= 2")
    if episodes < window:
        raise InsufficientDataError(
            f"need at least {window} episodes, got {episodes}")
    windows = np.lib.stride_tricks.sliding_window_view(finals, window, axis=0)
    mean = windows.mean(axis=-1)
    std = windows.std(axis=-1, ddof=1)
    q0 = mean[0]
    return RepeatabilityStats(
        window=window,
        finals=finals,
        episode_index=np.arange(window - 1, episodes),
        rel_mean=mean - q0,
        std=std,
        headline_std=std.mean(axis=1))


def collect_finals(run_dir, spec: EpisodeSpec | None = None) -> np.ndarray:
    """Reset positions of every episode file in a run directory.

    Reads only the snapshot record of each file (the offset follows from the
    episode timing), so this scales to long runs.
    """
    spec = spec if spec is not None else EpisodeSpec()
    offset = spec.snapshot_offset()
    run_dir = Path(run_dir)
    paths = sorted(run_dir.glob("episode_*.dat"))
    if not paths:
        raise InsufficientDataError(f"no episode files in {run_dir}")
    finals = np.empty((len(paths), NUM_JOINTS))
    for i, path in enumerate(paths):
        rec = read_record_at(path, offset)
        finals[i] = rec.joint_pos
    return finals


def write_stats_csv(path, stats: RepeatabilityStats) -> None:
    with open(path, "w") as fh:
        head_mean = ",".join(f"rel_mean_{k}" for k in range(NUM_JOINTS))
        head_std = ",".join(f"std_{k}" for k in range(NUM_JOINTS))
        fh.write(f"episode,{head_mean},{head_std},std_mean\n")
        for i in range(len(stats.episode_index)):
            row = [str(int(stats.episode_index[i]))]
            row += [repr(float(x)) for x in stats.rel_mean[i]]
            row += [repr(float(x)) for x in stats.std[i]]
            row.append(repr(float(stats.headline_std[i])))
            fh.write(",".join(row) + "\n")
