"""Frequency-domain nonlinearity quantification.

Periodic multisine excitation on a fixed frequency grid, period-averaged DFT
spectra, per-realization frequency response functions, their average (the
Best Linear Approximation) and the per-line nonlinearity estimate and
signal-to-nonlinearity ratio.

The DFT is evaluated by direct summation at the excited bins only; since the
FRF is a ratio of like transforms the (unnormalized forward) convention
cancels.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .config import NUM_MUSCLES, SimConfig
from .dataset import DatasetWriter
from .engine import SAMPLE_RATE, ControlMode, Session
from .errors import (
    DegenerateExcitationError,
    DesignError,
    InsufficientRealizationsError,
    SessionError,
)

DEFAULT_LINES = tuple(round(0.1 * k, 10) for k in range(1, 101))  # 0.1 .. 10 Hz


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(math.gcd(a.numerator * b.denominator,
                             b.numerator * a.denominator),
                    a.denominator * b.denominator)


@dataclass(frozen=True)
class ExcitationDesign:
    """Multisine excitation: frequency lines, per-line amplitude, phase draws.

    `phases` may pin an explicit (realizations, lines) phase matrix; when
    None, phases are drawn uniformly from the seed at use time.
    """

    lines: tuple[float, ...] = DEFAULT_LINES
    amplitude: float = 0.5          # bar per line (pressure difference)
    realizations: int = 10
    periods: int = 10               # total periods applied, including discarded
    discard: int = 2                # leading periods dropped against transients
    phases: object = None           # optional (realizations, lines) radians
    sample_rate: float = SAMPLE_RATE

    def __post_init__(self):
        if not self.lines:
            raise DesignError("excitation needs at least one frequency line")
        if self.realizations < 1:
            raise DesignError("realizations must be >= 1")
        if not 0 <= self.discard < self.periods:
            raise DesignError("need 0 <= discard < periods")
        if self.amplitude < 0:
            raise DesignError("amplitude must be >= 0")
        if self.phases is not None:
            ph = np.asarray(self.phases, dtype=np.float64)
            if ph.shape != (self.realizations, len(self.lines)):
                raise DesignError(
                    f"phases must be shaped ({self.realizations}, "
                    f"{len(self.lines)}), got {ph.shape}")
            object.__setattr__(self, "phases", ph)
        object.__setattr__(self, "lines", tuple(float(f) for f in self.lines))
        # derive the period length from the gcd resolution of the lines
        fs = Fraction(self.sample_rate).limit_denominator(10**6)
        res = None
        for f in self.lines:
            if not 0 < f < self.sample_rate / 2:
                raise DesignError(f"line {f} Hz outside (0, Nyquist)")
            fr = Fraction(f).limit_denominator(10**6)
            if abs(float(fr) - f) > 1e-9 * max(abs(f), 1.0):
                raise DesignError(f"line {f} Hz is not a usable rational frequency")
            res = fr if res is None else _fraction_gcd(res, fr)
        n = fs / res
        if n.denominator != 1:
            raise DesignError(
                f"sample rate {self.sample_rate} is not an integer multiple of "
                f"the line resolution {float(res)}")
        if n > 2_000_000:
            raise DesignError(
                f"lines are misaligned: the common period would need {n} samples")
        object.__setattr__(self, "_period_samples", int(n))
        bins = []
        for f in self.lines:
            k = Fraction(f).limit_denominator(10**6) / res
            if k.denominator != 1:
                raise DesignError(f"line {f} Hz is not on the bin grid")
            bins.append(int(k))
        if len(set(bins)) != len(bins):
            raise DesignError("duplicate frequency lines")
        object.__setattr__(self, "_bins", tuple(bins))

    @property
    def period_samples(self) -> int:
        return self._period_samples

    @property
    def bins(self) -> tuple[int, ...]:
        return self._bins

    @property
    def retained_periods(self) -> int:
        return self.periods - self.discard

    @property
    def total_samples(self) -> int:
        return self.periods * self.period_samples

    def draw_phases(self, seed) -> np.ndarray:
        """(realizations, lines) phases: the pinned ones, else uniform [0, 2*pi)."""
        if self.phases is not None:
            return np.asarray(self.phases)
        rng = np.random.default_rng(seed)
        return rng.uniform(0.0, 2.0 * np.pi,
                           size=(self.realizations, len(self.lines)))


class MultisineSignal:
    """One phase realization, evaluable on the sample grid or at any time."""

    def __init__(self, design: ExcitationDesign, phases: np.ndarray):
        if phases.shape != (len(design.lines),):
            raise DesignError("one phase per line required")
        self.design = design
        self.phases = np.asarray(phases, dtype=np.float64)
        n = design.period_samples
        self._freqs = np.asarray(design.bins, dtype=np.float64) \
            * design.sample_rate / n

    def at(self, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        out = np.zeros_like(t)
        tmp = np.empty_like(t)
        for w, phi in zip(2.0 * np.pi * self._freqs, self.phases):
            np.multiply(t, w, out=tmp)
            tmp += phi
            np.cos(tmp, out=tmp)
            out += tmp
        out *= self.design.amplitude
        return out

    def samples(self, n_samples: int) -> np.ndarray:
        return self.at(np.arange(n_samples) / self.design.sample_rate)


def design_multisine(design: ExcitationDesign, seed) -> np.ndarray:
    """All phase realizations as time signals, shape (m, periods * period_samples)."""
    phases = design.draw_phases(seed)
    out = np.empty((design.realizations, design.total_samples))
    for l in range(design.realizations):
        out[l] = MultisineSignal(design, phases[l]).samples(design.total_samples)
    return out


_dft_matrix_cache: dict[tuple, np.ndarray] = {}


def _dft_matrix(bins: tuple[int, ...], n: int) -> np.ndarray:
    key = (bins, n)
    mat = _dft_matrix_cache.get(key)
    if mat is None:
        k = np.asarray(bins, dtype=np.float64)[:, None]
        t = np.arange(n, dtype=np.float64)[None, :]
        mat = np.exp(-2j * np.pi * k * t / n)
        if len(_dft_matrix_cache) > 8:
            _dft_matrix_cache.clear()
        _dft_matrix_cache[key] = mat
    return mat


def dft_at_bins(x: np.ndarray, bins, n: int | None = None) -> np.ndarray:
    """Unnormalized forward DFT of x evaluated at the given bins only.

    x may be one period (n,) or stacked periods (p, n).
    """
    x = np.asarray(x, dtype=np.float64)
    if n is None:
        n = x.shape[-1]
    if x.shape[-1] != n:
        raise DesignError(f"period length {x.shape[-1]} != {n}")
    mat = _dft_matrix(tuple(int(b) for b in bins), n)
    return x @ mat.T


def _bins_for_lines(lines, n: int, sample_rate: float) -> tuple[int, ...]:
    bins = []
    for f in lines:
        k = f * n / sample_rate
        ki = round(k)
        if abs(k - ki) > 1e-6 or ki < 1 or ki >= n // 2:
            raise DesignError(f"line {f} Hz not on a bin of an {n}-point period")
        bins.append(ki)
    return tuple(bins)


@dataclass(frozen=True)
class FrfEstimate:
    """Averaged spectra and their per-line ratio for one realization."""

    lines: tuple[float, ...]
    g: np.ndarray        # complex, per line
    y_avg: np.ndarray    # complex, period-averaged output spectrum
    u_avg: np.ndarray    # complex, period-averaged input spectrum


def estimate_frf(u_periods: np.ndarray, y_periods: np.ndarray, lines,
                 sample_rate: float = SAMPLE_RATE) -> FrfEstimate:
    """Average the per-period DFTs first, then divide per line."""
    u_periods = np.asarray(u_periods, dtype=np.float64)
    y_periods = np.asarray(y_periods, dtype=np.float64)
    if u_periods.ndim != 2 or u_periods.shape != y_periods.shape:
        raise DesignError("u and y must be (periods, samples) of equal shape")
    p, n = u_periods.shape
    if p < 2:
        raise DesignError(f"need at least 2 periods, got {p}")
    bins = _bins_for_lines(lines, n, sample_rate)
    u_avg = dft_at_bins(u_periods, bins, n).mean(axis=0)
    y_avg = dft_at_bins(y_periods, bins, n).mean(axis=0)
    small = np.abs(u_avg) < 1e-12
    if np.any(small):
        bad = [lines[i] for i in np.flatnonzero(small)]
        raise DegenerateExcitationError(
            f"input spectrum vanishes on lines {bad} Hz")
    return FrfEstimate(lines=tuple(float(f) for f in lines),
                       g=y_avg / u_avg, y_avg=y_avg, u_avg=u_avg)


@dataclass(frozen=True)
class BlaResult:
    """Best Linear Approximation with per-line nonlinearity estimates."""

    lines: tuple[float, ...]
    g_bla: np.ndarray     # complex
    sigma_nl: np.ndarray  # >= 0
    snlr: np.ndarray      # (|g_bla| / sigma_nl)^2, +inf where sigma_nl == 0


def estimate_bla(frfs, lines=None) -> BlaResult:
    """Average per-realization FRFs; spread around the mean is the nonlinearity."""
    if isinstance(frfs, (list, tuple)) and frfs and isinstance(frfs[0], FrfEstimate):
        if lines is None:
            lines = frfs[0].lines
        frfs = np.stack([f.g for f in frfs])
    g = np.asarray(frfs, dtype=np.complex128)
    if g.ndim != 2:
        raise InsufficientRealizationsError("expected (realizations, lines) FRFs")
    m = g.shape[0]
    if m < 2:
        raise InsufficientRealizationsError(f"need at least 2 realizations, got {m}")
    if lines is None:
        lines = tuple(range(g.shape[1]))
    g_bla = g.mean(axis=0)
    sigma2 = np.sum(np.abs(g - g_bla[None, :]) ** 2, axis=0) / (m * (m - 1))
    # bitwise-identical realizations have zero spread by construction; do not
    # let the summation roundoff of the mean manufacture a fake residual
    sigma2[np.all(g == g[:1, :], axis=0)] = 0.0
    sigma_nl = np.sqrt(sigma2)
    with np.errstate(divide="ignore"):
        snlr = np.where(sigma_nl > 0.0,
                        (np.abs(g_bla) / np.where(sigma_nl > 0, sigma_nl, 1.0)) ** 2,
                        np.inf)
    return BlaResult(lines=tuple(float(f) for f in lines), g_bla=g_bla,
                     sigma_nl=sigma_nl, snlr=snlr)


def split_periods(x: np.ndarray, period_samples: int, discard: int) -> np.ndarray:
    """Reshape a continuous record into periods and drop the leading ones."""
    n = len(x) // period_samples
    return x[:n * period_samples].reshape(n, period_samples)[discard:]


def run_excitation(system, design: ExcitationDesign, seed):
    """Full pipeline against any SISO system object.

    The system must expose run(signal, n_samples) -> y samples, starting from
    its reset state each call. Returns (BlaResult, per-realization FRF stack).
    """
    phases = design.draw_phases(seed)
    frfs = []
    for l in range(design.realizations):
        signal = MultisineSignal(design, phases[l])
        u = signal.samples(design.total_samples)
        y = system.run(signal, design.total_samples)
        if len(y) != design.total_samples:
            raise SessionError("system returned a short response")
        up = split_periods(u, design.period_samples, design.discard)
        yp = split_periods(np.asarray(y, dtype=np.float64),
                           design.period_samples, design.discard)
        frfs.append(estimate_frf(up, yp, design.lines, design.sample_rate))
    bla = estimate_bla(frfs, design.lines)
    return bla, np.stack([f.g for f in frfs])


# ---------------------------------------------------------------------------
# session runners against the PAM arm

class Transport(enum.Enum):
    IN_PROCESS = "inprocess"
    UDP = "udp"


class PamJointSystem:
    """Applies a pressure-difference signal around medium pressure to one DoF.

    Output samples are the joint angle at tick ends. Each run starts from a
    fresh session, so realizations are independent.
    """

    def __init__(self, config: SimConfig, dof: int, recorder_factory=None):
        self.config = config
        self.dof = int(dof)
        self.recorder_factory = recorder_factory
        self._run_index = 0

    def run(self, signal, n_samples: int) -> np.ndarray:
        u = signal.samples(n_samples)
        session = Session(self.config, mode=ControlMode.PRESSURE_TARGET)
        recorder = None
        if self.recorder_factory is not None:
            recorder = self.recorder_factory(self._run_index)
        self._run_index += 1
        med = self.config.medium_pressure
        targets = np.full(NUM_MUSCLES, med)
        y = np.empty(n_samples)
        try:
            for t in range(n_samples):
                targets[2 * self.dof] = med + 0.5 * u[t]
                targets[2 * self.dof + 1] = med - 0.5 * u[t]
                session.step(targets)
                y[t] = session.q[self.dof]
                if recorder is not None:
                    recorder.append_raw(session.time_ns, session.p_obs,
                                        session.p_des, session.q, session.v)
        finally:
            if recorder is not None:
                recorder.close()
        return y


class UdpJointSystem:
    """Same contract as PamJointSystem, but over the UDP wire in lockstep.

    Spawns a fresh unpaced loopback server per run, so realizations remain
    independent sessions. Used to demonstrate transport transparency.
    """

    def __init__(self, config: SimConfig, dof: int, recorder_factory=None,
                 timeout: float = 2.0):
        self.config = config
        self.dof = int(dof)
        self.recorder_factory = recorder_factory
        self.timeout = timeout
        self._run_index = 0

    def run(self, signal, n_samples: int) -> np.ndarray:
        import socket

        from . import protocol
        from .service import ServiceCore, UdpServer

        u = signal.samples(n_samples)
        core = ServiceCore(Session(self.config, mode=ControlMode.PRESSURE_TARGET))
        server = UdpServer(core, ("127.0.0.1", 0), pacing="unpaced")
        server.start()
        recorder = None
        if self.recorder_factory is not None:
            recorder = self.recorder_factory(self._run_index)
        self._run_index += 1
        med = self.config.medium_pressure
        targets = [med] * NUM_MUSCLES
        y = np.empty(n_samples)
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.settimeout(self.timeout)
        try:
            sock.connect(server.address)
            for t in range(n_samples):
                targets[2 * self.dof] = med + 0.5 * u[t]
                targets[2 * self.dof + 1] = med - 0.5 * u[t]
                cmd = protocol.CommandPacket(mode=protocol.MODE_PRESSURE,
                                             seq=t + 1, targets=tuple(targets))
                sock.send(protocol.encode_command(cmd))
                try:
                    reply = sock.recv(4096)
                except socket.timeout:
                    raise SessionError(
                        f"no state packet within {self.timeout}s at tick {t}") from None
                state = protocol.decode_state(reply)
                y[t] = state.joint_pos[self.dof]
                if recorder is not None:
                    recorder.append_raw(state.timestamp_ns, state.pressure_obs,
                                        state.pressure_des, state.joint_pos,
                                        state.joint_vel)
        finally:
            if recorder is not None:
                recorder.close()
            sock.close()
            server.stop()
        return y


@dataclass(frozen=True)
class SysidResult:
    bla: BlaResult
    frfs: np.ndarray
    log_paths: tuple[str, ...] = ()
    summary_path: str | None = None


def run_sysid_session(dof: int, design: ExcitationDesign,
                      transport: Transport = Transport.IN_PROCESS,
                      config: SimConfig | None = None, seed=0,
                      out_dir=None) -> SysidResult:
    """Excite one DoF with the full design and estimate its BLA and SNLR."""
    config = config if config is not None else SimConfig()
    log_paths: list[str] = []
    recorder_factory = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)

        def recorder_factory(index: int):
            path = out / f"realization_{index:02d}.dat"
            log_paths.append(str(path))
            return DatasetWriter(path)

    if transport == Transport.UDP:
        system = UdpJointSystem(config, dof, recorder_factory)
    else:
        system = PamJointSystem(config, dof, recorder_factory)
    bla, frfs = run_excitation(system, design, seed)
    summary_path = None
    if out_dir is not None:
        summary_path = str(Path(out_dir) / "summary.csv")
        write_summary_csv(summary_path, bla)
    return SysidResult(bla=bla, frfs=frfs, log_paths=tuple(log_paths),
                       summary_path=summary_path)


def write_summary_csv(path, bla: BlaResult) -> None:
    """One row per excited line: freq, |G_BLA|, arg G_BLA, sigma_nl, snlr."""
    with open(path, "w") as fh:
        fh.write("freq_hz,gbla_mag,gbla_phase_rad,sigma_nl,snlr\n")
        for i, f in enumerate(bla.lines):
            snlr = bla.snlr[i]
            snlr_txt = "inf" if np.isinf(snlr) else repr(float(snlr))
            fh.write(f"{f},{float(np.abs(bla.g_bla[i]))!r},"
                     f"{float(np.angle(bla.g_bla[i]))!r},"
                     f"{float(bla.sigma_nl[i])!r},{snlr_txt}\n")
