"""Analytic second-order reference plant for pipeline verification.

G(s) = wn^2 / (s^2 + 2 zeta wn s + wn^2), integrated with RK4 at a finer
step than the sample grid. The time-stepped response is exactly linear in
the input, so it exercises the estimation pipeline independently of the
closed-form FRF it is compared against.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .engine import SAMPLE_RATE


@njit(cache=True)
def _rk4_forced(u_half, wn, zeta, h, n_steps, record_every, out):
    """RK4 on (y, yd) with the input sampled at half-step resolution.

    u_half[2*s], u_half[2*s + 1], u_half[2*s + 2] are the inputs at the
    start, middle and end of step s. Records y every `record_every` steps,
    starting with the initial state.
    """
    y = 0.0
    yd = 0.0
    w2 = wn * wn
    c = 2.0 * zeta * wn
    out[0] = y
    idx = 1
    for s in range(n_steps):
        u0 = u_half[2 * s]
        um = u_half[2 * s + 1]
        u1 = u_half[2 * s + 2]
        k1y = yd
        k1v = w2 * (u0 - y) - c * yd
        y2 = y + 0.5 * h * k1y
        v2 = yd + 0.5 * h * k1v
        k2y = v2
        k2v = w2 * (um - y2) - c * v2
        y3 = y + 0.5 * h * k2y
        v3 = yd + 0.5 * h * k2v
        k3y = v3
        k3v = w2 * (um - y3) - c * v3
        y4 = y + h * k3y
        v4 = yd + h * k3v
        k4y = v4
        k4v = w2 * (u1 - y4) - c * v4
        y = y + (h / 6.0) * (k1y + 2.0 * k2y + 2.0 * k3y + k4y)
        yd = yd + (h / 6.0) * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)
        if (s + 1) % record_every == 0:
            if idx < len(out):
                out[idx] = y
            idx += 1


class SecondOrderSystem:
    """run(signal, n) contract used by the sysid pipeline."""

    def __init__(self, wn: float, zeta: float, substeps: int = 2,
                 sample_rate: float = SAMPLE_RATE):
        if wn <= 0 or zeta < 0:
            raise ValueError("need wn > 0 and zeta >= 0")
        self.wn = wn
        self.zeta = zeta
        self.substeps = int(substeps)
        self.sample_rate = sample_rate

    def run(self, signal, n_samples: int) -> np.ndarray:
        h = 1.0 / (self.sample_rate * self.substeps)
        n_steps = n_samples * self.substeps
        t_half = np.arange(2 * n_steps + 1) * (0.5 * h)
        u_half = signal.at(t_half)
        y = np.empty(n_samples + 1)
        _rk4_forced(u_half, self.wn, self.zeta, h, n_steps, self.substeps, y)
        return y[:n_samples]

    def frf(self, freqs_hz) -> np.ndarray:
        """Closed-form G(j omega) on the given frequencies."""
        w = 2.0 * np.pi * np.asarray(freqs_hz, dtype=np.float64)
        jw = 1j * w
        return self.wn ** 2 / (jw * jw + 2.0 * self.zeta * self.wn * jw + self.wn ** 2)
