"""Time-series analysis: spectra, fluctuation traces, collapse/revival
metrics, and photocurrent smoothing.

Angular frequencies are reported in the same units as the scaled time of the
simulation (inverse scaled time), matching the level spacings of the sector
Hamiltonian, so spectral peaks can be compared directly against eigenvalue
gaps.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import find_peaks, hilbert

from .integrators import ConfigError, TrajectoryRecord

__all__ = [
    "SpectrumTrace",
    "fourier_spectrum",
    "variance_trace",
    "CollapseMetrics",
    "collapse_revival_metrics",
    "smooth_current",
]

PEAK_MEDIAN_FACTOR = 5.0


class GridError(ConfigError):
    """Series is not sampled on a uniform time grid."""


def _check_uniform(times: np.ndarray) -> float:
    times = np.asarray(times, dtype=float)
    if len(times) < 4:
        raise GridError("series too short")
    steps = np.diff(times)
    dt = steps[0]
    if dt <= 0 or not np.allclose(steps, dt, rtol=1e-9, atol=1e-12 * max(abs(times[-1]), 1.0)):
        raise GridError("time grid is not uniform")
    return float(dt)


@dataclass(frozen=True)
class SpectrumTrace:
    """One-sided magnitude spectrum with detected peaks.

    Peaks are local maxima rising above 5x the median magnitude, listed as
    (angular frequency, magnitude) sorted by magnitude, strongest first.
    """

    frequencies: np.ndarray
    magnitudes: np.ndarray
    peaks: tuple

    @property
    def grid_step(self) -> float:
        return float(self.frequencies[1] - self.frequencies[0])

    def dominant_frequency(self) -> float | None:
        return self.peaks[0][0] if self.peaks else None


def fourier_spectrum(times, values, window: str = "none") -> SpectrumTrace:
    """Mean-subtracted discrete spectrum of a uniformly sampled series.

    Magnitudes are |rfft| / n, so a pure cosine of amplitude A shows a peak
    of height about A/2. ``window`` is "none" or "hann".
    """
    dt = _check_uniform(times)
    x = np.asarray(values, dtype=float)
    x = x - x.mean()
    n = len(x)
    if window == "hann":
        x = x * np.hanning(n)
    elif window != "none":
        raise ConfigError(f"unknown window {window!r}")
    mags = np.abs(np.fft.rfft(x)) / n
    freqs = 2.0 * np.pi * np.fft.rfftfreq(n, d=dt)
    floor = PEAK_MEDIAN_FACTOR * np.median(mags)
    idx, _ = find_peaks(mags, height=floor)
    order = idx[np.argsort(mags[idx])[::-1]]
    peaks = tuple((float(freqs[i]), float(mags[i])) for i in order)
    return SpectrumTrace(frequencies=freqs, magnitudes=mags, peaks=peaks)


def variance_trace(records) -> tuple[np.ndarray, np.ndarray]:
    """Quantum fluctuation sqrt(<N0^2> - <N0>^2) against time.

    Accepts a single trajectory record or a sequence of records sharing one
    grid (averaged run by run).
    """
    if isinstance(records, TrajectoryRecord):
        return records.times.copy(), records.n0_var.copy()
    records = list(records)
    if not records:
        raise ConfigError("no records given")
    t0 = records[0].times
    for r in records[1:]:
        if not np.array_equal(r.times, t0):
            raise ConfigError("records do not share a common time grid")
    return t0.copy(), np.mean([r.n0_var for r in records], axis=0)


@dataclass(frozen=True)
class CollapseMetrics:
    """Collapse/revival summary of a population series.

    ``collapsed`` is False when no collapse is detected (constant series, or
    stiff oscillations that never decay); the remaining fields are then None
    or empty.
    """

    collapsed: bool
    tau_c: float | None
    plateau_level: float | None
    revival_times: np.ndarray
    revival_amplitudes: np.ndarray


def collapse_revival_metrics(times, mean_n0, n_total: int, *,
                             min_revival_separation: float = 0.5,
                             revival_threshold: float = 0.5) -> CollapseMetrics:
    """Extract collapse time, metastable plateau, and revival instants.

    The oscillation envelope is the analytic-signal magnitude of the
    baseline-subtracted series; the collapse time is its first drop below
    1/e of the starting deviation. Revivals are excursions back toward the
    initial value: peaks of the signed deviation on the initial side,
    higher than ``revival_threshold`` of the strongest post-collapse
    excursion and separated by at least ``min_revival_separation``.
    """
    dt = _check_uniform(times)
    s = np.asarray(mean_n0, dtype=float) / float(n_total)
    baseline = float(np.median(s))
    x = s - baseline
    amp0 = abs(x[0])
    if amp0 < 1e-9:
        return CollapseMetrics(False, None, None, np.array([]), np.array([]))
    envelope = np.abs(hilbert(x))
    below = envelope < amp0 / np.e
    if not below.any():
        return CollapseMetrics(False, None, None, np.array([]), np.array([]))
    i_c = int(np.argmax(below))
    tau_c = float(times[i_c])

    toward_initial = np.sign(x[0]) * x
    post = toward_initial[i_c:]
    if len(post) < 8:
        return CollapseMetrics(True, tau_c, baseline * n_total, np.array([]), np.array([]))
    height = revival_threshold * float(post.max())
    distance = max(1, int(round(min_revival_separation / dt)))
    idx, _ = find_peaks(post, height=height, distance=distance)
    revival_times = times[i_c:][idx]
    revival_amps = post[idx]

    # plateau: average over the quiet stretch between collapse and first revival
    if len(revival_times) > 0:
        i_r = i_c + idx[0]
        lo = i_c + (i_r - i_c) // 4
        hi = i_c + 3 * (i_r - i_c) // 4
    else:
        lo, hi = i_c, len(s)
    window = s[lo:hi] if hi > lo else s[i_c:]
    plateau = float(np.mean(window)) * n_total
    return CollapseMetrics(True, tau_c, plateau, np.asarray(revival_times, dtype=float),
                           np.asarray(revival_amps, dtype=float) * n_total)


def smooth_current(times, values, window_width: float, cutoff: float | None = None) -> np.ndarray:
    """Sliding-window average followed by an optional zero-phase low-pass.

    The moving average is centered (linear phase) with reflected edges, so
    peak positions are not shifted and constant inputs pass through exactly.
    ``cutoff`` removes angular-frequency content above it with a zero-phase
    spectral mask.
    """
    dt = _check_uniform(times)
    x = np.asarray(values, dtype=float)
    n = len(x)
    k = int(round(window_width / dt))
    if k > n:
        raise ConfigError("smoothing window exceeds the series length")
    if k > 1:
        if k % 2 == 0:
            k += 1
        half = k // 2
        padded = np.concatenate([x[half:0:-1], x, x[-2:-half - 2:-1]])
        x = np.convolve(padded, np.ones(k) / k, mode="valid")
    if cutoff is not None:
        spec = np.fft.rfft(x)
        freqs = 2.0 * np.pi * np.fft.rfftfreq(len(x), d=dt)
        spec[freqs > cutoff] = 0.0
        x = np.fft.irfft(spec, n=len(x))
    return x
