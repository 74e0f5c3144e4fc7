"""Objective impulse-response metrics.

These double as the verification instruments for the renderer: the
Schroeder EDC and T30 fit check decay times, the normalized echo density
checks temporal diffuseness, and the magnitude/group-delay helpers check
the all-pass and power-complementarity properties of the filters.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import erfc

GAUSSIAN_EXCEEDANCE = float(erfc(1.0 / np.sqrt(2.0)))  # P(|x| > sigma), ~0.3173


class InsufficientDecayError(ValueError):
    """The EDC never spans the -5 to -35 dB fitting range."""

    def __init__(self, message: str = "insufficient decay range"):
        super().__init__(message)


def schroeder_edc(x: np.ndarray) -> np.ndarray:
    """Backward-integrated energy in dB, normalized to 0 dB at the first sample.

    Samples after the last non-zero one are ``-inf``.

    Raises
    ------
    ValueError
        If ``x`` has no energy.
    """
    x = np.asarray(x, dtype=float)
    energy = np.cumsum((x * x)[::-1])[::-1]
    if energy.size == 0 or energy[0] <= 0.0:
        raise ValueError("cannot integrate an all-zero impulse response")
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(energy / energy[0])


def t60_from_edc(edc: np.ndarray, sample_rate: float, upper_db: float = -5.0, lower_db: float = -35.0) -> float:
    """Least-squares line through the EDC between ``upper_db`` and ``lower_db``, extrapolated to -60 dB.

    Raises
    ------
    InsufficientDecayError
        If the EDC does not reach ``lower_db`` or has fewer than two
        samples inside the fitting span.
    """
    edc = np.asarray(edc, dtype=float)
    if not np.any(edc <= lower_db):
        raise InsufficientDecayError()
    start = int(np.argmax(edc <= upper_db))
    stop = int(np.argmax(edc <= lower_db))
    seg = edc[start : stop + 1]
    keep = np.isfinite(seg) & (seg >= lower_db) & (seg <= upper_db)
    if np.count_nonzero(keep) < 2:
        raise InsufficientDecayError()
    t = (start + np.flatnonzero(keep)) / sample_rate
    slope, _ = np.polyfit(t, seg[keep], 1)
    if slope >= 0:
        raise InsufficientDecayError()
    return float(-60.0 / slope)


def t60(x: np.ndarray, sample_rate: float) -> float:
    return t60_from_edc(schroeder_edc(x), sample_rate)


def edc_crossing_time(x: np.ndarray, sample_rate: float, level_db: float = -60.0) -> float:
    """First time (s) at which the EDC is at or below ``level_db``."""
    edc = schroeder_edc(x)
    hit = np.flatnonzero(edc <= level_db)
    if hit.size == 0:
        raise InsufficientDecayError(f"EDC never reaches {level_db} dB")
    return float(hit[0] / sample_rate)


def normalized_echo_density(
    x: np.ndarray, sample_rate: float, window_ms: float = 20.0, hop: int = 1
) -> tuple[np.ndarray, np.ndarray]:
    """Sliding-window echo density profile.

    For each window (rectangular, centred on the sample) the fraction of
    samples whose magnitude exceeds the window's standard deviation is
    divided by ``erfc(1/sqrt(2))``, so Gaussian noise scores about 1 and
    isolated reflections score near 0. The signal is zero-padded by half
    a window at both ends.

    Returns
    -------
    times : ndarray
        Window centres in seconds.
    profile : ndarray
        Echo density at those centres.
    """
    if not window_ms > 0:
        raise ValueError("window length must be positive")
    x = np.asarray(x, dtype=float)
    width = max(1, int(round(window_ms * 1e-3 * sample_rate)))
    if width % 2 == 0:
        width += 1
    half = width // 2
    padded = np.concatenate([np.zeros(half), x, np.zeros(half)])
    centres = np.arange(0, x.size, hop)

    windows = sliding_window_view(padded, width)
    counts = np.empty(centres.size)
    chunk = max(1, 2_000_000 // width)
    for i in range(0, centres.size, chunk):
        block = windows[centres[i : i + chunk]]
        sigma = block.std(axis=1, keepdims=True)
        counts[i : i + chunk] = np.count_nonzero(np.abs(block) > sigma, axis=1)
    profile = counts / width / GAUSSIAN_EXCEEDANCE
    return centres / sample_rate, profile


def mean_echo_density(
    x: np.ndarray, sample_rate: float, start: float = 0.0, stop: float = 0.05, window_ms: float = 20.0
) -> float:
    """Average echo density over window centres in ``[start, stop)`` seconds."""
    t, prof = normalized_echo_density(x, sample_rate, window_ms)
    sel = (t >= start) & (t < stop)
    return float(prof[sel].mean())


def _response(obj, w):
    if hasattr(obj, "frequency_response"):
        return obj.frequency_response(w)
    h = np.asarray(obj, dtype=float)
    return np.exp(-1j * np.outer(w, np.arange(h.size))) @ h


def magnitude_response(obj, grid_size: int = 1024) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude in dB at ``grid_size`` frequencies in ``[0, pi)`` rad/sample.

    ``obj`` is anything with a ``frequency_response(w)`` method (all-pass
    stages, cascades, biquads) or an FIR coefficient array.
    """
    w = np.pi * np.arange(grid_size) / grid_size
    with np.errstate(divide="ignore"):
        return w, 20.0 * np.log10(np.abs(_response(obj, w)))


def group_delay_response(obj, grid_size: int = 8192) -> tuple[np.ndarray, np.ndarray]:
    """Group delay in samples from finite differences of the unwrapped phase.

    The grid covers the whole unit circle so that averaging the result
    gives the full-band mean group delay. It is refined automatically
    when a cascade's peak group delay would make phase steps exceed pi.
    """
    peak = 0.0
    for s in getattr(obj, "stages", ()):
        g = abs(s.gain)
        peak += s.delay * (1.0 + g) / (1.0 - g)
    if hasattr(obj, "delay") and hasattr(obj, "gain"):
        g = abs(obj.gain)
        peak = obj.delay * (1.0 + g) / (1.0 - g)
    n = max(int(grid_size), int(2 ** np.ceil(np.log2(8.0 * peak + 1.0))))
    w = 2.0 * np.pi * np.arange(n + 1) / n
    phase = np.unwrap(np.angle(_response(obj, w)))
    gd = -np.diff(phase) / np.diff(w)
    return 0.5 * (w[:-1] + w[1:]), gd


def mean_group_delay(x: np.ndarray) -> float:
    """Power-weighted full-band mean group delay of an FIR response, in samples.

    Equals the energy centroid ``sum(n h^2) / sum(h^2)``; for an all-pass
    response it coincides with the unweighted band average.
    """
    x = np.asarray(x, dtype=float)
    e = x * x
    return float(np.sum(np.arange(x.size) * e) / np.sum(e))


def spectrum_magnitude(x: np.ndarray, sample_rate: float, n_points: int = 256) -> tuple[np.ndarray, np.ndarray]:
    """Magnitude spectrum in dB, sampled at log-spaced frequencies from 20 Hz to Nyquist."""
    x = np.asarray(x, dtype=float)
    nfft = int(2 ** np.ceil(np.log2(max(x.size, 2))))
    spec = np.abs(np.fft.rfft(x, nfft))
    freqs = np.fft.rfftfreq(nfft, 1.0 / sample_rate)
    grid = np.geomspace(20.0, sample_rate / 2.0, n_points)
    with np.errstate(divide="ignore"):
        return grid, 20.0 * np.log10(np.interp(grid, freqs, spec))


@dataclass
class AnalysisMetrics:
    times: np.ndarray
    edc: np.ndarray
    t60: float | None
    echo_times: np.ndarray
    echo_density: np.ndarray
    freqs: np.ndarray
    spectrum_db: np.ndarray
    mean_group_delay: float


def analyze(x: np.ndarray, sample_rate: float, resolution_ms: float = 1.0) -> AnalysisMetrics:
    """All metrics for one channel; curves are decimated to ``resolution_ms``."""
    x = np.asarray(x, dtype=float)
    hop = max(1, int(round(resolution_ms * 1e-3 * sample_rate)))
    edc = schroeder_edc(x)
    try:
        decay = t60_from_edc(edc, sample_rate)
    except InsufficientDecayError:
        decay = None
    echo_t, echo = normalized_echo_density(x, sample_rate, hop=hop)
    freqs, spec = spectrum_magnitude(x, sample_rate)
    idx = np.arange(0, x.size, hop)
    return AnalysisMetrics(
        times=idx / sample_rate,
        edc=edc[idx],
        t60=decay,
        echo_times=echo_t,
        echo_density=echo,
        freqs=freqs,
        spectrum_db=spec,
        mean_group_delay=mean_group_delay(x),
    )


CSV_HEADER = ("metric", "time_or_freq", "value")


def metrics_to_csv(metrics: AnalysisMetrics, dest: str | Path | io.TextIOBase) -> None:
    """Write ``metric,time_or_freq,value`` rows with a header.

    Curves use seconds (``edc``, ``echo_density``) or Hz (``spectrum_db``)
    in the middle column; scalars leave it empty. An unmeasurable T60 is
    written as the text ``insufficient decay range``.
    """
    if isinstance(dest, (str, Path)):
        with open(dest, "w", newline="", encoding="utf-8") as fh:
            metrics_to_csv(metrics, fh)
        return
    out = csv.writer(dest)
    out.writerow(CSV_HEADER)
    out.writerow(["t60", "", "insufficient decay range" if metrics.t60 is None else repr(metrics.t60)])
    out.writerow(["mean_group_delay", "", repr(metrics.mean_group_delay)])
    for t, v in zip(metrics.times, metrics.edc):
        out.writerow(["edc", repr(float(t)), repr(float(v))])
    for t, v in zip(metrics.echo_times, metrics.echo_density):
        out.writerow(["echo_density", repr(float(t)), repr(float(v))])
    for f, v in zip(metrics.freqs, metrics.spectrum_db):
        out.writerow(["spectrum_db", repr(float(f)), repr(float(v))])
