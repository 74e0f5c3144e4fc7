"""All-pass cascades (APC) that smear reflections in time.

Two parameterizations share the same four-stage Schroeder structure:

* the surface-scattering decay filter, with identical gains ``1/sqrt(2)``
  and delays spaced by powers of ``pi`` so that the longest stage decays
  by 60 dB in the local decay time ``T_s``;
* the object-scattering filter, with tapered gains and delays scaled so
  the cascade's group delay equals ``zeta * d / c``, giving a
  gamma-like envelope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal as sps

from .model import RoomGeometry

ETA = np.pi
SQRT1_2 = 1.0 / np.sqrt(2.0)
SURFACE_GAINS = (SQRT1_2,) * 4
OBJECT_GAINS = (SQRT1_2, SQRT1_2, 0.5, SQRT1_2**3)

SURFACE = "surfaceDecay"
OBJECT = "objectGamma"
BYPASS = "bypass"


@dataclass(frozen=True)
class AllPassStage:
    """One Schroeder all-pass ``(g + z^-tau) / (1 + g z^-tau)``."""

    gain: float
    delay: int

    def __post_init__(self):
        if not abs(self.gain) < 1.0:
            raise ValueError(f"all-pass gain must satisfy |g| < 1, got {self.gain}")
        if int(self.delay) != self.delay or self.delay < 1:
            raise ValueError(f"all-pass delay must be an integer >= 1, got {self.delay}")

    def frequency_response(self, w: np.ndarray) -> np.ndarray:
        zt = np.exp(-1j * np.asarray(w) * self.delay)
        return (self.gain + zt) / (1.0 + self.gain * zt)


@dataclass(frozen=True)
class ApcSpec:
    stages: tuple[AllPassStage, ...]
    kind: str

    def __post_init__(self):
        if self.kind == BYPASS:
            if self.stages:
                raise ValueError("a bypass cascade has no stages")
        elif self.kind in (SURFACE, OBJECT):
            if len(self.stages) != 4:
                raise ValueError(f"{self.kind} cascade needs 4 stages, got {len(self.stages)}")
        else:
            raise ValueError(f"unknown cascade kind {self.kind!r}")

    @classmethod
    def bypass(cls) -> "ApcSpec":
        return cls((), BYPASS)

    @property
    def is_bypass(self) -> bool:
        return self.kind == BYPASS

    @property
    def delays(self) -> tuple[int, ...]:
        return tuple(s.delay for s in self.stages)

    @property
    def gains(self) -> tuple[float, ...]:
        return tuple(s.gain for s in self.stages)

    def frequency_response(self, w: np.ndarray) -> np.ndarray:
        h = np.ones(np.shape(w), dtype=complex)
        for stage in self.stages:
            h = h * stage.frequency_response(w)
        return h

    def settle_length(self, residual: float = 1e-34) -> int:
        """Samples after which the impulse-response energy left is below ``residual``.

        Uses the per-stage decay ``g^k`` per ``tau`` samples of the
        longest-lasting stage, padded by the sum of all delays.
        """
        if self.is_bypass:
            return 1
        worst = 0.0
        for s in self.stages:
            # energy after k periods ~ g^(2k)
            periods = np.log(residual) / (2.0 * np.log(abs(s.gain))) if s.gain else 1.0
            worst = max(worst, periods * s.delay)
        return int(np.ceil(worst)) + sum(self.delays) + 1


def _round_half_up(x):
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(int)


def allpass_process(stage: AllPassStage, x: np.ndarray, tail: int = 0) -> np.ndarray:
    """Run one all-pass stage over ``x`` followed by ``tail`` zeros.

    Realizes ``y[n] = g x[n] + x[n-tau] - g y[n-tau]``. Folding the signal
    into rows of ``tau`` samples turns the comb into a first-order
    recursion across rows, which ``lfilter`` runs along axis 0.
    """
    x = np.asarray(x, dtype=float)
    n = x.size + int(tail)
    tau = stage.delay
    rows = -(-n // tau)
    buf = np.zeros(rows * tau)
    buf[: x.size] = x
    folded = buf.reshape(rows, tau)
    g = stage.gain
    y = sps.lfilter([g, 1.0], [1.0, g], folded, axis=0)
    return y.reshape(-1)[:n]


def apc_process(spec: ApcSpec, x: np.ndarray, tail: int = 0) -> np.ndarray:
    """Apply the cascade in series; output length is ``len(x) + tail``."""
    y = np.zeros(np.size(x) + int(tail))
    y[: np.size(x)] = x
    for stage in spec.stages:
        y = allpass_process(stage, y)
    return y


def impulse_response(spec: ApcSpec, length: int | None = None) -> np.ndarray:
    if length is None:
        length = spec.settle_length()
    return apc_process(spec, np.ones(1), int(length) - 1)


def estimate_local_decay_time(
    geometry: RoomGeometry, scale: float = 1.0, speed_of_sound: float = 343.0
) -> float:
    """Local decay time of surface scattering, ``scale * 2 R / c``.

    ``R`` is the mean perpendicular wall distance, which makes the
    resulting cascade independent of source and receiver positions.
    A zero ``scale`` returns 0 and the caller is expected to bypass.
    """
    if scale < 0 or speed_of_sound <= 0 or geometry.mean_wall_distance <= 0:
        raise ValueError("scale must be >= 0 and distances/speed positive")
    return scale * 2.0 * geometry.mean_wall_distance / speed_of_sound


def design_surface_apc(local_decay_time: float, sample_rate: float) -> ApcSpec:
    """Four equal-gain stages whose longest delay decays 60 dB in ``local_decay_time``.

    The base delay is ``T_s * log10(1/g) / 3`` seconds (Schroeder's
    all-pass T60 relation); stage ``i`` uses that delay divided by
    ``pi**i``. Rounded delays are clamped to at least one sample.

    Raises
    ------
    ValueError
        If ``local_decay_time`` is not positive, or so short that the
        longest delay rounds below one sample at ``sample_rate``.
    """
    if not local_decay_time > 0 or not sample_rate > 0:
        raise ValueError("local decay time and sample rate must be positive")
    base = local_decay_time * np.log10(1.0 / SQRT1_2) / 3.0 * sample_rate
    if _round_half_up(base) < 1:
        raise ValueError(
            f"local decay time {local_decay_time * 1e3:.4g} ms too short for "
            f"{sample_rate:g} Hz: longest delay rounds to 0 samples"
        )
    delays = np.maximum(_round_half_up(base / ETA ** np.arange(4)), 1)
    return ApcSpec(tuple(AllPassStage(g, int(t)) for g, t in zip(SURFACE_GAINS, delays)), SURFACE)


def object_group_delay(path_length: float, zeta: float, speed_of_sound: float = 343.0) -> float:
    """Target group delay in seconds, ``zeta * d / c``."""
    return zeta * path_length / speed_of_sound


def design_object_apc(
    path_length: float, zeta: float, speed_of_sound: float = 343.0, sample_rate: float = 44100.0
) -> ApcSpec:
    """Gamma-envelope cascade for one specular reflection of length ``path_length``.

    Delays are ``tau0 * fs * (pi^-3, pi^-2, pi^-1, 1)`` with
    ``tau0 = gamma / sum(pi^-k, k=0..3)`` so that their sum equals the
    target group delay ``gamma`` before rounding. ``zeta == 0`` gives the
    bypass cascade.
    """
    if not path_length > 0:
        raise ValueError(f"path length must be positive, got {path_length}")
    if not 0.0 <= zeta <= 1.0:
        raise ValueError(f"zeta must lie in [0, 1], got {zeta}")
    if zeta == 0:
        return ApcSpec.bypass()
    gamma = object_group_delay(path_length, zeta, speed_of_sound)
    tau0 = gamma / np.sum(ETA ** -np.arange(4.0))
    delays = np.maximum(_round_half_up(tau0 * sample_rate * ETA ** np.arange(-3.0, 1.0)), 1)
    return ApcSpec(tuple(AllPassStage(g, int(t)) for g, t in zip(OBJECT_GAINS, delays)), OBJECT)


def average_group_delay(spec: ApcSpec) -> int:
    """Full-band mean group delay in samples.

    Each stage's phase falls by ``2 pi tau`` around the unit circle, so
    the band average is exactly the sum of the delays.
    """
    return int(sum(spec.delays))
