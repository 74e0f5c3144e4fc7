"""Specular/diffuse decomposition filters for image sources.

Each wall splits an incident image source into a low-shelving specular
part and a high-pass diffuse part whose squared magnitudes sum to one:

    |H_diff(f)|^2 = delta * u / (1 + u),   u = (f / f_c)^4
    |H_spec(f)|^2 = 1 - |H_diff(f)|^2

Both are realized as second-order sections fitted to these targets.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.signal as sps
from scipy.optimize import least_squares

FIT_POINTS = 256
FIT_LOW_HZ = 20.0
FIT_HIGH_FRACTION = 0.45


@dataclass(frozen=True)
class SecondOrderFilter:
    """Direct-form biquad ``(b0 + b1 z^-1 + b2 z^-2) / (1 + a1 z^-1 + a2 z^-2)``."""

    b: tuple[float, float, float]
    a: tuple[float, float, float] = (1.0, 0.0, 0.0)

    @classmethod
    def identity(cls) -> "SecondOrderFilter":
        return cls((1.0, 0.0, 0.0))

    @classmethod
    def zero(cls) -> "SecondOrderFilter":
        return cls((0.0, 0.0, 0.0))

    @property
    def is_identity(self) -> bool:
        return self.b == (1.0, 0.0, 0.0) and self.a == (1.0, 0.0, 0.0)

    @property
    def is_zero(self) -> bool:
        return not any(self.b)

    def poles(self) -> np.ndarray:
        return np.roots(self.a) if any(self.a[1:]) else np.zeros(0)

    def zeros(self) -> np.ndarray:
        b = np.trim_zeros(np.asarray(self.b), "b")
        return np.roots(b) if b.size > 1 else np.zeros(0)

    def settle_length(self, residual: float = 1e-34) -> int:
        """Samples until the impulse-response energy envelope falls below ``residual``."""
        p = self.poles()
        r = float(np.max(np.abs(p))) if p.size else 0.0
        if r == 0.0:
            return 3
        return int(np.ceil(np.log(residual) / (2.0 * np.log(r)))) + 3

    def frequency_response(self, w: np.ndarray) -> np.ndarray:
        _, h = sps.freqz(self.b, self.a, worN=np.asarray(w, dtype=float))
        return h


@dataclass(frozen=True)
class DecompositionPair:
    specular: SecondOrderFilter
    diffuse: SecondOrderFilter
    delta: float
    crossover_hz: float
    sample_rate: float


def decomposition_targets(delta: float, crossover_hz: float, freq_hz) -> tuple[np.ndarray, np.ndarray]:
    """Analytic ``(specular_power, diffuse_power)`` at ``freq_hz``."""
    r = np.asarray(freq_hz, dtype=float) / crossover_hz
    # u/(1+u) == 1/(1+1/u); evaluate each branch only where it cannot overflow
    low = np.minimum(r, 1.0) ** 4
    high = np.reciprocal(np.maximum(r, 1.0)) ** 4
    diffuse = delta * np.where(r > 1.0, 1.0 / (1.0 + high), low / (1.0 + low))
    return 1.0 - diffuse, diffuse


def fit_frequencies(sample_rate: float, n: int = FIT_POINTS) -> np.ndarray:
    return np.geomspace(FIT_LOW_HZ, FIT_HIGH_FRACTION * sample_rate, n)


def _analog_prototypes(delta):
    """Power-complementary analog pair normalized to a 1 rad/s crossover."""
    den = [1.0, np.sqrt(2.0), 1.0]
    r = np.sqrt(1.0 - delta)
    spec = [r, np.sqrt(2.0 * r), 1.0]
    diff = [np.sqrt(delta), 0.0, 0.0]
    return spec, diff, den


def _bilinear_prewarped(b, a, crossover_hz, sample_rate):
    wa = 2.0 * sample_rate * np.tan(np.pi * crossover_hz / sample_rate)
    scale = np.array([1.0 / wa**2, 1.0 / wa, 1.0])
    bz, az = sps.bilinear(np.asarray(b) * scale, np.asarray(a) * scale, sample_rate)
    bz = np.concatenate([bz, np.zeros(3 - bz.size)])
    return bz / az[0], az / az[0]


def _minimum_phase(b, a):
    """Reflect zeros and poles outside the unit circle, preserving |H|."""
    z, p, k = sps.tf2zpk(b, a)
    out_z = np.abs(z) > 1.0
    out_p = np.abs(p) > 1.0
    k = k * np.prod(np.abs(z[out_z])) / np.prod(np.abs(p[out_p]))
    z = np.where(out_z, 1.0 / np.conj(z), z)
    p = np.where(out_p, 1.0 / np.conj(p), p)
    bm, am = sps.zpk2tf(z, p, k)
    bm = np.concatenate([np.real(bm), np.zeros(3 - len(bm))])
    am = np.concatenate([np.real(am), np.zeros(3 - len(am))])
    return bm, am


def _fit_db(b0, a0, target_power, w):
    target_db = 10.0 * np.log10(target_power)

    def residual(x):
        _, h = sps.freqz(x[:3], [1.0, x[3], x[4]], worN=w)
        return 10.0 * np.log10(np.abs(h) ** 2 + 1e-300) - target_db

    x0 = np.concatenate([b0, a0[1:]])
    sol = least_squares(residual, x0, method="lm", xtol=1e-13, ftol=1e-13)
    b, a = _minimum_phase(sol.x[:3], np.array([1.0, sol.x[3], sol.x[4]]))
    return SecondOrderFilter(tuple(float(v) for v in b), tuple(float(v) for v in a))


@lru_cache(maxsize=256)
def design_decomposition_pair(delta: float, crossover_hz: float, sample_rate: float) -> DecompositionPair:
    """Fit the specular/diffuse biquad pair for one wall.

    The bilinear map of the analog prototype pair (prewarped at the
    crossover) seeds a least-squares fit on dB error at log-spaced
    frequencies between 20 Hz and ``0.45 * sample_rate``. Zeros and poles
    are reflected into the unit circle afterwards, so both filters are
    stable and minimum phase.

    Raises
    ------
    ValueError
        If ``crossover_hz`` is outside ``(0, sample_rate / 2)`` or
        ``delta`` outside ``[0, 1]``.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError(f"scattering coefficient must lie in [0, 1], got {delta}")
    if not 0.0 < crossover_hz < sample_rate / 2.0:
        raise ValueError(f"crossover {crossover_hz} Hz outside (0, {sample_rate / 2} Hz)")
    if delta == 0.0:
        return DecompositionPair(
            SecondOrderFilter.identity(), SecondOrderFilter.zero(), delta, crossover_hz, sample_rate
        )

    spec = _fit_specular(delta, crossover_hz, sample_rate)
    # the diffuse target is linear in delta, so scale the delta = 1 fit
    unit = _fit_unit_diffuse(crossover_hz, sample_rate)
    k = np.sqrt(delta)
    diff = SecondOrderFilter(tuple(k * v for v in unit.b), unit.a)
    return DecompositionPair(spec, diff, delta, crossover_hz, sample_rate)


def _fit_specular(delta, crossover_hz, sample_rate):
    f = fit_frequencies(sample_rate)
    spec_pow, _ = decomposition_targets(delta, crossover_hz, f)
    bs, _, den = _analog_prototypes(delta)
    seed = _bilinear_prewarped(bs, den, crossover_hz, sample_rate)
    return _fit_db(*seed, spec_pow, 2.0 * np.pi * f / sample_rate)


@lru_cache(maxsize=64)
def _fit_unit_diffuse(crossover_hz, sample_rate):
    f = fit_frequencies(sample_rate)
    _, diff_pow = decomposition_targets(1.0, crossover_hz, f)
    _, bd, den = _analog_prototypes(1.0)
    seed = _bilinear_prewarped(bd, den, crossover_hz, sample_rate)
    return _fit_db(*seed, diff_pow, 2.0 * np.pi * f / sample_rate)


def filter_apply(filt: SecondOrderFilter, x: np.ndarray, tail: int = 0) -> np.ndarray:
    """Run ``x`` (plus ``tail`` zeros) through the biquad."""
    x = np.asarray(x, dtype=float)
    if tail:
        x = np.concatenate([x, np.zeros(int(tail))])
    if filt.is_identity:
        return x.copy()
    if filt.is_zero:
        return np.zeros_like(x)
    return sps.lfilter(filt.b, filt.a, x)


def cascade_apply(filters, x: np.ndarray) -> np.ndarray:
    y = np.asarray(x, dtype=float)
    for filt in filters:
        y = filter_apply(filt, y)
    return y
