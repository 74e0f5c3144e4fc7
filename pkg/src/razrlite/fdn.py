"""Feedback delay network late reverb with spatially mapped outputs.

Each delay line feeds one virtual reverberation source (VRS), a fixed
direction around the receiver. Scattered image-source energy enters the
lines whose VRS point at the wall it came from.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.signal as sps

from .model import RenderConfig, RoomGeometry, Scene, WallMaterial

HF_REFERENCE_HZ = 10_000.0
ICOSAHEDRON_TWIST = 0.2  # rad about (1,1,1); keeps cube symmetry, no vertex on an axis plane


@dataclass(frozen=True, eq=False)
class FdnSpec:
    """Delay lengths, Householder feedback matrix and per-line losses.

    ``line_gains`` set the broadband decay; ``hf_damping`` holds the
    one-pole lowpass coefficient ``a`` of ``(1 - a) / (1 - a z^-1)``
    applied to each line's feedback (0 disables it).
    """

    delays: np.ndarray
    matrix: np.ndarray
    line_gains: np.ndarray
    hf_damping: np.ndarray
    sample_rate: float
    target_t60: float

    @property
    def n_lines(self) -> int:
        return len(self.delays)


@dataclass(frozen=True, eq=False)
class VrsSet:
    directions: np.ndarray  # (n, 3) unit vectors from the receiver
    wall_of: tuple[int, ...]  # wall index per VRS

    def assigned(self, wall: int) -> tuple[int, ...]:
        return tuple(i for i, w in enumerate(self.wall_of) if w == wall)

    @property
    def wall_assignment(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.assigned(w) for w in range(6))

    def nearest(self, direction) -> int:
        d = np.asarray(direction, dtype=float)
        return int(np.argmax(self.directions @ (d / np.linalg.norm(d))))


def sabine_t60(geometry: RoomGeometry, mean_absorption: float) -> float:
    return 0.161 * geometry.volume / (geometry.surface_area * mean_absorption)


def mean_absorption(walls, areas) -> float:
    areas = np.asarray(areas, dtype=float)
    alphas = np.array([w.absorption for w in walls])
    return float(np.sum(alphas * areas) / np.sum(areas))


def eyring_t60(geometry: RoomGeometry, walls: tuple[WallMaterial, ...], areas) -> float:
    """Eyring reverberation time ``0.161 V / (-S ln(1 - mean alpha))``.

    Raises
    ------
    ValueError
        If the area-weighted absorption is not strictly between 0 and 1.
    """
    alpha = mean_absorption(walls, areas)
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"mean absorption {alpha:.4g} must lie strictly in (0, 1)")
    with np.errstate(over="ignore"):
        # subnormal alpha overflows to inf, i.e. no decay
        return float(0.161 * geometry.volume / (-geometry.surface_area * np.log1p(-alpha)))


def householder_matrix(n: int) -> np.ndarray:
    return np.eye(n) - (2.0 / n) * np.ones((n, n))


def _primes_between(lo: int, hi: int) -> np.ndarray:
    sieve = np.ones(hi + 1, dtype=bool)
    sieve[:2] = False
    for i in range(2, int(hi**0.5) + 1):
        if sieve[i]:
            sieve[i * i :: i] = False
    p = np.nonzero(sieve)[0]
    return p[p >= lo]


def line_delays(mean_free_path: float, n: int, sample_rate: float, speed_of_sound: float = 343.0) -> np.ndarray:
    """Distinct primes nearest to ``n`` log-spaced targets in ``[0.7, 1.3]`` times the mean free path.

    Raises
    ------
    ValueError
        If the mean free path is shorter than ``n`` samples, or the range
        holds fewer than ``n`` primes.
    """
    center = mean_free_path * sample_rate / speed_of_sound
    if center < n:
        raise ValueError(
            f"mean free path spans {center:.1f} samples, fewer than {n} lines; room too small for this rate"
        )
    lo, hi = int(np.ceil(0.7 * center)), int(np.floor(1.3 * center))
    primes = list(_primes_between(lo, hi))
    if len(primes) < n:
        raise ValueError(f"only {len(primes)} primes in [{lo}, {hi}] for {n} delay lines")
    chosen = []
    for target in np.geomspace(0.7 * center, 1.3 * center, n):
        best = min((p for p in primes if p not in chosen), key=lambda p: (abs(p - target), p))
        chosen.append(int(best))
    return np.array(sorted(chosen))


def hf_damping_coefficient(line_gain: float, sample_rate: float, ratio: float = 0.5, freq: float = HF_REFERENCE_HZ) -> float:
    """One-pole coefficient making the T60 at ``freq`` equal ``ratio`` times the broadband T60.

    Solves ``|(1-a)/(1-a e^{-jw})| = line_gain**(1/ratio - 1)`` for ``a``;
    the lowpass has unit DC gain so low frequencies keep the broadband decay.
    """
    if ratio >= 1.0 or freq >= sample_rate / 2 or line_gain <= 0.0:
        return 0.0
    extra = line_gain ** (1.0 / ratio - 1.0)
    c = np.cos(2.0 * np.pi * freq / sample_rate)
    e2 = extra * extra
    # (1-a)^2 = e2 (1 - 2 a c + a^2)  ->  A a^2 + B a + A = 0
    qa = 1.0 - e2
    qb = -2.0 + 2.0 * e2 * c
    if qa <= 0:
        return 0.0
    return float((-qb - np.sqrt(qb * qb - 4.0 * qa * qa)) / (2.0 * qa))


def design_fdn(
    geometry: RoomGeometry,
    target_t60: float,
    config: RenderConfig,
    speed_of_sound: float = 343.0,
    hf_ratio: float = 0.5,
) -> FdnSpec:
    """Prime delays around the mean free path, Householder mixing, T60-matched gains.

    ``hf_ratio`` is the T60 at 10 kHz relative to ``target_t60``; 1.0
    turns HF damping off.
    """
    if not target_t60 > 0:
        raise ValueError("target T60 must be positive")
    fs = config.sample_rate
    n = config.fdn_lines
    delays = line_delays(geometry.mean_free_path, n, fs, speed_of_sound)
    if np.isinf(target_t60):
        gains = np.ones(n)
    else:
        gains = 10.0 ** (-3.0 * delays / (fs * target_t60))
    damping = np.array([hf_damping_coefficient(g, fs, hf_ratio) for g in gains])
    return FdnSpec(delays, householder_matrix(n), gains, damping, fs, float(target_t60))


def fdn_process(spec: FdnSpec, inputs: np.ndarray) -> np.ndarray:
    """Run the network over ``(n_lines, n_samples)`` inputs; one output per line.

    Output ``m`` is delay line ``m`` read ``delays[m]`` samples after
    the write. The feedback written back is the Householder mix of the
    damped, attenuated line outputs plus the input. Blocks no longer than
    the shortest delay are processed at once: nothing read inside a block
    can depend on a write from the same block.
    """
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    n, length = x.shape
    if n != spec.n_lines:
        raise ValueError(f"expected {spec.n_lines} input channels, got {n}")
    delays = spec.delays
    block = int(delays.min())
    # line[m, k + delays[m]] holds what was written at time k
    lines = np.zeros((n, length + int(delays.max())))
    out = np.empty((n, length))
    b = [np.array([1.0 - a]) for a in spec.hf_damping]
    a = [np.array([1.0, -c]) for c in spec.hf_damping]
    zi = np.zeros((n, 1))
    gains = spec.line_gains[:, None]
    householder = np.allclose(spec.matrix, householder_matrix(n))
    for start in range(0, length, block):
        stop = min(length, start + block)
        y = lines[:, start:stop]
        out[:, start:stop] = y
        fb = gains * y
        for m in range(n):
            if spec.hf_damping[m] != 0.0:
                fb[m], zi[m] = sps.lfilter(b[m], a[m], fb[m], zi=zi[m])
        if householder:
            mixed = fb - (2.0 / n) * fb.sum(axis=0)
        else:
            mixed = spec.matrix @ fb
        mixed += x[:, start:stop]
        for m in range(n):
            d = int(delays[m])
            lines[m, start + d : stop + d] = mixed[m]
    return out


def icosahedron_directions() -> np.ndarray:
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = []
    for s1 in (-1.0, 1.0):
        for s2 in (-phi, phi):
            verts += [(0.0, s1, s2), (s1, s2, 0.0), (s2, 0.0, s1)]
    v = np.array(verts)
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    k = np.ones(3) / np.sqrt(3.0)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    t = ICOSAHEDRON_TWIST
    rot = np.eye(3) + np.sin(t) * kx + (1.0 - np.cos(t)) * kx @ kx
    return v @ rot.T


def fibonacci_directions(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(1.0 - z * z)
    theta = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(theta), r * np.sin(theta), z])


def first_wall_hit(receiver, direction, dimensions) -> int:
    """Index of the wall a ray from ``receiver`` along ``direction`` reaches first."""
    best, best_t = -1, np.inf
    for axis in range(3):
        d = direction[axis]
        if d > 0:
            t, wall = (dimensions[axis] - receiver[axis]) / d, 2 * axis + 1
        elif d < 0:
            t, wall = -receiver[axis] / d, 2 * axis
        else:
            continue
        if t < best_t:
            best, best_t = wall, t
    return best


def build_vrs_set(scene: Scene, n: int | None = None) -> VrsSet:
    """VRS directions and their wall assignment as seen from the receiver.

    Each VRS belongs to the wall its ray hits first. A wall left empty
    takes the VRS pointing most directly at it from a wall that owns
    more than one.
    """
    n = scene.config.fdn_lines if n is None else n
    dirs = icosahedron_directions() if n == 12 else fibonacci_directions(n)
    dims = scene.room.dimensions
    wall_of = [first_wall_hit(scene.receiver, d, dims) for d in dirs]
    outward = np.vstack([np.eye(3)[w // 2] * (1 if w % 2 else -1) for w in range(6)])
    for wall in range(6):
        if wall in wall_of:
            continue
        counts = np.bincount(wall_of, minlength=6)
        donors = [i for i in range(n) if counts[wall_of[i]] > 1]
        if not donors:
            break
        pick = max(donors, key=lambda i: (dirs[i] @ outward[wall], -i))
        wall_of[pick] = wall
    return VrsSet(dirs, tuple(wall_of))
