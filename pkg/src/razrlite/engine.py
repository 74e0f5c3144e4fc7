"""Render a multichannel room impulse response from a scene.

Signal flow per image source of order >= 1::

    tap (delay, gain) -> object APC -> specular filters -> nearest VRS channel
                                    \\-> diffuse filter -> surface APC -> FDN lines of the last wall

The direct sound goes unfiltered to the VRS channel nearest its direction.
The FDN's line outputs are added to the VRS channels.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.signal as sps

from . import apc as apc_mod
from .decomposition import cascade_apply, design_decomposition_pair
from .fdn import build_vrs_set, design_fdn, eyring_t60, fdn_process, mean_absorption
from .ism import generate_image_sources, last_wall, make_tap
from .model import Scene, derive_geometry, validate_scene
from .scenefile import scene_hash


@dataclass(eq=False)
class ImpulseResponse:
    """One channel per VRS, all of length ``round(ir_length * fs)``."""

    sample_rate: float
    channels: np.ndarray
    metadata: dict = field(default_factory=dict)

    @property
    def n_samples(self) -> int:
        return self.channels.shape[1]

    def mono(self) -> np.ndarray:
        return self.channels.sum(axis=0)

    def output(self, mode: str = "mono") -> np.ndarray:
        """``(1, n)`` for mono, ``(n_vrs, n)`` for vrs."""
        if mode == "mono":
            return self.mono()[None, :]
        if mode == "vrs":
            return self.channels
        raise ValueError(f"unknown output mode {mode!r}")


class ObjectApcCache:
    """Impulse responses of object cascades, keyed by their integer delays."""

    def __init__(self, length: int):
        self.length = length
        self._store: dict[tuple[int, ...], np.ndarray] = {}
        self.lookups = 0
        self.hits = 0

    def get(self, spec: apc_mod.ApcSpec) -> np.ndarray:
        self.lookups += 1
        key = spec.delays
        h = self._store.get(key)
        if h is None:
            h = apc_mod.impulse_response(spec, min(self.length, spec.settle_length()))
            self._store[key] = h
        else:
            self.hits += 1
        return h

    @property
    def unique(self) -> int:
        return len(self._store)

    def stats(self) -> dict:
        rate = self.hits / self.lookups if self.lookups else 0.0
        return {"lookups": self.lookups, "hits": self.hits, "unique": self.unique, "hitRate": rate}


@dataclass
class _TapJob:
    delay: int
    gain: float
    apc_ir: np.ndarray | None
    specular: list
    diffuse: list
    channel: int
    wall: int | None


def _chain_settle(filters) -> int:
    return sum(f.settle_length() for f in filters)


def _tap_signals(job: _TapJob, length: int):
    """Specular and diffuse signals of one tap, starting at the tap's delay.

    Signals stop once every filter in the chain has decayed below
    -340 dB; running further only produces subnormal floats.
    """
    head = 1 if job.apc_ir is None else job.apc_ir.size
    n = min(length - job.delay, head + max(_chain_settle(job.specular), _chain_settle(job.diffuse)))
    x = np.zeros(n)
    if job.apc_ir is None:
        x[0] = job.gain
    else:
        m = min(n, head)
        x[:m] = job.gain * job.apc_ir[:m]
    spec = cascade_apply(job.specular, x)
    diff = None
    if job.diffuse:
        diff = cascade_apply(job.diffuse, x)
    return spec, diff


def _target_t60(scene, geometry) -> float:
    areas = scene.room.wall_areas()
    alpha = mean_absorption(scene.room.walls, areas)
    if alpha <= 0.0:
        return float("inf")
    if alpha >= 1.0:
        return 1e-9
    return eyring_t60(geometry, scene.room.walls, areas)


def render(
    scene: Scene,
    *,
    object_scattering: bool = True,
    hf_ratio: float = 0.5,
    threads: int = 1,
) -> ImpulseResponse:
    """Render ``scene`` into one channel per virtual reverberation source.

    Parameters
    ----------
    scene : Scene
        Validated again here; invalid scenes raise ``SceneError``.
    object_scattering : bool
        ``False`` removes the object-APC stage entirely (used to check
        that ``zeta == 0`` is equivalent to not having it).
    hf_ratio : float
        FDN T60 at 10 kHz relative to broadband; 1.0 disables damping.
    threads : int
        Worker threads for per-tap filtering. Contributions are summed in
        tap order regardless, so the result is bit-identical to ``threads=1``.

    Raises
    ------
    ValueError
        If the IR is shorter than the latest image-source arrival.
    """
    validate_scene(scene)
    cfg = scene.config
    fs = cfg.sample_rate
    c = scene.speed_of_sound
    length = int(np.floor(cfg.ir_length * fs + 0.5))
    rcv = np.asarray(scene.receiver, dtype=float)

    images = generate_image_sources(scene, cfg.ism_order)
    taps = [make_tap(im, scene) for im in images]
    latest = max(t.delay for t in taps)
    if latest >= length:
        raise ValueError(
            f"IR length {cfg.ir_length} s ({length} samples) is shorter than the "
            f"latest image-source arrival at sample {latest}"
        )

    geometry = derive_geometry(scene.room, scene.receiver)
    vrs = build_vrs_set(scene, cfg.fdn_lines)
    pairs = [design_decomposition_pair(w.scattering, w.crossover_hz, fs) for w in scene.room.walls]

    t_s = apc_mod.estimate_local_decay_time(geometry, cfg.surface_decay_scale, c)
    surface = apc_mod.design_surface_apc(t_s, fs) if t_s > 0 else apc_mod.ApcSpec.bypass()

    cache = ObjectApcCache(length)
    channels = np.zeros((cfg.fdn_lines, length))
    wall_diffuse = np.zeros((6, length))
    gammas = []
    jobs = []
    for tap in taps:
        im = tap.source
        channel = vrs.nearest(np.asarray(im.position) - rcv)
        if im.order == 0:
            channels[channel, tap.delay] += tap.gain
            continue
        apc_ir = None
        if object_scattering:
            spec = apc_mod.design_object_apc(im.path_length, scene.zeta, c, fs)
            if not spec.is_bypass:
                gammas.append(apc_mod.object_group_delay(im.path_length, scene.zeta, c))
                apc_ir = cache.get(spec)
        specular = [pairs[w].specular for w in im.wall_hits if not pairs[w].specular.is_identity]
        wall = last_wall(im, rcv)
        diffuse = []
        if not pairs[wall].diffuse.is_zero:
            earlier = list(im.wall_hits)
            earlier.remove(wall)
            diffuse = [pairs[w].specular for w in earlier if not pairs[w].specular.is_identity]
            diffuse.append(pairs[wall].diffuse)
        jobs.append(_TapJob(tap.delay, tap.gain, apc_ir, specular, diffuse, channel, wall))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda j: _tap_signals(j, length), jobs))
    else:
        results = [_tap_signals(j, length) for j in jobs]

    for job, (spec_sig, diff_sig) in zip(jobs, results):
        channels[job.channel, job.delay : job.delay + spec_sig.size] += spec_sig
        if diff_sig is not None:
            wall_diffuse[job.wall, job.delay : job.delay + diff_sig.size] += diff_sig

    target_t60 = _target_t60(scene, geometry)
    fdn = design_fdn(geometry, target_t60, cfg, c, hf_ratio=hf_ratio)
    injected = np.flatnonzero(np.any(wall_diffuse != 0.0, axis=1))
    if injected.size:
        inputs = np.zeros((cfg.fdn_lines, length))
        for w in injected:
            smeared = _smear(surface, wall_diffuse[w])
            members = vrs.assigned(int(w))
            for m in members:
                inputs[m] += smeared / np.sqrt(len(members))
        channels += fdn_process(fdn, inputs)

    if not np.all(np.isfinite(channels)):
        raise FloatingPointError("render produced non-finite samples")

    metadata = {
        "sceneHash": scene_hash(scene),
        "sampleRateHz": fs,
        "samples": length,
        "imageSources": len(images),
        "objectScattering": object_scattering,
        "localDecayTimeSeconds": t_s,
        "surfaceApcDelays": list(surface.delays),
        "objectGammaSeconds": _stats(gammas),
        "objectApcCache": cache.stats(),
        "fdnDelays": [int(d) for d in fdn.delays],
        "fdnLineGains": [float(g) for g in fdn.line_gains],
        "fdnHfDamping": [float(a) for a in fdn.hf_damping],
        "fdnTargetT60Seconds": target_t60,
        "hfRatio": hf_ratio,
        "vrsWalls": list(vrs.wall_of),
        "geometry": {
            "volume": geometry.volume,
            "surfaceArea": geometry.surface_area,
            "meanFreePath": geometry.mean_free_path,
            "meanWallDistance": geometry.mean_wall_distance,
        },
    }
    return ImpulseResponse(fs, channels, metadata)


def _smear(surface: apc_mod.ApcSpec, x: np.ndarray) -> np.ndarray:
    """Surface APC over ``x``, stopping once the tail after the last input has settled."""
    end = int(np.flatnonzero(x)[-1]) + 1
    n = min(x.size, end + surface.settle_length())
    out = np.zeros_like(x)
    out[:n] = apc_mod.apc_process(surface, x[:n])
    return out


def _stats(values) -> dict:
    if not values:
        return {"count": 0}
    v = np.asarray(values)
    return {"count": int(v.size), "min": float(v.min()), "mean": float(v.mean()), "max": float(v.max())}


def render_specular_ism(scene: Scene) -> ImpulseResponse:
    """Classical broadband ISM: one scaled impulse per image source, nothing else."""
    validate_scene(scene)
    cfg = scene.config
    length = int(np.floor(cfg.ir_length * cfg.sample_rate + 0.5))
    vrs = build_vrs_set(scene, cfg.fdn_lines)
    rcv = np.asarray(scene.receiver, dtype=float)
    channels = np.zeros((cfg.fdn_lines, length))
    for im in generate_image_sources(scene, cfg.ism_order):
        tap = make_tap(im, scene)
        channels[vrs.nearest(np.asarray(im.position) - rcv), tap.delay] += tap.gain
    return ImpulseResponse(cfg.sample_rate, channels, {"sceneHash": scene_hash(scene)})


def convolve(ir: ImpulseResponse, dry: np.ndarray, dry_rate: float | None = None, mode: str = "mono") -> np.ndarray:
    """Convolve ``dry`` with each output channel; ``len(dry) + len(ir) - 1`` samples each.

    Raises
    ------
    ValueError
        If ``dry_rate`` is given and differs from the IR's sample rate.
    """
    if dry_rate is not None and dry_rate != ir.sample_rate:
        raise ValueError(f"sample rate mismatch: IR {ir.sample_rate} Hz, dry {dry_rate} Hz")
    dry = np.asarray(dry, dtype=float)
    return np.stack([sps.fftconvolve(ch, dry) for ch in ir.output(mode)])

