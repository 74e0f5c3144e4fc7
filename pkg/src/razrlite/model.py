"""Room, material and scene types, plus input validation.

All types are frozen dataclasses; once a scene has passed
:func:`validate_scene` it can be shared freely between renders.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

WALL_NAMES = ("-x", "+x", "-y", "+y", "-z", "+z")
OUTPUT_MODES = ("mono", "vrs")


class SceneError(ValueError):
    """An input violates a domain invariant.

    ``path`` names the offending field, e.g. ``room.walls[2].scattering``.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}")


@dataclass(frozen=True)
class WallMaterial:
    """Broadband absorption plus the two-parameter scattering description.

    Parameters
    ----------
    absorption : float
        Energy absorption coefficient in [0, 1].
    scattering : float
        High-frequency scattering coefficient in [0, 1]; the fraction of
        reflected energy that is diffuse well above ``crossover_hz``.
    crossover_hz : float
        Transition frequency between specular and diffuse behaviour.
    """

    absorption: float = 0.1
    scattering: float = 0.0
    crossover_hz: float = 1000.0


@dataclass(frozen=True)
class Room:
    dimensions: tuple[float, float, float]
    walls: tuple[WallMaterial, ...]

    @classmethod
    def uniform(cls, dimensions: Sequence[float], material: WallMaterial) -> "Room":
        return cls(tuple(float(v) for v in dimensions), (material,) * 6)

    def wall_areas(self) -> np.ndarray:
        """Areas of the six walls in ``WALL_NAMES`` order."""
        lx, ly, lz = self.dimensions
        return np.array([ly * lz, ly * lz, lx * lz, lx * lz, lx * ly, lx * ly])


@dataclass(frozen=True)
class RenderConfig:
    sample_rate: float = 44100.0
    ism_order: int = 3
    fdn_lines: int = 12
    ir_length: float = 2.0
    surface_decay_scale: float = 1.0
    output_mode: str = "mono"


@dataclass(frozen=True)
class Scene:
    room: Room
    source: tuple[float, float, float]
    receiver: tuple[float, float, float]
    zeta: float = 0.0
    speed_of_sound: float = 343.0
    config: RenderConfig = field(default_factory=RenderConfig)


@dataclass(frozen=True)
class RoomGeometry:
    volume: float
    surface_area: float
    mean_free_path: float
    mean_wall_distance: float


def _check_range(path, value, lo, hi, what):
    if not np.isfinite(value) or value < lo or value > hi:
        raise SceneError(path, f"{what} out of range [{lo}, {hi}]: {value!r}")


def _check_inside(path, pos, dims, what):
    if len(pos) != 3:
        raise SceneError(path, f"{what} must have 3 coordinates")
    for p, lim in zip(pos, dims):
        if not np.isfinite(p) or not 0.0 < p < lim:
            raise SceneError(path, f"{what} outside room: {tuple(pos)!r}")


def validate_scene(scene: Scene) -> Scene:
    """Check every invariant of ``scene`` and return it unchanged.

    Raises
    ------
    SceneError
        For the first violated invariant, carrying the field path.
    """
    cfg = scene.config
    if not cfg.sample_rate > 0:
        raise SceneError("config.sampleRateHz", "sample rate must be positive")
    if int(cfg.ism_order) != cfg.ism_order or cfg.ism_order < 0:
        raise SceneError("config.ismOrder", "ISM order must be a non-negative integer")
    if int(cfg.fdn_lines) != cfg.fdn_lines or cfg.fdn_lines < 1:
        raise SceneError("config.fdnLines", "FDN line count must be a positive integer")
    if not cfg.ir_length > 0:
        raise SceneError("config.irLengthSeconds", "IR length must be positive")
    if not np.isfinite(cfg.surface_decay_scale) or cfg.surface_decay_scale < 0:
        raise SceneError("config.surfaceDecayScale", "surface decay scale must be >= 0")
    if cfg.output_mode not in OUTPUT_MODES:
        raise SceneError("config.outputMode", f"output mode must be one of {OUTPUT_MODES}")

    room = scene.room
    if len(room.dimensions) != 3:
        raise SceneError("room.dimensions", "room needs exactly 3 dimensions")
    for i, v in enumerate(room.dimensions):
        if not np.isfinite(v) or v <= 0:
            raise SceneError(f"room.dimensions[{i}]", "room dimensions must be positive")
    if len(room.walls) != 6:
        raise SceneError("room.walls", "room needs exactly 6 wall materials")
    nyquist = cfg.sample_rate / 2
    for i, w in enumerate(room.walls):
        _check_range(f"room.walls[{i}].absorption", w.absorption, 0.0, 1.0, "absorption")
        _check_range(f"room.walls[{i}].scattering", w.scattering, 0.0, 1.0, "scattering")
        if not np.isfinite(w.crossover_hz) or not 0 < w.crossover_hz < nyquist:
            raise SceneError(
                f"room.walls[{i}].crossoverHz",
                f"crossover must lie in (0, {nyquist}) Hz: {w.crossover_hz!r}",
            )

    _check_inside("source", scene.source, room.dimensions, "source")
    _check_inside("receiver", scene.receiver, room.dimensions, "receiver")
    if tuple(scene.source) == tuple(scene.receiver):
        # the direct path would have no direction and zero length
        raise SceneError("receiver", "receiver coincides with source")
    _check_range("zeta", scene.zeta, 0.0, 1.0, "geometric deviation")
    if not np.isfinite(scene.speed_of_sound) or scene.speed_of_sound <= 0:
        raise SceneError("speedOfSound", "speed of sound must be positive")
    return scene


def derive_geometry(room: Room, receiver: Sequence[float]) -> RoomGeometry:
    """Volume, surface, mean free path (4V/S) and mean perpendicular wall distance.

    The mean of the six perpendicular distances is ``(Lx+Ly+Lz)/6`` for any
    receiver inside a shoebox; ``receiver`` is accepted for interface
    symmetry and range-checked only.
    """
    lx, ly, lz = room.dimensions
    _check_inside("receiver", receiver, room.dimensions, "receiver")
    volume = lx * ly * lz
    surface = 2.0 * (lx * ly + lx * lz + ly * lz)
    x, y, z = receiver
    mean_dist = (x + (lx - x) + y + (ly - y) + z + (lz - z)) / 6.0
    return RoomGeometry(
        volume=volume,
        surface_area=surface,
        mean_free_path=4.0 * volume / surface,
        mean_wall_distance=mean_dist,
    )
