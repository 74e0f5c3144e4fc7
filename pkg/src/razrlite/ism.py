"""Shoebox image-source enumeration and tap construction.

Wall indices follow ``model.WALL_NAMES``: 0 = -x, 1 = +x, 2 = -y,
3 = +y, 4 = -z, 5 = +z.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Room, Scene


@dataclass(frozen=True)
class ImageSource:
    position: tuple[float, float, float]
    order: int
    lattice_index: tuple[int, int, int]
    wall_hits: tuple[int, ...]
    path_length: float


@dataclass(frozen=True)
class IsTap:
    delay: int
    gain: float
    source: ImageSource


def lattice_indices(max_order: int, exact: bool = False):
    """All ``(p, q, r)`` with ``|p|+|q|+|r| <= max_order`` (or ``==`` when ``exact``).

    Ordered by reflection order, then lexicographically.
    """
    out = []
    for n in range(0 if not exact else max_order, max_order + 1):
        for p in range(-n, n + 1):
            rest = n - abs(p)
            for q in range(-rest, rest + 1):
                r = rest - abs(q)
                out.extend({(p, q, r), (p, q, -r)})
    return sorted(out, key=lambda i: (sum(map(abs, i)), i))


def image_coordinate(m: int, length: float, s: float) -> float:
    """Mirror coordinate on one axis for lattice index ``m``."""
    return m * length + (s if m % 2 == 0 else length - s)


def image_position(room: Room, source, lattice_index) -> tuple[float, float, float]:
    return tuple(
        image_coordinate(m, length, s)
        for m, length, s in zip(lattice_index, room.dimensions, source)
    )


def axis_hits(axis: int, m: int) -> tuple[int, ...]:
    """Walls hit on one axis, in travel order from source to receiver.

    The unfolded path crosses the planes ``k * L`` between the image cell
    and the real room; plane ``k`` is the low wall for even ``k`` and the
    high wall for odd ``k``.
    """
    planes = range(m, 0, -1) if m > 0 else range(m + 1, 1)
    return tuple(2 * axis + (k % 2) for k in planes)


def wall_hits(lattice_index) -> tuple[int, ...]:
    """Per-axis reflections concatenated x, y, z (not a global time order)."""
    return tuple(h for axis, m in enumerate(lattice_index) for h in axis_hits(axis, m))


def generate_image_sources(scene: Scene, max_order: int) -> list[ImageSource]:
    """Every image source of order ``<= max_order``, the original first."""
    if max_order < 0:
        raise ValueError("max_order must be >= 0")
    rcv = np.asarray(scene.receiver, dtype=float)
    out = []
    for idx in lattice_indices(max_order):
        pos = image_position(scene.room, scene.source, idx)
        out.append(
            ImageSource(
                position=pos,
                order=sum(abs(m) for m in idx),
                lattice_index=idx,
                wall_hits=wall_hits(idx),
                path_length=float(np.linalg.norm(np.asarray(pos) - rcv)),
            )
        )
    return out


def make_tap(image: ImageSource, scene: Scene) -> IsTap:
    """Integer-sample delay and broadband gain of one image source.

    Gain is ``1/max(d, 1 m)`` times the reflection factor ``sqrt(1 - alpha)``
    of every wall hit.
    """
    if not image.path_length > 0:
        raise ValueError("image source coincides with the receiver")
    fs = scene.config.sample_rate
    delay = int(np.floor(image.path_length * fs / scene.speed_of_sound + 0.5))
    gain = 1.0 / max(image.path_length, 1.0)
    for w in image.wall_hits:
        gain *= np.sqrt(1.0 - scene.room.walls[w].absorption)
    return IsTap(delay, float(gain), image)


def last_wall(image: ImageSource, receiver) -> int | None:
    """Wall credited with an image source's final bounce.

    Picks the axis with the largest ``|lattice index|``; ties go to the
    axis on which the image lies farthest from the receiver, then to the
    lower axis. On that axis the last plane crossed before reaching the
    receiver is the room wall on the side of the index's sign.
    """
    if image.order == 0:
        return None
    key = [
        (abs(m), abs(image.position[a] - receiver[a]), -a)
        for a, m in enumerate(image.lattice_index)
    ]
    axis = -max(key)[2]
    return 2 * axis + (1 if image.lattice_index[axis] > 0 else 0)


def count_by_order(images) -> dict[int, int]:
    counts: dict[int, int] = {}
    for im in images:
        counts[im.order] = counts.get(im.order, 0) + 1
    return counts

