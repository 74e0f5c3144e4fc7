"""JSON scene files: parsing, schema checking and serialization."""

from __future__ import annotations

import hashlib
import json
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from .model import RenderConfig, Room, Scene, WallMaterial, validate_scene

SCHEMA_VERSION = 1


class SceneFileError(ValueError):
    """The scene document is not valid JSON or does not match the schema."""


@lru_cache(maxsize=1)
def scene_schema() -> dict:
    text = resources.files("razrlite").joinpath("data/scene.schema.json").read_text("utf-8")
    return json.loads(text)


def _path_of(error: jsonschema.ValidationError) -> str:
    parts = []
    for p in error.absolute_path:
        parts.append(f"[{p}]" if isinstance(p, int) else f".{p}")
    return "".join(parts).lstrip(".") or "<root>"


def scene_from_dict(doc: dict) -> Scene:
    """Build a validated :class:`Scene` from a parsed scene document.

    Raises
    ------
    SceneFileError
        On schema violations, including unknown keys.
    SceneError
        On domain violations (e.g. a source outside the room).
    """
    validator = jsonschema.Draft202012Validator(scene_schema())
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        raise SceneFileError(f"{_path_of(err)}: {err.message}")

    walls = tuple(
        WallMaterial(
            absorption=float(w["absorption"]),
            scattering=float(w["scattering"]),
            crossover_hz=float(w["crossoverHz"]),
        )
        for w in doc["room"]["walls"]
    )
    room = Room(tuple(float(v) for v in doc["room"]["dimensions"]), walls)
    cfg_doc = doc.get("config", {})
    defaults = RenderConfig()
    config = RenderConfig(
        sample_rate=float(cfg_doc.get("sampleRateHz", defaults.sample_rate)),
        ism_order=int(cfg_doc.get("ismOrder", defaults.ism_order)),
        fdn_lines=int(cfg_doc.get("fdnLines", defaults.fdn_lines)),
        ir_length=float(cfg_doc.get("irLengthSeconds", defaults.ir_length)),
        surface_decay_scale=float(cfg_doc.get("surfaceDecayScale", defaults.surface_decay_scale)),
        output_mode=cfg_doc.get("outputMode", defaults.output_mode),
    )
    scene = Scene(
        room=room,
        source=tuple(float(v) for v in doc["source"]),
        receiver=tuple(float(v) for v in doc["receiver"]),
        zeta=float(doc.get("zeta", 0.0)),
        speed_of_sound=float(doc.get("speedOfSound", 343.0)),
        config=config,
    )
    return validate_scene(scene)


def scene_to_dict(scene: Scene) -> dict:
    cfg = scene.config
    return {
        "schemaVersion": SCHEMA_VERSION,
        "room": {
            "dimensions": list(scene.room.dimensions),
            "walls": [
                {"absorption": w.absorption, "scattering": w.scattering, "crossoverHz": w.crossover_hz}
                for w in scene.room.walls
            ],
        },
        "source": list(scene.source),
        "receiver": list(scene.receiver),
        "zeta": scene.zeta,
        "speedOfSound": scene.speed_of_sound,
        "config": {
            "sampleRateHz": cfg.sample_rate,
            "ismOrder": cfg.ism_order,
            "fdnLines": cfg.fdn_lines,
            "irLengthSeconds": cfg.ir_length,
            "surfaceDecayScale": cfg.surface_decay_scale,
            "outputMode": cfg.output_mode,
        },
    }


def load_scene(path: str | Path) -> Scene:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SceneFileError(f"malformed JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise SceneFileError("<root>: scene document must be a JSON object")
    return scene_from_dict(doc)


def save_scene(scene: Scene, path: str | Path) -> None:
    Path(path).write_text(json.dumps(scene_to_dict(scene), indent=2) + "\n", encoding="utf-8")


def scene_hash(scene: Scene) -> str:
    """SHA-256 of the canonical JSON form; floats are written with repr precision."""
    blob = json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()
