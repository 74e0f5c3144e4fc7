"""Command-line interface: ``razrlite render|analyze|convolve|info``.

Exit codes
----------
0  success
2  usage error (bad flags)
3  scene file could not be parsed or failed the schema
4  scene or input validation failed (including sample-rate mismatch)
5  file could not be read or written
6  rendering or analysis failed

``RAZRLITE_SEED`` is reserved; every command is deterministic.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from . import __version__
from .analysis import analyze, metrics_to_csv
from .apc import design_surface_apc, estimate_local_decay_time
from .decomposition import design_decomposition_pair
from .engine import ImpulseResponse, convolve, render
from .fdn import build_vrs_set, design_fdn, eyring_t60
from .ism import count_by_order, generate_image_sources
from .model import SceneError, derive_geometry
from .scenefile import SceneFileError, load_scene, scene_to_dict

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_VALIDATION = 4
EXIT_IO = 5
EXIT_PROCESSING = 6


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def write_wav(path, rate: float, data: np.ndarray) -> None:
    """Write float32 samples; ``data`` is ``(channels, n)`` or ``(n,)``.

    The file is written to a temporary name next to ``path`` and renamed,
    so a failed write never leaves a partial file behind.
    """
    data = np.asarray(data, dtype=np.float32)
    if data.ndim == 2:
        data = data.T if data.shape[0] > 1 else data[0]
    path = Path(path)
    fd, tmp = tempfile.mkstemp(prefix=".razrlite-", suffix=".wav", dir=path.parent or ".")
    os.close(fd)
    try:
        wavfile.write(tmp, int(round(rate)), np.ascontiguousarray(data))
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def read_wav(path) -> tuple[int, np.ndarray]:
    """Read a WAV file as ``(rate, (channels, n) float64)``; integer PCM is scaled to [-1, 1)."""
    rate, data = wavfile.read(path)
    if np.issubdtype(data.dtype, np.integer):
        info = np.iinfo(data.dtype)
        data = (data.astype(np.float64) - (info.max + 1 + info.min) / 2) / ((info.max - info.min + 1) / 2)
    data = np.asarray(data, dtype=np.float64)
    if data.ndim == 1:
        data = data[None, :]
    else:
        data = data.T
    return rate, data


def _write_text(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=".razrlite-", dir=path.parent or ".")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def sidecar_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.name + ".json")


def _load(path):
    try:
        return load_scene(path)
    except SceneFileError as exc:
        raise CliError(EXIT_PARSE, str(exc)) from exc
    except SceneError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from exc
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot read scene: {exc}") from exc


def _read(path):
    try:
        return read_wav(path)
    except (OSError, ValueError) as exc:
        raise CliError(EXIT_IO, f"cannot read {path}: {exc}") from exc


def cmd_render(args) -> int:
    scene = _load(args.scene)
    mode = args.mode or scene.config.output_mode
    if args.threads < 1:
        raise CliError(EXIT_USAGE, "--threads must be >= 1")
    try:
        ir = render(scene, threads=args.threads)
    except SceneError as exc:
        raise CliError(EXIT_VALIDATION, str(exc)) from exc
    except (ValueError, FloatingPointError) as exc:
        raise CliError(EXIT_PROCESSING, str(exc)) from exc
    out = Path(args.out)
    meta = {
        "tool": "razrlite",
        "version": __version__,
        "outputMode": mode,
        "threads": args.threads,
        "scene": scene_to_dict(scene),
        "render": ir.metadata,
    }
    try:
        write_wav(out, ir.sample_rate, ir.output(mode))
        _write_text(sidecar_path(out), json.dumps(meta, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        out.unlink(missing_ok=True)
        raise CliError(EXIT_IO, f"cannot write output: {exc}") from exc
    print(f"wrote {out} ({ir.output(mode).shape[0]} ch, {ir.n_samples} samples)")
    return EXIT_OK


def cmd_analyze(args) -> int:
    rate, data = _read(args.ir)
    x = data.sum(axis=0)
    try:
        metrics = analyze(x, rate)
    except ValueError as exc:
        raise CliError(EXIT_PROCESSING, str(exc)) from exc
    out = Path(args.out)
    try:
        fd, tmp = tempfile.mkstemp(prefix=".razrlite-", suffix=".csv", dir=out.parent or ".")
        os.close(fd)
        metrics_to_csv(metrics, tmp)
        os.replace(tmp, out)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {out}: {exc}") from exc
    print("t60:", "insufficient decay range" if metrics.t60 is None else f"{metrics.t60:.4f} s")
    return EXIT_OK


def cmd_convolve(args) -> int:
    ir_rate, ir_data = _read(args.ir)
    dry_rate, dry = _read(args.dry)
    if ir_rate != dry_rate:
        raise CliError(EXIT_VALIDATION, f"sample rate mismatch: IR {ir_rate} Hz, dry {dry_rate} Hz")
    if dry.shape[0] != 1:
        raise CliError(EXIT_VALIDATION, f"dry signal must be mono, got {dry.shape[0]} channels")
    ir = ImpulseResponse(float(ir_rate), ir_data)
    wet = convolve(ir, dry[0], float(dry_rate), mode="vrs")
    try:
        write_wav(args.out, ir_rate, wet)
    except OSError as exc:
        raise CliError(EXIT_IO, f"cannot write {args.out}: {exc}") from exc
    print(f"wrote {args.out} ({wet.shape[0]} ch, {wet.shape[1]} samples)")
    return EXIT_OK


def scene_summary(scene) -> list[str]:
    """Human-readable lines describing what ``render`` would build."""
    cfg = scene.config
    fs = cfg.sample_rate
    geo = derive_geometry(scene.room, scene.receiver)
    areas = scene.room.wall_areas()
    lines = [
        f"room {' x '.join(f'{v:g}' for v in scene.room.dimensions)} m",
        f"volume {geo.volume:.4f} m^3, surface {geo.surface_area:.4f} m^2",
        f"mean free path {geo.mean_free_path:.4f} m, mean wall distance {geo.mean_wall_distance:.4f} m",
    ]
    try:
        t60 = eyring_t60(geo, scene.room.walls, areas)
        lines.append(f"Eyring T60 {t60:.4f} s")
    except ValueError as exc:
        t60 = None
        lines.append(f"Eyring T60 undefined ({exc})")
    images = generate_image_sources(scene, cfg.ism_order)
    per_order = count_by_order(images)
    lines.append(
        f"image sources {len(images)} (order {cfg.ism_order}: "
        + ", ".join(str(per_order.get(k, 0)) for k in range(cfg.ism_order + 1))
        + ")"
    )
    t_s = estimate_local_decay_time(geo, cfg.surface_decay_scale, scene.speed_of_sound)
    if t_s > 0:
        surf = design_surface_apc(t_s, fs)
        lines.append(f"surface APC T_s {t_s * 1e3:.3f} ms, delays {list(surf.delays)}")
    else:
        lines.append("surface APC bypassed")
    lines.append(f"zeta {scene.zeta:g}")
    for name, w in zip(("-x", "+x", "-y", "+y", "-z", "+z"), scene.room.walls):
        pair = design_decomposition_pair(w.scattering, w.crossover_hz, fs)
        b = ", ".join(f"{v:.5g}" for v in pair.diffuse.b)
        a = ", ".join(f"{v:.5g}" for v in pair.diffuse.a)
        lines.append(
            f"wall {name}: alpha {w.absorption:g}, delta {w.scattering:g}, fc {w.crossover_hz:g} Hz, "
            f"diffuse b=[{b}] a=[{a}]"
        )
    if t60 is not None:
        fdn = design_fdn(geo, t60, cfg, scene.speed_of_sound)
        lines.append(f"FDN delays {[int(d) for d in fdn.delays]}")
    vrs = build_vrs_set(scene, cfg.fdn_lines)
    lines.append("VRS per wall " + str([len(a) for a in vrs.wall_assignment]))
    return lines


def cmd_info(args) -> int:
    scene = _load(args.scene)
    try:
        lines = scene_summary(scene)
    except ValueError as exc:
        raise CliError(EXIT_PROCESSING, str(exc)) from exc
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="razrlite", description="Shoebox room impulse responses with scattering.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("render", help="render a scene to a float32 WAV plus JSON sidecar")
    r.add_argument("--scene", required=True)
    r.add_argument("--out", required=True)
    r.add_argument("--mode", choices=("mono", "vrs"), default=None, help="overrides config.outputMode")
    r.add_argument("--threads", type=int, default=1)
    r.set_defaults(func=cmd_render)

    a = sub.add_parser("analyze", help="write EDC, T60, echo density and spectrum as CSV")
    a.add_argument("--ir", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("convolve", help="convolve a mono dry WAV with every IR channel")
    c.add_argument("--ir", required=True)
    c.add_argument("--dry", required=True)
    c.add_argument("--out", required=True)
    c.set_defaults(func=cmd_convolve)

    i = sub.add_parser("info", help="print derived scene quantities without rendering")
    i.add_argument("--scene", required=True)
    i.set_defaults(func=cmd_info)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"razrlite {args.command}: error: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
