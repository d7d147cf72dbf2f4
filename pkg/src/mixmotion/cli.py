"""Command-line front end.

Every subcommand reads files, writes into ``--out`` and prints one JSON
summary line on stdout. Options may also come from ``--config`` (a JSON
object keyed by option name, dashes or underscores); explicit flags win.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from mixmotion import formats_io as fio
from mixmotion import man_norm, metrics, plotting, pose_guidance
from mixmotion.errors import MixMotionError
from mixmotion.scene_motion import motion_stats, plucker_embedding, track_sequence
from mixmotion.visualize import flow_to_arrows, flow_to_color

log = logging.getLogger("mixmotion")

DEFAULTS = {
    "out": ".",
    "threads": 1,
    "seed": 0,
    "depth_scale": 1.0,
    "canvas": None,
    "conf_threshold": pose_guidance.DEFAULT_CONF_THRESHOLD,
    "config": None,
    "intrinsics": None,
    "render": "none",
    "stride": 16,
    "no_face": False,
    "no_hands": False,
    "driving": [],
    "weights": None,
    "save_weights": None,
    "hidden": man_norm.DEFAULT_HIDDEN,
    "zero_init": False,
    "eps": man_norm.DEFAULT_EPS,
    "feature_entry": "features",
    "mode": "color",
    "underlay": None,
    "max_magnitude": None,
    "no_figures": False,
}

FRAME_FMT = "{:05d}"


class CliError(Exception):
    pass


def parse_canvas(text) -> tuple[int, int]:
    """``WxH`` -> ``(H, W)``."""
    try:
        w, h = (int(p) for p in str(text).lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"canvas must look like WxH, got {text!r}") from None
    if w < 1 or h < 1:
        raise argparse.ArgumentTypeError("canvas must be at least 1x1")
    return h, w


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = p.add_argument_group("global options")
    g.add_argument("--out", help="output directory")
    g.add_argument("--threads", type=int, help="worker threads (>= 1)")
    g.add_argument("--seed", type=int, help="seed for randomized weights")
    g.add_argument("--depth-scale", type=float, help="multiplier from raw depth to world units")
    g.add_argument("--canvas", help="canvas size WxH")
    g.add_argument("--conf-threshold", type=float, help="minimum keypoint confidence")
    g.add_argument("--config", help="JSON config file; flags override it")
    g.add_argument("--no-figures", action="store_true", help="skip matplotlib report figures")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="mixmotion", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    kw = dict(parents=[common], argument_default=argparse.SUPPRESS)

    p = sub.add_parser("track-scene", help="scene motion fields from a trajectory and a depth map", **kw)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--intrinsics", help="intrinsics JSON (default: <trajectory>.intrinsics.json)")
    p.add_argument("--depth", required=True, help="16-bit PNG or PFM depth of the reference image")
    p.add_argument("--render", choices=["none", "color", "arrows", "both"])
    p.add_argument("--stride", type=int)

    p = sub.add_parser("rasterize-pose", help="stick-figure pose images from a keypoint document", **kw)
    p.add_argument("--keypoints", required=True)
    p.add_argument("--no-face", action="store_true")
    p.add_argument("--no-hands", action="store_true")

    p = sub.add_parser("pack-guidance", help="channel-stack reference and pose images", **kw)
    p.add_argument("--ref-image", required=True)
    p.add_argument("--ref-pose", required=True)
    p.add_argument("--driving", nargs="*", help="driving pose images, or one directory of them")

    p = sub.add_parser("plucker", help="per-frame Plücker ray fields", **kw)
    p.add_argument("--trajectory", required=True)
    p.add_argument("--intrinsics")

    p = sub.add_parser("man-apply", help="motion-adaptive normalization of a feature tensor", **kw)
    p.add_argument("--features", required=True, help="tensor container holding a C x H x W entry")
    p.add_argument("--feature-entry")
    p.add_argument("--flow", required=True, help=".flo scene motion")
    p.add_argument("--weights", help="tensor container with shared/gamma/beta conv entries")
    p.add_argument("--save-weights", help="write the weights actually used")
    p.add_argument("--hidden", type=int)
    p.add_argument("--zero-init", action="store_true", help="zero-initialized gamma/beta heads")
    p.add_argument("--eps", type=float)

    p = sub.add_parser("metrics", help="L1 / PSNR / SSIM between two images or directories", **kw)
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)

    p = sub.add_parser("visualize", help="render a .flo field", **kw)
    p.add_argument("--flow", required=True)
    p.add_argument("--mode", choices=["color", "arrows", "both"])
    p.add_argument("--stride", type=int)
    p.add_argument("--underlay")
    p.add_argument("--max-magnitude", type=float)
    return parser


def _merge(ns: argparse.Namespace) -> argparse.Namespace:
    given = vars(ns)
    cfg = {}
    if given.get("config"):
        try:
            raw = json.loads(Path(given["config"]).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise CliError(f"cannot read config {given['config']}: {e}") from None
        if not isinstance(raw, dict):
            raise CliError("config file must hold a JSON object")
        cfg = {k.replace("-", "_"): v for k, v in raw.items()}
    merged = {**DEFAULTS, **cfg, **given}
    if merged["threads"] < 1:
        raise CliError("--threads must be >= 1")
    if merged["canvas"] is not None and not isinstance(merged["canvas"], tuple):
        try:
            merged["canvas"] = parse_canvas(merged["canvas"])
        except argparse.ArgumentTypeError as e:
            raise CliError(str(e)) from None
    return argparse.Namespace(**merged)


def _outdir(cfg) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _need(path, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise CliError(f"{what} not found: {p}")
    return p


def _write_rows(path: Path, rows: list[dict], fields: list[str]) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=fields)
        wr.writeheader()
        wr.writerows(rows)


# --------------------------------------------------------------------- commands


def cmd_track_scene(cfg) -> dict:
    traj = fio.read_trajectory(_need(cfg.trajectory, "trajectory"), cfg.intrinsics)
    depth = fio.read_depth(_need(cfg.depth, "depth file"), cfg.depth_scale)
    if depth.shape != traj.shape:
        raise CliError(f"depth {depth.shape[1]}x{depth.shape[0]} does not match intrinsics {traj.shape[1]}x{traj.shape[0]}")
    out = _outdir(cfg)
    fields = track_sequence(depth, traj, threads=cfg.threads)
    rows = []
    for f in fields:
        stem = FRAME_FMT.format(f.frame_index)
        path = out / f"flow_{stem}.flo"
        fio.write_flo(f, path)
        back = fio.read_flo(path)
        if not np.array_equal(back.valid, f.valid):
            raise CliError(f"validation failed for {path}")
        s = motion_stats(f)
        rows.append({"frame": f.frame_index, "mean_px": s.mean_magnitude, "max_px": s.max_magnitude, "valid_fraction": s.valid_fraction})
        if cfg.render in ("color", "both"):
            fio.write_rgb(out / f"color_{stem}.png", flow_to_color(f))
        if cfg.render in ("arrows", "both"):
            fio.write_rgb(out / f"arrows_{stem}.png", flow_to_arrows(f, cfg.stride))
    _write_rows(out / "motion_stats.csv", rows, ["frame", "mean_px", "max_px", "valid_fraction"])
    if not cfg.no_figures:
        plotting.plot_motion_stats(rows, out / "motion_stats.png")
    return {"pairs": len(fields), "stats": str(out / "motion_stats.csv")}


def cmd_rasterize_pose(cfg) -> dict:
    if cfg.canvas is None:
        raise CliError("--canvas WxH is required for rasterize-pose")
    text = _need(cfg.keypoints, "keypoint document").read_text(encoding="utf-8")
    frames = pose_guidance.parse_keypoints(text)
    opts = pose_guidance.RasterOptions(not cfg.no_face, not cfg.no_hands, cfg.conf_threshold)
    out = _outdir(cfg)
    for kp in frames:
        img = pose_guidance.rasterize_pose(kp, cfg.canvas, opts)
        fio.write_rgb(out / f"frame_{FRAME_FMT.format(kp.frame_index)}.png", img.pixels)
    return {"frames": len(frames), "canvas": f"{cfg.canvas[1]}x{cfg.canvas[0]}"}


def _driving_paths(items) -> list[Path]:
    if len(items) == 1 and Path(items[0]).is_dir():
        return sorted(p for p in Path(items[0]).iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg", ".bmp"))
    return [_need(p, "driving pose image") for p in items]


def cmd_pack_guidance(cfg) -> dict:
    ref = fio.read_rgb(_need(cfg.ref_image, "reference image"))
    ref_pose = fio.read_rgb(_need(cfg.ref_pose, "reference pose"))
    driving = [fio.read_rgb(p) for p in _driving_paths(cfg.driving)]
    pack = pose_guidance.pack_guidance(ref, ref_pose, driving)
    manifest = json.dumps({"channel_order": list(pack.channel_order), "M": pack.num_driving}).encode("utf-8")
    path = _outdir(cfg) / "guidance.mmtk"
    fio.write_tensor({"guidance": pack.data, "manifest": np.frombuffer(manifest, dtype=np.uint8)}, path)
    back = fio.read_tensor(path)
    if not np.array_equal(back["guidance"], pack.data):
        raise CliError(f"validation failed for {path}")
    return {"channels": int(pack.data.shape[0]), "M": pack.num_driving, "path": str(path)}


def cmd_plucker(cfg) -> dict:
    traj = fio.read_trajectory(_need(cfg.trajectory, "trajectory"), cfg.intrinsics)
    entries = {
        f"plucker_{FRAME_FMT.format(i)}": plucker_embedding(p, k).data.astype(np.float32)
        for i, (p, k) in enumerate(traj.frames)
    }
    path = _outdir(cfg) / "plucker.mmtk"
    fio.write_tensor(entries, path)
    return {"frames": len(entries), "path": str(path)}


def cmd_man_apply(cfg) -> dict:
    entries = fio.read_tensor(_need(cfg.features, "feature tensor"))
    if cfg.feature_entry not in entries:
        raise CliError(f"feature container has no entry {cfg.feature_entry!r}")
    f = entries[cfg.feature_entry].astype(np.float64)
    if f.ndim != 3:
        raise CliError(f"features must be C x H x W, got shape {f.shape}")
    m = fio.read_flo(_need(cfg.flow, "flow file"))
    if cfg.weights:
        specs = man_norm.specs_from_entries(fio.read_tensor(_need(cfg.weights, "weight file")))
    else:
        specs = man_norm.init_man_specs(f.shape[0], hidden=cfg.hidden, seed=cfg.seed, zero_heads=cfg.zero_init)
    out_arr = man_norm.man_apply(f, m, specs, cfg.eps)
    out = _outdir(cfg)
    fio.write_tensor({"output": out_arr}, out / "man_output.mmtk")
    if cfg.save_weights:
        fio.write_tensor(man_norm.specs_to_entries(specs), cfg.save_weights)
    return {"shape": list(out_arr.shape), "abs_max": float(np.abs(out_arr).max()), "path": str(out / "man_output.mmtk")}


def _image_pairs(a: Path, b: Path) -> list[tuple[Path, Path]]:
    if a.is_dir() != b.is_dir():
        raise CliError("--a and --b must both be files or both be directories")
    if not a.is_dir():
        return [(a, b)]
    fa = sorted(p for p in a.iterdir() if p.is_file())
    fb = sorted(p for p in b.iterdir() if p.is_file())
    if len(fa) != len(fb):
        raise CliError(f"directories hold {len(fa)} and {len(fb)} files")
    return list(zip(fa, fb))


def cmd_metrics(cfg) -> dict:
    pairs = _image_pairs(_need(cfg.a, "image"), _need(cfg.b, "image"))
    rows = []
    for pa, pb in pairs:
        ia, ib = fio.read_rgb(pa), fio.read_rgb(pb)
        rows.append({"a": pa.name, "b": pb.name, **{k: fn(ia, ib) for k, fn in metrics.METRICS.items()}})
    fields = ["a", "b", "l1", "psnr", "ssim"]
    wr = csv.DictWriter(sys.stdout, fieldnames=fields, lineterminator="\n")
    wr.writeheader()
    wr.writerows(rows)
    out = _outdir(cfg)
    _write_rows(out / "metrics.csv", rows, fields)
    if not cfg.no_figures:
        plotting.plot_metrics(rows, out / "metrics.png")
    mean = {k: float(np.mean([r[k] for r in rows])) for k in metrics.METRICS}
    return {"pairs": len(rows), "mean": mean}


def cmd_visualize(cfg) -> dict:
    field = fio.read_flo(_need(cfg.flow, "flow file"))
    out = _outdir(cfg)
    stem = Path(cfg.flow).stem
    written = []
    if cfg.mode in ("color", "both"):
        written.append(out / f"{stem}_color.png")
        fio.write_rgb(written[-1], flow_to_color(field, cfg.max_magnitude))
    if cfg.mode in ("arrows", "both"):
        underlay = fio.read_rgb(_need(cfg.underlay, "underlay image")) if cfg.underlay else None
        written.append(out / f"{stem}_arrows.png")
        fio.write_rgb(written[-1], flow_to_arrows(field, cfg.stride, underlay))
    return {"written": [str(p) for p in written]}


COMMANDS = {
    "track-scene": cmd_track_scene,
    "rasterize-pose": cmd_rasterize_pose,
    "pack-guidance": cmd_pack_guidance,
    "plucker": cmd_plucker,
    "man-apply": cmd_man_apply,
    "metrics": cmd_metrics,
    "visualize": cmd_visualize,
}


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if getattr(ns, "verbose", False) else logging.WARNING)
    command = ns.command
    try:
        cfg = _merge(ns)
        summary = COMMANDS[command](cfg)
    except (CliError, MixMotionError, OSError, ValueError) as e:
        print(f"mixmotion {command}: error: {e}", file=sys.stderr)
        print(json.dumps({"command": command, "status": "error", "message": str(e)}))
        return 1
    print(json.dumps({"command": command, "status": "ok", **summary}))
    return 0
