"""Pipeline driver: dataset generation, composition, and evaluation
subcommands with a pinned on-disk layout.

Exit codes: 0 success, 2 configuration problem, 3 file-system problem,
4 pipeline failure.  Every failure prints a single parsable line of the
form ``error[kind]: message`` to stderr.  A ``.lock`` file in the output
directory guards against concurrent runs over the same tree.
"""

from __future__ import annotations

import argparse
import os
import sys
from contextlib import contextmanager
from pathlib import Path

from .augment import AugmentSpec, synthesize_checking_set
from .dataset import (
    COMPOSITES_NAME,
    MANIFEST_NAME,
    RESULTS_NAME,
    build_manifest,
    load_backgrounds,
    load_dataset,
    load_scene,
    write_json,
    write_png,
)
from .evalkit import EvalReport, GroundTruth, ViewGallery, norm_box
from .labelgen import LabelError, LabelGenConfig, annotate_set
from .losses import PoseAngles
from .render import RenderConfig, render_set
from .sampling import StrategyKind, StrategySpec, generate
from .scene import BakeError, bake

COMPARE_NAME = "compare_results.json"


class CliError(Exception):
    code = 4
    label = "pipeline"


class ConfigError(CliError):
    code = 2
    label = "config"


class IoFailure(CliError):
    code = 3
    label = "io"


class PipelineFailure(CliError):
    code = 4
    label = "pipeline"


_DEFAULTS: dict = {
    "scene": None,
    "out": None,
    "strategy": None,
    "theta_step": 10.0,
    "phi_step": 30.0,
    "count": None,
    "gamma": 2.5,
    "seed": 0,
    "backgrounds": None,
    "n": None,
    "self": False,
    "query": None,
    "samples_per_unit": 128,
    "width": 64,
    "height": 64,
    "focal": 64.0,
    "coarse_res": 64,
    "fine_res": 8,
    "bounds": None,
    "t_occ_factor": 0.95,
    "t_single_factor": 0.9,
    "t_rect": 0.75,
    "kernel_start": 3,
    "kernel_step": 2,
    "kernel_max": 31,
    "shift_range": 0.25,
    "scale_min": 0.5,
    "scale_max": 1.5,
    "background_color_random": False,
}

_BOOL_KEYS = {"self", "background_color_random"}
_INT_KEYS = {
    "count", "seed", "n", "samples_per_unit", "width", "height",
    "coarse_res", "fine_res", "kernel_start", "kernel_step", "kernel_max",
}
_FLOAT_KEYS = {
    "theta_step", "phi_step", "gamma", "focal", "bounds",
    "t_occ_factor", "t_single_factor", "t_rect",
    "shift_range", "scale_min", "scale_max",
}


def _parse_value(key: str, raw: str):
    raw = raw.strip()
    try:
        if key in _BOOL_KEYS:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        if key in _INT_KEYS:
            return int(raw)
        if key in _FLOAT_KEYS:
            return float(raw)
        return raw
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {exc}") from exc


def _read_config_file(path: str) -> dict:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    out = {}
    for lineno, line in enumerate(p.read_text().splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"{p}:{lineno}: expected key=value, got {line!r}")
        key, raw = body.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _DEFAULTS:
            raise ConfigError(f"{p}:{lineno}: unknown key {key!r}")
        out[key] = _parse_value(key, raw)
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="watchforge",
        description="Generate, compose, and evaluate rendered detection datasets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, doc in (
        ("watch", "render a viewpoint sweep and write images plus manifest"),
        ("compose", "fuse object cut-outs onto background images"),
        ("eval", "score a query set against a rendered gallery"),
        ("strategy-compare", "evaluate several watching strategies side by side"),
    ):
        p = sub.add_parser(name, help=doc)
        p.add_argument("--config", metavar="PATH", help="key=value file; flags win")
        p.add_argument("--scene", metavar="PATH")
        p.add_argument("--out", metavar="DIR")
        p.add_argument("--strategy", help="loop | helix | random (comma list for strategy-compare)")
        p.add_argument("--theta-step", type=float, dest="theta_step")
        p.add_argument("--phi-step", type=float, dest="phi_step")
        p.add_argument("--count", type=int)
        p.add_argument("--gamma", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--backgrounds", metavar="DIR")
        p.add_argument("--n", type=int)
        p.add_argument("--self", action="store_true", dest="self_eval", default=None)
        p.add_argument("--query", metavar="DIR")
    return parser


def merge_config(args: argparse.Namespace) -> dict:
    cfg = dict(_DEFAULTS)
    if args.config:
        cfg.update(_read_config_file(args.config))
    flag_map = {
        "scene": args.scene,
        "out": args.out,
        "strategy": args.strategy,
        "theta_step": args.theta_step,
        "phi_step": args.phi_step,
        "count": args.count,
        "gamma": args.gamma,
        "seed": args.seed,
        "backgrounds": args.backgrounds,
        "n": args.n,
        "self": args.self_eval,
        "query": args.query,
    }
    cfg.update({k: v for k, v in flag_map.items() if v is not None})
    return cfg


def _require(cfg: dict, key: str, flag: str) -> str:
    v = cfg.get(key)
    if not v:
        raise ConfigError(f"missing required {flag}")
    return v


@contextmanager
def _locked(out_dir: Path):
    lock = out_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise IoFailure(f"output directory is locked (remove stale {lock} if no run is active)")
    os.close(fd)
    try:
        yield
    finally:
        try:
            os.unlink(lock)
        except OSError:
            pass


def _load_scene_checked(cfg: dict):
    path = Path(_require(cfg, "scene", "--scene"))
    if not path.is_file():
        raise ConfigError(f"scene file not found: {path}")
    primitives, file_bounds = load_scene(path)
    bounds = cfg["bounds"] if cfg["bounds"] is not None else file_bounds
    return bake(primitives, cfg["coarse_res"], cfg["fine_res"], bounds)


def _strategy_spec(cfg: dict, kind_name: str, seed: int) -> StrategySpec:
    try:
        kind = StrategyKind(kind_name)
    except ValueError:
        raise ConfigError(f"unknown strategy {kind_name!r}")
    if kind is StrategyKind.RANDOM:
        count = cfg["count"]
        if count is None:
            # parity with the loop grid keeps strategy comparisons fair
            count = StrategySpec(
                kind=StrategyKind.LOOP, gamma=cfg["gamma"],
                theta_step=cfg["theta_step"], phi_step=cfg["phi_step"],
            ).n_viewpoints()
        return StrategySpec(kind=kind, gamma=cfg["gamma"], count=count, seed=seed)
    return StrategySpec(
        kind=kind, gamma=cfg["gamma"],
        theta_step=cfg["theta_step"], phi_step=cfg["phi_step"],
    )


def _render_cfg(cfg: dict) -> RenderConfig:
    return RenderConfig(
        samples_per_unit=cfg["samples_per_unit"],
        width=cfg["width"],
        height=cfg["height"],
    )


def _label_cfg(cfg: dict) -> LabelGenConfig:
    return LabelGenConfig(
        t_occ_factor=cfg["t_occ_factor"],
        t_single_factor=cfg["t_single_factor"],
        t_rect=cfg["t_rect"],
        kernel_start=cfg["kernel_start"],
        kernel_step=cfg["kernel_step"],
        kernel_max=cfg["kernel_max"],
    )


def _strategy_echo(spec: StrategySpec, n: int) -> dict:
    return {
        "kind": spec.kind.value,
        "theta_step": spec.theta_step,
        "phi_step": spec.phi_step,
        "count": n,
        "gamma": spec.gamma,
        "seed": spec.seed if spec.kind is StrategyKind.RANDOM else None,
    }


def _render_echo(cfg: dict) -> dict:
    return {
        "samples_per_unit": cfg["samples_per_unit"],
        "width": cfg["width"],
        "height": cfg["height"],
        "focal": cfg["focal"],
        "background": [1.0, 1.0, 1.0],
    }


def _generate_dataset(cfg: dict, scene, spec: StrategySpec, out_dir: Path) -> int:
    viewpoints = generate(spec)
    images = render_set(scene, viewpoints, _render_cfg(cfg), focal=cfg["focal"])
    occ, annotations = annotate_set(images, _label_cfg(cfg))
    records = []
    for i, (im, ann) in enumerate(zip(images, annotations)):
        name = f"view_{i:04d}.png"
        write_png(out_dir / name, im.pixels)
        records.append((name, ann))
    manifest = build_manifest(
        _strategy_echo(spec, len(viewpoints)), _render_echo(cfg), cfg["seed"], occ, records
    )
    write_json(out_dir / MANIFEST_NAME, manifest)
    return len(viewpoints)


def cmd_watch(cfg: dict) -> int:
    out_dir = Path(_require(cfg, "out", "--out"))
    scene = _load_scene_checked(cfg)
    spec = _strategy_spec(cfg, cfg["strategy"] or "loop", cfg["seed"])
    out_dir.mkdir(parents=True, exist_ok=True)
    with _locked(out_dir):
        n = _generate_dataset(cfg, scene, spec, out_dir)
    print(f"watch: wrote {n} images and {MANIFEST_NAME} to {out_dir}")
    return 0


def cmd_compose(cfg: dict) -> int:
    out_dir = Path(_require(cfg, "out", "--out"))
    if not (out_dir / MANIFEST_NAME).is_file():
        raise IoFailure(f"no {MANIFEST_NAME} in {out_dir}; run watch first")
    backgrounds = load_backgrounds(_require(cfg, "backgrounds", "--backgrounds"))
    if not backgrounds:
        raise IoFailure("backgrounds directory holds no images")
    n = cfg["n"] if cfg["n"] is not None else 100
    _, images, annotations, _ = load_dataset(out_dir)
    spec = AugmentSpec(
        shift_range=cfg["shift_range"],
        scale_range=(cfg["scale_min"], cfg["scale_max"]),
        background_color_random=cfg["background_color_random"],
        seed=cfg["seed"],
    )
    with _locked(out_dir):
        samples = synthesize_checking_set(list(zip(images, annotations)), backgrounds, n, spec)
        comp_dir = out_dir / "composites"
        comp_dir.mkdir(exist_ok=True)
        recs = []
        for i, s in enumerate(samples):
            name = f"comp_{i:04d}.png"
            write_png(comp_dir / name, s.image)
            v = s.source_viewpoint
            recs.append(
                {
                    "file": f"composites/{name}",
                    "bbox": s.box.to_list() if s.box else None,
                    "source": None if v is None else {
                        "theta": round(v.theta, 6),
                        "phi": round(v.phi, 6),
                        "gamma": round(v.gamma, 6),
                    },
                }
            )
        write_json(
            out_dir / COMPOSITES_NAME,
            {"version": 1, "seed": cfg["seed"], "requested": n, "samples": recs},
        )
    print(f"compose: wrote {len(samples)} of {n} samples to {out_dir / 'composites'}")
    return 0


def _dataset_ground_truth(images, annotations) -> tuple[list, list[GroundTruth]]:
    """Pair each validly annotated image with its ground truth; invalid
    annotations drop out."""
    kept, gts = [], []
    for im, ann in zip(images, annotations):
        if not ann.valid or ann.box is None:
            continue
        v = ann.viewpoint
        h, w = im.pixels.shape[:2]
        kept.append(im)
        gts.append(GroundTruth(norm_box(ann.box, w, h), PoseAngles(v.theta, v.phi, v.gamma)))
    return kept, gts


def _evaluate_against(gallery: ViewGallery, images, gts) -> EvalReport:
    from .evalkit import evaluate

    predictions = [[gallery.query(im.pixels)] for im in images]
    return evaluate(predictions, gts)


def _report_row(label: str, points: int, r: EvalReport) -> dict:
    return {
        "strategy": label,
        "view_points": points,
        "map_50": r.map_50,
        "ave_theta": r.ave_theta,
        "ave_phi": r.ave_phi,
        "ave_gamma": r.ave_gamma,
        "n_images": r.n_images,
        "n_excluded": r.n_excluded,
    }


def _print_table(rows: list[dict], title: str) -> None:
    print(title)
    header = f"{'Strategy':<10} {'View Points':>11} {'mAP':>8} {'Ave theta':>10} {'Ave phi':>9} {'Ave gamma':>10}"
    print(header)
    for row in rows:
        print(
            f"{row['strategy']:<10} {row['view_points']:>11} {row['map_50']:>8.4f} "
            f"{row['ave_theta']:>10.3f} {row['ave_phi']:>9.3f} {row['ave_gamma']:>10.3f}"
        )


def cmd_eval(cfg: dict) -> int:
    out_dir = Path(_require(cfg, "out", "--out"))
    if not (out_dir / MANIFEST_NAME).is_file():
        raise IoFailure(f"no {MANIFEST_NAME} in {out_dir}")
    manifest, images, annotations, _ = load_dataset(out_dir)
    gallery = ViewGallery(list(zip(images, annotations)))

    if cfg["self"]:
        q_images, q_gts = _dataset_ground_truth(images, annotations)
    elif cfg["query"]:
        q_dir = Path(cfg["query"])
        if not (q_dir / MANIFEST_NAME).is_file():
            raise IoFailure(f"no {MANIFEST_NAME} in {q_dir}")
        _, qi, qa, _ = load_dataset(q_dir)
        q_images, q_gts = _dataset_ground_truth(qi, qa)
    else:
        raise ConfigError("eval needs --self or --query DIR")
    if not q_images:
        raise PipelineFailure("query set has no valid annotations")

    report = _evaluate_against(gallery, q_images, q_gts)
    row = _report_row(manifest["strategy"]["kind"], len(gallery), report)
    with _locked(out_dir):
        write_json(out_dir / RESULTS_NAME, {"version": 1, "rows": [row]})
    _print_table([row], "evaluation results")
    return 0


def cmd_strategy_compare(cfg: dict) -> int:
    out_dir = Path(_require(cfg, "out", "--out"))
    scene = _load_scene_checked(cfg)
    names = [s.strip() for s in (cfg["strategy"] or "loop,helix,random").split(",") if s.strip()]
    if len(names) < 2:
        raise ConfigError("strategy-compare needs at least two strategies")

    n_queries = cfg["n"] if cfg["n"] is not None else 200
    render_cfg = _render_cfg(cfg)
    label_cfg = _label_cfg(cfg)
    query_spec = StrategySpec(
        kind=StrategyKind.RANDOM, gamma=cfg["gamma"], count=n_queries, seed=cfg["seed"] + 1
    )
    q_renders = render_set(scene, generate(query_spec), render_cfg, focal=cfg["focal"])
    _, q_annotations = annotate_set(q_renders, label_cfg)
    q_images, q_gts = _dataset_ground_truth(q_renders, q_annotations)
    if not q_images:
        raise PipelineFailure("query set has no valid annotations")

    rows = []
    for name in names:
        spec = _strategy_spec(cfg, name, cfg["seed"])
        viewpoints = generate(spec)
        images = render_set(scene, viewpoints, render_cfg, focal=cfg["focal"])
        _, annotations = annotate_set(images, label_cfg)
        gallery = ViewGallery(list(zip(images, annotations)))
        report = _evaluate_against(gallery, q_images, q_gts)
        rows.append(_report_row(name, len(viewpoints), report))

    # one parameter group here; the global block averages over groups per strategy
    global_rows = []
    for name in names:
        group = [r for r in rows if r["strategy"] == name]
        global_rows.append(
            {
                "strategy": name,
                "map_50": sum(r["map_50"] for r in group) / len(group),
                "ave_theta": sum(r["ave_theta"] for r in group) / len(group),
                "ave_phi": sum(r["ave_phi"] for r in group) / len(group),
                "ave_gamma": sum(r["ave_gamma"] for r in group) / len(group),
            }
        )

    doc = {
        "version": 1,
        "settings": {
            "theta_step": cfg["theta_step"],
            "phi_step": cfg["phi_step"],
            "gamma": cfg["gamma"],
            "n_queries": n_queries,
            "valid_queries": len(q_images),
            "seed": cfg["seed"],
        },
        "rows": rows,
        "global": global_rows,
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    with _locked(out_dir):
        write_json(out_dir / COMPARE_NAME, doc)
    _print_table(rows, "strategy comparison")
    print("global averages")
    for g in global_rows:
        print(
            f"{g['strategy']:<10} {g['map_50']:>8.4f} {g['ave_theta']:>10.3f} "
            f"{g['ave_phi']:>9.3f} {g['ave_gamma']:>10.3f}"
        )
    return 0


_HANDLERS = {
    "watch": cmd_watch,
    "compose": cmd_compose,
    "eval": cmd_eval,
    "strategy-compare": cmd_strategy_compare,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = merge_config(args)
        return _HANDLERS[args.command](cfg)
    except ConfigError as e:
        print(f"error[config]: {e}", file=sys.stderr)
        return e.code
    except IoFailure as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return e.code
    except CliError as e:
        print(f"error[{e.label}]: {e}", file=sys.stderr)
        return e.code
    except (BakeError, ValueError) as e:
        print(f"error[config]: {e}", file=sys.stderr)
        return 2
    except LabelError as e:
        print(f"error[pipeline]: {e}", file=sys.stderr)
        return 4
    except OSError as e:
        print(f"error[io]: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
