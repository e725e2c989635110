"""On-disk dataset formats: scene descriptions, manifests, images, results.

Everything is JSON plus 8-bit RGB PNG.  Field order is fixed and floats
carrying angles are rounded to 6 decimals before serialization, so a rerun
with the same inputs reproduces files byte for byte and a read-write cycle
is the identity.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
from PIL import Image

from .geometry import Viewpoint
from .imgproc import PixelBox
from .labelgen import Annotation
from .render import RenderedImage

MANIFEST_VERSION = 1
MANIFEST_NAME = "manifest.json"
COMPOSITES_NAME = "composites.json"
RESULTS_NAME = "results.json"

_BACKGROUND_SUFFIXES = {".png", ".jpg", ".jpeg"}


class SceneFormatError(ValueError):
    pass


def load_scene(path: str | Path) -> tuple[list, float]:
    """Read a scene file: either a bare JSON list of primitive records or
    an object {"bounds": float, "primitives": [...]}.  Records look like
    {"shape": "box", "center": [x,y,z], "dims": [...], "color": [r,g,b],
    "density": s}.  Returns (primitives, bounds)."""
    from .scene import Primitive, Shape

    raw = json.loads(Path(path).read_text())
    if isinstance(raw, list):
        bounds, records = 1.0, raw
    elif isinstance(raw, dict):
        bounds = float(raw.get("bounds", 1.0))
        records = raw.get("primitives")
        if not isinstance(records, list):
            raise SceneFormatError("scene object needs a 'primitives' list")
    else:
        raise SceneFormatError("scene file must hold a list or an object")

    prims = []
    for i, rec in enumerate(records):
        try:
            shape = Shape(rec["shape"])
            prims.append(
                Primitive(
                    shape=shape,
                    center=tuple(float(v) for v in rec["center"]),
                    dims=tuple(float(v) for v in rec["dims"]),
                    color=tuple(float(v) for v in rec["color"]),
                    density=float(rec["density"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise SceneFormatError(f"bad primitive record #{i}: {exc}") from exc
    if not prims:
        raise SceneFormatError("scene has no primitives")
    return prims, bounds


def write_png(path: str | Path, pixels: np.ndarray) -> None:
    a = np.asarray(pixels)
    if a.dtype != np.uint8 or a.ndim != 3 or a.shape[2] != 3:
        raise ValueError("expected an (H, W, 3) uint8 array")
    Image.fromarray(a, mode="RGB").save(str(path), format="PNG")


def read_png(path: str | Path) -> np.ndarray:
    with Image.open(str(path)) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8)


def load_backgrounds(directory: str | Path) -> list[np.ndarray]:
    """All images in a directory, sorted by file name for stable ordering."""
    d = Path(directory)
    if not d.is_dir():
        raise FileNotFoundError(f"background directory not found: {d}")
    files = sorted(p for p in d.iterdir() if p.suffix.lower() in _BACKGROUND_SUFFIXES)
    return [read_png(p) for p in files]


def _round6(x: float) -> float:
    return round(float(x), 6)


def _box_list(box: PixelBox | None) -> list[int] | None:
    return box.to_list() if box is not None else None


def build_manifest(
    strategy: dict,
    render: dict,
    seed: int,
    occ: PixelBox,
    records: list[tuple[str, Annotation]],
) -> dict:
    """Manifest dict with pinned key order; records pair a file name with
    its annotation."""
    images = []
    for name, ann in records:
        v = ann.viewpoint
        if v is None:
            raise ValueError(f"annotation for {name} lacks a viewpoint")
        images.append(
            {
                "file": name,
                "theta": _round6(v.theta),
                "phi": _round6(v.phi),
                "gamma": _round6(v.gamma),
                "bbox": _box_list(ann.box),
                "valid": ann.valid,
                "kernel_used": ann.kernel_used,
            }
        )
    return {
        "version": MANIFEST_VERSION,
        "strategy": strategy,
        "render": render,
        "seed": seed,
        "occ_region": occ.to_list(),
        "images": images,
    }


def write_json(path: str | Path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def load_dataset(directory: str | Path) -> tuple[dict, list[RenderedImage], list[Annotation], PixelBox]:
    """Rebuild a rendered dataset from its manifest: images re-read from
    PNG, viewpoints and annotations from the records."""
    from .geometry import pose_from_viewpoint

    d = Path(directory)
    manifest = read_json(d / MANIFEST_NAME)
    render_echo = manifest["render"]
    focal = float(render_echo["focal"])
    width, height = int(render_echo["width"]), int(render_echo["height"])

    images: list[RenderedImage] = []
    annotations: list[Annotation] = []
    for rec in manifest["images"]:
        v = Viewpoint(rec["theta"], rec["phi"], rec["gamma"])
        pose = pose_from_viewpoint(v, focal=focal, width=width, height=height)
        pixels = read_png(d / rec["file"])
        images.append(RenderedImage(pixels=pixels, viewpoint=v, pose=pose))
        box = rec["bbox"]
        annotations.append(
            Annotation(
                viewpoint=v,
                box=PixelBox(*box) if box is not None else None,
                valid=bool(rec["valid"]),
                kernel_used=rec["kernel_used"],
            )
        )
    occ = PixelBox(*manifest["occ_region"])
    return manifest, images, annotations, occ
