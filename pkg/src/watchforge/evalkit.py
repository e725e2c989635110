"""Detection and pose evaluation, plus a nearest-view baseline estimator.

The estimator compares 16x16 grayscale thumbnails by Euclidean distance
and answers with the pose and box of the closest gallery render; it gives
the evaluation protocol something deterministic to grade.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imgproc import PixelBox, gray
from .labelgen import Annotation
from .losses import NormBox, PoseAngles, box_iou
from .render import RenderedImage

DESCRIPTOR_SIDE = 16


@dataclass(frozen=True)
class Detection:
    box: NormBox
    confidence: float
    pose: PoseAngles

    def __post_init__(self) -> None:
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence must lie in [0, 1], got {self.confidence}")


@dataclass(frozen=True)
class GroundTruth:
    box: NormBox
    pose: PoseAngles


@dataclass(frozen=True)
class EvalReport:
    map_50: float
    ave_theta: float
    ave_phi: float
    ave_gamma: float
    n_images: int
    n_excluded: int


def norm_box(box: PixelBox, width: int, height: int) -> NormBox:
    """Inclusive pixel box to continuous [0, 1] coordinates; the right and
    bottom edges sit one pixel past the inclusive maxima."""
    return NormBox(
        box.x_min / width,
        box.y_min / height,
        (box.x_max + 1) / width,
        (box.y_max + 1) / height,
    )


def average_precision(
    detections: list[list[Detection]],
    ground_truths: list[list[NormBox]],
    iou_threshold: float = 0.5,
) -> float:
    """Single-class AP: rank all detections by confidence, greedily match
    each to the best unmatched ground truth of its image at or above the
    IoU threshold, and integrate the interpolated precision envelope."""
    if len(detections) != len(ground_truths):
        raise ValueError("detections and ground truths must align per image")
    n_gt = sum(len(g) for g in ground_truths)
    if n_gt == 0:
        raise ValueError("undefined AP: no ground truths")

    flat = [
        (d.confidence, i, d)
        for i, per_image in enumerate(detections)
        for d in per_image
    ]
    flat.sort(key=lambda item: -item[0])
    taken: list[list[bool]] = [[False] * len(g) for g in ground_truths]

    hits = np.zeros(len(flat))
    for rank, (_, i, det) in enumerate(flat):
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(ground_truths[i]):
            if taken[i][j]:
                continue
            iou = box_iou(det.box, gt)
            if iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0 and best_iou >= iou_threshold:
            taken[i][best_j] = True
            hits[rank] = 1.0

    if not flat:
        return 0.0
    tp = np.cumsum(hits)
    fp = np.cumsum(1.0 - hits)
    precision = tp / (tp + fp)
    recall = tp / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev = np.concatenate([[0.0], recall[:-1]])
    return float(np.sum((recall - prev) * envelope))


def angular_error(prd: PoseAngles, trt: PoseAngles) -> tuple[float, float, float]:
    """(theta, phi, gamma) absolute errors; theta wraps circularly."""
    d = abs(prd.theta - trt.theta) % 360.0
    return min(d, 360.0 - d), abs(prd.phi - trt.phi), abs(prd.gamma - trt.gamma)


def evaluate(predictions: list[list[Detection]], ground_truths: list[GroundTruth]) -> EvalReport:
    """Score aligned per-image predictions against single-object ground
    truth.  Pose errors average the top-confidence detection per image;
    images without any detection are excluded from the pose averages and
    naturally count as misses for AP."""
    if not ground_truths:
        raise ValueError("empty evaluation set")
    if len(predictions) != len(ground_truths):
        raise ValueError("predictions and ground truths must align per image")

    map_50 = average_precision(predictions, [[g.box] for g in ground_truths], 0.5)
    errors = []
    excluded = 0
    for dets, gt in zip(predictions, ground_truths):
        if not dets:
            excluded += 1
            continue
        top = max(dets, key=lambda d: d.confidence)
        errors.append(angular_error(top.pose, gt.pose))
    if errors:
        arr = np.asarray(errors, dtype=np.float64)
        ave = arr.mean(axis=0)
    else:
        ave = np.zeros(3)
    return EvalReport(
        map_50=map_50,
        ave_theta=float(ave[0]),
        ave_phi=float(ave[1]),
        ave_gamma=float(ave[2]),
        n_images=len(ground_truths),
        n_excluded=excluded,
    )


def _descriptor(pixels: np.ndarray) -> np.ndarray:
    """16x16 nearest-subsampled grayscale thumbnail, flattened float64."""
    g = gray(pixels)
    h, w = g.shape
    rows = np.floor((np.arange(DESCRIPTOR_SIDE) + 0.5) * h / DESCRIPTOR_SIDE).astype(int)
    cols = np.floor((np.arange(DESCRIPTOR_SIDE) + 0.5) * w / DESCRIPTOR_SIDE).astype(int)
    return g[np.ix_(rows, cols)].astype(np.float64).ravel()


class ViewGallery:
    """Precomputed thumbnail index over renders with valid annotations."""

    def __init__(self, entries: list[tuple[RenderedImage, Annotation]]):
        valid = [(im, ann) for im, ann in entries if ann.valid and ann.box is not None]
        if not valid:
            raise ValueError("gallery has no valid annotations")
        self.poses = []
        self.boxes = []
        for im, ann in valid:
            v = ann.viewpoint if ann.viewpoint is not None else im.viewpoint
            if v is None:
                raise ValueError("gallery entries need a viewpoint")
            self.poses.append(PoseAngles(v.theta, v.phi, v.gamma))
            h, w = im.pixels.shape[:2]
            self.boxes.append(norm_box(ann.box, w, h))
        self._descriptors = np.stack([_descriptor(im.pixels) for im, _ in valid])

    def __len__(self) -> int:
        return len(self.poses)

    def query(self, pixels: np.ndarray) -> Detection:
        """Detection from the nearest gallery entry; ties resolve to the
        lowest index.  Confidence decays with thumbnail distance."""
        d = self._descriptors - _descriptor(pixels)
        dist = np.sqrt(np.einsum("ij,ij->i", d, d))
        i = int(np.argmin(dist))
        conf = 1.0 / (1.0 + float(dist[i]) / self._descriptors.shape[1])
        return Detection(box=self.boxes[i], confidence=conf, pose=self.poses[i])


def nearest_view_estimate(
    query: np.ndarray, gallery: list[tuple[RenderedImage, Annotation]]
) -> Detection:
    """One-shot nearest-view lookup; build a ViewGallery for repeated use."""
    return ViewGallery(gallery).query(query)
