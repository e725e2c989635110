"""watchforge: spherical view sweeps over voxel scenes, rendered into
deterministic detection datasets with synthesized box labels, composite
scenes, and an evaluation harness."""

from .augment import AugmentSpec, CompositeSample, Placement, Rect, augment_simple, cut_rect, fuse, synthesize_checking_set
from .evalkit import Detection, EvalReport, GroundTruth, ViewGallery, angular_error, average_precision, evaluate, nearest_view_estimate
from .geometry import CameraPose, Ray, Viewpoint, pose_from_viewpoint, rays_for_pose
from .imgproc import PixelBox, bbox, binarize, close, gauss, gray
from .labelgen import Annotation, LabelError, LabelGenConfig, annotate_set, occupied_region, rect_region
from .losses import NormBox, PoseAngles, angle_iou_loss, box_iou, cross_entropy, giou_loss, l1_loss, mse_pixels
from .render import RenderConfig, RenderedImage, march_rays, render, render_set
from .sampling import StrategyKind, StrategySpec, generate
from .scene import BakeError, Primitive, Shape, VoxelScene, bake, occupied_segments, query, query_many

__version__ = "0.1.0"

__all__ = [
    "AugmentSpec", "CompositeSample", "Placement", "Rect", "augment_simple",
    "cut_rect", "fuse", "synthesize_checking_set",
    "Detection", "EvalReport", "GroundTruth", "ViewGallery", "angular_error",
    "average_precision", "evaluate", "nearest_view_estimate",
    "CameraPose", "Ray", "Viewpoint", "pose_from_viewpoint", "rays_for_pose",
    "PixelBox", "bbox", "binarize", "close", "gauss", "gray",
    "Annotation", "LabelError", "LabelGenConfig", "annotate_set",
    "occupied_region", "rect_region",
    "NormBox", "PoseAngles", "angle_iou_loss", "box_iou", "cross_entropy",
    "giou_loss", "l1_loss", "mse_pixels",
    "RenderConfig", "RenderedImage", "march_rays", "render", "render_set",
    "StrategyKind", "StrategySpec", "generate",
    "BakeError", "Primitive", "Shape", "VoxelScene", "bake",
    "occupied_segments", "query", "query_many",
    "__version__",
]
