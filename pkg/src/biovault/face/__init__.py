"""Face verification pipeline: pyramid + cascaded detection, landmark
alignment, prewhitening, and a fixed-topology embedding network."""

from .boxes import BoundingBox, BoxDeltas, decode_box, iou, nms, nms_indices
from .geometry import (
    CANONICAL_LANDMARKS,
    Landmarks,
    SimilarityTransform,
    alignment_residual,
    estimate_alignment,
    warp,
)
from .image import GrayImage, bilinear_resize, build_pyramid, load_pgm, prewhiten, save_pgm
from .pipeline import (
    Detection,
    VerifyConfig,
    VerifyDecision,
    cosine_similarity,
    detect_faces,
    embed,
    embedding_from_frame,
    preprocess,
    verify,
)
from .weights import StageWeights, load_weights, random_weights, save_weights

__all__ = [
    "BoundingBox",
    "BoxDeltas",
    "CANONICAL_LANDMARKS",
    "Detection",
    "GrayImage",
    "Landmarks",
    "SimilarityTransform",
    "StageWeights",
    "VerifyConfig",
    "VerifyDecision",
    "alignment_residual",
    "bilinear_resize",
    "build_pyramid",
    "cosine_similarity",
    "decode_box",
    "detect_faces",
    "embed",
    "embedding_from_frame",
    "estimate_alignment",
    "iou",
    "load_pgm",
    "load_weights",
    "nms",
    "nms_indices",
    "preprocess",
    "prewhiten",
    "random_weights",
    "save_pgm",
    "save_weights",
    "verify",
    "warp",
]
