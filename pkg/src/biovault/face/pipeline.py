"""Cascaded face detection, alignment, and embedding.

The proposal stage slides a 12x12 window with stride 2 over every pyramid
level. It is evaluated fully convolutionally: with valid convs and stride-2
pooling, an even window offset in image space corresponds exactly to one
feature-space position, so the whole level is processed in a handful of array
ops while remaining arithmetic-identical to cropping each window (a test pins
this equivalence).

Every net input (pyramid level or crop) is normalized to zero mean and unit
variance first; flat inputs become zeros. That makes the whole cascade exactly
invariant to adding a constant to every pixel, and frees the random-weight
stages from absolute brightness.

Landmark head outputs are box-relative: the first five values are x offsets
and the last five y offsets, each in units of the candidate box size.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import DegenerateImage, DegenerateLandmarks, DimensionMismatch, ZeroEmbedding
from ..neural import conv2d_multi, dense, max_pool_2x2, relu, sigmoid
from .boxes import BoundingBox, BoxDeltas, decode_box, nms_indices
from .geometry import CANONICAL_LANDMARKS, Landmarks, estimate_alignment, warp
from .image import GrayImage, bilinear_resize, build_pyramid, crop, prewhiten, safe_prewhiten
from .weights import (
    EMBED_INPUT_SIZE,
    EMBEDDING_DIM,
    ONET_INPUT,
    PNET_WINDOW,
    RNET_INPUT,
    StageWeights,
)


@dataclass(frozen=True)
class VerifyConfig:
    theta: float = 0.5
    pnet_score_min: float = 0.5
    rnet_score_min: float = 0.5
    nms_iou: float = 0.5
    pyramid_alpha: float = 0.5
    min_face: int = 12
    pnet_stride: int = 2

    def __post_init__(self) -> None:
        for name in ("theta", "pnet_score_min", "rnet_score_min", "nms_iou"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")
        if not 0.0 < self.pyramid_alpha < 1.0:
            raise ValueError("pyramid_alpha must lie strictly between 0 and 1")
        if self.min_face < PNET_WINDOW:
            raise ValueError(f"min_face must be at least {PNET_WINDOW}")
        if self.pnet_stride < 2 or self.pnet_stride % 2 != 0:
            raise ValueError("pnet_stride must be a positive even integer")


@dataclass(frozen=True)
class VerifyDecision:
    accepted: bool
    similarity: float
    theta: float


@dataclass(frozen=True)
class Detection:
    box: BoundingBox
    landmarks: Landmarks


# -- stage forward passes --------------------------------------------------------

def _pnet_level(pixels: np.ndarray, weights: StageWeights, stride: int):
    """Fully convolutional proposal pass over one (prewhitened) level.

    Returns (offsets, scores, deltas): window top-left offsets in level
    coordinates (n, 2) as (row, col), sigmoid scores (n,), and deltas (n, 4).
    """
    h, w = pixels.shape
    if h < PNET_WINDOW or w < PNET_WINDOW:
        return np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros((0, 4))
    f1 = relu(conv2d_multi(pixels[None, :, :], weights["pnet.conv1"]))
    p1 = max_pool_2x2(f1)
    f2 = relu(conv2d_multi(p1, weights["pnet.conv2"]))
    _, fh, fw = f2.shape
    n_rows, n_cols = fh - 2, fw - 2
    if n_rows <= 0 or n_cols <= 0:
        return np.zeros((0, 2), dtype=int), np.zeros(0), np.zeros((0, 4))
    step = stride // 2
    rows = np.arange(0, n_rows, step)
    cols = np.arange(0, n_cols, step)
    # Gather each window's 16x3x3 feature patch, flattened channel-major to
    # match the per-window crop path.
    windows = np.lib.stride_tricks.sliding_window_view(f2, (3, 3), axis=(1, 2))
    patches = windows[:, rows[:, None], cols[None, :]]  # (16, R, C, 3, 3)
    feats = patches.transpose(1, 2, 0, 3, 4).reshape(len(rows) * len(cols), -1)
    score_w, score_b = weights.dense_pair("pnet.score")
    delta_w, delta_b = weights.dense_pair("pnet.deltas")
    scores = sigmoid(dense(score_w, feats, score_b)[:, 0])
    deltas = dense(delta_w, feats, delta_b)
    grid_r, grid_c = np.meshgrid(rows, cols, indexing="ij")
    offsets = np.stack([grid_r.ravel() * 2, grid_c.ravel() * 2], axis=1)
    return offsets, scores, deltas


def _crop_net(pixels: np.ndarray, weights: StageWeights, stage: str) -> np.ndarray:
    """Shared conv trunk for the refine/output stages; returns the fc activation."""
    stack = pixels[None, :, :]
    stack = max_pool_2x2(relu(conv2d_multi(stack, weights[f"{stage}.conv1"])))
    stack = max_pool_2x2(relu(conv2d_multi(stack, weights[f"{stage}.conv2"])))
    if stage == "onet":
        stack = max_pool_2x2(relu(conv2d_multi(stack, weights["onet.conv3"])))
    fc_w, fc_b = weights.dense_pair(f"{stage}.fc")
    return relu(dense(fc_w, stack.ravel(), fc_b))


def _rnet_forward(pixels: np.ndarray, weights: StageWeights) -> tuple[float, BoxDeltas]:
    hidden = _crop_net(pixels, weights, "rnet")
    score_w, score_b = weights.dense_pair("rnet.score")
    delta_w, delta_b = weights.dense_pair("rnet.deltas")
    score = sigmoid(float(dense(score_w, hidden, score_b)[0]))
    d = dense(delta_w, hidden, delta_b)
    return score, BoxDeltas(*map(float, d))


def _onet_forward(pixels: np.ndarray, weights: StageWeights):
    hidden = _crop_net(pixels, weights, "onet")
    score_w, score_b = weights.dense_pair("onet.score")
    delta_w, delta_b = weights.dense_pair("onet.deltas")
    lm_w, lm_b = weights.dense_pair("onet.landmarks")
    score = sigmoid(float(dense(score_w, hidden, score_b)[0]))
    d = dense(delta_w, hidden, delta_b)
    lm = dense(lm_w, hidden, lm_b)
    return score, BoxDeltas(*map(float, d)), lm


def _landmarks_from_box(box: BoundingBox, lm: np.ndarray) -> Landmarks:
    xs = box.x + lm[:5] * box.w
    ys = box.y + lm[5:] * box.h
    return Landmarks(np.stack([xs, ys], axis=1))


def _resized_crop(img: GrayImage, box: BoundingBox, size: int) -> np.ndarray | None:
    region = crop(img, box.x, box.y, box.w, box.h)
    if region is None:
        return None
    return safe_prewhiten(bilinear_resize(region, size, size).pixels)


def _nms_pairs(items: list[tuple[BoundingBox, object]], iou_threshold: float):
    kept = nms_indices([box for box, _ in items], iou_threshold)
    return [items[i] for i in kept]


# -- public pipeline ---------------------------------------------------------------

def detect_faces(
    img: GrayImage, weights: StageWeights, cfg: VerifyConfig | None = None
) -> list[Detection]:
    """Run the three-stage cascade; detections come back in descending score order."""
    cfg = cfg or VerifyConfig()
    pyramid = build_pyramid(img, cfg.pyramid_alpha, cfg.min_face)

    candidates: list[BoundingBox] = []
    for level in pyramid:
        scale_x = level.width / img.width
        scale_y = level.height / img.height
        offsets, scores, deltas = _pnet_level(
            safe_prewhiten(level.pixels), weights, cfg.pnet_stride
        )
        level_boxes: list[BoundingBox] = []
        for (row, col), score, d in zip(offsets, scores, deltas):
            if score < cfg.pnet_score_min:
                continue
            anchor = BoundingBox(
                x=col / scale_x,
                y=row / scale_y,
                w=PNET_WINDOW / scale_x,
                h=PNET_WINDOW / scale_y,
                score=float(score),
            )
            level_boxes.append(decode_box(anchor, BoxDeltas(*map(float, d))))
        keep = nms_indices(level_boxes, cfg.nms_iou)
        candidates.extend(level_boxes[i] for i in keep)
    keep = nms_indices(candidates, cfg.nms_iou)
    candidates = [candidates[i] for i in keep]

    refined: list[BoundingBox] = []
    for box in candidates:
        pixels = _resized_crop(img, box, RNET_INPUT)
        if pixels is None:
            continue
        score, deltas = _rnet_forward(pixels, weights)
        if score < cfg.rnet_score_min:
            continue
        refined.append(decode_box(
            BoundingBox(box.x, box.y, box.w, box.h, score), deltas
        ))
    keep = nms_indices(refined, cfg.nms_iou)
    refined = [refined[i] for i in keep]

    final: list[tuple[BoundingBox, Landmarks]] = []
    for box in refined:
        pixels = _resized_crop(img, box, ONET_INPUT)
        if pixels is None:
            continue
        score, deltas, lm = _onet_forward(pixels, weights)
        if score < cfg.rnet_score_min:
            continue
        scored = BoundingBox(box.x, box.y, box.w, box.h, score)
        final.append((decode_box(scored, deltas), _landmarks_from_box(scored, lm)))
    final = _nms_pairs(final, cfg.nms_iou)
    return [Detection(box, lm) for box, lm in final]


def preprocess(img: GrayImage) -> np.ndarray:
    """Resize to the embedding input size, then prewhiten.

    The result has zero mean and unit (population) variance; flat images raise
    DegenerateImage.
    """
    resized = bilinear_resize(img, EMBED_INPUT_SIZE, EMBED_INPUT_SIZE)
    return prewhiten(resized.pixels)


def embed(matrix: np.ndarray, weights: StageWeights) -> np.ndarray:
    """Map a preprocessed 160x160 input to an L2-normalized 512-vector."""
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.shape != (EMBED_INPUT_SIZE, EMBED_INPUT_SIZE):
        raise DimensionMismatch(
            f"embed expects {EMBED_INPUT_SIZE}x{EMBED_INPUT_SIZE}, got {matrix.shape}"
        )
    stack = matrix[None, :, :]
    for layer in ("embed.conv1", "embed.conv2", "embed.conv3", "embed.conv4"):
        stack = max_pool_2x2(relu(conv2d_multi(stack, weights[layer])))
    fc_w, fc_b = weights.dense_pair("embed.fc")
    raw = dense(fc_w, stack.ravel(), fc_b)
    norm = float(np.linalg.norm(raw))
    if norm < 1e-12:
        raise ZeroEmbedding("embedding vanished before normalization")
    return raw / norm


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != (EMBEDDING_DIM,) or b.shape != (EMBEDDING_DIM,):
        raise DimensionMismatch(f"embeddings must have shape ({EMBEDDING_DIM},)")
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na < 1e-12 or nb < 1e-12:
        raise ZeroEmbedding("cannot compare a zero embedding")
    return float(np.dot(a, b) / (na * nb))


def verify(a: np.ndarray, b: np.ndarray, theta: float) -> VerifyDecision:
    """Accept exactly when cosine similarity reaches theta (inclusive)."""
    similarity = cosine_similarity(a, b)
    return VerifyDecision(accepted=similarity >= theta, similarity=similarity, theta=theta)


def embedding_from_frame(
    img: GrayImage, weights: StageWeights, cfg: VerifyConfig | None = None
) -> np.ndarray:
    """Full chain from a raw frame: detect, align, preprocess, embed.

    The highest-scoring detection's landmarks drive a similarity alignment into
    the canonical 160x160 frame. When nothing is detected (or the landmarks are
    degenerate) the whole frame is used instead; the fallback is deterministic,
    so equal frames always embed equally.
    """
    cfg = cfg or VerifyConfig()
    detections = detect_faces(img, weights, cfg)
    if detections:
        best = detections[0]
        try:
            transform = estimate_alignment(
                best.landmarks, Landmarks(CANONICAL_LANDMARKS)
            )
            aligned = warp(img, transform, EMBED_INPUT_SIZE, EMBED_INPUT_SIZE)
            return embed(prewhiten(aligned.pixels), weights)
        except (DegenerateLandmarks, DegenerateImage):
            pass
    return embed(preprocess(img), weights)
