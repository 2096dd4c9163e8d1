"""Oracle per-point predictions and a parameterized corruption model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import N_BINS, N_CLASSES, PerPointPrediction, PointCloud, SceneGroundTruth, ValidationError
from ..npcs import bin_encode


@dataclass(frozen=True)
class CorruptionParams:
    label_flip_prob: float = 0.0
    offset_noise_sigma: float = 0.0
    npcs_bin_noise_sigma: float = 0.0
    confidence_temperature: float = 1e-3
    rng_seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.label_flip_prob <= 1.0:
            raise ValidationError("label_flip_prob must lie in [0, 1]")
        for name in ("offset_noise_sigma", "npcs_bin_noise_sigma"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and non-negative")
        if not (math.isfinite(self.confidence_temperature) and self.confidence_temperature > 0):
            raise ValidationError("confidence_temperature must be positive")
        if int(self.rng_seed) < 0:
            raise ValidationError("rng_seed must be non-negative")

    def to_dict(self) -> dict:
        return {
            "label_flip_prob": self.label_flip_prob,
            "offset_noise_sigma": self.offset_noise_sigma,
            "npcs_bin_noise_sigma": self.npcs_bin_noise_sigma,
            "confidence_temperature": self.confidence_temperature,
            "rng_seed": int(self.rng_seed),
        }


def _one_hot(idx: np.ndarray, k: int) -> np.ndarray:
    out = np.zeros(idx.shape + (k,))
    np.put_along_axis(out, idx[..., None], 1.0, axis=-1)
    return out


def oracle_prediction(gt: SceneGroundTruth, cloud: PointCloud) -> PerPointPrediction:
    """Perfect head outputs: one-hot classes and bins, exact centroid offsets.

    Background points get zero offsets and (meaningless) bin-0 NPCS.
    """
    if len(gt) != len(cloud):
        raise ValidationError(f"ground truth has {len(gt)} points, cloud has {len(cloud)}")
    pts = cloud.points
    offsets = np.zeros_like(pts)
    centroids = gt.instance_centroids(pts)
    fg = gt.instance_ids >= 0
    offsets[fg] = centroids[gt.instance_ids[fg]] - pts[fg]
    bins = np.where(fg[:, None], bin_encode(gt.npcs), 0)
    return PerPointPrediction(_one_hot(gt.labels, N_CLASSES), offsets, _one_hot(bins, N_BINS))


def soften(idx: np.ndarray, k: int, temperature: float) -> np.ndarray:
    """Rows peaked at ``idx``: target gets exp(1/tau), others exp(0), normalized."""
    # Written as 1 / (1 + (k-1) e^{-1/tau}) to stay finite for tiny tau.
    rest = math.exp(-1.0 / temperature)
    p_target = 1.0 / (1.0 + (k - 1) * rest)
    p_other = rest * p_target
    out = np.full(idx.shape + (k,), p_other)
    np.put_along_axis(out, idx[..., None], p_target, axis=-1)
    return out


def corrupt(pred: PerPointPrediction, params: CorruptionParams) -> PerPointPrediction:
    """Independent per-point label flips, offset noise and bin jitter, then softening.

    All random draws are made regardless of parameter values so that one
    seed gives the same noise streams at every corruption level.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(params.rng_seed), 0xC0441]))
    n = len(pred)
    labels = np.argmax(pred.semantic, axis=1)
    flip = rng.random(n) < params.label_flip_prob
    # Uniform over the K-1 wrong classes.
    shift = rng.integers(1, N_CLASSES, size=n)
    labels = np.where(flip, (labels + shift) % N_CLASSES, labels)

    offsets = pred.offsets + params.offset_noise_sigma * rng.standard_normal((n, 3))

    bins = np.argmax(pred.npcs_bins, axis=2)
    jitter = np.rint(params.npcs_bin_noise_sigma * rng.standard_normal((n, 3))).astype(np.int64)
    bins = np.clip(bins + jitter, 0, N_BINS - 1)

    t = params.confidence_temperature
    return PerPointPrediction(soften(labels, N_CLASSES, t), offsets, soften(bins, N_BINS, t))
