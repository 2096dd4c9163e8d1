"""Forward-only kernels for the three supervision terms and their weighted sum."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import N_BINS, N_CLASSES, PartClass, ValidationError
from .npcs import SymmetryTable, bin_encode, candidate_rotations, symmetry_for

PROB_FLOOR = 1e-12

DEFAULT_GAMMA = 2.0
DEFAULT_ALPHA = np.array([0.25] + [1.0] * (N_CLASSES - 1))


@dataclass(frozen=True)
class LossWeights:
    semantic: float = 17.5
    instance: float = 125.0
    npcs: float = 0.15

    def __post_init__(self):
        for name in ("semantic", "instance", "npcs"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"loss weight {name} must be finite and non-negative")


def _shape_check(name: str, a: np.ndarray, shape: tuple) -> None:
    if a.shape != shape:
        raise ValidationError(f"{name}: expected shape {shape}, got {a.shape}")


def focal_loss(pred_dist, gt_class, gamma: float = DEFAULT_GAMMA, alpha=None) -> float:
    """Mean of ``-alpha_c (1 - p_c)^gamma log p_c`` over points.

    ``alpha`` is a scalar or one weight per class; ``None`` uses the defaults
    (0.25 for background, 1 elsewhere).
    """
    p = np.asarray(pred_dist, dtype=np.float64)
    c = np.asarray(gt_class, dtype=np.int64)
    if p.ndim != 2:
        raise ValidationError(f"pred_dist: expected 2-D, got shape {p.shape}")
    _shape_check("gt_class", c, (p.shape[0],))
    if c.size and (c.min() < 0 or c.max() >= p.shape[1]):
        raise ValidationError("gt_class out of range")
    if gamma < 0:
        raise ValidationError("gamma must be non-negative")
    a = DEFAULT_ALPHA if alpha is None else np.broadcast_to(np.asarray(alpha, dtype=np.float64), (p.shape[1],))
    if a.shape != (p.shape[1],):
        raise ValidationError("alpha must have one weight per class")
    if c.size == 0:
        return 0.0
    p_gt = np.maximum(p[np.arange(c.size), c], PROB_FLOOR)
    terms = -a[c] * (1.0 - p_gt) ** gamma * np.log(p_gt)
    return float(terms.mean())


def cross_entropy(pred_dist, gt_class) -> float:
    """Mean negative log-likelihood of the target class."""
    p = np.asarray(pred_dist, dtype=np.float64)
    c = np.asarray(gt_class, dtype=np.int64)
    return float(np.mean(-np.log(np.maximum(p[np.arange(c.size), c], PROB_FLOOR))))


def offset_loss(pred_offsets, gt_offsets, instance_mask) -> float:
    """Sum of L2 offset errors over instance points, divided by the total point count."""
    pred = np.asarray(pred_offsets, dtype=np.float64)
    gt = np.asarray(gt_offsets, dtype=np.float64)
    mask = np.asarray(instance_mask, dtype=bool)
    _shape_check("pred_offsets", pred, (pred.shape[0], 3))
    _shape_check("gt_offsets", gt, pred.shape)
    _shape_check("instance_mask", mask, (pred.shape[0],))
    n = pred.shape[0]
    if n == 0:
        return 0.0
    err = np.linalg.norm(gt - pred, axis=1)
    return float(err[mask].sum() / n)


def _bin_nll(logp: np.ndarray, coords: np.ndarray) -> np.ndarray:
    """Per-point sum over axes of -log p at the target bin, shape (M,)."""
    bins = bin_encode(coords)
    rows = np.arange(coords.shape[0])[:, None]
    return -logp[rows, np.arange(3)[None, :], bins].sum(axis=1)


def npcs_loss(
    pred_bins,
    gt_coords,
    classes,
    symmetry_table: Optional[SymmetryTable] = None,
    instance_ids=None,
) -> float:
    """Binned NPCS cross-entropy averaged over the 3N axis terms.

    Points of symmetric classes are scored against every symmetry-rotated copy
    of their ground truth (rotated about the NPCS centre) and the cheapest
    copy is kept, one choice per instance.  Without ``instance_ids`` every
    symmetric class is treated as a single instance.
    """
    bins = np.asarray(pred_bins, dtype=np.float64)
    gt = np.asarray(gt_coords, dtype=np.float64)
    cls = np.asarray(classes, dtype=np.int64)
    n = bins.shape[0] if bins.ndim else 0
    _shape_check("pred_bins", bins, (n, 3, N_BINS))
    _shape_check("gt_coords", gt, (n, 3))
    _shape_check("classes", cls, (n,))
    if instance_ids is None:
        groups = cls.copy()
    else:
        groups = np.asarray(instance_ids, dtype=np.int64)
        _shape_check("instance_ids", groups, (n,))
    if n == 0:
        return 0.0

    logp = np.log(np.maximum(bins, PROB_FLOOR))
    total = 0.0
    plain = np.ones(n, dtype=bool)
    for c in np.unique(cls):
        if c == PartClass.BACKGROUND:
            continue
        rotations = candidate_rotations(symmetry_for(PartClass(int(c)), symmetry_table))
        if len(rotations) == 1:
            continue
        in_class = cls == c
        plain &= ~in_class
        for g in np.unique(groups[in_class]):
            idx = np.flatnonzero(in_class & (groups == g))
            centred = gt[idx] - 0.5
            costs = [_bin_nll(logp[idx], centred @ S.T + 0.5).sum() for S in rotations]
            total += min(costs)
    if plain.any():
        total += _bin_nll(logp[plain], gt[plain]).sum()
    return float(total / (3 * n))


def multitask_loss(semantic: float, instance: float, npcs: float, weights: LossWeights = LossWeights()) -> float:
    return weights.semantic * semantic + weights.instance * instance + weights.npcs * npcs
