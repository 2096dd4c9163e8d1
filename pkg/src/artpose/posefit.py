"""Similarity fitting between decoded NPCS and observed points (RANSAC + Umeyama)."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .core import (
    N_BINS,
    JointSpec,
    JointType,
    PartInstance,
    PartPose,
    PointCloud,
    ValidationError,
    as_points,
)

MIN_EXTENT = 1.0 / N_BINS

# Relative singular-value floor below which a point set counts as rank deficient.
_RANK_TOL = 1e-10


class PoseFitError(Exception):
    reason = "fit_failure"


class InsufficientPointsError(PoseFitError, ValueError):
    reason = "insufficient_points"


class DegenerateConfigurationError(PoseFitError, ValueError):
    reason = "degenerate_configuration"


class RansacFailure(PoseFitError):
    reason = "no_consensus"


@dataclass(frozen=True)
class RansacParams:
    max_iterations: int = 256
    inlier_threshold: float = 0.01
    min_inlier_fraction: float = 0.2
    sample_size: int = 4
    rng_seed: int = 0

    def __post_init__(self):
        if self.max_iterations < 1:
            raise ValidationError("ransac.max_iterations must be positive")
        if not self.inlier_threshold > 0:
            raise ValidationError("ransac.inlier_threshold must be positive")
        if not 0.0 < self.min_inlier_fraction <= 1.0:
            raise ValidationError("ransac.min_inlier_fraction must lie in (0, 1]")
        if self.sample_size < 3:
            raise ValidationError("ransac.sample_size must be >= 3")
        if not 0 <= self.rng_seed < 2**64:
            raise ValidationError("ransac.rng_seed must be a 64-bit unsigned integer")


class RansacResult(NamedTuple):
    rotation: np.ndarray
    translation: np.ndarray
    scale: float
    inliers: np.ndarray


class CameraJoint(NamedTuple):
    joint_type: JointType
    axis: np.ndarray
    pivot: Optional[np.ndarray]

    def to_dict(self) -> dict:
        return {
            "joint_type": self.joint_type.value,
            "axis": self.axis.tolist(),
            "pivot": None if self.pivot is None else self.pivot.tolist(),
        }


def umeyama(source, target) -> tuple[np.ndarray, np.ndarray, float]:
    """Least-squares similarity ``target ~ s * R @ source + t``.

    Reflections are removed by flipping the sign of the smallest singular
    direction, so ``det(R) = +1`` always.  Coincident, collinear or otherwise
    rank-deficient configurations raise :class:`DegenerateConfigurationError`.
    """
    X = as_points(source)
    Y = as_points(target)
    if X.shape != Y.shape:
        raise ValidationError(f"source {X.shape} and target {Y.shape} differ in shape")
    n = X.shape[0]
    if n < 3:
        raise DegenerateConfigurationError(f"need at least 3 correspondences, got {n}")

    mu_x = X.mean(axis=0)
    mu_y = Y.mean(axis=0)
    Xc = X - mu_x
    Yc = Y - mu_y
    var_x = np.einsum("ij,ij->", Xc, Xc) / n
    sx = np.linalg.svd(Xc, compute_uv=False)
    if not var_x > 0 or sx[0] == 0:
        raise DegenerateConfigurationError("source points are coincident")
    if sx[1] <= _RANK_TOL * sx[0]:
        raise DegenerateConfigurationError("source points are collinear")

    cov = Yc.T @ Xc / n
    U, D, Vt = np.linalg.svd(cov)
    if D[0] == 0 or D[1] <= _RANK_TOL * D[0]:
        raise DegenerateConfigurationError("cross-covariance has rank < 2")
    S = np.ones(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2] = -1.0
    R = (U * S) @ Vt
    s = float(np.dot(D, S) / var_x)
    if not s > 0:
        raise DegenerateConfigurationError("non-positive scale estimate")
    t = mu_y - s * R @ mu_x
    return R, t, s


def _residuals(source: np.ndarray, target: np.ndarray, R, t, s) -> np.ndarray:
    return np.linalg.norm(target - (s * source @ R.T + t), axis=1)


def ransac_umeyama(
    source, target, params: RansacParams = RansacParams(), rng: Optional[np.random.Generator] = None
) -> RansacResult:
    """Hypothesise-and-verify Umeyama.

    Every iteration draws ``sample_size`` correspondences, fits them and counts
    the points whose residual is within ``inlier_threshold``.  The largest set
    wins (ties keep the earlier iteration) and the model is refit on it.  The
    returned mask is that winning set.
    """
    X = as_points(source)
    Y = as_points(target)
    if X.shape != Y.shape:
        raise ValidationError(f"source {X.shape} and target {Y.shape} differ in shape")
    n = X.shape[0]
    if n < params.sample_size:
        raise InsufficientPointsError(f"{n} correspondences, need {params.sample_size}")
    if rng is None:
        rng = np.random.default_rng(params.rng_seed)

    best_mask = None
    best_count = 0
    for _ in range(params.max_iterations):
        sample = rng.choice(n, size=params.sample_size, replace=False)
        try:
            R, t, s = umeyama(X[sample], Y[sample])
        except DegenerateConfigurationError:
            continue
        mask = _residuals(X, Y, R, t, s) <= params.inlier_threshold
        count = int(mask.sum())
        if count > best_count:
            best_count, best_mask = count, mask

    if best_mask is None or best_count < params.min_inlier_fraction * n:
        frac = best_count / n
        raise RansacFailure(
            f"best consensus {frac:.3f} below min_inlier_fraction {params.min_inlier_fraction}"
        )
    if best_count < 3:
        raise RansacFailure("consensus set smaller than 3 points")
    R, t, s = umeyama(X[best_mask], Y[best_mask])
    return RansacResult(R, t, s, best_mask)


def instance_rng(seed: int, instance_index: int) -> np.random.Generator:
    """Independent generator per instance, derived from (global seed, instance index)."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(instance_index)]))


def fit_instance_pose(
    instance: PartInstance,
    cloud: PointCloud,
    params: RansacParams = RansacParams(),
    instance_index: int = 0,
) -> PartPose:
    """Pose and box size of one instance.

    Box edges are ``s`` times twice the largest inlier |NPCS - 0.5| per axis,
    floored at one bin width.  Measuring symmetrically about the box centre
    recovers the full box when only one side of it is visible.
    """
    if len(instance) < params.sample_size:
        raise InsufficientPointsError(
            f"instance has {len(instance)} points, need {params.sample_size}"
        )
    source = instance.npcs_coords - 0.5
    target = cloud.points[instance.point_indices]
    R, t, s, inliers = ransac_umeyama(source, target, params, instance_rng(params.rng_seed, instance_index))
    half = np.abs(source[inliers]).max(axis=0)
    extent = np.maximum(2.0 * half, MIN_EXTENT)
    return PartPose(R, t, s, s * extent)


def query_joint(pose: PartPose, spec: JointSpec) -> CameraJoint:
    """Map a canonical joint into the camera frame through the part pose."""
    axis = pose.rotation @ spec.axis_npcs
    axis = axis / np.linalg.norm(axis)
    pivot = None
    if spec.pivot_npcs is not None:
        pivot = pose.rotation @ (pose.scale * (spec.pivot_npcs - 0.5)) + pose.translation
    return CameraJoint(spec.joint_type, axis, pivot)
