"""Shared domain types, the part taxonomy and rotation helpers.

All containers are frozen dataclasses over read-only float64 numpy arrays, so
instances can be shared between threads and processes without copying.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

N_CLASSES = 10
N_BINS = 32

ORTHO_TOL = 1e-9
STOCHASTIC_TOL = 1e-6


class ValidationError(ValueError):
    """Raised when a value violates a domain invariant."""


class PartClass(enum.IntEnum):
    # Integer ids are part of the wire format; do not reorder.
    BACKGROUND = 0
    LINE_FIXED_HANDLE = 1
    ROUND_FIXED_HANDLE = 2
    HINGE_HANDLE = 3
    HINGE_LID = 4
    SLIDER_LID = 5
    SLIDER_BUTTON = 6
    SLIDER_DRAWER = 7
    HINGE_DOOR = 8
    HINGE_KNOB = 9

    @property
    def label(self) -> str:
        return self.name.lower()

    @classmethod
    def from_label(cls, label: str) -> "PartClass":
        try:
            return cls[label.upper()]
        except KeyError:
            raise ValidationError(f"unknown part class {label!r}") from None

    @classmethod
    def parts(cls) -> list["PartClass"]:
        """The nine instance classes, in id order."""
        return [c for c in cls if c is not cls.BACKGROUND]


CLASS_NAMES: tuple[str, ...] = tuple(c.label for c in PartClass)


class JointType(str, enum.Enum):
    REVOLUTE = "revolute"
    PRISMATIC = "prismatic"
    FIXED = "fixed"


# ---------------------------------------------------------------------------
# array helpers


def _frozen(a, dtype=np.float64) -> np.ndarray:
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


def _check_finite(name: str, a: np.ndarray) -> None:
    if not np.all(np.isfinite(a)):
        raise ValidationError(f"{name}: non-finite values")


def _check_stochastic(name: str, a: np.ndarray, axis: int = -1) -> None:
    if np.any(a < 0):
        raise ValidationError(f"{name}: negative probabilities")
    dev = np.abs(a.sum(axis=axis) - 1.0)
    if dev.size and dev.max() > STOCHASTIC_TOL:
        raise ValidationError(f"{name}: rows do not sum to 1 (max deviation {dev.max():.3g})")


def check_rotation(R, name: str = "rotation", tol: float = ORTHO_TOL) -> np.ndarray:
    """Return ``R`` as a (3, 3) float array, raising unless it lies in SO(3)."""
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (3, 3):
        raise ValidationError(f"{name}: expected shape (3, 3), got {R.shape}")
    _check_finite(name, R)
    if np.abs(R.T @ R - np.eye(3)).max() > tol:
        raise ValidationError(f"{name}: not orthonormal")
    if abs(np.linalg.det(R) - 1.0) > tol:
        raise ValidationError(f"{name}: determinant is not +1")
    return R


# ---------------------------------------------------------------------------
# rotations


def axis_angle_matrix(axis, angle: float) -> np.ndarray:
    """Rotation by ``angle`` radians about ``axis`` (Rodrigues)."""
    axis = np.asarray(axis, dtype=np.float64)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise ValidationError("rotation axis must be non-zero")
    x, y, z = axis / norm
    K = np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])
    return np.eye(3) + np.sin(angle) * K + (1.0 - np.cos(angle)) * (K @ K)


def random_rotation(rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed rotation matrix, from a normalised Gaussian quaternion."""
    q = rng.normal(size=4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_geodesic_angle(Ra, Rb) -> float:
    """Geodesic distance on SO(3) between two rotations, in degrees.

    Mathematically ``arccos((trace(Ra^T Rb) - 1) / 2)``; evaluated with atan2 of
    the symmetric and antisymmetric parts so small angles keep full precision.
    """
    Ra = check_rotation(Ra, "Ra")
    Rb = check_rotation(Rb, "Rb")
    M = Ra.T @ Rb
    cos_part = (np.trace(M) - 1.0) / 2.0
    skew = np.array([M[2, 1] - M[1, 2], M[0, 2] - M[2, 0], M[1, 0] - M[0, 1]])
    sin_part = np.linalg.norm(skew) / 2.0
    angle = np.degrees(np.arctan2(sin_part, cos_part))
    return float(min(max(angle, 0.0), 180.0))


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True)
class PointCloud:
    points: np.ndarray

    def __post_init__(self):
        pts = _frozen(self.points)
        if pts.ndim != 2 or pts.shape[1] != 3 or pts.shape[0] < 1:
            raise ValidationError(f"points: expected shape (N>=1, 3), got {pts.shape}")
        _check_finite("points", pts)
        object.__setattr__(self, "points", pts)

    def __len__(self) -> int:
        return self.points.shape[0]


@dataclass(frozen=True)
class PerPointPrediction:
    """The three per-point head outputs: class distribution, centroid offset, NPCS bins."""

    semantic: np.ndarray
    offsets: np.ndarray
    npcs_bins: np.ndarray

    def __post_init__(self):
        sem = _frozen(self.semantic)
        off = _frozen(self.offsets)
        bins = _frozen(self.npcs_bins)
        n = sem.shape[0] if sem.ndim else 0
        if sem.shape != (n, N_CLASSES):
            raise ValidationError(f"semantic: expected shape (N, {N_CLASSES}), got {sem.shape}")
        if off.shape != (n, 3):
            raise ValidationError(f"offsets: expected shape ({n}, 3), got {off.shape}")
        if bins.shape != (n, 3, N_BINS):
            raise ValidationError(f"npcs_bins: expected shape ({n}, 3, {N_BINS}), got {bins.shape}")
        for name, a in (("semantic", sem), ("offsets", off), ("npcs_bins", bins)):
            _check_finite(name, a)
        _check_stochastic("semantic", sem)
        _check_stochastic("npcs_bins", bins)
        object.__setattr__(self, "semantic", sem)
        object.__setattr__(self, "offsets", off)
        object.__setattr__(self, "npcs_bins", bins)

    def __len__(self) -> int:
        return self.semantic.shape[0]

    def check_matches(self, cloud: PointCloud) -> None:
        if len(self) != len(cloud):
            raise ValidationError(f"prediction has {len(self)} points, cloud has {len(cloud)}")


@dataclass(frozen=True)
class PartPose:
    """Similarity pose of a part's NPCS frame plus the edge lengths of its box."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float
    size: np.ndarray

    def __post_init__(self):
        R = _frozen(check_rotation(self.rotation))
        t = _frozen(self.translation)
        size = _frozen(self.size)
        if t.shape != (3,):
            raise ValidationError(f"translation: expected shape (3,), got {t.shape}")
        if size.shape != (3,):
            raise ValidationError(f"size: expected shape (3,), got {size.shape}")
        _check_finite("translation", t)
        _check_finite("size", size)
        scale = float(self.scale)
        if not np.isfinite(scale) or scale <= 0:
            raise ValidationError(f"scale must be positive, got {scale}")
        if np.any(size <= 0):
            raise ValidationError("size components must be positive")
        object.__setattr__(self, "rotation", R)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", scale)
        object.__setattr__(self, "size", size)

    def to_dict(self) -> dict:
        return {
            "rotation": self.rotation.tolist(),
            "translation": self.translation.tolist(),
            "scale": self.scale,
            "size": self.size.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PartPose":
        return cls(
            rotation=np.array(d["rotation"], dtype=np.float64),
            translation=np.array(d["translation"], dtype=np.float64),
            scale=d["scale"],
            size=np.array(d["size"], dtype=np.float64),
        )


@dataclass(frozen=True)
class PartInstance:
    part_class: PartClass
    point_indices: np.ndarray
    confidence: float
    npcs_coords: np.ndarray

    def __post_init__(self):
        cls = PartClass(self.part_class)
        if cls is PartClass.BACKGROUND:
            raise ValidationError("background is not an instance class")
        idx = _frozen(self.point_indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise ValidationError("point_indices must be a non-empty 1-D index set")
        if np.any(np.diff(idx) <= 0):
            raise ValidationError("point_indices must be sorted and duplicate-free")
        coords = _frozen(self.npcs_coords)
        if coords.shape != (idx.size, 3):
            raise ValidationError(f"npcs_coords: expected shape ({idx.size}, 3), got {coords.shape}")
        _check_finite("npcs_coords", coords)
        if coords.min() < 0 or coords.max() > 1:
            raise ValidationError("npcs_coords must lie in [0, 1]^3")
        conf = float(self.confidence)
        if not 0.0 <= conf <= 1.0:
            raise ValidationError(f"confidence must lie in [0, 1], got {conf}")
        object.__setattr__(self, "part_class", cls)
        object.__setattr__(self, "point_indices", idx)
        object.__setattr__(self, "npcs_coords", coords)
        object.__setattr__(self, "confidence", conf)

    def __len__(self) -> int:
        return self.point_indices.size


@dataclass(frozen=True)
class JointSpec:
    joint_type: JointType
    axis_npcs: np.ndarray
    pivot_npcs: Optional[np.ndarray] = None

    def __post_init__(self):
        jt = JointType(self.joint_type)
        axis = _frozen(self.axis_npcs)
        if axis.shape != (3,) or abs(np.linalg.norm(axis) - 1.0) > ORTHO_TOL:
            raise ValidationError("axis_npcs must be a unit 3-vector")
        pivot = self.pivot_npcs
        if jt is JointType.REVOLUTE:
            if pivot is None:
                raise ValidationError("revolute joints need a pivot")
            pivot = _frozen(pivot)
            if pivot.shape != (3,) or pivot.min() < 0 or pivot.max() > 1:
                raise ValidationError("pivot_npcs must lie in [0, 1]^3")
        else:
            pivot = None
        object.__setattr__(self, "joint_type", jt)
        object.__setattr__(self, "axis_npcs", axis)
        object.__setattr__(self, "pivot_npcs", pivot)

    def to_dict(self) -> dict:
        return {
            "joint_type": self.joint_type.value,
            "axis_npcs": self.axis_npcs.tolist(),
            "pivot_npcs": None if self.pivot_npcs is None else self.pivot_npcs.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "JointSpec":
        return cls(d["joint_type"], np.array(d["axis_npcs"]), d.get("pivot_npcs"))


# Canonical frames: +z is the outward face normal; revolute parts put the hinge
# on a box edge or centre line.
CLASS_JOINTS: dict[PartClass, JointSpec] = {
    PartClass.LINE_FIXED_HANDLE: JointSpec(JointType.FIXED, [0.0, 0.0, 1.0]),
    PartClass.ROUND_FIXED_HANDLE: JointSpec(JointType.FIXED, [0.0, 0.0, 1.0]),
    PartClass.HINGE_HANDLE: JointSpec(JointType.REVOLUTE, [1.0, 0.0, 0.0], [0.5, 0.5, 0.0]),
    PartClass.HINGE_LID: JointSpec(JointType.REVOLUTE, [1.0, 0.0, 0.0], [0.5, 1.0, 0.5]),
    PartClass.SLIDER_LID: JointSpec(JointType.PRISMATIC, [1.0, 0.0, 0.0]),
    PartClass.SLIDER_BUTTON: JointSpec(JointType.PRISMATIC, [0.0, 0.0, 1.0]),
    PartClass.SLIDER_DRAWER: JointSpec(JointType.PRISMATIC, [0.0, 0.0, 1.0]),
    PartClass.HINGE_DOOR: JointSpec(JointType.REVOLUTE, [0.0, 1.0, 0.0], [0.0, 0.5, 0.5]),
    PartClass.HINGE_KNOB: JointSpec(JointType.REVOLUTE, [0.0, 0.0, 1.0], [0.5, 0.5, 0.5]),
}


@dataclass(frozen=True)
class GroundTruthPart:
    part_class: PartClass
    pose: PartPose
    joint: JointSpec

    def __post_init__(self):
        cls = PartClass(self.part_class)
        if cls is PartClass.BACKGROUND:
            raise ValidationError("background is not an instance class")
        object.__setattr__(self, "part_class", cls)


@dataclass(frozen=True)
class SceneGroundTruth:
    """Per-point labels and per-instance annotations.

    ``instance_ids[i]`` indexes ``parts`` and is -1 for background points.
    """

    labels: np.ndarray
    instance_ids: np.ndarray
    npcs: np.ndarray
    parts: tuple[GroundTruthPart, ...] = field(default_factory=tuple)

    def __post_init__(self):
        labels = _frozen(self.labels, dtype=np.int64)
        inst = _frozen(self.instance_ids, dtype=np.int64)
        npcs = _frozen(self.npcs)
        parts = tuple(self.parts)
        n = labels.shape[0]
        if labels.shape != (n,) or inst.shape != (n,) or npcs.shape != (n, 3):
            raise ValidationError("ground-truth arrays have inconsistent shapes")
        if labels.min(initial=0) < 0 or labels.max(initial=0) >= N_CLASSES:
            raise ValidationError("class labels out of range")
        _check_finite("gt npcs", npcs)
        bg = labels == PartClass.BACKGROUND
        if np.any(inst[bg] != -1):
            raise ValidationError("background points must have instance id -1")
        fg_inst = inst[~bg]
        if np.any(fg_inst < 0) or np.any(fg_inst >= len(parts)):
            raise ValidationError("every foreground point needs a valid instance id")
        part_classes = np.array([int(p.part_class) for p in parts], dtype=np.int64)
        if fg_inst.size and np.any(part_classes[fg_inst] != labels[~bg]):
            raise ValidationError("point labels disagree with their instance class")
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "instance_ids", inst)
        object.__setattr__(self, "npcs", npcs)
        object.__setattr__(self, "parts", parts)

    def __len__(self) -> int:
        return self.labels.shape[0]

    def instance_mask(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.instance_ids == k)

    def instance_centroids(self, points: np.ndarray) -> np.ndarray:
        """Mean observed position of each instance's points, shape (K, 3)."""
        out = np.zeros((len(self.parts), 3))
        for k in range(len(self.parts)):
            idx = self.instance_mask(k)
            if idx.size:
                out[k] = points[idx].mean(axis=0)
        return out


def as_points(points: Sequence) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValidationError(f"expected an (N, 3) point array, got shape {pts.shape}")
    return pts
