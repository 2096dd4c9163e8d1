"""Normalized part coordinate space: normalisation, 32-bin codes, symmetry sets."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Mapping, Optional

import numpy as np

from .core import (
    N_BINS,
    ORTHO_TOL,
    PartClass,
    PartPose,
    ValidationError,
    as_points,
    axis_angle_matrix,
    check_rotation,
)

BIN_WIDTH = 1.0 / N_BINS


class SymmetryKind(str, enum.Enum):
    NONE = "none"
    CONTINUOUS = "continuous_about_axis"
    MIRROR_180 = "mirror_180_about_axis"


@dataclass(frozen=True)
class SymmetryDescriptor:
    kind: SymmetryKind = SymmetryKind.NONE
    axis: tuple[float, float, float] = (0.0, 0.0, 1.0)
    k_discretization: int = 1

    def __post_init__(self):
        kind = SymmetryKind(self.kind)
        axis = tuple(float(v) for v in self.axis)
        if len(axis) != 3 or abs(np.linalg.norm(axis) - 1.0) > ORTHO_TOL:
            raise ValidationError("symmetry axis must be a unit 3-vector")
        k = int(self.k_discretization)
        if kind is SymmetryKind.MIRROR_180:
            k = 2
        if kind is not SymmetryKind.NONE and k < 2:
            raise ValidationError("k_discretization must be >= 2 for symmetric classes")
        if k < 1:
            raise ValidationError("k_discretization must be positive")
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "axis", axis)
        object.__setattr__(self, "k_discretization", k)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "axis": list(self.axis), "k": self.k_discretization}

    @classmethod
    def from_dict(cls, d: Mapping) -> "SymmetryDescriptor":
        return cls(d.get("kind", "none"), tuple(d.get("axis", (0.0, 0.0, 1.0))), d.get("k", 1))


DEFAULT_K = 12

SymmetryTable = Mapping[PartClass, SymmetryDescriptor]

DEFAULT_SYMMETRY: dict[PartClass, SymmetryDescriptor] = {
    c: SymmetryDescriptor() for c in PartClass.parts()
}
for _c in (PartClass.ROUND_FIXED_HANDLE, PartClass.SLIDER_BUTTON, PartClass.HINGE_KNOB):
    DEFAULT_SYMMETRY[_c] = SymmetryDescriptor(SymmetryKind.CONTINUOUS, (0.0, 0.0, 1.0), DEFAULT_K)


def symmetry_for(part_class: PartClass, table: Optional[SymmetryTable] = None) -> SymmetryDescriptor:
    table = DEFAULT_SYMMETRY if table is None else table
    return table.get(PartClass(part_class), SymmetryDescriptor())


def normalize_to_npcs(part_points, pose: PartPose) -> np.ndarray:
    """Map camera-frame points into the part's NPCS, ``R^T (p - t) / s + 0.5``.

    No clamping is applied: points outside the tight box land outside the
    unit cube, see :func:`outside_unit_cube`.
    """
    pts = as_points(part_points)
    if pts.shape[0] == 0:
        raise ValidationError("part_points must be non-empty")
    if pose.scale <= 0:
        raise ValidationError("scale must be positive")
    return (pts - pose.translation) @ pose.rotation / pose.scale + 0.5


def denormalize_from_npcs(coords, pose: PartPose) -> np.ndarray:
    """Inverse of :func:`normalize_to_npcs`."""
    n = as_points(coords)
    return (pose.scale * (n - 0.5)) @ pose.rotation.T + pose.translation


def outside_unit_cube(coords, tol: float = 0.0) -> np.ndarray:
    """Boolean mask of NPCS coordinates outside ``[0, 1]^3``."""
    n = np.asarray(coords, dtype=np.float64)
    return np.any((n < -tol) | (n > 1.0 + tol), axis=-1)


def bin_encode(coord):
    """Bin index of an NPCS coordinate: ``floor(clamp(x, 0, 1) * 32)``, 1.0 -> 31.

    Works elementwise on arrays; scalars give a Python int.
    """
    x = np.asarray(coord, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValidationError("bin_encode: non-finite coordinate")
    idx = np.floor(np.clip(x, 0.0, 1.0) * N_BINS).astype(np.int64)
    idx = np.minimum(idx, N_BINS - 1)
    if idx.ndim == 0:
        return int(idx)
    return idx


def bin_decode(index) -> np.ndarray:
    """Bin centres ``(index + 0.5) / 32``."""
    idx = np.asarray(index)
    if not np.issubdtype(idx.dtype, np.integer):
        if not np.all(idx == np.round(idx)):
            raise ValidationError("bin indices must be integers")
        idx = idx.astype(np.int64)
    if idx.size and (idx.min() < 0 or idx.max() > N_BINS - 1):
        raise ValidationError(f"bin index out of range [0, {N_BINS - 1}]")
    return (idx + 0.5) / N_BINS


def decode_distribution(npcs_bins) -> np.ndarray:
    """Decode (..., 3, 32) bin distributions via per-axis argmax (ties to the lower bin)."""
    return bin_decode(np.argmax(np.asarray(npcs_bins), axis=-1))


def candidate_rotations(desc: SymmetryDescriptor) -> list[np.ndarray]:
    """Canonical-frame rotations spanning the symmetry group, identity first."""
    if desc.kind is SymmetryKind.NONE:
        return [np.eye(3)]
    if desc.kind is SymmetryKind.MIRROR_180:
        return [np.eye(3), axis_angle_matrix(desc.axis, np.pi)]
    k = desc.k_discretization
    return [np.eye(3)] + [axis_angle_matrix(desc.axis, 2.0 * np.pi * j / k) for j in range(1, k)]


def symmetry_candidates(part_class: PartClass, R, table: Optional[SymmetryTable] = None) -> list[np.ndarray]:
    """Rotations equivalent to ``R`` under the class's symmetry, ``R`` itself first."""
    R = check_rotation(R)
    return [R @ S for S in candidate_rotations(symmetry_for(part_class, table))]
