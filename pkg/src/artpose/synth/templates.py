"""Desk-scale articulated object templates built from boxes and cylinders.

World frame: +z up, the desk is the plane z = 0 and object fronts face -y.
Each part's canonical box is the bounding box of its single primitive, with
+z the outward face normal.  Box edges are snapped to odd multiples of
``scale / 32`` so that every planar face sits on an NPCS bin centre.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from ..core import N_BINS, PartClass, ValidationError, axis_angle_matrix
from .raycast import Box, Cylinder

X = np.array([1.0, 0.0, 0.0])
Y = np.array([0.0, 1.0, 0.0])
Z = np.array([0.0, 0.0, 1.0])


def frame(x, z) -> np.ndarray:
    """Right-handed rotation whose columns are (x, z cross x, z)."""
    x = np.asarray(x, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return np.column_stack([x, np.cross(z, x), z])


def snap_dims(raw) -> tuple[np.ndarray, float]:
    """Snap edge lengths to odd multiples of scale/32, scale = longest edge * 32/31."""
    raw = np.asarray(raw, dtype=np.float64)
    scale = float(raw.max()) * N_BINS / (N_BINS - 1)
    odd = 2.0 * np.round((raw * N_BINS / scale - 1.0) / 2.0) + 1.0
    odd = np.clip(odd, 1.0, N_BINS - 1)
    return scale * odd / N_BINS, scale


@dataclass
class PartDef:
    part_class: PartClass
    rotation: np.ndarray
    center: np.ndarray
    size: np.ndarray
    scale: float
    shape: str = "box"

    def primitive(self):
        cls = Cylinder if self.shape == "cylinder" else Box
        return cls(self.rotation, self.center, self.size)

    def moved(self, R: np.ndarray, pivot: np.ndarray) -> "PartDef":
        """Copy rigidly rotated by ``R`` about world point ``pivot``."""
        return PartDef(
            self.part_class, R @ self.rotation, pivot + R @ (self.center - pivot),
            self.size, self.scale, self.shape,
        )

    def local_to_world(self, offset) -> np.ndarray:
        return self.center + self.rotation @ np.asarray(offset, dtype=np.float64)


def make_part(part_class, rotation, center, raw_size, shape="box") -> PartDef:
    size, scale = snap_dims(raw_size)
    return PartDef(PartClass(part_class), rotation, np.asarray(center, dtype=np.float64), size, scale, shape)


@dataclass
class ObjectModel:
    background: list = field(default_factory=list)
    parts: list[PartDef] = field(default_factory=list)

    def primitives(self) -> tuple[list, list[int]]:
        """All primitives with their owner: part index, or -1 for background."""
        prims = list(self.background) + [p.primitive() for p in self.parts]
        owners = [-1] * len(self.background) + list(range(len(self.parts)))
        return prims, owners

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        corners = []
        for prim in self.primitives()[0]:
            half = 0.5 * np.asarray(prim.size)
            signs = np.array(np.meshgrid([-1, 1], [-1, 1], [-1, 1])).reshape(3, -1).T
            corners.append((signs * half) @ prim.rotation.T + prim.center)
        pts = np.vstack(corners)
        return pts.min(axis=0), pts.max(axis=0)


@dataclass(frozen=True)
class Template:
    name: str
    build: Callable[[np.random.Generator, Mapping[str, float]], ObjectModel]
    limits: Callable[[Mapping[str, float]], dict[str, tuple[float, float]]]
    elevation_deg: tuple[float, float]
    distance_m: tuple[float, float]


# ---------------------------------------------------------------------------


def _drawer_keys(articulation: Mapping[str, float]) -> dict[str, tuple[float, float]]:
    n = len([k for k in articulation if k.startswith("drawer_")])
    n = min(max(n, 1), 3)
    return {f"drawer_{i}": (0.0, 0.2) for i in range(n)}


def _cabinet(rng, art) -> ObjectModel:
    n = len(_drawer_keys(art))
    W = rng.uniform(0.40, 0.55)
    D = rng.uniform(0.35, 0.45)
    slot = rng.uniform(0.12, 0.16)
    H = n * slot + 0.05
    model = ObjectModel(background=[Box(np.eye(3), np.array([0.0, 0.0, H / 2]), np.array([W, D, H]))])
    R = frame(X, -Y)
    for i in range(n):
        drawer = make_part(PartClass.SLIDER_DRAWER, R, np.zeros(3), [W - 0.04, slot - 0.02, D - 0.04])
        front_y = -D / 2 - 0.012 - art[f"drawer_{i}"]
        drawer.center = np.array([0.0, front_y + drawer.size[2] / 2, 0.025 + slot * (i + 0.5)])
        handle = make_part(PartClass.LINE_FIXED_HANDLE, R, np.zeros(3), [rng.uniform(0.10, 0.13), 0.03, 0.036])
        handle.center = drawer.local_to_world([0.0, 0.0, drawer.size[2] / 2 + handle.size[2] / 2])
        model.parts += [drawer, handle]
    return model


def _lid_box(rng, art) -> ObjectModel:
    lid = make_part(PartClass.HINGE_LID, frame(X, Z), np.zeros(3),
                    [rng.uniform(0.30, 0.40), rng.uniform(0.22, 0.30), 0.015])
    Wl, Dl, tl = lid.size
    H = rng.uniform(0.12, 0.20)
    body = Box(np.eye(3), np.array([0.0, 0.0, H / 2]), np.array([Wl, Dl, H]))
    lid.center = np.array([0.0, 0.0, H + tl / 2])
    knob = make_part(PartClass.ROUND_FIXED_HANDLE, lid.rotation, np.zeros(3), [0.032, 0.032, 0.025], "cylinder")
    knob.center = lid.local_to_world([0.0, -Dl / 2 + 0.045, tl / 2 + knob.size[2] / 2])
    pivot = np.array([0.0, Dl / 2, H + tl / 2])
    Ropen = axis_angle_matrix(X, -art["lid"])
    return ObjectModel(background=[body], parts=[lid.moved(Ropen, pivot), knob.moved(Ropen, pivot)])


def _door(rng, art) -> ObjectModel:
    hinge_left = bool(rng.integers(2))
    x_axis = X if hinge_left else -X
    door = make_part(PartClass.HINGE_DOOR, frame(x_axis, -Y), np.zeros(3),
                     [rng.uniform(0.35, 0.50), rng.uniform(0.45, 0.65), 0.018])
    Wd, Hd, td = door.size
    D = rng.uniform(0.30, 0.40)
    body = Box(np.eye(3), np.array([0.0, 0.0, Hd / 2]), np.array([Wd, D, Hd]))
    door.center = np.array([0.0, -D / 2 - td / 2, Hd / 2])
    handle = make_part(PartClass.LINE_FIXED_HANDLE, frame(Z, -Y), np.zeros(3), [0.13, 0.03, 0.036])
    handle.center = door.local_to_world([Wd / 2 - 0.05, 0.0, td / 2 + handle.size[2] / 2])
    pivot = door.local_to_world([-Wd / 2, 0.0, 0.0])
    Ropen = axis_angle_matrix(door.rotation[:, 1], -art["door"])
    return ObjectModel(background=[body], parts=[door.moved(Ropen, pivot), handle.moved(Ropen, pivot)])


def _remote(rng, art) -> ObjectModel:
    L = rng.uniform(0.20, 0.26)
    Wb = rng.uniform(0.07, 0.09)
    Hb = rng.uniform(0.02, 0.03)
    model = ObjectModel(background=[Box(np.eye(3), np.array([0.0, 0.0, Hb / 2]), np.array([L, Wb, Hb]))])
    d = rng.uniform(0.022, 0.028)
    for j in range(3):
        b = make_part(PartClass.SLIDER_BUTTON, np.eye(3), np.zeros(3), [d, d, 0.008], "cylinder")
        b.center = np.array([-L / 2 + 0.035 + 0.05 * j, 0.0, Hb + b.size[2] / 2])
        model.parts.append(b)
    cover = make_part(PartClass.SLIDER_LID, np.eye(3), np.zeros(3), [0.06, Wb - 0.012, 0.005])
    cover.center = np.array([L / 2 - 0.04 + art["cover"], 0.0, Hb + cover.size[2] / 2])
    model.parts.append(cover)
    return model


def _bucket(rng, art) -> ObjectModel:
    r = rng.uniform(0.11, 0.14)
    h = rng.uniform(0.20, 0.27)
    body = Cylinder(np.eye(3), np.array([0.0, 0.0, h / 2]), np.array([2 * r, 2 * r, h]))
    handle = make_part(PartClass.HINGE_HANDLE, np.eye(3), np.zeros(3), [2 * r + 0.02, 0.012, 0.10])
    pivot = np.array([0.0, 0.0, h])
    handle.center = pivot + np.array([0.0, 0.0, handle.size[2] / 2])
    return ObjectModel(background=[body], parts=[handle.moved(axis_angle_matrix(X, art["handle"]), pivot)])


def _pot(rng, art) -> ObjectModel:
    r = rng.uniform(0.09, 0.12)
    h = rng.uniform(0.10, 0.14)
    body = Cylinder(np.eye(3), np.array([0.0, 0.0, h / 2]), np.array([2 * r, 2 * r, h]))
    lid = Cylinder(np.eye(3), np.array([0.0, 0.0, h + 0.006]), np.array([2 * r + 0.01, 2 * r + 0.01, 0.012]))
    knob = make_part(PartClass.HINGE_KNOB, axis_angle_matrix(Z, art["knob"]), np.zeros(3),
                     [0.036, 0.036, 0.03], "cylinder")
    knob.center = np.array([0.0, 0.0, h + 0.012 + knob.size[2] / 2])
    model = ObjectModel(background=[body, lid], parts=[knob])
    for side in (1.0, -1.0):
        handle = make_part(PartClass.LINE_FIXED_HANDLE, frame(side * Y, side * X), np.zeros(3), [0.09, 0.03, 0.036])
        handle.center = np.array([side * (r + handle.size[2] / 2), 0.0, 0.75 * h])
        model.parts.append(handle)
    return model


TEMPLATES: dict[str, Template] = {
    t.name: t
    for t in (
        Template("cabinet_with_drawers", _cabinet, _drawer_keys, (15.0, 40.0), (1.0, 1.4)),
        Template("box_with_hinge_lid", _lid_box, lambda a: {"lid": (0.0, 1.75)}, (25.0, 50.0), (0.8, 1.1)),
        Template("door_panel", _door, lambda a: {"door": (0.0, 1.6)}, (10.0, 35.0), (1.2, 1.6)),
        Template("remote_with_buttons", _remote, lambda a: {"cover": (0.0, 0.03)}, (45.0, 70.0), (0.45, 0.6)),
        Template("bucket_with_hinge_handle", _bucket, lambda a: {"handle": (-1.0, 1.0)}, (20.0, 45.0), (0.9, 1.2)),
        Template("pot_with_knob", _pot, lambda a: {"knob": (-np.pi, np.pi)}, (30.0, 55.0), (0.7, 0.9)),
    )
}


def check_articulation(template: str, articulation: Mapping[str, float]) -> None:
    if template not in TEMPLATES:
        raise ValidationError(f"unknown template {template!r}; expected one of {sorted(TEMPLATES)}")
    limits = TEMPLATES[template].limits(articulation)
    if set(articulation) != set(limits):
        raise ValidationError(
            f"{template}: articulation keys {sorted(articulation)} do not match {sorted(limits)}"
        )
    for key, (lo, hi) in limits.items():
        v = float(articulation[key])
        if not lo <= v <= hi:
            raise ValidationError(f"{template}: articulation {key}={v} outside [{lo}, {hi}]")


def build_object(template: str, rng: np.random.Generator, articulation: Mapping[str, float]) -> ObjectModel:
    check_articulation(template, articulation)
    return TEMPLATES[template].build(rng, articulation)
