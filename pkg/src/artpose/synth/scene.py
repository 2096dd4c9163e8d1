"""Scene specification and the ray-cast point-cloud generator.

Points are returned in an OpenCV-style camera frame (x right, y down,
z forward).  Ground-truth NPCS comes from the noise-free hit points;
the observed points carry the sensor noise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional

import numpy as np

from ..core import (
    CLASS_JOINTS,
    GroundTruthPart,
    PartClass,
    PartPose,
    PointCloud,
    SceneGroundTruth,
    ValidationError,
)
from ..npcs import normalize_to_npcs
from .raycast import Desk, cast
from .templates import TEMPLATES, ObjectModel, build_object, check_articulation

GRID = 160
DEFAULT_BUDGET = 24576
MIN_BUDGET = 512
DEFAULT_MIN_PART_POINTS = 50
DESK_HALF_EXTENT = 2.0
FRAMING_MARGIN = 1.15


@dataclass(frozen=True)
class CameraPose:
    """Look-at camera on a sphere around the object centre."""

    azimuth_deg: float
    elevation_deg: float
    distance_m: float

    def __post_init__(self):
        if not (math.isfinite(self.distance_m) and self.distance_m > 0):
            raise ValidationError("camera distance must be positive")
        if not -89.0 <= self.elevation_deg <= 89.0:
            raise ValidationError("camera elevation must lie in [-89, 89] degrees")

    def world_to_camera(self, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """(R, c) with ``p_cam = R @ (p_world - c)``."""
        az, el = math.radians(self.azimuth_deg), math.radians(self.elevation_deg)
        back = np.array([math.cos(el) * math.sin(az), -math.cos(el) * math.cos(az), math.sin(el)])
        c = target + self.distance_m * back
        z = -back
        x = np.cross(z, [0.0, 0.0, 1.0])
        x /= np.linalg.norm(x)
        y = np.cross(z, x)
        return np.stack([x, y, z]), c


@dataclass(frozen=True)
class SceneSpec:
    template: str
    articulation: Mapping[str, float]
    camera: CameraPose
    n_points: int = DEFAULT_BUDGET
    depth_sigma: float = 0.0
    dropout: float = 0.0
    quantization: float = 0.0
    rng_seed: int = 0
    min_part_points: int = DEFAULT_MIN_PART_POINTS

    def __post_init__(self):
        art = {str(k): float(v) for k, v in dict(self.articulation).items()}
        check_articulation(self.template, art)
        object.__setattr__(self, "articulation", dict(sorted(art.items())))
        if not isinstance(self.camera, CameraPose):
            object.__setattr__(self, "camera", CameraPose(*self.camera))
        if int(self.n_points) < MIN_BUDGET:
            raise ValidationError(f"point budget must be >= {MIN_BUDGET}, got {self.n_points}")
        for name in ("depth_sigma", "dropout", "quantization"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be finite and non-negative, got {v}")
        if self.dropout >= 1.0:
            raise ValidationError("dropout must be < 1")
        if int(self.rng_seed) < 0:
            raise ValidationError("rng_seed must be non-negative")
        if int(self.min_part_points) < 1:
            raise ValidationError("min_part_points must be >= 1")

    def to_dict(self) -> dict:
        return {
            "template": self.template,
            "articulation": dict(self.articulation),
            "camera": {
                "azimuth_deg": self.camera.azimuth_deg,
                "elevation_deg": self.camera.elevation_deg,
                "distance_m": self.camera.distance_m,
            },
            "n_points": int(self.n_points),
            "depth_sigma": float(self.depth_sigma),
            "dropout": float(self.dropout),
            "quantization": float(self.quantization),
            "rng_seed": int(self.rng_seed),
            "min_part_points": int(self.min_part_points),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "SceneSpec":
        d = dict(d)
        d["camera"] = CameraPose(**d["camera"])
        return cls(**d)


@dataclass(frozen=True)
class NoiseParams:
    depth_sigma: float = 0.0
    dropout: float = 0.0
    quantization: float = 0.0


def sample_scene_spec(
    seed: int,
    template: Optional[str] = None,
    n_points: int = DEFAULT_BUDGET,
    noise: NoiseParams = NoiseParams(),
    min_part_points: int = DEFAULT_MIN_PART_POINTS,
) -> SceneSpec:
    """Random template, articulation state and viewpoint drawn from ``seed``."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5CE0E]))
    names = sorted(TEMPLATES)
    name = names[int(rng.integers(len(names)))] if template is None else template
    if name not in TEMPLATES:
        raise ValidationError(f"unknown template {name!r}")
    tpl = TEMPLATES[name]
    if name == "cabinet_with_drawers":
        seed_keys = {f"drawer_{i}": 0.0 for i in range(int(rng.integers(1, 4)))}
    else:
        seed_keys = {}
    limits = tpl.limits(seed_keys)
    articulation = {k: float(rng.uniform(lo, hi)) for k, (lo, hi) in sorted(limits.items())}
    camera = CameraPose(
        azimuth_deg=float(rng.uniform(-50.0, 50.0)),
        elevation_deg=float(rng.uniform(*tpl.elevation_deg)),
        distance_m=float(rng.uniform(*tpl.distance_m)),
    )
    return SceneSpec(
        template=name,
        articulation=articulation,
        camera=camera,
        n_points=n_points,
        depth_sigma=noise.depth_sigma,
        dropout=noise.dropout,
        quantization=noise.quantization,
        rng_seed=int(seed),
        min_part_points=min_part_points,
    )


@dataclass
class SceneGeometry:
    """Everything needed to reproduce a scene's rays, in world coordinates."""

    model: ObjectModel
    primitives: list
    owners: list[int]
    rotation: np.ndarray  # world -> camera
    center: np.ndarray  # camera centre in world
    ray_dirs_cam: np.ndarray = field(repr=False)

    def to_world(self, pts_cam: np.ndarray) -> np.ndarray:
        return pts_cam @ self.rotation + self.center


def _ray_directions(budget: int, tan_half: float) -> np.ndarray:
    ss = max(1, math.ceil(math.sqrt(2.0 * budget / (GRID * GRID))))
    n = GRID * ss
    u = (np.arange(n) + 0.5) / n * 2.0 - 1.0
    xs, ys = np.meshgrid(u * tan_half, u * tan_half)
    d = np.stack([xs.ravel(), ys.ravel(), np.ones(n * n)], axis=1)
    return d / np.linalg.norm(d, axis=1, keepdims=True)


def scene_geometry(spec: SceneSpec) -> SceneGeometry:
    seeds = np.random.SeedSequence(int(spec.rng_seed)).spawn(2)
    model = build_object(spec.template, np.random.default_rng(seeds[0]), spec.articulation)
    lo, hi = model.bounds()
    target = 0.5 * (lo + hi)
    radius = 0.5 * float(np.linalg.norm(hi - lo))
    R, c = spec.camera.world_to_camera(target)
    if radius * FRAMING_MARGIN >= spec.camera.distance_m:
        raise ValidationError("camera is inside the object's bounding sphere")
    tan_half = FRAMING_MARGIN * radius / math.sqrt(spec.camera.distance_m ** 2 - radius ** 2)
    prims, owners = model.primitives()
    prims.append(Desk(DESK_HALF_EXTENT))
    owners.append(-1)
    return SceneGeometry(model, prims, owners, R, c, _ray_directions(int(spec.n_points), tan_half))


def generate_scene(spec: SceneSpec) -> tuple[PointCloud, SceneGroundTruth]:
    geo = scene_geometry(spec)
    noise_rng = np.random.default_rng(np.random.SeedSequence(int(spec.rng_seed)).spawn(2)[1])

    dirs_cam = geo.ray_dirs_cam
    t, k = cast(geo.center, dirs_cam @ geo.rotation, geo.primitives)
    hit = np.isfinite(t)
    t, k, dirs_cam = t[hit], k[hit], dirs_cam[hit]
    clean = t[:, None] * dirs_cam

    # Sensor model: per-ray depth noise, then quantization, then dropout.
    z = clean[:, 2]
    z_obs = z + spec.depth_sigma * noise_rng.standard_normal(z.size)
    if spec.quantization > 0:
        z_obs = np.round(z_obs / spec.quantization) * spec.quantization
    keep = noise_rng.random(z.size) >= spec.dropout
    z_obs = np.maximum(z_obs, 1e-6)
    obs = clean * (z_obs / z)[:, None]
    keep_idx = np.flatnonzero(keep)
    if keep_idx.size > spec.n_points:
        keep_idx = np.sort(noise_rng.choice(keep_idx, size=int(spec.n_points), replace=False))
    if keep_idx.size == 0:
        raise ValidationError("scene produced no points")
    clean, obs, k = clean[keep_idx], obs[keep_idx], k[keep_idx]

    owner = np.asarray(geo.owners, dtype=np.int64)[k]
    counts = np.bincount(owner[owner >= 0], minlength=len(geo.model.parts))
    visible = [i for i, c in enumerate(counts) if c >= spec.min_part_points]
    remap = np.full(len(geo.model.parts) + 1, -1, dtype=np.int64)
    remap[visible] = np.arange(len(visible))
    inst = remap[owner]  # owner -1 picks the trailing -1

    labels = np.zeros(obs.shape[0], dtype=np.int64)
    npcs = np.zeros_like(obs)
    parts = []
    for new_id, part_idx in enumerate(visible):
        part = geo.model.parts[part_idx]
        pose = PartPose(
            rotation=geo.rotation @ part.rotation,
            translation=geo.rotation @ (part.center - geo.center),
            scale=part.scale,
            size=part.size,
        )
        mask = inst == new_id
        labels[mask] = int(part.part_class)
        # Hits lie on the box surface; clip float round-off just outside it.
        npcs[mask] = np.clip(normalize_to_npcs(clean[mask], pose), 0.0, 1.0)
        parts.append(GroundTruthPart(part.part_class, pose, CLASS_JOINTS[PartClass(part.part_class)]))
    return PointCloud(obs), SceneGroundTruth(labels, inst, npcs, tuple(parts))
