"""Per-scene glue: predictions -> instances -> poses -> evaluation pairs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .cluster import ClusterParams, extract_instances
from .core import CLASS_JOINTS, JointType, PartClass, PartPose, PerPointPrediction, PointCloud, SceneGroundTruth
from .metrics import GroundTruthInstance, PredictedPart, ScenePair
from .posefit import CameraJoint, PoseFitError, RansacParams, fit_instance_pose, query_joint


@dataclass(frozen=True)
class FittedInstance:
    part_class: PartClass
    point_indices: np.ndarray
    confidence: float
    pose: Optional[PartPose]
    joint: Optional[CameraJoint]
    failure: Optional[str] = None

    def to_dict(self) -> dict:
        return {
            "class": self.part_class.label,
            "class_id": int(self.part_class),
            "confidence": self.confidence,
            "n_points": int(self.point_indices.size),
            "point_indices": self.point_indices.tolist(),
            "pose": None if self.pose is None else self.pose.to_dict(),
            "joint": None if self.joint is None else self.joint.to_dict(),
            "failure": self.failure,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FittedInstance":
        joint = None
        if d.get("joint") is not None:
            j = d["joint"]
            pivot = None if j["pivot"] is None else np.array(j["pivot"], dtype=np.float64)
            joint = CameraJoint(JointType(j["joint_type"]), np.array(j["axis"], dtype=np.float64), pivot)
        return cls(
            part_class=PartClass(d["class_id"]),
            point_indices=np.array(d["point_indices"], dtype=np.int64),
            confidence=float(d["confidence"]),
            pose=None if d.get("pose") is None else PartPose.from_dict(d["pose"]),
            joint=joint,
            failure=d.get("failure"),
        )


def fit_scene(
    cloud: PointCloud,
    pred: PerPointPrediction,
    cluster: ClusterParams = ClusterParams(),
    ransac: RansacParams = RansacParams(),
) -> list[FittedInstance]:
    """Cluster instances and fit each one; failures are kept with their reason code."""
    out = []
    for i, inst in enumerate(extract_instances(cloud, pred, cluster)):
        try:
            pose = fit_instance_pose(inst, cloud, ransac, instance_index=i)
        except PoseFitError as exc:
            out.append(FittedInstance(inst.part_class, inst.point_indices, inst.confidence, None, None, exc.reason))
            continue
        joint = query_joint(pose, CLASS_JOINTS[inst.part_class])
        out.append(FittedInstance(inst.part_class, inst.point_indices, inst.confidence, pose, joint))
    return out


def ground_truth_instances(gt: SceneGroundTruth) -> list[GroundTruthInstance]:
    return [
        GroundTruthInstance(p.part_class, gt.instance_mask(k), p.pose, p.joint)
        for k, p in enumerate(gt.parts)
    ]


def scene_pair(fitted: Sequence[FittedInstance], gt: SceneGroundTruth) -> ScenePair:
    preds = [PredictedPart(f.part_class, f.point_indices, f.confidence, f.pose) for f in fitted]
    return ScenePair(preds, ground_truth_instances(gt))
