"""Instance-segmentation AP and pose/size error metrics, evaluated strictly.

Rotation errors take no symmetry tolerance.  Translation-type errors are in
meters throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .boxiou import oriented_box_iou
from .core import JointSpec, PartClass, PartPose, ValidationError, rotation_geodesic_angle

AP_THRESHOLDS = tuple(round(0.5 + 0.05 * i, 2) for i in range(10))
REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class PredictedPart:
    part_class: PartClass
    point_indices: np.ndarray
    confidence: float
    pose: Optional[PartPose] = None


@dataclass(frozen=True)
class GroundTruthInstance:
    part_class: PartClass
    point_indices: np.ndarray
    pose: PartPose
    joint: JointSpec


@dataclass(frozen=True)
class ScenePair:
    """Predictions and ground truth of one scene."""

    predictions: Sequence[PredictedPart]
    ground_truth: Sequence[GroundTruthInstance]


@dataclass(frozen=True)
class MatchResult:
    pairs: list[tuple[int, int, float]]
    unmatched_predictions: list[int]
    unmatched_ground_truth: list[int]


@dataclass(frozen=True)
class PoseErrors:
    R_e: float
    T_e: float
    S_e: float
    d_e: float
    iou3d: float


def mask_iou(a, b) -> float:
    a = np.unique(np.asarray(a, dtype=np.int64))
    b = np.unique(np.asarray(b, dtype=np.int64))
    if a.size == 0 and b.size == 0:
        raise ValidationError("mask_iou of two empty sets is undefined")
    inter = np.intersect1d(a, b, assume_unique=True).size
    return inter / (a.size + b.size - inter)


def _confidence_order(preds: Sequence[PredictedPart]) -> list[int]:
    return sorted(range(len(preds)), key=lambda i: (-preds[i].confidence, i))


def match_scene(
    preds: Sequence[PredictedPart], gts: Sequence[GroundTruthInstance], iou_threshold: float
) -> MatchResult:
    """Greedy confidence-ordered, class-aware matching within one scene."""
    taken = [False] * len(gts)
    pairs = []
    unmatched = []
    for pi in _confidence_order(preds):
        p = preds[pi]
        best, best_iou = -1, -1.0
        for gi, g in enumerate(gts):
            if taken[gi] or g.part_class != p.part_class:
                continue
            iou = mask_iou(p.point_indices, g.point_indices)
            if iou >= iou_threshold and iou > best_iou:
                best, best_iou = gi, iou
        if best < 0:
            unmatched.append(pi)
        else:
            taken[best] = True
            pairs.append((pi, best, best_iou))
    return MatchResult(pairs, sorted(unmatched), [gi for gi, t in enumerate(taken) if not t])


def average_precision(tp: Sequence[bool], n_gt: int) -> float:
    """All-points interpolated AP (percent) of a confidence-sorted TP/FP sequence."""
    if n_gt <= 0:
        raise ValidationError("average precision needs at least one ground-truth instance")
    tp = np.asarray(tp, dtype=bool)
    if tp.size == 0:
        return 0.0
    ctp = np.cumsum(tp)
    precision = ctp / np.arange(1, tp.size + 1)
    recall = ctp / n_gt
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_recall = np.concatenate([[0.0], recall[:-1]])
    return float(100.0 * np.sum((recall - prev_recall) * envelope))


@dataclass(frozen=True)
class SegmentationAP:
    per_class: dict[str, float]
    mean: float


def segmentation_ap(scenes: Sequence[ScenePair], iou_threshold: float) -> SegmentationAP:
    """Per-class AP over the dataset and the mean over classes present in ground truth."""
    per_class = {}
    for cls in PartClass.parts():
        n_gt = sum(1 for s in scenes for g in s.ground_truth if g.part_class == cls)
        if n_gt == 0:
            continue
        events = []
        for si, scene in enumerate(scenes):
            preds = [p for p in scene.predictions if p.part_class == cls]
            gts = [g for g in scene.ground_truth if g.part_class == cls]
            matched = {pi for pi, _, _ in match_scene(preds, gts, iou_threshold).pairs}
            events.extend((-p.confidence, si, pi, pi in matched) for pi, p in enumerate(preds))
        events.sort()
        per_class[cls.label] = average_precision([e[3] for e in events], n_gt)
    mean = math.fsum(per_class.values()) / len(per_class) if per_class else 0.0
    return SegmentationAP(per_class, mean)


def pose_errors(pred: PartPose, gt: PartPose, joint: JointSpec) -> PoseErrors:
    dt = pred.translation - gt.translation
    axis_cam = gt.rotation @ joint.axis_npcs
    iou = oriented_box_iou(
        (pred.rotation, pred.translation, pred.size), (gt.rotation, gt.translation, gt.size)
    )
    return PoseErrors(
        R_e=rotation_geodesic_angle(pred.rotation, gt.rotation),
        T_e=float(np.linalg.norm(dt)),
        S_e=float(np.linalg.norm(pred.size - gt.size)),
        d_e=float(abs(dt @ axis_cam)),
        iou3d=iou,
    )


def accuracy_at(errors: Sequence[PoseErrors], theta_deg: float, d_cm: float, n_unmatched_gt: int = 0) -> float:
    """Percent of ground-truth parts with ``R_e < theta`` and ``T_e < d``; misses count as failures."""
    total = len(errors) + n_unmatched_gt
    if total == 0:
        raise ValidationError("accuracy needs at least one ground-truth instance")
    d_m = d_cm / 100.0
    hits = sum(1 for e in errors if e.R_e < theta_deg and e.T_e < d_m)
    return 100.0 * hits / total


@dataclass
class SceneEvaluation:
    errors: list[PoseErrors] = field(default_factory=list)
    n_gt: int = 0
    n_pred: int = 0


def evaluate_scene_poses(scene: ScenePair, iou_threshold: float = 0.5) -> SceneEvaluation:
    """Pose errors of matched instances; a match whose prediction lacks a pose is a miss."""
    match = match_scene(scene.predictions, scene.ground_truth, iou_threshold)
    errors = []
    for pi, gi, _ in sorted(match.pairs, key=lambda p: p[1]):
        pred = scene.predictions[pi]
        if pred.pose is None:
            continue
        gt = scene.ground_truth[gi]
        errors.append(pose_errors(pred.pose, gt.pose, gt.joint))
    return SceneEvaluation(errors, len(scene.ground_truth), len(scene.predictions))


def _mean(values: list[float]) -> Optional[float]:
    return math.fsum(values) / len(values) if values else None


def aggregate_report(scenes: Sequence[ScenePair]) -> dict:
    """Dataset-level report with a fixed key order."""
    if not scenes:
        raise ValidationError("cannot aggregate zero scenes")
    evals = [evaluate_scene_poses(s) for s in scenes]
    errors = [e for ev in evals for e in ev.errors]
    n_gt = sum(ev.n_gt for ev in evals)
    n_missed = n_gt - len(errors)
    ap50 = segmentation_ap(scenes, 0.5)
    ap_sweep = [segmentation_ap(scenes, t) for t in AP_THRESHOLDS]
    ap_per_class = {
        cls: math.fsum(ap.per_class[cls] for ap in ap_sweep) / len(ap_sweep) for cls in ap50.per_class
    }
    acc = (lambda th, d: accuracy_at(errors, th, d, n_missed)) if n_gt else (lambda th, d: None)
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "n_scenes": len(scenes),
        "n_gt_instances": n_gt,
        "n_pred_instances": sum(ev.n_pred for ev in evals),
        "n_matched": len(errors),
        "pose": {
            "R_e_deg": _mean([e.R_e for e in errors]),
            "T_e_m": _mean([e.T_e for e in errors]),
            "S_e_m": _mean([e.S_e for e in errors]),
            "d_e_m": _mean([e.d_e for e in errors]),
            "mIoU": _mean([e.iou3d for e in errors]),
            "A_5": acc(5.0, 5.0),
            "A_10": acc(10.0, 10.0),
        },
        "segmentation": {
            "AP50": ap50.per_class,
            "AP": ap_per_class,
            "Avg.AP50": ap50.mean if ap50.per_class else None,
            "Avg.AP": (math.fsum(ap.mean for ap in ap_sweep) / len(ap_sweep)) if ap50.per_class else None,
        },
    }


POSE_COLUMNS = (
    ("R_e (deg)", "R_e_deg"),
    ("T_e (m)", "T_e_m"),
    ("S_e (m)", "S_e_m"),
    ("mIoU", "mIoU"),
    ("A_5 (%)", "A_5"),
    ("A_10 (%)", "A_10"),
)


def _fmt(v: Optional[float], digits: int = 4) -> str:
    return "n/a" if v is None else f"{v:.{digits}f}"


def format_report(report: dict) -> str:
    """Aligned plain-text rendering: pose table, then per-class AP table."""
    pose = report["pose"]
    header = [c[0] for c in POSE_COLUMNS]
    row = [_fmt(pose[c[1]]) for c in POSE_COLUMNS]
    widths = [max(len(h), len(r)) for h, r in zip(header, row)]
    lines = [
        f"scenes: {report['n_scenes']}  gt instances: {report['n_gt_instances']}  "
        f"predicted: {report['n_pred_instances']}  matched: {report['n_matched']}",
        "",
        "  ".join(h.rjust(w) for h, w in zip(header, widths)),
        "  ".join(r.rjust(w) for r, w in zip(row, widths)),
        f"d_e (m): {_fmt(pose['d_e_m'])}",
        "",
    ]
    seg = report["segmentation"]
    names = list(seg["AP50"])
    name_w = max([len("class")] + [len(n) for n in names] + [len("average")])
    lines.append(f"{'class'.ljust(name_w)}  {'AP50':>7}  {'AP':>7}")
    for n in names:
        lines.append(f"{n.ljust(name_w)}  {seg['AP50'][n]:7.2f}  {seg['AP'][n]:7.2f}")
    lines.append(f"{'average'.ljust(name_w)}  {_fmt(seg['Avg.AP50'], 2):>7}  {_fmt(seg['Avg.AP'], 2):>7}")
    return "\n".join(lines) + "\n"
