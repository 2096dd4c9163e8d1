"""Procedural scenes and emulated network outputs."""

from .predictor import CorruptionParams, corrupt, oracle_prediction
from .scene import CameraPose, NoiseParams, SceneSpec, generate_scene, sample_scene_spec, scene_geometry
from .templates import TEMPLATES

__all__ = [
    "CameraPose",
    "CorruptionParams",
    "NoiseParams",
    "SceneSpec",
    "TEMPLATES",
    "corrupt",
    "generate_scene",
    "oracle_prediction",
    "sample_scene_spec",
    "scene_geometry",
]
