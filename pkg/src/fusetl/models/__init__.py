"""Micro backbones, head surgery and layer freezing."""

from .freeze import FreezePlan, apply_freeze, compute_freeze_plan, frozen_count_for, parameter_census
from .graph import INPUT, ModelGraph, Node
from .layers import PARAMETERIZED, BatchNorm2d, Conv2d, Linear
from .zoo import ARCHITECTURES, DEFAULT_CONFIG, HeadSpec, attach_head, build_backbone, build_model, predict

__all__ = [
    "ARCHITECTURES", "DEFAULT_CONFIG", "INPUT", "PARAMETERIZED", "BatchNorm2d", "Conv2d",
    "FreezePlan", "HeadSpec", "Linear", "ModelGraph", "Node", "apply_freeze", "attach_head",
    "build_backbone", "build_model", "compute_freeze_plan", "frozen_count_for",
    "parameter_census", "predict",
]
