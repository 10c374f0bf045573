"""Fractional prefix freezing over parameterized layers."""

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction

from ..errors import ConfigError, ConsistencyError
from .layers import BatchNorm2d


@dataclass(frozen=True)
class FreezePlan:
    layer_names: tuple
    frozen_count: int
    fraction: float
    head_count: int = 0
    warnings: tuple = field(default=())

    @property
    def frozen_layers(self):
        return self.layer_names[:self.frozen_count]

    def to_dict(self):
        return {"layer_names": list(self.layer_names), "frozen_count": self.frozen_count,
                "fraction": self.fraction, "head_count": self.head_count}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["layer_names"]), d["frozen_count"], d["fraction"], d.get("head_count", 0))


def frozen_count_for(n_layers, fraction, n_head):
    """``min(floor(fraction * n_layers), n_layers - n_head)``.

    The product is taken on the exact decimal value of ``fraction`` so 0.6
    of 10 layers is 6, not 5 after binary rounding.
    """
    k = math.floor(Fraction(str(fraction)) * n_layers)
    return min(k, n_layers - n_head)


def compute_freeze_plan(model, fraction=0.6):
    if not 0.0 <= fraction <= 1.0:
        raise ConfigError(f"freeze fraction must lie in [0, 1], got {fraction}")
    layers = model.parameterized_layers()
    names = tuple(layer.name for _, layer in layers)
    n_head = len(model.head_layer_names())
    k_raw = math.floor(Fraction(str(fraction)) * len(names))
    k = frozen_count_for(len(names), fraction, n_head)
    notes = ()
    if k < k_raw:
        msg = (f"freeze count clamped from {k_raw} to {k} so the {n_head} head layers stay "
               "trainable")
        warnings.warn(msg, stacklevel=2)
        notes = (msg,)
    return FreezePlan(names, k, fraction, n_head, notes)


def apply_freeze(model, plan):
    """Set ``requires_grad`` from the plan; frozen batchnorm layers stop updating stats."""
    names = tuple(layer.name for _, layer in model.parameterized_layers())
    if names != plan.layer_names:
        raise ConsistencyError(
            f"freeze plan covers {len(plan.layer_names)} layers but model has {len(names)} "
            "(or the order differs); recompute the plan")
    frozen = set(plan.frozen_layers)
    for _, layer in model.parameterized_layers():
        is_frozen = layer.name in frozen
        for p in layer.parameters():
            p.requires_grad = not is_frozen
            if is_frozen:
                p.grad = None
        if isinstance(layer, BatchNorm2d):
            layer.frozen = is_frozen
    model.freeze_plan = plan
    return model


def parameter_census(model):
    """(total, trainable) scalar parameter counts."""
    params = model.parameters()
    total = sum(p.size for p in params)
    trainable = sum(p.size for p in params if p.requires_grad)
    return total, trainable
