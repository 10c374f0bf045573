"""Topologically ordered layer graph with a classifier head suffix."""

from dataclasses import dataclass

import numpy as np

from ..autodiff import Tensor
from ..errors import ConfigError, ShapeError
from .layers import PARAMETERIZED

INPUT = "input"


@dataclass(frozen=True)
class Node:
    layer: object
    inputs: tuple

    @property
    def name(self):
        return self.layer.name


class ModelGraph:
    """Ordered nodes; ``nodes[head_start:]`` is the classifier head.

    Each node consumes the outputs of earlier nodes (or ``"input"``); the
    last node is the model output.
    """

    def __init__(self, nodes, feature_dim, head_start=None, arch=None, config=None,
                 head=None, seed=None):
        self.nodes = list(nodes)
        self.feature_dim = feature_dim
        self.head_start = len(self.nodes) if head_start is None else head_start
        self.arch = arch
        self.config = dict(config or {})
        self.head = head
        self.seed = seed
        self.freeze_plan = None
        self.rng = np.random.default_rng(0 if seed is None else seed)
        self._check()

    def _check(self):
        seen = {INPUT}
        for node in self.nodes:
            if node.name in seen:
                raise ConfigError(f"duplicate layer name {node.name!r}")
            for src in node.inputs:
                if src not in seen:
                    raise ConfigError(f"layer {node.name!r} reads {src!r} before it is defined")
            seen.add(node.name)
        names = [p.name for p in self.parameters()]
        if len(set(names)) != len(names):
            raise ConfigError("parameter names must be unique within a model")

    @property
    def head_range(self):
        return range(self.head_start, len(self.nodes))

    @property
    def has_head(self):
        return self.head_start < len(self.nodes)

    @property
    def input_size(self):
        return self.config.get("input_size")

    def layers(self):
        return [n.layer for n in self.nodes]

    def parameterized_layers(self):
        """``(node_index, layer)`` for conv/batchnorm/linear in topological order."""
        return [(i, n.layer) for i, n in enumerate(self.nodes) if n.layer.kind in PARAMETERIZED]

    def head_layer_names(self):
        return [layer.name for i, layer in self.parameterized_layers() if i >= self.head_start]

    def parameters(self):
        return [p for n in self.nodes for p in n.layer.parameters()]

    def trainable_parameters(self):
        return [p for p in self.parameters() if p.requires_grad]

    def buffers(self):
        out = {}
        for n in self.nodes:
            out.update(n.layer.buffers())
        return out

    def state_dict(self):
        """Copies of every parameter and buffer, in a stable order."""
        state = {p.name: p.data.copy() for p in self.parameters()}
        state.update({k: v.copy() for k, v in self.buffers().items()})
        return state

    def load_state_dict(self, state, strict=True):
        targets = {p.name: p.data for p in self.parameters()}
        targets.update(self.buffers())
        if strict and set(state) != set(targets):
            missing = sorted(set(targets) - set(state))
            extra = sorted(set(state) - set(targets))
            raise ConfigError(f"state mismatch: missing {missing}, unexpected {extra}")
        for name, value in state.items():
            if name not in targets:
                continue
            dst = targets[name]
            if dst.shape != value.shape:
                raise ShapeError(f"{name}: stored shape {value.shape} != model shape {dst.shape}")
            dst[...] = value

    def zero_grad(self):
        for p in self.parameters():
            p.grad = None

    def forward(self, x, training=False, until=None):
        """Run the graph; ``until`` stops after the named node."""
        if not isinstance(x, Tensor):
            x = Tensor(x)
        values = {INPUT: x}
        out = x
        for node in self.nodes:
            args = [values[src] for src in node.inputs]
            out = node.layer(*args, training=training, rng=self.rng)
            values[node.name] = out
            if node.name == until:
                break
        return out

    __call__ = forward

    def features(self, x, training=False):
        """Backbone output, N x feature_dim."""
        if self.head_start == 0:
            return x if isinstance(x, Tensor) else Tensor(x)
        return self.forward(x, training, until=self.nodes[self.head_start - 1].name)

    def topology(self):
        return [{"name": n.name, "inputs": list(n.inputs), **n.layer.spec()} for n in self.nodes]

    def __repr__(self):
        return (f"ModelGraph(arch={self.arch!r}, layers={len(self.nodes)}, "
                f"feature_dim={self.feature_dim}, head={self.has_head})")
