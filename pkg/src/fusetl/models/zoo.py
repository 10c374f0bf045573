"""Micro backbones, one per architecture family, and the classifier head.

All backbones take 3 x S x S input (``input_size`` S, default 64) and a base
channel ``width`` w (default 8).  ``cbr`` is conv3x3 -> batchnorm -> relu.

``micro_cnn``
    cbr(3->w, s2) -> cbr(w->2w, s2) -> cbr(2w->4w, s2) -> global average pool.
    6 parameterized layers, F = 4w.
``micro_resnet``
    cbr(3->2w, s2) -> maxpool2 -> 2 x [conv-bn-relu-conv-bn, add skip, relu]
    -> global average pool.  10 parameterized layers, F = 2w.
``micro_densenet``
    cbr(3->2w, s2) -> maxpool2 -> 2 x [bn-relu-conv3x3(growth w), concat]
    -> bn -> relu -> global average pool.  7 parameterized layers, F = 4w.
``micro_mobilenet``
    cbr(3->2w, s2) -> 2 x [depthwise conv3x3-bn-relu, pointwise conv1x1-bn-relu]
    (first block stride 2, 2w->4w; second stride 1, 4w->4w)
    -> global average pool.  10 parameterized layers, F = 4w.
"""

from dataclasses import asdict, dataclass

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ConfigError, ShapeError
from .graph import INPUT, ModelGraph, Node
from .layers import Activation, Add, BatchNorm2d, Concat, Conv2d, Dropout, Linear, Pool

ARCHITECTURES = ("micro_cnn", "micro_resnet", "micro_densenet", "micro_mobilenet")

DEFAULT_CONFIG = {"in_channels": 3, "input_size": 64, "width": 8}


@dataclass(frozen=True)
class HeadSpec:
    """Linear(F->H) -> ReLU -> Dropout(p) -> Linear(H->1) -> Sigmoid."""

    in_dim: int
    hidden_dim: int = 128
    dropout_p: float = 0.5

    def __post_init__(self):
        if self.in_dim < 1 or self.hidden_dim < 1:
            raise ConfigError(f"head dimensions must be positive, got {self}")
        if not 0.0 <= self.dropout_p < 1.0:
            raise ConfigError(f"head dropout must lie in [0, 1), got {self.dropout_p}")

    def to_dict(self):
        return asdict(self)


class _Builder:
    def __init__(self, rng):
        self.rng = rng
        self.nodes = []
        self.last = INPUT

    def add(self, layer, *inputs):
        self.nodes.append(Node(layer, tuple(inputs) or (self.last,)))
        self.last = layer.name
        return layer.name

    def cbr(self, name, cin, cout, stride=1, k=3, groups=1):
        pad = k // 2
        self.add(Conv2d(f"{name}.conv", cin, cout, k, stride, pad, groups, rng=self.rng))
        self.add(BatchNorm2d(f"{name}.bn", cout))
        return self.add(Activation(f"{name}.relu", "relu"))


def _micro_cnn(b, w):
    b.cbr("stage1", 3, w, stride=2)
    b.cbr("stage2", w, 2 * w, stride=2)
    b.cbr("stage3", 2 * w, 4 * w, stride=2)
    return 4 * w


def _micro_resnet(b, w):
    c = 2 * w
    b.cbr("stem", 3, c, stride=2)
    b.add(Pool("stem.pool", "max_pool2d", 2))
    for i in (1, 2):
        skip = b.last
        b.cbr(f"block{i}.a", c, c)
        b.add(Conv2d(f"block{i}.b.conv", c, c, 3, 1, 1, rng=b.rng))
        b.add(BatchNorm2d(f"block{i}.b.bn", c))
        b.add(Add(f"block{i}.add"), b.last, skip)
        b.add(Activation(f"block{i}.relu", "relu"))
    return c


def _micro_densenet(b, w):
    c = 2 * w
    b.cbr("stem", 3, c, stride=2)
    b.add(Pool("stem.pool", "max_pool2d", 2))
    for i in (1, 2):
        prev = b.last
        b.add(BatchNorm2d(f"dense{i}.bn", c))
        b.add(Activation(f"dense{i}.relu", "relu"))
        new = b.add(Conv2d(f"dense{i}.conv", c, w, 3, 1, 1, rng=b.rng))
        b.add(Concat(f"dense{i}.concat"), prev, new)
        c += w
    b.add(BatchNorm2d("final.bn", c))
    b.add(Activation("final.relu", "relu"))
    return c


def _micro_mobilenet(b, w):
    b.cbr("stem", 3, 2 * w, stride=2)
    for i, (cin, cout, stride) in enumerate(((2 * w, 4 * w, 2), (4 * w, 4 * w, 1)), start=1):
        b.cbr(f"ds{i}.dw", cin, cin, stride=stride, groups=cin)
        b.cbr(f"ds{i}.pw", cin, cout, k=1)
    return 4 * w


_BUILDERS = {
    "micro_cnn": _micro_cnn,
    "micro_resnet": _micro_resnet,
    "micro_densenet": _micro_densenet,
    "micro_mobilenet": _micro_mobilenet,
}


def build_backbone(arch, config=None, seed=0):
    """Headless backbone ending in global average pooling (N x F output)."""
    if arch not in _BUILDERS:
        raise ConfigError(f"unknown architecture {arch!r}; choose from {', '.join(ARCHITECTURES)}")
    cfg = {**DEFAULT_CONFIG, **(config or {})}
    unknown = set(cfg) - set(DEFAULT_CONFIG)
    if unknown:
        raise ConfigError(f"unknown backbone config keys {sorted(unknown)}")
    if cfg["in_channels"] != 3:
        raise ConfigError(f"backbones expect 3 input channels, got {cfg['in_channels']}")
    if cfg["width"] < 1 or cfg["input_size"] < 8:
        raise ConfigError(f"width must be >= 1 and input_size >= 8, got {cfg}")
    b = _Builder(np.random.default_rng(seed))
    feature_dim = _BUILDERS[arch](b, cfg["width"])
    b.add(Pool("gap", "global_avg_pool"))
    return ModelGraph(b.nodes, feature_dim, arch=arch, config=cfg, seed=seed)


def attach_head(model, head, seed=0):
    """Replace any existing head with the five-stage classifier.

    The backbone layer objects are shared, not copied, so backbone
    parameters are untouched.
    """
    if head.in_dim != model.feature_dim:
        raise ConfigError(
            f"head in_dim {head.in_dim} != backbone feature_dim {model.feature_dim}")
    rng = np.random.default_rng(seed)
    backbone = model.nodes[:model.head_start]
    last = backbone[-1].name if backbone else INPUT
    head_layers = [
        Linear("head.fc1", head.in_dim, head.hidden_dim, rng=rng),
        Activation("head.relu", "relu"),
        Dropout("head.dropout", head.dropout_p),
        Linear("head.fc2", head.hidden_dim, 1, rng=rng),
        Activation("head.sigmoid", "sigmoid"),
    ]
    nodes = list(backbone)
    for layer in head_layers:
        nodes.append(Node(layer, (last,)))
        last = layer.name
    out = ModelGraph(nodes, model.feature_dim, head_start=len(backbone), arch=model.arch,
                     config=model.config, head=head, seed=model.seed)
    out.rng = model.rng
    return out


def build_model(arch, config=None, head=None, seed=0):
    """Backbone plus head; ``head`` is a HeadSpec or a dict of its fields."""
    backbone = build_backbone(arch, config, seed)
    if head is None:
        head = {}
    if isinstance(head, dict):
        head = HeadSpec(in_dim=head.get("in_dim", backbone.feature_dim),
                        hidden_dim=head.get("hidden_dim", 128),
                        dropout_p=head.get("dropout_p", 0.5))
    return attach_head(backbone, head, seed + 1)


def predict(model, batch, training=False):
    """Probabilities of the positive class, shape N."""
    x = batch if isinstance(batch, Tensor) else Tensor(batch)
    size = model.input_size
    if x.ndim != 4 or x.shape[1] != 3 or (size and x.shape[2:] != (size, size)):
        raise ShapeError(
            f"expected batch of shape N x 3 x {size} x {size}, got {x.shape}")
    if not model.has_head:
        raise ConfigError("model has no classifier head; call attach_head first")
    out = model.forward(x, training=training)
    if out.ndim != 2 or out.shape[1] != 1:
        raise ShapeError(f"model output must be N x 1, got {out.shape}")
    return ad.reshape(out, (out.shape[0],))
