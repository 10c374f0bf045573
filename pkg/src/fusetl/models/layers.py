"""Layer objects wrapping the autodiff ops.

Parameterized kinds (``conv``, ``batchnorm``, ``linear``) own parameters;
all other kinds own none.  Parameters are named ``<layer>.<field>``.
"""

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import Parameter

PARAMETERIZED = ("conv", "batchnorm", "linear")


def _fan_in_uniform(rng, shape, fan_in, gain):
    bound = gain / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Layer:
    kind = None
    n_inputs = 1

    def __init__(self, name):
        self.name = name

    def parameters(self):
        return []

    def buffers(self):
        return {}

    def spec(self):
        """JSON-ready description of hyperparameters."""
        return {"kind": self.kind}

    def __call__(self, *inputs, training=False, rng=None):
        raise NotImplementedError


class Conv2d(Layer):
    kind = "conv"

    def __init__(self, name, in_channels, out_channels, kernel_size, stride=1, padding=0,
                 groups=1, rng=None):
        super().__init__(name)
        self.in_channels, self.out_channels = in_channels, out_channels
        self.kernel_size, self.stride, self.padding, self.groups = kernel_size, stride, padding, groups
        fan_in = in_channels // groups * kernel_size * kernel_size
        rng = rng if rng is not None else np.random.default_rng(0)
        wshape = (out_channels, in_channels // groups, kernel_size, kernel_size)
        self.weight = Parameter(_fan_in_uniform(rng, wshape, fan_in, math.sqrt(6.0)), f"{name}.weight")
        self.bias = Parameter(_fan_in_uniform(rng, (out_channels,), fan_in, 1.0), f"{name}.bias")

    def parameters(self):
        return [self.weight, self.bias]

    def spec(self):
        return {"kind": self.kind, "in": self.in_channels, "out": self.out_channels,
                "k": self.kernel_size, "stride": self.stride, "padding": self.padding,
                "groups": self.groups}

    def __call__(self, x, training=False, rng=None):
        return ad.conv2d(x, self.weight, self.bias, self.stride, self.padding, self.groups)


class BatchNorm2d(Layer):
    """Batch normalization; when ``frozen`` it always uses the running statistics."""

    kind = "batchnorm"

    def __init__(self, name, channels, momentum=0.1, eps=1e-5):
        super().__init__(name)
        self.channels, self.momentum, self.eps = channels, momentum, eps
        self.gamma = Parameter(np.ones(channels), f"{name}.gamma")
        self.beta = Parameter(np.zeros(channels), f"{name}.beta")
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.frozen = False

    def parameters(self):
        return [self.gamma, self.beta]

    def buffers(self):
        return {f"{self.name}.running_mean": self.running_mean,
                f"{self.name}.running_var": self.running_var}

    def spec(self):
        return {"kind": self.kind, "channels": self.channels, "momentum": self.momentum,
                "eps": self.eps}

    def __call__(self, x, training=False, rng=None):
        return ad.batchnorm2d(x, self.gamma, self.beta, self.running_mean, self.running_var,
                              self.momentum, self.eps, training=training and not self.frozen)


class Linear(Layer):
    kind = "linear"

    def __init__(self, name, in_features, out_features, rng=None):
        super().__init__(name)
        self.in_features, self.out_features = in_features, out_features
        rng = rng if rng is not None else np.random.default_rng(0)
        self.weight = Parameter(
            _fan_in_uniform(rng, (out_features, in_features), in_features, math.sqrt(6.0)),
            f"{name}.weight")
        self.bias = Parameter(_fan_in_uniform(rng, (out_features,), in_features, 1.0), f"{name}.bias")

    def parameters(self):
        return [self.weight, self.bias]

    def spec(self):
        return {"kind": self.kind, "in": self.in_features, "out": self.out_features}

    def __call__(self, x, training=False, rng=None):
        return ad.linear(x, self.weight, self.bias)


class Activation(Layer):
    kind = "activation"

    def __init__(self, name, fn):
        super().__init__(name)
        self.fn = fn

    def spec(self):
        return {"kind": self.kind, "fn": self.fn}

    def __call__(self, x, training=False, rng=None):
        return ad.activation(x, self.fn)


class Dropout(Layer):
    kind = "dropout"

    def __init__(self, name, p):
        super().__init__(name)
        if not 0.0 <= p < 1.0:
            raise ValueError(f"dropout probability must lie in [0, 1), got {p}")
        self.p = p

    def spec(self):
        return {"kind": self.kind, "p": self.p}

    def __call__(self, x, training=False, rng=None):
        return ad.dropout(x, self.p, training, rng)


class Pool(Layer):
    """``global_avg_pool``, ``max_pool2d`` or ``flatten``."""

    kind = "pool"

    def __init__(self, name, mode, kernel_size=2, stride=None):
        super().__init__(name)
        self.mode, self.kernel_size, self.stride = mode, kernel_size, stride

    def spec(self):
        out = {"kind": self.kind, "mode": self.mode}
        if self.mode == "max_pool2d":
            out.update(k=self.kernel_size, stride=self.stride or self.kernel_size)
        return out

    def __call__(self, x, training=False, rng=None):
        if self.mode == "max_pool2d":
            return ad.max_pool2d(x, self.kernel_size, self.stride)
        return ad.merge_and_pool(x, self.mode)


class Add(Layer):
    kind = "add"
    n_inputs = 2

    def __call__(self, a, b, training=False, rng=None):
        return ad.add(a, b)


class Concat(Layer):
    kind = "concat"
    n_inputs = None

    def __call__(self, *xs, training=False, rng=None):
        return ad.channel_concat(xs)
