"""Adam with bias correction and a reduce-on-plateau learning-rate schedule."""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError, StateError


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.lr <= 0 or self.eps <= 0:
            raise ConfigError(f"Adam needs lr > 0 and eps > 0, got lr={self.lr}, eps={self.eps}")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ConfigError(f"Adam betas must lie in [0, 1), got {self.beta1}, {self.beta2}")


def adam_step(params, grads, state):
    """One in-place Adam update of ``params`` using ``grads``.

    ``params`` and ``grads`` are parallel sequences; a ``None`` gradient is
    treated as zero.  Moment buffers are keyed by parameter name and created
    zero-filled on first use.
    """
    state.t += 1
    t = state.t
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for p, g in zip(params, grads):
        if not p.requires_grad:
            raise StateError(f"parameter {p.name!r} is frozen and must not be optimized")
        key = p.name
        if key not in state.m:
            state.m[key] = np.zeros_like(p.data)
            state.v[key] = np.zeros_like(p.data)
        m, v = state.m[key], state.v[key]
        if m.shape != p.data.shape:
            raise StateError(
                f"Adam state for {key!r} has shape {m.shape}, parameter has {p.data.shape}")
        if g is None:
            g = np.zeros_like(p.data)
        elif g.shape != p.data.shape:
            raise StateError(f"gradient for {key!r} has shape {g.shape}, expected {p.data.shape}")
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        m_hat = m / c1
        v_hat = v / c2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


class Adam:
    """Optimizer over the trainable subset of ``params``.

    Parameters with ``requires_grad=False`` at construction time are dropped
    and never touched.
    """

    def __init__(self, params, lr=1e-3, betas=(0.9, 0.999), eps=1e-8):
        self.params = [p for p in params if p.requires_grad]
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise StateError("parameter names passed to Adam must be unique")
        self.state = AdamState(lr=lr, beta1=betas[0], beta2=betas[1], eps=eps)

    @property
    def lr(self):
        return self.state.lr

    @lr.setter
    def lr(self, value):
        self.state.lr = value

    def zero_grad(self):
        for p in self.params:
            p.grad = None

    def step(self):
        adam_step(self.params, [p.grad for p in self.params], self.state)


@dataclass
class SchedulerState:
    factor: float = 0.1
    patience: int = 3
    min_lr: float = 1e-6
    best_metric: float = float("-inf")
    stale_count: int = 0

    def __post_init__(self):
        if not 0 < self.factor < 1:
            raise ConfigError(f"scheduler factor must lie in (0, 1), got {self.factor}")
        if self.patience < 1:
            raise ConfigError(f"scheduler patience must be >= 1, got {self.patience}")
        if self.min_lr < 0:
            raise ConfigError(f"scheduler min_lr must be >= 0, got {self.min_lr}")


def scheduler_step(state, metric, lr):
    """Return the learning rate after observing ``metric`` (higher is better).

    After ``patience`` consecutive calls without strict improvement the rate
    is multiplied by ``factor`` (floored at ``min_lr``) and the count resets.
    """
    if metric > state.best_metric:
        state.best_metric = metric
        state.stale_count = 0
        return lr
    state.stale_count += 1
    if state.stale_count >= state.patience:
        state.stale_count = 0
        return max(lr * state.factor, state.min_lr) if lr > state.min_lr else lr
    return lr


class ReduceLROnPlateau:
    def __init__(self, optimizer, factor=0.1, patience=3, min_lr=1e-6):
        self.optimizer = optimizer
        self.state = SchedulerState(factor=factor, patience=patience, min_lr=min_lr)

    def step(self, metric):
        self.optimizer.lr = scheduler_step(self.state, metric, self.optimizer.lr)
        return self.optimizer.lr
