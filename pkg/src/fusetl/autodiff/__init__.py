"""Reverse-mode autodiff core: tensors, ops, loss, optimizer, scheduler."""

from . import kernels
from .ops import (
    BCE_EPS,
    activation,
    add,
    batchnorm2d,
    bce_loss,
    channel_concat,
    conv2d,
    dropout,
    flatten,
    global_avg_pool,
    linear,
    max_pool2d,
    mean_all,
    merge_and_pool,
    mul,
    relu,
    reshape,
    residual_add,
    sigmoid,
    sum_all,
)
from .optim import Adam, AdamState, ReduceLROnPlateau, SchedulerState, adam_step, scheduler_step
from .tensor import Parameter, Tensor, backward, is_grad_enabled, no_grad

__all__ = [
    "BCE_EPS", "Adam", "AdamState", "Parameter", "ReduceLROnPlateau", "SchedulerState",
    "Tensor", "activation", "adam_step", "add", "backward", "batchnorm2d", "bce_loss",
    "channel_concat", "conv2d", "dropout", "flatten", "global_avg_pool", "is_grad_enabled",
    "kernels", "linear", "max_pool2d", "mean_all", "merge_and_pool", "mul", "no_grad", "relu", "reshape",
    "residual_add", "scheduler_step", "sigmoid", "sum_all",
]
