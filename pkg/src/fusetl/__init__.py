"""Desk-scale transfer-learning pipeline for binary medical-image classification.

Subpackages: :mod:`fusetl.autodiff` (tensors, ops, Adam), :mod:`fusetl.models`
(micro backbones, head surgery, freezing), :mod:`fusetl.data` (fusion,
splits, images), :mod:`fusetl.train` (training loop, checkpoints), plus
:mod:`fusetl.metrics` and :mod:`fusetl.reporting`.
"""

__version__ = "0.1.0"
