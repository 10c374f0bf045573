"""Epoch loop with validation, best-accuracy checkpointing and early stopping.

Per epoch: one pass over the training batches (forward, BCE, backward,
Adam step), then validation.  A checkpoint is taken only when validation
accuracy strictly exceeds the best so far (which starts at 0.0); otherwise
the no-improvement counter grows and training stops once it reaches
``patience``.  The learning-rate scheduler sees validation accuracy once
per epoch, after the checkpoint decision.  The returned model carries the
best checkpoint's weights.
"""

import csv
import io
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..autodiff import Adam, ReduceLROnPlateau, bce_loss, no_grad
from ..errors import ConfigError, DivergenceError
from ..models import predict
from .checkpoint import load_checkpoint, save_checkpoint

log = logging.getLogger(__name__)

LOG_HEADER = ("epoch", "train_loss", "train_acc", "val_loss", "val_acc", "lr")


@dataclass
class SchedulerConfig:
    factor: float = 0.1
    patience: int = 3
    min_lr: float = 1e-6


@dataclass
class TrainConfig:
    max_epochs: int = 100
    batch_size: int = 32
    patience: int = 10
    lr: float = 1e-3
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    seed: int = 0
    freeze_fraction: float = 0.6
    hidden_dim: int = 128
    dropout_p: float = 0.5

    def __post_init__(self):
        if isinstance(self.scheduler, dict):
            self.scheduler = SchedulerConfig(**self.scheduler)
        if self.max_epochs < 1:
            raise ConfigError(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr <= 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")

    def to_dict(self):
        return asdict(self)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float
    lr: float


@dataclass
class TrainLog:
    rows: list = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = 0.0
    stop_reason: str = None

    @property
    def epochs_run(self):
        return len(self.rows)

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_HEADER)
        for r in self.rows:
            w.writerow([r.epoch] + [repr(float(getattr(r, k))) for k in LOG_HEADER[1:]])
        return buf.getvalue()


def collect_scores(model, loader, epoch=0):
    """Eval-mode probabilities and labels over every batch of ``loader``."""
    scores, labels = [], []
    with no_grad():
        for x, y in loader.batches(epoch):
            scores.append(predict(model, x, training=False).data)
            labels.append(y)
    return np.concatenate(scores), np.concatenate(labels)


def validate(model, loader):
    """(mean BCE loss, accuracy at threshold 0.5) in eval mode."""
    scores, labels = collect_scores(model, loader)
    with no_grad():
        loss = bce_loss(scores, labels).item()
    acc = float(np.mean((scores >= 0.5) == (labels == 1)))
    return loss, acc


def train(model, train_loader, val_loader, config, checkpoint_path=None, validator=None,
          meta=None):
    """Run the training loop; returns ``(best_model, TrainLog)``.

    ``validator(model, epoch) -> (loss, acc)`` replaces :func:`validate`
    when given (used to drive the stopping logic with injected values).
    ``meta`` is merged into every checkpoint descriptor.
    """
    if model.freeze_plan is None:
        raise ConfigError("apply a freeze plan before training (fraction 0 freezes nothing)")
    model.rng = np.random.default_rng([config.seed, 1])
    opt = Adam(model.parameters(), lr=config.lr)
    sched = ReduceLROnPlateau(opt, config.scheduler.factor, config.scheduler.patience,
                              config.scheduler.min_lr)
    out = TrainLog()
    best_acc = 0.0
    no_improvement = 0
    best_state = model.state_dict()
    saved = False

    for epoch in range(1, config.max_epochs + 1):
        lr = opt.lr
        loss_sum, correct, seen = 0.0, 0, 0
        for b, (x, y) in enumerate(train_loader.batches(epoch)):
            opt.zero_grad()
            p = predict(model, x, training=True)
            loss = bce_loss(p, y)
            value = loss.item()
            if not np.isfinite(value):
                raise DivergenceError(epoch, b, value)
            loss.backward()
            opt.step()
            loss_sum += value * len(y)
            correct += int(np.sum((p.data >= 0.5) == (y == 1)))
            seen += len(y)
        val_loss, val_acc = (validator or (lambda m, e: validate(m, val_loader)))(model, epoch)

        if val_acc > best_acc:
            best_acc = val_acc
            out.best_epoch = epoch
            no_improvement = 0
            best_state = model.state_dict()
            if checkpoint_path is not None:
                save_checkpoint(model, {"best_val_acc": best_acc, "epoch": epoch, **(meta or {})},
                                checkpoint_path)
                saved = True
        else:
            no_improvement += 1
        sched.step(val_acc)
        out.rows.append(EpochRecord(epoch, loss_sum / seen, correct / seen, val_loss, val_acc, lr))
        log.info("epoch %d train_loss %.4f train_acc %.4f val_loss %.4f val_acc %.4f lr %.2e",
                 epoch, loss_sum / seen, correct / seen, val_loss, val_acc, lr)
        if no_improvement >= config.patience:
            out.stop_reason = "early_stop"
            break
    else:
        out.stop_reason = "epoch_cap"

    out.best_val_acc = best_acc
    if saved:
        model.load_state_dict(load_checkpoint(checkpoint_path).tensors)
    else:
        model.load_state_dict(best_state)
    return model, out
