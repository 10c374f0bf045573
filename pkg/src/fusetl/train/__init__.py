"""Training loop and checkpoint persistence."""

from .checkpoint import (
    MAGIC,
    VERSION,
    CheckpointRecord,
    decode_checkpoint,
    encode_checkpoint,
    import_weights,
    load_checkpoint,
    model_from_checkpoint,
    save_checkpoint,
)
from .trainer import (
    LOG_HEADER,
    EpochRecord,
    SchedulerConfig,
    TrainConfig,
    TrainLog,
    collect_scores,
    train,
    validate,
)

__all__ = [
    "LOG_HEADER", "MAGIC", "VERSION", "CheckpointRecord", "EpochRecord", "SchedulerConfig",
    "TrainConfig", "TrainLog", "collect_scores", "decode_checkpoint", "encode_checkpoint",
    "import_weights", "load_checkpoint", "model_from_checkpoint", "save_checkpoint", "train",
    "validate",
]
