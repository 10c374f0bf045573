"""Run configuration: everything needed to reproduce a training run."""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .data import AugmentConfig
from .errors import ConfigError
from .train import TrainConfig


@dataclass
class DataConfig:
    manifest: str = None
    synthetic: dict = None
    split_seed: int = 0
    test_frac: float = 0.2
    val_frac_of_train: float = 0.25


@dataclass
class RunConfig:
    arch: str = "micro_cnn"
    width: int = 8
    train: TrainConfig = field(default_factory=TrainConfig)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    data: DataConfig = field(default_factory=DataConfig)
    init_weights: str = None
    outdir: str = "runs/default"

    def to_dict(self):
        d = asdict(self)
        d["augment"] = self.augment.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown run config keys {sorted(unknown)}")
        try:
            if "train" in d:
                d["train"] = TrainConfig(**d["train"])
            if "augment" in d:
                d["augment"] = AugmentConfig(**d["augment"])
            if "data" in d:
                d["data"] = DataConfig(**d["data"])
        except TypeError as exc:
            raise ConfigError(f"bad run config: {exc}") from None
        return cls(**d)

    @classmethod
    def load(cls, path):
        try:
            doc = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON: {exc}") from None
        return cls.from_dict(doc)

    @property
    def backbone_config(self):
        return {"input_size": self.augment.target_size, "width": self.width}
