"""Training configuration and its JSON schema."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

MODES = ("vanilla", "rotation-augmented", "joint", "zero-shot-canon")
TASKS = ("images", "points")
AUGMENTATIONS = ("none", "small", "full", "group")
OPTIMIZERS = ("adam", "sgd")


@dataclass
class TrainConfig:
    """Everything needed to rebuild a model bundle and rerun its training.

    Modes:

    - ``vanilla``: predictor only, aligned data.
    - ``rotation-augmented``: predictor only, inputs rotated per ``augment``.
    - ``joint``: canonicalizer and predictor trained together on
      ``task + beta * prior``; ``beta = 0`` gives plain learned canonicalization.
    - ``zero-shot-canon``: predictor frozen, canonicalizer trained on
      ``beta * prior`` alone.

    ``pretrain_epochs`` first fits the predictor on aligned data (no
    canonicalizer), standing in for a pretrained network.
    """

    seed: int = 0
    task: str = "images"
    mode: str = "joint"
    epochs: int = 10
    pretrain_epochs: int = 0
    batch_size: int = 32
    lr: float = 3e-3
    optimizer: str = "adam"
    beta: float = 100.0
    lam: float = 1.0
    group_order: int = 8
    augment: str = "none"
    # data
    data_seed: int = 0
    n_train: int = 500
    n_test: int = 200
    n_classes: int = 10
    image_size: int = 20
    points_per_cloud: int = 96
    # networks
    canon_hidden: int = 8
    canon_depth: int = 1
    canon_kernel: int = 5
    predictor_width: int = 8
    point_hidden: int = 32

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.augment not in AUGMENTATIONS:
            raise ValueError(f"augment must be one of {AUGMENTATIONS}, got {self.augment!r}")
        if self.optimizer not in OPTIMIZERS:
            raise ValueError(f"optimizer must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        for name in ("epochs", "pretrain_epochs"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        for name in ("batch_size", "group_order", "n_train", "n_test", "n_classes", "canon_hidden",
                     "canon_depth", "predictor_width", "point_hidden"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if self.beta < 0 or self.lam <= 0:
            raise ValueError("beta must be >= 0 and lam > 0")
        if self.canon_kernel % 2 == 0:
            raise ValueError("canon_kernel must be odd")

    @property
    def uses_canonicalizer(self) -> bool:
        return self.mode in ("joint", "zero-shot-canon")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "TrainConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "TrainConfig":
        data = json.loads(text)
        if not isinstance(data, dict):
            raise ValueError("config JSON must be an object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path: str) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def replace(self, **changes) -> "TrainConfig":
        data = self.to_dict()
        data.update(changes)
        return TrainConfig.from_dict(data)
