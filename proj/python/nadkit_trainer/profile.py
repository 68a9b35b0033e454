# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Training profiles."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

DEFAULT_SEEDS = (777, 888, 999)


@dataclass
class TrainProfile:
    optimizer: str = "sgd"
    momentum: float = 0.9
    nesterov: bool = True
    lr: float = 0.1
    lr_end: float = 0.0
    schedule: str = "cosine"  # cosine | constant
    weight_decay: float = 5e-4
    epochs: int = 200
    batch_size: int = 256
    flip_p: float = 0.5
    crop_size: int = 32
    crop_padding: int = 4
    normalize: bool = True
    dataset: str = "cifar10"  # cifar10 | cifar100 | synthetic
    data_root: str = "data"
    subset_fraction: float = 1.0
    train_samples: int = 0  # 0: all that remain after subset_fraction
    val_samples: int = 5000
    test_samples: int = 0
    num_classes: int = 0  # 0: from the dataset
    seed: int = DEFAULT_SEEDS[0]
    seeds: list = field(default_factory=lambda: list(DEFAULT_SEEDS))
    diverge_check: bool = True
    threads: int = 0

    def check(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0.0 < self.subset_fraction <= 1.0:
            raise ValueError("subset_fraction must be in (0, 1]")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.optimizer != "sgd":
            raise ValueError(f"unsupported optimizer {self.optimizer!r}")
        if self.schedule not in ("cosine", "constant"):
            raise ValueError(f"unsupported schedule {self.schedule!r}")
        for name in ("train_samples", "val_samples", "test_samples"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        return self

    def to_dict(self):
        return dataclasses.asdict(self)


def paper_profile(**overrides):
    return dataclasses.replace(TrainProfile(), **overrides).check()


def desk_profile(**overrides):
    base = dict(epochs=3, batch_size=128, train_samples=2000, test_samples=1000, val_samples=500)
    base.update(overrides)
    return dataclasses.replace(TrainProfile(), **base).check()


def profile_from_dict(d):
    d = dict(d)
    base = d.pop("base", "desk")
    known = {f.name for f in dataclasses.fields(TrainProfile)}
    unknown = sorted(set(d) - known)
    if unknown:
        raise ValueError(f"unknown profile fields: {', '.join(unknown)}")
    if base == "desk":
        return desk_profile(**d)
    if base == "paper":
        return paper_profile(**d)
    raise ValueError(f"unknown base profile {base!r}")


def load_profile(path):
    if not path:
        return desk_profile()
    with open(path, encoding="utf-8") as f:
        return profile_from_dict(json.load(f))
