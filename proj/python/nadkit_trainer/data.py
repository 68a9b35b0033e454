# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Small-image datasets as in-memory uint8 tensors."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch

# Standard per-channel statistics.
CIFAR10_STATS = ((0.4914, 0.4822, 0.4465), (0.2470, 0.2435, 0.2616))
CIFAR100_STATS = ((0.5071, 0.4865, 0.4409), (0.2673, 0.2564, 0.2762))


class DatasetUnavailable(RuntimeError):
    pass


@dataclass
class Split:
    x: torch.Tensor  # N,C,H,W uint8
    y: torch.Tensor  # N int64


@dataclass
class Data:
    train: Split
    val: Split
    test: Split
    num_classes: int
    mean: tuple
    std: tuple


def synthetic(n, num_classes=10, size=32, seed=0, noise=48.0):
    """Class templates (smooth colour blobs) plus pixel noise. The templates
    depend only on num_classes and size, so train and test share them."""
    tmpl_rng = np.random.default_rng(12345 + num_classes * 1000 + size)
    yy, xx = np.mgrid[0:size, 0:size] / size
    templates = []
    for _ in range(num_classes):
        img = np.zeros((3, size, size))
        for c in range(3):
            cx, cy = tmpl_rng.uniform(0.2, 0.8, 2)
            fx, fy = tmpl_rng.uniform(1.0, 4.0, 2)
            img[c] = 128 + 90 * np.sin(2 * np.pi * (fx * (xx - cx))) * np.cos(2 * np.pi * (fy * (yy - cy)))
        templates.append(img)
    templates = np.stack(templates)
    rng = np.random.default_rng(seed)
    y = rng.integers(0, num_classes, n)
    x = templates[y] + rng.normal(0, noise, (n, 3, size, size))
    x = np.clip(np.rint(x), 0, 255).astype(np.uint8)
    return Split(torch.from_numpy(x), torch.from_numpy(y.astype(np.int64)))


def _cifar(name, root, train):
    try:
        from torchvision import datasets
    except ImportError as e:  # pragma: no cover
        raise DatasetUnavailable("torchvision is not installed") from e
    cls = datasets.CIFAR10 if name == "cifar10" else datasets.CIFAR100
    try:
        ds = cls(root=root, train=train, download=False)
    except RuntimeError as e:
        raise DatasetUnavailable(f"{name} not found under {root}: {e}") from e
    x = torch.from_numpy(np.asarray(ds.data)).permute(0, 3, 1, 2).contiguous()
    return Split(x, torch.tensor(ds.targets, dtype=torch.int64))


def _take(split, idx):
    return Split(split.x[idx], split.y[idx])


def load(profile):
    """Train and validation are disjoint draws from the training pool; test
    comes from the held-out set. Draws are seeded by profile.seed."""
    g = torch.Generator().manual_seed(profile.seed)
    if profile.dataset == "synthetic":
        classes = profile.num_classes or 10
        pool = synthetic(max(profile.train_samples, 1000) + profile.val_samples, classes, profile.crop_size, seed=1)
        held = synthetic(profile.test_samples or 1000, classes, profile.crop_size, seed=2)
        flat = pool.x.float()
        mean = tuple((flat.mean(dim=(0, 2, 3)) / 255).tolist())
        std = tuple((flat.std(dim=(0, 2, 3)) / 255).tolist())
    elif profile.dataset in ("cifar10", "cifar100"):
        pool = _cifar(profile.dataset, profile.data_root, True)
        held = _cifar(profile.dataset, profile.data_root, False)
        classes = 10 if profile.dataset == "cifar10" else 100
        mean, std = CIFAR10_STATS if profile.dataset == "cifar10" else CIFAR100_STATS
    else:
        raise DatasetUnavailable(f"unknown dataset {profile.dataset!r}")

    order = torch.randperm(len(pool.y), generator=g)
    order = order[: max(1, int(len(order) * profile.subset_fraction))]
    nval = min(profile.val_samples, len(order) // 2)
    val_idx, train_idx = order[:nval], order[nval:]
    if profile.train_samples:
        train_idx = train_idx[: profile.train_samples]
    test_idx = torch.randperm(len(held.y), generator=g)
    if profile.test_samples:
        test_idx = test_idx[: profile.test_samples]
    return Data(_take(pool, train_idx), _take(pool, val_idx), _take(held, test_idx), classes, mean, std)
