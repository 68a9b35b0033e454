# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Training loop and the result record."""

from __future__ import annotations

import math
import random

import numpy as np
import torch
import torch.nn.functional as F


def seed_everything(seed):
    random.seed(seed)
    np.random.seed(seed % 2**32)
    torch.manual_seed(seed)
    torch.use_deterministic_algorithms(True, warn_only=True)


def diverged(losses):
    """Early-stop hook: epoch-2 loss above epoch-0 loss."""
    return len(losses) >= 3 and losses[2] > losses[0]


def result_record(status, accuracy_val=None, accuracy_test=None, epochs_run=0, reason="", **extra):
    r = {"accuracy_val": accuracy_val, "accuracy_test": accuracy_test, "status": status, "epochs_run": epochs_run}
    if reason:
        r["reason"] = reason
    r.update(extra)
    return r


class _Prep:
    def __init__(self, data, profile):
        self.mean = torch.tensor(data.mean).view(1, -1, 1, 1)
        self.std = torch.tensor(data.std).view(1, -1, 1, 1)
        self.profile = profile

    def __call__(self, x, train, g):
        x = x.float() / 255.0
        p = self.profile
        if train and p.crop_padding > 0:
            n, _, h, w = x.shape
            padded = F.pad(x, (p.crop_padding,) * 4)
            oy = torch.randint(0, 2 * p.crop_padding + 1, (n,), generator=g)
            ox = torch.randint(0, 2 * p.crop_padding + 1, (n,), generator=g)
            x = torch.stack([padded[i, :, oy[i]:oy[i] + h, ox[i]:ox[i] + w] for i in range(n)])
        if train and p.flip_p > 0:
            flip = torch.rand(x.shape[0], generator=g) < p.flip_p
            x = torch.where(flip.view(-1, 1, 1, 1), x.flip(3), x)
        if p.normalize:
            x = (x - self.mean) / self.std
        return x


@torch.no_grad()
def evaluate(model, split, prep, batch_size):
    if len(split.y) == 0:
        return None
    model.eval()
    correct = 0
    for i in range(0, len(split.y), batch_size):
        out = model(prep(split.x[i:i + batch_size], False, None))
        correct += (out.argmax(dim=1) == split.y[i:i + batch_size]).sum().item()
    return round(correct / len(split.y), 6)


def train_eval(model, profile, data):
    """Returns the result record. train_loss holds the mean loss per epoch."""
    if profile.threads:
        torch.set_num_threads(profile.threads)
    g = torch.Generator().manual_seed(profile.seed)
    prep = _Prep(data, profile)
    opt = torch.optim.SGD(model.parameters(), lr=profile.lr, momentum=profile.momentum,
                          nesterov=profile.nesterov, weight_decay=profile.weight_decay)
    n = len(data.train.y)
    steps_per_epoch = max(1, math.ceil(n / profile.batch_size))
    total = steps_per_epoch * profile.epochs
    if profile.schedule == "cosine":
        sched = torch.optim.lr_scheduler.CosineAnnealingLR(opt, T_max=total, eta_min=profile.lr_end)
    else:
        sched = None

    losses = []
    try:
        for epoch in range(profile.epochs):
            model.train()
            order = torch.randperm(n, generator=g)
            acc, seen = 0.0, 0
            for i in range(0, n, profile.batch_size):
                idx = order[i:i + profile.batch_size]
                x = prep(data.train.x[idx], True, g)
                loss = F.cross_entropy(model(x), data.train.y[idx])
                if not torch.isfinite(loss):
                    return result_record("failed", epochs_run=epoch + 1, reason=f"non-finite loss in epoch {epoch}",
                                         train_loss=losses)
                opt.zero_grad(set_to_none=True)
                loss.backward()
                opt.step()
                if sched:
                    sched.step()
                acc += loss.item() * len(idx)
                seen += len(idx)
            losses.append(round(acc / seen, 6))
            if profile.diverge_check and epoch == 2 and diverged(losses):
                return result_record("diverged", epochs_run=3,
                                     reason=f"epoch-2 loss {losses[2]} above epoch-0 loss {losses[0]}",
                                     train_loss=losses)
    except RuntimeError as e:
        if "out of memory" in str(e).lower():
            return result_record("failed", epochs_run=len(losses), reason="out of memory", train_loss=losses)
        raise

    return result_record("ok", evaluate(model, data.val, prep, 512), evaluate(model, data.test, prep, 512),
                         profile.epochs, train_loss=losses)
