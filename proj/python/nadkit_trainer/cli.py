# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
"""trainer --network <json> [--profile <json>] --out result.json"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

from . import data as data_mod
from .graph import NetworkError, build_model
from .profile import load_profile
from .train import result_record, seed_everything, train_eval


def write_result(path, record):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".result-")
    with os.fdopen(fd, "w", encoding="utf-8") as f:
        json.dump(record, f, indent=1)
        f.write("\n")
    os.replace(tmp, path)


def main(argv=None):
    ap = argparse.ArgumentParser(prog="trainer", description="Train and evaluate a network JSON.")
    ap.add_argument("--network", required=True)
    ap.add_argument("--profile", default="")
    ap.add_argument("--out", required=True)
    args = ap.parse_args(argv)

    try:
        profile = load_profile(args.profile)
    except (OSError, ValueError) as e:
        print(f"trainer: profile: {e}", file=sys.stderr)
        return 2

    seed_everything(profile.seed)
    try:
        model = build_model(args.network)
    except NetworkError as e:
        print(f"trainer: {e}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as e:
        print(f"trainer: cannot read network: {e}", file=sys.stderr)
        return 2

    try:
        data = data_mod.load(profile)
    except data_mod.DatasetUnavailable as e:
        write_result(args.out, result_record("failed", reason=str(e)))
        return 0
    if model.out_shape[-1] != data.num_classes:
        write_result(args.out, result_record(
            "failed", reason=f"network has {model.out_shape[-1]} outputs, dataset has {data.num_classes} classes"))
        return 0
    write_result(args.out, train_eval(model, profile, data))
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
