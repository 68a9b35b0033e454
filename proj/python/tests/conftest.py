# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0

import os
import pathlib

import pytest

ROOT = pathlib.Path(__file__).resolve().parents[2]


@pytest.fixture(scope="session")
def data_dir():
    return pathlib.Path(os.environ.get("NADKIT_TEST_DATA", ROOT / "tests" / "data"))


@pytest.fixture(scope="session")
def nk():
    return pytest.importorskip("nadkit")


@pytest.fixture(scope="session")
def arch(nk, data_dir):
    d = data_dir / "arch"
    return tuple(nk.Block((d / f"{n}.block").read_text()) for n in ("resnet_cell", "stem", "downsample"))
