# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Interprets nadkit network JSON as a torch model and trains it."""

from .graph import NetworkError, build_model, count_parameters  # noqa: F401
from .profile import TrainProfile, desk_profile, load_profile, paper_profile  # noqa: F401
from .train import train_eval  # noqa: F401
