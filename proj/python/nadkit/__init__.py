# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
"""Python bindings for the nadkit core."""

import json as _json

from ._nadkit import (  # noqa: F401
    Block,
    NadkitError,
    ParseError,
    backends,
    canonical_hash,
    count_block,
    count_network,
    emit,
    infer_shapes,
    is_isomorphic,
    parse_block,
    print_block,
    validate,
)
from . import _nadkit

__version__ = "0.1.0"


def _macro(macro):
    if macro is None:
        return ""
    return macro if isinstance(macro, str) else _json.dumps(macro)


def search_width(cell, stem, downsample, macro=None):
    return _nadkit.search_width(cell, stem, downsample, _macro(macro))


def assemble(cell, stem, downsample, width, macro=None):
    """Network JSON text for the blocks at a given width."""
    return _nadkit.assemble(cell, stem, downsample, width, _macro(macro))


def account_cost(input_tokens, output_tokens, input_per_million=2.50, output_per_million=10.00):
    return _nadkit.account_cost(input_tokens, output_tokens, input_per_million, output_per_million)


def compute_metrics(samples, input_per_million=2.50, output_per_million=10.00):
    return _json.loads(_nadkit.compute_metrics(list(samples), input_per_million, output_per_million))


def design(config, output_dir="", resume=False):
    return _nadkit.design(str(config), str(output_dir), resume)
