# Copyright 2026 The nadkit Authors
# SPDX-License-Identifier: Apache-2.0
import sys

from .cli import main

sys.exit(main())
