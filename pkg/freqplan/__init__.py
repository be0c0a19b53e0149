# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""freqplan: degradation hints, restoration planning, frequency-aware routing."""

__version__ = "0.1.0"
