# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Exception hierarchy for freqplan.

Everything raised on purpose derives from FreqplanError, and also from
ValueError so numeric callers can catch the builtin.
"""

from __future__ import annotations


class FreqplanError(ValueError):
    """Root of all freqplan errors. The CLI maps these to exit code 2."""


class InputError(FreqplanError):
    """An input violates an operation's preconditions."""


class ConfigError(FreqplanError):
    """A config file or override is malformed or names an unknown key."""


class CorpusError(FreqplanError):
    """A corpus base or manifest cannot be used."""
