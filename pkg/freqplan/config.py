# SPDX-License-Identifier: MIT
# Copyright (c) 2026 Mat McGowan
"""Configuration file parsing for freqplan.

Parses freqplan.conf in two formats:
  - INI: [section] with key=value pairs
  - Flat: section.key=value

Both formats can be mixed in the same file. A bare `seed=N` outside any
section sets the global seed.
"""

from __future__ import annotations

import logging
import os
import re
from pathlib import Path

import attr

from .advloss import LossConfig
from .degrade import DegradeRanges
from .errors import ConfigError, FreqplanError
from .freqmoe import RouterConfig
from .hints import CueParams, HintThresholds
from .spectra import SpectralConfig

logger = logging.getLogger(__name__)

ENV_VAR = "FREQPLAN_CONF"

SECTIONS = {
    "thresholds": HintThresholds,
    "cues": CueParams,
    "router": RouterConfig,
    "loss": LossConfig,
    "spectral": SpectralConfig,
    "degrade": DegradeRanges,
}


def config_path(explicit: str | Path | None = None) -> Path | None:
    """--config wins, then $FREQPLAN_CONF, else no file."""
    if explicit:
        return Path(explicit)
    env = os.environ.get(ENV_VAR)
    return Path(env) if env else None


class FreqplanConfig:
    """Parse a config file into validated records."""

    def __init__(self, conf_path: str | Path | None = None):
        self.conf_path = Path(conf_path) if conf_path else None
        self.seed: int = 0
        self._values: dict[str, dict[str, str]] = {name: {} for name in SECTIONS}
        self._lines: dict[tuple[str, str], int] = {}
        if self.conf_path is not None:
            self._parse()
        self.thresholds = self._build("thresholds")
        self.cues = self._build("cues")
        self.router = self._build("router")
        self.loss = self._build("loss")
        self.spectral = self._build("spectral")
        self.degrade = self._build("degrade")

    def _parse(self):
        if not self.conf_path.is_file():
            raise ConfigError(f"config file not found: {self.conf_path}")

        section = ""
        for lineno, raw_line in enumerate(self.conf_path.read_text().splitlines(), 1):
            line = raw_line.strip()

            # Skip comments and blank lines
            if not line or line.startswith("#"):
                continue

            # Section header: [name]
            m = re.match(r"^\[(.+)]$", line)
            if m:
                section = m.group(1).strip()
                if section not in SECTIONS:
                    raise ConfigError(f"{self.conf_path}:{lineno}: unknown section [{section}]")
                continue

            if "=" not in line:
                raise ConfigError(f"{self.conf_path}:{lineno}: expected key=value")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()

            if "." in key:
                # Flat format: section.key=value
                sec, _, key = key.partition(".")
            elif section:
                sec = section
            elif key == "seed":
                self.seed = self._int(val, lineno)
                continue
            else:
                raise ConfigError(f"{self.conf_path}:{lineno}: key {key!r} outside any section")
            self._set(sec, key, val, lineno)

    def _int(self, val: str, lineno: int) -> int:
        try:
            return int(val)
        except ValueError:
            raise ConfigError(f"{self.conf_path}:{lineno}: seed must be an integer, got {val!r}") from None

    def _set(self, section: str, key: str, val: str, lineno: int):
        if section not in SECTIONS:
            raise ConfigError(f"{self.conf_path}:{lineno}: unknown section {section!r}")
        known = {a.name for a in attr.fields(SECTIONS[section])}
        if key not in known:
            raise ConfigError(f"{self.conf_path}:{lineno}: unknown key {section}.{key}")
        self._values[section][key] = val
        self._lines[(section, key)] = lineno

    def _build(self, section: str):
        try:
            return SECTIONS[section](**self._values[section])
        except (FreqplanError, ValueError, TypeError) as exc:
            where = f"{self.conf_path}: " if self.conf_path else ""
            raise ConfigError(f"{where}[{section}] {exc}") from None

    # ── Overrides ────────────────────────────────────────────────

    def override(self, section: str, **values) -> None:
        """Apply command-line values on top of the file (None means unset)."""
        values = {k: v for k, v in values.items() if v is not None}
        if not values:
            return
        current = getattr(self, section)
        try:
            setattr(self, section, attr.evolve(current, **values))
        except (FreqplanError, ValueError, TypeError) as exc:
            raise ConfigError(f"[{section}] {exc}") from None

    def to_dict(self) -> dict:
        out = {"seed": self.seed}
        for name in SECTIONS:
            out[name] = {k: (str(v) if name == "spectral" and k == "h_hat" else v)
                         for k, v in attr.asdict(getattr(self, name)).items()}
        return out
