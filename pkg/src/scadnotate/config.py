"""Run configuration: defaults, a minimal TOML-style loader, env overrides.

The config file is a flat key/value document with optional [section] headers;
`CADTALKER_<SECTION>_<KEY>` environment variables override file values, e.g.
CADTALKER_PROVIDER_URL.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Optional

from .providers.base import OracleConfig
from .voting import VoteConfig


@dataclass(frozen=True)
class ProviderSettings:
    kind: str = "oracle"  # remote | oracle
    url: Optional[str] = None
    llm_url: Optional[str] = None
    timeout_s: float = 120.0
    oracle_seed: int = 0
    oracle_confidence_lo: float = 0.5
    oracle_confidence_hi: float = 0.9
    oracle_confidence_jitter: float = 0.0
    oracle_pixel_noise_rate: float = 0.0
    oracle_detection_dropout: float = 0.0

    def oracle_config(self) -> OracleConfig:
        return OracleConfig(
            seed=self.oracle_seed,
            confidence_range=(self.oracle_confidence_lo, self.oracle_confidence_hi),
            confidence_jitter=self.oracle_confidence_jitter,
            pixel_noise_rate=self.oracle_pixel_noise_rate,
            detection_dropout=self.oracle_detection_dropout,
        )


@dataclass(frozen=True)
class RenderSettings:
    views: int = 10
    elevation_deg: float = 55.0
    resolution: int = 512
    closing_iterations: int = 1
    radius_factor: float = 2.2
    fov_deg: float = 40.0


@dataclass(frozen=True)
class ServiceSettings:
    port: int = 8008
    data_dir: str = "."


@dataclass(frozen=True)
class Config:
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    render: RenderSettings = field(default_factory=RenderSettings)
    vote: VoteConfig = field(default_factory=VoteConfig)
    service: ServiceSettings = field(default_factory=ServiceSettings)

    def snapshot(self) -> dict[str, Any]:
        return {
            "provider": asdict(self.provider),
            "render": asdict(self.render),
            "vote": asdict(self.vote),
            "service": asdict(self.service),
        }


def _parse_value(text: str) -> Any:
    text = text.strip()
    if text.startswith(('"', "'")) and text.endswith(text[0]) and len(text) >= 2:
        return text[1:-1]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    return text


def parse_config_text(text: str) -> dict[str, Any]:
    """Flat `section.key -> value` mapping from a TOML-style document."""
    out: dict[str, Any] = {}
    section = ""
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            continue
        if "=" not in line:
            raise ValueError(f"malformed config line: {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        full = f"{section}.{key}" if section and "." not in key else key
        out[full] = _parse_value(value)
    return out


_SECTIONS = {
    "provider": ProviderSettings,
    "render": RenderSettings,
    "vote": VoteConfig,
    "service": ServiceSettings,
}


def load_config(path: Optional[str | Path] = None,
                env: Optional[dict[str, str]] = None) -> Config:
    env = os.environ if env is None else env
    values: dict[str, Any] = {}
    if path is not None:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for section, cls in _SECTIONS.items():
        for f in fields(cls):
            var = f"CADTALKER_{section.upper()}_{f.name.upper()}"
            if var in env:
                values[f"{section}.{f.name}"] = _parse_value(env[var])
    # the documented short form for the most common override
    if "CADTALKER_PROVIDER_URL" in env:
        values["provider.url"] = env["CADTALKER_PROVIDER_URL"]

    cfg = Config()
    for full_key, value in values.items():
        if "." not in full_key:
            raise ValueError(f"unknown config key {full_key!r}")
        section, key = full_key.split(".", 1)
        if section not in _SECTIONS:
            raise ValueError(f"unknown config section {section!r}")
        current = getattr(cfg, section)
        if key not in {f.name for f in fields(current)}:
            raise ValueError(f"unknown config key {full_key!r}")
        cfg = replace(cfg, **{section: replace(current, **{key: value})})
    return cfg
