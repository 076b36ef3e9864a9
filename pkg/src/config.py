"""Configuration settings for the urban change agent."""

import os
from dataclasses import dataclass, field, fields, replace
from typing import Any, Dict, Optional, Tuple

import toml

# Project paths
PROJECT_ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
PATHS = {
    "run_dir": os.path.join(os.getcwd(), "runs"),
    "log_dir": "logs",
    "gazetteer": None,
}

# Remote completion provider
PROVIDER_CONFIG = {
    "endpoint": "https://api.openai.com/v1/chat/completions",
    "model": "gpt-4o",
    "api_key_env": "OPENAI_API_KEY",
    "temperature": 0.0,
    "timeout": 60.0,
    "retries": 3,
    "backoff": 1.0,
}

# Agent loop
AGENT_CONFIG = {
    "max_rounds": 12,
    "prompt_budget_tokens": 8000,
    "chars_per_token": 4,
    "history_window": 6,
    "observation_rows": 20,
    "preview_chars": 4000,
}

# Analytical add-ons
ANALYTICS_CONFIG = {
    "eps": 0.01,
    "min_pts": 4,
    "small_max": 5,
    "medium_max": 15,
    "top_percent": 10.0,
}

# Map rendering
RENDER_CONFIG = {
    "width": 640,
    "height": 480,
    "background": (255, 255, 255),
    "stroke": (64, 64, 64),
    "noise": (160, 160, 160),
    "null_fill": (200, 200, 200),
    "marker_radius": 3,
    "bandwidth": 12.0,
    "padding": 0.05,
    "write_png": False,
    "palette_version": "v1",
    "palette": [
        (31, 119, 180), (255, 127, 14), (44, 160, 44), (214, 39, 40),
        (148, 103, 189), (140, 86, 75), (227, 119, 194), (188, 189, 34),
        (23, 190, 207), (174, 199, 232), (255, 187, 120), (152, 223, 138),
    ],
    "ramp": [
        (255, 245, 235), (253, 190, 133), (253, 141, 60), (217, 71, 1), (127, 39, 4),
    ],
    "heat_ramp": [
        (255, 255, 178), (254, 204, 92), (253, 141, 60), (240, 59, 32), (189, 0, 38),
    ],
}

# Fallbacks when a query names no place or time
DEFAULTS = {
    "location": None,
    "time": None,
}

GAZETTEER_ALIASES: Dict[str, str] = {
    "nyc": "New York",
    "hk": "Hong Kong",
    "bao'an": "Baoan District",
}


@dataclass(frozen=True)
class ProviderSettings:
    endpoint: str = PROVIDER_CONFIG["endpoint"]
    model: str = PROVIDER_CONFIG["model"]
    api_key_env: str = PROVIDER_CONFIG["api_key_env"]
    temperature: float = PROVIDER_CONFIG["temperature"]
    timeout: float = PROVIDER_CONFIG["timeout"]
    retries: int = PROVIDER_CONFIG["retries"]
    backoff: float = PROVIDER_CONFIG["backoff"]


@dataclass(frozen=True)
class AgentSettings:
    max_rounds: int = AGENT_CONFIG["max_rounds"]
    prompt_budget_tokens: int = AGENT_CONFIG["prompt_budget_tokens"]
    chars_per_token: int = AGENT_CONFIG["chars_per_token"]
    history_window: int = AGENT_CONFIG["history_window"]
    observation_rows: int = AGENT_CONFIG["observation_rows"]
    preview_chars: int = AGENT_CONFIG["preview_chars"]

    @property
    def budget_chars(self) -> int:
        return self.prompt_budget_tokens * self.chars_per_token


@dataclass(frozen=True)
class AnalyticsSettings:
    eps: float = ANALYTICS_CONFIG["eps"]
    min_pts: int = ANALYTICS_CONFIG["min_pts"]
    small_max: int = ANALYTICS_CONFIG["small_max"]
    medium_max: int = ANALYTICS_CONFIG["medium_max"]
    top_percent: float = ANALYTICS_CONFIG["top_percent"]


RGB = Tuple[int, int, int]


@dataclass(frozen=True)
class RenderSettings:
    width: int = RENDER_CONFIG["width"]
    height: int = RENDER_CONFIG["height"]
    background: RGB = RENDER_CONFIG["background"]
    stroke: RGB = RENDER_CONFIG["stroke"]
    noise: RGB = RENDER_CONFIG["noise"]
    null_fill: RGB = RENDER_CONFIG["null_fill"]
    marker_radius: int = RENDER_CONFIG["marker_radius"]
    bandwidth: float = RENDER_CONFIG["bandwidth"]
    padding: float = RENDER_CONFIG["padding"]
    write_png: bool = RENDER_CONFIG["write_png"]
    palette_version: str = RENDER_CONFIG["palette_version"]
    palette: Tuple[RGB, ...] = tuple(RENDER_CONFIG["palette"])
    ramp: Tuple[RGB, ...] = tuple(RENDER_CONFIG["ramp"])
    heat_ramp: Tuple[RGB, ...] = tuple(RENDER_CONFIG["heat_ramp"])


@dataclass(frozen=True)
class PathSettings:
    run_dir: str = PATHS["run_dir"]
    log_dir: str = PATHS["log_dir"]
    gazetteer: Optional[str] = PATHS["gazetteer"]


@dataclass(frozen=True)
class DefaultSettings:
    location: Optional[str] = DEFAULTS["location"]
    time: Optional[str] = DEFAULTS["time"]


@dataclass(frozen=True)
class Settings:
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    agent: AgentSettings = field(default_factory=AgentSettings)
    analytics: AnalyticsSettings = field(default_factory=AnalyticsSettings)
    render: RenderSettings = field(default_factory=RenderSettings)
    paths: PathSettings = field(default_factory=PathSettings)
    defaults: DefaultSettings = field(default_factory=DefaultSettings)
    aliases: Dict[str, str] = field(default_factory=lambda: dict(GAZETTEER_ALIASES))


def _coerce(section: Any, overrides: Dict[str, Any]) -> Any:
    """Apply one TOML table onto a settings section, keeping declared field names only."""
    known = {f.name for f in fields(section)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"Unknown config keys in [{type(section).__name__}]: {sorted(unknown)}")
    values = {}
    for key, value in overrides.items():
        if isinstance(value, list) and value and isinstance(value[0], list):
            value = tuple(tuple(int(c) for c in item) for item in value)
        elif isinstance(value, list) and key in {"background", "stroke", "noise", "null_fill"}:
            value = tuple(int(c) for c in value)
        values[key] = value
    return replace(section, **values)


def load_settings(path: Optional[str] = None) -> Settings:
    """Load settings from a TOML file, falling back to the module defaults."""
    settings = Settings()
    if path is None:
        return settings
    data = toml.load(path)
    sections = {}
    for name in ("provider", "agent", "analytics", "render", "paths", "defaults"):
        if name in data:
            sections[name] = _coerce(getattr(settings, name), data[name])
    aliases = dict(settings.aliases)
    aliases.update({k.lower(): v for k, v in data.get("aliases", {}).items()})
    return replace(settings, aliases=aliases, **sections)
