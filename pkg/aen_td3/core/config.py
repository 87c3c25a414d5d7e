"""Experiment configuration loading."""

import copy
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import yaml

from ..config import DEFAULTS_CONFIG_PATH
from ..errors import ConfigError
from ..schema import ExperimentConfig


def deep_merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    """Recursively merge ``override`` into a copy of ``base``; mappings merge, everything else replaces."""
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = deep_merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path} must contain a mapping at the top level")
    return data


class ConfigManager:
    """Loads packaged defaults and layers user files and overrides on top."""

    def __init__(self, defaults_path: Optional[Path] = None):
        self.defaults_path = Path(defaults_path) if defaults_path else DEFAULTS_CONFIG_PATH
        self._defaults: Optional[Dict[str, Any]] = None

    def load_defaults(self) -> Dict[str, Any]:
        """Raw defaults document (cached after the first read)."""
        if self._defaults is None:
            self._defaults = _read_yaml(self.defaults_path)
        return copy.deepcopy(self._defaults)

    def load_raw(self, config_path: Optional[Union[str, Path]] = None,
                 overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        data = self.load_defaults()
        if config_path is not None:
            data = deep_merge(data, _read_yaml(Path(config_path)))
        if overrides:
            data = deep_merge(data, overrides)
        return data

    def load_experiment(self, config_path: Optional[Union[str, Path]] = None,
                        overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
        """Defaults, then the user file, then ``overrides``, validated as one ExperimentConfig."""
        return ExperimentConfig.from_dict(self.load_raw(config_path, overrides))


def config_to_yaml(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=True, default_flow_style=False)


def config_from_yaml(text: str) -> ExperimentConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(f"Could not parse config echo: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError("Config echo must be a mapping")
    return ExperimentConfig.from_dict(data)


def echo_lines(config: ExperimentConfig) -> List[str]:
    """Config echo as ``# ``-prefixed lines for CSV headers."""
    return [f"# {line}" if line else "#" for line in config_to_yaml(config).splitlines()]


def parse_echo(lines: List[str]) -> Optional[ExperimentConfig]:
    """Inverse of ``echo_lines``; None when there is no echo."""
    body = [line[2:] if line.startswith("# ") else line[1:] for line in lines if line.startswith("#")]
    if not body:
        return None
    return config_from_yaml("\n".join(body))


# Global config manager instance
config_manager = ConfigManager()


# Convenience functions
def load_experiment(config_path: Optional[Union[str, Path]] = None,
                    overrides: Optional[Dict[str, Any]] = None) -> ExperimentConfig:
    """Load an experiment configuration."""
    return config_manager.load_experiment(config_path, overrides)


def default_experiment() -> ExperimentConfig:
    """Packaged defaults as an ExperimentConfig."""
    return config_manager.load_experiment()
