"""Packaged configuration for aen_td3."""

from pathlib import Path

# Path to the default experiment configuration
DEFAULTS_CONFIG_PATH = Path(__file__).parent / "defaults.yaml"

__all__ = ["DEFAULTS_CONFIG_PATH"]
