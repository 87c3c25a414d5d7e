"""JSON checkpoints: config echo, controller networks, Adam states and counters."""

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional, Union

from .controllers import Controller, get_controller_class
from .errors import CheckpointError, ConfigError
from .schema import ExperimentConfig

CHECKPOINT_FORMAT = "aen-td3/checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    config: ExperimentConfig
    seed: int
    controller: Controller
    episodes_completed: int = 0

    def to_dict(self) -> Dict[str, Any]:
        return {
            "format": CHECKPOINT_FORMAT,
            "version": CHECKPOINT_VERSION,
            "seed": int(self.seed),
            "episodes_completed": int(self.episodes_completed),
            "config": self.config.to_dict(),
            "controller": self.controller.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any], config: Optional[ExperimentConfig] = None) -> "Checkpoint":
        """Rebuild a checkpoint; ``config`` overrides the stored echo and must match its layout."""
        if data.get("format") != CHECKPOINT_FORMAT:
            raise CheckpointError(f"Not an aen-td3 checkpoint (format {data.get('format')!r})")
        if data.get("version") != CHECKPOINT_VERSION:
            raise CheckpointError(f"Unsupported checkpoint version {data.get('version')!r}")
        try:
            stored = ExperimentConfig.from_dict(data["config"])
            if config is None:
                config = stored
            controller = get_controller_class(config.mode).from_dict(data["controller"], config)
            return cls(
                config=config,
                seed=int(data["seed"]),
                controller=controller,
                episodes_completed=int(data.get("episodes_completed", 0)),
            )
        except KeyError as e:
            raise CheckpointError(f"Checkpoint is missing {e}") from e
        except ConfigError as e:
            raise CheckpointError(f"Checkpoint config is invalid: {e}") from e


def atomic_write_json(path: Path, data: Dict[str, Any]) -> None:
    """Write JSON atomically to prevent corruption."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    temp_path = path.with_suffix(path.suffix + ".tmp")
    with open(temp_path, "w", encoding="utf-8") as f:
        json.dump(data, f, indent=1)
        f.flush()
        os.fsync(f.fileno())
    temp_path.replace(path)


def save_checkpoint(path: Union[str, Path], checkpoint: Checkpoint) -> Path:
    path = Path(path)
    try:
        atomic_write_json(path, checkpoint.to_dict())
    except OSError as e:
        raise CheckpointError(f"Could not write checkpoint {path}: {e}") from e
    return path


def load_checkpoint(path: Union[str, Path], config: Optional[ExperimentConfig] = None) -> Checkpoint:
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = json.load(f)
    except FileNotFoundError:
        raise CheckpointError(f"Checkpoint not found: {path}")
    except json.JSONDecodeError as e:
        raise CheckpointError(f"Checkpoint {path} is not valid JSON: {e}") from e
    return Checkpoint.from_dict(data, config)
