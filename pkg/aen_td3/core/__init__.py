"""Core engines for aen_td3."""

from .config import (
    config_manager,
    default_experiment,
    load_experiment,
)
from .nn import (
    Activation,
    Direction,
    LayerSpec,
    MlpNetwork,
    adam_step,
    backward,
    forward,
    init_network,
)
from .rl import (
    ReplayBuffer,
    TransitionBatch,
    buffer_push,
    buffer_sample,
    soft_update,
)
from .agent import (
    AenTd3Agent,
    centralized_td3_step,
    compute_td_target,
    estimate_partner_action,
    select_action,
    train_step,
)
from .env import (
    LiftEnv,
    reset,
    reward_fn,
    scripted_partner,
    state_partition,
    step,
)
from .deploy import (
    CommandInterpolator,
    interpolate,
    run_pipeline,
    safety_filter,
)
from .formatter import (
    SummaryFormatter,
    format_summary,
)

__all__ = [
    # Config
    "config_manager",
    "default_experiment",
    "load_experiment",
    # Networks
    "Activation",
    "Direction",
    "LayerSpec",
    "MlpNetwork",
    "adam_step",
    "backward",
    "forward",
    "init_network",
    # Off-policy plumbing
    "ReplayBuffer",
    "TransitionBatch",
    "buffer_push",
    "buffer_sample",
    "soft_update",
    # Agent
    "AenTd3Agent",
    "centralized_td3_step",
    "compute_td_target",
    "estimate_partner_action",
    "select_action",
    "train_step",
    # Environment
    "LiftEnv",
    "reset",
    "reward_fn",
    "scripted_partner",
    "state_partition",
    "step",
    # Deployment
    "CommandInterpolator",
    "interpolate",
    "run_pipeline",
    "safety_filter",
    # Formatting
    "SummaryFormatter",
    "format_summary",
]
