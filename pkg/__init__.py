"""
aen_td3 - Decentralized two-arm lifting with action estimation networks and TD3
"""

__version__ = "0.1.0"
__author__ = "aen-td3 contributors"

# Make key classes available at package level
from aen_td3.schema import ExperimentConfig, Hyperparams, EnvConfig, MetricsRecord, Mode
from aen_td3.core.agent import AenTd3Agent
from aen_td3.core.env import LiftEnv
from aen_td3.core.deploy import run_pipeline
from aen_td3.harness import run_training, run_eval, resume_finetune, export_summary

__all__ = [
    "ExperimentConfig",
    "Hyperparams",
    "EnvConfig",
    "MetricsRecord",
    "Mode",
    "AenTd3Agent",
    "LiftEnv",
    "run_pipeline",
    "run_training",
    "run_eval",
    "resume_finetune",
    "export_summary",
    "__version__",
]
