"""Shared fixtures for the aen_td3 test suite."""

import numpy as np
import pytest

from aen_td3.schema import ActionBounds, EnvConfig, ExperimentConfig, Hyperparams, Mode


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_hyper():
    """Hyperparameters small enough for a unit test to run many updates."""
    return Hyperparams(batch_n=16, episodes_M=2, horizon_T=5, buffer_capacity=500)


@pytest.fixture
def env_config():
    return EnvConfig()


def make_experiment(tmp_path, mode=Mode.DECENTRALIZED_AEN_TD3, episodes=2, horizon=5, width=8,
                    learning_starts=10, seeds=(0,), batch_n=8, buffer_capacity=1000, **hyper_overrides):
    """A tiny experiment writing into ``tmp_path``."""
    hyper = Hyperparams(batch_n=batch_n, episodes_M=episodes, horizon_T=horizon,
                        buffer_capacity=buffer_capacity, **hyper_overrides)
    env = EnvConfig(horizon_T=horizon, action_bounds=hyper.action_bounds, reset_noise=0.005)
    return ExperimentConfig(
        mode=mode,
        hyperparams=hyper,
        env=env,
        network_widths={m.value: width for m in Mode},
        seeds=seeds,
        learning_starts=learning_starts,
        metrics_path=str(tmp_path / "{mode}" / "metrics_seed{seed}.csv"),
        checkpoint_path=str(tmp_path / "{mode}" / "checkpoint_seed{seed}.json"),
    )


@pytest.fixture
def experiment_factory(tmp_path):
    def factory(**kwargs):
        return make_experiment(tmp_path, **kwargs)
    return factory


@pytest.fixture(scope="module")
def module_experiment_factory(tmp_path_factory):
    """Like ``experiment_factory`` but shared by every test of a module."""
    root = tmp_path_factory.mktemp("experiment")

    def factory(**kwargs):
        return make_experiment(root, **kwargs)
    return factory


@pytest.fixture
def unit_bounds():
    return ActionBounds.symmetric(1.0)
