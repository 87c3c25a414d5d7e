"""Tests for the controller registry and the three controller modes."""

import numpy as np
import pytest

from aen_td3.controllers import (
    CentralizedController,
    DecentralizedController,
    ScriptedPartnerController,
    create_controller,
    get_controller_class,
    list_modes,
)
from aen_td3.core.env import reset, step
from aen_td3.core.nn import parameter_vector
from aen_td3.errors import CheckpointError, ModeError, PreconditionError
from aen_td3.schema import Mode


@pytest.fixture
def start(experiment_factory):
    return reset(experiment_factory().env, np.random.default_rng(0))


class TestRegistry:
    def test_all_modes_registered(self):
        assert sorted(list_modes()) == sorted(m.value for m in Mode)

    def test_lookup_by_enum_and_name(self):
        assert get_controller_class(Mode.CENTRALIZED_TD3) is CentralizedController
        assert get_controller_class("scripted_partner") is ScriptedPartnerController

    def test_unknown_mode(self):
        with pytest.raises(ModeError):
            get_controller_class("solo")

    @pytest.mark.parametrize("mode", list(Mode))
    def test_create_controller_builds_named_learners(self, experiment_factory, mode):
        controller = create_controller(experiment_factory(mode=mode), 0)
        assert controller.mode is mode
        assert list(controller.agents) == controller.learner_names()
        assert set(controller.buffers) == set(controller.agents)


class TestCentralized:
    def test_joint_action_split_between_effectors(self, experiment_factory, start):
        controller = create_controller(experiment_factory(mode=Mode.CENTRALIZED_TD3), 0)
        a1, a2 = controller.act(start, 0.0, 0)
        joint = controller.agent.select_action(start.as_vector(), 0.0, 0)
        assert np.array_equal(np.concatenate([a1, a2]), joint)

    def test_transition_has_no_partner_block(self, experiment_factory, start):
        config = experiment_factory(mode=Mode.CENTRALIZED_TD3)
        controller = create_controller(config, 0)
        actions = controller.act(start, 0.0, 0)
        result = step(start, actions, config.env)
        transition = controller.transitions(start, actions, result)["joint"]
        assert transition.state.shape == (4,)
        assert transition.own_action.shape == (4,)
        assert transition.estimated_partner_action.shape == (0,)

    def test_has_no_estimates(self, experiment_factory, start):
        controller = create_controller(experiment_factory(mode=Mode.CENTRALIZED_TD3), 0)
        assert controller.partner_estimates(start) == {}


class TestDecentralized:
    def test_learners_are_independent(self, experiment_factory):
        controller = create_controller(experiment_factory(), 0)
        a1, a2 = controller.agents["agent1"], controller.agents["agent2"]
        assert a1.networks is not a2.networks
        assert not np.array_equal(parameter_vector(a1.networks.actor), parameter_vector(a2.networks.actor))

    def test_each_agent_acts_on_its_own_state(self, experiment_factory, start):
        controller = create_controller(experiment_factory(), 0)
        a1, a2 = controller.act(start, 0.0, 0)
        own2 = start.effector_positions[1]
        assert np.array_equal(a2, controller.agents["agent2"].select_action(own2, 0.0, 0))
        assert np.array_equal(a1, controller.agents["agent1"].select_action(start.effector_positions[0], 0.0, 0))

    def test_transitions_store_own_view_and_estimate(self, experiment_factory, start):
        config = experiment_factory()
        controller = create_controller(config, 0)
        actions = controller.act(start, 0.01, np.random.default_rng(0))
        result = step(start, actions, config.env)
        transitions = controller.transitions(start, actions, result)
        estimates = controller.partner_estimates(start)

        t2 = transitions["agent2"]
        assert np.array_equal(t2.state, np.concatenate([start.effector_positions[1], start.effector_positions[0]]))
        assert np.array_equal(t2.own_action, actions[1])
        assert np.array_equal(t2.estimated_partner_action, estimates[2])
        assert not np.array_equal(t2.estimated_partner_action, actions[0])
        assert transitions["agent1"].reward == result.reward

    @staticmethod
    def filled(config, start, steps=12):
        controller = create_controller(config, 0)
        state = start
        gen = np.random.default_rng(1)
        for _ in range(steps):
            actions = controller.random_act(state, gen)
            result = step(state, actions, config.env)
            controller.record(state, actions, result)
            state = reset(config.env, gen) if result.done else result.next_state
        return controller

    def test_update_trains_both_learners(self, experiment_factory, start):
        controller = self.filled(experiment_factory(), start)
        controller.update(1, np.random.default_rng(1))
        assert all(agent.train_steps == 1 for agent in controller.agents.values())
        assert controller.train_steps == 1

    def test_filling_spans_episodes(self, experiment_factory, start):
        controller = self.filled(experiment_factory(horizon=5), start, steps=12)
        assert all(len(buffer) == 12 for buffer in controller.buffers.values())

    def test_learner_streams_are_independent(self, experiment_factory, start):
        config = experiment_factory()
        outcomes = []
        for agent1_seed in (10, 11):
            controller = self.filled(config, start)
            controller.update(1, {"agent1": np.random.default_rng(agent1_seed),
                                  "agent2": np.random.default_rng(20)})
            outcomes.append({name: parameter_vector(agent.networks.critic1)
                             for name, agent in controller.agents.items()})
        assert np.array_equal(outcomes[0]["agent2"], outcomes[1]["agent2"])
        assert not np.array_equal(outcomes[0]["agent1"], outcomes[1]["agent1"])

    def test_update_needs_a_stream_for_every_learner(self, experiment_factory, start):
        controller = self.filled(experiment_factory(), start)
        with pytest.raises(PreconditionError):
            controller.update(1, {"agent1": np.random.default_rng(0)})


class TestScripted:
    def test_partner_follows_the_script_without_noise(self, experiment_factory, start):
        controller = create_controller(experiment_factory(mode=Mode.SCRIPTED_PARTNER), 0)
        _, partner = controller.act(start, 0.0, 0)
        assert np.array_equal(partner, [0.0, 0.04])
        assert np.array_equal(controller.partner_action(start), [0.0, 0.04])

    def test_partner_explores_around_the_script(self, experiment_factory, start):
        config = experiment_factory(mode=Mode.SCRIPTED_PARTNER)
        controller = create_controller(config, 0)
        gen = np.random.default_rng(0)
        partners = np.array([controller.act(start, 0.01, gen)[1] for _ in range(200)]
                            + [controller.random_act(start, gen)[1] for _ in range(200)])
        assert np.all(np.abs(partners) <= 0.04)
        assert abs(partners[:, 0].mean()) < 0.003
        assert partners[:, 1].max() == 0.04
        assert partners[:, 1].min() < 0.04
        assert len(np.unique(partners[:, 0])) == len(partners)

    def test_transition_stores_the_executed_partner_action(self, experiment_factory, start):
        config = experiment_factory(mode=Mode.SCRIPTED_PARTNER)
        controller = create_controller(config, 0)
        actions = controller.act(start, 0.01, np.random.default_rng(0))
        result = step(start, actions, config.env)
        transition = controller.transitions(start, actions, result)["agent1"]
        assert np.array_equal(transition.own_action, actions[0])
        assert np.array_equal(transition.estimated_partner_action, actions[1])
        assert not np.array_equal(transition.estimated_partner_action, controller.partner_estimates(start)[1])

    def test_only_agent_one_learns(self, experiment_factory):
        controller = create_controller(experiment_factory(mode=Mode.SCRIPTED_PARTNER), 0)
        assert list(controller.agents) == ["agent1"]
        assert set(controller.partner_estimates(reset(controller.config.env, 0))) == {1}


class TestCheckpointPayload:
    def test_round_trip(self, experiment_factory):
        config = experiment_factory()
        controller = create_controller(config, 0)
        rebuilt = DecentralizedController.from_dict(controller.to_dict(), config)
        for name, agent in controller.agents.items():
            assert np.array_equal(parameter_vector(agent.networks.aen),
                                  parameter_vector(rebuilt.agents[name].networks.aen))

    def test_mode_mismatch(self, experiment_factory):
        config = experiment_factory()
        payload = create_controller(config, 0).to_dict()
        with pytest.raises(CheckpointError):
            ScriptedPartnerController.from_dict(payload, experiment_factory(mode=Mode.SCRIPTED_PARTNER))

    def test_width_mismatch(self, experiment_factory):
        payload = create_controller(experiment_factory(width=8), 0).to_dict()
        with pytest.raises(CheckpointError):
            DecentralizedController.from_dict(payload, experiment_factory(width=16))
