"""Tests for the policy-to-actuator command pipeline."""

import csv

import numpy as np
import pytest

from aen_td3.core.deploy import (
    CommandInterpolator,
    interpolate,
    read_actions,
    run_pipeline,
    safety_filter,
    write_command_stream,
)
from aen_td3.errors import ConfigError, PreconditionError, ShapeError
from aen_td3.schema import InterpolationConfig

DEFAULT = InterpolationConfig()
# k = 4 keeps every ramp fraction exact in binary
QUARTERS = InterpolationConfig(policy_rate_hz=5.0, control_rate_hz=20.0, max_step_delta=0.25)


class TestInterpolate:
    def test_ramp_to_bound(self):
        commands = interpolate(np.zeros(2), np.full(2, 0.04), DEFAULT)
        assert len(commands) == 5
        expected = [0.008, 0.016, 0.024, 0.032, 0.040]
        for command, value in zip(commands, expected):
            assert np.allclose(command, value, rtol=0, atol=1e-15)

    def test_last_command_is_exactly_the_next_action(self):
        nxt = np.array([0.0371, -0.0129, 0.0033])
        assert np.array_equal(interpolate(np.array([0.011, 0.02, -0.04]), nxt, DEFAULT)[-1], nxt)

    def test_constant_action_repeats(self):
        a = np.array([0.01, -0.02])
        for command in interpolate(a, a, DEFAULT):
            assert np.array_equal(command, a)

    def test_vectors_interpolate_componentwise(self):
        prev, nxt = np.array([0.0, 0.01, -0.03]), np.array([0.04, -0.02, 0.0])
        joint = interpolate(prev, nxt, DEFAULT)
        for i in range(3):
            alone = interpolate(prev[i:i + 1], nxt[i:i + 1], DEFAULT)
            assert np.array_equal([c[i] for c in joint], [c[0] for c in alone])

    def test_non_integer_rate_ratio(self):
        with pytest.raises(ConfigError):
            interpolate(np.zeros(1), np.ones(1), InterpolationConfig(policy_rate_hz=3.0, control_rate_hz=20.0))

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            interpolate(np.zeros(2), np.zeros(3), DEFAULT)


class TestSafetyFilter:
    def test_unchanged_command_accepted(self):
        assert safety_filter(np.array([0.02, 0.01]), np.array([0.02, 0.01]), DEFAULT)

    def test_large_change_rejected(self):
        assert not safety_filter(np.zeros(2), np.array([0.0, 0.02]), DEFAULT)

    def test_empty_commands_are_a_shape_error(self):
        with pytest.raises(ShapeError):
            safety_filter(np.zeros(0), np.zeros(0), DEFAULT)

    def test_pipeline_rejects_empty_actions(self):
        with pytest.raises(ShapeError):
            run_pipeline([np.zeros(0), np.zeros(0)], DEFAULT, quiet=True)

    def test_boundary_is_inclusive(self):
        commands = interpolate(np.zeros(3), np.ones(3), QUARTERS)
        prev = np.zeros(3)
        for command in commands:
            assert np.max(np.abs(command - prev)) == 0.25
            assert safety_filter(prev, command, QUARTERS)
            prev = command


class TestPipeline:
    def test_two_actions_give_k_commands(self):
        stream = run_pipeline([np.zeros(6), np.full(6, 0.01)], DEFAULT)
        assert len(stream) == 5
        assert [r.timestamp for r in stream.records] == [t / 20.0 for t in range(1, 6)]

    def test_smooth_sequence_is_never_rejected(self):
        actions = [np.full(2, 0.01 * np.sin(0.3 * t)) for t in range(40)]
        stream = run_pipeline(actions, DEFAULT)
        assert len(stream) == 5 * 39
        assert stream.rejected_count == 0

    def test_abrupt_jump_is_rejected_and_held(self, capsys):
        actions = [np.zeros(1), np.zeros(1), np.full(1, 0.06), np.full(1, 0.06)]
        stream = run_pipeline(actions, DEFAULT)
        assert stream.rejected_count >= 1
        emitted = [r.command for r in stream.emitted()]
        previous = np.zeros(1)
        for command in emitted:
            assert np.max(np.abs(command - previous)) <= DEFAULT.max_step_delta
            previous = command
        assert "WARNING" in capsys.readouterr().out

    def test_rejections_compare_against_last_emitted_command(self):
        # ramp 0 -> 0.08 steps by 0.016; every step exceeds 0.01 from the held 0
        stream = run_pipeline([np.zeros(1), np.full(1, 0.08)], DEFAULT, quiet=True)
        assert stream.rejected_count == 5
        assert stream.rejection_runs() == [(0, 5)]

    def test_quiet_suppresses_warnings(self, capsys):
        run_pipeline([np.zeros(1), np.full(1, 0.08)], DEFAULT, quiet=True)
        assert capsys.readouterr().out == ""

    def test_single_action_gives_empty_stream(self):
        assert len(run_pipeline([np.zeros(2)], DEFAULT)) == 0

    def test_no_actions_is_a_precondition_error(self):
        with pytest.raises(PreconditionError):
            run_pipeline([], DEFAULT)

    def test_streaming_matches_batch(self):
        gen = np.random.default_rng(4)
        actions = [gen.uniform(-0.04, 0.04, size=3) for _ in range(12)]
        interpolator = CommandInterpolator(DEFAULT, quiet=True)
        records = [r for a in actions for r in interpolator.feed(a)]
        batch = run_pipeline(actions, DEFAULT, quiet=True)
        assert [r.accepted for r in records] == [r.accepted for r in batch.records]
        assert all(np.array_equal(a.command, b.command) for a, b in zip(records, batch.records))


class TestFiles:
    def test_read_actions_skips_header(self, tmp_path):
        path = tmp_path / "actions.csv"
        path.write_text("a0,a1\n0.0,0.01\n0.02,-0.01\n")
        actions = read_actions(path)
        assert len(actions) == 2
        assert np.array_equal(actions[1], [0.02, -0.01])

    def test_header_after_blank_lines_is_skipped(self, tmp_path):
        path = tmp_path / "actions.csv"
        path.write_text("\n  \n,\na0,a1\n0.0,0.01\n\n0.02,-0.01\n")
        actions = read_actions(path)
        assert len(actions) == 2
        assert np.array_equal(actions[0], [0.0, 0.01])

    def test_only_the_first_non_blank_row_may_be_a_header(self, tmp_path):
        path = tmp_path / "actions.csv"
        path.write_text("\na0,a1\nb0,b1\n0.0,0.01\n")
        with pytest.raises(ShapeError):
            read_actions(path)

    def test_read_actions_rejects_ragged_rows(self, tmp_path):
        path = tmp_path / "actions.csv"
        path.write_text("0.0,0.01\n0.02\n")
        with pytest.raises(ShapeError):
            read_actions(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(PreconditionError):
            read_actions(tmp_path / "absent.csv")

    def test_command_stream_csv(self, tmp_path):
        stream = run_pipeline([np.zeros(2), np.full(2, 0.04)], DEFAULT, quiet=True)
        path = write_command_stream(tmp_path / "out" / "commands.csv", stream)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["timestamp", "c0", "c1", "accepted"]
        assert len(rows) == 6
        assert {row[-1] for row in rows[1:]} <= {"true", "false"}
        assert float(rows[-1][1]) == float(stream.records[-1].command[0])


class TestDesignedSequence:
    """Four-segment pattern repeated: smooth rise, jump, return, smooth fall."""

    def build(self, repeats=25):
        actions, value = [np.zeros(2)], 0.0
        for _ in range(repeats):
            for nxt in (value + 0.04, value + 0.14, value + 0.04, value):
                actions.append(np.full(2, nxt))
        return actions

    def test_exactly_the_constructed_substeps_are_rejected(self):
        actions = self.build()
        stream = run_pipeline(actions, DEFAULT, quiet=True)
        assert len(stream) == 5 * 100
        # a jump rejects all five substeps, the return rejects four
        assert stream.rejected_count == 25 * 9
        for start, length in stream.rejection_runs():
            assert length == 9
            assert start % 20 == 5

    def test_segments_have_constant_steps_and_exact_endpoints(self):
        actions = self.build(repeats=5)
        stream = run_pipeline(actions, DEFAULT, quiet=True)
        commands = [r.command for r in stream.records]
        for segment in range(len(actions) - 1):
            chunk = [actions[segment]] + commands[5 * segment:5 * segment + 5]
            assert np.array_equal(chunk[-1], actions[segment + 1])
            steps = np.diff(np.array(chunk), axis=0)
            assert np.allclose(steps, (actions[segment + 1] - actions[segment]) / 5, rtol=0, atol=1e-15)
