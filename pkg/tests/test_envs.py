"""Environment contracts: reward tables by exhaustive enumeration, replay
oracles for trajectories and segments, determinism, frame rendering."""

import json

import numpy as np
import pytest

from preflab import envs
from preflab.envs import EnvState


def random_policy(obs, rng):
    return int(rng.integers(0, 4))


def grid_state(x, y, step_index=0):
    return EnvState(
        observation=envs._grid_obs(x, y), step_index=step_index, done=False, rng_state=0
    )


class TestGridWorldStep:
    def test_reward_table_by_exhaustive_enumeration(self):
        spec = envs.gridworld_spec()
        moves = {0: (0, 1), 1: (1, 0), 2: (0, -1), 3: (-1, 0)}
        for x in range(8):
            for y in range(8):
                if (x, y) == (7, 7):
                    continue
                for a in range(4):
                    dx, dy = moves[a]
                    nx = min(max(x + dx, 0), 7)
                    ny = min(max(y + dy, 0), 7)
                    expected_reward = 10.0 if (nx, ny) == (7, 7) else -0.1
                    nstate, reward, done = envs.step(spec, grid_state(x, y), a)
                    assert reward == expected_reward, f"cell {(x,y)} action {a}"
                    assert done == ((nx, ny) == (7, 7))
                    assert envs._grid_cell(nstate.observation) == (nx, ny)

    def test_adjacent_to_goal_moving_in_terminates_with_bonus(self):
        spec = envs.gridworld_spec()
        _, reward, done = envs.step(spec, grid_state(6, 7), 1)
        assert reward == 10.0 and done

    def test_stepping_done_state_raises(self):
        spec = envs.gridworld_spec()
        state, _, done = envs.step(spec, grid_state(6, 7), 1)
        assert done
        with pytest.raises(RuntimeError):
            envs.step(spec, state, 0)

    def test_horizon_truncates(self):
        spec = envs.gridworld_spec(episode_len=3)
        state = grid_state(0, 0)
        for k in range(3):
            state, _, done = envs.step(spec, state, 3)  # bump the wall
        assert done and state.step_index == 3


class TestMountainCar:
    def test_reset_distribution_over_1000_seeds(self):
        spec = envs.mountaincar_spec()
        positions = []
        for seed in range(1000):
            state = envs.reset(spec, seed)
            positions.append(state.observation[0])
            assert state.observation[1] == 0.0
            assert state.step_index == 0 and not state.done
        positions = np.asarray(positions)
        assert positions.min() >= -0.6 and positions.max() <= -0.4
        assert positions.std() > 0.03  # actually spread over the interval

    def test_scripted_policy_reaches_goal_with_bonus(self):
        spec = envs.mountaincar_spec()

        def bang(obs, rng):
            return np.array([1.0 if obs[1] >= 0 else -1.0])

        traj = envs.rollout(spec, bang, seed=3)
        assert len(traj) < spec.episode_len  # terminated on the goal
        # final step pays +100 minus the action cost
        assert traj.true_rewards[-1] == pytest.approx(100.0 - 0.1, abs=1e-12)
        assert traj.true_rewards.sum() > 80

    def test_hill_height_formula_spot_checks(self):
        for pos in (-1.0, -0.5, 0.45):
            assert envs.hill_height(pos) == pytest.approx(
                np.sin(3 * pos) * 0.45 + 0.55, abs=1e-12
            )


class TestDeterminism:
    @pytest.mark.parametrize("name", ["gridworld", "mountaincar"])
    def test_reset_is_deterministic(self, name):
        spec = envs.spec_by_name(name)
        a = envs.reset(spec, 7)
        b = envs.reset(spec, 7)
        assert np.array_equal(a.observation, b.observation)

    def test_rollout_bytes_identical(self):
        spec = envs.gridworld_spec()
        t1 = envs.rollout(spec, random_policy, seed=5)
        t2 = envs.rollout(spec, random_policy, seed=5)
        assert np.array_equal(t1.states, t2.states)
        assert np.array_equal(t1.actions, t2.actions)
        assert np.array_equal(t1.true_rewards, t2.true_rewards)


def replay_rewards(spec, traj):
    """Independent oracle: re-run the dynamics over the recorded steps."""
    out = []
    for t in range(len(traj)):
        if spec.action_kind == "discrete":
            action = int(traj.actions[t].argmax())
        else:
            action = traj.actions[t]
        state = EnvState(
            observation=traj.states[t], step_index=t, done=False, rng_state=0
        )
        _, reward, _ = envs.step(spec, state, action)
        out.append(reward)
    return np.asarray(out)


@pytest.mark.parametrize("name", ["gridworld", "mountaincar"])
def test_rollout_rewards_match_replay_oracle(name):
    spec = envs.spec_by_name(name)

    def policy(obs, rng):
        if spec.action_kind == "discrete":
            return int(rng.integers(0, spec.action_dim))
        return rng.uniform(-1, 1, size=spec.action_dim)

    traj = envs.rollout(spec, policy, seed=11)
    assert np.allclose(traj.true_rewards, replay_rewards(spec, traj), atol=1e-12)


class TestSampleSegments:
    def _trajectories(self, n=10, seed0=100):
        spec = envs.gridworld_spec()
        trajs = []
        seed = seed0
        while len(trajs) < n:
            t = envs.rollout(spec, random_policy, seed=seed)
            seed += 1
            if len(t) >= 25:
                trajs.append(t)
        return spec, trajs

    def test_counts_and_lengths(self):
        _, trajs = self._trajectories()
        behaviors = envs.sample_segments(trajs, 25, 150, seed=0)
        assert len(behaviors) == 150
        assert all(len(b) == 25 for b in behaviors)
        assert len({b.id for b in behaviors}) == 150

    def test_requesting_more_than_distinct_pairs_errors(self):
        _, trajs = self._trajectories(n=2)
        available = sum(len(t) - 25 + 1 for t in trajs)
        with pytest.raises(ValueError):
            envs.sample_segments(trajs, 25, available + 1, seed=0)

    def test_true_return_matches_replay_oracle(self):
        spec, trajs = self._trajectories(n=4)
        behaviors = envs.sample_segments(trajs, 25, 40, seed=1)
        by_seed = {t.seed: t for t in trajs}
        for b in behaviors:
            traj = by_seed[b.source[0]]
            start = b.source[1]
            replayed = replay_rewards(spec, traj)[start : start + 25]
            assert b.true_return == pytest.approx(replayed.sum(), abs=1e-12)

    def test_short_trajectory_rejected(self):
        spec = envs.gridworld_spec()
        traj = envs.rollout(spec, random_policy, seed=0)
        with pytest.raises(ValueError):
            envs.sample_segments([traj], len(traj) + 1, 1, seed=0)


class TestFrames:
    def test_gridworld_frames_decode_cells(self):
        spec = envs.gridworld_spec()
        trajs = [envs.rollout(spec, random_policy, seed=s) for s in range(40)]
        trajs = [t for t in trajs if len(t) >= 12]
        behavior = envs.sample_segments(trajs, 12, 1, seed=2)[0]
        frames = envs.render_frames(spec, behavior)
        assert len(frames) == 12
        for frame, row in zip(frames, behavior.states):
            assert frame["agent"] == [round(row[0] * 7), round(row[1] * 7)]
            assert frame["goal"] == [7, 7]
        doc = envs.frames_document(spec, behavior)
        assert doc["env"] == "gridworld"
        assert json.dumps(doc)  # serializable

    def test_mountaincar_frames_use_hill_height(self):
        spec = envs.mountaincar_spec()

        def wiggle(obs, rng):
            return rng.uniform(-1, 1, size=1)

        traj = envs.rollout(spec, wiggle, seed=4)
        behavior = envs.sample_segments([traj], 25, 1, seed=0)[0]
        frames = envs.render_frames(spec, behavior)
        assert len(frames) == 25
        for frame, row in zip(frames, behavior.states):
            assert frame["x"] == row[0]
            assert frame["height"] == pytest.approx(envs.hill_height(row[0]))


def test_reward_input_width_matches_spec():
    for name in ("gridworld", "mountaincar"):
        spec = envs.spec_by_name(name)

        def policy(obs, rng):
            if spec.action_kind == "discrete":
                return int(rng.integers(0, spec.action_dim))
            return rng.uniform(-1, 1, size=spec.action_dim)

        traj = envs.rollout(spec, policy, seed=1)
        assert traj.states.shape[1] + traj.actions.shape[1] == spec.reward_input_dim


def test_trajectory_jsonl_roundtrip():
    spec = envs.gridworld_spec()
    trajs = [envs.rollout(spec, random_policy, seed=s) for s in (1, 2)]
    text = envs.trajectories_to_jsonl(trajs)
    assert len(text.strip().splitlines()) == 2
    back = envs.trajectories_from_jsonl(text)
    for orig, loaded in zip(trajs, back):
        assert np.array_equal(orig.states, loaded.states)
        assert np.array_equal(orig.true_rewards, loaded.true_rewards)


def test_gridworld_episode_return_bounds():
    spec = envs.gridworld_spec()
    for seed in range(30):
        traj = envs.rollout(spec, random_policy, seed=seed)
        total = traj.true_rewards.sum()
        assert -0.1 * spec.episode_len <= total <= 10.0
