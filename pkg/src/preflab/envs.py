"""Small deterministic RL environments with known true rewards.

Two environments are provided:

* ``gridworld``: an 8x8 grid with a fixed goal at (7, 7) and a seeded
  uniform-random start cell. Four discrete actions (north, east, south,
  west); moving off the grid leaves the agent in place. Every non-goal
  transition costs -0.1; the transition that enters the goal pays +10 and
  ends the episode. Observation is (x/7, y/7, goal_x/7, goal_y/7,
  manhattan/14); actions encode one-hot, so reward-model inputs are
  5 + 4 = 9 wide.

* ``mountaincar``: the classic continuous mountain car. Observation is
  (position, velocity); one continuous action in [-1, 1]. Dynamics:
  v += 0.0015*a - 0.0025*cos(3p), both clipped to their usual ranges.
  Reaching position >= 0.45 pays +100 and ends the episode; every step
  costs 0.1*a^2. Reward-model inputs are 2 + 1 = 3 wide.

All dynamics are deterministic; randomness enters only through ``reset``
(start cell / start position) and through whatever policy drives
``rollout``. Frames for the UI are plain dicts: grid cells for gridworld,
the car's x plus the hill height ``sin(3x)*0.45 + 0.55`` for mountaincar.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

GRID_SIZE = 8
GRID_GOAL = (7, 7)
GRID_STEP_REWARD = -0.1
GRID_GOAL_REWARD = 10.0
# (dx, dy) for north, east, south, west
GRID_MOVES = ((0, 1), (1, 0), (0, -1), (-1, 0))

MC_POWER = 0.0015
MC_GRAVITY = 0.0025
MC_MIN_POS, MC_MAX_POS = -1.2, 0.6
MC_MAX_SPEED = 0.07
MC_GOAL_POS = 0.45
MC_GOAL_REWARD = 100.0
MC_ACTION_COST = 0.1


@dataclass(frozen=True)
class EnvSpec:
    name: str  # "gridworld" | "mountaincar"
    obs_dim: int
    action_dim: int
    action_kind: str  # "discrete" | "continuous"
    episode_len: int
    reward_input_dim: int

    def __post_init__(self):
        if self.episode_len <= 0:
            raise ValueError("episode_len must be positive")

    @property
    def action_enc_width(self) -> int:
        return self.reward_input_dim - self.obs_dim


def gridworld_spec(episode_len: int = 64) -> EnvSpec:
    return EnvSpec("gridworld", 5, 4, "discrete", episode_len, 9)


def mountaincar_spec(episode_len: int = 200) -> EnvSpec:
    return EnvSpec("mountaincar", 2, 1, "continuous", episode_len, 3)


def spec_by_name(name: str, episode_len: int | None = None) -> EnvSpec:
    if name == "gridworld":
        return gridworld_spec(episode_len or 64)
    if name == "mountaincar":
        return mountaincar_spec(episode_len or 200)
    raise ValueError(f"unknown environment: {name!r}")


@dataclass(frozen=True)
class EnvState:
    observation: np.ndarray
    step_index: int
    done: bool
    rng_state: int  # seed that produced this episode; dynamics are deterministic


@dataclass(frozen=True)
class Trajectory:
    states: np.ndarray  # (T, obs_dim)
    actions: np.ndarray  # (T, action_enc_width)
    true_rewards: np.ndarray  # (T,)
    seed: int

    def __len__(self) -> int:
        return self.states.shape[0]


@dataclass(frozen=True, eq=False)
class Behavior:
    id: str
    states: np.ndarray  # (L, obs_dim)
    actions: np.ndarray  # (L, action_enc_width)
    true_return: float
    round_index: int
    source: tuple[int, int] = field(default=(0, 0))  # (trajectory seed, start step)

    def __len__(self) -> int:
        return self.states.shape[0]


def _grid_obs(x: int, y: int) -> np.ndarray:
    gx, gy = GRID_GOAL
    manhattan = abs(gx - x) + abs(gy - y)
    return np.array(
        [x / 7.0, y / 7.0, gx / 7.0, gy / 7.0, manhattan / 14.0], dtype=np.float64
    )


def _grid_cell(obs) -> tuple[int, int]:
    return int(round(float(obs[0]) * 7)), int(round(float(obs[1]) * 7))


def hill_height(position: float) -> float:
    """Height of the mountain-car hill at a given x position."""
    return float(np.sin(3.0 * position) * 0.45 + 0.55)


def reset(spec: EnvSpec, seed: int) -> EnvState:
    rng = np.random.default_rng(seed)
    if spec.name == "gridworld":
        goal = GRID_GOAL
        while True:
            x = int(rng.integers(0, GRID_SIZE))
            y = int(rng.integers(0, GRID_SIZE))
            if (x, y) != goal:
                break
        obs = _grid_obs(x, y)
    else:
        pos = -0.6 + 0.2 * float(rng.random())
        obs = np.array([pos, 0.0], dtype=np.float64)
    return EnvState(observation=obs, step_index=0, done=False, rng_state=seed)


def encode_action(spec: EnvSpec, action) -> np.ndarray:
    """Encode an action as the fixed-width vector reward models consume."""
    if spec.action_kind == "discrete":
        a = int(action)
        if not 0 <= a < spec.action_dim:
            raise ValueError(f"discrete action {a} out of range")
        enc = np.zeros(spec.action_dim, dtype=np.float64)
        enc[a] = 1.0
        return enc
    a = np.asarray(action, dtype=np.float64).reshape(-1)
    if a.shape[0] != spec.action_dim:
        raise ValueError("continuous action has wrong dimensionality")
    return np.clip(a, -1.0, 1.0)


def step(spec: EnvSpec, state: EnvState, action) -> tuple[EnvState, float, bool]:
    if state.done:
        raise RuntimeError("cannot step a finished episode")
    if spec.name == "gridworld":
        x, y = _grid_cell(state.observation)
        a = int(action)
        if not 0 <= a < 4:
            raise ValueError(f"discrete action {a} out of range")
        dx, dy = GRID_MOVES[a]
        nx = min(max(x + dx, 0), GRID_SIZE - 1)
        ny = min(max(y + dy, 0), GRID_SIZE - 1)
        reached = (nx, ny) == GRID_GOAL
        reward = GRID_GOAL_REWARD if reached else GRID_STEP_REWARD
        nstep = state.step_index + 1
        done = reached or nstep >= spec.episode_len
        nobs = _grid_obs(nx, ny)
    else:
        pos, vel = float(state.observation[0]), float(state.observation[1])
        a = float(np.clip(np.asarray(action, dtype=np.float64).reshape(-1)[0], -1.0, 1.0))
        vel += MC_POWER * a - MC_GRAVITY * np.cos(3.0 * pos)
        vel = float(np.clip(vel, -MC_MAX_SPEED, MC_MAX_SPEED))
        pos += vel
        pos = float(np.clip(pos, MC_MIN_POS, MC_MAX_POS))
        if pos <= MC_MIN_POS and vel < 0.0:
            vel = 0.0
        reached = pos >= MC_GOAL_POS
        reward = -MC_ACTION_COST * a * a + (MC_GOAL_REWARD if reached else 0.0)
        nstep = state.step_index + 1
        done = reached or nstep >= spec.episode_len
        nobs = np.array([pos, vel], dtype=np.float64)
    nstate = EnvState(observation=nobs, step_index=nstep, done=done, rng_state=state.rng_state)
    return nstate, float(reward), done


def rollout(spec: EnvSpec, policy, seed: int) -> Trajectory:
    """Run one episode with ``policy(obs, rng) -> action``; fully seeded."""
    rng = np.random.default_rng(seed ^ 0x5EED)
    state = reset(spec, seed)
    states, actions, rewards = [], [], []
    while not state.done:
        action = policy(state.observation, rng)
        enc = encode_action(spec, action)
        states.append(state.observation)
        actions.append(enc)
        state, reward, _ = step(spec, state, action)
        rewards.append(reward)
    return Trajectory(
        states=np.asarray(states, dtype=np.float64).reshape(len(states), spec.obs_dim),
        actions=np.asarray(actions, dtype=np.float64).reshape(len(actions), spec.action_enc_width),
        true_rewards=np.asarray(rewards, dtype=np.float64),
        seed=seed,
    )


def sample_segments(
    trajectories: list[Trajectory],
    segment_len: int,
    count: int,
    seed: int,
    round_index: int = 0,
) -> list[Behavior]:
    """Sample ``count`` distinct (trajectory, start) segments uniformly."""
    if count < 1:
        raise ValueError("count must be >= 1")
    candidates = []
    for ti, traj in enumerate(trajectories):
        if len(traj) < segment_len:
            raise ValueError(
                f"trajectory {ti} is shorter ({len(traj)}) than segment_len {segment_len}"
            )
        for start in range(len(traj) - segment_len + 1):
            candidates.append((ti, start))
    if count > len(candidates):
        raise ValueError(
            f"requested {count} segments but only {len(candidates)} distinct "
            "(trajectory, start) pairs exist"
        )
    rng = np.random.default_rng(seed)
    picks = rng.choice(len(candidates), size=count, replace=False)
    behaviors = []
    for k, pick in enumerate(picks):
        ti, start = candidates[int(pick)]
        traj = trajectories[ti]
        sl = slice(start, start + segment_len)
        behaviors.append(
            Behavior(
                id=f"r{round_index:03d}b{k:03d}",
                states=traj.states[sl].copy(),
                actions=traj.actions[sl].copy(),
                true_return=float(traj.true_rewards[sl].sum()),
                round_index=round_index,
                source=(traj.seed, start),
            )
        )
    return behaviors


def render_frames(spec: EnvSpec, behavior: Behavior) -> list[dict]:
    frames = []
    if spec.name == "gridworld":
        for row in behavior.states:
            x, y = _grid_cell(row)
            frames.append({"agent": [x, y], "goal": [GRID_GOAL[0], GRID_GOAL[1]]})
    else:
        for row in behavior.states:
            pos = float(row[0])
            frames.append({"x": pos, "height": hill_height(pos)})
    return frames


def frames_document(spec: EnvSpec, behavior: Behavior) -> dict:
    """The JSON document the UI consumes: {"env": ..., "frames": [...]}."""
    return {"env": spec.name, "frames": render_frames(spec, behavior)}


def trajectories_to_jsonl(trajectories: list[Trajectory]) -> str:
    """One trajectory per line, arrays as nested lists."""
    lines = []
    for traj in trajectories:
        lines.append(
            json.dumps(
                {
                    "seed": traj.seed,
                    "states": traj.states.tolist(),
                    "actions": traj.actions.tolist(),
                    "true_rewards": traj.true_rewards.tolist(),
                }
            )
        )
    return "\n".join(lines) + "\n"


def trajectories_from_jsonl(text: str) -> list[Trajectory]:
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        doc = json.loads(line)
        out.append(
            Trajectory(
                states=np.asarray(doc["states"], dtype=np.float64),
                actions=np.asarray(doc["actions"], dtype=np.float64),
                true_rewards=np.asarray(doc["true_rewards"], dtype=np.float64),
                seed=int(doc["seed"]),
            )
        )
    return out


def reward_model_inputs(behavior: Behavior) -> np.ndarray:
    """(L, reward_input_dim) per-step inputs: concat(state, action encoding)."""
    return np.concatenate([behavior.states, behavior.actions], axis=1)


def shortest_path_return(start_obs: np.ndarray) -> float:
    """Best achievable gridworld episode return from a start observation."""
    x, y = _grid_cell(start_obs)
    d = abs(GRID_GOAL[0] - x) + abs(GRID_GOAL[1] - y)
    return GRID_GOAL_REWARD + GRID_STEP_REWARD * (d - 1)


def true_reward_fn(spec: EnvSpec):
    """Batched (obs, act_enc) -> true step rewards; bypasses any reward model.

    Used by sanity baselines and tests only; the RLHF loop never calls it.
    """
    if spec.name == "gridworld":

        def grid_fn(obs: np.ndarray, act_enc: np.ndarray) -> np.ndarray:
            x = np.rint(obs[:, 0] * 7).astype(np.int64)
            y = np.rint(obs[:, 1] * 7).astype(np.int64)
            a = act_enc.argmax(axis=1)
            moves = np.array(GRID_MOVES)
            nx = np.clip(x + moves[a, 0], 0, GRID_SIZE - 1)
            ny = np.clip(y + moves[a, 1], 0, GRID_SIZE - 1)
            reached = (nx == GRID_GOAL[0]) & (ny == GRID_GOAL[1])
            return np.where(reached, GRID_GOAL_REWARD, GRID_STEP_REWARD)

        return grid_fn

    def mc_fn(obs: np.ndarray, act_enc: np.ndarray) -> np.ndarray:
        pos, vel = obs[:, 0], obs[:, 1]
        a = np.clip(act_enc[:, 0], -1.0, 1.0)
        nvel = np.clip(
            vel + MC_POWER * a - MC_GRAVITY * np.cos(3.0 * pos), -MC_MAX_SPEED, MC_MAX_SPEED
        )
        npos = np.clip(pos + nvel, MC_MIN_POS, MC_MAX_POS)
        return -MC_ACTION_COST * a * a + np.where(npos >= MC_GOAL_POS, MC_GOAL_REWARD, 0.0)

    return mc_fn
