"""Stochastic policy trained against an external per-step reward function.

The trainer is a compact clipped-surrogate policy gradient: synchronized
rollouts over several environment copies, generalized advantage
estimation, a few epochs of minibatch updates with Adam, advantage
normalization over the collected batch, and running normalization of both
observations and the (predicted) rewards. Discrete environments get a
categorical head, continuous ones a diagonal Gaussian with a global
log-std bounded to [-5, 2].

The only reward the trainer ever sees is ``reward_fn(obs, act_enc)``;
environment true rewards are used exclusively by ``evaluate_policy``.
All randomness flows from explicit seeds, so training is bit-reproducible
on one platform.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, asdict
from pathlib import Path

import numpy as np

from ._mlp import MLP, Adam
from . import envs
from .envs import EnvSpec

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class PolicyConfig:
    hidden_layers: tuple[int, int] = (64, 64)
    gamma: float = 0.99
    gae_lambda: float = 0.95
    steps_per_round: int = 20000
    clip_ratio: float = 0.2
    value_coeff: float = 0.5
    entropy_coeff: float = 0.01
    learning_rate: float = 3e-4
    update_epochs: int = 4
    minibatch_size: int = 512
    n_envs: int = 16
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must be in (0, 1]")
        if self.steps_per_round < 1:
            raise ValueError("steps_per_round must be positive")


class RunningNorm:
    """Streaming mean/variance with deterministic batched updates."""

    def __init__(self, dim: int):
        self.count = 0.0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, batch: np.ndarray) -> None:
        batch = np.atleast_2d(batch)
        n = batch.shape[0]
        if n == 0:
            return
        b_mean = batch.mean(axis=0)
        b_m2 = ((batch - b_mean) ** 2).sum(axis=0)
        delta = b_mean - self.mean
        total = self.count + n
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + b_m2 + delta**2 * (self.count * n / total)
        self.count = total

    @property
    def std(self) -> np.ndarray:
        if self.count < 2:
            return np.ones_like(self.mean)
        return np.sqrt(np.maximum(self.m2 / self.count, 1e-12))

    def normalize(self, batch: np.ndarray) -> np.ndarray:
        if self.count < 2:
            return batch
        return np.clip((batch - self.mean) / self.std, -10.0, 10.0)

    def state(self) -> dict:
        return {"count": self.count, "mean": self.mean.tolist(), "m2": self.m2.tolist()}

    def load_state(self, state: dict) -> None:
        self.count = float(state["count"])
        self.mean = np.asarray(state["mean"], dtype=np.float64)
        self.m2 = np.asarray(state["m2"], dtype=np.float64)


@dataclass
class Policy:
    spec: EnvSpec
    actor: MLP
    critic: MLP
    log_std: np.ndarray  # continuous action envs only
    obs_norm: RunningNorm
    reward_norm: RunningNorm
    update_count: int = 0

    @property
    def discrete(self) -> bool:
        return self.spec.action_kind == "discrete"

    def _dist_params(self, normed_obs: np.ndarray) -> np.ndarray:
        return self.actor(normed_obs)

    def act(self, obs: np.ndarray, rng: np.random.Generator):
        """Sample (action, log_prob, value) for a single raw observation."""
        normed = self.obs_norm.normalize(obs[None, :])
        out = self._dist_params(normed)[0]
        value = float(self.critic(normed)[0, 0])
        if self.discrete:
            logits = out - out.max()
            probs = np.exp(logits)
            probs /= probs.sum()
            action = int(rng.choice(probs.size, p=probs))
            return action, float(np.log(probs[action])), value
        std = np.exp(self.log_std)
        noise = rng.standard_normal(out.shape)
        action = out + std * noise
        logp = float(
            (-0.5 * ((action - out) / std) ** 2 - self.log_std - 0.5 * _LOG_2PI).sum()
        )
        return action, logp, value

    def action_fn(self):
        """Adapter for envs.rollout: (obs, rng) -> action."""

        def fn(obs, rng):
            return self.act(obs, rng)[0]

        return fn


def init_policy(spec: EnvSpec, config: PolicyConfig, seed: int | None = None) -> Policy:
    ss = np.random.SeedSequence(config.seed if seed is None else seed)
    actor_rng, critic_rng = (np.random.default_rng(c) for c in ss.spawn(2))
    out_dim = spec.action_dim
    actor = MLP([spec.obs_dim, *config.hidden_layers, out_dim], actor_rng)
    actor.weights[-1] *= 0.01  # near-uniform initial action distribution
    critic = MLP([spec.obs_dim, *config.hidden_layers, 1], critic_rng)
    return Policy(
        spec=spec,
        actor=actor,
        critic=critic,
        log_std=np.full(out_dim, -0.5) if spec.action_kind == "continuous" else np.zeros(0),
        obs_norm=RunningNorm(spec.obs_dim),
        reward_norm=RunningNorm(1),
    )


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _log_probs_entropy(policy: Policy, normed_obs, actions):
    """Batched log pi(a|s), entropy, and the caches needed for backprop."""
    out, cache = policy.actor.forward(normed_obs)
    if policy.discrete:
        probs = _softmax(out)
        logp = np.log(probs[np.arange(len(actions)), actions])
        entropy = -(probs * np.log(probs + 1e-12)).sum(axis=1)
        return logp, entropy, (cache, probs, out)
    std = np.exp(policy.log_std)
    diff = actions - out
    logp = (-0.5 * (diff / std) ** 2 - policy.log_std - 0.5 * _LOG_2PI).sum(axis=1)
    entropy = np.full(len(actions), float((policy.log_std + 0.5 * (_LOG_2PI + 1.0)).sum()))
    return logp, entropy, (cache, diff, std)


def collect_rollouts(policy: Policy, spec: EnvSpec, reward_fn, config: PolicyConfig, seed: int):
    """Synchronized rollout collection across n_envs copies.

    Rewards come exclusively from reward_fn(raw_obs_batch, act_enc_batch).
    Returns the flattened training batch plus bookkeeping stats.
    """
    n_envs = config.n_envs
    steps = max(1, config.steps_per_round // n_envs)
    rng = np.random.default_rng((seed, 0xC0))
    reset_rng = np.random.default_rng((seed, 0x5E))

    states = [envs.reset(spec, int(reset_rng.integers(1 << 48))) for _ in range(n_envs)]
    obs_dim, act_w = spec.obs_dim, spec.action_enc_width

    obs_buf = np.empty((steps, n_envs, obs_dim))
    act_enc_buf = np.empty((steps, n_envs, act_w))
    actions_d = np.empty((steps, n_envs), dtype=np.int64)
    actions_c = np.empty((steps, n_envs, spec.action_dim))
    logp_buf = np.empty((steps, n_envs))
    value_buf = np.empty((steps, n_envs))
    reward_buf = np.empty((steps, n_envs))
    done_buf = np.zeros((steps, n_envs))

    episode_returns = []  # predicted-reward returns, for diagnostics only

    for t in range(steps):
        raw = np.stack([s.observation for s in states])
        policy.obs_norm.update(raw)
        normed = policy.obs_norm.normalize(raw)
        out = policy._dist_params(normed)
        values = policy.critic(normed)[:, 0]
        if policy.discrete:
            probs = _softmax(out)
            cdf = probs.cumsum(axis=1)
            u = rng.random((n_envs, 1))
            acts = (u > cdf).sum(axis=1)
            acts = np.minimum(acts, probs.shape[1] - 1)
            logp = np.log(probs[np.arange(n_envs), acts] + 1e-12)
            actions_d[t] = acts
        else:
            std = np.exp(policy.log_std)
            noise = rng.standard_normal(out.shape)
            acts = out + std * noise
            logp = (-0.5 * ((acts - out) / std) ** 2 - policy.log_std - 0.5 * _LOG_2PI).sum(
                axis=1
            )
            actions_c[t] = acts

        enc = np.stack(
            [
                envs.encode_action(spec, acts[i] if policy.discrete else acts[i])
                for i in range(n_envs)
            ]
        )
        rewards = np.asarray(reward_fn(raw, enc), dtype=np.float64).reshape(n_envs)

        obs_buf[t] = raw
        act_enc_buf[t] = enc
        logp_buf[t] = logp
        value_buf[t] = values
        reward_buf[t] = rewards

        for i in range(n_envs):
            nstate, _, done = envs.step(spec, states[i], acts[i])
            if done:
                done_buf[t, i] = 1.0
                states[i] = envs.reset(spec, int(reset_rng.integers(1 << 48)))
            else:
                states[i] = nstate

    final_raw = np.stack([s.observation for s in states])
    final_values = policy.critic(policy.obs_norm.normalize(final_raw))[:, 0]

    policy.reward_norm.update(reward_buf.reshape(-1, 1))
    normed_rewards = (reward_buf - policy.reward_norm.mean[0]) / (
        policy.reward_norm.std[0] + 1e-8
    )

    adv = np.zeros_like(reward_buf)
    lastgae = np.zeros(n_envs)
    for t in range(steps - 1, -1, -1):
        nonterminal = 1.0 - done_buf[t]
        next_value = final_values if t == steps - 1 else value_buf[t + 1]
        delta = normed_rewards[t] + config.gamma * next_value * nonterminal - value_buf[t]
        lastgae = delta + config.gamma * config.gae_lambda * nonterminal * lastgae
        adv[t] = lastgae
    returns = adv + value_buf

    batch = {
        "normed_obs": policy.obs_norm.normalize(obs_buf.reshape(-1, obs_dim)),
        "actions": (actions_d if policy.discrete else actions_c).reshape(
            -1, *(() if policy.discrete else (spec.action_dim,))
        ),
        "logp_old": logp_buf.reshape(-1),
        "advantages": adv.reshape(-1),
        "returns": returns.reshape(-1),
        "values_old": value_buf.reshape(-1),
    }
    stats = {
        "mean_pred_reward": float(reward_buf.mean()),
        "episodes_finished": int(done_buf.sum()),
    }
    return batch, stats


def train_policy(
    policy: Policy, spec: EnvSpec, reward_fn, config: PolicyConfig, seed: int | None = None
) -> dict:
    """One round of updates; mutates the policy in place, returns stats."""
    if seed is None:
        seed = config.seed
    batch, stats = collect_rollouts(policy, spec, reward_fn, config, seed)
    n = batch["advantages"].size
    adv = batch["advantages"]
    adv = (adv - adv.mean()) / (adv.std() + 1e-8)

    actor_params = policy.actor.param_arrays() + (
        [policy.log_std] if not policy.discrete else []
    )
    actor_opt = Adam(actor_params, config.learning_rate)
    critic_opt = Adam(policy.critic.param_arrays(), config.learning_rate)
    rng = np.random.default_rng((seed, 0xAD))

    losses = []
    for _ in range(config.update_epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.minibatch_size):
            idx = order[lo : lo + config.minibatch_size]
            mb_obs = batch["normed_obs"][idx]
            mb_act = batch["actions"][idx]
            mb_adv = adv[idx]
            mb_ret = batch["returns"][idx]
            mb_logp_old = batch["logp_old"][idx]
            m = idx.size

            logp, entropy, aux = _log_probs_entropy(policy, mb_obs, mb_act)
            ratio = np.exp(np.clip(logp - mb_logp_old, -20.0, 20.0))
            clipped = np.clip(ratio, 1.0 - config.clip_ratio, 1.0 + config.clip_ratio)
            u1 = ratio * mb_adv
            u2 = clipped * mb_adv
            surrogate = np.minimum(u1, u2)
            # gradient flows through the unclipped branch only where it is the min
            dlogp = -(mb_adv * ratio * (u1 <= u2)) / m

            vout, vcache = policy.critic.forward(mb_obs)
            verr = vout[:, 0] - mb_ret
            dvalue = (config.value_coeff * verr / m)[:, None]

            loss = float(
                -surrogate.mean()
                + config.value_coeff * 0.5 * (verr**2).mean()
                - config.entropy_coeff * entropy.mean()
            )
            if not np.isfinite(loss):
                raise RuntimeError(f"non-finite policy loss ({loss}); aborting update")
            losses.append(loss)

            if policy.discrete:
                cache, probs, _ = aux
                onehot = np.zeros_like(probs)
                onehot[np.arange(m), mb_act] = 1.0
                g_logits = dlogp[:, None] * (onehot - probs)
                logp_all = np.log(probs + 1e-12)
                dH = -probs * (logp_all + entropy[:, None])
                g_logits += (-config.entropy_coeff / m) * dH
                gw, gb, _ = policy.actor.backward(cache, g_logits)
                actor_opt.step(policy.actor.param_arrays(), _flatten_grads(gw, gb))
            else:
                cache, diff, std = aux
                g_mean = dlogp[:, None] * (diff / std**2)
                gw, gb, _ = policy.actor.backward(cache, g_mean)
                d_logstd = (dlogp[:, None] * ((diff / std) ** 2 - 1.0)).sum(axis=0)
                d_logstd += -config.entropy_coeff  # dH/dlog_std = 1 per dim, mean over batch
                actor_opt.step(
                    policy.actor.param_arrays() + [policy.log_std],
                    _flatten_grads(gw, gb) + [d_logstd],
                )
                np.clip(policy.log_std, LOG_STD_MIN, LOG_STD_MAX, out=policy.log_std)

            cw, cb, _ = policy.critic.backward(vcache, dvalue)
            critic_opt.step(policy.critic.param_arrays(), _flatten_grads(cw, cb))

    policy.update_count += 1
    stats["mean_update_loss"] = float(np.mean(losses))
    return stats


def _flatten_grads(gw, gb):
    out = []
    for w, b in zip(gw, gb):
        out.extend([w, b])
    return out


def evaluate_policy(policy_or_fn, spec: EnvSpec, episodes: int, seed: int):
    """Mean and std of true episode returns over seeded evaluation rollouts."""
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    fn = policy_or_fn.action_fn() if isinstance(policy_or_fn, Policy) else policy_or_fn
    seeds = np.random.SeedSequence(seed).generate_state(episodes)
    returns = []
    for ep_seed in seeds:
        traj = envs.rollout(spec, fn, int(ep_seed))
        returns.append(float(traj.true_rewards.sum()))
    returns = np.asarray(returns)
    return float(returns.mean()), float(returns.std()), returns


# -- checkpointing: flat binary + JSON sidecar -------------------------------

_MAGIC = b"PFPO"
_FORMAT_VERSION = 1


def _policy_arrays(policy: Policy) -> list[np.ndarray]:
    return policy.actor.param_arrays() + policy.critic.param_arrays() + [policy.log_std]


def save_policy(policy: Policy, config: PolicyConfig, path: str | Path) -> None:
    path = Path(path)
    arrays = _policy_arrays(policy)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<III", _FORMAT_VERSION, policy.spec.obs_dim, len(arrays)))
        for arr in arrays:
            fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    sidecar = {
        "config": {**asdict(config), "hidden_layers": list(config.hidden_layers)},
        "env": policy.spec.name,
        "episode_len": policy.spec.episode_len,
        "update_count": policy.update_count,
        "obs_norm": policy.obs_norm.state(),
        "reward_norm": policy.reward_norm.state(),
    }
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=1))


def load_policy(path: str | Path) -> tuple[Policy, PolicyConfig]:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    cfg_doc = dict(sidecar["config"])
    cfg_doc["hidden_layers"] = tuple(cfg_doc["hidden_layers"])
    config = PolicyConfig(**cfg_doc)
    spec = envs.spec_by_name(sidecar["env"], sidecar["episode_len"])
    policy = init_policy(spec, config)
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a policy checkpoint")
        version, obs_dim, n_arrays = struct.unpack("<III", fh.read(12))
        if version != _FORMAT_VERSION or obs_dim != spec.obs_dim:
            raise ValueError("checkpoint header mismatch")
        arrays = _policy_arrays(policy)
        if n_arrays != len(arrays):
            raise ValueError("checkpoint array count mismatch")
        for arr in arrays:
            buf = fh.read(arr.size * 8)
            arr[...] = np.frombuffer(buf, dtype=np.float64).reshape(arr.shape)
    policy.update_count = int(sidecar["update_count"])
    policy.obs_norm.load_state(sidecar["obs_norm"])
    policy.reward_norm.load_state(sidecar["reward_norm"])
    return policy, config
