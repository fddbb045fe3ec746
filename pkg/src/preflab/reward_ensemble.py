"""Per-step reward networks trained on preferences, plus their ensemble.

Each member maps concat(state, action encoding) to a scalar step reward;
a segment's predicted return is the sum over its steps. Preferences train
the nets through the Bradley-Terry link p = sigma(R_a - R_b) with
cross-entropy targets 1 / 0 / 0.5 for "a preferred" / "b preferred" /
tie. Members differ only by initialization and batch order, which is what
makes their disagreement a useful uncertainty signal.

Training is full-batch-shuffled mini-batch gradient descent with momentum
and early stopping on a 10% holdout (skipped when the holdout would be
empty). Everything is seeded, so runs are bit-reproducible.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np
from scipy.special import expit

from ._mlp import MLP, MomentumSGD
from .envs import Behavior

LOGIT_CLIP = 33.0  # keeps probabilities strictly inside (0, 1) in float64

# preference example: (segment a, segment b, target probability that a wins)
Example = tuple[Behavior, Behavior, float]

OUTCOME_TARGETS = {"i_preferred": 1.0, "j_preferred": 0.0, "tie": 0.5}


@dataclass(frozen=True)
class RewardNetConfig:
    input_dim: int
    hidden_layers: tuple[int, int] = (64, 64)
    ensemble_size: int = 3
    learning_rate: float = 1e-3
    momentum: float = 0.9
    epochs_per_round: int = 50
    batch_size: int = 16
    holdout_fraction: float = 0.1
    early_stop_patience: int = 10
    disagreement_mode: str = "probability"  # or "return"
    seed: int = 0

    def __post_init__(self):
        if self.ensemble_size < 2:
            raise ValueError("ensemble needs at least 2 members for disagreement")


@dataclass
class RewardNet:
    net: MLP
    member_seed: int


@dataclass
class Ensemble:
    members: list[RewardNet]
    config: RewardNetConfig


def init_ensemble(config: RewardNetConfig) -> Ensemble:
    children = np.random.SeedSequence(config.seed).spawn(config.ensemble_size)
    members = []
    for idx, child in enumerate(children):
        rng = np.random.default_rng(child)
        sizes = [config.input_dim, *config.hidden_layers, 1]
        members.append(RewardNet(net=MLP(sizes, rng), member_seed=idx))
    return Ensemble(members=members, config=config)


def _behavior_inputs(behavior: Behavior) -> np.ndarray:
    return np.concatenate([behavior.states, behavior.actions], axis=1)


def step_rewards(member: RewardNet, inputs: np.ndarray) -> np.ndarray:
    return member.net(inputs)[:, 0]


def predict_return(member: RewardNet, behavior: Behavior) -> float:
    x = _behavior_inputs(behavior)
    if x.shape[1] != member.net.sizes[0]:
        raise ValueError(
            f"behavior input width {x.shape[1]} != network input {member.net.sizes[0]}"
        )
    return float(step_rewards(member, x).sum())


def bt_probability(member: RewardNet, a: Behavior, b: Behavior) -> float:
    """P(a preferred over b) under the member's predicted returns."""
    logit = predict_return(member, a) - predict_return(member, b)
    return float(expit(np.clip(logit, -LOGIT_CLIP, LOGIT_CLIP)))


def bt_loss(member: RewardNet, examples: list[Example]) -> float:
    """Mean cross-entropy of the Bradley-Terry probabilities vs targets."""
    if not examples:
        raise ValueError("no preference examples")
    losses = []
    for a, b, target in examples:
        x = predict_return(member, a) - predict_return(member, b)
        # y*softplus(-x) + (1-y)*softplus(x), stable for any x
        losses.append(target * np.logaddexp(0.0, -x) + (1.0 - target) * np.logaddexp(0.0, x))
    return float(np.mean(losses))


def bt_loss_gradients(member: RewardNet, examples: list[Example]):
    """Analytic gradients of bt_loss w.r.t. all member parameters.

    All segments in the batch must share one length; sessions guarantee
    this because the segment length is fixed per session.
    """
    lengths = {len(a) for a, _, _ in examples} | {len(b) for _, b, _ in examples}
    if len(lengths) != 1:
        raise ValueError("mixed segment lengths in one training batch")
    L = lengths.pop()
    B = len(examples)
    xa = np.concatenate([_behavior_inputs(a) for a, _, _ in examples], axis=0)
    xb = np.concatenate([_behavior_inputs(b) for _, b, _ in examples], axis=0)
    targets = np.array([t for _, _, t in examples])

    out_a, cache_a = member.net.forward(xa)
    out_b, cache_b = member.net.forward(xb)
    ra = out_a[:, 0].reshape(B, L).sum(axis=1)
    rb = out_b[:, 0].reshape(B, L).sum(axis=1)
    logits = ra - rb
    loss = float(
        np.mean(
            targets * np.logaddexp(0.0, -logits) + (1.0 - targets) * np.logaddexp(0.0, logits)
        )
    )
    dlogit = (expit(logits) - targets) / B  # (B,)
    ga = np.repeat(dlogit, L)[:, None]
    gb = -ga
    gw_a, gb_a, _ = member.net.backward(cache_a, ga)
    gw_b, gb_b, _ = member.net.backward(cache_b, gb)
    grads_w = [wa + wb for wa, wb in zip(gw_a, gw_b)]
    grads_b = [ba + bb for ba, bb in zip(gb_a, gb_b)]
    return loss, grads_w, grads_b


def train(ensemble: Ensemble, examples: list[Example], config: RewardNetConfig | None = None):
    """Fit every member independently; returns per-member loss curves.

    Curves are dicts {"train": [...], "holdout": [...]} per member; the
    holdout list is empty when the query set is too small to split.
    """
    if not examples:
        raise ValueError("no preference examples to train on")
    cfg = config or ensemble.config
    n = len(examples)
    n_holdout = int(np.floor(cfg.holdout_fraction * n))
    split_rng = np.random.default_rng(cfg.seed)
    perm = split_rng.permutation(n)
    holdout = [examples[i] for i in perm[:n_holdout]]
    train_set = [examples[i] for i in perm[n_holdout:]]

    curves = []
    for member in ensemble.members:
        rng = np.random.default_rng((cfg.seed, 7919, member.member_seed))
        opt = MomentumSGD(member.net, cfg.learning_rate, cfg.momentum)
        train_curve, holdout_curve = [], []
        best_params, best_loss, since_best = None, np.inf, 0
        for _ in range(cfg.epochs_per_round):
            order = rng.permutation(len(train_set))
            epoch_loss = 0.0
            for lo in range(0, len(order), cfg.batch_size):
                batch = [train_set[i] for i in order[lo : lo + cfg.batch_size]]
                loss, gw, gb = bt_loss_gradients(member, batch)
                if not np.isfinite(loss):
                    raise RuntimeError(
                        f"non-finite training loss ({loss}) in member {member.member_seed}"
                    )
                opt.step(member.net, gw, gb)
                epoch_loss += loss * len(batch)
            train_curve.append(epoch_loss / len(train_set))
            if holdout:
                hl = bt_loss(member, holdout)
                holdout_curve.append(hl)
                if hl < best_loss - 1e-12:
                    best_loss, best_params, since_best = hl, member.net.copy_params(), 0
                else:
                    since_best += 1
                    if since_best >= cfg.early_stop_patience:
                        break
        if best_params is not None:
            member.net.load_params(best_params)
        curves.append({"train": train_curve, "holdout": holdout_curve})
    return curves


def pair_disagreement(ensemble: Ensemble, a: Behavior, b: Behavior) -> float:
    """Population variance of the members' preference probabilities."""
    if ensemble.config.disagreement_mode == "return":
        vals = [predict_return(m, a) - predict_return(m, b) for m in ensemble.members]
    else:
        vals = [bt_probability(m, a, b) for m in ensemble.members]
    return float(np.var(vals))


def member_returns(ensemble: Ensemble, behaviors: list[Behavior]) -> np.ndarray:
    """(members, behaviors) matrix of predicted returns, batched."""
    k = len(ensemble.members)
    n = len(behaviors)
    if n == 0:
        return np.zeros((k, 0))
    lengths = {len(b) for b in behaviors}
    out = np.empty((k, n))
    if len(lengths) == 1:
        L = lengths.pop()
        x = np.concatenate([_behavior_inputs(b) for b in behaviors], axis=0)
        for mi, member in enumerate(ensemble.members):
            out[mi] = step_rewards(member, x).reshape(n, L).sum(axis=1)
    else:
        for mi, member in enumerate(ensemble.members):
            out[mi] = [predict_return(member, b) for b in behaviors]
    return out


def disagreement_matrix(ensemble: Ensemble, behaviors: list[Behavior]) -> np.ndarray:
    """(n, n) matrix of pairwise member disagreement; symmetric, zero diagonal."""
    returns = member_returns(ensemble, behaviors)
    diffs = returns[:, :, None] - returns[:, None, :]
    if ensemble.config.disagreement_mode == "return":
        return diffs.var(axis=0)
    probs = expit(np.clip(diffs, -LOGIT_CLIP, LOGIT_CLIP))
    return probs.var(axis=0)


def mean_step_reward(ensemble: Ensemble, state, action) -> float | np.ndarray:
    """Mean member step reward; the only reward signal the policy sees.

    Accepts a single (state, action) pair or batched (N, obs) / (N, act)
    arrays; returns a scalar or an (N,) vector correspondingly.
    """
    s = np.asarray(state, dtype=np.float64)
    a = np.asarray(action, dtype=np.float64)
    scalar = s.ndim == 1
    if scalar:
        s = s[None, :]
        a = a.reshape(1, -1)
    x = np.concatenate([s, a], axis=1)
    if x.shape[1] != ensemble.config.input_dim:
        raise ValueError("state+action width does not match the reward input size")
    total = np.zeros(x.shape[0])
    for member in ensemble.members:
        total += step_rewards(member, x)
    total /= len(ensemble.members)
    return float(total[0]) if scalar else total


# -- serialization: versioned flat binary + JSON sidecar --------------------

_MAGIC = b"PFRE"
_FORMAT_VERSION = 1


def save_ensemble(ensemble: Ensemble, path: str | Path) -> None:
    path = Path(path)
    cfg = ensemble.config
    sizes = [cfg.input_dim, *cfg.hidden_layers, 1]
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIII", _FORMAT_VERSION, cfg.input_dim, len(ensemble.members), len(sizes)
            )
        )
        fh.write(struct.pack(f"<{len(sizes)}I", *sizes))
        for member in ensemble.members:
            for arr in member.net.param_arrays():
                fh.write(np.ascontiguousarray(arr, dtype=np.float64).tobytes())
    sidecar = asdict(cfg)
    sidecar["hidden_layers"] = list(cfg.hidden_layers)
    Path(str(path) + ".json").write_text(json.dumps(sidecar, sort_keys=True, indent=1))


def load_ensemble(path: str | Path) -> Ensemble:
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    sidecar["hidden_layers"] = tuple(sidecar["hidden_layers"])
    cfg = RewardNetConfig(**sidecar)
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a reward ensemble checkpoint")
        version, input_dim, n_members, n_sizes = struct.unpack("<IIII", fh.read(16))
        if version != _FORMAT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        sizes = list(struct.unpack(f"<{n_sizes}I", fh.read(4 * n_sizes)))
        ensemble = init_ensemble(cfg)
        if input_dim != cfg.input_dim or sizes != [cfg.input_dim, *cfg.hidden_layers, 1]:
            raise ValueError("checkpoint header disagrees with sidecar config")
        for member in ensemble.members[:n_members]:
            for arr in member.net.param_arrays():
                buf = fh.read(arr.size * 8)
                arr[...] = np.frombuffer(buf, dtype=np.float64).reshape(arr.shape)
    return ensemble
