import numpy as np
import pytest

from preflab.envs import Behavior


def make_behavior(bid: str, states, actions=None, true_return=0.0, round_index=0):
    states = np.asarray(states, dtype=np.float64)
    if states.ndim == 1:
        states = states[:, None]
    if actions is None:
        actions = np.zeros((states.shape[0], 1))
    return Behavior(
        id=bid,
        states=states,
        actions=np.asarray(actions, dtype=np.float64),
        true_return=float(true_return),
        round_index=round_index,
        source=(0, 0),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_behaviors(n, length=6, dims=2, seed=0, returns=None):
    gen = np.random.default_rng(seed)
    out = []
    for i in range(n):
        ret = returns[i] if returns is not None else float(gen.normal())
        out.append(
            make_behavior(
                f"b{i:03d}",
                gen.standard_normal((length, dims)),
                actions=gen.standard_normal((length, 1)),
                true_return=ret,
            )
        )
    return out
