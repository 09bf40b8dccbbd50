"""One-step bilinear game: reward is the product of the two actions."""

from __future__ import annotations

import numpy as np

from ..core import Env, EnvSpec, Mode, RewardKind


class BilinearBandit(Env):
    """Single-state, single-step game with ``r = a_p * a_a``.

    Its pure minimax value over ``[-1, 1]^2`` is 0, attained at the
    protagonist action 0.
    """

    env_id = "bandit"
    mode = Mode.EXTERNAL
    spec = EnvSpec(
        state_dim=1,
        protagonist_action_dim=1,
        adversary_action_dim=1,
        horizon=1,
        gamma=0.98,
        reward_kind=RewardKind.DENSE,
    )

    def _reset(self, rng: np.random.Generator) -> None:
        pass

    def _advance(self, executed: np.ndarray) -> tuple[float, bool, bool]:
        return float(executed[0] * executed[1]), False, True

    def observe(self) -> np.ndarray:
        return np.ones(1)
