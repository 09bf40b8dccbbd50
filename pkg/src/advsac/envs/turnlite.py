"""Object-turning task with joint-space (internal) disturbance.

Three joints push a free-spinning object from -pi toward 0. A joint's
push is weighted by its grip effectiveness ``1 - q**2`` read before the
move, so where the joints sit matters as much as how hard they push. The
episode ends the first time the object reaches ``theta >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ..core import Env, EnvSpec, Mode, RewardKind

# rotation gain; a constant full push rotates 11.4 * KAPPA over the horizon,
# which must exceed pi by 25%: KAPPA >= 1.25 * pi / 11.4 ~= 0.3445
KAPPA = 0.35
JOINT_STEP = 0.2
SUCCESS_BONUS = 5.0
HORIZON = 40


@dataclass(frozen=True)
class TurnLiteState:
    theta: float
    q: np.ndarray

    @classmethod
    def initial(cls) -> "TurnLiteState":
        return cls(-math.pi, np.zeros(3))

    def vector(self) -> np.ndarray:
        return np.concatenate([[self.theta], self.q])


def turnlite_dynamics(state: TurnLiteState, executed: np.ndarray, kappa: float = KAPPA) -> TurnLiteState:
    executed = np.asarray(executed, dtype=np.float64)
    q = np.clip(state.q + JOINT_STEP * executed, -1.0, 1.0)
    effectiveness = 1.0 - state.q**2
    theta = state.theta + kappa * float(np.dot(executed, effectiveness))
    theta = min(max(theta, -math.pi), math.pi)
    return TurnLiteState(theta, q)


def turnlite_reward(prev: TurnLiteState, nxt: TurnLiteState, already_succeeded: bool = False) -> float:
    """Angular progress plus a one-off bonus on first reaching ``theta >= 0``."""
    bonus = SUCCESS_BONUS if (nxt.theta >= 0.0 and not already_succeeded) else 0.0
    return (nxt.theta - prev.theta) + bonus


class TurnLite(Env):
    env_id = "turnlite"
    mode = Mode.INTERNAL
    spec = EnvSpec(
        state_dim=4,
        protagonist_action_dim=3,
        adversary_action_dim=3,
        horizon=HORIZON,
        gamma=0.98,
        goal_conditioned=False,
        reward_kind=RewardKind.DENSE,
    )

    def __init__(self, kappa: Optional[float] = None) -> None:
        super().__init__()
        self.kappa = KAPPA if kappa is None else kappa
        self.state = TurnLiteState.initial()

    def _reset(self, rng: np.random.Generator) -> None:
        self.state = TurnLiteState.initial()

    def _advance(self, executed: np.ndarray) -> tuple[float, bool, bool]:
        prev = self.state
        self.state = turnlite_dynamics(prev, executed, self.kappa)
        reward = turnlite_reward(prev, self.state, already_succeeded=self.success)
        reached = self.state.theta >= 0.0
        return reward, reached, reached

    def observe(self) -> np.ndarray:
        return self.state.vector()
