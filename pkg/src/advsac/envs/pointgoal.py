"""Planar reaching task used as a sanity check for the learner."""

from __future__ import annotations

import numpy as np

from ..core import Env, EnvSpec, Mode, RewardKind

STEP_SCALE = 0.1
HORIZON = 30
SUCCESS_RADIUS = 0.05


def pointgoal_dynamics_and_reward(
    p: np.ndarray, goal: np.ndarray, executed: np.ndarray
) -> tuple[np.ndarray, float]:
    p_next = np.clip(p + STEP_SCALE * np.asarray(executed, dtype=np.float64), -1.0, 1.0)
    return p_next, -float(np.linalg.norm(p_next - goal))


def greedy_action(p: np.ndarray, goal: np.ndarray) -> np.ndarray:
    """Best one-step action: the box-clipped move onto the goal."""
    return np.clip((np.asarray(goal) - np.asarray(p)) / STEP_SCALE, -1.0, 1.0)


class GreedyPointPolicy:
    """Scripted straight-line controller; reads ``[p, goal]`` from the state."""

    state_dim = 4
    action_dim = 2

    def act(self, state, goal=None, rng=None, deterministic: bool = False) -> np.ndarray:
        state = np.asarray(state, dtype=np.float64)
        return greedy_action(state[:2], state[2:4])


class PointGoal(Env):
    """Observation is ``[p, goal]``; success latches once ``|p - goal| <= 0.05``."""

    env_id = "pointgoal"
    mode = Mode.INTERNAL
    spec = EnvSpec(
        state_dim=4,
        protagonist_action_dim=2,
        adversary_action_dim=2,
        horizon=HORIZON,
        gamma=0.98,
        reward_kind=RewardKind.DENSE,
    )

    def __init__(self) -> None:
        super().__init__()
        self.p = np.zeros(2)
        self.goal_pos = np.zeros(2)

    def _reset(self, rng: np.random.Generator) -> None:
        self.p = rng.uniform(-1.0, 1.0, size=2)
        self.goal_pos = rng.uniform(-1.0, 1.0, size=2)

    def set_positions(self, p, goal) -> None:
        self.p = np.asarray(p, dtype=np.float64)
        self.goal_pos = np.asarray(goal, dtype=np.float64)

    def _advance(self, executed: np.ndarray) -> tuple[float, bool, bool]:
        self.p, reward = pointgoal_dynamics_and_reward(self.p, self.goal_pos, executed)
        return reward, -reward <= SUCCESS_RADIUS, False

    def observe(self) -> np.ndarray:
        return np.concatenate([self.p, self.goal_pos])
