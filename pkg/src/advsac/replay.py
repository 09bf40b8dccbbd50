"""Ring-buffer replay and hindsight goal relabeling."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .core import EpisodeRecord, Transition
from .errors import ConfigError, DimensionError, DomainError
from .sac import Batch

RewardFn = Callable[[np.ndarray, np.ndarray], float]
AchievedGoalFn = Callable[[np.ndarray], np.ndarray]


class ReplayBuffer:
    """Fixed-capacity FIFO store of transitions with uniform sampling.

    Storage grows geometrically up to ``capacity`` so a large nominal
    capacity costs nothing until it is used.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int, goal_dim: int = 0):
        if capacity < 1:
            raise ConfigError("capacity must be >= 1")
        self.capacity = int(capacity)
        self.state_dim, self.action_dim, self.goal_dim = int(state_dim), int(action_dim), int(goal_dim)
        self.cursor = 0
        self.size = 0
        self._alloc(min(self.capacity, 1024))

    def _alloc(self, n: int) -> None:
        old = getattr(self, "_data", None)
        data = {
            "state": np.zeros((n, self.state_dim)),
            "action": np.zeros((n, self.action_dim)),
            "reward": np.zeros(n),
            "next_state": np.zeros((n, self.state_dim)),
            "goal": np.zeros((n, self.goal_dim)),
            "done": np.zeros(n, dtype=bool),
            "timeout": np.zeros(n, dtype=bool),
            "success": np.zeros(n, dtype=bool),
            "step_index": np.zeros(n, dtype=np.int64),
        }
        if old is not None:
            for key, arr in old.items():
                data[key][: arr.shape[0]] = arr
        self._data = data

    def __len__(self) -> int:
        return self.size

    def push(self, t: Transition) -> None:
        if t.state.shape != (self.state_dim,) or t.next_state.shape != (self.state_dim,):
            raise DimensionError(f"state width must be {self.state_dim}")
        if t.action.shape != (self.action_dim,):
            raise DimensionError(f"action width must be {self.action_dim}, got {t.action.shape}")
        if self.goal_dim and (t.goal is None or t.goal.shape != (self.goal_dim,)):
            raise DimensionError(f"goal width must be {self.goal_dim}")
        if not self.goal_dim and t.goal is not None:
            raise DimensionError("this buffer stores no goals")
        allocated = self._data["reward"].shape[0]
        if self.cursor >= allocated:
            self._alloc(min(self.capacity, 2 * allocated))
        i = self.cursor
        d = self._data
        d["state"][i] = t.state
        d["action"][i] = t.action
        d["reward"][i] = t.reward
        d["next_state"][i] = t.next_state
        if self.goal_dim:
            d["goal"][i] = t.goal
        d["done"][i] = t.done
        d["timeout"][i] = t.timeout
        d["success"][i] = t.success
        d["step_index"][i] = t.step_index
        self.cursor = (self.cursor + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def extend(self, transitions) -> None:
        for t in transitions:
            self.push(t)

    def get(self, i: int) -> Transition:
        """The ``i``-th stored transition, oldest first."""
        if not 0 <= i < self.size:
            raise IndexError(i)
        j = (self.cursor - self.size + i) % self.capacity if self.size == self.capacity else i
        d = self._data
        return Transition(
            d["state"][j].copy(), d["action"][j].copy(), d["reward"][j], d["next_state"][j].copy(),
            d["done"][j], d["goal"][j].copy() if self.goal_dim else None, d["step_index"][j],
            d["success"][j], d["timeout"][j],
        )

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise DomainError("cannot sample from an empty buffer")
        return rng.integers(0, self.size, size=n)

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        idx = self.sample_indices(n, rng)
        d = self._data
        obs, next_obs = d["state"][idx], d["next_state"][idx]
        if self.goal_dim:
            obs = np.concatenate([obs, d["goal"][idx]], axis=1)
            next_obs = np.concatenate([next_obs, d["goal"][idx]], axis=1)
        terminal = d["done"][idx] & ~d["timeout"][idx]
        return Batch(obs, d["action"][idx], d["reward"][idx], next_obs, terminal)


@dataclass(frozen=True)
class RelabelStrategy:
    kind: str = "final"
    future_k: int = 4

    def __post_init__(self) -> None:
        if self.kind not in ("final", "future"):
            raise ConfigError(f"unknown relabel strategy {self.kind!r}")
        if self.future_k < 1:
            raise ConfigError("future_k must be >= 1")


def _relabel(t: Transition, goal: np.ndarray, reward_fn: RewardFn, latched: bool) -> Transition:
    reward = float(reward_fn(t.next_state, goal))
    return replace(t, goal=goal.copy(), reward=reward, success=latched or reward >= 0.0)


def relabel_episode(
    episode: EpisodeRecord,
    strategy: RelabelStrategy,
    reward_fn: RewardFn,
    achieved_goal: AchievedGoalFn,
    rng: Optional[np.random.Generator] = None,
) -> list[Transition]:
    """Original transitions followed by goal-relabeled copies.

    ``final`` substitutes the goal achieved at the end of the episode;
    ``future`` draws ``future_k`` goals per step, with replacement, from
    the goals achieved at that step or later. Rewards are recomputed with
    ``reward_fn(next_state, new_goal)``; originals are returned untouched.
    """
    ts = episode.transitions
    if not ts:
        return []
    if any(t.goal is None for t in ts):
        raise ConfigError("hindsight relabeling needs a goal-conditioned episode")
    out = list(ts)
    if strategy.kind == "final":
        goal = np.asarray(achieved_goal(ts[-1].next_state), dtype=np.float64)
        latched = False
        for t in ts:
            new = _relabel(t, goal, reward_fn, latched)
            latched = new.success
            out.append(new)
        return out
    if rng is None:
        raise ConfigError("future relabeling needs an rng")
    achieved = [np.asarray(achieved_goal(t.next_state), dtype=np.float64) for t in ts]
    for i, t in enumerate(ts):
        for j in rng.integers(i, len(ts), size=strategy.future_k):
            out.append(_relabel(t, achieved[j], reward_fn, False))
    return out
