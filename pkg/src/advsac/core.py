"""Two-player episodic MDP primitives.

Everything an environment, a learner and the evaluation harness need to
agree on lives here: environment metadata, the replay unit, action
composition under the two disturbance modes, episode bookkeeping and the
per-step episode CSV format.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import IO, Optional, Sequence, Union

import numpy as np

from .errors import ConfigError, DimensionError, DomainError, ProtocolError

ArrayLike = Union[Sequence[float], np.ndarray]

# tolerance used when checking that incoming actions lie in [-1, 1]
_RANGE_TOL = 1e-12


class Mode(str, Enum):
    INTERNAL = "internal"
    EXTERNAL = "external"
    NONE = "none"


class RewardKind(str, Enum):
    DENSE = "dense"
    SPARSE = "sparse"


@dataclass(frozen=True)
class EnvSpec:
    """Static description of an environment.

    ``horizon`` is the episode length T; ``gamma`` is the discount the
    environment is meant to be trained with.
    """

    state_dim: int
    protagonist_action_dim: int
    adversary_action_dim: int
    horizon: int
    gamma: float
    goal_conditioned: bool = False
    reward_kind: RewardKind = RewardKind.DENSE
    goal_dim: int = 0

    def __post_init__(self) -> None:
        for name in ("state_dim", "protagonist_action_dim", "adversary_action_dim", "horizon"):
            if int(getattr(self, name)) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        kind = RewardKind(self.reward_kind)
        object.__setattr__(self, "reward_kind", kind)
        if kind is RewardKind.SPARSE and not self.goal_conditioned:
            raise ConfigError("sparse reward requires a goal-conditioned environment")
        if self.goal_conditioned and self.goal_dim < 1:
            raise ConfigError("goal-conditioned environments need goal_dim >= 1")

    def executed_dim(self, mode: Union[Mode, str]) -> int:
        mode = Mode(mode)
        if mode is Mode.EXTERNAL:
            return self.protagonist_action_dim + self.adversary_action_dim
        return self.protagonist_action_dim


@dataclass
class Transition:
    """One environment step as stored in replay.

    ``action`` is the storing actor's own action, before composition.
    ``success`` is the latched episode success flag after this step and
    ``timeout`` marks an episode end caused by the horizon only, through
    which critics still bootstrap.
    """

    state: np.ndarray
    action: np.ndarray
    reward: float
    next_state: np.ndarray
    done: bool
    goal: Optional[np.ndarray] = None
    step_index: int = 0
    success: bool = False
    timeout: bool = False

    def __post_init__(self) -> None:
        self.state = np.asarray(self.state, dtype=np.float64)
        self.action = np.asarray(self.action, dtype=np.float64)
        self.next_state = np.asarray(self.next_state, dtype=np.float64)
        self.reward = float(self.reward)
        self.done = bool(self.done)
        self.success = bool(self.success)
        self.timeout = bool(self.timeout)
        self.step_index = int(self.step_index)
        if self.goal is not None:
            self.goal = np.asarray(self.goal, dtype=np.float64)

    @property
    def terminal(self) -> bool:
        """True when the critic must not bootstrap past this step."""
        return self.done and not self.timeout

    def same_as(self, other: "Transition") -> bool:
        """Exact (bitwise for floats) equality."""
        if self.goal is None or other.goal is None:
            goals_equal = self.goal is None and other.goal is None
        else:
            goals_equal = np.array_equal(self.goal, other.goal)
        return (
            goals_equal
            and np.array_equal(self.state, other.state)
            and np.array_equal(self.action, other.action)
            and np.array_equal(self.next_state, other.next_state)
            and self.reward == other.reward
            and self.done == other.done
            and self.step_index == other.step_index
            and self.success == other.success
            and self.timeout == other.timeout
        )


def _as_action(x: ArrayLike, name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.size and (not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > 1.0 + _RANGE_TOL)):
        raise DomainError(f"{name} components must lie in [-1, 1]: {arr}")
    return arr


def compose_internal(protagonist: ArrayLike, adversary: ArrayLike, amplitude: float) -> np.ndarray:
    """Additive joint-space disturbance, clamped to the actuator range.

    >>> compose_internal([0.5], [-1.0], 0.6)
    array([-0.1])
    """
    p = _as_action(protagonist, "protagonist")
    a = _as_action(adversary, "adversary")
    if p.shape != a.shape:
        raise DimensionError(f"internal composition needs equal lengths, got {p.size} and {a.size}")
    amplitude = float(amplitude)
    if not amplitude >= 0.0 or not math.isfinite(amplitude):
        raise DomainError(f"amplitude must be a finite nonnegative number, got {amplitude}")
    return np.clip(p + amplitude * a, -1.0, 1.0)


def compose_external(protagonist: ArrayLike, adversary: ArrayLike) -> np.ndarray:
    """Concatenate the two robots' actions, protagonist first."""
    p = _as_action(protagonist, "protagonist")
    a = _as_action(adversary, "adversary")
    return np.concatenate([p, a])


@dataclass(frozen=True)
class JointAction:
    protagonist: np.ndarray
    adversary: np.ndarray
    mode: Mode
    executed: np.ndarray
    amplitude: float = 0.0

    @classmethod
    def compose(
        cls,
        protagonist: ArrayLike,
        adversary: Optional[ArrayLike],
        mode: Union[Mode, str],
        amplitude: float = 0.0,
    ) -> "JointAction":
        mode = Mode(mode)
        p = _as_action(protagonist, "protagonist")
        a = _as_action([] if adversary is None else adversary, "adversary")
        if mode is Mode.INTERNAL:
            executed = compose_internal(p, a, amplitude)
        elif mode is Mode.EXTERNAL:
            if amplitude:
                raise ConfigError("external mode takes no amplitude")
            executed = compose_external(p, a)
        else:
            executed = p.copy()
        return cls(p, a, mode, executed, float(amplitude))

    def check(self) -> None:
        """Validate the mode invariant of ``executed``."""
        if self.mode is Mode.INTERNAL:
            ok = (
                self.protagonist.shape == self.adversary.shape
                and np.array_equal(self.executed, compose_internal(self.protagonist, self.adversary, self.amplitude))
            )
        elif self.mode is Mode.EXTERNAL:
            ok = np.array_equal(self.executed, np.concatenate([self.protagonist, self.adversary]))
        else:
            ok = np.array_equal(self.executed, self.protagonist)
        if not ok:
            raise DomainError(f"executed action inconsistent with {self.mode.value} composition")


class Env:
    """Deterministic episodic environment driven by an executed action.

    Subclasses implement :meth:`_reset`, :meth:`_advance` and
    :meth:`observe`. The base class owns step counting, the horizon and
    the latched success flag.
    """

    env_id = "abstract"
    spec: EnvSpec
    mode: Mode = Mode.NONE

    def __init__(self) -> None:
        self.t = 0
        self.done = True
        # True only when the episode ended for a reason other than the horizon
        self.terminated = False
        self.success = False
        self.goal: Optional[np.ndarray] = None
        self.seed: Optional[int] = None

    def reset(self, seed: Optional[int] = None) -> np.ndarray:
        self.seed = seed
        rng = np.random.default_rng(seed)
        self.t = 0
        self.done = False
        self.terminated = False
        self.success = False
        self._reset(rng)
        return self.observe()

    def step(self, executed: ArrayLike) -> tuple[np.ndarray, float, bool, bool]:
        if self.done:
            raise ProtocolError("step() called on a finished episode; call reset() first")
        executed = np.asarray(executed, dtype=np.float64).reshape(-1)
        if executed.size != self.executed_dim:
            raise DimensionError(f"{self.env_id} expects executed actions of length {self.executed_dim}, got {executed.size}")
        executed = _as_action(executed, "executed")
        reward, success_now, terminated = self._advance(executed)
        self.t += 1
        self.success = self.success or bool(success_now)
        self.terminated = bool(terminated)
        self.done = self.terminated or self.t >= self.spec.horizon
        return self.observe(), float(reward), self.done, self.success

    @property
    def executed_dim(self) -> int:
        return self.spec.executed_dim(self.mode)

    def achieved_goal(self, state: np.ndarray) -> np.ndarray:
        raise ConfigError(f"{self.env_id} is not goal-conditioned")

    def compute_reward(self, state: np.ndarray, goal: np.ndarray) -> float:
        raise ConfigError(f"{self.env_id} is not goal-conditioned")

    def observe(self) -> np.ndarray:
        raise NotImplementedError

    def _reset(self, rng: np.random.Generator) -> None:
        raise NotImplementedError

    def _advance(self, executed: np.ndarray) -> tuple[float, bool, bool]:
        raise NotImplementedError


def step(env: Env, joint: JointAction) -> tuple[np.ndarray, float, bool, bool]:
    """Validate ``joint`` against its mode and advance ``env`` by one step."""
    joint.check()
    return env.step(joint.executed)


@dataclass
class EpisodeRecord:
    transitions: list[Transition]
    gamma: float
    seed: int = 0
    undiscounted_return: float = field(init=False)
    discounted_return: float = field(init=False)
    success: bool = field(init=False)

    def __post_init__(self) -> None:
        flags = [t.success for t in self.transitions]
        if any(a and not b for a, b in zip(flags, flags[1:])):
            raise DomainError("success must stay latched once reached")
        rewards = [t.reward for t in self.transitions]
        self.undiscounted_return = float(math.fsum(rewards))
        self.discounted_return = _discounted(rewards, self.gamma) if rewards else 0.0
        self.success = bool(self.transitions and self.transitions[-1].success)

    def __len__(self) -> int:
        return len(self.transitions)

    @property
    def rewards(self) -> np.ndarray:
        return np.array([t.reward for t in self.transitions])

    def same_as(self, other: "EpisodeRecord") -> bool:
        return (
            len(self) == len(other)
            and self.gamma == other.gamma
            and self.seed == other.seed
            and all(a.same_as(b) for a, b in zip(self.transitions, other.transitions))
        )


def _discounted(rewards: Sequence[float], gamma: float) -> float:
    return float(math.fsum(r * gamma**t for t, r in enumerate(rewards)))


def discounted_return(episode: Union[EpisodeRecord, Sequence[float]], gamma: float) -> float:
    """Sum of ``gamma**t * r_t`` over an episode (or a plain reward list)."""
    rewards = episode.rewards if isinstance(episode, EpisodeRecord) else list(episode)
    if len(rewards) == 0:
        raise DomainError("discounted return of an empty episode is undefined")
    return _discounted(rewards, gamma)


# ---------------------------------------------------------------------------
# episode CSV
# ---------------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def episode_header(state_dim: int, action_dim: int, goal_dim: int) -> list[str]:
    return (
        ["step"]
        + [f"s{i}" for i in range(state_dim)]
        + [f"a{i}" for i in range(action_dim)]
        + ["reward", "done", "success"]
        + [f"ns{i}" for i in range(state_dim)]
        + [f"g{i}" for i in range(goal_dim)]
        + ["timeout", "gamma", "seed"]
    )


def write_episode_csv(record: EpisodeRecord, dest: Union[str, Path, IO[str]]) -> Optional[Path]:
    """One row per step: ``step, s.., a.., reward, done, success`` first.

    Trailing columns (next state, goal, timeout flag, gamma, seed) make the
    file a lossless encoding of the record.
    """
    if not record.transitions:
        raise DomainError("cannot serialize an empty episode")
    first = record.transitions[0]
    goal_dim = 0 if first.goal is None else first.goal.size
    header = episode_header(first.state.size, first.action.size, goal_dim)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for t in record.transitions:
        row = [str(t.step_index)]
        row += [_fmt(v) for v in t.state]
        row += [_fmt(v) for v in t.action]
        row += [_fmt(t.reward), str(int(t.done)), str(int(t.success))]
        row += [_fmt(v) for v in t.next_state]
        if goal_dim:
            row += [_fmt(v) for v in t.goal]
        row += [str(int(t.timeout)), _fmt(record.gamma), str(record.seed)]
        writer.writerow(row)
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
        return Path(dest)
    dest.write(text)
    return None


def read_episode_csv(src: Union[str, Path, IO[str]]) -> EpisodeRecord:
    text = Path(src).read_text() if isinstance(src, (str, Path)) else src.read()
    rows = list(csv.reader(io.StringIO(text)))
    if len(rows) < 2:
        raise DomainError("episode CSV has no data rows")
    header = rows[0]
    cols = {name: i for i, name in enumerate(header)}
    s_idx = [cols[h] for h in header if h.startswith("s") and h[1:].isdigit()]
    a_idx = [cols[h] for h in header if h.startswith("a") and h[1:].isdigit()]
    ns_idx = [cols[h] for h in header if h.startswith("ns") and h[2:].isdigit()]
    g_idx = [cols[h] for h in header if h.startswith("g") and h[1:].isdigit()]
    transitions = []
    gamma, seed = None, None
    for row in rows[1:]:
        vec = lambda idx: np.array([float(row[i]) for i in idx])  # noqa: E731
        transitions.append(
            Transition(
                state=vec(s_idx),
                action=vec(a_idx),
                reward=float(row[cols["reward"]]),
                next_state=vec(ns_idx),
                done=row[cols["done"]] == "1",
                goal=vec(g_idx) if g_idx else None,
                step_index=int(row[cols["step"]]),
                success=row[cols["success"]] == "1",
                timeout=row[cols["timeout"]] == "1",
            )
        )
        gamma = float(row[cols["gamma"]])
        seed = int(row[cols["seed"]])
    return EpisodeRecord(transitions, gamma=gamma, seed=seed)
