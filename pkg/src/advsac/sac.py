"""Soft actor-critic with a squashed-Gaussian policy.

One class serves both players. A ``maximizer`` ascends ``Q - T*log pi``;
a ``minimizer`` descends ``Q`` while still ascending the entropy bonus.
Both critics regress the same environment reward, so the only difference
between the roles is the sign on the Q-term of the actor gradient.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from .errors import ConfigError, DimensionError, DomainError
from .nn import MLP, Adam, opt_step
from .serialization import (
    adam_from_dict,
    adam_to_dict,
    net_from_dict,
    net_to_dict,
    read_json,
    unwrap_checkpoint,
    wrap_checkpoint,
    write_json,
)

LOG_STD_MIN, LOG_STD_MAX = -20.0, 2.0
# keeps log(1 - tanh(u)^2) finite when the squashed action saturates
TANH_EPS = 1e-6
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


class Role(str, Enum):
    MAXIMIZER = "maximizer"
    MINIMIZER = "minimizer"


@dataclass
class SacConfig:
    gamma: float = 0.98
    temperature: float = 0.2
    tau: float = 0.005
    actor_lr: float = 3e-4
    critic_lr: float = 3e-4
    batch_size: int = 256
    twin_q: bool = False
    role: str = Role.MAXIMIZER.value
    hidden: tuple[int, ...] = (256, 256)
    activation: str = "relu"

    def __post_init__(self) -> None:
        self.hidden = tuple(int(h) for h in self.hidden)
        self.role = Role(self.role).value
        if not 0.0 < self.gamma < 1.0:
            raise ConfigError(f"gamma must lie in (0, 1), got {self.gamma}")
        if self.temperature < 0.0:
            raise ConfigError("temperature must be nonnegative")
        if not 0.0 < self.tau <= 1.0:
            raise ConfigError(f"tau must lie in (0, 1], got {self.tau}")
        if self.actor_lr <= 0.0 or self.critic_lr <= 0.0:
            raise ConfigError("learning rates must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")

    @property
    def sign(self) -> float:
        """+1 when the Q-term is ascended, -1 when descended."""
        return 1.0 if self.role == Role.MAXIMIZER.value else -1.0

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class PolicySample:
    action: np.ndarray
    log_prob: Optional[np.ndarray]


@dataclass
class Batch:
    """Arrays for a minibatch; ``obs`` already includes the goal if any."""

    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return self.obs.shape[0]


def gaussian_head(actor: MLP, obs: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return ``(mean, clamped log_std, raw log_std)`` for a batch or vector."""
    out = actor.forward(obs)
    d = out.shape[-1] // 2
    mean, raw = out[..., :d], out[..., d:]
    return mean, np.clip(raw, LOG_STD_MIN, LOG_STD_MAX), raw


def squashed_log_prob(noise: np.ndarray, log_std: np.ndarray, action: np.ndarray) -> np.ndarray:
    """Log density of ``tanh(mean + std*noise)`` with the change-of-variables term."""
    per_dim = -0.5 * noise**2 - log_std - _HALF_LOG_2PI - np.log(1.0 - action**2 + TANH_EPS)
    return per_dim.sum(axis=-1)


def sample_from(actor: MLP, obs: np.ndarray, rng: np.random.Generator, deterministic: bool = False) -> PolicySample:
    mean, log_std, _ = gaussian_head(actor, obs)
    if deterministic:
        return PolicySample(np.tanh(mean), None)
    noise = rng.standard_normal(mean.shape)
    action = np.tanh(mean + np.exp(log_std) * noise)
    return PolicySample(action, squashed_log_prob(noise, log_std, action))


class FrozenPolicy:
    """Immutable snapshot of an actor, safe to share with rollouts."""

    def __init__(self, actor: MLP, state_dim: int, goal_dim: int = 0):
        self._actor = actor.copy()
        self.state_dim = state_dim
        self.goal_dim = goal_dim
        self.action_dim = actor.layer_sizes[-1] // 2

    def act(self, state, goal=None, rng: Optional[np.random.Generator] = None, deterministic: bool = False) -> np.ndarray:
        obs = _obs(state, goal, self.goal_dim)
        if not deterministic and rng is None:
            raise ConfigError("stochastic sampling needs an rng")
        return sample_from(self._actor, obs, rng, deterministic).action

    def params(self) -> list[np.ndarray]:
        return [p.copy() for p in self._actor.params]


class ZeroPolicy:
    """Adversary that always emits the zero action (the locked-robot baseline)."""

    def __init__(self, action_dim: int):
        self.action_dim = action_dim

    def act(self, state, goal=None, rng=None, deterministic: bool = False) -> np.ndarray:
        return np.zeros(self.action_dim)


def _obs(state, goal, goal_dim: int) -> np.ndarray:
    state = np.asarray(state, dtype=np.float64)
    if goal_dim:
        if goal is None:
            raise DimensionError("goal-conditioned policy needs a goal")
        return np.concatenate([state, np.asarray(goal, dtype=np.float64)], axis=-1)
    return state


class SacAgent:
    """Actor, critic(s), target critic(s), optimizers and a private RNG.

    The RNG drives minibatch sampling and the reparameterization noise
    used inside updates; rollouts pass their own generator to
    :meth:`sample_action` so that acting never perturbs the update stream.
    """

    def __init__(self, state_dim: int, action_dim: int, config: Optional[SacConfig] = None, seed: int = 0, goal_dim: int = 0):
        self.config = config or SacConfig()
        self.state_dim = int(state_dim)
        self.action_dim = int(action_dim)
        self.goal_dim = int(goal_dim)
        self.seed = int(seed)
        obs_dim = self.state_dim + self.goal_dim
        ss = np.random.SeedSequence(self.seed)
        init_seeds = ss.spawn(3)
        cfg = self.config
        self.actor = MLP([obs_dim, *cfg.hidden, 2 * action_dim], cfg.activation, seed=np.random.default_rng(init_seeds[0]))
        self.critics = [MLP([obs_dim + action_dim, *cfg.hidden, 1], cfg.activation, seed=np.random.default_rng(init_seeds[1]))]
        if cfg.twin_q:
            self.critics.append(MLP([obs_dim + action_dim, *cfg.hidden, 1], cfg.activation, seed=np.random.default_rng(init_seeds[2])))
        self.targets = [c.copy() for c in self.critics]
        self.actor_opt = Adam.for_params(self.actor.params, lr=cfg.actor_lr)
        self.critic_opts = [Adam.for_params(c.params, lr=cfg.critic_lr) for c in self.critics]
        self.rng = np.random.default_rng(ss.spawn(1)[0])

    # -- acting ------------------------------------------------------------

    @property
    def obs_dim(self) -> int:
        return self.state_dim + self.goal_dim

    def obs(self, state, goal=None) -> np.ndarray:
        return _obs(state, goal, self.goal_dim)

    def sample_action(self, state, goal=None, deterministic: bool = False, rng: Optional[np.random.Generator] = None) -> PolicySample:
        obs = self.obs(state, goal)
        if obs.shape[-1] != self.obs_dim:
            raise DimensionError(f"expected observation width {self.obs_dim}, got {obs.shape[-1]}")
        return sample_from(self.actor, obs, rng if rng is not None else self.rng, deterministic)

    def act(self, state, goal=None, rng: Optional[np.random.Generator] = None, deterministic: bool = False) -> np.ndarray:
        return self.sample_action(state, goal, deterministic, rng).action

    def snapshot(self) -> FrozenPolicy:
        return FrozenPolicy(self.actor, self.state_dim, self.goal_dim)

    # -- critics -------------------------------------------------------------

    def _pessimistic(self, values: list[np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
        """Elementwise min over critics for a maximizer, max for a minimizer.
        Returns the values and the index of the chosen critic per row."""
        stacked = np.stack(values)
        idx = stacked.argmin(axis=0) if self.config.sign > 0 else stacked.argmax(axis=0)
        return np.take_along_axis(stacked, idx[None], axis=0)[0], idx

    def q_values(self, obs: np.ndarray, action: np.ndarray, target: bool = False) -> np.ndarray:
        nets = self.targets if target else self.critics
        x = np.concatenate([obs, action], axis=-1)
        return self._pessimistic([n.forward(x)[..., 0] for n in nets])[0]

    def critic_target(self, reward, next_obs, terminal, rng: Optional[np.random.Generator] = None) -> np.ndarray:
        """Entropy-regularized Bellman target ``r + g*(Q'(s', a~) - T*log pi(a~|s'))``
        with ``a~`` drawn from the live actor; no bootstrap on terminal rows."""
        cfg = self.config
        next_obs = np.atleast_2d(np.asarray(next_obs, dtype=np.float64))
        reward = np.atleast_1d(np.asarray(reward, dtype=np.float64))
        terminal = np.atleast_1d(np.asarray(terminal, dtype=bool))
        sample = sample_from(self.actor, next_obs, rng if rng is not None else self.rng)
        q_next = self.q_values(next_obs, sample.action, target=True)
        soft = q_next - cfg.temperature * sample.log_prob
        return reward + cfg.gamma * np.where(terminal, 0.0, soft)

    def update_critic(self, batch: Batch) -> float:
        """One Adam step on the mean squared TD error; returns the pre-step loss."""
        n = len(batch)
        if n == 0:
            raise DomainError("empty batch")
        y = self.critic_target(batch.reward, batch.next_obs, batch.terminal)
        x = np.concatenate([batch.obs, batch.action], axis=-1)
        losses = []
        for critic, opt in zip(self.critics, self.critic_opts):
            q = critic.forward(x)[:, 0]
            err = q - y
            losses.append(float(np.mean(err**2)))
            grads, _ = critic.backward((2.0 / n) * err[:, None])
            opt_step(critic.params, grads, opt)
        return float(np.mean(losses))

    # -- actor ---------------------------------------------------------------

    def actor_gradients(
        self, obs: np.ndarray, noise: np.ndarray, q_term: bool = True, entropy_term: bool = True
    ) -> tuple[list[np.ndarray], float]:
        """Reparameterized gradient of the actor loss and the objective value.

        The loss minimized is ``mean(T*log pi(a~|s) - sign*Q(s, a~))``; the
        returned objective is its negation. ``q_term``/``entropy_term``
        switch the two contributions on and off independently.
        """
        cfg = self.config
        n = obs.shape[0]
        mean, log_std, raw = gaussian_head(self.actor, obs)
        std = np.exp(log_std)
        u = mean + std * noise
        a = np.tanh(u)
        log_prob = squashed_log_prob(noise, log_std, a)

        x = np.concatenate([obs, a], axis=-1)
        if len(self.critics) == 1:
            q = self.critics[0].forward(x)[:, 0]
            _, gx = self.critics[0].backward(np.ones((n, 1)))
            dq_da = gx[:, self.obs_dim:]
        else:
            q, chosen = self._pessimistic([c.forward(x)[:, 0] for c in self.critics])
            dq_da = np.zeros_like(a)
            for k, critic in enumerate(self.critics):
                mask = (chosen == k).astype(np.float64)
                if mask.any():
                    critic.forward(x)
                    _, gx = critic.backward(mask[:, None])
                    dq_da += gx[:, self.obs_dim:]

        one_minus_a2 = 1.0 - a * a
        grad_u = np.zeros_like(u)
        grad_log_std = np.zeros_like(u)
        if q_term:
            grad_u += (-cfg.sign / n) * dq_da * one_minus_a2
        if entropy_term:
            # d/du of -log(1 - tanh(u)^2 + eps)
            grad_u += (cfg.temperature / n) * 2.0 * a * one_minus_a2 / (one_minus_a2 + TANH_EPS)
            grad_log_std -= cfg.temperature / n
        grad_mean = grad_u
        grad_log_std = grad_log_std + grad_u * std * noise
        grad_log_std = np.where((raw >= LOG_STD_MIN) & (raw <= LOG_STD_MAX), grad_log_std, 0.0)

        # the actor cache still holds the forward pass from gaussian_head
        grads, _ = self.actor.backward(np.concatenate([grad_mean, grad_log_std], axis=-1))
        objective = float(np.mean(cfg.sign * q - cfg.temperature * log_prob))
        return grads, objective

    def update_actor(self, obs: np.ndarray) -> float:
        obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
        if obs.shape[0] == 0:
            raise DomainError("empty batch")
        noise = self.rng.standard_normal((obs.shape[0], self.action_dim))
        grads, objective = self.actor_gradients(obs, noise)
        opt_step(self.actor.params, grads, self.actor_opt)
        return objective

    def soft_update_targets(self) -> None:
        tau = self.config.tau
        for critic, target in zip(self.critics, self.targets):
            for p, tp in zip(critic.params, target.params):
                tp *= 1.0 - tau
                tp += tau * p

    def update(self, batch: Batch) -> tuple[float, float]:
        critic_loss = self.update_critic(batch)
        objective = self.update_actor(batch.obs)
        self.soft_update_targets()
        return critic_loss, objective

    # -- persistence -----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return wrap_checkpoint(
            "agent",
            {
                "state_dim": self.state_dim,
                "action_dim": self.action_dim,
                "goal_dim": self.goal_dim,
                "seed": self.seed,
                "config": self.config.to_dict(),
                "actor": net_to_dict(self.actor),
                "critics": [net_to_dict(c) for c in self.critics],
                "targets": [net_to_dict(t) for t in self.targets],
                "actor_opt": adam_to_dict(self.actor_opt),
                "critic_opts": [adam_to_dict(o) for o in self.critic_opts],
                "rng": self.rng.bit_generator.state,
            },
        )

    @classmethod
    def from_dict(cls, obj: dict[str, Any]) -> "SacAgent":
        obj = unwrap_checkpoint(obj, "agent")
        agent = cls.__new__(cls)
        agent.config = SacConfig(**obj["config"])
        agent.state_dim = obj["state_dim"]
        agent.action_dim = obj["action_dim"]
        agent.goal_dim = obj["goal_dim"]
        agent.seed = obj["seed"]
        agent.actor = net_from_dict(obj["actor"])
        agent.critics = [net_from_dict(c) for c in obj["critics"]]
        agent.targets = [net_from_dict(t) for t in obj["targets"]]
        agent.actor_opt = adam_from_dict(obj["actor_opt"])
        agent.critic_opts = [adam_from_dict(o) for o in obj["critic_opts"]]
        agent.rng = np.random.default_rng()
        agent.rng.bit_generator.state = obj["rng"]
        return agent

    def save(self, path: Union[str, Path]) -> Path:
        return write_json(self.to_dict(), path)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SacAgent":
        return cls.from_dict(read_json(path))


def load_policy(path: Union[str, Path]) -> FrozenPolicy:
    return SacAgent.load(path).snapshot()
