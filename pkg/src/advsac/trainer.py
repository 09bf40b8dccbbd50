"""Alternating protagonist/adversary training.

Each iteration trains the protagonist for ``M`` episodes against a frozen
snapshot of the adversary, then the adversary for ``N`` episodes against
a frozen snapshot of the protagonist. Every agent keeps its own replay
buffer because the two store different action vectors.

Randomness is split into independent streams so that runs are
reproducible and comparable: each agent's private RNG feeds only its own
updates, and each learning episode derives its environment seed and both
players' action noise from ``(seed, learner, episode index)``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Protocol, Union

import numpy as np

from .core import Env, EpisodeRecord, JointAction, Mode, Transition, step
from .envs import make_env
from .errors import ConfigError
from .replay import RelabelStrategy, ReplayBuffer, relabel_episode
from .sac import SacAgent, SacConfig, ZeroPolicy
from .serialization import write_json

logger = logging.getLogger(__name__)

PROTAGONIST, ADVERSARY = "protagonist", "adversary"
_LEARNER_CODE = {PROTAGONIST: 0, ADVERSARY: 1}


class Actor(Protocol):
    def act(self, state, goal=None, rng=None, deterministic: bool = False) -> np.ndarray: ...


class UniformNoise:
    """Disturbance drawing every component i.i.d. from U[-1, 1] each step."""

    def __init__(self, action_dim: int):
        self.action_dim = action_dim

    def act(self, state, goal=None, rng=None, deterministic: bool = False) -> np.ndarray:
        return rng.uniform(-1.0, 1.0, size=self.action_dim)


@dataclass
class TrainerConfig:
    env_id: str = "turnlite"
    mode: str = "internal"
    amplitude: float = 0.6
    n_iter: int = 20
    m_protagonist_episodes: int = 50
    n_adversary_episodes: int = 50
    updates_per_step: int = 1
    warmup_steps: int = 1000
    seed: int = 0
    buffer_capacity: int = 1_000_000
    her: str = "final"
    her_future_k: int = 4
    frozen_stochastic: bool = True
    checkpoint_every: int = 1
    log_wall_time: bool = False

    def __post_init__(self) -> None:
        self.mode = Mode(self.mode).value
        if self.mode == Mode.NONE.value:
            raise ConfigError("trainer mode must be 'internal' or 'external'")
        if self.mode == Mode.EXTERNAL.value and self.amplitude:
            raise ConfigError("amplitude must be zero in external mode")
        if self.amplitude < 0 or not math.isfinite(self.amplitude):
            raise ConfigError("amplitude must be a finite nonnegative number")
        for name in ("n_iter", "updates_per_step", "buffer_capacity", "her_future_k"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        for name in ("m_protagonist_episodes", "n_adversary_episodes", "warmup_steps", "checkpoint_every"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.her not in ("final", "future", "none"):
            raise ConfigError(f"her must be final, future or none, got {self.her!r}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def child_seed(*key: int) -> int:
    """A 63-bit integer seed derived from an integer key path."""
    return int(np.random.SeedSequence(list(key)).generate_state(2, np.uint64)[0] >> np.uint64(1))


@dataclass
class EpisodeStreams:
    env_seed: int
    protagonist: np.random.Generator
    adversary: np.random.Generator
    relabel: np.random.Generator

    @classmethod
    def derive(cls, *key: int) -> "EpisodeStreams":
        ss = np.random.SeedSequence(list(key))
        env_ss, p_ss, a_ss, r_ss = ss.spawn(4)
        return cls(
            int(env_ss.generate_state(2, np.uint64)[0] >> np.uint64(1)),
            np.random.default_rng(p_ss),
            np.random.default_rng(a_ss),
            np.random.default_rng(r_ss),
        )


def rollout(
    env: Env,
    protagonist: Actor,
    adversary: Actor,
    mode: Union[Mode, str],
    amplitude: float,
    streams: EpisodeStreams,
    record: str = PROTAGONIST,
    protagonist_deterministic: bool = False,
    adversary_deterministic: bool = False,
    on_step: Optional[Callable[[Transition], None]] = None,
) -> EpisodeRecord:
    """Play one episode; the stored action is that of the ``record`` player."""
    mode = Mode(mode)
    amp = amplitude if mode is Mode.INTERNAL else 0.0
    state = env.reset(streams.env_seed)
    goal = None if env.goal is None else env.goal.copy()
    transitions = []
    while True:
        a_p = protagonist.act(state, goal, streams.protagonist, protagonist_deterministic)
        a_a = adversary.act(state, goal, streams.adversary, adversary_deterministic)
        joint = JointAction.compose(a_p, a_a, mode, amp)
        index = env.t
        next_state, reward, done, success = step(env, joint)
        tr = Transition(
            state=state,
            action=joint.protagonist if record == PROTAGONIST else joint.adversary,
            reward=reward,
            next_state=next_state,
            done=done,
            goal=goal,
            step_index=index,
            success=success,
            timeout=done and not env.terminated,
        )
        transitions.append(tr)
        if on_step is not None:
            on_step(tr)
        state = next_state
        if done:
            return EpisodeRecord(transitions, gamma=env.spec.gamma, seed=streams.env_seed)


@dataclass
class AgentPair:
    protagonist: SacAgent
    adversary: SacAgent
    protagonist_buffer: ReplayBuffer
    adversary_buffer: ReplayBuffer
    steps: dict[str, int] = field(default_factory=lambda: {PROTAGONIST: 0, ADVERSARY: 0})
    episodes: dict[str, int] = field(default_factory=lambda: {PROTAGONIST: 0, ADVERSARY: 0})

    def agent(self, who: str) -> SacAgent:
        return self.protagonist if who == PROTAGONIST else self.adversary

    def buffer(self, who: str) -> ReplayBuffer:
        return self.protagonist_buffer if who == PROTAGONIST else self.adversary_buffer


def adversary_action_dim(env: Env, mode: Union[Mode, str]) -> int:
    if Mode(mode) is Mode.INTERNAL:
        return env.spec.protagonist_action_dim
    return env.spec.adversary_action_dim


def check_mode(env: Env, cfg: TrainerConfig) -> None:
    if Mode(cfg.mode) is not env.mode:
        raise ConfigError(f"{env.env_id} uses {env.mode.value} disturbance, config asks for {cfg.mode}")


def make_pair(env: Env, cfg: TrainerConfig, protagonist_cfg: SacConfig, adversary_cfg: SacConfig) -> AgentPair:
    check_mode(env, cfg)
    if protagonist_cfg.role != "maximizer" or adversary_cfg.role != "minimizer":
        raise ConfigError("protagonist must be a maximizer and adversary a minimizer")
    spec = env.spec
    goal_dim = spec.goal_dim if spec.goal_conditioned else 0
    d_p, d_a = spec.protagonist_action_dim, adversary_action_dim(env, cfg.mode)
    prot = SacAgent(spec.state_dim, d_p, protagonist_cfg, seed=child_seed(cfg.seed, 0), goal_dim=goal_dim)
    adv = SacAgent(spec.state_dim, d_a, adversary_cfg, seed=child_seed(cfg.seed, 1), goal_dim=goal_dim)
    return AgentPair(
        prot,
        adv,
        ReplayBuffer(cfg.buffer_capacity, spec.state_dim, d_p, goal_dim),
        ReplayBuffer(cfg.buffer_capacity, spec.state_dim, d_a, goal_dim),
    )


# ---------------------------------------------------------------------------
# training log
# ---------------------------------------------------------------------------

LOG_COLUMNS = [
    "iteration", "phase", "episode", "return", "success", "critic_loss", "actor_objective", "env_steps",
]


@dataclass
class LogRow:
    iteration: int
    phase: str
    episode: int
    undiscounted_return: float
    success: bool
    critic_loss: float
    actor_objective: float
    env_steps: int
    wall_time: float = 0.0


@dataclass
class TrainLog:
    rows: list[LogRow] = field(default_factory=list)
    include_wall_time: bool = False

    def append(self, row: LogRow) -> None:
        self.rows.append(row)

    def __len__(self) -> int:
        return len(self.rows)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(LOG_COLUMNS + (["wall_time"] if self.include_wall_time else []))
        for r in self.rows:
            row = [
                r.iteration, r.phase, r.episode, repr(r.undiscounted_return), int(r.success),
                repr(r.critic_loss), repr(r.actor_objective), r.env_steps,
            ]
            if self.include_wall_time:
                row.append(repr(r.wall_time))
            w.writerow(row)
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "TrainLog":
        rows = list(csv.DictReader(io.StringIO(text)))
        log = cls(include_wall_time=bool(rows) and "wall_time" in rows[0])
        for r in rows:
            log.append(LogRow(
                int(r["iteration"]), r["phase"], int(r["episode"]), float(r["return"]), r["success"] == "1",
                float(r["critic_loss"]), float(r["actor_objective"]), int(r["env_steps"]),
                float(r.get("wall_time", 0.0) or 0.0),
            ))
        return log

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path


# ---------------------------------------------------------------------------
# training loop
# ---------------------------------------------------------------------------


def _her_strategy(env: Env, cfg: TrainerConfig) -> Optional[RelabelStrategy]:
    if not env.spec.goal_conditioned or cfg.her == "none":
        return None
    return RelabelStrategy(cfg.her, cfg.her_future_k)


def run_episode(
    pair: AgentPair,
    env: Env,
    learner: str,
    frozen_snapshot: Actor,
    cfg: TrainerConfig,
    learn: bool = True,
) -> tuple[EpisodeRecord, list[float], list[float]]:
    """One learning episode for ``learner`` against ``frozen_snapshot``.

    The learner's transitions (its own action, the shared reward) go to its
    buffer, after hindsight relabeling for goal-conditioned tasks. When
    ``learn`` is set, each environment step past warmup triggers
    ``updates_per_step`` gradient updates of the learner.
    """
    agent, buffer = pair.agent(learner), pair.buffer(learner)
    k = pair.episodes[learner]
    streams = EpisodeStreams.derive(cfg.seed, _LEARNER_CODE[learner], k)
    her = _her_strategy(env, cfg)
    critic_losses: list[float] = []
    objectives: list[float] = []

    def on_step(tr: Transition) -> None:
        if her is None:
            buffer.push(tr)
        pair.steps[learner] += 1
        if learn and pair.steps[learner] > cfg.warmup_steps and len(buffer) > 0:
            for _ in range(cfg.updates_per_step):
                batch = buffer.sample(agent.config.batch_size, agent.rng)
                c, a = agent.update(batch)
                critic_losses.append(c)
                objectives.append(a)

    if learner == PROTAGONIST:
        prot, adv = agent, frozen_snapshot
    else:
        prot, adv = frozen_snapshot, agent
    frozen_det = not cfg.frozen_stochastic
    record = rollout(
        env, prot, adv, cfg.mode, cfg.amplitude, streams, record=learner,
        protagonist_deterministic=frozen_det and learner != PROTAGONIST,
        adversary_deterministic=frozen_det and learner != ADVERSARY,
        on_step=on_step,
    )
    if her is not None:
        buffer.extend(relabel_episode(record, her, env.compute_reward, env.achieved_goal, streams.relabel))
    pair.episodes[learner] += 1
    return record, critic_losses, objectives


def _phase(pair, env, cfg, learner, frozen, n_episodes, iteration, log, learn=True) -> None:
    for e in range(n_episodes):
        t0 = time.perf_counter()
        record, losses, objectives = run_episode(pair, env, learner, frozen, cfg, learn=learn)
        log.append(LogRow(
            iteration, learner, e, record.undiscounted_return, record.success,
            float(np.mean(losses)) if losses else float("nan"),
            float(np.mean(objectives)) if objectives else float("nan"),
            pair.steps[learner], time.perf_counter() - t0,
        ))


def train_iteration(pair: AgentPair, env: Env, cfg: TrainerConfig, iteration: int = 0, baseline: bool = False) -> TrainLog:
    """Protagonist phase then adversary phase; returns this iteration's log rows.

    With ``baseline`` the adversary is replaced by the zero action and its
    phase is skipped.
    """
    log = TrainLog(include_wall_time=cfg.log_wall_time)
    if baseline:
        frozen_adv: Actor = ZeroPolicy(adversary_action_dim(env, cfg.mode))
    else:
        frozen_adv = pair.adversary.snapshot()
    _phase(pair, env, cfg, PROTAGONIST, frozen_adv, cfg.m_protagonist_episodes, iteration, log)
    if not baseline:
        _phase(pair, env, cfg, ADVERSARY, pair.protagonist.snapshot(), cfg.n_adversary_episodes, iteration, log)
    return log


@dataclass
class TrainResult:
    pair: AgentPair
    log: TrainLog
    protagonist_path: Optional[Path] = None
    adversary_path: Optional[Path] = None
    log_path: Optional[Path] = None


PROTAGONIST_CKPT = "protagonist.json"
ADVERSARY_CKPT = "adversary.json"
TRAIN_LOG = "train_log.csv"
EFFECTIVE_CONFIG = "config.json"


def _prepare_output(output_dir: Optional[Union[str, Path]]) -> Optional[Path]:
    if output_dir is None:
        return None
    out = Path(output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise OSError(f"output directory {out} is not writable: {exc}") from exc
    return out


def train(
    cfg: TrainerConfig,
    protagonist_cfg: Optional[SacConfig] = None,
    adversary_cfg: Optional[SacConfig] = None,
    output_dir: Optional[Union[str, Path]] = None,
    baseline: bool = False,
    effective_config: Optional[dict[str, Any]] = None,
    progress: Optional[Callable[[int, TrainLog], None]] = None,
) -> TrainResult:
    """Run ``n_iter`` alternating iterations; optionally write artifacts.

    Artifacts: final ``protagonist.json``/``adversary.json`` checkpoints
    (no adversary in baseline mode), per-iteration checkpoints under
    ``checkpoints/``, ``train_log.csv`` and, when given, the effective
    configuration as ``config.json``.
    """
    env = make_env(cfg.env_id)
    protagonist_cfg = protagonist_cfg or SacConfig(role="maximizer")
    adversary_cfg = adversary_cfg or SacConfig(role="minimizer")
    out = _prepare_output(output_dir)
    if out is not None and effective_config is not None:
        write_json(effective_config, out / EFFECTIVE_CONFIG)
    pair = make_pair(env, cfg, protagonist_cfg, adversary_cfg)
    log = TrainLog(include_wall_time=cfg.log_wall_time)
    for i in range(cfg.n_iter):
        part = train_iteration(pair, env, cfg, iteration=i, baseline=baseline)
        log.rows.extend(part.rows)
        if progress is not None:
            progress(i, part)
        if out is not None and cfg.checkpoint_every and (i + 1) % cfg.checkpoint_every == 0:
            ckpt_dir = out / "checkpoints" / f"iter_{i + 1:04d}"
            pair.protagonist.save(ckpt_dir / PROTAGONIST_CKPT)
            if not baseline:
                pair.adversary.save(ckpt_dir / ADVERSARY_CKPT)
    result = TrainResult(pair, log)
    if out is not None:
        result.protagonist_path = pair.protagonist.save(out / PROTAGONIST_CKPT)
        if not baseline:
            result.adversary_path = pair.adversary.save(out / ADVERSARY_CKPT)
        result.log_path = log.write(out / TRAIN_LOG)
    return result


def train_baseline(cfg: TrainerConfig, protagonist_cfg: Optional[SacConfig] = None, **kw) -> TrainResult:
    """Plain SAC: the adversary is locked to the zero action and never trained."""
    return train(cfg, protagonist_cfg, None, baseline=True, **kw)
