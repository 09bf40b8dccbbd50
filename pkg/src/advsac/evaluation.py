"""Robustness sweeps: frozen policies under no, random or learned attack.

Episode ``j`` of every cell resets the environment and draws protagonist
noise from the same stream, so cells differ only in the disturbance
(common random numbers). The disturbance noise itself is keyed by the
amplitude, so adding amplitudes to a grid never changes existing cells.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.stats import spearmanr

from .core import Mode
from .envs import make_env
from .errors import ConfigError, DimensionError
from .sac import FrozenPolicy, load_policy
from .trainer import Actor, EpisodeStreams, UniformNoise, ZeroPolicy, adversary_action_dim, rollout

DEFAULT_AMPLITUDES = (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4)
DEFAULT_EPISODES_PER_CELL = 50
# amplitude column value for external-mode cells, where the adversary is simply on
EXTERNAL_AMPLITUDE = 1.0

ATTACK_KINDS = ("none", "random_uniform", "adversary_policy")
_ATTACK_CODE = {k: i for i, k in enumerate(ATTACK_KINDS)}
_EVAL_STREAM = 2


@dataclass
class AttackSpec:
    kind: str = "none"
    adversary_checkpoint: Optional[str] = None
    adversary_deterministic: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ATTACK_KINDS:
            raise ConfigError(f"attack kind must be one of {ATTACK_KINDS}, got {self.kind!r}")
        if self.kind == "adversary_policy" and not self.adversary_checkpoint:
            raise ConfigError("adversary_policy attack requires an adversary checkpoint")


@dataclass
class SweepSpec:
    env_id: str
    policy_checkpoint: Optional[str] = None
    attack: AttackSpec = field(default_factory=AttackSpec)
    amplitudes: Sequence[float] = DEFAULT_AMPLITUDES
    episodes_per_cell: int = DEFAULT_EPISODES_PER_CELL
    seed: int = 0
    deterministic_policy: bool = True

    def __post_init__(self) -> None:
        self.amplitudes = tuple(float(a) for a in self.amplitudes)
        if self.episodes_per_cell < 1:
            raise ConfigError("episodes_per_cell must be >= 1")
        if any(a < 0 for a in self.amplitudes):
            raise ConfigError("amplitudes must be nonnegative")
        if list(self.amplitudes) != sorted(self.amplitudes):
            raise ConfigError("amplitudes must be sorted ascending")


@dataclass(frozen=True)
class CellStats:
    attack: str
    amplitude: float
    episodes: int
    mean_return: float
    std_return: float
    success_rate: float


def _amp_key(amplitude: float) -> int:
    return int(round(amplitude * 1_000_000))


def _load_adversary(attack: AttackSpec, env, mode: Mode) -> Actor:
    d = adversary_action_dim(env, mode)
    if attack.kind == "none":
        return ZeroPolicy(d)
    if attack.kind == "random_uniform":
        return UniformNoise(d)
    adversary = load_policy(attack.adversary_checkpoint)
    if adversary.action_dim != d:
        raise DimensionError(f"adversary checkpoint emits {adversary.action_dim} dims, {env.env_id} expects {d}")
    return adversary


def _check_policy(policy: FrozenPolicy, env) -> None:
    if getattr(policy, "action_dim", env.spec.protagonist_action_dim) != env.spec.protagonist_action_dim:
        raise DimensionError(f"policy emits {policy.action_dim} dims, {env.env_id} expects {env.spec.protagonist_action_dim}")
    if getattr(policy, "state_dim", env.spec.state_dim) != env.spec.state_dim:
        raise DimensionError(f"policy expects {policy.state_dim} state dims, {env.env_id} has {env.spec.state_dim}")


def evaluate_cell(
    spec: SweepSpec,
    amplitude: float,
    policy: Optional[Actor] = None,
    adversary: Optional[Actor] = None,
) -> CellStats:
    """Run ``episodes_per_cell`` episodes of the protagonist under ``spec.attack``.

    ``policy``/``adversary`` override the checkpoints named in ``spec``
    (useful for scripted policies and in-memory agents).
    """
    env = make_env(spec.env_id)
    mode = env.mode
    if policy is None:
        if not spec.policy_checkpoint:
            raise ConfigError("no protagonist policy given")
        policy = load_policy(spec.policy_checkpoint)
    _check_policy(policy, env)
    if adversary is None or spec.attack.kind == "none":
        adversary = _load_adversary(spec.attack, env, mode)
    amp = float(amplitude) if mode is Mode.INTERNAL else 0.0
    returns, successes = [], []
    for j in range(spec.episodes_per_cell):
        streams = EpisodeStreams.derive(spec.seed, _EVAL_STREAM, j)
        streams.adversary = np.random.default_rng([spec.seed, _EVAL_STREAM, j, _amp_key(amp)])
        record = rollout(
            env, policy, adversary, mode, amp, streams,
            protagonist_deterministic=spec.deterministic_policy,
            adversary_deterministic=spec.attack.adversary_deterministic,
        )
        returns.append(record.undiscounted_return)
        successes.append(record.success)
    returns = np.asarray(returns)
    return CellStats(
        attack=spec.attack.kind,
        amplitude=float(amplitude) if mode is Mode.INTERNAL else EXTERNAL_AMPLITUDE,
        episodes=spec.episodes_per_cell,
        mean_return=float(returns.mean()),
        std_return=float(returns.std()),
        success_rate=float(np.mean(successes)),
    )


SWEEP_COLUMNS = ["env_id", "attack", "amplitude", "episodes", "mean_return", "std_return", "success_rate", "seed"]


@dataclass
class SweepResult:
    env_id: str
    seed: int
    cells: list[CellStats] = field(default_factory=list)

    def cell(self, attack: str, amplitude: float) -> CellStats:
        for c in self.cells:
            if c.attack == attack and c.amplitude == amplitude:
                return c
        raise KeyError((attack, amplitude))

    def attacks(self) -> list[str]:
        return sorted({c.attack for c in self.cells}, key=ATTACK_KINDS.index)

    def series(self, attack: str) -> list[CellStats]:
        return sorted((c for c in self.cells if c.attack == attack), key=lambda c: c.amplitude)

    def merged(self, other: "SweepResult") -> "SweepResult":
        if other.env_id != self.env_id:
            raise ConfigError("cannot merge sweeps of different environments")
        return SweepResult(self.env_id, self.seed, self.cells + other.cells)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_COLUMNS)
        for c in self.cells:
            w.writerow([
                self.env_id, c.attack, repr(c.amplitude), c.episodes, repr(c.mean_return),
                repr(c.std_return), repr(c.success_rate), self.seed,
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SweepResult":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows:
            raise ConfigError("empty sweep CSV")
        cells = [
            CellStats(r["attack"], float(r["amplitude"]), int(r["episodes"]), float(r["mean_return"]),
                      float(r["std_return"]), float(r["success_rate"]))
            for r in rows
        ]
        return cls(rows[0]["env_id"], int(rows[0]["seed"]), cells)

    def write(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_csv())
        return path

    @classmethod
    def read(cls, path: Union[str, Path]) -> "SweepResult":
        return cls.from_csv(Path(path).read_text())


def sweep(spec: SweepSpec, policy: Optional[Actor] = None, adversary: Optional[Actor] = None) -> SweepResult:
    """Evaluate every amplitude of the grid (one cell in external mode)."""
    env = make_env(spec.env_id)
    if policy is None:
        policy = load_policy(spec.policy_checkpoint) if spec.policy_checkpoint else None
        if policy is None:
            raise ConfigError("no protagonist policy given")
    if adversary is None:
        adversary = _load_adversary(spec.attack, env, env.mode)
    amplitudes = spec.amplitudes if env.mode is Mode.INTERNAL else (EXTERNAL_AMPLITUDE,)
    cells = [evaluate_cell(spec, a, policy=policy, adversary=adversary) for a in amplitudes]
    return SweepResult(spec.env_id, spec.seed, cells)


# ---------------------------------------------------------------------------
# comparison
# ---------------------------------------------------------------------------


@dataclass
class CellDelta:
    attack: str
    amplitude: float
    mean_return: float
    success_rate: float


@dataclass
class ComparisonReport:
    """Per-cell deltas ``a - b`` and the three ordering checks.

    ``adv_trained_beats_baseline``: a >= b under adversary attack on a
    strict majority of cells. ``adversary_stronger_than_random``: on the
    baseline, adversary-attack return <= random-attack return on a strict
    majority of amplitudes. ``baseline_nonincreasing``: Spearman rank
    correlation of baseline return against amplitude is <= 0 for every
    disturbing attack present. Checks that lack the needed cells are None.
    """

    deltas: list[CellDelta]
    adv_trained_beats_baseline: Optional[bool]
    adversary_stronger_than_random: Optional[bool]
    baseline_nonincreasing: Optional[bool]
    spearman: dict[str, float]

    def lines(self) -> list[str]:
        out = [f"{d.attack:>16} amp={d.amplitude:.2f} d_return={d.mean_return:+.4f} d_success={d.success_rate:+.3f}"
               for d in self.deltas]
        out.append(f"(i)   adv-trained >= baseline under adversary attack (majority): {self.adv_trained_beats_baseline}")
        out.append(f"(ii)  adversary attack <= random attack on baseline (majority): {self.adversary_stronger_than_random}")
        out.append(f"(iii) baseline return non-increasing in amplitude (spearman <= 0): {self.baseline_nonincreasing} {self.spearman}")
        return out


def _majority(flags: Sequence[bool]) -> Optional[bool]:
    if not flags:
        return None
    return sum(flags) * 2 > len(flags)


def rank_correlation(amplitudes: Sequence[float], values: Sequence[float]) -> float:
    if len(amplitudes) < 2 or np.ptp(values) == 0.0:
        return float("nan")
    rho = spearmanr(amplitudes, values).statistic
    return float(rho)


def compare_policies(result_a: SweepResult, result_b: SweepResult) -> ComparisonReport:
    """Compare an adversarially trained policy (``a``) with a baseline (``b``)."""
    key_a = sorted((c.attack, c.amplitude) for c in result_a.cells)
    key_b = sorted((c.attack, c.amplitude) for c in result_b.cells)
    if result_a.env_id != result_b.env_id or key_a != key_b:
        raise ConfigError("sweep results cover different environments or grids")
    deltas = []
    for attack, amp in key_a:
        ca, cb = result_a.cell(attack, amp), result_b.cell(attack, amp)
        deltas.append(CellDelta(attack, amp, ca.mean_return - cb.mean_return, ca.success_rate - cb.success_rate))

    adv_cells = [d for d in deltas if d.attack == "adversary_policy"]
    check_i = _majority([d.mean_return >= 0.0 for d in adv_cells])

    check_ii = None
    if {"adversary_policy", "random_uniform"} <= set(result_b.attacks()):
        adv = {c.amplitude: c.mean_return for c in result_b.series("adversary_policy")}
        rnd = {c.amplitude: c.mean_return for c in result_b.series("random_uniform")}
        check_ii = _majority([adv[a] <= rnd[a] for a in sorted(adv) if a in rnd])

    spearman = {}
    for attack in ("random_uniform", "adversary_policy"):
        series = result_b.series(attack)
        if len(series) >= 2:
            spearman[attack] = rank_correlation([c.amplitude for c in series], [c.mean_return for c in series])
    # a constant series (nan correlation) is non-increasing
    check_iii = None if not spearman else all(math.isnan(r) or r <= 0.0 for r in spearman.values())
    return ComparisonReport(deltas, check_i, check_ii, check_iii, spearman)


PANELS = {
    "panel_a_adversary_attack.csv": ("adversary_policy", ("adv_trained", "baseline")),
    "panel_b_random_attack.csv": ("random_uniform", ("adv_trained", "baseline")),
    "panel_c_baseline_adversary_vs_random.csv": (None, ("adversary_policy", "random_uniform")),
}
PANEL_COLUMNS = ["panel", "series", "attack", "amplitude", "episodes", "mean_return", "std_return", "success_rate"]


def write_panels(adv_trained: SweepResult, baseline: SweepResult, out_dir: Union[str, Path]) -> list[Path]:
    """Long-format plot tables: both policies under adversary attack, both
    under random attack, and the baseline under adversary vs random attack."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, (attack, series_names) in PANELS.items():
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(PANEL_COLUMNS)
        panel = name.split("_")[1]
        for series in series_names:
            if attack is None:
                cells = baseline.series(series)
                label = f"baseline/{series}"
            else:
                cells = (adv_trained if series == "adv_trained" else baseline).series(attack)
                label = series
            for c in cells:
                w.writerow([panel, label, c.attack, repr(c.amplitude), c.episodes, repr(c.mean_return),
                            repr(c.std_return), repr(c.success_rate)])
        path = out / name
        path.write_text(buf.getvalue())
        paths.append(path)
    return paths
