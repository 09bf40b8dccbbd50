"""``advsac`` command line: train, sweep, gradcheck, rollout.

Exit status is 0 on success, 1 on runtime failure (including missing
checkpoints and failed checks) and 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

from . import __version__
from .config import RunConfig
from .core import Mode, write_episode_csv
from .envs import make_env
from .envs.picklite import on_table
from .envs.pointgoal import GreedyPointPolicy
from .errors import ConfigError, DimensionError, DomainError
from .evaluation import AttackSpec, SweepResult, SweepSpec, compare_policies, sweep, write_panels
from .nn import gradcheck
from .sac import load_policy
from .serialization import write_json
from .trainer import EFFECTIVE_CONFIG, EpisodeStreams, UniformNoise, ZeroPolicy, adversary_action_dim, rollout, train

log = logging.getLogger("advsac")

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2
ATTACK_FLAGS = {"none": "none", "random": "random_uniform", "adversary": "adversary_policy"}


class UsageError(Exception):
    pass


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _overrides(args: argparse.Namespace) -> dict[str, dict[str, Any]]:
    """Flat flags and ``--set section.field=value`` pairs as config layers."""
    out: dict[str, dict[str, Any]] = {"trainer": {}, "protagonist": {}, "adversary": {}, "sweep": {}, "run": {}}
    for item in getattr(args, "set", None) or []:
        key, sep, value = item.partition("=")
        section, dot, name = key.partition(".")
        if not sep or not dot or section not in out or section == "run":
            raise UsageError(f"--set expects section.field=value, got {item!r}")
        out[section][name] = _parse_value(value)
    flat = {
        "env": ("trainer", "env_id"),
        "seed": ("trainer", "seed"),
        "n_iter": ("trainer", "n_iter"),
        "amplitude": ("trainer", "amplitude"),
        "episodes": ("sweep", "episodes_per_cell"),
        "amplitudes": ("sweep", "amplitudes"),
        "output_dir": ("run", "output_dir"),
    }
    for attr, (section, name) in flat.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[section][name] = value
    return {k: v for k, v in out.items() if v}


def _load_config(args: argparse.Namespace) -> RunConfig:
    if args.config and not Path(args.config).is_file():
        raise ConfigError(f"config file not found: {args.config}")
    return RunConfig.load(args.config, _overrides(args))


def _effective(cfg: RunConfig, command: str, **details: Any) -> dict[str, Any]:
    d = cfg.to_dict()
    d["invocation"] = {"command": command, **details}
    return d


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    cfg = _load_config(args)
    out = cfg.resolved_output_dir()

    def progress(i, part):
        last = part.rows[-1] if part.rows else None
        if last is not None:
            log.info("iteration %d/%d: last return %.4f, env steps %d", i + 1, cfg.trainer.n_iter, last.undiscounted_return, last.env_steps)

    result = train(
        cfg.trainer, cfg.protagonist, cfg.adversary, output_dir=out, baseline=args.baseline,
        effective_config=_effective(cfg, "train", baseline=args.baseline), progress=progress,
    )
    print(f"protagonist: {result.protagonist_path}")
    if result.adversary_path is not None:
        print(f"adversary: {result.adversary_path}")
    print(f"log: {result.log_path}")
    return EXIT_OK


def _attack_kinds(flag: str) -> list[str]:
    return list(ATTACK_FLAGS.values()) if flag == "all" else [ATTACK_FLAGS[flag]]


def _run_sweeps(cfg: RunConfig, policy_path: str, kinds: list[str], adversary_ckpt: Optional[str]) -> SweepResult:
    result = None
    for kind in kinds:
        spec = SweepSpec(
            env_id=cfg.trainer.env_id,
            policy_checkpoint=policy_path,
            attack=AttackSpec(kind, adversary_ckpt if kind == "adversary_policy" else None),
            amplitudes=cfg.sweep.amplitudes,
            episodes_per_cell=cfg.sweep.episodes_per_cell,
            seed=cfg.seed,
            deterministic_policy=cfg.sweep.deterministic_policy,
        )
        part = sweep(spec)
        result = part if result is None else result.merged(part)
    return result


def cmd_sweep(args: argparse.Namespace) -> int:
    kinds = _attack_kinds(args.attack)
    if "adversary_policy" in kinds and not args.adversary_ckpt:
        raise UsageError("--attack adversary/all requires --adversary-ckpt")
    cfg = _load_config(args)
    for path in [args.policy, args.adversary_ckpt, args.baseline_policy]:
        if path and not Path(path).is_file():
            raise FileNotFoundError(f"checkpoint not found: {path}")
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_json(_effective(cfg, "sweep", policy=args.policy, attack=args.attack, adversary_ckpt=args.adversary_ckpt,
                          baseline_policy=args.baseline_policy), out / EFFECTIVE_CONFIG)
    result = _run_sweeps(cfg, args.policy, kinds, args.adversary_ckpt)
    for kind in kinds:
        part = SweepResult(result.env_id, result.seed, result.series(kind))
        print(f"{kind}: {part.write(out / f'sweep_{kind}.csv')}")
    if args.baseline_policy:
        base = _run_sweeps(cfg, args.baseline_policy, kinds, args.adversary_ckpt)
        for kind in kinds:
            SweepResult(base.env_id, base.seed, base.series(kind)).write(out / f"baseline_sweep_{kind}.csv")
        for path in write_panels(result, base, out):
            print(f"panel: {path}")
        report = compare_policies(result, base)
        text = "\n".join(report.lines()) + "\n"
        (out / "comparison.txt").write_text(text)
        print(text, end="")
    return EXIT_OK


def cmd_gradcheck(args: argparse.Namespace) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    if args.tolerance < 0:
        raise UsageError("--tolerance must be >= 0")
    report = gradcheck(n_trials=args.trials, tolerance=args.tolerance, seed=args.seed)
    status = "PASS" if report.passed else "FAIL"
    print(f"gradcheck {status}: {report.trials} architectures, max relative error {report.max_rel_error:.3e} "
          f"(tolerance {report.tolerance:g})")
    return EXIT_OK if report.passed else EXIT_FAILURE


def cmd_rollout(args: argparse.Namespace) -> int:
    if (args.policy is None) == (not args.scripted):
        raise UsageError("give exactly one of --policy or --scripted")
    kind = ATTACK_FLAGS[args.attack]
    if kind == "adversary_policy" and not args.adversary_ckpt:
        raise UsageError("--attack adversary requires --adversary-ckpt")
    cfg = _load_config(args)
    env = make_env(cfg.trainer.env_id)
    if args.scripted:
        if env.env_id != "pointgoal":
            raise UsageError("--scripted is only available for pointgoal")
        policy = GreedyPointPolicy()
    else:
        policy = load_policy(args.policy)
    adv_dim = adversary_action_dim(env, env.mode)
    if kind == "none":
        adversary = ZeroPolicy(adv_dim)
    elif kind == "random_uniform":
        adversary = UniformNoise(adv_dim)
    else:
        adversary = load_policy(args.adversary_ckpt)
        if adversary.action_dim != adv_dim:
            raise DimensionError(f"adversary emits {adversary.action_dim} dims, {env.env_id} expects {adv_dim}")
    amplitude = args.rollout_amplitude if env.mode is Mode.INTERNAL else 0.0
    out = cfg.resolved_output_dir()
    out.mkdir(parents=True, exist_ok=True)
    write_json(_effective(cfg, "rollout", policy=args.policy, scripted=args.scripted, attack=args.attack,
                          adversary_ckpt=args.adversary_ckpt, amplitude=amplitude, episodes=args.n_episodes,
                          stochastic=args.stochastic), out / EFFECTIVE_CONFIG)
    for j in range(args.n_episodes):
        streams = EpisodeStreams.derive(cfg.seed, 3, j)
        record = rollout(env, policy, adversary, env.mode, amplitude, streams,
                         protagonist_deterministic=not args.stochastic, adversary_deterministic=not args.stochastic)
        path = write_episode_csv(record, out / f"episode_{j:04d}.csv")
        extra = ""
        if env.env_id == "picklite2d":
            extra = f" block_on_table={int(on_table(record.transitions[-1].next_state[4:6]))}"
        print(f"episode {j}: steps={len(record.transitions)} return={record.undiscounted_return:.4f} "
              f"success={int(record.success)}{extra} -> {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="run configuration JSON (defaults per environment if omitted)")
    p.add_argument("--env", help="environment id: turnlite, picklite2d, pointgoal, bandit")
    p.add_argument("--seed", type=int, help="root seed for all randomness")
    p.add_argument("--output-dir", dest="output_dir", help="artifact directory (relative to $ADVSAC_OUTPUT_ROOT if set)")
    p.add_argument("--set", action="append", metavar="SECTION.FIELD=VALUE",
                   help="override any config field; VALUE is parsed as JSON when possible")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advsac", description="Adversarially trained soft actor-critic.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a protagonist (and adversary)")
    _add_common(p)
    p.add_argument("--n-iter", dest="n_iter", type=int, help="alternating iterations")
    p.add_argument("--amplitude", type=float, help="training disturbance amplitude (internal mode)")
    p.add_argument("--baseline", action="store_true", help="plain SAC; the adversary stays at zero")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="evaluate a policy across attacks and amplitudes")
    _add_common(p)
    p.add_argument("--policy", required=True, help="protagonist checkpoint")
    p.add_argument("--attack", choices=[*ATTACK_FLAGS, "all"], default="all")
    p.add_argument("--adversary-ckpt", dest="adversary_ckpt", help="adversary checkpoint for learned attacks")
    p.add_argument("--baseline-policy", dest="baseline_policy",
                   help="second protagonist to compare against; writes panel tables and a comparison report")
    p.add_argument("--episodes", type=int, help="episodes per cell")
    p.add_argument("--amplitudes", type=lambda s: [float(x) for x in s.split(",")], help="comma-separated grid")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("gradcheck", help="finite-difference check of network gradients")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--tolerance", type=float, default=1e-4)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("rollout", help="write per-step episode CSVs for inspection")
    _add_common(p)
    p.add_argument("--policy", help="protagonist checkpoint")
    p.add_argument("--scripted", action="store_true", help="use the scripted straight-line pointgoal controller")
    p.add_argument("--attack", choices=list(ATTACK_FLAGS), default="none")
    p.add_argument("--adversary-ckpt", dest="adversary_ckpt")
    p.add_argument("--amplitude", dest="rollout_amplitude", type=float, default=0.6,
                   help="disturbance amplitude (internal mode)")
    p.add_argument("--episodes", dest="n_episodes", type=int, default=1)
    p.add_argument("--stochastic", action="store_true", help="sample actions instead of using the mean")
    p.set_defaults(func=cmd_rollout)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"advsac {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, DimensionError, DomainError, ValueError, KeyError) as exc:
        print(f"advsac {args.command}: failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
