import json

import pytest

from advsac.cli import EXIT_FAILURE, EXIT_OK, EXIT_USAGE, main
from advsac.config import ENV_DEFAULTS, OUTPUT_ROOT_ENV, SCHEMA_VERSION, RunConfig
from advsac.errors import ConfigError
from advsac.evaluation import SweepResult

TINY = ["--set", "protagonist.hidden=[8,8]", "--set", "adversary.hidden=[8,8]",
        "--set", "protagonist.batch_size=8", "--set", "adversary.batch_size=8",
        "--set", "trainer.warmup_steps=10", "--set", "trainer.m_protagonist_episodes=1",
        "--set", "trainer.n_adversary_episodes=1"]


@pytest.fixture(autouse=True)
def _isolated(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    monkeypatch.delenv(OUTPUT_ROOT_ENV, raising=False)


def _train(out, env="turnlite", *extra):
    return main(["train", "--env", env, "--n-iter", "1", "--output-dir", str(out), *TINY, *extra])


@pytest.fixture
def turn_run(tmp_path):
    out = tmp_path / "turn"
    assert _train(out) == EXIT_OK
    return out


# -- configuration ----------------------------------------------------------------

def test_defaults_and_round_trip(tmp_path):
    cfg = RunConfig.from_dict({"trainer": {"env_id": "picklite2d"}})
    assert cfg.trainer.mode == "external" and cfg.trainer.her == "future"
    assert cfg.adversary.temperature == 0.2 and cfg.protagonist.temperature == 0.05
    path = cfg.write(tmp_path / "c.json")
    assert RunConfig.load(path).to_dict() == cfg.to_dict()


def test_every_env_default_builds():
    for env_id in ENV_DEFAULTS:
        assert RunConfig.from_dict({"trainer": {"env_id": env_id}}).trainer.env_id == env_id


@pytest.mark.parametrize("obj", [
    {"trainer": {"nonsense": 1}},
    {"protagonist": {"learning_rate": 1e-3}},
    {"extras": {}},
    {"schema_version": SCHEMA_VERSION + 1},
    {"trainer": {"env_id": "cartpole"}},
    {"trainer": []},
    {"protagonist": {"role": "minimizer"}},
    {"adversary": {"gamma": 0.9}},
])
def test_config_rejects(obj):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(obj)


def test_precedence():
    # flag > file > per-env default > dataclass default
    file_obj = {"trainer": {"env_id": "turnlite", "n_iter": 7, "seed": 3}}
    cfg = RunConfig.from_dict(file_obj, {"trainer": {"seed": 11}})
    assert cfg.trainer.seed == 11 and cfg.trainer.n_iter == 7
    assert cfg.protagonist.temperature == ENV_DEFAULTS["turnlite"]["protagonist"]["temperature"]
    assert cfg.protagonist.tau == 0.005


def test_output_root_env(monkeypatch, tmp_path):
    cfg = RunConfig.from_dict({"output_dir": "runs/x"})
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert cfg.resolved_output_dir() == tmp_path / "root" / "runs" / "x"
    absolute = RunConfig.from_dict({"output_dir": str(tmp_path / "abs")})
    assert absolute.resolved_output_dir() == tmp_path / "abs"


# -- train -----------------------------------------------------------------------------

def test_train_smoke_pointgoal(tmp_path):
    out = tmp_path / "pg"
    assert _train(out, "pointgoal") == EXIT_OK
    for name in ("protagonist.json", "adversary.json", "train_log.csv", "config.json"):
        assert (out / name).is_file()
    effective = json.loads((out / "config.json").read_text())
    assert effective["invocation"]["command"] == "train"
    assert RunConfig.from_dict(effective).trainer.env_id == "pointgoal"


def test_train_baseline_picklite(tmp_path):
    out = tmp_path / "pk"
    assert _train(out, "picklite2d", "--baseline") == EXIT_OK
    assert (out / "protagonist.json").is_file() and not (out / "adversary.json").exists()


def test_train_byte_identical(tmp_path, monkeypatch):
    # same relative output_dir under two roots, so even config.json matches
    for d in ("a", "b"):
        monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / d))
        assert _train("run") == EXIT_OK
    for name in ("train_log.csv", "protagonist.json", "adversary.json", "config.json"):
        assert (tmp_path / "a" / "run" / name).read_bytes() == (tmp_path / "b" / "run" / name).read_bytes()


def test_train_from_config_file(tmp_path):
    path = tmp_path / "run.json"
    path.write_text(json.dumps({"trainer": {"env_id": "bandit", "n_iter": 3, "warmup_steps": 1},
                                "protagonist": {"batch_size": 2}, "adversary": {"batch_size": 2},
                                "output_dir": str(tmp_path / "b")}))
    assert main(["train", "--config", str(path)]) == EXIT_OK
    assert len((tmp_path / "b" / "train_log.csv").read_text().splitlines()) == 1 + 3 * 2


def test_usage_errors(tmp_path):
    assert main(["train", "--config", str(tmp_path / "missing.json")]) == EXIT_USAGE
    assert main(["train", "--set", "trainer.bogus=1"]) == EXIT_USAGE
    assert main(["train", "--set", "nodot=1"]) == EXIT_USAGE
    assert main(["train", "--env", "cartpole"]) == EXIT_USAGE
    assert main(["frobnicate"]) == EXIT_USAGE
    assert main([]) == EXIT_USAGE


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert _train(blocker / "run") == EXIT_FAILURE


# -- sweep ----------------------------------------------------------------------------------

def _sweep(turn_run, out, *extra):
    return main(["sweep", "--env", "turnlite", "--policy", str(turn_run / "protagonist.json"),
                 "--episodes", "2", "--amplitudes", "0,0.6", "--output-dir", str(out), *extra])


def test_sweep_single_attack(turn_run, tmp_path):
    out = tmp_path / "s"
    assert _sweep(turn_run, out, "--attack", "none") == EXIT_OK
    assert sorted(p.name for p in out.glob("sweep_*.csv")) == ["sweep_none.csv"]
    assert len(SweepResult.read(out / "sweep_none.csv").cells) == 2


def test_sweep_all_with_baseline(turn_run, tmp_path):
    out = tmp_path / "s"
    ckpt = str(turn_run / "adversary.json")
    assert _sweep(turn_run, out, "--adversary-ckpt", ckpt, "--baseline-policy", str(turn_run / "protagonist.json")) == EXIT_OK
    assert sorted(p.name for p in out.glob("sweep_*.csv")) == \
        ["sweep_adversary_policy.csv", "sweep_none.csv", "sweep_random_uniform.csv"]
    assert len(list(out.glob("panel_*.csv"))) == 3
    assert "(iii)" in (out / "comparison.txt").read_text()


def test_sweep_adversary_needs_checkpoint(turn_run, tmp_path):
    assert _sweep(turn_run, tmp_path / "s", "--attack", "adversary") == EXIT_USAGE
    assert _sweep(turn_run, tmp_path / "s", "--attack", "adversary", "--adversary-ckpt",
                  str(tmp_path / "nope.json")) == EXIT_FAILURE


def test_sweep_byte_identical(turn_run, tmp_path):
    ckpt = str(turn_run / "adversary.json")
    for d in ("a", "b"):
        assert _sweep(turn_run, tmp_path / d, "--adversary-ckpt", ckpt) == EXIT_OK
    for f in (tmp_path / "a").glob("*.csv"):
        assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()


# -- gradcheck ------------------------------------------------------------------------------

def test_gradcheck_exit_codes(capsys):
    assert main(["gradcheck"]) == EXIT_OK
    assert "max relative error" in capsys.readouterr().out
    assert main(["gradcheck", "--trials", "2", "--tolerance", "0"]) == EXIT_FAILURE
    assert main(["gradcheck", "--trials", "0"]) == EXIT_USAGE
    assert main(["gradcheck", "--tolerance", "-1"]) == EXIT_USAGE


# -- rollout --------------------------------------------------------------------------------

def test_rollout_scripted_pointgoal(tmp_path):
    out = tmp_path / "r"
    assert main(["rollout", "--env", "pointgoal", "--scripted", "--output-dir", str(out)]) == EXIT_OK
    rows = (out / "episode_0000.csv").read_text().splitlines()
    assert 2 <= len(rows) <= 31
    assert rows[-1].split(",")[rows[0].split(",").index("success")] == "1"


def test_rollout_usage(turn_run, tmp_path):
    assert main(["rollout", "--env", "pointgoal"]) == EXIT_USAGE
    assert main(["rollout", "--env", "turnlite", "--scripted"]) == EXIT_USAGE
    assert main(["rollout", "--env", "turnlite", "--policy", str(turn_run / "protagonist.json"),
                 "--attack", "adversary"]) == EXIT_USAGE
    assert main(["rollout", "--env", "pointgoal", "--policy", str(turn_run / "protagonist.json"),
                 "--output-dir", str(tmp_path / "x")]) == EXIT_FAILURE


def test_rollout_with_adversary(turn_run, tmp_path, capsys):
    out = tmp_path / "r"
    assert main(["rollout", "--env", "turnlite", "--policy", str(turn_run / "protagonist.json"), "--attack",
                 "adversary", "--adversary-ckpt", str(turn_run / "adversary.json"), "--episodes", "2",
                 "--output-dir", str(out)]) == EXIT_OK
    assert (out / "episode_0001.csv").is_file()
    assert capsys.readouterr().out.count("episode ") == 2
