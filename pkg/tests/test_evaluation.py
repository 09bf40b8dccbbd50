import math

import numpy as np
import pytest

from advsac.envs.pointgoal import GreedyPointPolicy
from advsac.errors import ConfigError, DimensionError
from advsac.evaluation import (
    DEFAULT_AMPLITUDES,
    DEFAULT_EPISODES_PER_CELL,
    PANEL_COLUMNS,
    SWEEP_COLUMNS,
    AttackSpec,
    CellStats,
    SweepResult,
    SweepSpec,
    compare_policies,
    evaluate_cell,
    rank_correlation,
    sweep,
    write_panels,
)
from advsac.sac import SacAgent, SacConfig
from advsac.trainer import TrainerConfig, train

GRID = (0.0, 0.6, 1.2)


@pytest.fixture(scope="module")
def turn_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("turn")
    cfg = TrainerConfig(env_id="turnlite", n_iter=1, m_protagonist_episodes=1, n_adversary_episodes=1,
                        warmup_steps=10, her="none", checkpoint_every=0)
    small = dict(hidden=(8, 8), batch_size=8)
    train(cfg, SacConfig(role="maximizer", **small), SacConfig(role="minimizer", **small), output_dir=out)
    return out


def _spec(run, kind="none", **kw):
    kw.setdefault("amplitudes", GRID)
    kw.setdefault("episodes_per_cell", 3)
    attack = AttackSpec(kind, str(run / "adversary.json") if kind == "adversary_policy" else None)
    return SweepSpec("turnlite", str(run / "protagonist.json"), attack, **kw)


def _result(series):
    """Synthetic result: ``series`` maps attack -> returns over amplitudes 0, 0.5, 1."""
    cells = [CellStats(att, amp, 50, float(r), 0.0, 0.0)
             for att, rs in series.items() for amp, r in zip((0.0, 0.5, 1.0), rs)]
    return SweepResult("turnlite", 0, cells)


def test_defaults():
    assert DEFAULT_AMPLITUDES == (0.0, 0.2, 0.4, 0.6, 0.8, 1.0, 1.2, 1.4)
    assert DEFAULT_EPISODES_PER_CELL == 50


def test_spec_validation():
    with pytest.raises(ConfigError):
        AttackSpec("adversary_policy")
    with pytest.raises(ConfigError):
        AttackSpec("gusts")
    for kw in [{"episodes_per_cell": 0}, {"amplitudes": (0.4, 0.2)}, {"amplitudes": (-0.2, 0.0)}]:
        with pytest.raises(ConfigError):
            SweepSpec("turnlite", "p.json", **kw)


def test_none_attack_identical_across_amplitudes(turn_run):
    res = sweep(_spec(turn_run, "none"))
    assert len({(c.mean_return, c.std_return, c.success_rate) for c in res.cells}) == 1


@pytest.mark.parametrize("kind", ["random_uniform", "adversary_policy"])
def test_zero_amplitude_equals_no_attack(turn_run, kind):
    none = evaluate_cell(_spec(turn_run, "none"), 0.0)
    attacked = evaluate_cell(_spec(turn_run, kind), 0.0)
    assert (none.mean_return, none.std_return, none.success_rate) == \
        (attacked.mean_return, attacked.std_return, attacked.success_rate)


def test_row_counts(turn_run):
    assert len(sweep(_spec(turn_run, "random_uniform")).cells) == len(GRID)
    spec = SweepSpec("picklite2d", attack=AttackSpec("random_uniform"), amplitudes=GRID, episodes_per_cell=2)
    agent = SacAgent(8, 3, SacConfig(hidden=(8,)), goal_dim=2)
    res = sweep(spec, policy=agent.snapshot())
    assert len(res.cells) == 1 and res.cells[0].amplitude == 1.0


def test_scripted_pointgoal_always_succeeds():
    spec = SweepSpec("pointgoal", attack=AttackSpec("none"), amplitudes=(0.0,), episodes_per_cell=50)
    cell = evaluate_cell(spec, 0.0, policy=GreedyPointPolicy())
    assert cell.success_rate == 1.0 and cell.episodes == 50


def test_sweep_deterministic(turn_run):
    a = sweep(_spec(turn_run, "adversary_policy"))
    b = sweep(_spec(turn_run, "adversary_policy"))
    assert a.to_csv() == b.to_csv()


def test_wrong_dimensions_rejected(turn_run):
    with pytest.raises(DimensionError):
        sweep(SweepSpec("pointgoal", str(turn_run / "protagonist.json"), amplitudes=(0.0,), episodes_per_cell=1))
    spec = SweepSpec("pointgoal", attack=AttackSpec("adversary_policy", str(turn_run / "adversary.json")),
                     amplitudes=(0.0,), episodes_per_cell=1)
    with pytest.raises(DimensionError):
        sweep(spec, policy=GreedyPointPolicy())


def test_missing_checkpoint(tmp_path):
    with pytest.raises(FileNotFoundError):
        sweep(SweepSpec("turnlite", str(tmp_path / "nope.json"), amplitudes=(0.0,), episodes_per_cell=1))


def test_csv_round_trip(turn_run, tmp_path):
    res = sweep(_spec(turn_run, "random_uniform")).merged(sweep(_spec(turn_run, "none")))
    path = res.write(tmp_path / "s.csv")
    back = SweepResult.read(path)
    assert back.cells == res.cells and back.to_csv() == path.read_text()
    assert path.read_text().splitlines()[0].split(",") == SWEEP_COLUMNS


def test_std_is_population():
    spec = SweepSpec("pointgoal", attack=AttackSpec("none"), amplitudes=(0.0,), episodes_per_cell=5)
    cell = evaluate_cell(spec, 0.0, policy=GreedyPointPolicy())
    assert cell.std_return >= 0.0 and math.isfinite(cell.std_return)


# -- comparison ---------------------------------------------------------------------

def test_self_comparison_zero_deltas(turn_run):
    res = sweep(_spec(turn_run, "random_uniform")).merged(sweep(_spec(turn_run, "adversary_policy")))
    report = compare_policies(res, res)
    assert all(d.mean_return == 0.0 and d.success_rate == 0.0 for d in report.deltas)
    assert report.adv_trained_beats_baseline is True


def test_constructed_ordering():
    base = _result({"random_uniform": [10, 8, 6], "adversary_policy": [10, 2, 1]})
    report = compare_policies(base, base)
    assert report.adversary_stronger_than_random is True
    assert report.baseline_nonincreasing is True
    assert report.spearman == {"random_uniform": -1.0, "adversary_policy": -1.0}


def test_ordering_checks_can_fail():
    adv = _result({"random_uniform": [10, 8, 6], "adversary_policy": [9, 1, 0]})
    base = _result({"random_uniform": [6, 8, 10], "adversary_policy": [10, 9, 9]})
    report = compare_policies(adv, base)
    assert report.adv_trained_beats_baseline is False
    assert report.adversary_stronger_than_random is False
    assert report.baseline_nonincreasing is False
    assert len(report.lines()) == len(report.deltas) + 3


def test_majority_is_strict():
    # two of four cells favour the adversarially trained policy: a tie is not a majority
    a = SweepResult("turnlite", 0, [CellStats("adversary_policy", x, 5, r, 0.0, 0.0)
                                    for x, r in zip((0.0, 0.5, 1.0, 1.5), (1, 1, 0, 0))])
    b = SweepResult("turnlite", 0, [CellStats("adversary_policy", x, 5, r, 0.0, 0.0)
                                    for x, r in zip((0.0, 0.5, 1.0, 1.5), (0, 0, 1, 1))])
    assert compare_policies(a, b).adv_trained_beats_baseline is False


def test_grid_mismatch():
    a = _result({"random_uniform": [1, 2, 3]})
    b = SweepResult("turnlite", 0, a.cells[:2])
    with pytest.raises(ConfigError):
        compare_policies(a, b)
    with pytest.raises(ConfigError):
        compare_policies(a, SweepResult("pointgoal", 0, a.cells))


def test_rank_correlation_edge_cases():
    assert math.isnan(rank_correlation([0.0, 1.0], [3.0, 3.0]))
    assert math.isnan(rank_correlation([0.0], [1.0]))
    assert rank_correlation([0, 1, 2, 3], [4, 3, 3.5, 1]) == pytest.approx(-0.8)


def test_panels(tmp_path):
    adv = _result({"random_uniform": [10, 9, 8], "adversary_policy": [10, 7, 5]})
    base = _result({"random_uniform": [10, 8, 6], "adversary_policy": [10, 2, 1]})
    paths = write_panels(adv, base, tmp_path)
    assert [p.name for p in paths] == ["panel_a_adversary_attack.csv", "panel_b_random_attack.csv",
                                       "panel_c_baseline_adversary_vs_random.csv"]
    for p in paths:
        lines = p.read_text().splitlines()
        assert lines[0].split(",") == PANEL_COLUMNS and len(lines) == 1 + 6
    rows = [l.split(",") for l in paths[2].read_text().splitlines()[1:]]
    assert {r[1] for r in rows} == {"baseline/adversary_policy", "baseline/random_uniform"}
