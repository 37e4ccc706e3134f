import json
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest

from gridrobust.harness import (
    CampaignConfig,
    CampaignContext,
    canonical_json,
    emit_outputs,
    read_traces,
    run_campaign,
    run_paired_episode,
)
from gridrobust.harness.campaign import train_rlpa_cmd
from gridrobust.harness.cli import EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, main
from gridrobust.harness.config import (
    ConfigError,
    PerturberParams,
    RlpaParams,
    RpaParams,
    config_from_dict,
    dump_config,
    load_config,
)
from gridrobust.perturbers import load_qfunction

SMALL = CampaignConfig(episodes=2, max_steps=60)


def with_perturber(cfg, kind, **kw):
    return replace(cfg, perturber=replace(cfg.perturber, kind=kind, **kw))


def output_bytes(out: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".json", ".csv", ".txt")}


# -- configuration ---------------------------------------------------------------------


def test_defaults_and_desk():
    cfg = CampaignConfig()
    assert (cfg.episodes, cfg.max_steps, cfg.perturber.kind) == (35, 8064, "none")
    desk = cfg.desk()
    assert (desk.episodes, desk.max_steps) == (10, 2016)


@pytest.mark.parametrize(
    "doc, where",
    [
        ({"episodez": 3}, "episodez"),
        ({"chronics": {"amp": 1}}, "chronics"),
        ({"perturber": {"rpa": {"q": 0.1}}}, "perturber.rpa"),
        ({"perturber": {"kind": "rpa", "extra": 1}}, "perturber"),
        ({"metrics": {"w": 5}}, "metrics"),
    ],
)
def test_unknown_keys_rejected(doc, where):
    with pytest.raises(ConfigError, match=where):
        config_from_dict(doc)


@pytest.mark.parametrize(
    "doc",
    [
        {"episodes": 0},
        {"episodes": "3"},
        {"perturber": {"kind": "magic"}},
        {"perturber": {"rpa": {"p": 2.0}}},
        {"defender": {"rho_act": 0.5, "rho_safe": 0.7}},
        {"perturber": {"rlpa": {"gamma": 1.0}}},
    ],
)
def test_bad_values_rejected(doc):
    with pytest.raises(ConfigError):
        config_from_dict(doc).validate()


def test_yaml_round_trip(tmp_path):
    cfg = with_perturber(SMALL, "rpa", rpa=RpaParams(p=0.6))
    path = tmp_path / "c.yaml"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg


def test_yaml_errors(tmp_path):
    with pytest.raises(ConfigError, match="cannot read"):
        load_config(tmp_path / "missing.yaml")
    bad = tmp_path / "bad.yaml"
    bad.write_text("episodes: [1,\n")
    with pytest.raises(ConfigError, match="YAML"):
        load_config(bad)
    bad.write_text("- 1\n- 2\n")
    with pytest.raises(ConfigError, match="mapping"):
        load_config(bad)


def test_missing_q_file_is_config_error(tmp_path):
    cfg = with_perturber(SMALL, "rlpa", rlpa=RlpaParams(q_path=str(tmp_path / "nope.json")))
    with pytest.raises(ConfigError, match="q_path"):
        cfg.validate()


# -- paired episodes ---------------------------------------------------------------------


@pytest.fixture(scope="module")
def ctx():
    return CampaignContext.base(SMALL)


def test_null_perturber_is_identity(ctx):
    result = run_campaign(SMALL, ctx)
    assert not result.failures and len(result.traces) == 2
    for t in result.traces:
        np.testing.assert_array_equal(t.rewards_u, t.rewards_p)
        np.testing.assert_array_equal(t.actions_u, t.actions_adv)
        np.testing.assert_array_equal(t.states_u, t.states_p)
        assert t.first_perturbation == -1
    rob, res = result.robustness, result.resilience
    assert rob.means["total_reward_delta"] == 0.0 and rob.means["actions_changed"] == 0
    assert res.reward["area"] == 0.0 and res.reward["degradations"] == 0
    assert res.cosine["degradations"] == 0


def test_unperturbed_member_equals_none_run(ctx):
    cfg = with_perturber(SMALL, "rpa", rpa=RpaParams(p=0.8))
    pert = run_paired_episode(CampaignContext(cfg, ctx.model, ctx.defender), 1)
    null = run_paired_episode(ctx, 1)
    np.testing.assert_array_equal(pert.rewards_u, null.rewards_p)
    np.testing.assert_array_equal(pert.states_u, null.states_p)


def test_rpa_full_rate_perturbs_from_step_zero(ctx):
    cfg = with_perturber(SMALL, "rpa", rpa=RpaParams(p=1.0))
    t = run_paired_episode(CampaignContext(cfg, ctx.model, ctx.defender), 0)
    assert t.first_perturbation == 0
    assert np.all(t.flags.sum(axis=1) >= 1)
    np.testing.assert_array_equal(t.flags, t.deltas != 0)


def test_seed_isolation(ctx):
    a = with_perturber(SMALL, "rpa", rpa=RpaParams(p=1.0), seed=1)
    b = with_perturber(SMALL, "rpa", rpa=RpaParams(p=1.0), seed=2)
    ta = run_paired_episode(CampaignContext(a, ctx.model, ctx.defender), 0)
    tb = run_paired_episode(CampaignContext(b, ctx.model, ctx.defender), 0)
    np.testing.assert_array_equal(ta.rewards_u, tb.rewards_u)
    np.testing.assert_array_equal(ta.states_u, tb.states_u)
    assert not np.array_equal(ta.deltas, tb.deltas)


def test_episodes_use_distinct_chronics(ctx):
    t0, t1 = run_paired_episode(ctx, 0), run_paired_episode(ctx, 1)
    assert not np.array_equal(t0.states_u, t1.states_u)


class _Exploding:
    name = "boom"

    def reset(self, rng):
        pass

    def perturb(self, obs):
        raise ValueError("sensor bus down")


def test_episode_errors_carry_context_and_campaign_continues(ctx, monkeypatch):
    calls = []

    def perturber():
        calls.append(1)
        return _Exploding() if len(calls) == 1 else ctx.__class__.perturber(ctx)

    monkeypatch.setattr(ctx, "perturber", perturber)
    with pytest.raises(RuntimeError, match="episode 0: sensor bus down"):
        run_paired_episode(ctx, 0)
    calls.clear()
    result = run_campaign(SMALL, ctx)
    assert list(result.failures) == [0] and len(result.traces) == 1


# -- outputs -------------------------------------------------------------------------------


@pytest.fixture(scope="module")
def rpa_out(tmp_path_factory, ctx):
    cfg = with_perturber(SMALL, "rpa", rpa=RpaParams(p=0.6))
    out = tmp_path_factory.mktemp("rpa")
    emit_outputs(run_campaign(cfg, CampaignContext(cfg, ctx.model, ctx.defender)), out)
    return out


def test_output_files(rpa_out):
    names = {p.name for p in rpa_out.iterdir()}
    for f in ("config.json", "robustness.json", "resilience.json", "tables.txt", "weakmap.csv", "rewards_ep0.csv", "cosine_ep1.csv"):
        assert f in names
    assert len(list((rpa_out / "traces").glob("*.npz"))) == 2
    header = (rpa_out / "rewards_ep0.csv").read_text().splitlines()[0]
    assert header == "step,R_u,R_p,delta"


def test_weakmap_has_one_row_per_index(rpa_out):
    rows = (rpa_out / "weakmap.csv").read_text().splitlines()
    assert rows[0] == "index,element,group,score"
    assert len(rows) - 1 == 36
    assert [r.split(",")[0] for r in rows[1:]] == [str(i) for i in range(36)]


def test_report_json_round_trips(rpa_out):
    for name in ("robustness.json", "resilience.json", "config.json"):
        raw = (rpa_out / name).read_text()
        assert canonical_json(json.loads(raw)) == raw


def test_report_recomputed_from_traces(rpa_out, tmp_path):
    before = (rpa_out / "robustness.json").read_bytes()
    traces = read_traces(rpa_out)
    assert [t.meta["episode"] for t in traces] == [0, 1]
    assert main(["report", "--out", str(rpa_out)]) == EXIT_OK
    assert (rpa_out / "robustness.json").read_bytes() == before


def test_determinism(ctx, tmp_path):
    cfg = with_perturber(SMALL, "gepa")
    a, b = tmp_path / "a", tmp_path / "b"
    emit_outputs(run_campaign(cfg, CampaignContext(cfg, ctx.model, ctx.defender)), a)
    emit_outputs(run_campaign(cfg, CampaignContext(cfg, ctx.model, ctx.defender)), b)
    assert output_bytes(a) == output_bytes(b)


# -- RLPA workflow ---------------------------------------------------------------------------


RL_SMALL = with_perturber(SMALL, "rlpa", rlpa=RlpaParams(episodes=0, max_steps=40, pool_size=4, budget=3, beam=2))


def test_zero_episode_training_gives_empty_q(tmp_path):
    path = train_rlpa_cmd(RL_SMALL, tmp_path / "q.json")
    q, actions, large, cfg = load_qfunction(path)
    assert q.table == {}
    assert actions[0].is_do_nothing and len(large) == 36
    assert cfg["perturber"]["rlpa"]["episodes"] == 0
    run_cfg = with_perturber(RL_SMALL, "rlpa", rlpa=replace(RL_SMALL.perturber.rlpa, q_path=str(path)))
    result = run_campaign(run_cfg)
    assert result.robustness.means["actions_changed"] == 0
    assert all(t.first_perturbation == -1 for t in result.traces)


def test_retraining_is_byte_identical(tmp_path):
    cfg = with_perturber(RL_SMALL, "rlpa", rlpa=replace(RL_SMALL.perturber.rlpa, episodes=2))
    a = train_rlpa_cmd(cfg, tmp_path / "a.json").read_bytes()
    b = train_rlpa_cmd(cfg, tmp_path / "b.json").read_bytes()
    assert a == b


# -- command line ------------------------------------------------------------------------------


def test_cli_run_and_weakmap(tmp_path):
    out = tmp_path / "o"
    args = ["--episodes", "1", "--max-steps", "30", "--out", str(out)]
    assert main(["run", "--perturber", "rpa", "--p", "0.4", *args]) == EXIT_OK
    saved = json.loads((out / "config.json").read_text())["config"]
    assert saved["perturber"]["rpa"]["p"] == 0.4 and saved["episodes"] == 1
    (out / "weakmap.csv").unlink()
    assert main(["weakmap", "--out", str(out)]) == EXIT_OK
    assert (out / "weakmap.csv").exists()


def test_cli_config_file_and_overrides(tmp_path):
    cfgfile = tmp_path / "c.yaml"
    cfgfile.write_text("episodes: 1\nmax_steps: 20\nperturber:\n  kind: gepa\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfgfile), "--w", "2", "--xi", "0.05", "--out", str(out)]) == EXIT_OK
    saved = json.loads((out / "config.json").read_text())["config"]
    assert saved["perturber"]["gepa"] == {"iterations": 2, "step_size": 0.02, "max_perturbation": 0.05}


def test_cli_exit_codes(tmp_path, capsys):
    bad = tmp_path / "bad.yaml"
    bad.write_text("nonsense_key: 1\n")
    assert main(["run", "--config", str(bad)]) == EXIT_CONFIG
    assert main(["run", "--bogus-flag"]) == EXIT_CONFIG
    assert main(["run", "--episodes", "0"]) == EXIT_CONFIG
    assert main(["report", "--out", str(tmp_path / "nothing")]) == EXIT_CONFIG
    # saved config present but no traces: a runtime failure
    empty = tmp_path / "empty"
    empty.mkdir()
    (empty / "config.json").write_text(canonical_json({"config": SMALL.to_dict()}))
    assert main(["report", "--out", str(empty)]) == EXIT_RUNTIME
    assert "no traces" in capsys.readouterr().err
