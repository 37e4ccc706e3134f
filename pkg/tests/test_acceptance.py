"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py`` (lines are printed even when
output capture is on) or ``python tests/test_acceptance.py``.
"""

import sys
import time
from dataclasses import replace
from functools import lru_cache

import numpy as np
import pytest
from conftest import small_grid

from gridrobust.defender import GreedyDefender
from gridrobust.grid import Topology, dc_power_flow, generate_chronics, initial_state, load_grid, observe
from gridrobust.grid.env import GridEnv
from gridrobust.grid.powerflow import node_map
from gridrobust.harness import CampaignConfig, emit_outputs, run_campaign
from gridrobust.harness.campaign import episode_chronics
from gridrobust.harness.config import GepaParams, PerturberParams, RpaParams
from gridrobust.metrics import (
    EpisodeTrace,
    action_similarity,
    change_overlap,
    cosine_series,
    degradation_segments,
    reward_gap_area,
    substation_overlap,
)
from gridrobust.perturbers import RlpaConfig, draw_perturbation, estimate_gradient, rlpa_train
from test_metrics import act, v_dip
from test_perturbers import ToyAttacker, ToyDefender, ToyEnv

DESK = CampaignConfig().desk()
RPA_SWEEP = (0.2, 0.4, 0.6, 0.8, 1.0)


@pytest.fixture
def verdict(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
        assert ok, detail

    return emit


@lru_cache(maxsize=None)
def desk_run(kind, p=None):
    pert = PerturberParams(kind=kind, rpa=RpaParams(p=p) if p is not None else RpaParams())
    cfg = replace(DESK, perturber=pert)
    t0 = time.perf_counter()
    result = run_campaign(cfg)
    return result, time.perf_counter() - t0


# 1 ---------------------------------------------------------------------------------


def test_c01_power_flow_oracle(verdict):
    two = small_grid([(1, 2, 0.1, 10.0)], [(1, 10.0)], [(2, 1.0)])
    f2 = dc_power_flow(two, Topology.reference(two), np.array([1.0, -1.0])).flows
    tri = small_grid([(1, 2, 1.0, 100.0), (2, 3, 1.0, 100.0), (1, 3, 1.0, 100.0)], [(1, 200.0)], [(3, 1.0)])
    f3 = dc_power_flow(tri, Topology.reference(tri), np.array([0.0, 30.0, -90.0])).flows
    err_hand = max(abs(f2[0] - 1.0), *np.abs(f3 - [10.0, 40.0, 50.0]))

    model = load_grid("ieee14")
    ch = generate_chronics(model, 2017, seed=0)
    defender = GreedyDefender(model)
    env = GridEnv(model, ch)
    obs = env.reset()
    worst, steps = 0.0, 0
    t0 = time.perf_counter()
    while True:
        res = env.step(defender.act(obs))
        steps += 1
        s = env.state
        if res.legal:
            nm = node_map(model, s.topology)
            f = np.where(s.topology.line_status, s.flows, 0.0)
            bal = np.zeros(nm.n_nodes)
            np.add.at(bal, nm.line_from, f)
            np.add.at(bal, nm.line_to, -f)
            np.add.at(bal, nm.gen_node, -s.gen)
            np.add.at(bal, nm.load_node, s.load)
            worst = max(worst, float(np.abs(bal).max()))
        obs = res.observation
        if res.done:
            break
    dt = time.perf_counter() - t0
    ok = err_hand <= 1e-9 and worst <= 1e-9 and steps == 2016 and dt < 5.0
    verdict(1, ok, f"hand-solved error {err_hand:.1e} MW; worst nodal mismatch {worst:.1e} MW over {steps} steps in {dt:.2f}s")


# 2 ---------------------------------------------------------------------------------


def test_c02_null_perturbation_identity(verdict):
    t0 = time.perf_counter()
    result = run_campaign(DESK)
    dt = time.perf_counter() - t0
    rob, res = result.robustness, result.resilience
    cos_ok = all(np.all(cosine_series(t) == 1.0) for t in result.traces)
    per_ep = [
        (float(np.sum(t.rewards_u) - np.sum(t.rewards_p)), int(np.sum(t.actions_adv != t.actions_cf)), reward_gap_area(t))
        for t in result.traces
    ]
    ok = (
        len(result.traces) == 10
        and all(d == 0.0 and c == 0 and a == 0.0 for d, c, a in per_ep)
        and cos_ok
        and res.reward["degradations"] == 0
        and res.cosine["degradations"] == 0
        and rob.means["total_reward_delta"] == 0.0
        and dt < 30.0
    )
    verdict(2, ok, f"10 paired episodes, all deltas/changes/areas zero, cosine == 1 everywhere: {ok}; {dt:.1f}s")


# 3 ---------------------------------------------------------------------------------


def test_c03_attack_budget(verdict):
    result, _ = desk_run("gepa")
    cfg = result.config
    assert cfg.perturber.gepa == GepaParams(iterations=10, step_size=0.02, max_perturbation=0.1)
    model = load_grid(cfg.grid)
    worst, checked = -np.inf, 0
    for t in result.traces:
        first = observe(model, initial_state(model, episode_chronics(cfg, model, t.meta["episode"]))).values
        truth = np.vstack([first, t.states_p[:-1]])
        excess = np.abs(t.deltas) - (0.1 * np.abs(truth) + 1e-12)
        worst = max(worst, float(excess.max()))
        checked += t.deltas.size
    ok = worst <= 0.0 and checked > 0
    verdict(3, ok, f"{checked} perturbed readings checked; max excess over 0.1|s|+1e-12 is {worst:.2e}")


# 4 ---------------------------------------------------------------------------------


def test_c04_gradient_estimator(verdict):
    rng = np.random.default_rng(2024)
    worst_q = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 20))
        a, b, s = rng.normal(size=(n, n)), rng.normal(size=n), rng.normal(size=n) * 3
        exact = (a + a.T) @ s + b
        g = estimate_gradient(lambda x: x @ a @ x + b @ x, s)
        worst_q = max(worst_q, float(np.max(np.abs(g - exact)) / max(np.max(np.abs(exact)), 1e-300)))
    s = rng.uniform(-2, 2, 12)
    w = rng.normal(size=12)
    smooth = [
        (lambda x: np.sum(np.exp(x)), np.exp(s)),
        (lambda x: np.sum(np.sin(x)), np.cos(s)),
        (lambda x: np.exp(w @ x / 4), w / 4 * np.exp(w @ s / 4)),
        (lambda x: np.sin(x[0]) * np.exp(x[1]), np.r_[np.cos(s[0]) * np.exp(s[1]), np.sin(s[0]) * np.exp(s[1]), np.zeros(10)]),
    ]
    worst_s = max(float(np.max(np.abs(estimate_gradient(f, s, fd_step=0.01) - g))) for f, g in smooth)
    ok = worst_q <= 1e-9 and worst_s <= 1e-3
    verdict(4, ok, f"quadratic max relative error {worst_q:.1e}; exp/sin max error {worst_s:.1e} at h=0.01")


# 5 ---------------------------------------------------------------------------------


def test_c05_similarity_fixtures(verdict):
    a1 = act(("line1.or", 1, 1), ("line2.ex", 2, 2))
    a2 = act(("line1.or", 1, 1))
    c, v, sim = change_overlap(a1, a2), substation_overlap(a1, a2), action_similarity(a1, a2)
    hand = c == 0.75 and v == 0.75 and sim == 0.75
    rng = np.random.default_rng(5)
    props = 0
    for _ in range(20):
        def rand_act():
            k = int(rng.integers(1, 5))
            elems = rng.choice(8, size=k, replace=False)
            return act(*((f"e{e}", int(rng.integers(1, 3)), int(e) // 3) for e in elems))

        x, y = rand_act(), rand_act()
        sxy = action_similarity(x, y)
        props += 0.0 <= sxy <= 1.0 and sxy == action_similarity(y, x) and action_similarity(x, x) == 1.0
    ok = hand and props == 20
    verdict(5, ok, f"hand example C={c}, V={v}, combined={sim}; {props}/20 randomized symmetry/bounds checks")


# 6 ---------------------------------------------------------------------------------


def _trace_from_delta(delta):
    n = len(delta)
    flags = np.zeros((n, 1), bool)
    flags[:, 0] = True
    return EpisodeTrace(
        rewards_u=np.ones(n),
        rewards_p=1.0 + np.asarray(delta),
        actions_u=np.zeros(n, int),
        actions_adv=np.zeros(n, int),
        actions_cf=np.zeros(n, int),
        legal_u=np.ones(n, bool),
        legal_p=np.ones(n, bool),
        states_u=np.ones((n, 1)),
        states_p=np.ones((n, 1)),
        flags=flags,
        deltas=np.ones((n, 1)),
    )


def test_c06_trapezoid_oracle(verdict):
    worst = 0.0
    for n in range(2, 101):
        for depth in (1.0, 0.25):
            area = reward_gap_area(_trace_from_delta(np.linspace(0.0, -depth, n)))
            # 1 + delta is exact for these values, so the gap is the sampled line itself
            worst = max(worst, abs(area - (-(n - 1) / 2 * depth)))
    ok = worst <= 1e-12
    verdict(6, ok, f"linear gaps for n = 2..100: max deviation from -(n-1)/2 * depth is {worst:.1e}")


# 7 ---------------------------------------------------------------------------------


def test_c07_degradation_segmentation(verdict):
    w = 50
    (e,) = degradation_segments(v_dip(600, 100, 290, 400), -0.05, window=w)
    two = degradation_segments(v_dip(1200, 100, 250, 350) + v_dip(1200, 700, 850, 950), -0.05, window=w)
    ok = abs(e.degradation_time - 190) <= w / 2 and abs(e.restorative_time - 110) <= w / 2 and len(two) == 2
    verdict(
        7,
        ok,
        f"degradation {e.degradation_time} steps (190 +- 25), restorative {e.restorative_time} steps (110 +- 25); two-dip events: {len(two)}",
    )


# 8 ---------------------------------------------------------------------------------


def test_c08_rpa_distributions(verdict):
    rng = np.random.default_rng(8)
    sigma = {"gen": 0.25, "load": 0.3, "flow": 0.4}
    groups = ("gen",) * 5 + ("load",) * 11 + ("flow",) * 20
    n = 1_000_000
    zero = 0
    durations = np.empty(n)
    logs = {g: [] for g in sigma}
    for i in range(n):
        r = draw_perturbation(rng, groups, sigma)
        durations[i] = r.remaining
        if r.mode == "zero":
            zero += 1
        else:
            logs[groups[r.index]].append(r.factor)
    zf = zero / n
    mean_d = float(durations.mean())
    std_err = {g: abs(np.std(np.log(v)) / sigma[g] - 1) for g, v in logs.items()}
    ok = abs(zf - 0.2) <= 0.005 and abs(mean_d - 6) <= 0.12 and max(std_err.values()) <= 0.02
    detail = ", ".join(f"{g} {100 * e:.2f}%" for g, e in std_err.items())
    verdict(8, ok, f"zero-branch {zf:.4f}; mean duration {mean_d:.3f} steps; log-std error {detail}")


# 9 ---------------------------------------------------------------------------------


def test_c09_rlpa_toy_bandit(verdict):
    t0 = time.perf_counter()
    cfg = RlpaConfig(episodes=20, max_steps=50, alpha=0.5, epsilon=0.3, gamma=0.5)
    q = rlpa_train(cfg, ToyEnv(), ToyDefender(), ToyAttacker(), np.random.default_rng(9))
    dt = time.perf_counter() - t0
    gaps = [q.values(s)[2] - np.max(np.delete(q.values(s), 2)) for s in [(0,), (1,)]]
    ok = all(q.greedy(s) == 2 for s in [(0,), (1,)]) and min(gaps) > 0 and dt < 10
    verdict(9, ok, f"greedy picks the rewarded perturbation in both states; min Q-gap {min(gaps):.3f}; {dt:.2f}s")


# 10 --------------------------------------------------------------------------------


def test_c10_trend_reproduction(verdict):
    spent = 0.0
    rpa = {}
    for p in RPA_SWEEP:
        result, dt = desk_run("rpa", p)
        spent += dt
        rpa[p] = result.robustness
    gepa, dt = desk_run("gepa")
    spent += dt
    rlpa, dt = desk_run("rlpa")
    spent += dt
    gepa, rlpa = gepa.robustness, rlpa.robustness

    changes = [rpa[p].means["actions_changed_per_1000"] for p in RPA_SWEEP]
    a_ok = all(x <= y for x, y in zip(changes, changes[1:]))
    sim = lambda r: r.means["similarity_per_changed_action"]  # noqa: E731
    rpa_sims = [sim(rpa[p]) for p in RPA_SWEEP]
    b_ok = None not in (sim(gepa), sim(rlpa), *rpa_sims) and sim(gepa) > sim(rlpa) > max(rpa_sims)
    pg, pr = gepa.percent_of_unperturbed, rlpa.percent_of_unperturbed
    c_ok = pr["survival"] < pg["survival"] and pr["total_reward"] < pg["total_reward"]
    ok = a_ok and b_ok and c_ok and spent < 600
    detail = (
        f"(a) {'ok' if a_ok else 'no'}: changes/1000 {[round(c, 1) for c in changes]}; "
        f"(b) {'ok' if b_ok else 'no'}: similarity GEPA {sim(gepa):.3f}, RLPA {sim(rlpa):.3f}, RPA max {max(rpa_sims):.3f}; "
        f"(c) {'ok' if c_ok else 'no'}: survival RLPA {pr['survival']:.1f}% vs GEPA {pg['survival']:.1f}%, "
        f"reward RLPA {pr['total_reward']:.1f}% vs GEPA {pg['total_reward']:.1f}%; {spent:.0f}s"
    )
    verdict(10, ok, detail)


# 11 --------------------------------------------------------------------------------


def test_c11_end_to_end_determinism(verdict, tmp_path):
    cfg = replace(DESK, episodes=2, max_steps=300, perturber=PerturberParams(kind="rpa", rpa=RpaParams(p=0.6)))

    def files(out):
        return {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".json", ".csv", ".txt")}

    a, b = files(emit_outputs(run_campaign(cfg), tmp_path / "a")), files(emit_outputs(run_campaign(cfg), tmp_path / "b"))
    ok = a == b and len(a) >= 8
    verdict(11, ok, f"{len(a)} JSON/CSV/text files compared; identical: {a == b}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
