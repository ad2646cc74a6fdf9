"""Acceptance suite: one test per criterion, one PASS/FAIL line each.

Verdict lines are collected in conftest.CRITERION_LINES and printed in an
"acceptance criteria" section after the run summary; each test also
asserts, so a FAIL line always comes with a failing test.
"""
import itertools
import json
import math
import time
from fractions import Fraction

import numpy as np

import conftest

from tpop import cli, core, metrics, model, output, world
from tpop.core import TPoPParams, build_tree, level_sizes, verify
from tpop.metrics import ConfusionCounts, bernoulli_jsd, global_jsd, jsd, pointwise_jsd
from tpop.model import (
    ALL_STATES,
    StatePriors,
    _FreshAgentOracle,
    confirm_states,
    estimate_cell,
    exact_cell,
    sweep_grid,
)
from tpop.world import WorldConfig, run_epoch, spawn, step, sweep_world

from conftest import D1_W6, D2_W22

SEED = 12345


def report(n: int, ok: bool, desc: str) -> None:
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} - {desc}"
    conftest.CRITERION_LINES.append(line)
    print(line, flush=True)
    assert ok, line


def note(text: str) -> None:
    print(f"    {text}", flush=True)


def test_criterion_1_worked_example():
    start = time.perf_counter()
    data = json.loads(cli.bundled_example_path().read_text())
    tree = core.WitnessTree.from_json(data["tree"])
    confirmed = frozenset((w, p) for w, p, flag in data["confirmations"] if flag)
    oracle = core.StaticOracle(confirmations=confirmed)

    half = verify(tree, TPoPParams(0.5, 2, (2, 2)), oracle)
    full = verify(tree, TPoPParams(1, 2, (2, 2)), oracle)
    exit_half = cli.main(["verify-tree", str(cli.bundled_example_path()),
                          "--threshold", "0.5", "--witnesses", "2,2"])
    exit_full = cli.main(["verify-tree", str(cli.bundled_example_path()),
                          "--threshold", "1", "--witnesses", "2,2"])
    elapsed = time.perf_counter() - start

    ok = (
        half.verdict is True
        and half.per_parent_confirmations["a1"] == 2
        and half.per_parent_confirmations["a2"] == 0
        and half.per_level_confirmed == (2, 1)  # M_2 = 2, M_1 = 1
        and full.verdict is False
        and exit_half == 0
        and exit_full == 1
        and elapsed < 1.0
    )
    report(1, ok, f"worked example: truthful at t=0.5, untruthful at t=1 "
                  f"({elapsed:.2f}s)")


def test_criterion_2_level_size_recursion():
    ok = level_sizes(D1_W6) == [6] and level_sizes(D2_W22) == [2, 4]
    report(2, ok, "level-size recursion: theta1 -> [6], theta2 -> [2, 4]")


def test_criterion_3_truth_table():
    expected = np.array(
        [[1, 1, 1, 1], [1, 1, 0, 0], [1, 0, 1, 0], [1, 0, 0, 1]], dtype=bool
    )
    entries = all(
        confirm_states(ALL_STATES[i], ALL_STATES[j]) == expected[i, j]
        for i in range(4)
        for j in range(4)
    )
    symmetric = all(
        confirm_states(a, b) == confirm_states(b, a)
        for a, b in itertools.product(ALL_STATES, repeat=2)
    )
    report(3, entries and symmetric, "all 16 truth-table entries and symmetry")


def test_criterion_4_oracle_equivalence():
    start = time.perf_counter()
    points = (0.1, 0.5, 0.9)
    ok = True
    for t_idx, (label, params) in enumerate((("theta1", D1_W6), ("theta2", D2_W22))):
        hits_r = hits_s = 0
        for i, (ph, pc) in enumerate(itertools.product(points, repeat=2)):
            priors = StatePriors(ph, pc)
            exact_r, exact_s = exact_cell(params, priors)
            rng = np.random.default_rng(np.random.SeedSequence([SEED, t_idx, i]))
            est = estimate_cell(params, priors, 5000, rng)
            se_r = math.sqrt(exact_r * (1 - exact_r) / est.honest_roots)
            se_s = math.sqrt(exact_s * (1 - exact_s) / est.dishonest_roots)
            hits_r += abs(est.reliability - exact_r) <= 3 * se_r + 1e-12
            hits_s += abs(est.security - exact_s) <= 3 * se_s + 1e-12
        note(f"{label}: R within 3 SE at {hits_r}/9 points, S at {hits_s}/9")
        ok = ok and hits_r >= 8 and hits_s >= 8
    elapsed = time.perf_counter() - start
    report(4, ok and elapsed < 60,
           f"Monte-Carlo matches exact enumeration ({elapsed:.1f}s)")


def test_criterion_5_boundary_properties():
    r_map, s_map = sweep_grid(D2_W22, 0.25, 1000, master_seed=SEED)
    model_ok = (
        bool(np.all(r_map.values[-1, :] == 1.0))
        and s_map.values[0, 0] == 0.0
        and s_map.values[0, -1] == 0.0
    )
    counts = ConfusionCounts()
    for params in (D1_W6, D2_W22):
        for pc in (0.0, 0.5, 1.0):
            for seed in range(3):
                w = spawn(WorldConfig(priors=StatePriors(1.0, pc), seed=seed))
                counts = counts + run_epoch(w, params).counts
    r_s = counts.reliability()
    note(f"model boundary rows exact: {model_ok}; dense sim R_s = {r_s:.4f}")
    report(5, model_ok and r_s >= 0.99,
           "R=1 along p_h=1 and S=0 at (0,0),(0,1) for the model; "
           "R_s >= 0.99 for the dense simulation")


def _operating_point(params: TPoPParams, runs: int = 50):
    total = ConfusionCounts()
    for k in range(runs):
        seed = int(np.random.SeedSequence([SEED, 95, 10, k]).generate_state(1)[0])
        w = spawn(WorldConfig(priors=StatePriors(0.95, 0.1), seed=seed))
        total = total + run_epoch(w, params).counts
    return total.reliability(), total.security()


def test_criterion_6_operating_point():
    ok = True
    for label, params, s_floor in (("theta1", D1_W6, 0.80), ("theta2", D2_W22, 0.65)):
        r, s = _operating_point(params)
        part = r >= 0.85 and s >= s_floor
        note(f"{label}: R = {r:.4f} (need >= 0.85), S = {s:.4f} "
             f"(need >= {s_floor:.2f}) -> {'ok' if part else 'FAIL'}")
        ok = ok and part
    report(6, ok, "operating point (p_h=0.95, p_c=0.1): S/R floors for both "
                  "parameter sets")


def _pipeline_jsd(params: TPoPParams, grid_step: float, trees: int, runs: int):
    rm, sm = sweep_grid(params, grid_step, trees, SEED)
    rs, ss = sweep_world(WorldConfig(), params, grid_step, runs, SEED)
    return (global_jsd(rm, rs), global_jsd(sm, ss), pointwise_jsd(sm, ss))


def test_criterion_7_divergence_reproduction():
    # smoke-grid timing gate: the full 11x11 pipeline for one parameter set
    start = time.perf_counter()
    _pipeline_jsd(D1_W6, 0.1, 5000, 50)
    smoke = time.perf_counter() - start
    timing_ok = smoke < 120

    targets = {"theta1": (D1_W6, 0.139, 0.095), "theta2": (D2_W22, 0.174, 0.059)}
    ok = timing_ok
    for label, (params, target_r, target_s) in targets.items():
        jr, js, pw_s = _pipeline_jsd(params, 0.05, 5000, 50)
        r_in = abs(jr - target_r) <= 0.06
        s_in = abs(js - target_s) <= 0.06
        # pointwise S divergence should concentrate where p_h -> 1
        points = metrics.grid_points(0.05)
        high = np.nanmean(pw_s[points >= 0.8, :])
        low = np.nanmean(pw_s[points <= 0.5, :])
        conc = high > low
        note(f"{label}: JSD(R) = {jr:.4f} (target {target_r} +/- 0.06) "
             f"-> {'ok' if r_in else 'FAIL'}; JSD(S) = {js:.4f} "
             f"(target {target_s} +/- 0.06) -> {'ok' if s_in else 'FAIL'}; "
             f"S-divergence concentrates at high p_h: {conc} "
             f"(mean {high:.3f} vs {low:.3f})")
        ok = ok and r_in and s_in and conc
    note(f"11x11 smoke pipeline: {smoke:.0f}s (< 120s: {timing_ok})")
    report(7, ok, "global JSD within +/- 0.06 of the reference values and "
                  "pointwise S-divergence concentrated at high p_h")


def test_criterion_8_determinism_across_jobs(tmp_path):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        "grid_step: 0.25\nmodel_trees_per_cell: 200\nsim_runs_per_cell: 2\n"
        "world:\n  n_agents: 80\n  range_of_sight: 0.446\n",
        encoding="utf-8",
    )
    ok = True
    for command, stems in (("model", ("r_model", "s_model")),
                           ("sim", ("r_sim", "s_sim"))):
        out1, out2 = tmp_path / f"{command}1", tmp_path / f"{command}2"
        cli.main(["--config", str(cfg), "--out", str(out1), "--jobs", "1", command])
        cli.main(["--config", str(cfg), "--out", str(out2), "--jobs", "2", command])
        for stem in stems:
            same = (out1 / f"{stem}.csv").read_bytes() == (
                out2 / f"{stem}.csv"
            ).read_bytes()
            ok = ok and same
    report(8, ok, "byte-identical CSVs for --jobs 1 vs --jobs 2 (model and sim)")


def _random_scenario(rng):
    depth = int(rng.integers(1, 4))
    witnesses = tuple(int(rng.integers(1, 4)) for _ in range(depth))
    states = rng.integers(0, 4, size=TPoPParams(1, depth, witnesses).tree_size)
    return depth, witnesses, states


def test_criterion_9_property_suites():
    rng = np.random.default_rng(SEED)
    thresholds = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1)]

    # threshold monotonicity and M_l <= n_l, 1000 random scenarios each
    mono_ok = bound_ok = True
    for _ in range(1000):
        depth, witnesses, states = _random_scenario(rng)
        lo, hi = sorted(rng.choice(len(thresholds), size=2))
        verdicts = {}
        for t in (thresholds[lo], thresholds[hi]):
            params = TPoPParams(t, depth, witnesses)
            oracle = _FreshAgentOracle(states)
            tree = build_tree(0, params, oracle)
            outcome = verify(tree, params, oracle)
            verdicts[t] = outcome.verdict
            sizes = level_sizes(params)
            for offset, m in enumerate(outcome.per_level_confirmed):
                bound_ok = bound_ok and 0 <= m <= sizes[depth - 1 - offset]
        if verdicts[thresholds[hi]] and not verdicts[thresholds[lo]]:
            mono_ok = False

    # confusion-count conservation over 1000 random worlds
    conserve_ok = True
    cfg_r = math.sqrt(50 / (100 * math.pi))
    for k in range(1000):
        ph, pc = rng.random(), rng.random()
        w = spawn(WorldConfig(n_agents=100, range_of_sight=cfg_r,
                              priors=StatePriors(ph, pc), seed=int(rng.integers(2**31))))
        c = run_epoch(w, D1_W6).counts
        conserve_ok = conserve_ok and (c.honest_total + c.dishonest_total == 100)

    # JSD symmetry and range, 1000 cases (500 Bernoulli + 500 pmf pairs)
    jsd_ok = True
    for _ in range(500):
        p, q = rng.random(), rng.random()
        a, b = float(bernoulli_jsd(p, q)), float(bernoulli_jsd(q, p))
        jsd_ok = jsd_ok and a == b and 0.0 <= a <= 1.0
    for _ in range(500):
        p = rng.dirichlet(np.ones(6))
        q = rng.dirichlet(np.ones(6))
        jsd_ok = jsd_ok and jsd(p, q) == jsd(q, p) and 0.0 <= jsd(p, q) <= 1.0

    # in-bounds movement: 10 worlds x 100 steps
    move_ok = True
    for seed in range(10):
        w = spawn(WorldConfig(priors=StatePriors(0.5, 0.5), seed=seed, speed=0.03))
        for _ in range(100):
            step(w)
            move_ok = move_ok and bool(
                np.all(w.true_pos >= 0)
                and np.all(w.true_pos[:, 0] <= w.config.width)
                and np.all(w.true_pos[:, 1] <= w.config.height)
            )

    note(f"monotonicity: {mono_ok}, level bounds: {bound_ok}, "
         f"conservation: {conserve_ok}, jsd: {jsd_ok}, movement: {move_ok}")
    report(9, mono_ok and bound_ok and conserve_ok and jsd_ok and move_ok,
           "five property suites, >= 1000 randomized cases each")
