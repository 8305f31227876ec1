"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines alongside pytest's own verdicts.
"""

import random
import time

import numpy as np
import pytest

from skillbench.demos import generate_demo
from skillbench.engine import EngineConfig, run_episode, run_trials, transcript_bytes
from skillbench.episodes import load_episode_file, spatial_max_divergence
from skillbench.fixtures import CANONICAL_SEED, TASK_NAMES, builtin_tasks, bundled_episode_dir
from skillbench.geometry import (
    Destination,
    interpolate_linear,
    look_at_camera,
    Pose,
    project,
    unproject,
)
from skillbench.grammar import format_skill, parse_skill
from skillbench.metrics import (
    cumulative_success,
    destination_recall,
    execution_success_rate,
    judge_plan,
    planning_accuracy,
    RecallReport,
)
from skillbench.protocol import EndpointPlanner, OraclePlanner, PlanResponse, serve_oracle
from skillbench.sim import FailureInjection, UnresolvedPosError
import skillbench.engine as engine_module

from .oracles import count_plan_matches, count_recall, lookat_matrix, matrix_project, matrix_unproject, prefix_and_curve
from .strategies import random_skill


def _report(name: str, ok: bool, extra: str = ""):
    status = "PASS" if ok else "FAIL"
    print(f"\nACCEPTANCE {name}: {status}{' (' + extra + ')' if extra else ''}")
    assert ok, f"{name} failed {extra}"


def _oracle_factory(task, world):
    episode, _ = generate_demo(task, world)
    return OraclePlanner(episode)


def test_grammar_round_trip_thousand_skills():
    rng = random.Random(1234)
    start = time.perf_counter()
    ok = True
    for _ in range(1000):
        skill = random_skill(rng)
        text = format_skill(skill)
        if parse_skill(text) != skill:
            ok = False
            break
        if format_skill(parse_skill(text)) != text:
            ok = False
            break
    elapsed = time.perf_counter() - start
    _report("grammar-round-trip", ok and elapsed < 1.0, f"{elapsed:.2f}s for 1000 skills")


def test_geometry_against_matrix_oracle():
    start = time.perf_counter()
    cam_pos, cam_target = (0.0, -0.85, 0.55), (0.0, 0.2, 0.05)
    camera = look_at_camera(cam_pos, cam_target, fx=1.05, fy=1.05)
    oracle = lookat_matrix(cam_pos, cam_target)
    intr = (camera.fx, camera.fy, camera.cx, camera.cy)
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(10_000):
        x, y = rng.uniform(0.02, 0.98, 2)
        d = rng.uniform(0.2, 3.0)
        world = matrix_unproject(oracle, intr, x, y, d)
        dest = project(camera, world)
        ox, oy, od = matrix_project(oracle, intr, world)
        worst = max(worst, abs(dest.x - ox), abs(dest.y - oy), abs(dest.d - od))
        worst = max(worst, float(np.max(np.abs(unproject(camera, dest) - world))))
    collinear_ok = True
    step_ok = True
    for _ in range(100):
        a = Pose.identity(rng.uniform(-1, 1, 3))
        b = Pose.identity(rng.uniform(-1, 1, 3))
        traj = interpolate_linear(a, b, max_step=0.05)
        seg = b.position - a.position
        norm = np.linalg.norm(seg)
        if norm > 0:
            unit = seg / norm
            for p in traj:
                if np.max(np.abs(np.cross(unit, p.position - a.position))) >= 1e-12:
                    collinear_ok = False
        for p, q in zip(traj, traj[1:]):
            if np.linalg.norm(q.position - p.position) > 0.05 + 1e-12:
                step_ok = False
    elapsed = time.perf_counter() - start
    _report(
        "geometry-oracle",
        worst < 1e-9 and collinear_ok and step_ok and elapsed < 5.0,
        f"worst {worst:.2e}, {elapsed:.2f}s",
    )


def test_derivation_regeneration_on_bundled_fixtures():
    worst = 0.0
    count = 0
    for path in sorted(bundled_episode_dir().glob("*.json")):
        episode = load_episode_file(path)
        worst = max(worst, spatial_max_divergence(episode))
        count += 1
    _report(
        "derivation-regeneration",
        count == 8 and worst < 1e-9,
        f"{count} episodes, worst divergence {worst:.2e}",
    )


def test_end_to_end_oracle_replay_all_tasks():
    start = time.perf_counter()
    rates = {}
    for name, task in builtin_tasks().items():
        results = run_trials(task, _oracle_factory, 10, EngineConfig(), base_seed=CANONICAL_SEED)
        rates[name] = execution_success_rate([r.success for r in results])
    elapsed = time.perf_counter() - start
    ok = set(rates) == set(TASK_NAMES) and all(r == 1.0 for r in rates.values()) and elapsed < 60.0
    _report("oracle-replay", ok, f"rates {rates}, {elapsed:.1f}s")


def test_protocol_equivalence_wire_vs_in_process():
    task = builtin_tasks()["stack_blocks"]
    in_process = run_episode(task, _oracle_factory, EngineConfig(), seed=CANONICAL_SEED)
    episode, _ = generate_demo(task, task.build_world(CANONICAL_SEED))
    service = serve_oracle([episode])
    try:
        wire = run_episode(
            task, lambda t, w: EndpointPlanner(service.address), EngineConfig(), seed=CANONICAL_SEED
        )
    finally:
        service.stop()
    identical = transcript_bytes(in_process.transcript) == transcript_bytes(wire.transcript)
    _report(
        "protocol-equivalence",
        identical and wire.success,
        f"{len(transcript_bytes(wire.transcript))} bytes",
    )


def test_metrics_match_counting_oracles():
    decisions = [
        "move on top of the cup <pos>",
        "pick the cup",
        "move to the <pos>",
        "place the cup",
        "press the button <pos>",
        "done",
    ]
    rng = random.Random(99)
    np_rng = np.random.default_rng(99)
    camera = look_at_camera((0.0, -0.85, 0.55), (0.0, 0.2, 0.05), fx=1.05, fy=1.05)
    base = np.array([0.0, 0.2, 0.05])
    ok = True
    for _ in range(100):
        preds = [[rng.choice(decisions) for _ in range(rng.randint(1, 7))] for _ in range(6)]
        refs = [[rng.choice(decisions) for _ in range(rng.randint(1, 7))] for _ in range(6)]
        matches, total = count_plan_matches(preds, refs, lambda p, r: judge_plan(p, r).correct)
        if abs(planning_accuracy(preds, refs) - matches / total) > 1e-12:
            ok = False

        n = int(np_rng.integers(1, 10))
        ref_dests, pred_dests, dists = [], [], []
        for _ in range(n):
            point = base + np_rng.uniform(-0.05, 0.05, 3)
            offset = np_rng.normal(size=3)
            offset = offset / np.linalg.norm(offset) * float(np_rng.uniform(0, 0.15))
            ref_dests.append(project(camera, point))
            pred_dests.append(project(camera, point + offset))
            dists.append(float(np.linalg.norm(offset)))
        report = destination_recall(pred_dests, ref_dests, camera)
        for t in (0.05, 0.10):
            if abs(report.recall_at(t) - count_recall(dists, t)) > 1e-9:
                ok = False
        if report.recall_at(0.05) > report.recall_at(0.10):
            ok = False

        rows = [[rng.random() < 0.8 for _ in range(rng.randint(1, 8))] for _ in range(7)]
        if cumulative_success(rows) != prefix_and_curve(rows):
            ok = False
    fmt = RecallReport(thresholds=(0.05, 0.10), recalls=(0.48, 0.78), n_samples=10).format_pair()
    _report("metrics-vs-brute-force", ok and fmt == "0.48/0.78", f"r5/r10 renders {fmt!r}")


def test_robustness_success_non_increasing_in_noise():
    task = builtin_tasks()["stack_blocks"]
    rates = []
    for sigma in (0.0, 0.02, 0.05, 0.10):
        config = EngineConfig(
            failure_injection=FailureInjection(destination_noise_sigma=sigma, seed=0)
        )
        results = run_trials(task, _oracle_factory, 100, config, base_seed=CANONICAL_SEED)
        rates.append(execution_success_rate([r.success for r in results]))
    monotone = all(a >= b for a, b in zip(rates, rates[1:]))
    strict = rates[-1] < rates[0]
    _report("robustness-monotone", monotone and strict, f"rates {rates}")


def test_contract_enforcement_pos_without_destination(monkeypatch):
    task = builtin_tasks()["stack_blocks"]
    calls = []
    real = engine_module.controller_dispatch

    def counting(*args, **kwargs):
        calls.append(1)
        return real(*args, **kwargs)

    monkeypatch.setattr(engine_module, "controller_dispatch", counting)

    class BadPlanner:
        def plan(self, request):
            return PlanResponse(decision="move on top of the block <pos>")

    raised = False
    try:
        run_episode(task, lambda t, w: BadPlanner(), EngineConfig(), seed=0)
    except UnresolvedPosError:
        raised = True
    _report("contract-enforcement", raised and not calls, "no controller dispatch before abort")
