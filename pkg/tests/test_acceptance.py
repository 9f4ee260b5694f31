"""System-level acceptance suite.

Eight criteria, one test each, executed at their stated sizes and
tolerances; every test prints a single summary line (run with ``-s`` to
see them live).  The training-effectiveness runs and the worker-count
sweep are module-scoped fixtures because later criteria reuse their
artifacts.
"""

import json
import math
import os
import subprocess
import sys
import time
import warnings

import pytest

from helpers import (
    PIXEL_LAYOUT,
    SIMPLE_LAYOUT,
    complex_space,
    naive_execute,
    random_graph,
    random_snapshot,
    simple_space,
    source_set_for,
    typed_space,
)
from tpg.config import config_from_dict
from tpg.dot import export_dot, import_dot
from tpg.environments import PendulumEnv
from tpg.evolution import Archive, EvolutionParams, init_population
from tpg.instructions import simple_instruction_set
from tpg.parallel import evaluate_all_policies
from tpg.program import execute_program, validate_program
from tpg.rng import Rng
from tpg.runner import render_log, train

WORKER_SWEEP = (1, 2, 4, 8)

SWEEP_CONFIG = {
    "seed": 42,
    "env": "pendulum",
    "nbRoots": 100,
    "nbGenerations": 20,
}

EFFECTIVENESS_CONFIG = {
    "env": "pendulum",
    "nbRoots": 24,
    "nbGenerations": 100,
    "maxProgramSize": 24,
    "nbIterationsPerPolicyEvaluation": 3,
    "maxStepsPerEvaluation": 300,
    "nbThreads": 2,
}

EFFECTIVENESS_SEEDS = (1, 2, 3)


def _report(number: int, title: str, detail: str = "") -> None:
    line = f"ACCEPTANCE {number} ({title}): PASS"
    if detail:
        line += f" [{detail}]"
    print("\n" + line, flush=True)


@pytest.fixture(scope="module")
def worker_sweep():
    """Criterion 1/8 artifact: the same training at 1, 2, 4, and 8 workers."""
    runs = {}
    for workers in WORKER_SWEEP:
        config = config_from_dict({**SWEEP_CONFIG, "nbThreads": workers})
        started = time.perf_counter()
        result = train(config)
        runs[workers] = {
            "dot": export_dot(result.champion),
            "csv": render_log(result.reports, timings=False),
            "reports": result.reports,
            "wall": time.perf_counter() - started,
        }
    return runs


@pytest.fixture(scope="module")
def effectiveness_runs():
    """Criterion 4/5 artifact: 100-generation runs, 3 seeds x 2 sets."""
    runs = {}
    for iset in ("simple", "complex"):
        for seed in EFFECTIVENESS_SEEDS:
            config = config_from_dict(
                {**EFFECTIVENESS_CONFIG, "seed": seed, "iset": iset}
            )
            runs[(iset, seed)] = train(config)
    return runs


def test_criterion_1_determinism_across_worker_counts(worker_sweep):
    baseline = worker_sweep[WORKER_SWEEP[0]]
    for workers in WORKER_SWEEP[1:]:
        run = worker_sweep[workers]
        assert run["dot"] == baseline["dot"], (
            f"champion DOT at {workers} workers differs from 1 worker"
        )
        assert run["csv"] == baseline["csv"], (
            f"CSV log at {workers} workers differs from 1 worker"
        )
    total = sum(run["wall"] for run in worker_sweep.values())
    if total >= 300.0:
        warnings.warn(f"worker sweep exceeded its 5-minute target: {total:.0f}s")
    _report(
        1,
        "determinism across parallelism",
        f"workers {WORKER_SWEEP} byte-identical, {total:.0f}s total",
    )


def test_criterion_2_determinism_across_processes(tmp_path):
    config = {
        "seed": 11,
        "env": "pendulum",
        "iset": "complex",
        "nbRoots": 30,
        "nbGenerations": 5,
        "maxProgramSize": 32,
        "nbThreads": 2,
        "logTimings": False,
    }
    config_path = tmp_path / "run.json"
    config_path.write_text(json.dumps(config))

    def invoke(tag, *extra):
        out = tmp_path / f"{tag}.dot"
        log = tmp_path / f"{tag}.csv"
        proc = subprocess.run(
            [sys.executable, "-m", "tpg.cli", "train",
             "--config", str(config_path),
             "--out", str(out), "--log", str(log), *extra],
            capture_output=True, text=True, timeout=300,
        )
        assert proc.returncode == 0, proc.stderr
        return out.read_bytes(), log.read_bytes()

    started = time.perf_counter()
    first = invoke("a")
    second = invoke("b")
    reseeded = invoke("c", "--seed", "12")
    wall = time.perf_counter() - started
    assert first == second, "two identical invocations produced different bytes"
    assert reseeded[0] != first[0], "changing the seed left the champion identical"
    _report(2, "determinism across processes",
            f"replay byte-identical, reseed differs, {wall:.0f}s")


def test_criterion_3_engine_matches_reference_evaluator():
    cases = (
        (simple_space(), SIMPLE_LAYOUT, 4000, 1001),
        (complex_space(), SIMPLE_LAYOUT, 4000, 1002),
        (typed_space(), PIXEL_LAYOUT, 2000, 1003),
    )
    started = time.perf_counter()
    total = 0
    mismatches = 0
    for space, layout, count, seed in cases:
        rng = Rng(seed)
        for _ in range(count):
            program = space.random_program(rng, 1 + rng.randrange(20))
            snapshot = random_snapshot(rng, layout)
            sources = source_set_for(layout, snapshot)
            engine = execute_program(program, sources)
            reference = naive_execute(program, [list(v) for v in snapshot])
            same = engine == reference or (
                math.isnan(engine) and math.isnan(reference)
            )
            mismatches += not same
            total += 1
    wall = time.perf_counter() - started
    assert mismatches == 0, f"{mismatches} of {total} programs diverged"
    _report(3, "interpreter oracle equivalence",
            f"{total} programs, 0 mismatches, {wall:.0f}s")


def test_criterion_4_traversal_termination_and_validity(effectiveness_runs):
    rng = Rng(2024)
    started = time.perf_counter()
    spaces = (simple_space(), typed_space())
    layouts = (SIMPLE_LAYOUT, PIXEL_LAYOUT)
    inferences = 0
    for i in range(1000):
        which = i % 2
        graph = random_graph(
            rng, spaces[which],
            nb_actions=3 + rng.randrange(4),
            nb_teams=3 + rng.randrange(5),
            max_lines=5,
        )
        assert graph.validate() == []
        layout = layouts[which]
        roots = graph.roots()
        for _ in range(100):
            sources = source_set_for(layout, random_snapshot(rng, layout))
            root = roots[rng.randrange(len(roots))]
            action, trace = graph.infer(root, sources)
            inferences += 1
            assert 0 <= action < graph.nb_actions
            assert len(trace) <= graph.edge_count
            assert len(set(trace)) == len(trace)
    # invariants survive long training runs
    for result in effectiveness_runs.values():
        assert result.graph.validate() == []
        for edge in result.graph.edges.values():
            assert validate_program(edge.program) == []
    wall = time.perf_counter() - started
    _report(4, "traversal termination and validity",
            f"{inferences} traversals bounded, trained graphs clean, {wall:.0f}s")


def test_criterion_5_training_effectiveness(effectiveness_runs):
    details = []
    for (iset, seed), result in sorted(effectiveness_runs.items()):
        generation_zero_best = result.reports[0].best_fitness
        final = result.champion_fitness
        assert final > generation_zero_best, (
            f"{iset}/seed {seed}: final champion {final:.1f} did not beat "
            f"generation-0 best {generation_zero_best:.1f}"
        )
        details.append(f"{iset}/s{seed}: {generation_zero_best:.0f}->{final:.0f}")
    _report(5, "training effectiveness", "; ".join(details))


def test_criterion_6_scalability_smoke():
    params = EvolutionParams(
        seed=77, nb_roots=500, max_program_size=48, archiving_probability=0.0
    )
    iset = simple_instruction_set()
    env = PendulumEnv(horizon=500)
    space = simple_space()
    graph = init_population(params, env.action_count, iset, space.layout,
                            Rng(params.seed), space)

    def timed_eval(workers):
        import dataclasses

        run_params = dataclasses.replace(params, nb_threads=workers)
        started = time.perf_counter()
        evaluate_all_policies(graph, env, run_params, Rng(5), Archive(0, 0.0))
        return time.perf_counter() - started

    timed_eval(1)  # warm the compiled-program caches out of the measurement
    single = timed_eval(1)
    quad = timed_eval(4)
    ratio = quad / single
    cores = os.cpu_count() or 1
    detail = (f"eval n=500: 1 worker {single:.2f}s, 4 workers {quad:.2f}s, "
              f"ratio {ratio:.2f} on {cores} cores")
    if cores >= 4:
        assert ratio <= 0.6, detail
        _report(6, "scalability smoke", detail)
    else:
        if ratio > 0.6:
            warnings.warn(
                f"host has {cores} cores (< 4); measurement produced but the "
                f"0.6x threshold is not enforced: {detail}"
            )
        _report(6, "scalability smoke", detail + " (threshold needs >= 4 cores)")


def test_criterion_7_serialization_round_trip(effectiveness_runs):
    rng = Rng(3030)
    started = time.perf_counter()
    graphs = [(result.champion, SIMPLE_LAYOUT)
              for result in effectiveness_runs.values()]
    spaces = (simple_space(), typed_space())
    layouts = (SIMPLE_LAYOUT, PIXEL_LAYOUT)
    while len(graphs) < 200:
        which = len(graphs) % 2
        graphs.append((
            random_graph(rng, spaces[which],
                         nb_actions=3 + rng.randrange(4),
                         nb_teams=2 + rng.randrange(5),
                         max_lines=5),
            layouts[which],
        ))
    for graph, layout in graphs:
        text = export_dot(graph)
        rebuilt = import_dot(text)
        assert export_dot(rebuilt) == text, "re-export is not byte-identical"
        root = graph.roots()[0]
        rebuilt_root = rebuilt.roots()[0]
        original_sources = source_set_for(layout, random_snapshot(rng, layout))
        for _ in range(1000):
            snapshot = random_snapshot(rng, layout)
            original_sources.load_state(snapshot)
            rebuilt_sources = source_set_for(layout, snapshot)
            assert graph.infer(root, original_sources) == rebuilt.infer(
                rebuilt_root, rebuilt_sources
            )
    wall = time.perf_counter() - started
    _report(7, "serialization round trip",
            f"200 graphs x 1000 snapshots behaviorally identical, {wall:.0f}s")


def test_criterion_8_decimation_arithmetic(worker_sweep):
    reports = worker_sweep[1]["reports"]
    assert len(reports) == SWEEP_CONFIG["nbGenerations"]
    for report in reports:
        assert report.removed == 85, f"gen {report.generation} removed {report.removed}"
        assert report.survivors == 15
        assert report.root_count == 100, (
            f"gen {report.generation} ended with {report.root_count} roots"
        )
    _report(8, "decimation arithmetic",
            "85 removed / 15 survive / 100 restored in every generation")
