"""High-level training and evaluation drivers used by the CLI and tests."""

from __future__ import annotations

import io
from dataclasses import dataclass

from .config import RunConfig
from .csvlog import CsvLogger
from .data import FLOAT64, DataSourceSet, RegisterFile, SourceSpec
from .dot import export_dot
from .environments import LearningEnvironment, make_environment
from .errors import ConfigError
from .evolution import (
    Archive,
    MutationSpace,
    TrainingState,
    init_population,
    run_generation,
)
from .graph import TpgGraph
from .instructions import make_instruction_set
from .rng import Rng


def build_layout(nb_registers: int, env: LearningEnvironment) -> tuple:
    """Register file (source 0) followed by the environment's sources."""
    return (SourceSpec(FLOAT64, (nb_registers,), writable=True),
            *env.source_specs())


@dataclass
class TrainResult:
    graph: TpgGraph
    champion: TpgGraph
    champion_id: int
    champion_fitness: float
    reports: list


def train(config: RunConfig, env: LearningEnvironment = None,
          on_generation=None) -> TrainResult:
    """Run the full generational loop described by ``config``.

    The champion is the best root of the final generation's evaluation,
    extracted as a standalone canonical graph.
    """
    params = config.params
    params.validate()
    if env is None:
        env = make_environment(config.env)
    iset = make_instruction_set(config.iset)
    layout = build_layout(params.nb_registers, env)
    space = MutationSpace(iset, layout)
    prng_master = Rng(params.seed, role="master")
    graph = init_population(params, env.action_count, iset, layout,
                            prng_master, space)
    archive = Archive(params.archive_size, params.archiving_probability)
    state = TrainingState(
        graph=graph,
        env_prototype=env,
        params=params,
        space=space,
        archive=archive,
        prng_master=prng_master,
    )
    reports = []
    for _ in range(params.nb_generations):
        report = run_generation(state)
        reports.append(report)
        if on_generation is not None:
            on_generation(report)
    if not reports:
        raise ConfigError("nbGenerations: training needs at least 1 generation")
    last = reports[-1]
    champion = graph.extract_champion(graph.teams[last.champion_id])
    return TrainResult(
        graph=graph,
        champion=champion,
        champion_id=last.champion_id,
        champion_fitness=last.champion_fitness,
        reports=reports,
    )


def render_log(reports, timings: bool = True) -> str:
    buffer = io.StringIO()
    logger = CsvLogger(buffer, timings=timings)
    for report in reports:
        logger.write(report)
    return buffer.getvalue()


def train_and_write(config: RunConfig, env: LearningEnvironment = None) -> TrainResult:
    """Train, then write the champion DOT and CSV log where configured."""
    result = train(config, env=env)
    if config.out:
        with open(config.out, "w", encoding="utf-8") as fh:
            fh.write(export_dot(result.champion))
    if config.log:
        with open(config.log, "w", encoding="utf-8") as fh:
            fh.write(render_log(result.reports, timings=config.log_timings))
    return result


def evaluate_graph(graph: TpgGraph, env: LearningEnvironment, episodes: int,
                   seed: int, max_steps: int = None) -> list:
    """Episode scores of the graph's first root on ``episodes`` seeded runs."""
    roots = graph.roots()
    if not roots:
        raise ConfigError("graph has no root team to evaluate")
    root = roots[0]
    sample = next(iter(graph.edges.values())).program
    if sample.layout[1:] != env.source_specs():
        raise ConfigError(
            "graph was trained on a different source layout than this environment"
        )
    if max_steps is None:
        max_steps = env.default_max_steps
    sources = DataSourceSet(
        RegisterFile(sample.nb_registers), env.data_sources()
    )
    rng = Rng(seed, role="worker")
    scores = []
    for _ in range(episodes):
        env.reset(rng.next_u64())
        steps = 0
        while not env.terminal and steps < max_steps:
            action, _ = graph.infer(root, sources)
            env.step(action)
            steps += 1
        scores.append(env.current_score)
    return scores
