"""Deterministic master/worker execution of evaluation and mutation phases.

The master draws one seed per job from its own generator (in job-id
order), pushes all jobs on a shared queue, and then works alongside
``nb_threads - 1`` forked workers.  Each worker owns a private generator
reset from the job seed, so a job's outcome depends only on its content
and seed, never on scheduling; results are merged in job-id order.  The
net effect: any worker count, any interleaving, byte-identical outcome.

Workers are separate forked processes (true parallelism for this
CPU-bound workload); the graph and archive are frozen during a phase and
reach the workers through fork copy-on-write, so nothing but small
plain-data results crosses process boundaries.  With ``nb_threads=1`` the
master simply runs every job inline, with identical results.
"""

from __future__ import annotations

import multiprocessing
import os
import queue as queue_module
import traceback
from dataclasses import dataclass

from .data import DataSourceSet, RegisterFile
from .errors import GraphInvariantError, OperandUnavailableError, WorkerError
from .rng import Rng

_FORK = multiprocessing.get_context("fork")


@dataclass(frozen=True)
class Job:
    """One unit of parallel work: dense id, master-drawn seed, payload id."""

    id: int
    seed: int
    payload: int


@dataclass
class EvalResult:
    """Outcome of one policy-evaluation job."""

    job_id: int
    scores: tuple
    snapshots: tuple


def derive_seed(prng_master: Rng) -> int:
    """Next master word; consumed once per job, in job-id order."""
    return prng_master.next_u64()


def resolve_thread_count(nb_threads) -> int:
    if nb_threads is None:
        return os.cpu_count() or 1
    return max(1, nb_threads)


def run_jobs(jobs, make_worker, nb_threads) -> list:
    """Run all jobs, returning payload results indexed by job id.

    ``make_worker()`` is called once per participating worker (the master
    included) and returns the job handler.  Handlers must be pure given
    (job, forked memory) and return picklable data.  Jobs are distributed
    through a shared atomic cursor, so no worker idles while work remains.
    """
    n = len(jobs)
    if n == 0:
        return []
    nb_threads = min(resolve_thread_count(nb_threads), n)
    results = [None] * n

    if nb_threads == 1:
        work = make_worker()
        for job in jobs:
            results[job.id] = work(job)
        return results

    cursor = _FORK.Value("l", 0)
    result_queue = _FORK.Queue()

    def drain(work):
        got = []
        while True:
            with cursor.get_lock():
                i = cursor.value
                if i >= n:
                    break
                cursor.value = i + 1
            job = jobs[i]
            got.append((job.id, work(job)))
        return got

    def child_main():
        try:
            for item in drain(make_worker()):
                result_queue.put(item)
            result_queue.put(("done", None))
        except BaseException:
            result_queue.put(("error", traceback.format_exc()))

    children = [
        _FORK.Process(target=child_main, daemon=True)
        for _ in range(nb_threads - 1)
    ]
    for proc in children:
        proc.start()
    failure = None
    try:
        for job_id, payload in drain(make_worker()):
            results[job_id] = payload
        finished = 0
        while finished < len(children):
            try:
                tag, payload = result_queue.get(timeout=5.0)
            except queue_module.Empty:
                dead = [p for p in children if not p.is_alive() and p.exitcode != 0]
                if dead:
                    failure = f"worker process died with exit code {dead[0].exitcode}"
                    break
                continue
            if tag == "done":
                finished += 1
            elif tag == "error":
                failure = payload
                break
            else:
                results[tag] = payload
    finally:
        for proc in children:
            if failure is not None and proc.is_alive():
                proc.terminate()
            proc.join()
        result_queue.close()
    if failure is not None:
        raise WorkerError(f"parallel phase aborted:\n{failure}")
    return results


def evaluate_policy(graph, root, env, prng_worker: Rng, params) -> tuple:
    """Evaluate one root team; returns (episode scores, snapshot candidates).

    Per episode the worker generator supplies, in order: the environment
    reset seed, then the step index at which the pre-action state is
    recorded as an archive candidate (episodes ending earlier record
    nothing).  Environment faults end the episode at the environment's
    minimum score; execution faults indicate library bugs and propagate.
    """
    max_steps = params.max_steps_per_evaluation or env.default_max_steps
    sources = DataSourceSet(RegisterFile(params.nb_registers), env.data_sources())
    scores = []
    snapshots = []
    for _ in range(params.nb_iterations_per_policy_evaluation):
        reset_seed = prng_worker.next_u64()
        snap_step = prng_worker.randrange(max_steps)
        try:
            env.reset(reset_seed)
            steps = 0
            while not env.terminal and steps < max_steps:
                if steps == snap_step:
                    snapshots.append(env.snapshot())
                action, _ = graph.infer(root, sources)
                env.step(action)
                steps += 1
            scores.append(env.current_score)
        except (OperandUnavailableError, GraphInvariantError):
            raise
        except Exception:
            scores.append(env.min_score)
    return scores, snapshots


def aggregate_scores(scores, how: str) -> float:
    if how == "mean":
        return sum(scores) / len(scores)
    if how == "min":
        return min(scores)
    if how == "median":
        ordered = sorted(scores)
        mid = len(ordered) // 2
        if len(ordered) % 2:
            return ordered[mid]
        return (ordered[mid - 1] + ordered[mid]) / 2.0
    raise ValueError(f"unknown aggregation {how!r}")


def evaluate_all_policies(graph, env_prototype, params, prng_master: Rng,
                          archive) -> dict:
    """Fitness of every root team, plus archive candidate merging.

    One job per root in ascending team-id order.  After all workers
    join, results are consumed in job-id order: candidate snapshots pass
    through the archive's acceptance draw (master generator), and the
    fitness is the configured aggregate of the episode scores.
    """
    roots = graph.roots()
    jobs = [
        Job(i, derive_seed(prng_master), team.id)
        for i, team in enumerate(roots)
    ]

    def make_worker():
        env = env_prototype.deep_clone()
        prng_worker = Rng(0, role="worker")

        def work(job):
            prng_worker.reset(job.seed)
            scores, snaps = evaluate_policy(
                graph, graph.teams[job.payload], env, prng_worker, params
            )
            return EvalResult(job.id, tuple(scores), tuple(snaps))

        return work

    results = run_jobs(jobs, make_worker, params.nb_threads)
    fitnesses = {}
    for i, team in enumerate(roots):
        result = results[i]
        for snap in result.snapshots:
            archive.maybe_record(snap, prng_master)
        fitnesses[team.id] = aggregate_scores(
            list(result.scores), params.score_aggregation
        )
    return fitnesses


def parallel_mutate_programs(marked_edges, params, space, archive,
                             prng_master: Rng) -> None:
    """Mutate each marked edge's program in a seeded parallel job.

    Jobs are ordered by owning-edge creation id.  Every program belongs to
    exactly one edge, so writes are disjoint; workers return the mutated
    lines (and the new bid vector when the archive holds snapshots) and
    the master installs them in job-id order.
    """
    from .evolution import mutate_program

    edges = sorted(set(marked_edges), key=lambda e: e.id)
    if not edges:
        return
    jobs = [
        Job(i, derive_seed(prng_master), edge.id)
        for i, edge in enumerate(edges)
    ]
    by_id = {edge.id: edge for edge in edges}

    def make_worker():
        prng_worker = Rng(0, role="worker")

        def work(job):
            program = by_id[job.payload].program
            prng_worker.reset(job.seed)
            mutate_program(program, params, space, archive, prng_worker)
            bids = tuple(archive.bids_of(program)) if archive.snapshots else None
            return tuple(program.lines), bids

        return work

    payloads = run_jobs(jobs, make_worker, params.nb_threads)
    for i, edge in enumerate(edges):
        lines, bids = payloads[i]
        edge.program.lines = list(lines)
        edge.program.invalidate()
        if bids is not None:
            archive.install_vector(edge.id, bids)
