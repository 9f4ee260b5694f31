"""The generational training loop and its mutation operators.

Each generation: evaluate every root team (parallel phase), delete the
worst-scoring fraction, then clone and mutate surviving roots until the
population is restored.  Topology mutations draw from the master generator
in a fixed, documented order; program-content mutations are deferred to
seeded parallel jobs so the outcome does not depend on the worker count.

Mutated programs must be behaviorally original: their bid vector over the
archived state snapshots has to differ from every live program's cached
vector, otherwise mutation rounds are retried (bounded by
``originality_max_rounds``).
"""

from __future__ import annotations

import math
import struct
import time
from collections import deque
from dataclasses import dataclass

from .data import Address, DataSourceSet, addressable_count
from .errors import GraphInvariantError, ParamError
from .graph import ActionVertex, TpgGraph
from .instructions import InstructionSet
from .program import Line, Program, execute_program
from .rng import Rng

_PROBABILITY_FIELDS = (
    "ratio_deleted_roots",
    "p_edge_delete",
    "p_edge_add",
    "p_program_mutate",
    "p_edge_destination_change",
    "p_edge_destination_is_action",
    "p_line_delete",
    "p_line_add",
    "p_line_mutate",
    "p_line_swap",
    "archiving_probability",
)

_AGGREGATIONS = ("mean", "min", "median")


@dataclass
class EvolutionParams:
    """All meta-parameters of a training run; ``seed`` is the only required one."""

    seed: int
    nb_roots: int = 100
    ratio_deleted_roots: float = 0.85
    nb_generations: int = 200
    max_init_outgoing_edges: int = 3
    max_outgoing_edges: int = 10
    max_program_size: int = 96
    nb_registers: int = 8
    nb_iterations_per_policy_evaluation: int = 1
    max_steps_per_evaluation: int = None  # None: use the environment's default
    p_edge_delete: float = 0.7
    p_edge_add: float = 0.7
    p_program_mutate: float = 0.2
    p_edge_destination_change: float = 0.1
    p_edge_destination_is_action: float = 0.5
    p_line_delete: float = 0.5
    p_line_add: float = 0.5
    p_line_mutate: float = 1.0
    p_line_swap: float = 1.0
    archive_size: int = 50
    archiving_probability: float = 0.05
    nb_threads: int = None  # None: detected hardware concurrency
    score_aggregation: str = "mean"
    originality_max_rounds: int = 16

    def validate(self) -> None:
        if self.seed is None:
            raise ParamError("seed: required")
        if self.nb_roots < 2:
            raise ParamError(f"nb_roots: must be >= 2, got {self.nb_roots}")
        if not 0.0 < self.ratio_deleted_roots < 1.0:
            raise ParamError(
                f"ratio_deleted_roots: must be in (0, 1), got {self.ratio_deleted_roots}"
            )
        for name in _PROBABILITY_FIELDS:
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ParamError(f"{name}: must be in [0, 1], got {v}")
        if self.nb_generations < 0:
            raise ParamError("nb_generations: must be >= 0")
        if self.max_init_outgoing_edges < 2:
            raise ParamError("max_init_outgoing_edges: must be >= 2")
        if self.max_outgoing_edges < 2:
            raise ParamError("max_outgoing_edges: must be >= 2")
        if self.max_program_size < 1:
            raise ParamError("max_program_size: must be >= 1")
        if self.nb_registers < 1:
            raise ParamError("nb_registers: must be >= 1")
        if self.nb_iterations_per_policy_evaluation < 1:
            raise ParamError("nb_iterations_per_policy_evaluation: must be >= 1")
        if self.max_steps_per_evaluation is not None and self.max_steps_per_evaluation < 1:
            raise ParamError("max_steps_per_evaluation: must be >= 1 or null")
        if self.archive_size < 0:
            raise ParamError("archive_size: must be >= 0")
        if self.nb_threads is not None and self.nb_threads < 1:
            raise ParamError("nb_threads: must be >= 1 or null")
        if self.score_aggregation not in _AGGREGATIONS:
            raise ParamError(
                f"score_aggregation: must be one of {_AGGREGATIONS}, "
                f"got {self.score_aggregation!r}"
            )
        if self.originality_max_rounds < 1:
            raise ParamError("originality_max_rounds: must be >= 1")

    def deleted_root_count(self) -> int:
        return int(math.floor(self.ratio_deleted_roots * self.nb_roots))


class MutationSpace:
    """Precomputed valid-address tables for one (instruction set, layout) pair.

    Mutation and initialization draw instructions and operand addresses
    through this object so every drawn line is valid by construction.
    """

    def __init__(self, iset: InstructionSet, layout):
        self.iset = iset
        self.layout = tuple(layout)
        self.nb_registers = self.layout[0].element_count()
        self._tables = []  # per instruction: per operand: (total, ((src, count), ...))
        servable = []
        for idx, instr in enumerate(iset):
            per_operand = []
            ok = True
            for otype in instr.operand_types:
                counts = [
                    (sid, addressable_count(spec, otype))
                    for sid, spec in enumerate(self.layout)
                ]
                counts = [(sid, c) for sid, c in counts if c > 0]
                total = sum(c for _, c in counts)
                if total == 0:
                    ok = False
                per_operand.append((total, tuple(counts)))
            self._tables.append(tuple(per_operand))
            if ok:
                servable.append(idx)
        if not servable:
            raise ParamError(
                "no instruction in the set can be served by the source layout"
            )
        self.servable = tuple(servable)

    def draw_instruction(self, rng: Rng) -> int:
        return self.servable[rng.randrange(len(self.servable))]

    def address_total(self, instr_idx: int, operand_pos: int) -> int:
        return self._tables[instr_idx][operand_pos][0]

    def draw_address(self, rng: Rng, instr_idx: int, operand_pos: int) -> Address:
        total, table = self._tables[instr_idx][operand_pos]
        u = rng.randrange(total)
        for sid, count in table:
            if u < count:
                return Address(sid, u)
            u -= count
        raise AssertionError("unreachable: cumulative table exhausted")

    def random_line(self, rng: Rng) -> Line:
        """Draw order: instruction, destination register, operands left to right."""
        instr_idx = self.draw_instruction(rng)
        dest = rng.randrange(self.nb_registers)
        arity = self.iset[instr_idx].arity
        operands = tuple(
            self.draw_address(rng, instr_idx, k) for k in range(arity)
        )
        return Line(instr_idx, dest, operands)

    def random_program(self, rng: Rng, max_size: int) -> Program:
        """Length uniform in [1, max_size], then one random line per slot."""
        length = 1 + rng.randrange(max_size)
        lines = [self.random_line(rng) for _ in range(length)]
        return Program(lines, self.nb_registers, self.iset, self.layout)


_CANONICAL_NAN = struct.pack("<Q", 0x7FF8000000000000)
_PACK_D = struct.Struct("<d")


def signature_bytes(bids) -> bytes:
    """Bit-level encoding of a bid vector; all NaNs collapse to one pattern."""
    parts = []
    for b in bids:
        parts.append(_CANONICAL_NAN if b != b else _PACK_D.pack(b))
    return b"".join(parts)


class Archive:
    """Bounded snapshot store plus cached bid vectors of live programs.

    Snapshots are environment-state copies recorded during evaluation; a
    candidate enters with ``probability`` (one master draw per candidate,
    drawn regardless of the outcome), evicting the oldest when full.
    Each live program's bids over the stored snapshots are cached by
    owning-edge id and maintained incrementally: inserted snapshots only
    cost one execution per live program, evictions drop a column, mutated
    programs replace their whole vector.
    """

    def __init__(self, capacity: int, probability: float):
        self.capacity = capacity
        self.probability = probability
        self.snapshots = deque()
        self.bid_vectors = {}
        self._sig_set = frozenset()
        self._added = []
        self._evicted = 0
        self._scratch = None

    def maybe_record(self, snapshot, rng: Rng) -> bool:
        accept = rng.random() < self.probability
        if not accept or self.capacity == 0:
            return False
        if len(self.snapshots) >= self.capacity:
            if len(self.snapshots) > len(self._added):
                self._evicted += 1  # a column cached at the last sync leaves
            else:
                self._added.pop(0)  # an uncached snapshot leaves again
            self.snapshots.popleft()
        self.snapshots.append(snapshot)
        self._added.append(snapshot)
        return True

    def bids_of(self, program: Program, snapshots=None) -> list:
        scratch = self._scratch
        if scratch is None or scratch.layout != program.layout:
            scratch = self._scratch = DataSourceSet.from_layout(program.layout)
        bids = []
        for snap in self.snapshots if snapshots is None else snapshots:
            scratch.load_state(snap)
            bids.append(execute_program(program, scratch))
        return bids

    def signature_of(self, program: Program) -> bytes:
        return signature_bytes(self.bids_of(program))

    def is_original(self, program: Program) -> bool:
        """True when no live program bids identically on every archived snapshot."""
        if not self.snapshots or not self._sig_set:
            return True
        return self.signature_of(program) not in self._sig_set

    def install_vector(self, edge_id: int, bids) -> None:
        self.bid_vectors[edge_id] = list(bids)

    def sync(self, graph: TpgGraph, copied_from=None) -> None:
        """Align the bid-vector cache with the graph and snapshot changes.

        Carried-over vectors lose evicted leading columns and gain one
        freshly computed bid per snapshot inserted since the last sync;
        edges whose program was copied inherit the source edge's vector
        (identical behavior until mutated).
        """
        if not self.snapshots:
            self.bid_vectors = {}
            self._sig_set = frozenset()
            self._added = []
            self._evicted = 0
            return
        copied_from = copied_from or {}
        old = self.bid_vectors
        evicted = self._evicted
        added = self._added
        fresh = {}
        for eid, edge in graph.edges.items():
            vec = old.get(eid)
            probe = eid
            while vec is None and probe in copied_from:
                probe = copied_from[probe]
                vec = old.get(probe)
            if vec is None:
                fresh[eid] = self.bids_of(edge.program)
            elif evicted or added:
                base = vec[evicted:] if evicted else list(vec)
                if added:
                    base.extend(self.bids_of(edge.program, added))
                fresh[eid] = base
            else:
                fresh[eid] = list(vec)
        self.bid_vectors = fresh
        self._added = []
        self._evicted = 0
        self._sig_set = frozenset(
            signature_bytes(vec) for vec in fresh.values()
        )


def is_original(program: Program, archive: Archive) -> bool:
    return archive.is_original(program)


def init_population(
    params: EvolutionParams,
    nb_actions: int,
    iset: InstructionSet,
    layout,
    rng: Rng,
    space: MutationSpace = None,
) -> TpgGraph:
    """The initial graph: root teams whose edges all lead to actions.

    Per team, the draw order is: edge count k uniform in
    [2, max_init_outgoing_edges]; then per edge its action followed by its
    program (the second edge's action is drawn among the remaining actions
    so the first two differ).
    """
    if nb_actions < 2:
        raise GraphInvariantError("need at least 2 actions")
    if space is None:
        space = MutationSpace(iset, layout)
    graph = TpgGraph(nb_actions)
    for _ in range(params.nb_roots):
        team = graph.add_team()
        k = 2 + rng.randrange(params.max_init_outgoing_edges - 1) \
            if params.max_init_outgoing_edges > 2 else 2
        first = rng.randrange(nb_actions)
        graph.add_edge(team, graph.actions[first],
                       space.random_program(rng, params.max_program_size))
        second = rng.randrange(nb_actions - 1)
        if second >= first:
            second += 1
        graph.add_edge(team, graph.actions[second],
                       space.random_program(rng, params.max_program_size))
        for _ in range(k - 2):
            action = rng.randrange(nb_actions)
            graph.add_edge(team, graph.actions[action],
                           space.random_program(rng, params.max_program_size))
    return graph


@dataclass
class DecimationStats:
    removed: int
    survivors: int
    exposed: int
    survivor_ids: list


def decimate(graph: TpgGraph, fitnesses, params: EvolutionParams) -> DecimationStats:
    """Remove the worst-scoring roots; ties die newest-first.

    Exactly ``floor(ratio_deleted_roots * nb_roots)`` roots go.  Teams that
    lose their last incoming edge become roots and stay (they join the next
    generation's evaluation).
    """
    roots = graph.roots()
    for team in roots:
        if team.id not in fitnesses:
            raise ParamError(f"missing fitness for root team {team.id}")
    m = params.deleted_root_count()
    victims = sorted(roots, key=lambda t: (fitnesses[t.id], -t.id))[:m]
    for team in victims:
        graph.remove_root(team)
    survivor_ids = [t.id for t in roots if t.id in graph.teams and t.in_count == 0]
    exposed = sum(1 for t in graph.teams.values()
                  if t.in_count == 0 and t.id not in fitnesses)
    return DecimationStats(
        removed=len(victims),
        survivors=len(roots) - len(victims),
        exposed=exposed,
        survivor_ids=survivor_ids,
    )


def _draw_destination(graph: TpgGraph, team, params: EvolutionParams, rng: Rng):
    """An action with probability p_edge_destination_is_action, else a team.

    The team pool excludes ``team`` itself; when it is empty the draw
    falls back to an action so the operation never dead-ends.
    """
    if not rng.coin(params.p_edge_destination_is_action):
        pool = [t for t in graph.teams.values() if t is not team]
        if pool:
            return pool[rng.randrange(len(pool))]
    return graph.actions[rng.randrange(graph.nb_actions)]


def mutate_team(graph, team, params, rng, copied_from) -> list:
    """Structural mutation of a freshly cloned root; returns edges to mutate.

    Applied in fixed order, all draws on the master generator:

    1. while the team keeps > 2 edges and a coin at p_edge_delete hits,
       delete one uniformly drawn edge whose removal keeps an action edge;
    2. while below max_outgoing_edges and a coin at p_edge_add hits, add an
       edge carrying a copy of a uniformly drawn live program, destination
       per _draw_destination; the new program is marked for mutation;
    3. per edge, with p_edge_destination_change, redraw the destination;
       a draw that would remove the last action edge is refused (the draws
       are still consumed);
    4. per edge, with p_program_mutate, mark the program for mutation.

    If nothing changed, one uniformly drawn edge's program is marked so a
    clone never survives identical to its source.
    """
    marked = []
    marked_set = set()
    changed = False

    while len(team.edges) > 2 and rng.coin(params.p_edge_delete):
        single_action = team.action_edge_count() == 1
        deletable = [
            e for e in team.edges
            if not (single_action and type(e.dst) is ActionVertex)
        ]
        victim = deletable[rng.randrange(len(deletable))]
        graph.remove_edge(victim)
        changed = True

    while len(team.edges) < params.max_outgoing_edges and rng.coin(params.p_edge_add):
        live = list(graph.edges.values())
        source_edge = live[rng.randrange(len(live))]
        dst = _draw_destination(graph, team, params, rng)
        edge = graph.add_edge(team, dst, source_edge.program.copy())
        copied_from[edge.id] = source_edge.id
        marked.append(edge)
        marked_set.add(edge)
        changed = True

    for edge in list(team.edges):
        if not rng.coin(params.p_edge_destination_change):
            continue
        if rng.coin(params.p_edge_destination_is_action):
            new_dst = graph.actions[rng.randrange(graph.nb_actions)]
        else:
            pool = [t for t in graph.teams.values() if t is not team]
            if not pool:
                continue
            new_dst = pool[rng.randrange(len(pool))]
            if type(edge.dst) is ActionVertex and team.action_edge_count() == 1:
                continue  # refused: would strip the last action edge
        graph.retarget_edge(edge, new_dst)
        changed = True

    for edge in list(team.edges):
        if rng.coin(params.p_program_mutate) and edge not in marked_set:
            marked.append(edge)
            marked_set.add(edge)
            changed = True

    if not changed:
        edge = team.edges[rng.randrange(len(team.edges))]
        marked.append(edge)
    return marked


def populate(graph, survivor_ids, params, rng, copied_from) -> tuple:
    """Clone and mutate uniformly drawn survivors until the root count is back to n."""
    survivors = [graph.teams[tid] for tid in survivor_ids]
    if not survivors:
        raise GraphInvariantError("no surviving root to duplicate")
    new_teams = []
    to_mutate = []
    guard = 0
    while len(graph.roots()) < params.nb_roots:
        guard += 1
        if guard > 50 * params.nb_roots:
            raise GraphInvariantError("populate failed to restore the root count")
        source = survivors[rng.randrange(len(survivors))]
        clone = graph.clone_team(source)
        for src_edge, new_edge in zip(source.edges, clone.edges):
            copied_from[new_edge.id] = src_edge.id
        to_mutate.extend(mutate_team(graph, clone, params, rng, copied_from))
        new_teams.append(clone)
    return new_teams, to_mutate


def mutate_program(program: Program, params: EvolutionParams,
                   space: MutationSpace, archive: Archive, rng: Rng) -> None:
    """Apply mutation rounds in place until the program is original.

    One round, in order: delete a uniform line (p_line_delete, length > 1);
    insert a random line at a uniform position (p_line_add, below
    max_program_size); swap two distinct uniform lines (p_line_swap,
    length >= 2); rewrite one uniform line (p_line_mutate) by redrawing one
    of instruction / destination / a single operand address, redrawing any
    operand the new instruction invalidates.  Rounds repeat until the
    archive reports the behavior original, capped at originality_max_rounds.
    """
    lines = program.lines
    rounds = 0
    while True:
        if len(lines) > 1 and rng.coin(params.p_line_delete):
            del lines[rng.randrange(len(lines))]
        if len(lines) < params.max_program_size and rng.coin(params.p_line_add):
            lines.insert(rng.randrange(len(lines) + 1), space.random_line(rng))
        if len(lines) >= 2 and rng.coin(params.p_line_swap):
            i = rng.randrange(len(lines))
            j = rng.randrange(len(lines) - 1)
            if j >= i:
                j += 1
            lines[i], lines[j] = lines[j], lines[i]
        if rng.coin(params.p_line_mutate):
            idx = rng.randrange(len(lines))
            lines[idx] = _rewrite_line(lines[idx], space, rng)
        rounds += 1
        program.invalidate()
        if rounds >= params.originality_max_rounds or archive.is_original(program):
            return


def _rewrite_line(line: Line, space: MutationSpace, rng: Rng) -> Line:
    """Redraw one of {instruction, destination, one operand address}."""
    which = rng.randrange(3)
    if which == 0:
        instr_idx = space.draw_instruction(rng)
        instr = space.iset[instr_idx]
        operands = []
        for k, otype in enumerate(instr.operand_types):
            if k < len(line.operands):
                addr = line.operands[k]
                if addr.location < addressable_count(space.layout[addr.source], otype):
                    operands.append(addr)
                    continue
            operands.append(space.draw_address(rng, instr_idx, k))
        return Line(instr_idx, line.destination, tuple(operands))
    if which == 1:
        return Line(line.instruction, rng.randrange(space.nb_registers), line.operands)
    k = rng.randrange(len(line.operands))
    operands = list(line.operands)
    operands[k] = space.draw_address(rng, line.instruction, k)
    return Line(line.instruction, line.destination, tuple(operands))


def archive_maybe_record(archive: Archive, snapshot, rng: Rng) -> bool:
    return archive.maybe_record(snapshot, rng)


@dataclass
class TrainingState:
    """Everything one generation transforms; owned by the master phase."""

    graph: TpgGraph
    env_prototype: object
    params: EvolutionParams
    space: MutationSpace
    archive: Archive
    prng_master: Rng
    generation: int = 0


@dataclass
class GenerationReport:
    generation: int
    fitnesses: dict
    champion_id: int
    champion_fitness: float
    removed: int
    survivors: int
    root_count: int
    team_count: int
    edge_count: int
    mean_program_length: float
    eval_wall_ms: float
    mutation_wall_ms: float

    @property
    def best_fitness(self) -> float:
        return self.champion_fitness

    @property
    def mean_fitness(self) -> float:
        return sum(self.fitnesses.values()) / len(self.fitnesses)

    @property
    def worst_fitness(self) -> float:
        return min(self.fitnesses.values())


def run_generation(state: TrainingState) -> GenerationReport:
    """One full cycle: evaluate, decimate, repopulate, mutate programs."""
    from .parallel import evaluate_all_policies, parallel_mutate_programs

    graph, params = state.graph, state.params
    t0 = time.perf_counter()
    fitnesses = evaluate_all_policies(
        graph, state.env_prototype, params, state.prng_master, state.archive
    )
    t1 = time.perf_counter()

    champion_id = None
    champion_fitness = None
    for tid in sorted(fitnesses):
        f = fitnesses[tid]
        if champion_fitness is None or f > champion_fitness:
            champion_id, champion_fitness = tid, f

    stats = decimate(graph, fitnesses, params)
    copied_from = {}
    _, to_mutate = populate(graph, stats.survivor_ids, params,
                            state.prng_master, copied_from)
    state.archive.sync(graph, copied_from)
    parallel_mutate_programs(to_mutate, params, state.space, state.archive,
                             state.prng_master)
    t2 = time.perf_counter()

    edge_count = graph.edge_count
    mean_len = (
        sum(len(e.program) for e in graph.edges.values()) / edge_count
        if edge_count else 0.0
    )
    report = GenerationReport(
        generation=state.generation,
        fitnesses=fitnesses,
        champion_id=champion_id,
        champion_fitness=champion_fitness,
        removed=stats.removed,
        survivors=stats.survivors,
        root_count=len(graph.roots()),
        team_count=graph.team_count,
        edge_count=edge_count,
        mean_program_length=mean_len,
        eval_wall_ms=(t1 - t0) * 1000.0,
        mutation_wall_ms=(t2 - t1) * 1000.0,
    )
    state.generation += 1
    return report
