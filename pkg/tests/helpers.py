"""Shared test infrastructure: the independent reference evaluator, random
program/graph generators, and stub environments.

``naive_execute`` deliberately re-derives operand fetching (conversions,
window index arithmetic) from scratch with explicit loops, so it shares no
mechanism with the library's compiled execution path.
"""

from __future__ import annotations

import math

from tpg.data import (
    FLOAT64,
    INT8,
    INT64,
    DataSource,
    DataSourceSet,
    RegisterFile,
    SourceSpec,
    matrix,
    scalar,
    vector,
)
from tpg.environments import LearningEnvironment
from tpg.evolution import MutationSpace
from tpg.graph import TpgGraph
from tpg.instructions import (
    InstructionSet,
    complex_instruction_set,
    make_instruction,
    simple_instruction_set,
)
from tpg.program import Program
from tpg.rng import Rng


# --- independent reference evaluator -----------------------------------------


def naive_fetch(buffers, layout, otype, source_id, location):
    spec = layout[source_id]
    values = buffers[source_id]
    needs_float = otype.kind == FLOAT64 and spec.kind != FLOAT64

    def conv(v):
        return float(v) if needs_float else v

    if not otype.shape:
        return conv(values[location])
    if len(otype.shape) == 1:
        return [conv(values[location + i]) for i in range(otype.shape[0])]
    h, w = otype.shape
    native_w = spec.shape[1]
    anchors_per_row = native_w - w + 1
    row = location // anchors_per_row
    col = location % anchors_per_row
    out = []
    for i in range(h):
        out.append([conv(values[(row + i) * native_w + (col + j)]) for j in range(w)])
    return out


def naive_execute(program, env_buffers):
    """Reference evaluator: fetch per declared type, apply fn, store float."""
    regs = [0.0] * program.nb_registers
    buffers = [regs, *env_buffers]
    for line in program.lines:
        instr = program.iset[line.instruction]
        operands = [
            naive_fetch(buffers, program.layout, otype, addr.source, addr.location)
            for otype, addr in zip(instr.operand_types, line.operands)
        ]
        regs[line.destination] = float(instr.fn(*operands))
    return regs[0]


# --- generators ----------------------------------------------------------------


def typed_instruction_set() -> InstructionSet:
    """Mixed operand kinds and shapes for exercising conversions and windows."""
    f = scalar(FLOAT64)
    i = scalar(INT64)
    v2 = vector(2, INT8)
    m33 = matrix(3, 3, INT8)
    return InstructionSet(
        "typed-test",
        (
            make_instruction((f, f), lambda a, b: a + b, "tadd"),
            make_instruction((i, v2), lambda a, b: a * (b[0] + b[1]), "scalevec"),
            make_instruction((m33,), lambda m: sum(sum(r) for r in m) / 9.0, "winmean"),
            make_instruction((f, i), lambda a, b: a - b, "mixsub"),
            make_instruction((v2,), lambda b: float(b[0] * b[1]), "vprod"),
        ),
    )


PIXEL_LAYOUT = (
    SourceSpec(FLOAT64, (8,), writable=True),
    SourceSpec(INT8, (8, 8)),
    SourceSpec(FLOAT64, (4,)),
)

SIMPLE_LAYOUT = (
    SourceSpec(FLOAT64, (8,), writable=True),
    SourceSpec(FLOAT64, (2,)),
)


def random_snapshot(rng: Rng, layout) -> tuple:
    snap = []
    for spec in layout[1:]:
        n = spec.element_count()
        if spec.kind == FLOAT64:
            snap.append(tuple(rng.uniform(-5.0, 5.0) for _ in range(n)))
        elif spec.kind == INT64:
            snap.append(tuple(rng.randrange(2001) - 1000 for _ in range(n)))
        else:
            snap.append(tuple(rng.randrange(256) - 128 for _ in range(n)))
    return tuple(snap)


def source_set_for(layout, snapshot) -> DataSourceSet:
    regs = RegisterFile(layout[0].element_count())
    env = [DataSource(spec, values) for spec, values in zip(layout[1:], snapshot)]
    return DataSourceSet(regs, env)


def random_program(rng: Rng, space: MutationSpace, max_lines: int) -> Program:
    return space.random_program(rng, max_lines)


def random_graph(rng: Rng, space: MutationSpace, nb_actions: int = 4,
                 nb_teams: int = 5, max_lines: int = 6) -> TpgGraph:
    """A random graph satisfying every invariant; team 0 is always a root."""
    graph = TpgGraph(nb_actions)
    teams = [graph.add_team() for _ in range(nb_teams)]
    for team in teams:
        k = 2 + rng.randrange(4)
        for j in range(k):
            to_team = j > 0 and nb_teams > 1 and rng.random() < 0.5
            if to_team:
                others = [t for t in teams if t is not team and t.id != 0]
                to_team = bool(others)
            if to_team:
                dst = others[rng.randrange(len(others))]
            else:
                dst = graph.actions[rng.randrange(nb_actions)]
            graph.add_edge(team, dst, space.random_program(rng, max_lines))
    return graph


# --- stub environments -----------------------------------------------------------


class StubEnv(LearningEnvironment):
    """Tiny deterministic environment for fast parallel/evolution tests.

    Two float state cells evolve from the reset seed and the actions taken;
    the score accumulates a simple function of both.
    """

    action_count = 3

    def __init__(self, horizon: int = 4):
        self.horizon = horizon
        self._source = DataSource(SourceSpec(FLOAT64, (2,)))
        self._state = self._source.values
        self._score = 0.0
        self._steps = 0

    def reset(self, seed: int) -> None:
        rng = Rng(seed, role="env")
        self._state[0] = rng.uniform(-1.0, 1.0)
        self._state[1] = rng.uniform(-1.0, 1.0)
        self._score = 0.0
        self._steps = 0

    def step(self, action: int) -> None:
        a, b = self._state
        self._state[0] = math.sin(a + 0.1 * (action + 1))
        self._state[1] = b * 0.5 + 0.25 * action
        self._score += self._state[0] - 0.1 * self._state[1]
        self._steps += 1

    @property
    def current_score(self) -> float:
        return self._score

    @property
    def terminal(self) -> bool:
        return self._steps >= self.horizon

    def data_sources(self):
        return [self._source]

    def snapshot(self):
        return (tuple(self._state),)

    def deep_clone(self):
        clone = StubEnv(self.horizon)
        clone._state[:] = self._state
        clone._score = self._score
        clone._steps = self._steps
        return clone

    @property
    def min_score(self) -> float:
        return -100.0

    @property
    def default_max_steps(self) -> int:
        return self.horizon


class FaultyEnv(StubEnv):
    """Raises mid-episode to exercise the failed-episode containment path."""

    def __init__(self, horizon: int = 4, fail_at: int = 2):
        super().__init__(horizon)
        self.fail_at = fail_at

    def step(self, action: int) -> None:
        if self._steps >= self.fail_at:
            raise RuntimeError("simulated environment failure")
        super().step(action)

    def deep_clone(self):
        clone = FaultyEnv(self.horizon, self.fail_at)
        clone._state[:] = self._state
        clone._score = self._score
        clone._steps = self._steps
        return clone


def simple_space() -> MutationSpace:
    return MutationSpace(simple_instruction_set(), SIMPLE_LAYOUT)


def complex_space() -> MutationSpace:
    return MutationSpace(complex_instruction_set(), SIMPLE_LAYOUT)


def typed_space() -> MutationSpace:
    return MutationSpace(typed_instruction_set(), PIXEL_LAYOUT)
