"""Linear register-machine programs and their execution engine.

A program is an ordered list of lines; each line applies one instruction
to operands fetched from the data sources and stores the float result in a
destination register.  Executing a program against a source set runs the
lines strictly in order on a zeroed register file and returns register 0,
the bid.

For speed the engine compiles each program once into a specialized Python
function (operand fetches and arithmetic inlined), cached on the program
and invalidated by mutation.  Compilation validates every operand address
up front, which is equivalent to the per-line availability check of a
naive evaluator: sources cannot change shape at runtime, so a program
either always passes or always faults.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

from .data import FLOAT64, DataSourceSet, OperandType, addressable_count
from .errors import OperandUnavailableError
from .instructions import COMPILER_HELPERS, InstructionSet


class Line(NamedTuple):
    """One program step: instruction index, destination register, operand addresses."""

    instruction: int
    destination: int
    operands: tuple


@dataclass(eq=False)
class Program:
    """An executable sequence of lines bound to an instruction set and source layout."""

    lines: list
    nb_registers: int
    iset: InstructionSet
    layout: tuple
    _compiled: Optional[object] = field(default=None, repr=False, compare=False)

    def copy(self) -> "Program":
        return Program(list(self.lines), self.nb_registers, self.iset, self.layout)

    def invalidate(self) -> None:
        self._compiled = None

    def __len__(self) -> int:
        return len(self.lines)

    def __getstate__(self):
        return (self.lines, self.nb_registers, self.iset, self.layout)

    def __setstate__(self, state):
        self.lines, self.nb_registers, self.iset, self.layout = state
        self._compiled = None


def _fetch_expr(buf: str, spec, otype: OperandType, loc: int) -> str:
    """Python expression reading one operand from buffer variable ``buf``."""
    convert = otype.kind == FLOAT64 and spec.kind != FLOAT64
    if not otype.shape:
        e = f"{buf}[{loc}]"
        return f"float({e})" if convert else e
    if len(otype.shape) == 1:
        e = f"{buf}[{loc}:{loc + otype.shape[0]}]"
        return f"[float(_v) for _v in {e}]" if convert else e
    h, w = otype.shape
    big_w = spec.shape[1]
    anchors_w = big_w - w + 1
    base = (loc // anchors_w) * big_w + loc % anchors_w
    rows = [f"{buf}[{base + i * big_w}:{base + i * big_w + w}]" for i in range(h)]
    if convert:
        rows = [f"[float(_v) for _v in {r}]" for r in rows]
    return "[" + ", ".join(rows) + "]"


def compile_program(program: Program):
    """Build the specialized executor ``fn(regs, *env_buffers) -> float``."""
    iset = program.iset
    layout = program.layout
    bad = validate_program(program)
    if bad:
        raise OperandUnavailableError("; ".join(bad))

    names = ["r"] + [f"s{i}" for i in range(1, len(layout))]
    ns = dict(COMPILER_HELPERS)
    body = [f"def _program({', '.join(names)}):"]
    for j, line in enumerate(program.lines):
        instr = iset[line.instruction]
        args = [
            _fetch_expr(names[addr.source], layout[addr.source], otype, addr.location)
            for otype, addr in zip(instr.operand_types, line.operands)
        ]
        if instr.expr is not None:
            expr = instr.expr.format(*args)
        else:
            fname = f"_op{j}"
            ns[fname] = instr.fn
            expr = f"float({fname}({', '.join(args)}))"
        body.append(f"    r[{line.destination}] = {expr}")
    body.append("    return r[0]")
    exec("\n".join(body), ns)
    return ns["_program"]


def execute_program(program: Program, sources: DataSourceSet) -> float:
    """Run the program on a freshly zeroed register file; returns the bid."""
    fn = program._compiled
    if fn is None:
        if sources.layout != program.layout:
            raise OperandUnavailableError(
                "source set layout does not match the program's layout"
            )
        fn = program._compiled = compile_program(program)
    sources.register_file.reset()
    return fn(*sources.buffers)


def bids_on(program: Program, snapshots) -> list:
    """Bids over a list of state snapshots, fresh registers each time."""
    out = []
    if not snapshots:
        return out
    scratch = DataSourceSet.from_layout(program.layout)
    for snap in snapshots:
        scratch.load_state(snap)
        out.append(execute_program(program, scratch))
    return out


def validate_program(program: Program) -> list:
    """All structural violations, empty when the program is well formed."""
    problems = []
    if not program.lines:
        problems.append("empty program")
    iset = program.iset
    layout = program.layout
    for j, line in enumerate(program.lines):
        if not 0 <= line.instruction < len(iset):
            problems.append(f"line {j}: instruction index {line.instruction} out of range")
            continue
        instr = iset[line.instruction]
        if not 0 <= line.destination < program.nb_registers:
            problems.append(f"line {j}: destination register {line.destination} out of range")
        if len(line.operands) != instr.arity:
            problems.append(
                f"line {j}: {len(line.operands)} operands for {instr.arity}-ary "
                f"instruction {instr.name}"
            )
            continue
        for k, (otype, addr) in enumerate(zip(instr.operand_types, line.operands)):
            if not 0 <= addr.source < len(layout):
                problems.append(f"line {j}: operand {k} names unknown source {addr.source}")
                continue
            limit = addressable_count(layout[addr.source], otype)
            if not 0 <= addr.location < limit:
                problems.append(
                    f"line {j}: operand {k} address out of range "
                    f"(location {addr.location}, {limit} valid for {otype})"
                )
    return problems
