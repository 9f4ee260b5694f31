"""Graph serialization in the DOT format, round-trip exact.

Teams serialize as ``T<id>`` nodes, actions as ``A<id>``, and each edge
carries its full program in the label: one ``i<instr>d<dest>$...;`` group
per line, where the ``$`` part lists ``<source>:<location>`` operand
addresses.  A comment header records the format version, instruction-set
name, register count, action count, and environment source layout, which
is everything needed to rebuild an executable graph.  Output is canonical
(actions, then teams ascending id, then edges in creation order), so
export is byte-deterministic and export-import-export is the identity.
"""

from __future__ import annotations

import re

from .data import FLOAT64, INT8, INT64, Address, SourceSpec
from .errors import DotFormatError
from .graph import ActionVertex, TeamVertex, TpgGraph
from .instructions import make_instruction_set
from .program import Line, Program, validate_program

FORMAT_VERSION = 1

_KIND_CODES = {FLOAT64: "f64", INT64: "i64", INT8: "i8"}
_CODE_KINDS = {v: k for k, v in _KIND_CODES.items()}


def _layout_text(layout) -> str:
    parts = []
    for spec in layout[1:]:
        dims = "x".join(str(d) for d in spec.shape)
        parts.append(f"{_KIND_CODES[spec.kind]}:{dims}")
    return ",".join(parts)


def _parse_layout(text: str, nb_registers: int):
    specs = [SourceSpec(FLOAT64, (nb_registers,), writable=True)]
    if text:
        for part in text.split(","):
            try:
                code, dims = part.split(":")
                shape = tuple(int(d) for d in dims.split("x"))
                specs.append(SourceSpec(_CODE_KINDS[code], shape))
            except (ValueError, KeyError):
                raise DotFormatError(f"bad source descriptor {part!r}") from None
    return tuple(specs)


def _program_label(program: Program) -> str:
    groups = []
    for line in program.lines:
        addrs = ",".join(f"{a.source}:{a.location}" for a in line.operands)
        groups.append(f"i{line.instruction}d{line.destination}${addrs};")
    return "".join(groups)


_LINE_RE = re.compile(r"i(\d+)d(\d+)\$([\d:,]*);")
_ADDR_RE = re.compile(r"^(\d+):(\d+)$")


def _parse_program(label: str, iset, layout, nb_registers: int,
                   line_no: int) -> Program:
    lines = []
    pos = 0
    while pos < len(label):
        m = _LINE_RE.match(label, pos)
        if not m:
            raise DotFormatError(f"malformed program label near {label[pos:pos+20]!r}",
                                 line_no)
        pos = m.end()
        instr_idx = int(m.group(1))
        if instr_idx >= len(iset):
            raise DotFormatError(
                f"instruction index {instr_idx} out of range for set "
                f"{iset.name!r} ({len(iset)} instructions)", line_no)
        operands = []
        if m.group(3):
            for token in m.group(3).split(","):
                am = _ADDR_RE.match(token)
                if not am:
                    raise DotFormatError(f"malformed address {token!r}", line_no)
                operands.append(Address(int(am.group(1)), int(am.group(2))))
        lines.append(Line(instr_idx, int(m.group(2)), tuple(operands)))
    program = Program(lines, nb_registers, iset, layout)
    problems = validate_program(program)
    if problems:
        raise DotFormatError("; ".join(problems), line_no)
    return program


def export_dot(graph: TpgGraph) -> str:
    """Serialize a graph; requires at least one edge (metadata source)."""
    if not graph.edges:
        raise DotFormatError("cannot serialize a graph with no edges")
    sample = next(iter(graph.edges.values())).program
    iset = sample.iset
    layout = sample.layout
    out = ["digraph tpg {"]
    out.append(f"  // formatVersion={FORMAT_VERSION}")
    out.append(f"  // iset={iset.name}")
    out.append(f"  // registers={sample.nb_registers}")
    out.append(f"  // actions={graph.nb_actions}")
    out.append(f"  // sources={_layout_text(layout)}")
    for action_id in range(graph.nb_actions):
        out.append(f"  A{action_id};")
    for team_id in sorted(graph.teams):
        out.append(f"  T{team_id};")
    for edge_id in sorted(graph.edges):
        edge = graph.edges[edge_id]
        dst = edge.dst
        dst_name = f"A{dst.action}" if type(dst) is ActionVertex else f"T{dst.id}"
        out.append(
            f'  T{edge.src.id} -> {dst_name} [label="{_program_label(edge.program)}"];'
        )
    out.append("}")
    return "\n".join(out) + "\n"


_HEADER_RE = re.compile(r"^//\s*(\w+)=(.*)$")
_NODE_RE = re.compile(r"^([TA])(\d+);$")
_EDGE_RE = re.compile(r'^T(\d+)\s*->\s*([TA])(\d+)\s*\[label="([^"]*)"\];$')


def import_dot(text: str) -> TpgGraph:
    """Rebuild a graph from its serialized form, validating every invariant."""
    header = {}
    nodes = []
    edges = []
    opened = closed = False
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("digraph"):
            opened = True
            continue
        if line == "}":
            closed = True
            continue
        m = _HEADER_RE.match(line)
        if m:
            header[m.group(1)] = m.group(2).strip()
            continue
        m = _NODE_RE.match(line)
        if m:
            nodes.append((m.group(1), int(m.group(2)), line_no))
            continue
        m = _EDGE_RE.match(line)
        if m:
            edges.append((int(m.group(1)), m.group(2), int(m.group(3)),
                          m.group(4), line_no))
            continue
        raise DotFormatError(f"unrecognized statement {line!r}", line_no)
    if not opened or not closed:
        raise DotFormatError("missing digraph wrapper")

    try:
        version = int(header["formatVersion"])
        iset_name = header["iset"]
        nb_registers = int(header["registers"])
        nb_actions = int(header["actions"])
    except KeyError as exc:
        raise DotFormatError(f"missing header field {exc.args[0]}") from None
    except ValueError as exc:
        raise DotFormatError(f"bad header value: {exc}") from None
    if version != FORMAT_VERSION:
        raise DotFormatError(f"unsupported formatVersion {version}")

    iset = make_instruction_set(iset_name)
    layout = _parse_layout(header.get("sources", ""), nb_registers)

    graph = TpgGraph(nb_actions)
    for kind, vid, line_no in nodes:
        if kind == "A":
            if vid >= nb_actions:
                raise DotFormatError(f"action {vid} out of range", line_no)
        else:
            if vid in graph.teams:
                raise DotFormatError(f"duplicate team T{vid}", line_no)
            graph.teams[vid] = TeamVertex(vid)  # keep the serialized id
            graph._next_team_id = max(graph._next_team_id, vid + 1)
    graph.teams = dict(sorted(graph.teams.items()))

    for src_id, dst_kind, dst_id, label, line_no in edges:
        if src_id not in graph.teams:
            raise DotFormatError(f"edge from undeclared team T{src_id}", line_no)
        src = graph.teams[src_id]
        if dst_kind == "A":
            if dst_id >= nb_actions:
                raise DotFormatError(f"action {dst_id} out of range", line_no)
            dst = graph.actions[dst_id]
        else:
            if dst_id == src_id:
                raise DotFormatError("self-loop forbidden", line_no)
            if dst_id not in graph.teams:
                raise DotFormatError(f"edge to undeclared team T{dst_id}", line_no)
            dst = graph.teams[dst_id]
        program = _parse_program(label, iset, layout, nb_registers, line_no)
        graph.add_edge(src, dst, program)

    problems = graph.validate()
    if problems:
        raise DotFormatError("invalid graph: " + "; ".join(problems))
    return graph
