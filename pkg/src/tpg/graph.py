"""The tangled program graph: teams, actions, and program-labelled edges.

Inference walks the graph from a root team: all programs on that team's
outgoing edges bid on the current state, the best-bidding edge is followed
(and excluded from later revisits of the same traversal), until an action
leaf is reached.

Bid comparison is a strict total order so traversal is reproducible:
finite bids beat non-finite ones (NaN and both infinities carry no usable
information, e.g. after an exp overflow), larger finite bids beat smaller,
and earlier-created edges win ties.
"""

from __future__ import annotations

import math

from .data import DataSourceSet
from .errors import GraphInvariantError
from .program import Program, execute_program, validate_program


class ActionVertex:
    """Leaf vertex naming one discrete environment action."""

    __slots__ = ("action",)

    def __init__(self, action: int):
        self.action = action

    def __repr__(self):
        return f"A{self.action}"


class TeamVertex:
    """Internal decision vertex; owns its outgoing edges in creation order."""

    __slots__ = ("id", "edges", "in_count")

    def __init__(self, team_id: int):
        self.id = team_id
        self.edges = []
        self.in_count = 0

    @property
    def is_root(self) -> bool:
        return self.in_count == 0

    def action_edge_count(self) -> int:
        return sum(1 for e in self.edges if type(e.dst) is ActionVertex)

    def __repr__(self):
        return f"T{self.id}"


class Edge:
    """A program-labelled edge from a team to a team or action."""

    __slots__ = ("id", "src", "dst", "program")

    def __init__(self, edge_id: int, src: TeamVertex, dst, program: Program):
        self.id = edge_id
        self.src = src
        self.dst = dst
        self.program = program


def bid_wins(bid_a: float, edge_a: int, bid_b: float, edge_b: int) -> bool:
    """True when (bid_a, edge_a) strictly precedes (bid_b, edge_b).

    Order: finite beats non-finite, then larger bid, then smaller
    (earlier) edge id.
    """
    fin_a = math.isfinite(bid_a)
    fin_b = math.isfinite(bid_b)
    if fin_a != fin_b:
        return fin_a
    if fin_a and bid_a != bid_b:
        return bid_a > bid_b
    return edge_a < edge_b


class TpgGraph:
    """Teams, actions, and edges, with id counters for deterministic creation order."""

    def __init__(self, nb_actions: int):
        if nb_actions < 2:
            raise GraphInvariantError("a graph needs at least 2 actions")
        self.nb_actions = nb_actions
        self.actions = {a: ActionVertex(a) for a in range(nb_actions)}
        self.teams = {}
        self.edges = {}
        self._next_team_id = 0
        self._next_edge_id = 0

    # -- construction ----------------------------------------------------

    def add_team(self) -> TeamVertex:
        team = TeamVertex(self._next_team_id)
        self._next_team_id += 1
        self.teams[team.id] = team
        return team

    def add_edge(self, src: TeamVertex, dst, program: Program) -> Edge:
        if dst is src:
            raise GraphInvariantError(f"self-loop forbidden on team {src.id}")
        edge = Edge(self._next_edge_id, src, dst, program)
        self._next_edge_id += 1
        self.edges[edge.id] = edge
        src.edges.append(edge)
        if type(dst) is TeamVertex:
            dst.in_count += 1
        return edge

    def remove_edge(self, edge: Edge) -> None:
        edge.src.edges.remove(edge)
        del self.edges[edge.id]
        if type(edge.dst) is TeamVertex:
            edge.dst.in_count -= 1

    def retarget_edge(self, edge: Edge, dst) -> None:
        if dst is edge.src:
            raise GraphInvariantError(f"self-loop forbidden on team {edge.src.id}")
        if type(edge.dst) is TeamVertex:
            edge.dst.in_count -= 1
        edge.dst = dst
        if type(dst) is TeamVertex:
            dst.in_count += 1

    # -- queries ----------------------------------------------------------

    def roots(self) -> list:
        """Teams without incoming edges, ascending id."""
        return [t for t in self.teams.values() if t.in_count == 0]

    @property
    def team_count(self) -> int:
        return len(self.teams)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    # -- inference ---------------------------------------------------------

    def infer(self, root: TeamVertex, sources: DataSourceSet):
        """Traverse from ``root``; returns (action id, taken edge-id trace)."""
        taken = set()
        trace = []
        team = root
        # hot loop: compiled programs are invoked directly on the buffers
        buffers = sources.buffers
        regs = buffers[0]
        zeros = sources.register_file._zeros
        isfinite = math.isfinite
        while True:
            best = None
            best_bid = 0.0
            best_fin = False
            for edge in team.edges:
                if edge.id in taken:
                    continue
                fn = edge.program._compiled
                if fn is None:
                    bid = execute_program(edge.program, sources)
                else:
                    regs[:] = zeros
                    bid = fn(*buffers)
                fin = isfinite(bid)
                if best is None or (fin and not best_fin) or (
                    fin == best_fin and fin and bid > best_bid
                ):
                    best, best_bid, best_fin = edge, bid, fin
            if best is None:
                raise GraphInvariantError(
                    f"team {team.id} has no admissible edge; invariants violated"
                )
            taken.add(best.id)
            trace.append(best.id)
            dst = best.dst
            if type(dst) is ActionVertex:
                return dst.action, trace
            team = dst

    # -- evolution support ---------------------------------------------------

    def clone_team(self, team: TeamVertex) -> TeamVertex:
        """Duplicate a team and all its outgoing edges with deep-copied programs.

        The clone is a root; its edge order mirrors the source's, so
        ``zip(team.edges, clone.edges)`` pairs originals with copies.
        """
        clone = self.add_team()
        for edge in team.edges:
            self.add_edge(clone, edge.dst, edge.program.copy())
        return clone

    def remove_root(self, team: TeamVertex) -> None:
        """Delete a root and its outgoing edges; destinations may become roots."""
        if team.in_count != 0:
            raise GraphInvariantError(f"team {team.id} is not a root")
        for edge in list(team.edges):
            self.remove_edge(edge)
        del self.teams[team.id]

    def extract_champion(self, team: TeamVertex) -> "TpgGraph":
        """Copy the subgraph reachable from ``team`` with canonical ids.

        Teams are renumbered breadth-first from ``team``; edges are
        renumbered in visit order following each team's creation order, so
        two extractions of the same policy serialize identically.
        """
        out = TpgGraph(self.nb_actions)
        mapping = {team.id: out.add_team()}
        queue = [team]
        while queue:
            src = queue.pop(0)
            new_src = mapping[src.id]
            for edge in src.edges:
                dst = edge.dst
                if type(dst) is ActionVertex:
                    new_dst = out.actions[dst.action]
                else:
                    new_dst = mapping.get(dst.id)
                    if new_dst is None:
                        new_dst = mapping[dst.id] = out.add_team()
                        queue.append(dst)
                out.add_edge(new_src, new_dst, edge.program.copy())
        return out

    # -- validation -----------------------------------------------------------

    def validate(self) -> list:
        """All invariant violations, empty when the graph is well formed."""
        problems = []
        if not any(t.in_count == 0 for t in self.teams.values()):
            problems.append("graph has no root team")
        in_counts = {t.id: 0 for t in self.teams.values()}
        for team in self.teams.values():
            if len(team.edges) < 2:
                problems.append(f"team {team.id} has fewer than 2 outgoing edges")
            if team.action_edge_count() < 1:
                problems.append(f"team {team.id} has no action edge")
            for edge in team.edges:
                if edge.src is not team:
                    problems.append(f"edge {edge.id} disagrees about its source team")
                if edge.dst is team:
                    problems.append(f"team {team.id} has a self-loop")
                if type(edge.dst) is TeamVertex:
                    if edge.dst.id not in self.teams:
                        problems.append(f"edge {edge.id} targets a removed team")
                    else:
                        in_counts[edge.dst.id] += 1
                elif not 0 <= edge.dst.action < self.nb_actions:
                    problems.append(f"edge {edge.id} targets unknown action {edge.dst.action}")
                bad = validate_program(edge.program)
                problems.extend(f"edge {edge.id}: {p}" for p in bad)
        for tid, count in in_counts.items():
            if self.teams[tid].in_count != count:
                problems.append(
                    f"team {tid} in_count {self.teams[tid].in_count} != actual {count}"
                )
        return problems
