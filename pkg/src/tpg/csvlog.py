"""CSV training log: one header row, then one row per generation.

Floats use ``repr`` (shortest round-trip form) so rows parse back to the
report values exactly and the file is byte-deterministic.  Wall-clock
columns can be dropped entirely for byte-comparing logs across runs.
"""

from __future__ import annotations

import csv

COLUMNS = (
    "generation",
    "best_fitness",
    "mean_fitness",
    "worst_fitness",
    "team_count",
    "edge_count",
    "mean_program_length",
)
TIMING_COLUMNS = ("eval_wall_ms", "mutation_wall_ms")


def _cell(value) -> str:
    return repr(value) if isinstance(value, float) else str(value)


class CsvLogger:
    """Writes generation reports to a text stream."""

    def __init__(self, stream, timings: bool = True):
        self._writer = csv.writer(stream, lineterminator="\n")
        self.timings = timings
        columns = COLUMNS + TIMING_COLUMNS if timings else COLUMNS
        self._writer.writerow(columns)

    def write(self, report) -> None:
        row = [
            report.generation,
            _cell(report.best_fitness),
            _cell(report.mean_fitness),
            _cell(report.worst_fitness),
            report.team_count,
            report.edge_count,
            _cell(report.mean_program_length),
        ]
        if self.timings:
            row.append(_cell(report.eval_wall_ms))
            row.append(_cell(report.mutation_wall_ms))
        self._writer.writerow(row)
