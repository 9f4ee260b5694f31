"""CSV log rendering: exact float round trips and column layout."""

import csv
import io

from tpg.csvlog import COLUMNS, TIMING_COLUMNS, CsvLogger
from tpg.evolution import GenerationReport


def report(gen):
    fitnesses = {7: -1234.56789 + gen, 9: -0.1 * gen, 11: -3.3333333333333335}
    best = max(fitnesses.values())
    champ = max(fitnesses, key=lambda tid: fitnesses[tid])
    return GenerationReport(
        generation=gen,
        fitnesses=fitnesses,
        champion_id=champ,
        champion_fitness=best,
        removed=85,
        survivors=15,
        root_count=100,
        team_count=123,
        edge_count=456,
        mean_program_length=47.25,
        eval_wall_ms=12.5,
        mutation_wall_ms=3.75,
    )


def render(reports, timings):
    buffer = io.StringIO()
    logger = CsvLogger(buffer, timings=timings)
    for r in reports:
        logger.write(r)
    return buffer.getvalue()


def test_header_first_then_one_row_per_generation():
    text = render([report(0), report(1), report(2)], timings=True)
    rows = text.splitlines()
    assert len(rows) == 4
    assert rows[0] == ",".join(COLUMNS + TIMING_COLUMNS)


def test_fields_parse_back_exactly():
    reports = [report(0), report(1)]
    text = render(reports, timings=True)
    parsed = list(csv.DictReader(io.StringIO(text)))
    for row, rep in zip(parsed, reports):
        assert int(row["generation"]) == rep.generation
        assert float(row["best_fitness"]) == rep.best_fitness
        assert float(row["mean_fitness"]) == rep.mean_fitness
        assert float(row["worst_fitness"]) == rep.worst_fitness
        assert int(row["team_count"]) == rep.team_count
        assert int(row["edge_count"]) == rep.edge_count
        assert float(row["mean_program_length"]) == rep.mean_program_length
        assert float(row["eval_wall_ms"]) == rep.eval_wall_ms
        assert float(row["mutation_wall_ms"]) == rep.mutation_wall_ms


def test_timings_mode_changes_columns_only():
    with_t = render([report(0)], timings=True)
    without = render([report(0)], timings=False)
    assert without.splitlines()[0] == ",".join(COLUMNS)
    assert with_t.splitlines()[1].startswith(without.splitlines()[1])


def test_rendering_is_deterministic():
    assert render([report(0)], True) == render([report(0)], True)
