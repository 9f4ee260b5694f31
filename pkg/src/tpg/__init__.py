"""Tangled program graphs: genetic-programming policies with deterministic
parallel training and a fully customizable typed instruction set."""

from .config import RunConfig, dump_config, load_config
from .data import (
    FLOAT64,
    INT8,
    INT64,
    Address,
    DataSource,
    DataSourceSet,
    OperandType,
    RegisterFile,
    SourceSpec,
    addressable_count,
    matrix,
    scalar,
    vector,
)
from .environments import (
    LearningEnvironment,
    PendulumEnv,
    TicTacToeEnv,
    make_environment,
    register_environment,
)
from .errors import TpgError
from .evolution import (
    Archive,
    EvolutionParams,
    GenerationReport,
    MutationSpace,
    TrainingState,
    archive_maybe_record,
    decimate,
    init_population,
    is_original,
    mutate_program,
    mutate_team,
    populate,
    run_generation,
)
from .dot import export_dot, import_dot
from .graph import ActionVertex, Edge, TeamVertex, TpgGraph, bid_wins
from .instructions import (
    Instruction,
    InstructionSet,
    complex_instruction_set,
    make_instruction,
    make_instruction_set,
    register_instruction_set,
    simple_instruction_set,
)
from .parallel import (
    EvalResult,
    Job,
    derive_seed,
    evaluate_all_policies,
    evaluate_policy,
    parallel_mutate_programs,
    run_jobs,
)
from .program import Line, Program, bids_on, execute_program, validate_program
from .rng import Rng
from .runner import TrainResult, build_layout, evaluate_graph, train, train_and_write

__version__ = "0.1.0"
