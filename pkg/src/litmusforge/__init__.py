"""litmusforge: a weak-memory-model simulator for LISA litmus tests.

The pipeline: parse a litmus test, unroll each process into bounded
control paths, enumerate every candidate execution the unconstrained
("anarchic") communication semantics permits, then filter candidates
through a cat-style consistency model and report which final states
survive.
"""

from .litmus import (
    LitmusError,
    LitmusTest,
    ParseError,
    ValidationError,
    format_litmus,
    load_litmus,
    parse_litmus,
    validate,
)
from .paths import ProcessPath, UnrollBudgetError, program_order, unroll
from .anarchic import (
    CandidateExecution,
    Event,
    candidate_executions,
    dump_candidates,
    enumerate_co,
    enumerate_rf,
    solve_values,
)
from .cat import CatModel, CatParseError, check, eval_rel, load_cat, parse_cat
from .verdict import Verdict, final_state, run

__version__ = "0.1.0"

__all__ = [
    "CandidateExecution",
    "CatModel",
    "CatParseError",
    "Event",
    "LitmusError",
    "LitmusTest",
    "ParseError",
    "ProcessPath",
    "UnrollBudgetError",
    "ValidationError",
    "Verdict",
    "candidate_executions",
    "check",
    "dump_candidates",
    "enumerate_co",
    "enumerate_rf",
    "eval_rel",
    "final_state",
    "format_litmus",
    "load_cat",
    "load_litmus",
    "parse_cat",
    "parse_litmus",
    "program_order",
    "run",
    "solve_values",
    "unroll",
    "validate",
]
