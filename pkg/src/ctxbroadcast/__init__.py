"""Broadcasting and pseudo-broadcasting tests for preparation contextuality."""

from .catalog import build_example, mazurek, mazurek_boundary, sic_povm, sic_qubit, sic_xi
from .diagnostics import (
    classify_states,
    commutation_report,
    measurement_broadcast,
    norm1_decompose,
    postprocessing_lp,
    repeatable_model,
)
from .errors import ArgumentError, HermiticityWarning, ShapeError, SizeError, UnsupportedDimension
from .feasibility import (
    SolveConfig,
    Status,
    assemble_broadcast,
    assemble_pseudo,
    extract_witness,
    solve,
)
from .objects import NoiseSetting, Povm, Scenario, State, born, load_scenario, save_scenario
from .scan import scan

__version__ = "0.1.0"
