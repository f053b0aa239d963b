"""Verification of observational properties of partially observed automata.

The package decides nine properties of finite-state, partially observed
discrete-event systems: diagnosability, predictability, four detectability
variants and three opacity variants.  Each property is encoded as a two-trace
temporal formula over a Kripke structure derived from the automaton and
checked by quantifier-prefix-specific engines; an independent brute-force
oracle unfolds the definitions directly for cross-validation.

Typical entry points:

    from hyperdes import load_model, verify
    fsa = load_model("model.json")
    verdict = verify(fsa, "diagnosability")

The `hyperdes` console script exposes the same functionality (plus structure
inspection and differential fuzzing) on the command line.
"""

from .des import (
    Fsa,
    build_observer,
    current_state_estimate,
    delayed_state_estimate,
    initial_state_estimate,
    validate_fsa,
)
from .formula import PROPERTIES, parse_formula, property_formula
from .hyper import Verdict, replay_witness, verify
from .kripke import KNode, Lasso, build_kripke, build_modified_kripke, export_dot
from .modelio import (
    load_model,
    parse_model,
    serialize_model,
    serialize_verdict,
)
from .oracle import OracleConfig, differential_fuzz, oracle_check

__version__ = "0.1.0"

__all__ = [
    "Fsa",
    "KNode",
    "Lasso",
    "OracleConfig",
    "PROPERTIES",
    "Verdict",
    "build_kripke",
    "build_modified_kripke",
    "build_observer",
    "current_state_estimate",
    "delayed_state_estimate",
    "differential_fuzz",
    "export_dot",
    "initial_state_estimate",
    "load_model",
    "oracle_check",
    "parse_formula",
    "parse_model",
    "property_formula",
    "replay_witness",
    "serialize_model",
    "serialize_verdict",
    "validate_fsa",
    "verify",
    "__version__",
]
