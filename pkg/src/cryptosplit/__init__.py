"""Toolkit for the two-player cryptogenography problem.

Lower bounds come from a dynamic-programming search over the lattice
splitting game plus exact LP certification of the extracted inequality
sets; upper bounds from the concavity-method batteries; protocols can
be evaluated exactly and simulated against an optimal adversary.
"""

from .extract import (ConstraintSet, ScaleConstraint, SplitConstraint,
                      ZeroBitConstraint, extract, sparsify)
from .hardness import (check_c1_sampling, check_c2prime,
                       check_dominates_zero_bit, check_psd, hessian_fq,
                       upper_bound, upper_bound_scaled)
from .lp import (LpModel, LpSolution, build_lp, emit_lp, parse_lp,
                 solve_exact, verify_certificate)
from .positions import (canonicalize, closed_form_value, is_allowed_split,
                        minsum_bound, relaxed_splits, zero_bit_value)
from .protocol import (ProtocolGraph, SimulationReport, builtin,
                       graph_from_provenance, simulate)
from .table import (ValueTable, init_table, run_search, scaling_pass,
                    splitting_pass)

__version__ = "0.1.0"

__all__ = [
    "ConstraintSet", "ScaleConstraint", "SplitConstraint",
    "ZeroBitConstraint", "extract", "sparsify",
    "check_c1_sampling", "check_c2prime", "check_dominates_zero_bit",
    "check_psd", "hessian_fq", "upper_bound", "upper_bound_scaled",
    "LpModel", "LpSolution", "build_lp", "emit_lp", "parse_lp",
    "solve_exact", "verify_certificate",
    "canonicalize", "closed_form_value", "is_allowed_split",
    "minsum_bound", "relaxed_splits", "zero_bit_value",
    "ProtocolGraph", "SimulationReport", "builtin",
    "graph_from_provenance", "simulate",
    "ValueTable", "init_table", "run_search", "scaling_pass",
    "splitting_pass",
]
