"""Synthesis of box-confined control potentials that realize target unitary gates.

The pipeline: build the truncated box spectrum and triple-sine overlap
table, form the target residual, assemble the second-order gate-error
model as a quadratic program over lexicographically flattened
(mode, time-step) amplitudes, solve the energy-constrained minimization,
and verify the synthesized control against an exact piecewise propagator
via the noise-to-signal energy ratio.
"""

from .assembly import (
    ControlField,
    DesignGrid,
    QuadraticProgram,
    assemble_C,
    assemble_D,
    assemble_beta,
    assemble_program,
    lex_index,
    predicted_error,
)
from .cli import RunConfig, SweepConfig, SynthesisReport, run_sweep, run_synthesis
from .optimizer import SolverConfig, SolverResult, kkt_residuals, objective, solve_fixed_point
from .propagation import (
    DysonGate,
    PropagatorResult,
    dyson_gate,
    exact_propagate,
    nser,
    physical_gate,
    potential_matrix,
)
from .spectral import (
    GateMatrix,
    GateRole,
    OverlapTable,
    SpectralBasis,
    bohr_frequency,
    build_overlap_table,
    dft_gate,
    energy,
    gamma_closed,
    gamma_quadrature,
    gate_from_kernel,
    make_basis,
    partial_trace_23,
    target_residual,
)

__version__ = "0.1.0"

__all__ = [
    "ControlField",
    "DesignGrid",
    "DysonGate",
    "GateMatrix",
    "GateRole",
    "OverlapTable",
    "PropagatorResult",
    "QuadraticProgram",
    "RunConfig",
    "SolverConfig",
    "SolverResult",
    "SpectralBasis",
    "SweepConfig",
    "SynthesisReport",
    "assemble_C",
    "assemble_D",
    "assemble_beta",
    "assemble_program",
    "bohr_frequency",
    "build_overlap_table",
    "dft_gate",
    "dyson_gate",
    "energy",
    "exact_propagate",
    "gamma_closed",
    "gamma_quadrature",
    "gate_from_kernel",
    "kkt_residuals",
    "lex_index",
    "make_basis",
    "nser",
    "objective",
    "partial_trace_23",
    "physical_gate",
    "potential_matrix",
    "predicted_error",
    "run_sweep",
    "run_synthesis",
    "solve_fixed_point",
    "target_residual",
]
