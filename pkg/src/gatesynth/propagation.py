"""Second-order gate evaluation and the exact piecewise propagator oracle.

The truncated gate and the assembled quadratic model discretize the same
time-ordered sums (left endpoints, strictly ordered second-order pairs),
so the model's predicted error and the direct evaluation of the truncated
gate agree identically up to third-order terms. The exact propagator
treats the control as piecewise constant on each step, which is the only
regime in which the gridded field defines dynamics, and multiplies exact
Hermitian exponentials, so its output is unitary to roundoff.
"""

from dataclasses import dataclass

import numpy as np

from .assembly import ControlField
from .spectral import GateMatrix, GateRole, OverlapTable, SpectralBasis, _unitarity_defect, NONUNITARY_TOL

__all__ = [
    "DysonGate",
    "PropagatorResult",
    "potential_matrix",
    "dyson_gate",
    "physical_gate",
    "exact_propagate",
    "nser",
]


@dataclass(frozen=True)
class DysonGate:
    """Truncated interaction-frame gate W(T) = I + order1 + order2.

    order1 is exactly anti-Hermitian (each rotated control matrix is
    Hermitian); the assembled gate is unitary only up to the truncation
    order.
    """

    order1: np.ndarray
    order2: np.ndarray
    assembled: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class PropagatorResult:
    """Exact piecewise-constant evolution at the horizon."""

    u_t: np.ndarray
    substeps: int
    method: str = "piecewise-eigh"


def potential_matrix(v_row: np.ndarray, gamma: OverlapTable) -> np.ndarray:
    """Level-space control matrix at one step: M[m, n] = sum_p gamma[m,n,p] V_p.

    Real symmetric, since the overlaps are symmetric in (m, n).
    """
    v_row = np.asarray(v_row, dtype=float)
    if v_row.shape != (gamma.n_modes,):
        raise ValueError(f"row length {v_row.shape} != table modes {gamma.n_modes}")
    return np.einsum("mnp,p->mn", gamma.values, v_row)


def _rotated_controls(field: ControlField, gamma: OverlapTable, basis: SpectralBasis) -> np.ndarray:
    """Interaction-frame control stack Vt[r, m, n] = M_r[m, n] exp(i (E_m - E_n) r tau)."""
    m_stack = np.einsum("mnp,pk->kmn", gamma.values, field.values)
    omega = basis.bohr_matrix
    t = field.grid.times
    return m_stack * np.exp(1j * omega[None, :, :] * t[:, None, None])


def dyson_gate(
    field: ControlField, gamma: OverlapTable, basis: SpectralBasis, epsilon: float
) -> DysonGate:
    """Evaluate the gate to second order in the control strength.

    order1 = -i eps tau sum_r Vt_r
    order2 = -eps^2 tau^2 sum_{r2 < r1} Vt_{r1} Vt_{r2}

    with Vt_r the rotated control matrices. The intermediate-level sum
    inside the product runs over the same truncated basis.
    """
    if field.grid.n_levels != basis.n_levels or gamma.n_levels != basis.n_levels:
        raise ValueError("level counts of field, table and basis disagree")
    if gamma.n_modes != field.grid.n_modes:
        raise ValueError("mode counts of field and table disagree")
    vt = _rotated_controls(field, gamma, basis)
    tau = field.grid.tau
    n = basis.n_levels
    order1 = -1j * epsilon * tau * vt.sum(axis=0)
    ordered = np.zeros((n, n), dtype=complex)
    prefix = np.zeros((n, n), dtype=complex)
    for r in range(field.grid.n_steps):
        ordered += vt[r] @ prefix
        prefix += vt[r]
    order2 = -(epsilon**2) * tau**2 * ordered
    assembled = np.eye(n, dtype=complex) + order1 + order2
    return DysonGate(order1, order2, assembled, epsilon)


def physical_gate(gate: DysonGate, basis: SpectralBasis, horizon: float) -> GateMatrix:
    """Undo the interaction frame: U(T) = exp(-i T H0) W(T)."""
    u = np.exp(-1j * basis.energies * horizon)[:, None] * gate.assembled
    return GateMatrix(u, GateRole.EVOLVED, nonunitary=_unitarity_defect(u) >= NONUNITARY_TOL)


def exact_propagate(
    field: ControlField,
    gamma: OverlapTable,
    basis: SpectralBasis,
    epsilon: float,
    substeps_per_tau: int = 1,
) -> PropagatorResult:
    """Integrate i U' = (H0 + eps V(t)) U with V piecewise constant per step.

    Each step applies the exact exponential of the Hermitian step
    Hamiltonian via eigendecomposition, so the result is unitary to
    roundoff. Substep refinement re-applies the same exponential in
    smaller slices; it changes nothing for piecewise-constant V and is
    kept as a consistency check.
    """
    if substeps_per_tau < 1:
        raise ValueError(f"substeps_per_tau must be >= 1, got {substeps_per_tau}")
    if field.grid.n_levels != basis.n_levels or gamma.n_levels != basis.n_levels:
        raise ValueError("level counts of field, table and basis disagree")
    n = basis.n_levels
    h0 = np.diag(basis.energies)
    dt = field.grid.tau / substeps_per_tau
    u = np.eye(n, dtype=complex)
    for r in range(field.grid.n_steps):
        h = h0 + epsilon * potential_matrix(field.values[:, r], gamma)
        evals, evecs = np.linalg.eigh(h)
        step = (evecs * np.exp(-1j * evals * dt)) @ evecs.conj().T
        for _ in range(substeps_per_tau):
            u = step @ u
    return PropagatorResult(u, field.grid.n_steps * substeps_per_tau)


def _as_matrix(gate) -> np.ndarray:
    if isinstance(gate, GateMatrix):
        return gate.matrix
    return np.asarray(gate, dtype=complex)


def nser(u_d, u_t) -> float:
    """Noise-to-signal energy ratio |U_d - U_T|_F^2 / |U_d|_F^2.

    For a unitary target the denominator equals its dimension.
    """
    a = _as_matrix(u_d)
    b = _as_matrix(u_t)
    if a.shape != b.shape:
        raise ValueError(f"gate shapes differ: {a.shape} vs {b.shape}")
    denom = float(np.sum(np.abs(a) ** 2))
    if denom == 0.0:
        raise ValueError("target gate is zero; ratio undefined")
    return float(np.sum(np.abs(a - b) ** 2) / denom)
