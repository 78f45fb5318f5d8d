"""Spectral data for a charged particle in a unit box, and gate targets.

Natural units throughout (hbar = m = 1, box length 1): the stationary
states are sqrt(2) sin(n pi x) with energies E_n = n^2 pi^2 / 2. All
functions here are pure; tables and gate matrices are immutable after
construction and safe to share across threads.
"""

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "GateRole",
    "GateMatrix",
    "SpectralBasis",
    "OverlapTable",
    "energy",
    "bohr_frequency",
    "make_basis",
    "gamma_closed",
    "gamma_quadrature",
    "build_overlap_table",
    "dft_gate",
    "gate_from_kernel",
    "target_residual",
    "partial_trace_23",
]

# A constructed gate whose unitarity defect exceeds this is tagged nonunitary.
NONUNITARY_TOL = 1e-6


def energy(n: int) -> float:
    """Energy E_n = n^2 pi^2 / 2 of box level n (n >= 1)."""
    if n < 1:
        raise ValueError(f"level index must be >= 1, got {n}")
    return 0.5 * (n * np.pi) ** 2


def bohr_frequency(n: int, m: int) -> float:
    """Transition frequency omega[n, m] = E_n - E_m = (n^2 - m^2) pi^2 / 2."""
    if n < 1 or m < 1:
        raise ValueError(f"level indices must be >= 1, got ({n}, {m})")
    return 0.5 * (n * n - m * m) * np.pi**2


@dataclass(frozen=True)
class SpectralBasis:
    """Truncated box eigenbasis: levels 1..n_levels with E_n = n^2 pi^2 / 2."""

    n_levels: int
    energies: np.ndarray

    @property
    def bohr_matrix(self) -> np.ndarray:
        """omega[a, b] = E_(a+1) - E_(b+1), 0-based array over 1-based levels."""
        e = self.energies
        return e[:, None] - e[None, :]


def make_basis(n_levels: int) -> SpectralBasis:
    if n_levels < 1:
        raise ValueError(f"n_levels must be >= 1, got {n_levels}")
    levels = np.arange(1, n_levels + 1, dtype=float)
    energies = 0.5 * (levels * np.pi) ** 2
    energies.setflags(write=False)
    return SpectralBasis(n_levels, energies)


def _sine_line_integral(d):
    """pi times the integral of sin(d pi x) over [0, 1]: (1 - (-1)^d) / d.

    Vanishes for even d; the d = 0 case is even, so the 0/0 resolves to 0.
    Works elementwise on integer arrays.
    """
    d = np.asarray(d)
    odd = d % 2 != 0
    safe = np.where(odd, d, 1)
    return np.where(odd, 2.0 / safe, 0.0)


def gamma_closed(m: int, n: int, p: int) -> float:
    """Exact triple-sine overlap 2 * int_0^1 sin(m pi x) sin(n pi x) sin(p pi x) dx.

    Product-to-sum reduction gives four line integrals,

        (1 / 2 pi) [t(p+m-n) + t(p-m+n) - t(p+m+n) - t(p-m-n)],
        t(d) = (1 - (-1)^d) / d,  t(even) = 0.

    The result is symmetric under any permutation of (m, n, p) and is
    exactly zero whenever m + n + p is even. The indices are put in sorted
    order before evaluation so all six permutations return bit-identical
    floats.
    """
    if m < 1 or n < 1 or p < 1:
        raise ValueError(f"mode indices must be >= 1, got ({m}, {n}, {p})")
    m, n, p = sorted((m, n, p))
    t = _sine_line_integral
    total = t(p + m - n) + t(p - m + n) - t(p + m + n) - t(p - m - n)
    return float(total / (2.0 * np.pi))


def gamma_quadrature(m: int, n: int, p: int, grid_points: int) -> float:
    """Riemann-sum estimate of the triple-sine overlap on the grid r / M.

    (2 / M) sum_{r=0}^{M-1} sin(m pi r / M) sin(n pi r / M) sin(p pi r / M).
    Retained as a cross-check for gamma_closed; the closed form is the
    production path.
    """
    if m < 1 or n < 1 or p < 1:
        raise ValueError(f"mode indices must be >= 1, got ({m}, {n}, {p})")
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    x = np.pi * np.arange(grid_points) / grid_points
    return float(2.0 / grid_points * np.sum(np.sin(m * x) * np.sin(n * x) * np.sin(p * x)))


@dataclass(frozen=True)
class OverlapTable:
    """Triple-sine overlaps gamma[m, n, p] for levels m, n <= N and modes p <= P.

    values[m-1, n-1, p-1] holds gamma(m, n, p); the array is read-only.
    """

    n_levels: int
    n_modes: int
    values: np.ndarray

    def value(self, m: int, n: int, p: int) -> float:
        return float(self.values[m - 1, n - 1, p - 1])


def build_overlap_table(n_levels: int, n_modes: int) -> OverlapTable:
    """Tabulate gamma_closed over all (level, level, mode) triples."""
    if n_levels < 1 or n_modes < 1:
        raise ValueError("n_levels and n_modes must be >= 1")
    grids = np.broadcast_arrays(
        np.arange(1, n_levels + 1)[:, None, None],
        np.arange(1, n_levels + 1)[None, :, None],
        np.arange(1, n_modes + 1)[None, None, :],
    )
    # sorted evaluation order, as in gamma_closed, for bitwise symmetry
    m, n, p = np.sort(np.stack(grids), axis=0)
    t = _sine_line_integral
    vals = (t(p + m - n) + t(p - m + n) - t(p + m + n) - t(p - m - n)) / (2.0 * np.pi)
    vals.setflags(write=False)
    return OverlapTable(n_levels, n_modes, vals)


class GateRole(enum.Enum):
    TARGET = "target"
    RESIDUAL = "residual"
    EVOLVED = "evolved"


def _unitarity_defect(matrix: np.ndarray) -> float:
    dim = matrix.shape[0]
    return float(np.linalg.norm(matrix.conj().T @ matrix - np.eye(dim)))


@dataclass(frozen=True)
class GateMatrix:
    """A complex square matrix tagged with its role in the synthesis pipeline.

    Target gates built from non-unitary data (kernel quadrature, reduced
    3-D targets) carry nonunitary=True instead of failing construction.
    """

    matrix: np.ndarray
    role: GateRole
    nonunitary: bool = False

    def __post_init__(self):
        mat = np.array(self.matrix, dtype=complex)
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise ValueError(f"gate matrix must be square, got shape {mat.shape}")
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def unitarity_defect(self) -> float:
        """Frobenius norm of U^H U - I."""
        return _unitarity_defect(self.matrix)


def dft_gate(n_levels: int) -> GateMatrix:
    """Discrete Fourier transform gate U[m, n] = exp(2 pi i (m-1)(n-1) / N) / sqrt(N)."""
    if n_levels < 1:
        raise ValueError(f"n_levels must be >= 1, got {n_levels}")
    idx = np.arange(n_levels)
    u = np.exp(2j * np.pi * np.outer(idx, idx) / n_levels) / np.sqrt(n_levels)
    if _unitarity_defect(u) >= 1e-12:
        raise ArithmeticError("DFT construction failed its unitarity check")
    return GateMatrix(u, GateRole.TARGET)


def gate_from_kernel(kernel: Callable, n_levels: int, grid_points: int) -> GateMatrix:
    """Project a two-point kernel onto sine modes by double Riemann sum.

    U[m, n] = (1 / M^2) sum_{r,s=0}^{M-1} kernel(r/M, s/M) sin(m pi r/M) sin(n pi s/M).

    Note the discrete prefactor is 1 / M^2 with no factor 2, so the M -> inf
    limit is the plain double integral, half the orthonormal-mode coefficient
    of the kernel. The kernel must broadcast over numpy grids. Gates built
    this way are generally not unitary and are flagged accordingly.
    """
    if n_levels < 1:
        raise ValueError(f"n_levels must be >= 1, got {n_levels}")
    if grid_points < 2:
        raise ValueError(f"grid_points must be >= 2, got {grid_points}")
    x = np.arange(grid_points) / grid_points
    modes = np.arange(1, n_levels + 1)
    s = np.sin(np.pi * np.outer(modes, x))  # (N, M)
    k = np.asarray(kernel(x[:, None], x[None, :]), dtype=complex)
    k = np.broadcast_to(k, (grid_points, grid_points))
    u = s @ k @ s.T / grid_points**2
    return GateMatrix(u, GateRole.TARGET, nonunitary=_unitarity_defect(u) >= NONUNITARY_TOL)


def target_residual(target: GateMatrix, basis: SpectralBasis, horizon: float) -> GateMatrix:
    """Interaction-frame discrepancy W[m, n] = exp(i E_m T) U[m, n] - delta[m, n].

    Zero exactly when the target equals the free evolution diag(exp(-i E_m T)).
    """
    if target.dim != basis.n_levels:
        raise ValueError(f"target dim {target.dim} != basis levels {basis.n_levels}")
    if horizon <= 0:
        raise ValueError(f"horizon must be positive, got {horizon}")
    phases = np.exp(1j * basis.energies * horizon)
    w = phases[:, None] * target.matrix - np.eye(basis.n_levels)
    return GateMatrix(w, GateRole.RESIDUAL)


def partial_trace_23(gate: GateMatrix, n_levels: int) -> GateMatrix:
    """Trace out the second and third tensor factors of an N^3-dimensional gate.

    Indices are flattened lexicographically with the first factor slowest, so
    A[n, n'] = sum_{m,p} W[(n,m,p), (n',m,p)]. Reduces a 3-D box design target
    to the effective 1-D target; for W = A (x) I (x) I this returns N^2 A.
    """
    if gate.dim != n_levels**3:
        raise ValueError(f"gate dim {gate.dim} is not n_levels^3 = {n_levels**3}")
    w = gate.matrix.reshape((n_levels,) * 6)
    a = np.einsum("abcdbc->ad", w)
    return GateMatrix(a, GateRole.TARGET, nonunitary=_unitarity_defect(a) >= NONUNITARY_TOL)
