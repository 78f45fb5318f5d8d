"""Time discretization and assembly of the quadratic gate-error model.

Mode/time pairs (p, r) flatten lexicographically, j = K (p - 1) + r, so the
control amplitudes V_p(r tau) become one vector of length P K. In that
vector the second-order error model is

    error(V) = |W|_F^2 + 2 beta^T V + V^T Q V,      Q = eps^2 (C + D + D^T),

with the energy constraint V^T R V = E, R = diag(alpha_p tau). Time
integrals use the left-endpoint rectangle rule at t = r tau, r = 0..K-1,
and the integral measures (tau for the linear term, tau^2 for the
quadratic kernels) are folded into the stored arrays.

Assembly is entrywise independent; every entry is produced by one fixed
summation order, so results are bit-identical run to run.
"""

from dataclasses import dataclass

import numpy as np

from .spectral import GateMatrix, OverlapTable, SpectralBasis

__all__ = [
    "DesignGrid",
    "ControlField",
    "QuadraticProgram",
    "lex_index",
    "assemble_beta",
    "assemble_C",
    "assemble_D",
    "assemble_program",
    "predicted_error",
]


@dataclass(frozen=True)
class DesignGrid:
    """Discretization of the design problem: N levels, P modes, K steps over [0, T].

    The step tau = T / K is always derived from the stored horizon, never
    stored on its own.
    """

    n_levels: int
    n_modes: int
    n_steps: int
    horizon: float

    def __post_init__(self):
        if self.n_levels < 1:
            raise ValueError(f"n_levels must be >= 1, got {self.n_levels}")
        if self.n_modes < 1:
            raise ValueError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.n_steps < 2:
            raise ValueError(f"n_steps must be >= 2, got {self.n_steps}")
        if self.horizon <= 0:
            raise ValueError(f"horizon must be positive, got {self.horizon}")

    @property
    def tau(self) -> float:
        return self.horizon / self.n_steps

    @property
    def times(self) -> np.ndarray:
        """Left endpoints r tau, r = 0..K-1."""
        return self.tau * np.arange(self.n_steps)

    @property
    def size(self) -> int:
        return self.n_modes * self.n_steps


def lex_index(p: int, r: int, n_steps: int) -> int:
    """Flat position of mode p (1-based) at step r (0-based): K (p - 1) + r."""
    if p < 1:
        raise ValueError(f"mode index must be >= 1, got {p}")
    if not 0 <= r < n_steps:
        raise ValueError(f"step index must be in [0, {n_steps - 1}], got {r}")
    return n_steps * (p - 1) + r


@dataclass(frozen=True)
class ControlField:
    """Sine-mode amplitudes on the time grid: values[p-1, r] = V_p(r tau)."""

    grid: DesignGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expect = (self.grid.n_modes, self.grid.n_steps)
        if vals.shape != expect:
            raise ValueError(f"values shape {vals.shape} != (P, K) = {expect}")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def flat(self) -> np.ndarray:
        """Lexicographic vector view; row-major order matches lex_index."""
        return self.values.reshape(-1)

    @classmethod
    def from_flat(cls, grid: DesignGrid, vec: np.ndarray) -> "ControlField":
        vec = np.asarray(vec, dtype=float)
        if vec.shape != (grid.size,):
            raise ValueError(f"flat vector length {vec.shape} != P*K = {grid.size}")
        return cls(grid, vec.reshape(grid.n_modes, grid.n_steps))

    def energy(self, alpha: np.ndarray) -> float:
        """Discretized control energy tau sum_p alpha_p sum_r V_p(r tau)^2."""
        alpha = np.asarray(alpha, dtype=float)
        if alpha.shape != (self.grid.n_modes,):
            raise ValueError(f"alpha length {alpha.shape} != P = {self.grid.n_modes}")
        return float(self.grid.tau * np.sum(alpha[:, None] * self.values**2))


def _check_dims(gamma: OverlapTable, basis: SpectralBasis, grid: DesignGrid):
    if gamma.n_levels != basis.n_levels or grid.n_levels != basis.n_levels:
        raise ValueError("level counts of table, basis and grid disagree")
    if gamma.n_modes != grid.n_modes:
        raise ValueError(f"table modes {gamma.n_modes} != grid modes {grid.n_modes}")


def assemble_beta(
    w_d: GateMatrix, gamma: OverlapTable, basis: SpectralBasis, grid: DesignGrid
) -> np.ndarray:
    """Linear response vector of the error expansion, in the x4 normalization.

    beta[lex(p, r)] = 4 tau sum_{m,n} gamma[m,n,p] Im(W[m,n] exp(i (E_n - E_m) r tau)).

    assemble_program rescales this by eps / 4 before storing it, so that the
    stationarity system solved downstream is exactly the first-order
    condition of the error model; see assemble_program.
    """
    _check_dims(gamma, basis, grid)
    if w_d.dim != basis.n_levels:
        raise ValueError(f"residual dim {w_d.dim} != basis levels {basis.n_levels}")
    omega = basis.bohr_matrix
    t = grid.times
    # phases[r, m, n] = exp(i omega[n, m] r tau)
    phases = np.exp(1j * omega.T[None, :, :] * t[:, None, None])
    im_part = (w_d.matrix[None, :, :] * phases).imag
    beta = 4.0 * grid.tau * np.einsum("mnp,rmn->pr", gamma.values, im_part)
    return beta.reshape(-1)


def assemble_C(gamma: OverlapTable, basis: SpectralBasis, grid: DesignGrid) -> np.ndarray:
    """Gram kernel of the first-order response (target-independent).

    C[lex(p, r1), lex(q, r2)] = tau^2 sum_{m,n} gamma[m,n,p] gamma[m,n,q]
                                cos(omega[m,n] (r1 - r2) tau)

    Symmetric and positive semidefinite.
    """
    _check_dims(gamma, basis, grid)
    omega = basis.bohr_matrix
    dt = grid.times[:, None] - grid.times[None, :]
    cos_kernel = np.cos(omega[:, :, None, None] * dt[None, None, :, :])
    c4 = np.einsum("mnp,mnq,mnxy->pxqy", gamma.values, gamma.values, cos_kernel, optimize=True)
    c = grid.tau**2 * c4.reshape(grid.size, grid.size)
    return 0.5 * (c + c.T)


def assemble_D(
    w_d: GateMatrix, gamma: OverlapTable, basis: SpectralBasis, grid: DesignGrid
) -> np.ndarray:
    """Time-ordered second-order kernel against the target residual.

    For r2 < r1 (zero on and above the diagonal blocks),

      D[lex(a, r1), lex(b, r2)] = tau^2 Re sum_{m,n,p} W[m,n]
          gamma[m,p,a] gamma[p,n,b] exp(i ((E_p - E_m) r1 + (E_n - E_p) r2) tau).

    Mode a rides the later-time factor <m|V|p> and mode b the earlier
    <p|V|n>, matching the operator order of the second-order propagator
    term, so that V^T (D + D^T) V reproduces it exactly.
    """
    _check_dims(gamma, basis, grid)
    if w_d.dim != basis.n_levels:
        raise ValueError(f"residual dim {w_d.dim} != basis levels {basis.n_levels}")
    omega = basis.bohr_matrix
    t = grid.times
    k = grid.n_steps
    # phase[x, a, b] = exp(i omega[a, b] x tau), reused for both time factors
    phase = np.exp(1j * omega[None, :, :] * t[:, None, None])
    t1 = np.einsum("mn,xpm,mpa->axpn", w_d.matrix, phase, gamma.values, optimize=True)
    d4 = np.einsum("axpn,ynp,npb->axby", t1, phase, gamma.values, optimize=True).real
    ordered = np.tril(np.ones((k, k), dtype=bool), -1)  # r2 strictly before r1
    d4 *= ordered[None, :, None, :]
    return grid.tau**2 * d4.reshape(grid.size, grid.size)


@dataclass(frozen=True)
class QuadraticProgram:
    """Energy-constrained quadratic model: stationary points solve
    Q V + beta + lambda R V = 0 on the shell V^T R V = budget.

    q is symmetric (P K x P K); r holds the positive diagonal of R.
    """

    q: np.ndarray
    r: np.ndarray
    beta: np.ndarray
    budget: float

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        r = np.asarray(self.r, dtype=float)
        beta = np.asarray(self.beta, dtype=float)
        n = beta.size
        if q.shape != (n, n) or r.shape != (n,):
            raise ValueError("inconsistent program dimensions")
        if not np.array_equal(q, q.T):
            raise ValueError("Q must be exactly symmetric")
        if not (np.all(np.isfinite(q)) and np.all(np.isfinite(r)) and np.all(np.isfinite(beta))):
            raise ValueError("program entries must be finite")
        if np.any(r <= 0):
            raise ValueError("R diagonal must be positive")
        if self.budget <= 0:
            raise ValueError(f"budget must be positive, got {self.budget}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "beta", beta)

    @property
    def size(self) -> int:
        return self.beta.size


def assemble_program(
    beta: np.ndarray,
    c_mat: np.ndarray,
    d_mat: np.ndarray,
    alpha: np.ndarray,
    grid: DesignGrid,
    budget: float,
    epsilon: float,
) -> QuadraticProgram:
    """Combine the assembled pieces into the constrained quadratic program.

    Q = eps^2 (C + D + D^T), so V^T Q V reproduces both second-order error
    terms for every V. The stored linear coefficient is (eps / 4) beta,
    i.e. eps tau sum gamma Im(...): with that scaling the stationarity
    system Q V + beta + lambda R V = 0 is the exact first-order condition
    of the model |W|^2 + 2 beta^T V + V^T Q V that predicted_error
    evaluates. R = diag(alpha_p tau).
    """
    alpha = np.asarray(alpha, dtype=float)
    if alpha.shape != (grid.n_modes,):
        raise ValueError(f"alpha length {alpha.shape} != P = {grid.n_modes}")
    if np.any(alpha <= 0):
        raise ValueError("alpha weights must be positive")
    c_mat = np.asarray(c_mat, dtype=float)
    if not np.array_equal(c_mat, c_mat.T):
        raise ValueError("C must be symmetric")
    d_mat = np.asarray(d_mat, dtype=float)
    q = epsilon**2 * (c_mat + d_mat + d_mat.T)
    r_diag = np.repeat(alpha * grid.tau, grid.n_steps)
    return QuadraticProgram(q, r_diag, (epsilon / 4.0) * np.asarray(beta, float), float(budget))


def predicted_error(program: QuadraticProgram, const_term: float, v: np.ndarray) -> float:
    """Second-order model of the gate error energy at control vector v.

    Returns const + 2 beta^T v + v^T Q v. This is a truncated model, not a
    norm: it can go negative for large controls, and the exact propagator
    is the arbiter of the true error.
    """
    v = np.asarray(v, dtype=float)
    if v.shape != (program.size,):
        raise ValueError(f"vector length {v.shape} != program size {program.size}")
    return float(const_term + 2.0 * (program.beta @ v) + v @ (program.q @ v))
