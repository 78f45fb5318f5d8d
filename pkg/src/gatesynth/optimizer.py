"""Energy-constrained minimization of the quadratic error model.

Solves the stationarity system

    Q V + beta + lambda R V = 0,        V^T R V = E,

by eliminating V at fixed lambda, V(lambda) = -(Q + lambda R)^{-1} beta,
and driving the scalar energy mismatch to zero with a safeguarded Newton
update on lambda. The pair of conditions is the first-order system for
minimizing V^T Q V + 2 beta^T V on the energy shell; the branch with
Q + lambda R positive semidefinite (the unique root above the smallest
admissible multiplier) is its global constrained minimizer.

After a whitening transform x = R^(1/2) V the problem is diagonal in the
eigenbasis of R^(-1/2) Q R^(-1/2), so each lambda trial costs O(n) and the
single dense eigendecomposition dominates.
"""

from dataclasses import dataclass, field

import numpy as np

from .assembly import QuadraticProgram

__all__ = ["SolverConfig", "SolverResult", "solve_fixed_point", "objective", "kkt_residuals"]


@dataclass(frozen=True)
class SolverConfig:
    """Iteration controls for solve_fixed_point."""

    lambda0: float = 0.0
    max_iters: int = 200
    tol_v: float = 1e-10
    tol_constraint: float = 1e-8

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if self.tol_v <= 0 or self.tol_constraint <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class SolverResult:
    """Outcome of the constrained solve.

    trace holds one (lambda, constraint residual, objective) tuple per
    iteration. status is "converged", "degenerate-target" (beta = 0, any
    on-shell V is stationary in the linear term) or "max-iterations".
    """

    v_opt: np.ndarray
    lambda_opt: float
    iterations: int
    converged: bool
    status: str
    regularized: bool = False
    trace: list = field(default_factory=list)


def objective(program: QuadraticProgram, v: np.ndarray, lam: float) -> float:
    """Lagrangian value V^T Q V + beta^T V + lambda (V^T R V - E)."""
    v = np.asarray(v, dtype=float)
    rv = program.r * v
    return float(v @ (program.q @ v) + program.beta @ v + lam * (v @ rv - program.budget))


def kkt_residuals(program: QuadraticProgram, v: np.ndarray, lam: float) -> tuple[float, float]:
    """Stationarity norm |Q V + beta + lambda R V|_2 and energy mismatch V^T R V - E."""
    v = np.asarray(v, dtype=float)
    grad = program.q @ v + program.beta + lam * (program.r * v)
    return float(np.linalg.norm(grad)), float(v @ (program.r * v) - program.budget)


def solve_fixed_point(program: QuadraticProgram, config: SolverConfig | None = None) -> SolverResult:
    """Iterate V(lambda) = -(Q + lambda R)^{-1} beta to the energy shell.

    Convergence requires both the relative change of V and the relative
    constraint residual |V^T R V - E| / E to fall below the configured
    tolerances. On a numerically singular Q + lambda R the spectrum is
    shifted by 1e-10 |Q| and the result is flagged regularized. A zero
    linear coefficient returns V = 0 unconverged with status
    "degenerate-target". Non-convergence returns the best iterate seen.
    """
    cfg = config if config is not None else SolverConfig()
    n = program.size
    e_budget = program.budget
    # A linear coefficient at roundoff scale relative to the quadratic term on
    # the shell cannot steer the solution: every shell point is equally
    # stationary in it. Report that explicitly instead of optimizing noise.
    beta_scale = np.linalg.norm(program.q) * np.sqrt(e_budget / np.min(program.r))
    if np.linalg.norm(program.beta) <= 1e-13 * beta_scale:
        return SolverResult(np.zeros(n), cfg.lambda0, 0, False, "degenerate-target")

    # Whiten: x = R^(1/2) V, Qt = R^(-1/2) Q R^(-1/2). Constraint becomes |x|^2 = E.
    s = np.sqrt(program.r)
    qt = program.q / np.outer(s, s)
    qt = 0.5 * (qt + qt.T)
    evals, evecs = np.linalg.eigh(qt)
    b = evecs.T @ (program.beta / s)

    q_norm = float(np.max(np.abs(evals)))
    reg = 1e-10 * q_norm if q_norm > 0 else 1e-30
    lam_floor = -evals[0]
    regularized = False

    def eval_at(lam):
        nonlocal regularized
        denom = evals + lam
        if np.min(np.abs(denom)) < reg:
            denom = denom + reg
            regularized = True
        x = -b / denom
        return x, float(x @ x), denom

    def to_v(x):
        return (evecs @ x) / s

    # Hard case: no linear weight on the minimal eigenspace and the limit
    # point inside the shell. Pad with a minimal eigenvector to reach it.
    minimal = evals <= evals[0] + 1e-12 * max(q_norm, 1.0)
    if np.all(np.abs(b[minimal]) <= 1e-14 * max(float(np.linalg.norm(b)), 1.0)):
        gap = np.where(minimal, 1.0, evals - evals[0])
        x0 = np.where(minimal, 0.0, -b / gap)
        c0 = float(x0 @ x0)
        if c0 < e_budget:
            x0[np.argmax(minimal)] = np.sqrt(e_budget - c0)
            v = to_v(x0)
            lam = lam_floor
            trace = [(lam, 0.0, objective(program, v, lam))]
            return SolverResult(v, lam, 1, True, "converged", regularized, trace)

    delta0 = max(1e-8 * max(1.0, abs(lam_floor)), 1e-12)
    lam = cfg.lambda0 if cfg.lambda0 > lam_floor + delta0 else lam_floor + delta0
    lo, hi = lam_floor, None
    prev_v = None
    best = None
    trace = []

    for k in range(1, cfg.max_iters + 1):
        x, c, denom = eval_at(lam)
        v = to_v(x)
        resid = c - e_budget
        trace.append((lam, resid, objective(program, v, lam)))
        if best is None or abs(resid) < best[2]:
            best = (v, lam, abs(resid))

        ok_constraint = abs(resid) <= cfg.tol_constraint * e_budget
        ok_v = prev_v is not None and float(np.linalg.norm(v - prev_v)) <= cfg.tol_v * max(
            float(np.linalg.norm(v)), 1e-300
        )
        if ok_constraint and ok_v:
            return SolverResult(v, lam, k, True, "converged", regularized, trace)
        prev_v = v

        # Shrink the bracket: x(lambda) norm decreases to the right of the floor.
        # A zero residual means lam is the root; leave the bracket alone so the
        # safeguard below cannot push the iterate off it.
        if resid > 0:
            lo = max(lo, lam)
        elif resid < 0:
            hi = lam if hi is None else min(hi, lam)

        # Newton step on 1/|x| - 1/sqrt(E), monotone on this branch.
        slope = float(np.sum(x * x / denom))
        if c > 0 and slope > 0:
            psi = 1.0 / np.sqrt(c) - 1.0 / np.sqrt(e_budget)
            lam_new = lam - psi * c**1.5 / slope
        else:
            lam_new = lam + max(1.0, abs(lam))
        if hi is not None and not (lo < lam_new < hi):
            lam_new = 0.5 * (lo + hi)
        elif hi is None and lam_new <= lo:
            lam_new = lam + max(1.0, abs(lam))
        if k > 20:
            lam_new = 0.5 * (lam + lam_new)  # damp late iterations against oscillation
        lam = lam_new

    v, lam, _ = best
    return SolverResult(v, lam, cfg.max_iters, False, "max-iterations", regularized, trace)
