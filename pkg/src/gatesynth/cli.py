"""End-to-end synthesis runs, horizon sweeps, and CSV emission.

Configuration comes from an optional key = value file overridden by
command-line flags. All numeric output is written with 17 significant
digits so files round-trip float64 exactly and identical configs produce
byte-identical output.

Exit codes: 0 success, 2 solver non-convergence, 3 degenerate target,
4 configuration error.
"""

import argparse
import dataclasses
import sys
from dataclasses import dataclass

import numpy as np

from .assembly import (
    ControlField,
    DesignGrid,
    assemble_C,
    assemble_D,
    assemble_beta,
    assemble_program,
    predicted_error,
)
from .optimizer import SolverConfig, solve_fixed_point
from .propagation import dyson_gate, exact_propagate, nser, physical_gate
from .spectral import GateMatrix, GateRole, _unitarity_defect, NONUNITARY_TOL
from .spectral import build_overlap_table, dft_gate, make_basis, target_residual

__all__ = [
    "ConfigError",
    "RunConfig",
    "SweepConfig",
    "SynthesisReport",
    "run_synthesis",
    "run_sweep",
    "format_sweep_csv",
    "format_potential_csv",
    "format_matrix_target",
    "read_matrix_target",
    "main",
]

DEFAULT_HORIZON = 20.0 / np.pi**2  # ten periods of the ground-state phase
DEFAULT_BUDGET = np.pi**2 / 10.0  # one fifth of the ground-state energy

EXIT_OK = 0
EXIT_NOT_CONVERGED = 2
EXIT_DEGENERATE = 3
EXIT_CONFIG = 4


class ConfigError(ValueError):
    """Invalid configuration input (bad value, unknown key, unreadable file)."""


@dataclass(frozen=True)
class RunConfig:
    """Full description of one synthesis run.

    n_modes defaults to n_levels and alpha to uniform weights. target is
    "dft" or "file" (with target_file set). quad_points is the grid used
    when a target is built by kernel quadrature.
    """

    n_levels: int = 2
    n_modes: int | None = None
    n_steps: int = 50
    horizon: float = DEFAULT_HORIZON
    energy_budget: float = DEFAULT_BUDGET
    epsilon: float = 1.0
    alpha: np.ndarray | None = None
    target: str = "dft"
    target_file: str | None = None
    quad_points: int = 100
    solver: SolverConfig = SolverConfig()

    def __post_init__(self):
        if self.n_levels < 1:
            raise ConfigError(f"n_levels must be >= 1, got {self.n_levels}")
        if self.n_modes is None:
            object.__setattr__(self, "n_modes", self.n_levels)
        if self.n_modes < 1:
            raise ConfigError(f"n_modes must be >= 1, got {self.n_modes}")
        if self.n_steps < 2:
            raise ConfigError(f"n_steps must be >= 2, got {self.n_steps}")
        if self.horizon <= 0:
            raise ConfigError(f"horizon must be positive, got {self.horizon}")
        if self.energy_budget <= 0:
            raise ConfigError(f"energy budget must be positive, got {self.energy_budget}")
        if self.epsilon <= 0:
            raise ConfigError(f"epsilon must be positive, got {self.epsilon}")
        if self.quad_points < 2:
            raise ConfigError(f"quad_points must be >= 2, got {self.quad_points}")
        if self.alpha is None:
            object.__setattr__(self, "alpha", np.ones(self.n_modes))
        alpha = np.asarray(self.alpha, dtype=float)
        if alpha.shape != (self.n_modes,):
            raise ConfigError(f"alpha needs {self.n_modes} weights, got {alpha.shape}")
        if np.any(alpha <= 0):
            raise ConfigError("alpha weights must be positive")
        alpha.setflags(write=False)
        object.__setattr__(self, "alpha", alpha)
        if self.target not in ("dft", "file"):
            raise ConfigError(f"target must be 'dft' or 'file', got {self.target!r}")
        if self.target == "file" and not self.target_file:
            raise ConfigError("target 'file' requires target_file")


@dataclass(frozen=True)
class SweepConfig:
    """Uniform horizon sweep: one synthesis run per T in [t_min, t_max]."""

    run: RunConfig
    t_min: float
    t_max: float
    points: int

    def __post_init__(self):
        if self.t_min <= 0:
            raise ConfigError(f"t_min must be positive, got {self.t_min}")
        if self.t_max <= self.t_min:
            raise ConfigError(f"t_max must exceed t_min, got [{self.t_min}, {self.t_max}]")
        if self.points < 2:
            raise ConfigError(f"points must be >= 2, got {self.points}")


@dataclass(eq=False)
class SynthesisReport:
    """Everything a run produced, serializable to a key,value CSV."""

    n_levels: int
    n_modes: int
    n_steps: int
    horizon: float
    energy_budget: float
    epsilon: float
    target: str
    alpha: np.ndarray
    residual_norm_sq: float
    predicted_error_opt: float
    verified_nser_opt: float
    verified_nser_zero: float
    constraint_residual: float
    lambda_opt: float
    iterations: int
    converged: bool
    status: str
    regularized: bool
    potential: np.ndarray
    trace_lambda: np.ndarray
    trace_constraint: np.ndarray
    trace_objective: np.ndarray

    def exit_code(self) -> int:
        if self.status == "degenerate-target":
            return EXIT_DEGENERATE
        if not self.converged:
            return EXIT_NOT_CONVERGED
        return EXIT_OK

    def to_csv_text(self) -> str:
        lines = ["key,value"]
        for name, kind in _REPORT_FIELDS:
            val = getattr(self, name)
            if kind == "float":
                text = _fmt(val)
            elif kind == "int":
                text = str(int(val))
            elif kind == "bool":
                text = str(int(bool(val)))
            elif kind == "str":
                text = str(val)
            else:  # float array
                text = ";".join(_fmt(x) for x in np.asarray(val, dtype=float).reshape(-1))
            lines.append(f"{name},{text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv_text(cls, text: str) -> "SynthesisReport":
        rows = {}
        for line in text.splitlines():
            if not line or line == "key,value":
                continue
            name, _, value = line.partition(",")
            rows[name] = value
        kwargs = {}
        for name, kind in _REPORT_FIELDS:
            if name not in rows:
                raise ValueError(f"report is missing field {name!r}")
            raw = rows[name]
            if kind == "float":
                kwargs[name] = float(raw)
            elif kind == "int":
                kwargs[name] = int(raw)
            elif kind == "bool":
                kwargs[name] = bool(int(raw))
            elif kind == "str":
                kwargs[name] = raw
            else:
                kwargs[name] = np.array(
                    [float(x) for x in raw.split(";")] if raw else [], dtype=float
                )
        kwargs["potential"] = kwargs["potential"].reshape(kwargs["n_modes"], kwargs["n_steps"])
        return cls(**kwargs)

    def save(self, path: str):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv_text())

    @classmethod
    def load(cls, path: str) -> "SynthesisReport":
        with open(path, "r") as fh:
            return cls.from_csv_text(fh.read())


_REPORT_FIELDS = [
    ("n_levels", "int"),
    ("n_modes", "int"),
    ("n_steps", "int"),
    ("horizon", "float"),
    ("energy_budget", "float"),
    ("epsilon", "float"),
    ("target", "str"),
    ("alpha", "array"),
    ("residual_norm_sq", "float"),
    ("predicted_error_opt", "float"),
    ("verified_nser_opt", "float"),
    ("verified_nser_zero", "float"),
    ("constraint_residual", "float"),
    ("lambda_opt", "float"),
    ("iterations", "int"),
    ("converged", "bool"),
    ("status", "str"),
    ("regularized", "bool"),
    ("potential", "array"),
    ("trace_lambda", "array"),
    ("trace_constraint", "array"),
    ("trace_objective", "array"),
]


def _fmt(x) -> str:
    return "%.17g" % float(x)


def format_matrix_target(matrix: np.ndarray) -> str:
    """Serialize a complex square matrix: first line N, then N rows of re+imi entries."""
    matrix = np.asarray(matrix, dtype=complex)
    n = matrix.shape[0]
    lines = [str(n)]
    for row in matrix:
        lines.append(" ".join("%.17g%+.17gi" % (z.real, z.imag) for z in row))
    return "\n".join(lines) + "\n"


def read_matrix_target(path: str) -> GateMatrix:
    """Parse a plain-text complex matrix target (see format_matrix_target)."""
    try:
        with open(path, "r") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError as exc:
        raise ConfigError(f"cannot read target file {path}: {exc}") from exc
    if not lines:
        raise ConfigError(f"target file {path} is empty")
    try:
        n = int(lines[0])
    except ValueError as exc:
        raise ConfigError(f"target file {path}: first line must be the dimension") from exc
    if n < 1 or len(lines) != n + 1:
        raise ConfigError(f"target file {path}: expected {n} matrix rows")
    rows = []
    for line in lines[1:]:
        tokens = line.split()
        if len(tokens) != n:
            raise ConfigError(f"target file {path}: expected {n} entries per row")
        try:
            rows.append([complex(tok.replace("i", "j")) for tok in tokens])
        except ValueError as exc:
            raise ConfigError(f"target file {path}: bad complex entry in {line!r}") from exc
    mat = np.array(rows, dtype=complex)
    return GateMatrix(mat, GateRole.TARGET, nonunitary=_unitarity_defect(mat) >= NONUNITARY_TOL)


def _load_target(config: RunConfig) -> GateMatrix:
    if config.target == "dft":
        return dft_gate(config.n_levels)
    gate = read_matrix_target(config.target_file)
    if gate.dim != config.n_levels:
        raise ConfigError(
            f"target matrix is {gate.dim}x{gate.dim} but n_levels is {config.n_levels}"
        )
    return gate


def run_synthesis(config: RunConfig) -> SynthesisReport:
    """Build the model, solve for the control, and verify against the exact propagator.

    Deterministic for a fixed config. The verified figures come from the
    piecewise-exact propagator, not from the quadratic model.
    """
    basis = make_basis(config.n_levels)
    gamma = build_overlap_table(config.n_levels, config.n_modes)
    grid = DesignGrid(config.n_levels, config.n_modes, config.n_steps, config.horizon)
    target = _load_target(config)
    w_d = target_residual(target, basis, config.horizon)
    const_term = float(np.sum(np.abs(w_d.matrix) ** 2))

    beta = assemble_beta(w_d, gamma, basis, grid)
    c_mat = assemble_C(gamma, basis, grid)
    d_mat = assemble_D(w_d, gamma, basis, grid)
    program = assemble_program(
        beta, c_mat, d_mat, config.alpha, grid, config.energy_budget, config.epsilon
    )
    result = solve_fixed_point(program, config.solver)

    field = ControlField.from_flat(grid, result.v_opt)
    zero_field = ControlField(grid, np.zeros((config.n_modes, config.n_steps)))
    u_opt = exact_propagate(field, gamma, basis, config.epsilon).u_t
    u_zero = exact_propagate(zero_field, gamma, basis, config.epsilon).u_t

    trace = np.array(result.trace, dtype=float).reshape(-1, 3)
    return SynthesisReport(
        n_levels=config.n_levels,
        n_modes=config.n_modes,
        n_steps=config.n_steps,
        horizon=config.horizon,
        energy_budget=config.energy_budget,
        epsilon=config.epsilon,
        target=config.target if config.target == "dft" else config.target_file,
        alpha=np.asarray(config.alpha, dtype=float),
        residual_norm_sq=const_term,
        predicted_error_opt=predicted_error(program, const_term, result.v_opt),
        verified_nser_opt=nser(target, u_opt),
        verified_nser_zero=nser(target, u_zero),
        constraint_residual=float(result.v_opt @ (program.r * result.v_opt) - program.budget),
        lambda_opt=result.lambda_opt,
        iterations=result.iterations,
        converged=result.converged,
        status=result.status,
        regularized=result.regularized,
        potential=field.values,
        trace_lambda=trace[:, 0].copy(),
        trace_constraint=trace[:, 1].copy(),
        trace_objective=trace[:, 2].copy(),
    )


def run_sweep(config: SweepConfig) -> list[SynthesisReport]:
    """One synthesis per horizon on a uniform grid; reports ordered by T.

    A failed point (degenerate target, non-convergence) still yields its
    report row and the sweep continues.
    """
    horizons = np.linspace(config.t_min, config.t_max, config.points)
    return [run_synthesis(dataclasses.replace(config.run, horizon=float(t))) for t in horizons]


SWEEP_HEADER = "t,predicted_error,verified_nser_opt,verified_nser_zero,lambda,iterations,converged"


def format_sweep_csv(reports: list[SynthesisReport]) -> str:
    lines = [SWEEP_HEADER]
    for rep in reports:
        lines.append(
            ",".join(
                [
                    _fmt(rep.horizon),
                    _fmt(rep.predicted_error_opt),
                    _fmt(rep.verified_nser_opt),
                    _fmt(rep.verified_nser_zero),
                    _fmt(rep.lambda_opt),
                    str(rep.iterations),
                    str(int(rep.converged)),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def format_potential_csv(report: SynthesisReport) -> str:
    """P rows of K comma-separated amplitudes V_p(r tau)."""
    return "\n".join(",".join(_fmt(v) for v in row) for row in report.potential) + "\n"


_CONFIG_KEYS = {
    "n_levels": int,
    "modes": int,
    "steps": int,
    "horizon": float,
    "energy": float,
    "epsilon": float,
    "target": str,
    "target_file": str,
    "alpha": str,
    "quad_points": int,
    "lambda0": float,
    "max_iters": int,
    "tol_v": float,
    "tol_constraint": float,
}


def _load_config_file(path: str) -> dict:
    try:
        with open(path, "r") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key = key.strip().replace("-", "_")
        if key not in _CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](value.strip())
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return values


def _parse_alpha(text: str) -> np.ndarray:
    try:
        return np.array([float(tok) for tok in text.split(",") if tok.strip() != ""])
    except ValueError as exc:
        raise ConfigError(f"bad alpha list {text!r}: {exc}") from exc


def _build_run_config(args) -> RunConfig:
    values = _load_config_file(args.config) if args.config else {}
    for key in _CONFIG_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    if values.get("target_file") and values.get("target", "dft") == "dft":
        values["target"] = "file"
    solver = SolverConfig(
        lambda0=values.get("lambda0", 0.0),
        max_iters=values.get("max_iters", 200),
        tol_v=values.get("tol_v", 1e-10),
        tol_constraint=values.get("tol_constraint", 1e-8),
    )
    alpha = _parse_alpha(values["alpha"]) if "alpha" in values else None
    kwargs = {}
    if "n_levels" in values:
        kwargs["n_levels"] = values["n_levels"]
    if "modes" in values:
        kwargs["n_modes"] = values["modes"]
    if "steps" in values:
        kwargs["n_steps"] = values["steps"]
    if "horizon" in values:
        kwargs["horizon"] = values["horizon"]
    if "energy" in values:
        kwargs["energy_budget"] = values["energy"]
    if "epsilon" in values:
        kwargs["epsilon"] = values["epsilon"]
    if "quad_points" in values:
        kwargs["quad_points"] = values["quad_points"]
    if "target" in values:
        kwargs["target"] = values["target"]
    if "target_file" in values:
        kwargs["target_file"] = values["target_file"]
    return RunConfig(alpha=alpha, solver=solver, **kwargs)


def _add_common_flags(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="key = value configuration file")
    parser.add_argument("--n-levels", dest="n_levels", type=int, help="basis truncation N")
    parser.add_argument("--modes", type=int, help="number of controlled sine modes P")
    parser.add_argument("--steps", type=int, help="number of time steps K")
    parser.add_argument("--horizon", type=float, help="evolution time T")
    parser.add_argument("--energy", type=float, help="control energy budget E")
    parser.add_argument("--epsilon", type=float, help="perturbation strength")
    parser.add_argument("--target", choices=["dft"], help="built-in target gate")
    parser.add_argument("--target-file", dest="target_file", help="plain-text matrix target")
    parser.add_argument("--alpha", help="comma-separated mode weights")
    parser.add_argument("--quad-points", dest="quad_points", type=int, help="kernel quadrature grid")
    parser.add_argument("--lambda0", type=float, help="initial multiplier guess")
    parser.add_argument("--max-iters", dest="max_iters", type=int, help="solver iteration cap")
    parser.add_argument("--tol-v", dest="tol_v", type=float, help="relative change tolerance on V")
    parser.add_argument(
        "--tol-constraint", dest="tol_constraint", type=float, help="relative energy tolerance"
    )
    parser.add_argument("--out", required=True, help="output CSV path")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gatesynth",
        description="Synthesize box-confined control potentials that realize target gates.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    run_p = sub.add_parser("run", help="solve one synthesis problem and write a report")
    _add_common_flags(run_p)
    run_p.add_argument("--emit-potential", dest="emit_potential", help="also dump V_p(r tau) as CSV")
    sweep_p = sub.add_parser("sweep", help="run a horizon sweep and write a summary table")
    _add_common_flags(sweep_p)
    sweep_p.add_argument("--t-min", dest="t_min", type=float, required=True)
    sweep_p.add_argument("--t-max", dest="t_max", type=float, required=True)
    sweep_p.add_argument("--points", type=int, required=True)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits 0 for --help; anything else is a usage problem
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG

    try:
        config = _build_run_config(args)
        if args.command == "run":
            report = run_synthesis(config)
            report.save(args.out)
            if args.emit_potential:
                with open(args.emit_potential, "w", newline="") as fh:
                    fh.write(format_potential_csv(report))
            print(
                f"status={report.status} nser_opt={report.verified_nser_opt:.6g} "
                f"nser_zero={report.verified_nser_zero:.6g} lambda={report.lambda_opt:.6g}"
            )
            return report.exit_code()
        sweep = SweepConfig(config, args.t_min, args.t_max, args.points)
        reports = run_sweep(sweep)
        with open(args.out, "w", newline="") as fh:
            fh.write(format_sweep_csv(reports))
        print(f"wrote {len(reports)} sweep rows to {args.out}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    raise SystemExit(main())
