import numpy as np
import numpy.testing as npt
import pytest

from gatesynth.assembly import (
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
from gatesynth.spectral import (
    GateMatrix,
    GateRole,
    bohr_frequency,
    build_overlap_table,
    dft_gate,
    energy,
    gamma_closed,
    make_basis,
    target_residual,
)

HORIZON = 20.0 / np.pi**2


def test_lex_index():
    assert lex_index(1, 0, 50) == 0
    assert lex_index(2, 0, 50) == 50
    assert lex_index(3, 7, 10) == 27
    with pytest.raises(ValueError):
        lex_index(0, 0, 10)
    with pytest.raises(ValueError):
        lex_index(1, 10, 10)
    with pytest.raises(ValueError):
        lex_index(1, -1, 10)


def test_design_grid():
    grid = DesignGrid(2, 2, 50, HORIZON)
    assert grid.tau == grid.horizon / grid.n_steps  # derived, never stored
    assert grid.tau * grid.n_steps == pytest.approx(HORIZON, rel=1e-15)
    npt.assert_allclose(grid.times, grid.tau * np.arange(50), rtol=1e-15)
    assert grid.size == 100
    for bad in (dict(n_levels=0), dict(n_modes=0), dict(n_steps=1), dict(horizon=0.0)):
        kwargs = dict(n_levels=2, n_modes=2, n_steps=50, horizon=HORIZON)
        kwargs.update(bad)
        with pytest.raises(ValueError):
            DesignGrid(**kwargs)


def test_control_field_flat_ordering():
    grid = DesignGrid(2, 3, 4, 1.0)
    values = np.arange(12, dtype=float).reshape(3, 4)
    field = ControlField(grid, values)
    for p in range(1, 4):
        for r in range(4):
            assert field.flat[lex_index(p, r, 4)] == values[p - 1, r]
    round_trip = ControlField.from_flat(grid, field.flat)
    npt.assert_array_equal(round_trip.values, values)
    with pytest.raises(ValueError):
        ControlField(grid, np.zeros((2, 4)))


def test_control_field_energy():
    grid = DesignGrid(2, 2, 5, 2.5)
    rng = np.random.default_rng(0)
    field = ControlField(grid, rng.standard_normal((2, 5)))
    alpha = np.array([1.0, 3.0])
    manual = grid.tau * sum(
        alpha[p] * field.values[p, r] ** 2 for p in range(2) for r in range(5)
    )
    assert field.energy(alpha) == pytest.approx(manual, rel=1e-13)


def _beta_loops(w, n_levels, grid):
    out = np.zeros(grid.size)
    tau = grid.tau
    for p in range(1, grid.n_modes + 1):
        for r in range(grid.n_steps):
            acc = 0.0
            for m in range(1, n_levels + 1):
                for n in range(1, n_levels + 1):
                    phase = np.exp(1j * bohr_frequency(n, m) * r * tau)
                    acc += gamma_closed(m, n, p) * (w[m - 1, n - 1] * phase).imag
            out[lex_index(p, r, grid.n_steps)] = 4.0 * tau * acc
    return out


def test_assemble_beta_zero_residual():
    basis = make_basis(2)
    gamma = build_overlap_table(2, 2)
    grid = DesignGrid(2, 2, 4, HORIZON)
    w0 = GateMatrix(np.zeros((2, 2)), GateRole.RESIDUAL)
    npt.assert_array_equal(assemble_beta(w0, gamma, basis, grid), 0.0)
    # a real residual at N=1 also gives zero (Im of a real number)
    basis1 = make_basis(1)
    wr = GateMatrix(np.array([[0.73]]), GateRole.RESIDUAL)
    npt.assert_array_equal(
        assemble_beta(wr, build_overlap_table(1, 1), basis1, DesignGrid(1, 1, 4, 1.0)), 0.0
    )


def test_assemble_beta_n1_imaginary_residual():
    basis = make_basis(1)
    gamma = build_overlap_table(1, 1)
    grid = DesignGrid(1, 1, 6, HORIZON)
    w = GateMatrix(np.array([[1j]]), GateRole.RESIDUAL)
    beta = assemble_beta(w, gamma, basis, grid)
    npt.assert_allclose(beta, grid.tau * 32.0 / (3.0 * np.pi), rtol=1e-14)


def test_assemble_beta_dft2_fixture():
    basis = make_basis(2)
    gamma = build_overlap_table(2, 2)
    grid = DesignGrid(2, 2, 4, HORIZON)
    w = target_residual(dft_gate(2), basis, HORIZON)
    beta = assemble_beta(w, gamma, basis, grid)
    npt.assert_allclose(beta, _beta_loops(w.matrix, 2, grid), rtol=1e-12, atol=1e-14)
    frozen = [
        -1.3866967298299886,
        -1.3866967298299886,
        -1.3866967298299886,
        -1.3866967298299886,
        0.19566763671605622,
        -0.089280495707587879,
        -0.2575631827281929,
        -0.089280495707588101,
    ]
    npt.assert_allclose(beta, frozen, rtol=1e-12)


def _c_loops(n_levels, grid):
    out = np.zeros((grid.size, grid.size))
    tau = grid.tau
    for p in range(1, grid.n_modes + 1):
        for q in range(1, grid.n_modes + 1):
            for r1 in range(grid.n_steps):
                for r2 in range(grid.n_steps):
                    acc = 0.0
                    for m in range(1, n_levels + 1):
                        for n in range(1, n_levels + 1):
                            acc += (
                                gamma_closed(m, n, p)
                                * gamma_closed(m, n, q)
                                * np.cos(bohr_frequency(m, n) * (r1 - r2) * tau)
                            )
                    i = lex_index(p, r1, grid.n_steps)
                    j = lex_index(q, r2, grid.n_steps)
                    out[i, j] = tau**2 * acc
    return out


def test_assemble_C_diagonal_and_rank1():
    basis = make_basis(2)
    gamma = build_overlap_table(2, 2)
    grid = DesignGrid(2, 2, 3, HORIZON)
    c = assemble_C(gamma, basis, grid)
    for p in range(1, 3):
        expected = grid.tau**2 * sum(
            gamma_closed(m, n, p) ** 2 for m in range(1, 3) for n in range(1, 3)
        )
        for r in range(3):
            i = lex_index(p, r, 3)
            assert c[i, i] == pytest.approx(expected, rel=1e-13)
    # N = 1, P = 1: constant block tau^2 (8 / 3 pi)^2 since the only frequency is 0
    c1 = assemble_C(build_overlap_table(1, 1), make_basis(1), DesignGrid(1, 1, 4, 2.0))
    npt.assert_allclose(c1, 0.25 * (8 / (3 * np.pi)) ** 2, rtol=1e-14)


def test_assemble_C_n2_fixture():
    basis = make_basis(2)
    gamma = build_overlap_table(2, 1)
    grid = DesignGrid(2, 1, 2, HORIZON)
    c = assemble_C(gamma, basis, grid)
    npt.assert_allclose(c, _c_loops(2, grid), rtol=1e-12)
    npt.assert_allclose(c, 1.2130594248570299, rtol=1e-12)


def test_assemble_C_symmetric_psd():
    for n_levels, p_modes, k in ((2, 2, 6), (3, 3, 5), (3, 2, 8)):
        basis = make_basis(n_levels)
        gamma = build_overlap_table(n_levels, p_modes)
        c = assemble_C(gamma, basis, DesignGrid(n_levels, p_modes, k, HORIZON))
        npt.assert_array_equal(c, c.T)
        min_eig = np.linalg.eigvalsh(c)[0]
        assert min_eig >= -1e-9 * np.linalg.norm(c)


def _d_loops(w, n_levels, grid):
    out = np.zeros((grid.size, grid.size))
    tau = grid.tau
    e = [energy(i) for i in range(1, n_levels + 1)]
    for a in range(1, grid.n_modes + 1):
        for b in range(1, grid.n_modes + 1):
            for r1 in range(grid.n_steps):
                for r2 in range(r1):  # strictly earlier second time only
                    acc = 0.0
                    for m in range(1, n_levels + 1):
                        for n in range(1, n_levels + 1):
                            for p in range(1, n_levels + 1):
                                phase = np.exp(
                                    1j
                                    * ((e[p - 1] - e[m - 1]) * r1 + (e[n - 1] - e[p - 1]) * r2)
                                    * tau
                                )
                                acc += (
                                    gamma_closed(m, p, a)
                                    * gamma_closed(p, n, b)
                                    * (w[m - 1, n - 1] * phase).real
                                )
                    i = lex_index(a, r1, grid.n_steps)
                    j = lex_index(b, r2, grid.n_steps)
                    out[i, j] = tau**2 * acc
    return out


def test_assemble_D_zero_residual_and_mask():
    basis = make_basis(2)
    gamma = build_overlap_table(2, 2)
    grid = DesignGrid(2, 2, 4, HORIZON)
    w0 = GateMatrix(np.zeros((2, 2)), GateRole.RESIDUAL)
    npt.assert_array_equal(assemble_D(w0, gamma, basis, grid), 0.0)

    w = target_residual(dft_gate(2), basis, HORIZON)
    d = assemble_D(w, gamma, basis, grid)
    for a in range(1, 3):
        for b in range(1, 3):
            for r1 in range(4):
                for r2 in range(r1, 4):  # on and above the time diagonal
                    assert d[lex_index(a, r1, 4), lex_index(b, r2, 4)] == 0.0


def test_assemble_D_matches_loop_oracle():
    basis = make_basis(2)
    gamma = build_overlap_table(2, 2)
    grid = DesignGrid(2, 2, 3, HORIZON)
    w = target_residual(dft_gate(2), basis, HORIZON)
    d = assemble_D(w, gamma, basis, grid)
    npt.assert_allclose(d, _d_loops(w.matrix, 2, grid), rtol=1e-12, atol=1e-14)


def _program_pieces(n_levels=2, p_modes=2, k=4, horizon=HORIZON):
    basis = make_basis(n_levels)
    gamma = build_overlap_table(n_levels, p_modes)
    grid = DesignGrid(n_levels, p_modes, k, horizon)
    w = target_residual(dft_gate(n_levels), basis, horizon)
    beta = assemble_beta(w, gamma, basis, grid)
    c = assemble_C(gamma, basis, grid)
    d = assemble_D(w, gamma, basis, grid)
    return basis, gamma, grid, w, beta, c, d


def test_assemble_program_combination():
    basis, gamma, grid, w, beta, c, d = _program_pieces()
    alpha = np.ones(2)

    prog = assemble_program(beta, c, np.zeros_like(c), alpha, grid, 1.0, 1.0)
    npt.assert_array_equal(prog.q, c)  # D = 0, eps = 1 leaves Q = C

    prog2 = assemble_program(beta, np.zeros_like(c), d, alpha, grid, 1.0, 1.0)
    npt.assert_array_equal(prog2.q, d + d.T)
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = rng.standard_normal(grid.size)
        assert v @ prog2.q @ v == pytest.approx(2.0 * (v @ d @ v), rel=1e-12)

    npt.assert_allclose(prog.r, grid.tau, rtol=1e-15)
    prog3 = assemble_program(beta, c, d, np.array([1.0, 2.5]), grid, 1.0, 1.0)
    npt.assert_allclose(
        prog3.r, np.repeat(np.array([1.0, 2.5]) * grid.tau, grid.n_steps), rtol=1e-15
    )


def test_assemble_program_epsilon_scaling():
    basis, gamma, grid, w, beta, c, d = _program_pieces()
    alpha = np.ones(2)
    p1 = assemble_program(beta, c, d, alpha, grid, 1.0, 1.0)
    p_half = assemble_program(beta, c, d, alpha, grid, 1.0, 0.5)
    npt.assert_allclose(p_half.q, 0.25 * p1.q, rtol=1e-15)
    npt.assert_allclose(p_half.beta, 0.5 * p1.beta, rtol=1e-15)


def test_assemble_program_rejects_asymmetric_c():
    basis, gamma, grid, w, beta, c, d = _program_pieces()
    bad = c.copy()
    bad[0, 1] += 1e-9
    with pytest.raises(ValueError):
        assemble_program(beta, bad, d, np.ones(2), grid, 1.0, 1.0)


def test_quadratic_program_validation():
    with pytest.raises(ValueError):
        QuadraticProgram(np.array([[1.0, 0.1], [0.0, 1.0]]), np.ones(2), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        QuadraticProgram(np.eye(2), np.array([1.0, -1.0]), np.ones(2), 1.0)
    with pytest.raises(ValueError):
        QuadraticProgram(np.eye(2), np.ones(2), np.ones(2), 0.0)


def test_predicted_error_at_zero():
    basis, gamma, grid, w, beta, c, d = _program_pieces()
    prog = assemble_program(beta, c, d, np.ones(2), grid, 1.0, 1.0)
    const = float(np.sum(np.abs(w.matrix) ** 2))
    assert predicted_error(prog, const, np.zeros(grid.size)) == const


def _rotated_stack_loops(v, n_levels, grid):
    """Interaction-frame control matrices built entrywise from scalar calls."""
    e = [energy(i) for i in range(1, n_levels + 1)]
    stack = np.zeros((grid.n_steps, n_levels, n_levels), dtype=complex)
    for r in range(grid.n_steps):
        for m in range(1, n_levels + 1):
            for n in range(1, n_levels + 1):
                mat = sum(
                    gamma_closed(m, n, p) * v[p - 1, r] for p in range(1, grid.n_modes + 1)
                )
                stack[r, m - 1, n - 1] = mat * np.exp(
                    1j * (e[m - 1] - e[n - 1]) * r * grid.tau
                )
    return stack


@pytest.mark.parametrize("n_levels,p_modes,k", [(2, 2, 4), (3, 3, 3), (3, 2, 4), (2, 3, 4)])
def test_error_model_matches_functional_oracles(n_levels, p_modes, k):
    """Linear and quadratic terms of the model equal the directly discretized
    time-ordered functionals of the rotated controls, for random V."""
    eps = 0.7
    basis = make_basis(n_levels)
    gamma = build_overlap_table(n_levels, p_modes)
    grid = DesignGrid(n_levels, p_modes, k, HORIZON)
    w = target_residual(dft_gate(n_levels), basis, HORIZON)
    beta = assemble_beta(w, gamma, basis, grid)
    c = assemble_C(gamma, basis, grid)
    d = assemble_D(w, gamma, basis, grid)
    prog = assemble_program(beta, c, d, np.ones(p_modes), grid, 1.0, eps)

    rng = np.random.default_rng(n_levels * 100 + p_modes * 10 + k)
    tau = grid.tau
    for _ in range(4):
        values = rng.standard_normal((p_modes, k))
        vt = _rotated_stack_loops(values, n_levels, grid)
        o1 = -1j * eps * tau * vt.sum(axis=0)
        o2 = np.zeros_like(o1)
        for r1 in range(k):
            for r2 in range(r1):
                o2 += vt[r1] @ vt[r2]
        o2 *= -(eps**2) * tau**2

        term1 = -2.0 * np.real(np.trace(w.matrix.conj().T @ o1))
        term2 = float(np.sum(np.abs(o1) ** 2)) / eps**2
        term3 = -np.real(np.trace(w.matrix.conj().T @ o2)) / eps**2

        v = values.reshape(-1)
        assert 2.0 * (prog.beta @ v) == pytest.approx(term1, rel=1e-10)
        assert v @ prog.q @ v == pytest.approx(eps**2 * (term2 + 2.0 * term3), rel=1e-10)
