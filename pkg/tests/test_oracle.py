import numpy as np
import pytest

from dnflow.domain import build_interval, build_masked, build_rectangle, lp_norm
from dnflow.elliptic import SolverConfig, pmean_defect
from dnflow.errors import BudgetError, SignViolationError
from dnflow.operators import BoundaryRegime, EnergyParams, energy, energy_gradient, jp
from dnflow.oracle import (
    dense_linear_reference,
    extremal_sign_normalize,
    minimize_rayleigh,
    operator_matrix,
)

DIRICHLET = BoundaryRegime.dirichlet()
NEUMANN = BoundaryRegime.neumann()
CFG = SolverConfig(grad_tol=1e-9)


def classical_lambda(p):
    # First eigenvalue of the 1-D p-Laplacian on (0,1): pi_p^p with
    # pi_p = 2 pi (p-1)^(1/p) / (p sin(pi/p)).  Cross-checked against a
    # shooting integration of the ODE in test_classical_formula_shooting.
    pi_p = 2 * np.pi * (p - 1) ** (1 / p) / (p * np.sin(np.pi / p))
    return pi_p ** p


def test_dirichlet_p2_closed_form():
    d = build_interval(199)
    eig = minimize_rayleigh(d, EnergyParams(2.0, 0.0), DIRICHLET, CFG, seed=0)
    h = d.hx
    lam_h = 2.0 / h**2 * (1.0 - np.cos(np.pi * h))
    assert abs(eig.lam / lam_h - 1.0) <= 1e-8
    assert abs(eig.lam / np.pi**2 - 1.0) <= 1e-4


def test_rectangle_p2_tensor_sum():
    d = build_rectangle(15, 15, 1.0, 1.0)
    eig = minimize_rayleigh(d, EnergyParams(2.0, 0.0), DIRICHLET, CFG, seed=0)
    h = d.hx
    lam_1d = 2.0 / h**2 * (1.0 - np.cos(np.pi * h))
    assert abs(eig.lam / (2 * lam_1d) - 1.0) <= 1e-8
    dref = dense_linear_reference(d, DIRICHLET)
    assert abs(eig.lam / dref.lam - 1.0) <= 1e-8


def test_classical_formula_shooting():
    # Independent continuum oracle: shoot -(|u'|^{p-2}u')' = lam jp(u) and
    # place the first zero of u at x = 1.
    from scipy.integrate import solve_ivp

    p = 3.0

    def first_zero(lam):
        def rhs(x, y):
            u, w = y  # w = |u'|^{p-2} u'
            up = np.sign(w) * np.abs(w) ** (1.0 / (p - 1.0))
            return [up, -lam * np.abs(u) ** (p - 2.0) * u]

        ev = lambda x, y: y[0]
        ev.terminal = True
        ev.direction = -1
        sol = solve_ivp(rhs, [0, 5], [0.0, 1.0], events=ev,
                        rtol=1e-11, atol=1e-13)
        return sol.t_events[0][0] if sol.t_events[0].size else np.inf

    lo, hi = 10.0, 60.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if first_zero(mid) > 1.0:
            lo = mid
        else:
            hi = mid
    assert 0.5 * (lo + hi) == pytest.approx(classical_lambda(3.0), rel=1e-9)


def test_dirichlet_p3_classical_value():
    d = build_interval(399)
    eig = minimize_rayleigh(d, EnergyParams(3.0, 1e-6), DIRICHLET, CFG, seed=0)
    assert abs(eig.lam / classical_lambda(3.0) - 1.0) <= 0.01
    # refinement halves the gap at least
    d2 = build_interval(799)
    eig2 = minimize_rayleigh(d2, EnergyParams(3.0, 1e-6), DIRICHLET, CFG, seed=0)
    gap1 = abs(eig.lam / classical_lambda(3.0) - 1.0)
    gap2 = abs(eig2.lam / classical_lambda(3.0) - 1.0)
    assert gap2 <= gap1 / 2


def test_eigen_residual_invariant_all_regimes():
    cases = [
        (build_interval(49), EnergyParams(1.5, 1e-6), DIRICHLET),
        (build_interval(49), EnergyParams(3.0, 1e-6), BoundaryRegime.robin(1.0)),
        (build_interval(49), EnergyParams(2.5, 1e-6), NEUMANN),
        (build_interval(49), EnergyParams(2.0, 0.0), BoundaryRegime.fractional(0.5)),
        (build_rectangle(8, 8, 1, 1), EnergyParams(2.5, 1e-6), DIRICHLET),
        (build_masked(np.tril(np.ones((8, 8), dtype=bool)) | np.eye(8, dtype=bool),
                      0.1), EnergyParams(2.0, 0.0), DIRICHLET),
    ]
    for dom, params, regime in cases:
        eig = minimize_rayleigh(dom, params, regime, CFG, seed=0)
        g = energy_gradient(dom, eig.extremal, params, regime)
        target = eig.lam * jp(eig.extremal, params.p)
        res = np.linalg.norm(g - target) / np.linalg.norm(target)
        assert res <= 10 * CFG.grad_tol, (dom.kind, regime.kind, params.p, res)
        if regime.kind == "neumann":
            assert pmean_defect(dom, eig.extremal, params.p) <= 1e-10


def test_oracle_unit_norm_and_scale_invariance():
    d = build_interval(39)
    params = EnergyParams(2.5, 1e-6)
    a = minimize_rayleigh(d, params, DIRICHLET, CFG, seed=0)
    from dnflow.domain import integrate_power
    assert integrate_power(d, a.extremal, 2.5) == pytest.approx(1.0, rel=1e-10)
    b = minimize_rayleigh(d, params, DIRICHLET, CFG, seed=5)
    assert abs(a.lam / b.lam - 1.0) <= 10 * CFG.grad_tol
    assert lp_norm(d, a.extremal - b.extremal, 2.5) <= 1e-6


def test_oracle_determinism():
    d = build_interval(29)
    params = EnergyParams(3.0, 1e-6)
    a = minimize_rayleigh(d, params, DIRICHLET, CFG, seed=3)
    b = minimize_rayleigh(d, params, DIRICHLET, CFG, seed=3)
    assert a.lam == b.lam
    np.testing.assert_array_equal(a.extremal, b.extremal)


def test_dense_reference_matches_projected_descent():
    d = build_interval(199)
    eig = minimize_rayleigh(d, EnergyParams(2.0, 0.0), DIRICHLET, CFG, seed=0)
    dref = dense_linear_reference(d, DIRICHLET)
    assert abs(eig.lam / dref.lam - 1.0) <= 1e-8


def test_dense_reference_neumann_cosine():
    d = build_interval(199)
    dref = dense_linear_reference(d, NEUMANN)
    n, h = 199, d.hx
    lam_h = 2.0 / h**2 * (1.0 - np.cos(np.pi / n))
    assert abs(dref.lam / lam_h - 1.0) <= 1e-10
    # interior nodes span (h, 1-h): the grid-size error is O(1/n)
    assert abs(dref.lam / np.pi**2 - 1.0) <= 4.0 / n
    mode = np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))
    mode /= lp_norm(d, mode, 2.0)
    gap = min(lp_norm(d, dref.extremal - mode, 2.0),
              lp_norm(d, dref.extremal + mode, 2.0))
    assert gap <= 1e-8


def test_dense_reference_robin_matrix_consistency():
    # E(u) = (vol/2) u^T A u must hold for the assembled local matrix.
    rng = np.random.default_rng(0)
    for dom, regime in [
        (build_interval(17), BoundaryRegime.robin(1.3)),
        (build_rectangle(5, 6, 1.0, 1.2), BoundaryRegime.robin(0.8)),
        (build_rectangle(5, 6, 1.0, 1.2), NEUMANN),
        (build_masked(np.array([[1, 1, 1], [1, 1, 0], [1, 0, 0]], dtype=bool), 0.2),
         DIRICHLET),
    ]:
        A = operator_matrix(dom, regime)
        np.testing.assert_allclose(A, A.T, atol=1e-14)
        for _ in range(3):
            u = rng.standard_normal(dom.n_nodes)
            e_matrix = 0.5 * dom.cell_volume * float(u @ (A @ u))
            e_direct = energy(dom, u, EnergyParams(2.0, 0.0), regime)
            assert e_matrix == pytest.approx(e_direct, rel=1e-12)


def test_dense_reference_budget():
    d = build_interval(99)
    with pytest.raises(BudgetError):
        dense_linear_reference(d, DIRICHLET, max_nodes=50)


def test_sign_normalize_flip_and_identity():
    d = build_interval(19)
    phi = np.sin(np.pi * d.nodes)
    out = extremal_sign_normalize(-phi, DIRICHLET)
    np.testing.assert_allclose(out, phi)
    out2 = extremal_sign_normalize(phi, DIRICHLET)
    np.testing.assert_allclose(out2, phi)


def test_sign_normalize_neumann_exempt():
    d = build_interval(19)
    mode = np.cos(np.pi * d.nodes)
    out = extremal_sign_normalize(mode, NEUMANN)
    np.testing.assert_allclose(out, mode)  # peak already positive; no assert


def test_sign_normalize_violation():
    d = build_interval(19)
    with pytest.raises(SignViolationError):
        extremal_sign_normalize(np.sin(2 * np.pi * d.nodes), DIRICHLET)


def test_fractional_dense_reference_smallest_eig():
    d = build_interval(60)
    reg = BoundaryRegime.fractional(0.5)
    dref = dense_linear_reference(d, reg)
    A = operator_matrix(d, reg)
    vals = np.linalg.eigvalsh(A)
    assert dref.lam == pytest.approx(vals[0], rel=1e-12)
    eig = minimize_rayleigh(d, EnergyParams(2.0, 0.0), reg, CFG, seed=0)
    assert abs(eig.lam / dref.lam - 1.0) <= 1e-8
