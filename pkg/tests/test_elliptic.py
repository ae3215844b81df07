import numpy as np
import pytest
import sympy as sp

from plaplab.constants import ProblemParams
from plaplab.elliptic import (
    ConvergenceError,
    EllipticProblem,
    boundary_preset,
    conservative_residual,
    pcg,
    radial_benchmark,
    radial_reference,
    residual,
    solve,
)
from plaplab.grid import ScalarField


def unit_problem(n, p, N, boundary, eps=1e-6, **kw):
    return EllipticProblem(ProblemParams(n, p, eps), (N + 1,) * n, 1.0 / N, boundary, **kw)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 4.0])
@pytest.mark.parametrize("n", [2, 3])
def test_affine_is_exact(n, p):
    g = boundary_preset("affine", n, p, coef=[1.0, -0.5, 0.25][:n], c0=0.3)
    u = solve(unit_problem(n, p, 8, g)).field
    assert np.abs(u.values - g(*u.coords())).max() <= 1e-8


def test_saddle_exact_at_p2():
    g = boundary_preset("saddle", 2, 2.0)
    u = solve(unit_problem(2, 2.0, 32, g)).field
    assert np.abs(u.values - g(*u.coords())).max() <= 1e-8


@pytest.mark.parametrize("n, p", [(2, 1.5), (2, 3.0), (2, 4.0), (3, 1.5), (3, 2.0), (3, 4.0), (3, 3.0)])
def test_radial_reference_is_p_harmonic(n, p):
    X = sp.symbols(f"x1:{n + 1}", real=True)
    z = [sp.Rational(-1, 2)] * n
    ref = radial_reference(n, p, z)
    P = sp.nsimplify(p)
    r2 = sum((x - zi) ** 2 for x, zi in zip(X, z))
    u = sp.log(r2) / 2 if ref.branch == "log" else r2 ** ((P - n) / (P - 1) / 2)
    grad = [sp.diff(u, x) for x in X]
    g2 = sum(d ** 2 for d in grad)
    plap = sum(sp.diff(g2 ** ((P - 2) / 2) * d, x) for d, x in zip(grad, X))
    pt = {x: sp.Rational(k + 2, 7) for k, x in enumerate(X)}
    assert abs(float(plap.subs(pt))) < 1e-12
    # numeric callable agrees with the symbolic expression
    assert float(u.subs(pt)) == pytest.approx(float(ref(*[float(v) for v in pt.values()])), rel=1e-14)


def test_radial_reference_branches():
    assert radial_reference(2, 4.0, (0, 0)).exponent == pytest.approx(2 / 3)
    assert radial_reference(2, 2.0, (0, 0)).branch == "log"
    assert radial_reference(3, 2.0, (0, 0, 0)).exponent == pytest.approx(-1.0)
    with pytest.raises(ValueError):
        radial_reference(2, 2.0, (0, 0), branch="power")
    with pytest.raises(ValueError):
        radial_reference(2, 3.0, (0, 0, 0))


@pytest.mark.slow
def test_radial_benchmark_order():
    errs = []
    for N in (32, 64, 128):
        res = radial_benchmark(2, 4.0, N, 1e-6)
        u = res.field
        ref = radial_reference(2, 4.0, (-0.5, -0.5))
        errs.append(np.abs(u.values - ref(*u.coords())).max())
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert errs[-1] <= 5e-3 and np.all(orders >= 1.5)


@pytest.mark.parametrize("p", [1.5, 3.0])
def test_radial_benchmark_other_p(p):
    u = radial_benchmark(2, p, 32).field
    ref = radial_reference(2, p, (-0.5, -0.5))
    assert np.abs(u.values - ref(*u.coords())).max() < 1e-3


@pytest.mark.parametrize("p", [1.5, 4.0])
def test_maximum_principle(p):
    g = lambda x, y: np.sin(5 * x) * np.cos(3 * y) + x * y  # noqa: E731
    u = solve(unit_problem(2, p, 32, g)).field.values
    ring = np.ones(u.shape, bool)
    ring[1:-1, 1:-1] = False
    assert u.max() <= u[ring].max() + 1e-9 and u.min() >= u[ring].min() - 1e-9


def test_convergence_log_monotone_after_transient():
    res = radial_benchmark(2, 4.0, 32)
    upd = [s.update for s in res.log.steps]
    assert res.log.converged and upd[-1] <= 1e-8
    tail = upd[3:]
    assert all(b <= a * 1.05 for a, b in zip(tail, tail[1:]))
    rows = res.log.as_rows()
    assert set(rows[0]) == {"iteration", "update", "residual", "cg_iterations"}


def test_residuals():
    params = ProblemParams(2, 4.0, 1e-6)
    f = ScalarField.from_function(lambda x, y: 2 * x - y, (9, 9), 0.125)
    assert np.allclose(conservative_residual(f, params), 0, atol=1e-10)
    assert np.nanmax(np.abs(residual(f, params))) < 1e-10
    # nondivergence residual of the exact radial solution is O(h^2)
    ref = radial_reference(2, 4.0, (-0.5, -0.5))
    errs = []
    for N in (16, 32, 64):
        g = ScalarField.from_function(ref, (N + 1,) * 2, 1.0 / N)
        errs.append(np.nanmax(np.abs(residual(g, ProblemParams(2, 4.0, 0.0)))))
    assert errs[0] / errs[1] == pytest.approx(4, rel=0.2) and errs[1] / errs[2] == pytest.approx(4, rel=0.2)


def test_solver_residual_shrinks_with_refinement():
    params = ProblemParams(2, 4.0, 1e-6)
    res = [np.nanmax(np.abs(residual(radial_benchmark(2, 4.0, N).field, params))) for N in (16, 32, 64)]
    assert res[0] > res[1] > res[2]


def test_pcg_small_spd():
    rng = np.random.default_rng(0)
    M = rng.normal(size=(20, 20))
    A = M @ M.T + 20 * np.eye(20)
    b = rng.normal(size=20)
    x, its = pcg(lambda v: A @ v, b, np.zeros(20), np.diag(A), tol=1e-12)
    assert np.allclose(A @ x, b, atol=1e-9) and its <= 40


def test_pcg_failure_raises():
    A = np.diag(np.linspace(1, 1e6, 200))
    with pytest.raises(ConvergenceError):
        pcg(lambda v: A @ v + 1e3 * np.roll(v, 1) + 1e3 * np.roll(v, -1), np.ones(200), np.zeros(200),
            np.ones(200), tol=1e-14, max_iter=3)


def test_picard_budget_exhausted():
    with pytest.raises(ConvergenceError) as exc:
        solve(unit_problem(2, 4.0, 16, radial_reference(2, 4.0, (-0.5, -0.5)), max_iter=2))
    assert len(exc.value.history) == 2


def test_problem_validation():
    g = boundary_preset("saddle", 2, 3.0)
    with pytest.raises(ValueError):
        unit_problem(2, 3.0, 8, g, eps=0.0)
    with pytest.raises(ValueError):
        unit_problem(2, 3.0, 8, g, theta=1.5)
    with pytest.raises(ValueError):
        boundary_preset("nope", 2, 3.0)


def test_even_preset_symmetry():
    p = 4.0
    N = 16
    problem = EllipticProblem(ProblemParams(2, p, 1e-6), (N + 1, 2 * N + 1), 1.0 / N,
                              boundary_preset("even_x2", 2, p), origin=(0.0, -1.0))
    u = solve(problem).field.values
    assert np.abs(u - u[:, ::-1]).max() < 1e-9
