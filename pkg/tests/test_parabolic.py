import math

import numpy as np
import pytest

from plaplab.constants import ProblemParams
from plaplab.parabolic import (
    ParabolicProblem,
    StabilityError,
    exact_sharpness_solution,
    solve,
    solve_divergence,
    solve_normalized,
    time_step,
)


def sine(*X):
    return np.prod([np.sin(np.pi * x) for x in X], axis=0)


def problem(kind, p, N=32, T=0.05, initial=sine, eps=1e-4, n=2, **kw):
    return ParabolicProblem(ProblemParams(n, p, eps), kind, (N + 1,) * n, 1.0 / N, T, initial, **kw)


def test_heat_decay():
    res = solve_normalized(problem("normalized", 2.0, N=64, T=0.1))
    u = res.field
    exact = math.exp(-2 * math.pi ** 2 * 0.1) * sine(*u.layer(0).coords())
    assert np.abs(u.values[-1] - exact).max() <= 1e-3
    assert u.times[-1] == pytest.approx(0.1)


def test_solvers_agree_at_p2():
    a = solve(problem("normalized", 2.0)).field.values
    b = solve(problem("divergence", 2.0)).field.values
    assert np.abs(a - b).max() <= 1e-10


@pytest.mark.parametrize("kind", ["normalized", "divergence"])
@pytest.mark.parametrize("p", [1.5, 3.0, 4.0])
def test_affine_fixed_point(kind, p):
    aff = lambda x, y: 0.3 + x - 2 * y  # noqa: E731
    u = solve(problem(kind, p, N=16, T=0.02, initial=aff)).field.values
    assert np.abs(u - u[0]).max() <= 1e-12


def test_affine_fixed_point_with_lateral_function():
    aff = lambda x, y: x + y  # noqa: E731
    u = solve(problem("divergence", 3.0, N=16, T=0.02, initial=aff,
                      boundary=lambda t, x, y: x + y)).field.values
    assert np.abs(u - u[0]).max() <= 1e-12


def test_normalized_p4_sup_monotone():
    res = solve_normalized(problem("normalized", 4.0, N=32, T=0.1))
    sup = [r.sup_norm for r in res.log]
    assert all(b <= a + 1e-15 for a, b in zip(sup, sup[1:]))


def test_divergence_energy_decreases():
    res = solve_divergence(problem("divergence", 3.0, N=32, T=0.05))
    e = [r.energy for r in res.log]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(e, e[1:]))


def test_exact_solution_formulas():
    w = exact_sharpness_solution(3.0)
    assert w.time_rate == pytest.approx(9 / 4)
    assert w(1.0, 4.0, 7.0) == pytest.approx(9 / 4 + 8.0)
    w = exact_sharpness_solution(2.5)
    # w_t equals the flux derivative away from x1 = 0
    x, d = 0.7, 1e-4
    flux = lambda s: abs(w.exponent * abs(s) ** (w.exponent - 1)) ** (2.5 - 2) * w.exponent * s ** (w.exponent - 1)  # noqa: E731
    assert (flux(x + d) - flux(x - d)) / (2 * d) == pytest.approx(w.time_rate, rel=1e-6)
    # Hessian entry
    h = 1e-4
    w11 = (w(0, x + h) - 2 * w(0, x) + w(0, x - h)) / h ** 2
    assert w11 == pytest.approx(w.hessian_coefficient * x ** w.hessian_exponent, rel=1e-6)
    with pytest.raises(ValueError):
        exact_sharpness_solution(1.0)


def test_divergence_matches_exact_solution():
    p = 2.5
    w = exact_sharpness_solution(p)
    errs = []
    for N in (16, 32, 64):
        prob = problem("divergence", p, N=N, T=0.1, eps=1e-10, initial=lambda *X: w(0.0, *X),
                       boundary=w, origin=(0.5, 0.0))
        u = solve_divergence(prob).field
        errs.append(np.abs(u.values[-1] - w(0.1, *u.layer(0).coords())).max())
    assert errs[-1] < 1e-5
    assert all(math.log2(a / b) >= 1.0 for a, b in zip(errs, errs[1:]))


def test_comparison_principle():
    lo = solve(problem("normalized", 4.0, N=24, T=0.05, initial=lambda x, y: 0.5 * sine(x, y))).field
    hi = solve(problem("normalized", 4.0, N=24, T=0.05)).field
    assert np.all(lo.values <= hi.values + 1e-12)


def test_stride_and_layers():
    res = solve(problem("normalized", 2.0, N=32, T=0.1, max_layers=11))
    u = res.field
    assert u.steps + 1 <= 11 and u.times[-1] == pytest.approx(0.1)
    assert len(res.log) - 1 == u.steps * round(u.dt / res.log[1].time)


def test_time_step_policy():
    prob = problem("normalized", 4.0, N=10)
    assert time_step(prob) == pytest.approx(0.01 / 24)
    with pytest.raises(StabilityError):
        time_step(problem("normalized", 4.0, N=10, dt=1.0))
    assert time_step(problem("normalized", 4.0, N=10, dt=1e-5)) == 1e-5


def test_instability_detected(monkeypatch):
    import plaplab.parabolic as P

    original = P.stable_dt
    monkeypatch.setattr(P, "stable_dt", lambda params, h: 10 * original(params, h))
    noise = np.random.default_rng(0).uniform(-1, 1, (17, 17))
    with pytest.raises(StabilityError) as exc:
        solve(problem("normalized", 2.0, N=16, T=0.05, initial=lambda x, y: noise))
    assert exc.value.step is not None and exc.value.time > 0


@pytest.mark.parametrize("kw", [dict(kind="other"), dict(eps=0.0), dict(T=0.0)])
def test_problem_validation(kw):
    args = dict(kind="normalized", p=2.0, N=8, T=0.1, eps=1e-4)
    args.update(kw)
    with pytest.raises(ValueError):
        problem(args.pop("kind"), args.pop("p"), **args)


def test_wrong_solver_kind():
    with pytest.raises(ValueError):
        solve_normalized(problem("divergence", 2.0, N=8))
    with pytest.raises(ValueError):
        solve_divergence(problem("normalized", 2.0, N=8))


def test_three_dimensional_heat():
    res = solve(problem("normalized", 2.0, N=16, T=0.02, n=3))
    u = res.field
    exact = math.exp(-3 * math.pi ** 2 * 0.02) * sine(*u.layer(0).coords())
    assert np.abs(u.values[-1] - exact).max() < 5e-3
