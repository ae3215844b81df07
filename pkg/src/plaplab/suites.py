"""Named verification suites: the benchmark problems behind ``plaplab verify``.

Every suite returns a :class:`SuiteResult`. Keyword arguments are the
config keys a suite accepts.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import constants as C
from . import verify as V
from .constants import ProblemParams
from .elliptic import EllipticProblem, boundary_preset, radial_benchmark, solve
from .grid import Region, ScalarField, hessian
from .parabolic import ParabolicProblem, exact_sharpness_solution, solve_divergence, solve_normalized


@dataclass
class SuiteResult:
    name: str
    reports: list
    passed: bool
    details: dict = field(default_factory=dict)


def _poly4(seed):
    rng = np.random.default_rng(seed)
    coef = rng.uniform(-1, 1, size=(5, 5))

    def f(x, y):
        return sum(coef[i, j] * x ** i * y ** j for i in range(5) for j in range(5) if i + j <= 4)

    return f


def identity_suite(levels=(16, 32, 64, 128), seed=3):
    """Divergence identity on a random quartic over [-1, 1]^2; errors must fall like h^2."""
    f = _poly4(seed)
    reports = []
    for N in levels:
        u = ScalarField.from_function(f, (2 * N + 1,) * 2, 1.0 / N, (-1.0, -1.0))
        reports.append(V.divergence_identity_report(u, Region.ball((0.0, 0.0), 0.25)))
    errs = [r.notes["rel_error"] for r in reports]
    ratios = [a / b for a, b in zip(errs, errs[1:])]
    ok = all(3.2 <= q <= 4.8 for q in ratios) and all(r.passed for r in reports)
    return SuiteResult("identity", reports, ok, {"rel_errors": errs, "error_ratios": ratios})


def _benchmark_fields(n, p, levels, eps):
    return [radial_benchmark(n, p, N, eps).field for N in levels]


def gamma_suite(p=4.0, levels=(32, 64, 128), gammas=None, eps=1e-6, cap=2.0):
    """Gradient-power W^{1,2} and weighted-energy ratios on the n=2 radial benchmark."""
    thr = C.gamma_threshold(2, p)
    gammas = [0.0, thr - 0.1] if gammas is None else list(gammas)
    for g in gammas:
        V.require_gamma(2, p, g)
    fields = _benchmark_fields(2, p, levels, eps)
    params = ProblemParams(2, p, eps)
    region = Region.ball((0.5, 0.5), 0.2)
    reports, ok = [], True
    for g in gammas:
        t1 = [V.gradient_power_report(u, params, g, region) for u in fields]
        we = [V.weighted_energy_report(u, params, g, region) for u in fields]
        ok &= V.refinement_boundedness(t1, cap)
        ok &= V.refinement_boundedness(we, cap)
        reports += t1 + we
    return SuiteResult("gamma", reports, ok, {"gamma_threshold": thr, "gammas": gammas})


def sign_bound_suite(cases=None, eps=1e-6, c1=10.0, c2=10.0):
    """Hessian sign bound on solver output; margin of the p=2 harmonic quadratic."""
    cases = cases or [(2, 1.5, 64), (2, 1.5, 128), (2, 3.0, 64), (2, 3.0, 128),
                      (2, 4.0, 64), (2, 4.0, 128), (3, 1.5, 64), (3, 3.0, 64)]
    for n, p, N in cases:
        lim = C.sign_bound_limit(n)
        if not 1 < p < lim:
            raise C.ParameterRangeError(f"sign bound case n={n}, p={p} is outside 1 < p < {lim:g}",
                                        "1 < p < 3 + 2/(n-2)")
    reports = []
    for n, p, N in cases:
        u = radial_benchmark(n, p, N, eps).field
        region = Region.ball((0.5,) * n, 0.2)
        reports.append(V.sign_bound_report(u, ProblemParams(n, p, eps), region, c1, c2))
    saddle = ScalarField.from_function(lambda x, y: x ** 2 - y ** 2, (33, 33), 1 / 16, (-1, -1))
    harm = V.sign_bound_report(saddle, ProblemParams(2, 2.0, 0.0), Region.ball((0, 0), 0.5), c1, c2)
    reports.append(harm)
    margin = harm.notes["min_margin"]
    ok = all(r.passed for r in reports) and abs(margin) <= 1e-9
    return SuiteResult("sign-bound", reports, ok, {"harmonic_quadratic_margin": margin})


def quasiregular_suite(levels=(64, 128), eps=1e-6, c1=10.0, c2=10.0):
    """Planar quasiregularity: equality for the saddle, pass for the p=4 benchmark."""
    reports = []
    saddle = ScalarField.from_function(lambda x, y: x ** 2 - y ** 2, (33, 33), 1 / 16, (-1, -1))
    eq = V.quasiregular_2d_report(saddle, 2.0, Region.ball((0, 0), 0.5), 0.0, c1, c2)
    reports.append(eq)
    for N in levels:
        u = radial_benchmark(2, 4.0, N, eps).field
        reports.append(V.quasiregular_2d_report(u, 4.0, Region.ball((0.5, 0.5), 0.2), eps, c1, c2))
    axis = even_axis_equality(4.0, N=64, eps=eps)
    ok = all(r.passed for r in reports) and abs(eq.notes["max_excess"]) <= 1e-9
    return SuiteResult("quasiregular", reports, ok,
                       {"saddle_excess": eq.notes["max_excess"], "axis_relative_excess": axis})


def even_axis_equality(p=4.0, N=64, eps=1e-6):
    """Relative excess |margin| / |D^2u|^2 on the axis x2 = 0 for data even in x2.

    Small values reproduce the equality case of the planar bound.
    """
    problem = EllipticProblem(ProblemParams(2, p, eps), (N + 1, 2 * N + 1), 1.0 / N,
                              boundary_preset("even_x2", 2, p), origin=(0.0, -1.0))
    u = solve(problem).field
    H = hessian(u)
    frob = np.einsum("ij...,ij...->...", H, H)
    m = V.quasiregular_margin(u, p)
    j0 = N  # x2 = 0
    sl = slice(N // 4, 3 * N // 4)
    return float(np.max(np.abs(m[sl, j0]) / frob[sl, j0]))


def parabolic_suite(levels=(16, 32, 64), eps=1e-4, cap=2.0, T=0.25, s=0.2, r=0.15):
    """Cylinder estimates on heat, normalized p=4 and exact p=2.5 divergence runs."""
    reports, ok = [], True
    sine = lambda x, y: np.sin(np.pi * x) * np.sin(np.pi * y)  # noqa: E731
    region = Region.cylinder((0.5, 0.5), r, s)
    for p in (2.0, 4.0):
        params = ProblemParams(2, p, eps)
        runs = [solve_normalized(ParabolicProblem(params, "normalized", (N + 1,) * 2, 1.0 / N, T, sine)).field
                for N in levels]
        reps = [V.parabolic_report(u, params, "normalized", region) for u in runs]
        ok &= V.refinement_boundedness(reps, cap)
        reports += reps
    p = 2.5
    w = exact_sharpness_solution(p)
    params = ProblemParams(2, p, 1e-10)
    runs = []
    for N in levels:
        prob = ParabolicProblem(params, "divergence", (N + 1,) * 2, 1.0 / N, T,
                                lambda *X: w(0.0, *X), boundary=w, origin=(0.5, 0.0))
        runs.append(solve_divergence(prob).field)
    region = Region.cylinder((1.0, 0.5), r, s)
    for part in ("time", "hessian"):
        reps = [V.parabolic_report(u, params, "divergence", region, part) for u in runs]
        ok &= V.refinement_boundedness(reps, cap)
        reports += reps
    return SuiteResult("parabolic", reports, ok)


def sharpness_suite(ps=(2.5, 3.0, 3.5), levels=5, h0=1 / 16):
    scans = [V.sharpness_scan(p, levels, h0) for p in ps]
    details = {str(s.p): {"classification": s.classification, "values": s.values, "h": s.h,
                          "fitted_rate": s.fitted_rate, "predicted_exponent": s.predicted_exponent,
                          "passed": s.passed} for s in scans}
    return SuiteResult("sharpness", [], all(s.passed for s in scans), details)


def sign_probe_suite(hs=(0.1, 0.05, 0.025), point=(1.0, 1.0, 1.0)):
    q = V.sign_change_probe([point, (1000.0, 1.0, 1.0)])
    errs = [float(abs(V.sign_change_discrete(point, h) - q[0])) for h in hs]
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    ok = bool(q[0] > 0 and q[1] < 0 and all(1.8 <= o <= 2.2 for o in orders))
    return SuiteResult("sign-probe", [], ok, {"Q": q.tolist(), "discrete_errors": errs, "orders": orders})


SUITES = {
    "identity": identity_suite,
    "gamma": gamma_suite,
    "sign-bound": sign_bound_suite,
    "quasiregular": quasiregular_suite,
    "parabolic": parabolic_suite,
    "sharpness": sharpness_suite,
    "sign-probe": sign_probe_suite,
}


def run_suite(name, **options):
    if name == "all":
        results = [fn() for fn in SUITES.values()]
        reports = [r for res in results for r in res.reports]
        return SuiteResult("all", reports, all(r.passed for r in results),
                           {res.name: {"passed": res.passed, **res.details} for res in results})
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)} or 'all'")
    return SUITES[name](**options)
