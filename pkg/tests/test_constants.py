import math

import numpy as np
import pytest

from plaplab import constants as C
from plaplab.constants import ParameterRangeError, ProblemParams


@pytest.mark.parametrize("n, p, expected", [(2, 3, 5), (3, 1.5, 3), (3, 4, 4.5)])
def test_gamma_threshold(n, p, expected):
    assert C.gamma_threshold(n, p) == pytest.approx(expected, abs=1e-14)


def test_gamma_threshold_planar_is_p_plus_2():
    for p in np.linspace(1.1, 9, 40):
        assert C.gamma_threshold(2, p) == pytest.approx(p + 2)


@pytest.mark.parametrize("n", [2, 3, 4, 7])
def test_k_constant_at_p2(n):
    assert C.k_constant(n, 2.0) == 1.0


@pytest.mark.parametrize("n, p, expected", [(2, 3, 1.25), (3, 3, 1.5)])
def test_k_constant_examples(n, p, expected):
    assert C.k_constant(n, p) == pytest.approx(expected, abs=1e-14)


def test_k_constant_refuses_beyond_limit():
    with pytest.raises(ParameterRangeError) as exc:
        C.k_constant(3, 5.0)
    assert "3 + 2/(n-2)" in exc.value.range_text


@pytest.mark.parametrize("n, p, gamma, expected", [(2, 3, 4, 1), (2, 3, 5, 0), (3, 4, 3, 9 / 8)])
def test_c_coefficient_examples(n, p, gamma, expected):
    assert C.c_coefficient(n, p, gamma) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("n", [2, 3, 4, 6])
@pytest.mark.parametrize("p", [1.3, 2.5, 3.0, 4.7])
def test_c_coefficient_root(n, p):
    root = 3 + (p - 1) / (n - 1)
    assert abs(C.c_coefficient(n, p, root)) <= 1e-12
    assert C.c_coefficient(n, p, root - 0.1) > 0 > C.c_coefficient(n, p, root + 0.1)


def test_c_coefficient_singular_at_2():
    with pytest.raises(ParameterRangeError):
        C.c_coefficient(3, 2.0, 1.0)


@pytest.mark.parametrize("n, p, delta, ok", [(3, 3, 2 / 3, True), (3, 5, 0.0, False), (4, 2, 1.0, True)])
def test_cordes_elliptic_examples(n, p, delta, ok):
    m = C.cordes_margin_elliptic(n, p)
    assert m.delta == pytest.approx(delta, abs=1e-12) and m.admissible is ok


@pytest.mark.parametrize("n, p, delta, ok", [(2, 5, 0.0, False), (2, 2, 1.0, True)])
def test_cordes_parabolic_examples(n, p, delta, ok):
    m = C.cordes_margin_parabolic(n, p)
    assert m.delta == pytest.approx(delta, abs=1e-12) and m.admissible is ok


def test_cordes_parabolic_negative():
    assert C.cordes_margin_parabolic(3, 6).delta < 0


@pytest.mark.parametrize("n", [3, 4, 5])
def test_cordes_zero_crossings(n):
    pe = 3 + 2 / (n - 2)
    pp = 3 + 2 / (n - 1)
    assert abs(C.cordes_margin_elliptic(n, pe).delta) <= 1e-10
    assert abs(C.cordes_margin_parabolic(n, pp).delta) <= 1e-10


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_predicates_agree_with_limits(n):
    # elliptic Cordes admissibility coincides with the sign-bound range
    lim_e = C.sign_bound_limit(n)
    lim_p = C.parabolic_cordes_limit(n)
    for p in np.linspace(1.01, 8, 200):
        if abs(p - lim_e) > 1e-9:
            assert C.cordes_margin_elliptic(n, p).admissible == (p < lim_e)
        if abs(p - lim_p) > 1e-9:
            assert C.cordes_margin_parabolic(n, p).admissible == (p < lim_p)
        assert C.gamma_threshold(n, p) <= p + n / (n - 1) + 1e-15


def test_cordes_worst_case_is_endpoint():
    # scan the whole coefficient family mu in [min(1,p-1), max(1,p-1)]
    for n in (2, 3, 5):
        for p in (1.2, 2.7, 4.0, 6.5):
            mus = np.linspace(min(1, p - 1), max(1, p - 1), 1001)
            scan = ((n - 1 + mus) ** 2 / (n - 1 + mus ** 2) - (n - 1)).min()
            assert C.cordes_margin_elliptic(n, p).delta == pytest.approx(scan, abs=1e-12)


def test_coefficient_matrix_cases():
    assert np.array_equal(C.coefficient_matrix(ProblemParams(3, 2.0), [1, 2, 3]), np.eye(3))
    A = C.coefficient_matrix(ProblemParams(3, 3.0, 1e-14), [1, 0, 0])
    assert np.allclose(A, np.diag([2, 1, 1]))
    assert np.array_equal(C.coefficient_matrix(ProblemParams(2, 1.5, 1e-3), [0, 0]), np.eye(2))


def test_coefficient_eigenvalues_match_matrix():
    rng = np.random.default_rng(0)
    for _ in range(50):
        params = ProblemParams(4, rng.uniform(1.1, 6), rng.uniform(1e-6, 1))
        g = rng.normal(size=4)
        ev = np.sort(np.linalg.eigvalsh(C.coefficient_matrix(params, g)))[::-1]
        assert np.allclose(ev, C.coefficient_eigenvalues(params, g))


def test_coefficient_matrix_singular_case():
    with pytest.raises(ValueError):
        C.coefficient_matrix(ProblemParams(2, 3.0, 0.0), [0, 0])


def test_stable_dt():
    assert C.stable_dt(ProblemParams(2, 2.0), 0.1) == pytest.approx(0.01 / 8)
    assert C.stable_dt(ProblemParams(2, 4.0), 0.1) == pytest.approx(0.01 / 24)
    assert C.stable_dt(ProblemParams(3, 1.5), 0.1) == pytest.approx(0.01 / 14)


@pytest.mark.parametrize("kw", [dict(n=0, p=2), dict(n=2, p=1.0), dict(n=2, p=2, eps=-1)])
def test_problem_params_validation(kw):
    with pytest.raises(ParameterRangeError):
        ProblemParams(**kw)


def test_summary_fields():
    s = C.summary(3, 3.0, gamma=4.0)
    assert s["k_constant"] == 1.5
    assert s["cordes_elliptic"]["delta"] == pytest.approx(2 / 3)
    assert s["gamma_threshold"] == 4.0 and s["gamma_admissible"] is False
    assert s["c_coefficient"] == pytest.approx(C.c_coefficient(3, 3.0, 4.0))
    beyond = C.summary(3, 6.0)
    assert beyond["k_constant"] is None and beyond["sign_bound_admissible"] is False
    assert math.isinf(C.sign_bound_limit(2)) and C.summary(2, 7.0)["sign_bound_p_limit"] is None
