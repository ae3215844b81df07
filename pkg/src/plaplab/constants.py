"""Closed-form constants and admissibility ranges of the regularity estimates."""

import math
from dataclasses import dataclass

import numpy as np


class ParameterRangeError(ValueError):
    """A parameter lies outside the range where an estimate is available.

    ``range_text`` names the violated range in words.
    """

    def __init__(self, message, range_text=""):
        super().__init__(message)
        self.range_text = range_text


@dataclass(frozen=True)
class ProblemParams:
    n: int
    p: float
    eps: float = 1e-4

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterRangeError(f"n must be an integer >= 1, got {self.n!r}", "n >= 1")
        if not self.p > 1:
            raise ParameterRangeError(f"p must exceed 1, got {self.p!r}", "p > 1")
        if not self.eps >= 0:
            raise ParameterRangeError(f"eps must be >= 0, got {self.eps!r}", "eps >= 0")


@dataclass(frozen=True)
class CordesMargin:
    delta: float

    @property
    def admissible(self) -> bool:
        return self.delta > 0


def sign_bound_limit(n: int) -> float:
    """Upper end 3 + 2/(n-2) of the p-range for the Hessian sign bound (inf for n <= 2)."""
    return math.inf if n <= 2 else 3.0 + 2.0 / (n - 2)


def parabolic_cordes_limit(n: int) -> float:
    return math.inf if n <= 1 else 3.0 + 2.0 / (n - 1)


def _check_np(n, p):
    if int(n) != n or n < 2:
        raise ParameterRangeError(f"n must be an integer >= 2, got {n!r}", "n >= 2")
    if not p > 1:
        raise ParameterRangeError(f"p must exceed 1, got {p!r}", "p > 1")


def gamma_threshold(n: int, p: float) -> float:
    """Largest admissible weight exponent: min{p + n/(n-1), 3 + (p-1)/(n-1)}."""
    _check_np(n, p)
    return min(p + n / (n - 1), 3.0 + (p - 1) / (n - 1))


def k_constant(n: int, p: float) -> float:
    """K = ((p-1)^2 + n - 1) / ((p-1)(n - (n-2)(p-2))), the sign-bound constant."""
    if not p > 1:
        raise ParameterRangeError(f"p must exceed 1, got {p!r}", "1 < p < 3 + 2/(n-2)")
    denom = (p - 1) * (n - (n - 2) * (p - 2))
    if denom <= 0:
        raise ParameterRangeError(
            f"K_(n,p) needs p < 3 + 2/(n-2); got n={n}, p={p}",
            "1 < p < 3 + 2/(n-2)",
        )
    return ((p - 1) ** 2 + n - 1) / denom


def c_coefficient(n: int, p: float, gamma: float) -> float:
    """Coefficient (p-1)/(2(p-2)^2) [(n-1)(p-gamma) - (n-2)(p-2) + n].

    Positive exactly when gamma < 3 + (p-1)/(n-1).
    """
    if p == 2:
        raise ParameterRangeError("c(n,p,gamma) is singular at p = 2", "p != 2")
    return (p - 1) / (2 * (p - 2) ** 2) * ((n - 1) * (p - gamma) - (n - 2) * (p - 2) + n)


def coefficient_matrix(params: ProblemParams, grad) -> np.ndarray:
    """a_ij = delta_ij + (p-2) g_i g_j / (|g|^2 + eps)."""
    g = np.asarray(grad, dtype=float).reshape(-1)
    g2 = float(g @ g)
    if params.eps == 0 and g2 == 0:
        raise ValueError("coefficient matrix undefined for eps = 0 and zero gradient")
    return np.eye(g.size) + (params.p - 2) * np.outer(g, g) / (g2 + params.eps)


def coefficient_eigenvalues(params: ProblemParams, grad) -> np.ndarray:
    """Eigenvalues of :func:`coefficient_matrix`: 1 (n-1 times) and 1 + (p-2)s."""
    g = np.asarray(grad, dtype=float).reshape(-1)
    g2 = float(g @ g)
    s = g2 / (g2 + params.eps)
    out = np.ones(g.size)
    out[-1] = 1 + (params.p - 2) * s
    return np.sort(out)[::-1]


def _elliptic_delta(n, mu):
    # A = I + (mu - 1) e(x)e: sum a_ij^2 = n-1+mu^2, trace = n-1+mu
    return (n - 1 + mu) ** 2 / (n - 1 + mu * mu) - (n - 1)


def _parabolic_delta(n, mu):
    return (n + mu) ** 2 / (n + mu * mu) - n


def cordes_margin_elliptic(n: int, p: float) -> CordesMargin:
    """Worst-case Cordes margin over the coefficient family.

    The family is A_s = I + (p-2)s e(x)e with s in [0, 1); the margin
    is unimodal in mu = 1 + (p-2)s with its maximum at mu = 1, so the worst
    case sits at an endpoint. Both endpoints are evaluated.
    """
    _check_np(n, p)
    return CordesMargin(min(_elliptic_delta(n, 1.0), _elliptic_delta(n, p - 1.0)))


def cordes_margin_parabolic(n: int, p: float) -> CordesMargin:
    """Worst-case margin of sum a_ij^2 + 1 <= (tr A + 1)^2 / (n + delta)."""
    _check_np(n, p)
    return CordesMargin(min(_parabolic_delta(n, 1.0), _parabolic_delta(n, p - 1.0)))


def stable_dt(params: ProblemParams, h: float) -> float:
    """Explicit time-step bound h^2 / (4 (n + |p-2| + max(p-2, 0)))."""
    p = params.p
    return h * h / (4.0 * (params.n + abs(p - 2) + max(p - 2, 0.0)))


def summary(n: int, p: float, gamma=None) -> dict:
    """Every constant that applies at (n, p[, gamma]); inapplicable ones are None."""
    out = {"n": n, "p": p}

    def attempt(fn, *args):
        try:
            return fn(*args)
        except ParameterRangeError:
            return None

    out["gamma_threshold"] = attempt(gamma_threshold, n, p)
    out["k_constant"] = attempt(k_constant, n, p)
    out["sign_bound_admissible"] = bool(1 < p < sign_bound_limit(n))
    out["sign_bound_p_limit"] = None if math.isinf(sign_bound_limit(n)) else sign_bound_limit(n)
    el = attempt(cordes_margin_elliptic, n, p)
    pa = attempt(cordes_margin_parabolic, n, p)
    out["cordes_elliptic"] = None if el is None else {"delta": el.delta, "admissible": el.admissible}
    out["cordes_parabolic"] = None if pa is None else {"delta": pa.delta, "admissible": pa.admissible}
    out["hessian_l2_parabolic_admissible"] = bool(1 < p < 3)
    if gamma is not None:
        out["gamma"] = gamma
        out["c_coefficient"] = attempt(c_coefficient, n, p, gamma)
        thr = out["gamma_threshold"]
        out["gamma_admissible"] = thr is not None and gamma < thr
    return out
