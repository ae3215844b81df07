"""Discrete checks of the regularity estimates.

Each ``*_report`` computes both sides of one inequality on one discrete
field and returns an :class:`EstimateReport`. Integral estimates have no
stated constants, so they pass on ratio boundedness across dyadic
refinements (see :func:`refinement_boundedness`). Pointwise estimates use
the tolerance model ``tol = c1*h + c2*eps``.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import constants as C
from .constants import ParameterRangeError, ProblemParams
from .grid import (
    Region,
    ScalarField,
    SpaceTimeField,
    bump_cutoff,
    gradient,
    hessian,
    integrate,
    region_mask,
    vector_gradient,
)
from .parabolic import exact_sharpness_solution

BALL_NOTE = "balls are sup-norm boxes"


@dataclass
class EstimateReport:
    name: str
    lhs: float
    rhs_raw: float
    params: dict
    region: Region
    h: float
    dt: float = None
    passed: bool = True
    criterion: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def ratio(self) -> float:
        if self.rhs_raw > 0:
            return self.lhs / self.rhs_raw
        return 0.0 if self.lhs == 0 else math.inf

    def row(self) -> dict:
        return {
            "name": self.name,
            "n": self.params.get("n"),
            "p": self.params.get("p"),
            "gamma": self.params.get("gamma"),
            "eps": self.params.get("eps"),
            "h": self.h,
            "dt": self.dt,
            "lhs": self.lhs,
            "rhs_raw": self.rhs_raw,
            "ratio": self.ratio,
            "pass": self.passed,
        }

    def to_dict(self) -> dict:
        out = self.row()
        out["criterion"] = self.criterion
        out["region"] = asdict(self.region)
        out["notes"] = self.notes
        return out


def _params_dict(params: ProblemParams, gamma=None) -> dict:
    d = {"n": params.n, "p": params.p, "eps": params.eps}
    if gamma is not None:
        d["gamma"] = gamma
    return d


def _field(f: ScalarField, values) -> ScalarField:
    return f.with_values(values)


def _grad_hess(u: ScalarField):
    G = gradient(u)
    H = hessian(u)
    g2 = np.einsum("i...,i...->...", G, G)
    lap = np.einsum("ii...->...", H)
    frob = np.einsum("ij...,ij...->...", H, H)
    HG = np.einsum("ij...,j...->i...", H, G)
    return G, H, g2, lap, frob, HG


def require_gamma(n, p, gamma):
    thr = C.gamma_threshold(n, p)
    if not gamma < thr:
        raise ParameterRangeError(
            f"gamma={gamma} is not below the threshold gamma_(n,p)={thr:.12g} for n={n}, p={p}; "
            "no bound is available there",
            f"gamma < min(p + n/(n-1), 3 + (p-1)/(n-1)) = {thr:.12g}",
        )
    return thr


# ---------------------------------------------------------------------------
# Divergence identity


def divergence_identity_report(f: ScalarField, region: Region, cutoff=None, cap=None) -> EstimateReport:
    """Both sides of  int (|D^2f|^2 - (Df)^2) phi^2 = -int (D^2f Df - Df Df) . D(phi^2).

    ``cutoff`` is ``(phi, dphi)``; by default the bump for ``region``. The
    pass cap on the relative identity error defaults to ``50 h^2``.
    """
    phi, dphi = bump_cutoff(f, region) if cutoff is None else cutoff
    G, H, g2, lap, frob, HG = _grad_hess(f)
    support = region.doubled()
    lhs = integrate(_field(f, (frob - lap * lap) * phi * phi), support)
    vec = HG - lap * G
    dphi2 = 2 * phi * dphi
    rhs = -integrate(_field(f, np.einsum("i...,i...->...", vec, dphi2)), support)
    denom = max(abs(lhs), abs(rhs))
    rel = abs(lhs - rhs) / denom if denom > 0 else abs(lhs - rhs)
    cap = 50 * f.h ** 2 if cap is None else cap
    return EstimateReport(
        name="divergence_identity",
        lhs=lhs,
        rhs_raw=rhs,
        params={"n": f.n},
        region=region,
        h=f.h,
        passed=bool(rel <= cap),
        criterion=f"relative identity error <= {cap:.3e}",
        notes={"abs_error": abs(lhs - rhs), "rel_error": rel, "ball_shape": BALL_NOTE},
    )


# ---------------------------------------------------------------------------
# Integral estimates


def gradient_power_report(u: ScalarField, params: ProblemParams, gamma: float, region: Region) -> EstimateReport:
    """int_B |D[(|Du|^2+eps)^((p-gamma)/4) Du]|^2  against  r^-2 int_2B (|Du|^2+eps)^((p-gamma+2)/2)."""
    thr = require_gamma(params.n, params.p, gamma)
    G = gradient(u)
    w = np.einsum("i...,i...->...", G, G) + params.eps
    V = w ** ((params.p - gamma) / 4) * G
    DV = vector_gradient(V, u.h)
    lhs = integrate(_field(u, np.einsum("ij...,ij...->...", DV, DV)), region)
    rhs = integrate(_field(u, w ** ((params.p - gamma + 2) / 2)), region.doubled()) / region.radius ** 2
    return EstimateReport(
        name="gradient_power_w12",
        lhs=lhs,
        rhs_raw=rhs,
        params=_params_dict(params, gamma),
        region=region,
        h=u.h,
        criterion="ratio bounded across refinements",
        notes={"gamma_threshold": thr, "ball_shape": BALL_NOTE},
    )


def weighted_energy_report(u: ScalarField, params: ProblemParams, gamma: float, region: Region,
                           cutoff=None) -> EstimateReport:
    """Weighted |D^2u Du|^2 and (Du)^2 energies against int (|Du|^2+eps)^((p-gamma+2)/2) |Dphi|^2."""
    thr = require_gamma(params.n, params.p, gamma)
    phi, dphi = bump_cutoff(u, region) if cutoff is None else cutoff
    G, H, g2, lap, frob, HG = _grad_hess(u)
    w = g2 + params.eps
    weight = w ** ((params.p - gamma) / 2) * phi * phi
    hg2 = np.einsum("i...,i...->...", HG, HG)
    support = region.doubled()
    lhs = integrate(_field(u, (hg2 / w + lap * lap) * weight), support)
    dphi2 = np.einsum("i...,i...->...", dphi, dphi)
    rhs = integrate(_field(u, w ** ((params.p - gamma + 2) / 2) * dphi2), support)
    notes = {"gamma_threshold": thr, "ball_shape": BALL_NOTE}
    if params.p != 2:
        notes["c_coefficient"] = C.c_coefficient(params.n, params.p, gamma)
    return EstimateReport(
        name="weighted_energy",
        lhs=lhs,
        rhs_raw=rhs,
        params=_params_dict(params, gamma),
        region=region,
        h=u.h,
        criterion="ratio bounded across refinements",
        notes=notes,
    )


def refinement_boundedness(reports, cap: float = 2.0) -> bool:
    """Mark a coarse-to-fine sequence: pass iff ratio(finest) <= cap * ratio(coarsest)."""
    reports = sorted(reports, key=lambda r: -r.h)
    first, last = reports[0].ratio, reports[-1].ratio
    ok = bool(np.isfinite(last) and last <= cap * first) if first > 0 else bool(last == 0)
    for r in reports:
        r.passed = ok
        r.criterion = f"ratio(finest) <= {cap:g} x ratio(coarsest)"
        r.notes["ratio_coarsest"] = first
        r.notes["ratio_finest"] = last
    return ok


# ---------------------------------------------------------------------------
# Pointwise estimates


def sign_bound_margin(u: ScalarField, params: ProblemParams) -> np.ndarray:
    """(|D^2u|^2 - (Du)^2) - |D^2u|^2 / K_(n,p), pointwise."""
    K = C.k_constant(params.n, params.p)
    H = hessian(u)
    lap = np.einsum("ii...->...", H)
    frob = np.einsum("ij...,ij...->...", H, H)
    return (frob - lap * lap) - frob / K


def sign_bound_report(u: ScalarField, params: ProblemParams, region: Region,
                      c1: float = 10.0, c2: float = 10.0) -> EstimateReport:
    """Pass iff the pointwise margin stays >= -(c1 h + c2 eps) on the region."""
    lim = C.sign_bound_limit(params.n)
    if not 1 < params.p < lim:
        raise ParameterRangeError(
            f"the Hessian sign bound needs 1 < p < 3 + 2/(n-2) = {lim:g}; got p={params.p}, n={params.n}",
            "1 < p < 3 + 2/(n-2)",
        )
    margin = sign_bound_margin(u, params)[region_mask(u, region)]
    if not np.all(np.isfinite(margin)):
        raise ValueError("margin not finite inside the region")
    tol = c1 * u.h + c2 * params.eps
    worst = float(margin.min())
    return EstimateReport(
        name="hessian_sign_bound",
        lhs=max(0.0, -worst),
        rhs_raw=tol,
        params=_params_dict(params),
        region=region,
        h=u.h,
        passed=bool(worst >= -tol),
        criterion=f"min margin >= -({c1:g} h + {c2:g} eps)",
        notes={"min_margin": worst, "max_margin": float(margin.max()),
               "k_constant": C.k_constant(params.n, params.p), "tol": tol},
    )


def quasiregular_margin(u: ScalarField, p: float) -> np.ndarray:
    """|D^2u|^2 + ((p-1)^2 + 1)/(p-1) det D^2u, pointwise (planar fields)."""
    if u.n != 2:
        raise ValueError("the quasiregularity bound is planar (n = 2)")
    H = hessian(u)
    frob = np.einsum("ij...,ij...->...", H, H)
    det = H[0, 0] * H[1, 1] - H[0, 1] * H[1, 0]
    return frob + ((p - 1) ** 2 + 1) / (p - 1) * det


def quasiregular_2d_report(u: ScalarField, p: float, region: Region, eps: float = 0.0,
                           c1: float = 10.0, c2: float = 10.0) -> EstimateReport:
    """Pass iff the pointwise excess stays <= c1 h + c2 eps on the region."""
    if u.n != 2:
        raise ValueError(f"the quasiregularity bound is planar (n = 2); got n={u.n}")
    if not p > 1:
        raise ParameterRangeError("p must exceed 1", "p > 1")
    excess = quasiregular_margin(u, p)[region_mask(u, region)]
    if not np.all(np.isfinite(excess)):
        raise ValueError("excess not finite inside the region")
    tol = c1 * u.h + c2 * eps
    worst = float(excess.max())
    return EstimateReport(
        name="planar_quasiregularity",
        lhs=max(0.0, worst),
        rhs_raw=tol,
        params={"n": 2, "p": p, "eps": eps},
        region=region,
        h=u.h,
        passed=bool(worst <= tol),
        criterion=f"max excess <= {c1:g} h + {c2:g} eps",
        notes={"max_excess": worst, "min_excess": float(excess.min()), "tol": tol},
    )


# ---------------------------------------------------------------------------
# Parabolic estimates


def _time_derivative(u: SpaceTimeField) -> np.ndarray:
    out = np.full(u.values.shape, np.nan)
    out[:-1] = np.diff(u.values, axis=0) / u.dt
    return out


def _layer_derivatives(u: SpaceTimeField):
    G = np.stack([gradient(u.layer(k)) for k in range(u.steps + 1)])
    H = np.stack([hessian(u.layer(k)) for k in range(u.steps + 1)])
    return G, H


def parabolic_report(u: SpaceTimeField, params: ProblemParams, kind: str, region: Region,
                     part: str = "hessian") -> EstimateReport:
    """Cylinder estimates for the two parabolic equations.

    ``kind='normalized'``: int_Qr (u_t^2 + |D^2u|^2) vs r^-2 int_Q2r |Du|^2.
    ``kind='divergence'``, ``part='time'``: int_Qr u_t^2 vs
    r^-2 int_Q2r (|Du|^p + |Du|^(2p-2)). ``part='hessian'``: int_Qr |D^2u|^2
    vs r^-2 int_Q2r (|Du|^2 + |Du|^(4-p)).
    """
    n, p = params.n, params.p
    if region.kind != "cylinder":
        raise ValueError("parabolic reports need a cylinder region")
    if kind == "normalized":
        lim = C.sign_bound_limit(n)
        if not 1 < p < lim:
            raise ParameterRangeError(
                f"normalized parabolic estimate needs 1 < p < 3 + 2/(n-2) = {lim:g}; got p={p}",
                "1 < p < 3 + 2/(n-2)",
            )
    elif kind == "divergence":
        if part == "hessian" and not 1 < p < 3:
            raise ParameterRangeError(
                f"the spatial Hessian bound for the parabolic p-Laplacian needs 1 < p < 3; got p={p}",
                "1 < p < 3",
            )
        if part not in ("time", "hessian"):
            raise ValueError(f"part must be 'time' or 'hessian', got {part!r}")
    else:
        raise ValueError(f"kind must be 'normalized' or 'divergence', got {kind!r}")

    G, H = _layer_derivatives(u)
    g2 = np.einsum("ki...,ki...->k...", G, G)
    frob = np.einsum("kij...,kij...->k...", H, H)
    r = region.radius
    big = region.doubled()
    notes = {"ball_shape": BALL_NOTE, "time_derivative": "forward difference between stored layers"}
    if kind == "normalized":
        ut = _time_derivative(u)
        lhs = integrate(u.with_values(ut * ut + frob), region)
        rhs = integrate(u.with_values(g2), big) / r ** 2
        # centered variant with c = mean of Du over Q_2r
        vol = integrate(u.with_values(np.ones_like(g2)), big)
        c = [integrate(u.with_values(G[:, a]), big) / vol for a in range(n)]
        centered = sum((G[:, a] - c[a]) ** 2 for a in range(n))
        notes["rhs_centered"] = integrate(u.with_values(centered), big) / r ** 2
        name = "normalized_parabolic_w22"
    elif part == "time":
        ut = _time_derivative(u)
        lhs = integrate(u.with_values(ut * ut), region)
        gn = np.sqrt(g2)
        rhs = integrate(u.with_values(gn ** p + gn ** (2 * p - 2)), big) / r ** 2
        name = "parabolic_plap_time_l2"
    else:
        lhs = integrate(u.with_values(frob), region)
        gn = np.sqrt(g2)
        rhs = integrate(u.with_values(g2 + gn ** (4 - p)), big) / r ** 2
        name = "parabolic_plap_hessian_l2"
    return EstimateReport(
        name=name,
        lhs=lhs,
        rhs_raw=rhs,
        params=_params_dict(params),
        region=region,
        h=u.h,
        dt=u.dt,
        criterion="ratio bounded across refinements",
        notes=notes,
    )


# ---------------------------------------------------------------------------
# Sharpness of the p < 3 range


@dataclass
class SharpnessScan:
    p: float
    h: list
    values: list
    classification: str
    predicted_exponent: float
    fitted_rate: float = None
    log_slope: float = None
    passed: bool = True
    notes: dict = field(default_factory=dict)

    def rows(self):
        return [{"level": k, "h": h, "hessian_sq_integral": v}
                for k, (h, v) in enumerate(zip(self.h, self.values))]


def hessian_square_integral(p: float, h: float, half_width: float = 1.0, duration: float = 1.0) -> float:
    """int over (0, duration) x [-L, L]^2 of |D^2 w_h|^2 for the sharpness solution.

    w_h is w sampled on a grid with nodes on the axis x_1 = 0. D^2 w does not
    depend on t, so the time integral is a factor ``duration``.
    """
    w = exact_sharpness_solution(p)
    m = int(round(half_width / h)) + 2
    shape = (2 * m + 1, 2 * m + 1)
    origin = (-m * h, -m * h)
    f = ScalarField.from_function(lambda *X: w(0.0, *X), shape, h, origin)
    H = hessian(f)
    frob = np.einsum("ij...,ij...->...", H, H)
    return duration * integrate(f.with_values(frob), Region.ball((0.0, 0.0), half_width))


def sharpness_scan(p: float, levels: int = 5, h0: float = 1 / 16, half_width: float = 1.0,
                   duration: float = 1.0) -> SharpnessScan:
    """Discrete int |D^2 w_h|^2 on dyadic grids and a convergent/divergent verdict.

    The continuum integrand behaves like |x_1|^(2(2-p)/(p-1)), so the sum
    converges for p < 3, grows like log(1/h) at p = 3 and like
    h^-(2(p-2)/(p-1) - 1) beyond.
    """
    if levels < 3:
        raise ValueError("need at least 3 levels")
    hs = [h0 / 2 ** k for k in range(levels)]
    vals = [hessian_square_integral(p, h, half_width, duration) for h in hs]
    predicted = 2 * (p - 2) / (p - 1) - 1
    inc = np.diff(vals)
    ratios = inc[1:] / inc[:-1]
    logs = np.log(1 / np.asarray(hs))
    slope = float(np.polyfit(logs, vals, 1)[0])
    rates = np.log2(ratios)
    rate = float(np.mean(rates[-2:])) if np.all(ratios > 0) else float("nan")
    notes = {"increments": inc.tolist(), "increment_ratios": ratios.tolist()}
    if abs(inc[-1]) <= 0.1 * abs(vals[-1]) and abs(ratios[-1]) < 1 - 0.05:
        verdict = "convergent"
        passed = predicted < 0
    elif np.all(np.abs(ratios - 1) <= 0.07):
        verdict = "log-divergent"
        passed = bool(np.all(np.abs(inc - slope * math.log(2)) <= 0.25 * abs(slope) * math.log(2)))
    elif np.all(ratios > 1):
        verdict = "divergent"
        passed = predicted > 0 and abs(rate - predicted) <= 0.2 * predicted
    else:
        verdict = "inconclusive"
        passed = False
    notes["monotone_increasing"] = bool(np.all(inc > 0))
    return SharpnessScan(p, hs, vals, verdict, predicted, rate, slope, passed, notes)


# ---------------------------------------------------------------------------
# Sign change of |D^2w|^2 - (Dw)^2 for an infinity-harmonic function in 3D

#: coefficient obtained by differentiating w twice; see ``sign_change_probe``.
SIGN_CHANGE_COEFFICIENT = 2.0 ** (1.0 / 3.0)


def infinity_harmonic_w(x1, x2, x3):
    """w = 2^(1/3) x1^(4/3) - x2^(4/3) - x3^(4/3) on the positive octant."""
    return 2 ** (1 / 3) * x1 ** (4 / 3) - x2 ** (4 / 3) - x3 ** (4 / 3)


def sign_change_probe(points, coefficient: float = SIGN_CHANGE_COEFFICIENT) -> np.ndarray:
    """Q(x) = (32/81) c x1^(-2/3) (x2^(-2/3) + x3^(-2/3)) - (32/81) x2^(-2/3) x3^(-2/3).

    With c = 2^(1/3) this equals |D^2w|^2 - (Dw)^2 for :func:`infinity_harmonic_w`
    (w_11 = (4/9) 2^(1/3) x1^(-2/3), w_22 = -(4/9) x2^(-2/3), w_33 = -(4/9) x3^(-2/3)).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.shape[1] != 3:
        raise ValueError("sample points must be 3-vectors")
    if np.any(pts <= 0):
        raise ValueError("all coordinates must be positive")
    a, b, c = (pts[:, i] ** (-2 / 3) for i in range(3))
    return 32 / 81 * coefficient * a * (b + c) - 32 / 81 * b * c


def sign_change_discrete(point, h: float) -> float:
    """|D^2w|^2 - (Dw)^2 from the discrete Hessian on a 3x3x3 stencil at ``point``."""
    x = np.asarray(point, dtype=float)
    if np.any(x - h <= 0):
        raise ValueError("stencil leaves the positive octant")
    f = ScalarField.from_function(infinity_harmonic_w, (3, 3, 3), h, tuple(x - h))
    H = hessian(f)[:, :, 1, 1, 1]
    return float(np.sum(H * H) - np.trace(H) ** 2)
