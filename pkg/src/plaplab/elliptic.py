"""Regularized p-Laplace equation div((|Du|^2 + eps)^((p-2)/2) Du) = 0 on a box.

Conservative finite differences with face-centered coefficients; the
nonlinearity is handled by damped Picard iteration around a Jacobi
preconditioned conjugate-gradient solve of the frozen-coefficient problem.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .constants import ProblemParams
from .grid import ScalarField, gradient, hessian

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Outer or inner iteration failed; ``history`` holds the residual log."""

    def __init__(self, message, history=None):
        super().__init__(message)
        self.history = history or []


@dataclass
class EllipticProblem:
    params: ProblemParams
    shape: tuple
    h: float
    boundary: Callable
    origin: tuple = None
    theta: float = 0.5
    picard_tol: float = 1e-8
    max_iter: int = 500
    cg_tol: float = 1e-10
    cg_max_iter: int = 20000
    residual_tol: float = 1e-6

    def __post_init__(self):
        if not self.params.eps > 0:
            raise ValueError("the solver addresses only eps > 0")
        if not 0 < self.theta <= 1:
            raise ValueError(f"damping theta must lie in (0, 1], got {self.theta!r}")
        if min(self.shape) < 3:
            raise ValueError("need at least 3 grid points per axis")


class PicardStep(NamedTuple):
    iteration: int
    update: float
    residual: float
    cg_iterations: int


@dataclass
class ConvergenceLog:
    """Per-iteration record; ``residual`` is max|div(K Du)| h^2 / max K."""

    steps: list = field(default_factory=list)
    converged: bool = False

    def as_rows(self):
        return [s._asdict() for s in self.steps]


class SolveResult(NamedTuple):
    field: ScalarField
    log: ConvergenceLog


# ---------------------------------------------------------------------------
# Linear solve with frozen face coefficients


def _embed(x, shape):
    u = np.zeros(shape)
    u[tuple([slice(1, -1)] * len(shape))] = x
    return u


def _jacobi_diagonal(K, h):
    ndim = len(K)
    diag = 0.0
    for a in range(ndim):
        hi = [slice(None)] * ndim
        lo = [slice(None)] * ndim
        hi[a] = slice(1, None)
        lo[a] = slice(0, -1)
        diag = diag + K[a][tuple(hi)] + K[a][tuple(lo)]
    return diag / (h * h)


def pcg(apply_A, b, x0, diag, tol=1e-10, max_iter=20000):
    """Jacobi-preconditioned conjugate gradients; stops at ||r|| <= tol ||b||.

    Returns ``(x, iterations)``.
    """
    x = x0.copy()
    r = b - apply_A(x)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        bnorm = 1.0
    inv_diag = 1.0 / diag
    z = inv_diag * r
    d = z.copy()
    rz = np.vdot(r, z)
    for k in range(max_iter):
        if np.linalg.norm(r) <= tol * bnorm:
            return x, k
        Ad = apply_A(d)
        alpha = rz / np.vdot(d, Ad)
        x += alpha * d
        r -= alpha * Ad
        z = inv_diag * r
        rz_new = np.vdot(r, z)
        d = z + (rz_new / rz) * d
        rz = rz_new
    if np.linalg.norm(r) <= tol * bnorm:
        return x, max_iter
    raise ConvergenceError(
        f"PCG did not reach relative residual {tol:g} in {max_iter} iterations "
        f"(at {np.linalg.norm(r) / bnorm:.3e})"
    )


def solve_frozen(u, K, h, tol=1e-10, max_iter=20000):
    """Solve div(K Dv) = 0 with v = u on the boundary; ``u`` interior is the initial guess."""
    shape = u.shape
    g = u.copy()
    inner = tuple([slice(1, -1)] * u.ndim)
    g[inner] = 0.0
    b = _kernels.flux_divergence(g, K, h)

    def apply_A(x):
        return -_kernels.flux_divergence(_embed(x, shape), K, h)

    x, its = pcg(apply_A, b, u[inner].copy(), _jacobi_diagonal(K, h), tol, max_iter)
    out = g
    out[inner] = x
    return out, its


# ---------------------------------------------------------------------------
# Residuals


def conservative_residual(f: ScalarField, params: ProblemParams) -> np.ndarray:
    """div((|Du|^2+eps)^((p-2)/2) Du) at interior nodes, with the solver's stencil."""
    K = _kernels.face_coefficients(f.values, f.h, params.p, params.eps)
    return _kernels.flux_divergence(f.values, K, f.h)


def _scaled_residual(u, K, h):
    r = _kernels.flux_divergence(u, K, h)
    kmax = max(float(k.max()) for k in K)
    return float(np.abs(r).max()) * h * h / kmax


def residual(f: ScalarField, params: ProblemParams) -> np.ndarray:
    """Nondivergence residual Du + (p-2) D_inf u / (|Du|^2 + eps), full-shape, NaN on the ring.

    Built from :func:`plaplab.grid.gradient` and :func:`plaplab.grid.hessian`,
    independently of the solver's flux stencil.
    """
    G = gradient(f)
    H = hessian(f)
    lap = np.einsum("ii...->...", H)
    inf = np.einsum("i...,ij...,j...->...", G, H, G)
    g2 = np.einsum("i...,i...->...", G, G)
    return lap + (params.p - 2) * inf / (g2 + params.eps)


# ---------------------------------------------------------------------------
# Solver


def solve(problem: EllipticProblem) -> SolveResult:
    params = problem.params
    template = ScalarField(np.zeros(problem.shape), problem.h, problem.origin)
    X = template.coords()
    u = np.broadcast_to(problem.boundary(*X), problem.shape).astype(float)
    if not np.all(np.isfinite(u[_ring_mask(problem.shape)])):
        raise ValueError("boundary data must be finite")
    inner = tuple([slice(1, -1)] * len(problem.shape))
    u[inner] = 0.0
    h = problem.h
    log_ = ConvergenceLog()

    ones = [np.ones(k.shape) for k in _kernels.face_coefficients(u, h, 2.0, 1.0)]
    u, its = solve_frozen(u, ones, h, problem.cg_tol, problem.cg_max_iter)
    if params.p == 2:
        log_.steps.append(PicardStep(0, 0.0, _scaled_residual(u, ones, h), its))
        log_.converged = True
        return SolveResult(template.with_values(u), log_)

    theta = problem.theta
    for it in range(1, problem.max_iter + 1):
        K = _kernels.face_coefficients(u, h, params.p, params.eps)
        u_star, its = solve_frozen(u, K, h, problem.cg_tol, problem.cg_max_iter)
        u_new = (1 - theta) * u + theta * u_star
        if not np.all(np.isfinite(u_new)):
            raise ConvergenceError(f"NaN/inf in Picard iterate {it}", log_.as_rows())
        scale = max(float(np.abs(u_new).max()), 1e-300)
        update = float(np.abs(u_new - u).max()) / scale
        u = u_new
        res = _scaled_residual(u, _kernels.face_coefficients(u, h, params.p, params.eps), h)
        log_.steps.append(PicardStep(it, update, res, its))
        log.debug("picard %d: update %.3e residual %.3e cg %d", it, update, res, its)
        if update <= problem.picard_tol:
            if res > problem.residual_tol:
                raise ConvergenceError(
                    f"update converged but scaled residual {res:.3e} exceeds {problem.residual_tol:g}",
                    log_.as_rows(),
                )
            log_.converged = True
            return SolveResult(template.with_values(u), log_)
    raise ConvergenceError(
        f"Picard iteration did not converge in {problem.max_iter} iterations "
        f"(last update {log_.steps[-1].update:.3e})",
        log_.as_rows(),
    )


def _ring_mask(shape):
    m = np.ones(shape, dtype=bool)
    m[tuple([slice(1, -1)] * len(shape))] = False
    return m


# ---------------------------------------------------------------------------
# Reference solutions


def radial_reference(n: int, p: float, center, branch: str = "auto"):
    """Radial p-harmonic function centred at ``center``.

    |x - z|^((p-n)/(p-1)) for p != n, log|x - z| for p = n. Returns a
    callable on coordinate arrays.
    """
    z = np.asarray(center, dtype=float)
    if z.size != n:
        raise ValueError("center must have n coordinates")
    if branch == "auto":
        branch = "log" if p == n else "power"
    if branch == "power" and p == n:
        raise ValueError("the power branch degenerates at p = n; use the log branch")
    alpha = (p - n) / (p - 1)

    def u(*X):
        r2 = sum((x - zi) ** 2 for x, zi in zip(X, z))
        if branch == "log":
            return 0.5 * np.log(r2)
        return r2 ** (0.5 * alpha)

    u.exponent = 0.0 if branch == "log" else alpha
    u.branch = branch
    return u


def boundary_preset(name: str, n: int, p: float, **kw):
    """Named boundary data used by configs: affine, saddle, radial, even_x2."""
    if name == "affine":
        coef = np.asarray(kw.get("coef", [1.0] + [0.0] * (n - 1)), dtype=float)
        c0 = float(kw.get("c0", 0.0))
        return lambda *X: c0 + sum(c * x for c, x in zip(coef, X))
    if name == "saddle":
        return lambda *X: X[0] ** 2 - X[1] ** 2
    if name == "radial":
        center = kw.get("center", [-0.5] * n)
        return radial_reference(n, p, center)
    if name == "even_x2":
        # even in x2; gradient stays away from zero on the symmetry axis
        return lambda *X: X[0] + 0.25 * X[0] ** 2 - 0.5 * X[1] ** 2
    raise ValueError(f"unknown boundary preset {name!r}")


def radial_benchmark(n: int, p: float, N: int, eps: float = 1e-6, center=None, **knobs) -> SolveResult:
    """Solve on [0, 1]^n (N cells per axis) with radial reference data on the boundary.

    The default centre (-0.5, ..., -0.5) keeps the singularity outside the box.
    """
    center = (-0.5,) * n if center is None else center
    ref = radial_reference(n, p, center)
    problem = EllipticProblem(ProblemParams(n, p, eps), (N + 1,) * n, 1.0 / N, ref, **knobs)
    return solve(problem)
