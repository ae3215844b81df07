"""Explicit time stepping for the two regularized parabolic equations.

* normalized:  u_t = Du + (p-2) D_inf u / (|Du|^2 + eps)   (nondivergence form)
* divergence:  u_t = div((|Du|^2 + eps)^((p-2)/2) Du)       (conservative form)

Both use forward Euler with Dirichlet lateral data. At p = 2 both reduce to
the same 5-point (7-point in 3D) heat stepper.
"""

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from . import _kernels
from .constants import ProblemParams, stable_dt
from .grid import ScalarField, SpaceTimeField


class StabilityError(RuntimeError):
    """Explicit update blew past the data bounds or produced non-finite values."""

    def __init__(self, message, step=None, time=None):
        super().__init__(message)
        self.step = step
        self.time = time


@dataclass
class ParabolicProblem:
    """Initial data ``initial(*X)``; lateral data ``boundary(t, *X)``.

    With ``boundary=None`` the lateral values stay at their initial values.
    ``dt=None`` selects the stability policy; an explicit ``dt`` may only be
    smaller. ``max_layers`` caps how many time layers are stored.
    """

    params: ProblemParams
    kind: str
    shape: tuple
    h: float
    T: float
    initial: Callable
    boundary: Callable = None
    origin: tuple = None
    dt: float = None
    max_layers: int = 101
    growth_tol: float = 1e-6

    def __post_init__(self):
        if self.kind not in ("normalized", "divergence"):
            raise ValueError(f"kind must be 'normalized' or 'divergence', got {self.kind!r}")
        if not self.params.eps > 0:
            raise ValueError("the solvers address only eps > 0")
        if not self.T > 0:
            raise ValueError("final time T must be positive")
        if min(self.shape) < 3:
            raise ValueError("need at least 3 grid points per axis")


class StepRecord(NamedTuple):
    step: int
    time: float
    sup_norm: float
    energy: float


class ParabolicResult(NamedTuple):
    field: SpaceTimeField
    log: list


def _ring(shape):
    m = np.ones(shape, dtype=bool)
    m[tuple([slice(1, -1)] * len(shape))] = False
    return m


def _energy(u, h, p):
    """h^n * sum over interior nodes of |Du|^p (central differences)."""
    ndim = u.ndim
    g2 = 0.0
    for a in range(ndim):
        hi = [slice(1, -1)] * ndim
        lo = [slice(1, -1)] * ndim
        hi[a] = slice(2, None)
        lo[a] = slice(0, -2)
        d = (u[tuple(hi)] - u[tuple(lo)]) / (2 * h)
        g2 = g2 + d * d
    return float(np.sum(g2 ** (0.5 * p))) * h ** ndim


def time_step(problem: ParabolicProblem) -> float:
    """Largest admissible dt for ``problem`` (before rounding to hit T)."""
    dt = stable_dt(problem.params, problem.h)
    if problem.kind == "divergence":
        template = ScalarField(np.zeros(problem.shape), problem.h, problem.origin)
        u0 = np.broadcast_to(problem.initial(*template.coords()), problem.shape).astype(float)
        K = _kernels.face_coefficients(u0, problem.h, problem.params.p, problem.params.eps)
        kmax = max(float(k.max()) for k in K)
        dt = dt / max(1.0, kmax)
    if problem.dt is not None:
        if problem.dt > dt * (1 + 1e-12):
            raise StabilityError(f"requested dt={problem.dt:g} exceeds the stability bound {dt:g}")
        dt = problem.dt
    return dt


def _run(problem: ParabolicProblem, rhs) -> ParabolicResult:
    params, h = problem.params, problem.h
    template = ScalarField(np.zeros(problem.shape), h, problem.origin)
    X = template.coords()
    u = np.broadcast_to(problem.initial(*X), problem.shape).astype(float).copy()
    ring = _ring(problem.shape)
    inner = tuple([slice(1, -1)] * len(problem.shape))

    def lateral(t):
        if problem.boundary is None:
            return None
        return np.broadcast_to(problem.boundary(t, *X), problem.shape)[ring]

    if problem.boundary is not None:
        u[ring] = lateral(0.0)
    frozen = u[ring].copy()

    dt_max = time_step(problem)
    nsteps = max(1, math.ceil(problem.T / dt_max - 1e-9))
    stride = max(1, math.ceil(nsteps / max(1, problem.max_layers - 1)))
    nsteps = stride * math.ceil(nsteps / stride)
    dt = problem.T / nsteps

    bound = float(np.abs(u).max())
    layers = [u.copy()]
    log = [StepRecord(0, 0.0, float(np.abs(u).max()), _energy(u, h, params.p))]
    for k in range(1, nsteps + 1):
        t = k * dt
        u[inner] += dt * rhs(u)
        u[ring] = frozen if problem.boundary is None else lateral(t)
        bound = max(bound, float(np.abs(u[ring]).max()))
        sup = float(np.abs(u).max())
        if not np.isfinite(sup):
            raise StabilityError(f"non-finite values at step {k} (t={t:.6g})", k, t)
        if sup > bound * (1 + problem.growth_tol) + problem.growth_tol:
            raise StabilityError(
                f"sup-norm {sup:.6g} exceeds data bound {bound:.6g} at step {k} (t={t:.6g})", k, t
            )
        log.append(StepRecord(k, t, sup, _energy(u, h, params.p)))
        if k % stride == 0:
            layers.append(u.copy())
    field = SpaceTimeField(np.stack(layers), h, dt * stride, problem.origin)
    return ParabolicResult(field, log)


def solve_normalized(problem: ParabolicProblem) -> ParabolicResult:
    if problem.kind != "normalized":
        raise ValueError("solve_normalized needs kind='normalized'")
    p, eps, h = problem.params.p, problem.params.eps, problem.h
    return _run(problem, lambda u: _kernels.normalized_operator(u, h, p, eps))


def solve_divergence(problem: ParabolicProblem) -> ParabolicResult:
    if problem.kind != "divergence":
        raise ValueError("solve_divergence needs kind='divergence'")
    p, eps, h = problem.params.p, problem.params.eps, problem.h

    def rhs(u):
        K = _kernels.face_coefficients(u, h, p, eps)
        return _kernels.flux_divergence(u, K, h)

    return _run(problem, rhs)


def solve(problem: ParabolicProblem) -> ParabolicResult:
    if problem.kind == "normalized":
        return solve_normalized(problem)
    return solve_divergence(problem)


def exact_sharpness_solution(p: float):
    """w(t, x) = (p/(p-1))^(p-1) t + |x_1|^(p/(p-1)), a solution of u_t = Delta_p u.

    Away from x_1 = 0 the flux |w_1|^(p-2) w_1 equals (p/(p-1))^(p-1) x_1,
    whose x_1-derivative is the constant w_t. The Hessian has the single
    entry w_11 = C |x_1|^((2-p)/(p-1)) with C = p/(p-1)^2.
    """
    if not p > 1:
        raise ValueError("p must exceed 1")
    rate = (p / (p - 1)) ** (p - 1)
    beta = p / (p - 1)

    def w(t, *X):
        return rate * t + np.abs(X[0]) ** beta

    w.time_rate = rate
    w.exponent = beta
    w.hessian_coefficient = p / (p - 1) ** 2
    w.hessian_exponent = (2 - p) / (p - 1)
    return w
