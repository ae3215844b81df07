"""Pointwise algebra of second-order jets (gradient + symmetric Hessian).

The central object is the structural inequality

    | |H g|^2 - tr(H) (H g . g) - 1/2 (|H|^2 - tr(H)^2) |g|^2 |
        <= (n - 2)/2 (|H|^2 |g|^2 - |H g|^2)

which is an identity when n = 2. ``fundamental_residual`` evaluates both
sides for a single jet, ``batch_residuals`` for many at once.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels

#: Seed used by :func:`random_jets` when none is given.
DEFAULT_SEED = 20240607


@dataclass(frozen=True)
class PointJet:
    """Gradient and Hessian of a function at one point.

    Only the upper triangle of the Hessian is stored, so symmetry holds by
    construction.
    """

    grad: np.ndarray
    hess_upper: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.grad, dtype=float).reshape(-1)
        n = g.size
        tri = np.asarray(self.hess_upper, dtype=float).reshape(-1)
        if n < 1:
            raise ValueError("a jet needs dimension n >= 1")
        if tri.size != n * (n + 1) // 2:
            raise ValueError(
                f"upper triangle has {tri.size} entries, expected {n * (n + 1) // 2} for n={n}"
            )
        g.setflags(write=False)
        tri.setflags(write=False)
        object.__setattr__(self, "grad", g)
        object.__setattr__(self, "hess_upper", tri)

    @classmethod
    def from_matrix(cls, grad, hess):
        """Build a jet from a full matrix; only its upper triangle is read."""
        hess = np.asarray(hess, dtype=float)
        grad = np.asarray(grad, dtype=float).reshape(-1)
        if hess.shape != (grad.size, grad.size):
            raise ValueError(f"hess shape {hess.shape} does not match grad length {grad.size}")
        return cls(grad, hess[np.triu_indices(grad.size)])

    @property
    def n(self) -> int:
        return self.grad.size

    @property
    def hess(self) -> np.ndarray:
        n = self.n
        m = np.zeros((n, n))
        iu = np.triu_indices(n)
        m[iu] = self.hess_upper
        m.T[iu] = self.hess_upper
        return m


@dataclass(frozen=True)
class EigenPair:
    """Eigenvalues of the Hessian and gradient coordinates in its eigenbasis.

    ``avec`` is normalized to unit length when the gradient is nonzero and
    is the zero vector otherwise; ``grad_norm`` keeps the removed length.
    """

    lambdas: np.ndarray
    avec: np.ndarray
    grad_norm: float = 1.0


class Invariants(NamedTuple):
    laplacian: float
    inf_laplacian: float
    hess_grad_sq: float
    hess_frob_sq: float
    grad_sq: float


def invariants(jet: PointJet) -> Invariants:
    """Laplacian, infinity-Laplacian, |H g|^2, |H|^2 and |g|^2 of a jet."""
    H, g = jet.hess, jet.grad
    Hg = H @ g
    return Invariants(
        laplacian=float(np.trace(H)),
        inf_laplacian=float(Hg @ g),
        hess_grad_sq=float(Hg @ Hg),
        hess_frob_sq=float(np.sum(H * H)),
        grad_sq=float(g @ g),
    )


def residual_from_invariants(inv: Invariants, n: int):
    lap, inf, hg2, frob, g2 = inv
    lhs = abs(hg2 - lap * inf - 0.5 * (frob - lap * lap) * g2)
    rhs = 0.5 * (n - 2) * (frob * g2 - hg2)
    return lhs, rhs


def fundamental_residual(jet: PointJet):
    """Return ``(lhs_abs, rhs)`` of the structural inequality at ``jet``."""
    return residual_from_invariants(invariants(jet), jet.n)


def tolerance_scale(jet: PointJet) -> float:
    """max(1, |H|^2 |g|^2): both sides are homogeneous of degree (2, 2)."""
    inv = invariants(jet)
    return max(1.0, inv.hess_frob_sq * inv.grad_sq)


def eigendecompose(jet: PointJet) -> EigenPair:
    """Diagonalize the Hessian and express the unit gradient in its eigenbasis.

    Eigenvalues come back in non-increasing order (stable on ties).
    Eigenvector signs are fixed so that each gradient coordinate is
    non-negative, which makes ``avec`` deterministic.
    """
    H, g = jet.hess, jet.grad
    lam, Q = np.linalg.eigh(H)
    order = np.argsort(-lam, kind="stable")
    lam, Q = lam[order], Q[:, order]

    gnorm = float(np.linalg.norm(g))
    if gnorm == 0.0:
        a = np.zeros_like(g)
    else:
        a = Q.T @ (g / gnorm)
        flip = a < 0
        a[flip] = -a[flip]
        Q[:, flip] = -Q[:, flip]

    recon = (Q * lam) @ Q.T
    if not np.allclose(recon, H, rtol=1e-10, atol=1e-10 * max(1.0, np.abs(H).max())):
        raise np.linalg.LinAlgError("eigendecomposition failed to reproduce the Hessian")
    return EigenPair(lambdas=lam, avec=a, grad_norm=gnorm)


def eigen_reduced_residual(pair: EigenPair, tol: float = 1e-9):
    """Both sides of the inequality in eigen-coordinates, for a unit ``avec``.

    Equals :func:`fundamental_residual` of the jet divided by |g|^2. The zero
    ``avec`` (critical point) gives ``(0, 0)``.
    """
    lam = np.asarray(pair.lambdas, dtype=float)
    a = np.asarray(pair.avec, dtype=float)
    if lam.shape != a.shape:
        raise ValueError("lambdas and avec must have the same length")
    a2 = a * a
    norm2 = float(a2.sum())
    if norm2 == 0.0:
        return 0.0, 0.0
    if abs(norm2 - 1.0) > tol:
        raise ValueError(f"avec must have unit length, got |a|^2 = {norm2!r}")
    n = lam.size
    sum_sq = float(lam @ lam)
    trace = float(lam.sum())
    weighted_sq = float((lam * lam) @ a2)
    lhs = abs(weighted_sq - trace * float(lam @ a2) - 0.5 * (sum_sq - trace * trace))
    rhs = 0.5 * (n - 2) * (sum_sq - weighted_sq)
    return lhs, rhs


def random_jets(n: int, count: int, seed: int = DEFAULT_SEED, low: float = -10.0, high: float = 10.0):
    """Random (H, G) batch with entries uniform in [low, high].

    H is symmetrized by mirroring its upper triangle.
    """
    rng = np.random.default_rng(seed)
    A = rng.uniform(low, high, size=(count, n, n))
    H = np.triu(A) + np.swapaxes(np.triu(A, 1), 1, 2)
    G = rng.uniform(low, high, size=(count, n))
    return H, G


def batch_residuals(H, G):
    """Vectorized ``(lhs_abs, rhs, scale)`` with ``scale = max(1, |H|^2|g|^2)``."""
    lhs, rhs, scale = _kernels.jet_residuals(H, G)
    return lhs, rhs, np.maximum(1.0, scale)


class InequalityCheck(NamedTuple):
    n: int
    samples: int
    seed: int
    max_excess: float
    max_planar: float
    violations: int
    near_equality: int


def check_inequality(n: int, samples: int, seed: int = DEFAULT_SEED, tol: float = 1e-9,
                     planar_tol: float = 1e-12, chunk: int = 200_000) -> InequalityCheck:
    """Sample random jets and measure how close they come to violating the bound.

    ``max_excess`` is the largest ``(lhs - rhs) / scale``; for n = 2,
    ``max_planar`` is the largest ``lhs / scale``. Jets with
    ``|lhs - rhs| <= tol * scale`` and ``rhs > 0`` are counted as
    near-equality cases (recorded, not classified).
    """
    rng = np.random.SeedSequence(seed)
    max_excess = -np.inf
    max_planar = 0.0
    violations = 0
    near = 0
    done = 0
    for child in rng.spawn((samples + chunk - 1) // chunk):
        m = min(chunk, samples - done)
        H, G = random_jets(n, m, seed=child)
        lhs, rhs, scale = batch_residuals(H, G)
        excess = (lhs - rhs) / scale
        max_excess = max(max_excess, float(excess.max()))
        violations += int(np.count_nonzero(excess > tol))
        near += int(np.count_nonzero((np.abs(excess) <= tol) & (rhs > tol * scale)))
        if n == 2:
            worst = float((lhs / scale).max())
            max_planar = max(max_planar, worst)
            violations += int(np.count_nonzero(lhs > planar_tol * scale))
        done += m
    return InequalityCheck(n, samples, seed, max_excess, max_planar, violations, near)
