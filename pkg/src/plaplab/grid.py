"""Uniform-grid fields, central-difference operators and region integrals.

Derivative arrays have the same spatial shape as the field; entries whose
stencil would leave the grid are NaN. Region integrals refuse regions
that come within one cell of the grid edge and refuse any NaN inside the
region, so boundary pollution cannot leak into a reported number.
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np


class RegionError(ValueError):
    """Region (or its required margin) is not inside the valid interior."""


@dataclass(frozen=True)
class ScalarField:
    """Grid function on a uniform grid with spacing ``h`` in every axis."""

    values: np.ndarray
    h: float
    origin: tuple = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim < 1 or v.ndim > 3:
            raise ValueError(f"fields must be 1D, 2D or 3D, got ndim={v.ndim}")
        if not self.h > 0:
            raise ValueError(f"grid spacing must be positive, got {self.h!r}")
        origin = (0.0,) * v.ndim if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != v.ndim:
            raise ValueError("origin length must equal the field dimension")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", origin)

    @property
    def n(self) -> int:
        return self.values.ndim

    @property
    def shape(self) -> tuple:
        return self.values.shape

    def axes(self):
        return [o + self.h * np.arange(s) for o, s in zip(self.origin, self.shape)]

    def coords(self):
        """Coordinate arrays, one per axis, with ``indexing='ij'``."""
        return np.meshgrid(*self.axes(), indexing="ij")

    def with_values(self, values) -> "ScalarField":
        values = np.asarray(values, dtype=float)
        if values.shape != self.shape:
            raise ValueError(f"shape {values.shape} does not match grid {self.shape}")
        return replace(self, values=values)

    @classmethod
    def from_function(cls, fn, shape, h, origin=None) -> "ScalarField":
        """Sample ``fn(*coords)`` on the grid."""
        shape = tuple(int(s) for s in shape)
        template = cls(np.zeros(shape), h, origin)
        X = template.coords()
        return template.with_values(np.broadcast_to(fn(*X), shape).astype(float))


@dataclass(frozen=True)
class SpaceTimeField:
    """Layers ``values[k]`` at times ``t0 + k*dt`` on a fixed spatial grid."""

    values: np.ndarray
    h: float
    dt: float
    origin: tuple = None
    t0: float = 0.0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim < 2:
            raise ValueError("space-time values need a time axis plus 1-3 space axes")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt!r}")
        space = ScalarField(v[0], self.h, self.origin)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "origin", space.origin)

    @property
    def steps(self) -> int:
        return self.values.shape[0] - 1

    @property
    def n(self) -> int:
        return self.values.ndim - 1

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.steps + 1)

    def layer(self, k) -> ScalarField:
        return ScalarField(self.values[k], self.h, self.origin)

    def with_values(self, values) -> "SpaceTimeField":
        values = np.asarray(values, dtype=float)
        if values.shape != self.values.shape:
            raise ValueError("shape mismatch")
        return replace(self, values=values)


@dataclass(frozen=True)
class Region:
    """Sup-norm ball B(z, r), or the cylinder (s - r^2, s) x B(z, r)."""

    center: tuple
    radius: float
    time: float = None
    kind: str = field(default="ball")

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError(f"region radius must be positive, got {self.radius!r}")
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        kind = "ball" if self.time is None else "cylinder"
        object.__setattr__(self, "kind", kind)

    @classmethod
    def ball(cls, center, radius):
        return cls(center, radius)

    @classmethod
    def cylinder(cls, center, radius, time):
        return cls(center, radius, float(time))

    def doubled(self) -> "Region":
        return replace(self, radius=2 * self.radius)

    def translated(self, shift) -> "Region":
        return replace(self, center=tuple(c + s for c, s in zip(self.center, shift)))


# ---------------------------------------------------------------------------
# Differential operators


def _check_shape(f: ScalarField):
    if min(f.shape) < 3:
        raise ValueError(f"central differences need at least 3 points per axis, got {f.shape}")


def _shifted(u, axis, offset):
    idx = [slice(1, -1)] * u.ndim
    idx[axis] = slice(1 + offset, u.shape[axis] - 1 + offset)
    return u[tuple(idx)]


def gradient(f: ScalarField) -> np.ndarray:
    """Central-difference gradient, shape ``(n, *f.shape)``; NaN on the boundary ring."""
    _check_shape(f)
    u, h = f.values, f.h
    out = np.full((f.n,) + f.shape, np.nan)
    inner = (slice(None),) + tuple([slice(1, -1)] * f.n)
    out[inner] = np.stack([(_shifted(u, a, 1) - _shifted(u, a, -1)) / (2 * h) for a in range(f.n)])
    return out


def hessian(f: ScalarField) -> np.ndarray:
    """Second central differences, shape ``(n, n, *f.shape)``, exactly symmetric.

    Mixed entries use the 4-point cross stencil.
    """
    _check_shape(f)
    u, h = f.values, f.h
    n = f.n
    out = np.full((n, n) + f.shape, np.nan)
    inner = tuple([slice(1, -1)] * n)
    c = u[inner]
    for a in range(n):
        out[(a, a) + inner] = (_shifted(u, a, 1) - 2 * c + _shifted(u, a, -1)) / (h * h)
        for b in range(a + 1, n):
            quad = {}
            for sa in (1, -1):
                for sb in (1, -1):
                    idx = [slice(1, -1)] * n
                    idx[a] = slice(1 + sa, u.shape[a] - 1 + sa)
                    idx[b] = slice(1 + sb, u.shape[b] - 1 + sb)
                    quad[sa, sb] = u[tuple(idx)]
            mixed = (quad[1, 1] - quad[1, -1] - quad[-1, 1] + quad[-1, -1]) / (4 * h * h)
            out[(a, b) + inner] = mixed
            out[(b, a) + inner] = mixed
    return out


def vector_gradient(V: np.ndarray, h: float) -> np.ndarray:
    """Central-difference Jacobian of a vector field ``V`` of shape ``(m, *shape)``.

    Returns shape ``(m, n, *shape)``; NaN wherever V is NaN or the stencil
    leaves the grid.
    """
    return np.stack([gradient(ScalarField(Vi, h)) for Vi in V])


# ---------------------------------------------------------------------------
# Region integrals


def _overlap_weights(axis_coords, h, lo, hi):
    """Length of [x - h/2, x + h/2] intersected with [lo, hi] for every node."""
    left = np.maximum(axis_coords - 0.5 * h, lo)
    right = np.minimum(axis_coords + 0.5 * h, hi)
    return np.clip(right - left, 0.0, None)


def _space_weights(axes, h, region: Region):
    tiny = 1e-9 * h
    ws = []
    for ax, z in zip(axes, region.center):
        lo, hi = z - region.radius, z + region.radius
        # region plus a one-cell margin must sit inside the derivative-valid nodes
        if lo - h < ax[1] - tiny or hi + h > ax[-2] + tiny:
            raise RegionError(
                f"region [{lo:.6g}, {hi:.6g}] plus one cell exceeds the valid interior "
                f"[{ax[1]:.6g}, {ax[-2]:.6g}]"
            )
        ws.append(_overlap_weights(ax, h, lo, hi))
    return ws


def _outer(ws):
    w = ws[0]
    for wi in ws[1:]:
        w = np.multiply.outer(w, wi)
    return w


def _fsum_weighted(values, weights):
    mask = weights > 0
    vals = values[mask]
    if not np.all(np.isfinite(vals)):
        raise RegionError("integrand is not finite (invalid stencil points) inside the region")
    return math.fsum((vals * weights[mask]).tolist())


def integrate(g, region: Region) -> float:
    """Midpoint-rule integral of a field over a ball-box or cylinder.

    Each node carries the measure of its cell intersected with the region,
    so aligned boxes get exact volume and disjoint boxes add up. Summation
    is exactly rounded (``math.fsum``) in fixed C order.
    """
    if isinstance(g, SpaceTimeField):
        if region.kind != "cylinder":
            raise RegionError("space-time integrals need a cylinder region")
        space = ScalarField(g.values[0], g.h, g.origin)
        ws = _space_weights(space.axes(), g.h, region)
        t = g.times
        lo, hi = region.time - region.radius ** 2, region.time
        tiny = 1e-9 * g.dt
        if lo < t[0] - tiny or hi > t[-1] + tiny:
            raise RegionError(f"time interval ({lo:.6g}, {hi:.6g}) outside [{t[0]:.6g}, {t[-1]:.6g}]")
        wt = _overlap_weights(t, g.dt, lo, hi)
        return _fsum_weighted(g.values, _outer([wt] + ws))
    if region.kind != "ball":
        raise RegionError("spatial integrals need a ball region")
    ws = _space_weights(g.axes(), g.h, region)
    return _fsum_weighted(g.values, _outer(ws))


def region_mask(f: ScalarField, region: Region) -> np.ndarray:
    """Boolean mask of nodes whose cells meet ``region`` (same margin rules as integrate)."""
    if region.kind != "ball":
        raise RegionError("pointwise scans need a ball region")
    return _outer(_space_weights(f.axes(), f.h, region)) > 0


def lq_norm(g, region: Region, q: float) -> float:
    if not q > 0:
        raise ValueError(f"q must be positive, got {q!r}")
    absq = np.abs(g.values) ** q
    return integrate(g.with_values(absq), region) ** (1.0 / q)


# ---------------------------------------------------------------------------
# Cutoff


def _bump(t):
    """1 on |t| <= 1, C^1 cubic down to 0 on 1 < |t| < 2; returns (psi, dpsi/dt)."""
    a = np.abs(t)
    s = np.clip(2.0 - a, 0.0, 1.0)
    psi = np.where(a <= 1.0, 1.0, 3 * s * s - 2 * s ** 3)
    dpsi = np.where((a > 1.0) & (a < 2.0), -(6 * s - 6 * s * s) * np.sign(t), 0.0)
    return psi, dpsi


def bump_cutoff(f: ScalarField, region: Region):
    """Tensor-product cutoff for ``region``: 1 on B(z, r), 0 outside B(z, 2r).

    Returns ``(phi, dphi)`` with ``dphi`` of shape ``(n, *shape)``;
    |dphi| <= C/r.
    """
    X = f.coords()
    r = region.radius
    parts = [_bump((x - z) / r) for x, z in zip(X, region.center)]
    phi = np.ones(f.shape)
    for psi, _ in parts:
        phi = phi * psi
    dphi = []
    for a in range(f.n):
        d = parts[a][1] / r
        for b in range(f.n):
            if b != a:
                d = d * parts[b][0]
        dphi.append(d)
    return phi, np.stack(dphi)
