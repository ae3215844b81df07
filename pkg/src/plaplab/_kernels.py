"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``PLAPLAB_DISABLE_NUMBA`` is unset (or ``0``). Compiled kernels
exist for 2D and 3D grids; 1D grids always take the numpy path.

Every public function here dispatches on ``USE_NUMBA``. The ``*_numpy``
and ``*_numba`` variants are importable directly so tests and the
benchmark can compare them.
"""

import os

import numpy as np

_flag = os.environ.get("PLAPLAB_DISABLE_NUMBA", "").strip().lower()
_disabled = _flag not in ("", "0", "false", "no")

try:
    if _disabled:
        raise ImportError("numba disabled by PLAPLAB_DISABLE_NUMBA")
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA


# ---------------------------------------------------------------------------
# Batched jet residuals


def jet_residuals_numpy(H, G):
    """Return (lhs_abs, rhs, scale) for a batch of jets.

    H has shape (m, n, n), G has shape (m, n).
    """
    n = H.shape[-1]
    Hg = np.einsum("kij,kj->ki", H, G)
    hess_grad_sq = np.einsum("ki,ki->k", Hg, Hg)
    lap = np.einsum("kii->k", H)
    inf_lap = np.einsum("ki,ki->k", Hg, G)
    frob = np.einsum("kij,kij->k", H, H)
    g2 = np.einsum("ki,ki->k", G, G)
    lhs = np.abs(hess_grad_sq - lap * inf_lap - 0.5 * (frob - lap * lap) * g2)
    rhs = 0.5 * (n - 2) * (frob * g2 - hess_grad_sq)
    return lhs, rhs, frob * g2


if HAVE_NUMBA:

    @njit(cache=True)
    def jet_residuals_numba(H, G):
        m, n, _ = H.shape
        lhs = np.empty(m)
        rhs = np.empty(m)
        scale = np.empty(m)
        for k in range(m):
            hg2 = 0.0
            inf_lap = 0.0
            lap = 0.0
            frob = 0.0
            g2 = 0.0
            for i in range(n):
                s = 0.0
                for j in range(n):
                    s += H[k, i, j] * G[k, j]
                    frob += H[k, i, j] * H[k, i, j]
                hg2 += s * s
                inf_lap += s * G[k, i]
                lap += H[k, i, i]
                g2 += G[k, i] * G[k, i]
            lhs[k] = abs(hg2 - lap * inf_lap - 0.5 * (frob - lap * lap) * g2)
            rhs[k] = 0.5 * (n - 2) * (frob * g2 - hg2)
            scale[k] = frob * g2
        return lhs, rhs, scale


def jet_residuals(H, G):
    H = np.ascontiguousarray(H, dtype=np.float64)
    G = np.ascontiguousarray(G, dtype=np.float64)
    if USE_NUMBA:
        return jet_residuals_numba(H, G)
    return jet_residuals_numpy(H, G)


# ---------------------------------------------------------------------------
# Face coefficients k = (|Du|^2 + eps)^((p-2)/2)
#
# K[a] lives on faces normal to axis a: length N_a - 1 along a and only
# interior indices (1..N_b-2) along every other axis b. The normal part of
# the face gradient is a two-point difference; each tangential part is the
# mean of the central differences at the two adjacent nodes.


def _interior(ndim, skip):
    sl = [slice(1, -1)] * ndim
    sl[skip] = slice(None)
    return tuple(sl)


def _power(S, expo):
    # shortcuts for p = 2, 3, 4; np.power otherwise
    if expo == 0.0:
        return np.ones_like(S)
    if expo == 0.5:
        return np.sqrt(S)
    if expo == 1.0:
        return S
    return np.power(S, expo)


def face_coefficients_numpy(u, h, p, eps):
    ndim = u.ndim
    expo = 0.5 * (p - 2.0)
    out = []
    for a in range(ndim):
        normal = np.diff(u, axis=a)[_interior(ndim, a)] / h
        sq = normal * normal
        for b in range(ndim):
            if b == a:
                continue
            lo = [slice(None)] * ndim
            hi = [slice(None)] * ndim
            lo[b] = slice(0, -2)
            hi[b] = slice(2, None)
            c = (u[tuple(hi)] - u[tuple(lo)]) / (2.0 * h)
            left = [slice(None)] * ndim
            right = [slice(None)] * ndim
            left[a] = slice(0, -1)
            right[a] = slice(1, None)
            t = 0.5 * (c[tuple(left)] + c[tuple(right)])
            rest = [slice(None)] * ndim
            for d in range(ndim):
                if d != a and d != b:
                    rest[d] = slice(1, -1)
            t = t[tuple(rest)]
            sq = sq + t * t
        out.append(_power(sq + eps, expo))
    return out


if HAVE_NUMBA:

    @njit(cache=True)
    def _faces2d(u, h, eps):
        n0, n1 = u.shape
        K0 = np.empty((n0 - 1, n1 - 2))
        K1 = np.empty((n0 - 2, n1 - 1))
        q = 1.0 / (4.0 * h)
        for i in range(n0 - 1):
            for j in range(1, n1 - 1):
                gx = (u[i + 1, j] - u[i, j]) / h
                gy = (u[i, j + 1] - u[i, j - 1] + u[i + 1, j + 1] - u[i + 1, j - 1]) * q
                K0[i, j - 1] = gx * gx + gy * gy + eps
        for i in range(1, n0 - 1):
            for j in range(n1 - 1):
                gy = (u[i, j + 1] - u[i, j]) / h
                gx = (u[i + 1, j] - u[i - 1, j] + u[i + 1, j + 1] - u[i - 1, j + 1]) * q
                K1[i - 1, j] = gx * gx + gy * gy + eps
        return K0, K1

    @njit(cache=True)
    def _faces3d(u, h, eps):
        n0, n1, n2 = u.shape
        K0 = np.empty((n0 - 1, n1 - 2, n2 - 2))
        K1 = np.empty((n0 - 2, n1 - 1, n2 - 2))
        K2 = np.empty((n0 - 2, n1 - 2, n2 - 1))
        q = 1.0 / (4.0 * h)
        for i in range(n0 - 1):
            for j in range(1, n1 - 1):
                for k in range(1, n2 - 1):
                    g0 = (u[i + 1, j, k] - u[i, j, k]) / h
                    g1 = (u[i, j + 1, k] - u[i, j - 1, k] + u[i + 1, j + 1, k] - u[i + 1, j - 1, k]) * q
                    g2 = (u[i, j, k + 1] - u[i, j, k - 1] + u[i + 1, j, k + 1] - u[i + 1, j, k - 1]) * q
                    K0[i, j - 1, k - 1] = g0 * g0 + g1 * g1 + g2 * g2 + eps
        for i in range(1, n0 - 1):
            for j in range(n1 - 1):
                for k in range(1, n2 - 1):
                    g1 = (u[i, j + 1, k] - u[i, j, k]) / h
                    g0 = (u[i + 1, j, k] - u[i - 1, j, k] + u[i + 1, j + 1, k] - u[i - 1, j + 1, k]) * q
                    g2 = (u[i, j, k + 1] - u[i, j, k - 1] + u[i, j + 1, k + 1] - u[i, j + 1, k - 1]) * q
                    K1[i - 1, j, k - 1] = g0 * g0 + g1 * g1 + g2 * g2 + eps
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                for k in range(n2 - 1):
                    g2 = (u[i, j, k + 1] - u[i, j, k]) / h
                    g0 = (u[i + 1, j, k] - u[i - 1, j, k] + u[i + 1, j, k + 1] - u[i - 1, j, k + 1]) * q
                    g1 = (u[i, j + 1, k] - u[i, j - 1, k] + u[i, j + 1, k + 1] - u[i, j - 1, k + 1]) * q
                    K2[i - 1, j - 1, k] = g0 * g0 + g1 * g1 + g2 * g2 + eps
        return K0, K1, K2

    def face_coefficients_numba(u, h, p, eps):
        # the loops build |Du|^2 + eps; numpy's vectorized power beats scalar pow
        if u.ndim == 2:
            S = _faces2d(u, float(h), float(eps))
        elif u.ndim == 3:
            S = _faces3d(u, float(h), float(eps))
        else:
            return face_coefficients_numpy(u, h, p, eps)
        expo = 0.5 * (float(p) - 2.0)
        return [_power(x, expo) for x in S]


def face_coefficients(u, h, p, eps):
    u = np.ascontiguousarray(u, dtype=np.float64)
    if USE_NUMBA and u.ndim in (2, 3):
        return face_coefficients_numba(u, h, p, eps)
    return face_coefficients_numpy(u, h, p, eps)


# ---------------------------------------------------------------------------
# Flux divergence div(K Du) at interior nodes


def flux_divergence_numpy(u, K, h):
    ndim = u.ndim
    out = np.zeros(tuple(s - 2 for s in u.shape))
    for a in range(ndim):
        flux = K[a] * np.diff(u, axis=a)[_interior(ndim, a)]
        hi = [slice(None)] * ndim
        lo = [slice(None)] * ndim
        hi[a] = slice(1, None)
        lo[a] = slice(0, -1)
        out += flux[tuple(hi)] - flux[tuple(lo)]
    return out / (h * h)


if HAVE_NUMBA:

    @njit(cache=True)
    def _div2d(u, K0, K1, h):
        n0, n1 = u.shape
        out = np.empty((n0 - 2, n1 - 2))
        ih2 = 1.0 / (h * h)
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                c = u[i, j]
                s = K0[i, j - 1] * (u[i + 1, j] - c) - K0[i - 1, j - 1] * (c - u[i - 1, j])
                s += K1[i - 1, j] * (u[i, j + 1] - c) - K1[i - 1, j - 1] * (c - u[i, j - 1])
                out[i - 1, j - 1] = s * ih2
        return out

    @njit(cache=True)
    def _div3d(u, K0, K1, K2, h):
        n0, n1, n2 = u.shape
        out = np.empty((n0 - 2, n1 - 2, n2 - 2))
        ih2 = 1.0 / (h * h)
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                for k in range(1, n2 - 1):
                    c = u[i, j, k]
                    s = K0[i, j - 1, k - 1] * (u[i + 1, j, k] - c) - K0[i - 1, j - 1, k - 1] * (c - u[i - 1, j, k])
                    s += K1[i - 1, j, k - 1] * (u[i, j + 1, k] - c) - K1[i - 1, j - 1, k - 1] * (c - u[i, j - 1, k])
                    s += K2[i - 1, j - 1, k] * (u[i, j, k + 1] - c) - K2[i - 1, j - 1, k - 1] * (c - u[i, j, k - 1])
                    out[i - 1, j - 1, k - 1] = s * ih2
        return out

    def flux_divergence_numba(u, K, h):
        if u.ndim == 2:
            return _div2d(u, K[0], K[1], float(h))
        if u.ndim == 3:
            return _div3d(u, K[0], K[1], K[2], float(h))
        return flux_divergence_numpy(u, K, h)


def flux_divergence(u, K, h):
    u = np.ascontiguousarray(u, dtype=np.float64)
    if USE_NUMBA and u.ndim in (2, 3):
        K = [np.ascontiguousarray(k) for k in K]
        return flux_divergence_numba(u, K, h)
    return flux_divergence_numpy(u, K, h)


# ---------------------------------------------------------------------------
# Normalized operator  Delta u + (p-2) Delta_inf u / (|Du|^2 + eps)
# with central first differences and the 4-point cross stencil for mixed
# second derivatives; evaluated at interior nodes.


def normalized_operator_numpy(u, h, p, eps):
    ndim = u.ndim
    inner = tuple([slice(1, -1)] * ndim)
    c = u[inner]
    grads = []
    lap = np.zeros_like(c)
    diag = []
    for a in range(ndim):
        hi = [slice(1, -1)] * ndim
        lo = [slice(1, -1)] * ndim
        hi[a] = slice(2, None)
        lo[a] = slice(0, -2)
        up, dn = u[tuple(hi)], u[tuple(lo)]
        grads.append((up - dn) / (2.0 * h))
        d2 = (up - 2.0 * c + dn) / (h * h)
        diag.append(d2)
        lap += d2
    g2 = sum(g * g for g in grads)
    inf = sum(diag[a] * grads[a] * grads[a] for a in range(ndim))
    for a in range(ndim):
        for b in range(a + 1, ndim):
            sl = {}
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                idx = [slice(1, -1)] * ndim
                idx[a] = slice(1 + sa, u.shape[a] - 1 + sa)
                idx[b] = slice(1 + sb, u.shape[b] - 1 + sb)
                sl[sa, sb] = u[tuple(idx)]
            mixed = (sl[1, 1] - sl[1, -1] - sl[-1, 1] + sl[-1, -1]) / (4.0 * h * h)
            inf = inf + 2.0 * mixed * grads[a] * grads[b]
    return lap + (p - 2.0) * inf / (g2 + eps)


if HAVE_NUMBA:

    @njit(cache=True)
    def _normalized2d(u, h, p, eps):
        n0, n1 = u.shape
        out = np.empty((n0 - 2, n1 - 2))
        ih2 = 1.0 / (h * h)
        i2h = 1.0 / (2.0 * h)
        i4h2 = 1.0 / (4.0 * h * h)
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                c = u[i, j]
                gx = (u[i + 1, j] - u[i - 1, j]) * i2h
                gy = (u[i, j + 1] - u[i, j - 1]) * i2h
                uxx = (u[i + 1, j] - 2.0 * c + u[i - 1, j]) * ih2
                uyy = (u[i, j + 1] - 2.0 * c + u[i, j - 1]) * ih2
                uxy = (u[i + 1, j + 1] - u[i + 1, j - 1] - u[i - 1, j + 1] + u[i - 1, j - 1]) * i4h2
                inf = uxx * gx * gx + uyy * gy * gy + 2.0 * uxy * gx * gy
                out[i - 1, j - 1] = uxx + uyy + (p - 2.0) * inf / (gx * gx + gy * gy + eps)
        return out

    @njit(cache=True)
    def _normalized3d(u, h, p, eps):
        n0, n1, n2 = u.shape
        out = np.empty((n0 - 2, n1 - 2, n2 - 2))
        ih2 = 1.0 / (h * h)
        i2h = 1.0 / (2.0 * h)
        i4h2 = 1.0 / (4.0 * h * h)
        for i in range(1, n0 - 1):
            for j in range(1, n1 - 1):
                for k in range(1, n2 - 1):
                    c = u[i, j, k]
                    g0 = (u[i + 1, j, k] - u[i - 1, j, k]) * i2h
                    g1 = (u[i, j + 1, k] - u[i, j - 1, k]) * i2h
                    g2 = (u[i, j, k + 1] - u[i, j, k - 1]) * i2h
                    u00 = (u[i + 1, j, k] - 2.0 * c + u[i - 1, j, k]) * ih2
                    u11 = (u[i, j + 1, k] - 2.0 * c + u[i, j - 1, k]) * ih2
                    u22 = (u[i, j, k + 1] - 2.0 * c + u[i, j, k - 1]) * ih2
                    u01 = (u[i + 1, j + 1, k] - u[i + 1, j - 1, k] - u[i - 1, j + 1, k] + u[i - 1, j - 1, k]) * i4h2
                    u02 = (u[i + 1, j, k + 1] - u[i + 1, j, k - 1] - u[i - 1, j, k + 1] + u[i - 1, j, k - 1]) * i4h2
                    u12 = (u[i, j + 1, k + 1] - u[i, j + 1, k - 1] - u[i, j - 1, k + 1] + u[i, j - 1, k - 1]) * i4h2
                    inf = u00 * g0 * g0 + u11 * g1 * g1 + u22 * g2 * g2
                    inf += 2.0 * (u01 * g0 * g1 + u02 * g0 * g2 + u12 * g1 * g2)
                    gg = g0 * g0 + g1 * g1 + g2 * g2
                    out[i - 1, j - 1, k - 1] = u00 + u11 + u22 + (p - 2.0) * inf / (gg + eps)
        return out

    def normalized_operator_numba(u, h, p, eps):
        if u.ndim == 2:
            return _normalized2d(u, float(h), float(p), float(eps))
        if u.ndim == 3:
            return _normalized3d(u, float(h), float(p), float(eps))
        return normalized_operator_numpy(u, h, p, eps)


def normalized_operator(u, h, p, eps):
    u = np.ascontiguousarray(u, dtype=np.float64)
    if USE_NUMBA and u.ndim in (2, 3):
        return normalized_operator_numba(u, h, p, eps)
    return normalized_operator_numpy(u, h, p, eps)
