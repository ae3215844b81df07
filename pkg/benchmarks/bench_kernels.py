"""Time each hot kernel on its numba path and its numpy fallback.

    python3 benchmarks/bench_kernels.py [--size 257] [--repeat 5] [--csv out.csv]

Compilation is excluded (one warm-up call per kernel). Results are also
checked for agreement so a fast but wrong path is caught.
"""

import argparse
import csv
import sys
import timeit

import numpy as np

from plaplab import _kernels as K


def cases(size, jets, seed):
    rng = np.random.default_rng(seed)
    u2 = rng.normal(size=(size, size))
    s3 = max(9, round(size ** (2 / 3)))
    u3 = rng.normal(size=(s3, s3, s3))
    H = rng.uniform(-10, 10, (jets, 4, 4))
    H = H + np.swapaxes(H, 1, 2)
    G = rng.uniform(-10, 10, (jets, 4))
    h, p, eps = 1.0 / (size - 1), 3.5, 1e-4
    K2 = K.face_coefficients_numpy(u2, h, p, eps)
    K3 = K.face_coefficients_numpy(u3, h, p, eps)
    return [
        ("jet_residuals n=4", f"{jets} jets", lambda: K.jet_residuals_numpy(H, G), lambda: K.jet_residuals_numba(H, G)),
        ("face_coefficients 2D", f"{size}^2", lambda: K.face_coefficients_numpy(u2, h, p, eps),
         lambda: K.face_coefficients_numba(u2, h, p, eps)),
        ("face_coefficients 3D", f"{s3}^3", lambda: K.face_coefficients_numpy(u3, h, p, eps),
         lambda: K.face_coefficients_numba(u3, h, p, eps)),
        ("flux_divergence 2D", f"{size}^2", lambda: K.flux_divergence_numpy(u2, K2, h),
         lambda: K.flux_divergence_numba(u2, K2, h)),
        ("flux_divergence 3D", f"{s3}^3", lambda: K.flux_divergence_numpy(u3, K3, h),
         lambda: K.flux_divergence_numba(u3, K3, h)),
        ("normalized_operator 2D", f"{size}^2", lambda: K.normalized_operator_numpy(u2, h, p, eps),
         lambda: K.normalized_operator_numba(u2, h, p, eps)),
        ("normalized_operator 3D", f"{s3}^3", lambda: K.normalized_operator_numpy(u3, h, p, eps),
         lambda: K.normalized_operator_numba(u3, h, p, eps)),
    ]


def _max_diff(a, b):
    if isinstance(a, (list, tuple)):
        return max(_max_diff(x, y) for x, y in zip(a, b))
    scale = max(1.0, float(np.abs(a).max()))
    return float(np.abs(np.asarray(a) - np.asarray(b)).max()) / scale


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=257, help="2D grid points per axis (3D uses size^(2/3))")
    ap.add_argument("--jets", type=int, default=200_000, help="batch size for jet residuals")
    ap.add_argument("--repeat", type=int, default=5, help="timing repeats; the minimum is reported")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--csv", help="also write the table as CSV")
    args = ap.parse_args(argv)

    if not K.HAVE_NUMBA:
        print("numba is not available (or disabled via PLAPLAB_DISABLE_NUMBA); nothing to compare")
        return 1

    rows = []
    for name, size, f_np, f_nb in cases(args.size, args.jets, args.seed):
        diff = _max_diff(f_np(), f_nb())  # warm-up compiles the numba path
        t_np = min(timeit.repeat(f_np, number=1, repeat=args.repeat))
        t_nb = min(timeit.repeat(f_nb, number=1, repeat=args.repeat))
        rows.append({"kernel": name, "size": size, "numpy_ms": 1e3 * t_np, "numba_ms": 1e3 * t_nb,
                     "speedup": t_np / t_nb, "max_rel_diff": diff})

    print(f"{'kernel':<24}{'size':>14}{'numpy ms':>11}{'numba ms':>11}{'speedup':>9}{'max diff':>11}")
    for r in rows:
        print(f"{r['kernel']:<24}{r['size']:>14}{r['numpy_ms']:>11.2f}{r['numba_ms']:>11.2f}"
              f"{r['speedup']:>8.1f}x{r['max_rel_diff']:>11.1e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
