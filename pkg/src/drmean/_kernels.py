"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports and the environment variable
``DRMEAN_DISABLE_NUMBA`` is unset or ``0``. Both paths are always importable
so they can be compared against each other (see ``benchmarks/``).
"""
import os

import numpy as np

_flag = os.environ.get("DRMEAN_DISABLE_NUMBA", "0").strip().lower()
NUMBA_DISABLED = _flag not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED

# flag values reported per grid point
LOESS_OK = 0
LOESS_TIED = 1  # every neighbour at the same x: local mean
LOESS_SINGULAR = 2  # local design singular: weighted local mean

_SINGULAR_RTOL = 1e-12


def _solve_small(a, b):
    """Gaussian elimination with partial pivoting for k <= 3 systems.

    Returns (solution, ok). ``a`` and ``b`` are overwritten.
    """
    k = b.shape[0]
    scale = 0.0
    for i in range(k):
        scale = max(scale, abs(a[i, i]))
    if scale == 0.0:
        return b, False
    for c in range(k):
        p = c
        for r in range(c + 1, k):
            if abs(a[r, c]) > abs(a[p, c]):
                p = r
        if abs(a[p, c]) <= _SINGULAR_RTOL * scale:
            return b, False
        if p != c:
            for j in range(k):
                tmp = a[c, j]
                a[c, j] = a[p, j]
                a[p, j] = tmp
            tmp = b[c]
            b[c] = b[p]
            b[p] = tmp
        for r in range(c + 1, k):
            f = a[r, c] / a[c, c]
            for j in range(c, k):
                a[r, j] -= f * a[c, j]
            b[r] -= f * b[c]
    for c in range(k - 1, -1, -1):
        s = b[c]
        for j in range(c + 1, k):
            s -= a[c, j] * b[j]
        b[c] = s / a[c, c]
    return b, True


def _loess_loop(x, y, grid, q, degree):
    n = x.shape[0]
    m = grid.shape[0]
    k = degree + 1
    out = np.empty(m)
    flags = np.zeros(m, dtype=np.int8)
    dist = np.empty(n)
    mom = np.empty(2 * degree + 1)
    rhs = np.empty(k)
    a = np.empty((k, k))
    for j in range(m):
        g = grid[j]
        for i in range(n):
            dist[i] = abs(x[i] - g)
        dmax = np.sort(dist)[q - 1]
        if dmax <= 0.0:
            s = 0.0
            c = 0
            for i in range(n):
                if dist[i] <= dmax:
                    s += y[i]
                    c += 1
            out[j] = s / c
            flags[j] = LOESS_TIED
            continue
        mom[:] = 0.0
        rhs[:] = 0.0
        for i in range(n):
            if dist[i] < dmax:
                r = dist[i] / dmax
                w = (1.0 - r * r * r) ** 3
                u = (x[i] - g) / dmax
                up = w
                for e in range(2 * degree + 1):
                    mom[e] += up
                    if e < k:
                        rhs[e] += up * y[i]
                    up *= u
        if mom[0] <= 0.0:
            # only boundary points: all weights vanish
            s = 0.0
            c = 0
            for i in range(n):
                if dist[i] <= dmax:
                    s += y[i]
                    c += 1
            out[j] = s / c
            flags[j] = LOESS_SINGULAR
            continue
        for r in range(k):
            for c in range(k):
                a[r, c] = mom[r + c]
        b0 = rhs[0] / mom[0]
        sol, ok = _solve_small(a, rhs)
        if ok:
            out[j] = sol[0]
        else:
            out[j] = b0
            flags[j] = LOESS_SINGULAR
    return out, flags


def loess_numpy(x, y, grid, q, degree, chunk=256):
    """Vectorised local polynomial smoother (pure numpy)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    grid = np.asarray(grid, dtype=float)
    k = degree + 1
    out = np.empty(grid.shape[0])
    flags = np.zeros(grid.shape[0], dtype=np.int8)
    for start in range(0, grid.shape[0], chunk):
        g = grid[start:start + chunk]
        dist = np.abs(x[None, :] - g[:, None])
        dmax = np.partition(dist, q - 1, axis=1)[:, q - 1]
        inside = dist <= dmax[:, None]
        tied = dmax <= 0.0
        safe = np.where(tied, 1.0, dmax)
        r = dist / safe[:, None]
        w = np.where(dist < dmax[:, None], (1.0 - r**3) ** 3, 0.0)
        u = (x[None, :] - g[:, None]) / safe[:, None]
        powers = [np.ones_like(u)]
        for _ in range(2 * degree):
            powers.append(powers[-1] * u)
        mom = np.stack([(w * p).sum(axis=1) for p in powers], axis=1)
        rhs = np.stack([(w * powers[e] * y[None, :]).sum(axis=1) for e in range(k)], axis=1)
        idx = np.arange(k)
        a = mom[:, idx[:, None] + idx[None, :]]
        local_mean = (inside * y[None, :]).sum(axis=1) / inside.sum(axis=1)
        res = np.empty(g.shape[0])
        fl = np.zeros(g.shape[0], dtype=np.int8)
        zero_w = (mom[:, 0] <= 0.0) & ~tied
        ok = ~tied & ~zero_w
        if ok.any():
            aa = a[ok]
            scale = np.abs(np.diagonal(aa, axis1=1, axis2=2)).max(axis=1)
            # pivots of the LU factorisation, compared against the diagonal scale
            sing = np.zeros(aa.shape[0], dtype=bool)
            try:
                lu_ok = np.linalg.cond(aa) < 1.0 / _SINGULAR_RTOL
            except np.linalg.LinAlgError:
                lu_ok = np.zeros(aa.shape[0], dtype=bool)
            sing |= ~lu_ok | (scale == 0.0)
            vals = np.empty(aa.shape[0])
            good = ~sing
            if good.any():
                vals[good] = np.linalg.solve(aa[good], rhs[ok][good][..., None])[:, 0, 0]
            wmean = rhs[ok][:, 0] / mom[ok][:, 0]
            vals[sing] = wmean[sing]
            res[ok] = vals
            sub = fl[ok]
            sub[sing] = LOESS_SINGULAR
            fl[ok] = sub
        res[tied] = local_mean[tied]
        fl[tied] = LOESS_TIED
        res[zero_w] = local_mean[zero_w]
        fl[zero_w] = LOESS_SINGULAR
        out[start:start + chunk] = res
        flags[start:start + chunk] = fl
    return out, flags


if HAVE_NUMBA:
    _solve_small = numba.njit(cache=True)(_solve_small)
    loess_numba = numba.njit(cache=True)(_loess_loop)
else:  # pragma: no cover
    loess_numba = None


def loess_kernel(x, y, grid, q, degree):
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    grid = np.ascontiguousarray(grid, dtype=np.float64)
    if USE_NUMBA:
        return loess_numba(x, y, grid, int(q), int(degree))
    return loess_numpy(x, y, grid, int(q), int(degree))
