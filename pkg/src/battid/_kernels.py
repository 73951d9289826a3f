"""Hot numeric kernels: filter recurrences, RC propagation, basis rows.

Each kernel has a single mathematical definition.  The sequential
recurrences (``cascade_filter``, ``rc_pair``) are plain loops that numba
compiles when available; the basis evaluation additionally has a
vectorized numpy formulation used on the fallback path.  Both paths
perform the same floating-point operations per element, so results agree
bit for bit.
"""
import numpy as np

from ._accel import USING_NUMBA, njit

KERNEL_PATH = "numba" if USING_NUMBA else "numpy"


def _cascade_loop(ad, bd, cmat, x, out):
    # 3-state lower-triangular cascade; out[j] holds the three filter
    # outputs at sample j, states advance with x[j] held over the interval.
    s0 = 0.0
    s1 = 0.0
    s2 = 0.0
    for j in range(x.shape[0]):
        out[j, 0] = cmat[0, 0] * s0
        out[j, 1] = cmat[1, 0] * s0 + cmat[1, 1] * s1
        out[j, 2] = cmat[2, 0] * s0 + cmat[2, 1] * s1 + cmat[2, 2] * s2
        u = x[j]
        t0 = ad[0, 0] * s0 + bd[0] * u
        t1 = ad[1, 0] * s0 + ad[1, 1] * s1 + bd[1] * u
        t2 = ad[2, 0] * s0 + ad[2, 1] * s1 + ad[2, 2] * s2 + bd[2] * u
        s0 = t0
        s1 = t1
        s2 = t2


def _rc_pair_loop(e1, g1, e2, g2, v10, v20, cur, out):
    v1 = v10
    v2 = v20
    for j in range(cur.shape[0]):
        out[j, 0] = v1
        out[j, 1] = v2
        v1 = e1 * v1 + g1 * cur[j]
        v2 = e2 * v2 + g2 * cur[j]


def _basis_loop(knots, deg, z, span, out):
    left = np.empty(deg + 1)
    right = np.empty(deg + 1)
    vals = np.empty(deg + 1)
    for irow in range(z.shape[0]):
        zz = z[irow]
        sp = span[irow]
        vals[0] = 1.0
        for r in range(1, deg + 1):
            left[r] = zz - knots[sp + 1 - r]
            right[r] = knots[sp + r] - zz
            saved = 0.0
            for j in range(r):
                den = right[j + 1] + left[r - j]
                if den != 0.0:
                    temp = vals[j] / den
                else:
                    temp = 0.0
                vals[j] = saved + right[j + 1] * temp
                saved = left[r - j] * temp
            vals[r] = saved
        for j in range(deg + 1):
            out[irow, sp - deg + j] = vals[j]


def _basis_fill_numpy(knots, deg, z, span, out):
    # Same recursion as _basis_loop, vectorized across rows.
    n = z.shape[0]
    vals = np.zeros((n, deg + 1))
    left = np.zeros((n, deg + 1))
    right = np.zeros((n, deg + 1))
    vals[:, 0] = 1.0
    for r in range(1, deg + 1):
        left[:, r] = z - knots[span + 1 - r]
        right[:, r] = knots[span + r] - z
        saved = np.zeros(n)
        for j in range(r):
            den = right[:, j + 1] + left[:, r - j]
            safe = np.where(den != 0.0, den, 1.0)
            temp = np.where(den != 0.0, vals[:, j] / safe, 0.0)
            vals[:, j] = saved + right[:, j + 1] * temp
            saved = left[:, r - j] * temp
        vals[:, r] = saved
    rows = np.arange(n)
    for j in range(deg + 1):
        out[rows, span - deg + j] = vals[:, j]


if USING_NUMBA:
    _cascade_jit = njit(cache=True)(_cascade_loop)
    _rc_pair_jit = njit(cache=True)(_rc_pair_loop)
    _basis_jit = njit(cache=True)(_basis_loop)


def cascade_filter(ad, bd, cmat, x):
    """Run the discrete 3-state cascade over x, returning (n, 3) outputs."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty((x.shape[0], 3))
    if USING_NUMBA:
        _cascade_jit(ad, bd, cmat, x, out)
    else:
        _cascade_loop(ad, bd, cmat, x, out)
    return out


def rc_pair(e1, g1, e2, g2, v10, v20, cur):
    """Propagate two RC branch voltages over a held current sequence."""
    cur = np.ascontiguousarray(cur, dtype=np.float64)
    out = np.empty((cur.shape[0], 2))
    if USING_NUMBA:
        _rc_pair_jit(e1, g1, e2, g2, v10, v20, cur, out)
    else:
        _rc_pair_loop(e1, g1, e2, g2, v10, v20, cur, out)
    return out


def basis_rows(knots, deg, z, span, n_basis):
    """Dense (n, n_basis) matrix of basis values; at most deg+1 nonzeros/row."""
    z = np.ascontiguousarray(z, dtype=np.float64)
    span = np.ascontiguousarray(span, dtype=np.int64)
    out = np.zeros((z.shape[0], n_basis))
    if USING_NUMBA:
        _basis_jit(knots, deg, z, span, out)
    else:
        _basis_fill_numpy(knots, deg, z, span, out)
    return out


def numpy_reference():
    """Expose the no-jit implementations for benchmarks and path tests."""
    def cascade(ad, bd, cmat, x):
        x = np.ascontiguousarray(x, dtype=np.float64)
        out = np.empty((x.shape[0], 3))
        _cascade_loop(ad, bd, cmat, x, out)
        return out

    def rc(e1, g1, e2, g2, v10, v20, cur):
        cur = np.ascontiguousarray(cur, dtype=np.float64)
        out = np.empty((cur.shape[0], 2))
        _rc_pair_loop(e1, g1, e2, g2, v10, v20, cur, out)
        return out

    def basis(knots, deg, z, span, n_basis):
        z = np.ascontiguousarray(z, dtype=np.float64)
        span = np.ascontiguousarray(span, dtype=np.int64)
        out = np.zeros((z.shape[0], n_basis))
        _basis_fill_numpy(knots, deg, z, span, out)
        return out

    return cascade, rc, basis
