"""Compiled inner loops for the tridiagonal eigensolver.

Everything here works on raw float64 arrays: ``d`` is the diagonal, ``e2``
the squared off-diagonal. Validation happens in the callers.
"""

import math

import numpy as np
from numba import njit

_TINY = np.finfo(np.float64).tiny
_EPS = np.finfo(np.float64).eps


@njit(cache=True, error_model="numpy")
def pivot_floor(e2):
    m = 1.0
    for v in e2:
        if v > m:
            m = v
    return _TINY * m


@njit(cache=True, error_model="numpy")
def sturm_count(d, e2, x, pivmin):
    """Number of eigenvalues strictly below ``x`` (negative LDL^T pivots)."""
    count = 0
    q = d[0] - x
    if abs(q) < pivmin:
        q = pivmin
    if q < 0.0:
        count += 1
    for k in range(1, d.size):
        q = d[k] - x - e2[k - 1] / q
        if abs(q) < pivmin:
            q = pivmin
        if q < 0.0:
            count += 1
    return count


@njit(cache=True, error_model="numpy")
def char_poly(d, e2, x):
    """det(T - xI) as (mantissa, binary exponent) via the three-term recurrence."""
    p_prev = 1.0
    p = d[0] - x
    expo = 0
    for k in range(1, d.size):
        p_next = (d[k] - x) * p - e2[k - 1] * p_prev
        p_prev = p
        p = p_next
        a = abs(p)
        if a > 1e150 or (0.0 < a < 1e-150):
            m, ex = math.frexp(p)
            scale = math.ldexp(1.0, -ex)
            p *= scale
            p_prev *= scale
            expo += ex
    return p, expo


@njit(cache=True, error_model="numpy")
def bisect_eigenvalues(d, e2, ks, lo, hi, tol, pivmin):
    """Bracket the ``ks[j]``-th smallest eigenvalues (0-based) simultaneously.

    Each bracket keeps count(lo) <= k < count(hi); the loop over brackets is
    innermost so the recurrence vectorizes across them.
    """
    m = ks.size
    n = d.size
    left = np.full(m, lo)
    right = np.full(m, hi)
    mid = np.empty(m)
    q = np.empty(m)
    cnt = np.empty(m, dtype=np.int64)
    width = hi - lo
    steps = 0
    while width > tol and steps < 128:
        for j in range(m):
            mid[j] = 0.5 * (left[j] + right[j])
            q[j] = d[0] - mid[j]
            if abs(q[j]) < pivmin:
                q[j] = pivmin
            cnt[j] = 1 if q[j] < 0.0 else 0
        for k in range(1, n):
            dk = d[k]
            ek = e2[k - 1]
            for j in range(m):
                v = dk - mid[j] - ek / q[j]
                if abs(v) < pivmin:
                    v = pivmin
                q[j] = v
                cnt[j] += 1 if v < 0.0 else 0
        width = 0.0
        for j in range(m):
            if cnt[j] > ks[j]:
                right[j] = mid[j]
            else:
                left[j] = mid[j]
            w = right[j] - left[j]
            # stop refining once the bracket cannot shrink in float64
            if w <= 2.0 * _EPS * max(abs(left[j]), abs(right[j])):
                w = 0.0
            if w > width:
                width = w
        steps += 1
    return 0.5 * (left + right)


@njit(cache=True, error_model="numpy")
def tridiag_factor(d, e, shift):
    """LU factorization of T - shift*I with partial pivoting (LAPACK gttrf layout).

    Returns (dl, du, du2, dd, piv): multipliers, first and second upper
    diagonals, pivots, and row-interchange flags.
    """
    n = d.size
    dd = d - shift
    du = e.copy()
    dl = e.copy()
    du2 = np.zeros(max(n - 2, 0))
    piv = np.zeros(n, dtype=np.bool_)
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if dd[i] != 0.0:
                fact = dl[i] / dd[i]
                dl[i] = fact
                dd[i + 1] -= fact * du[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            tmp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = tmp - fact * dd[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            piv[i] = True
    return dl, du, du2, dd, piv


@njit(cache=True, error_model="numpy")
def tridiag_solve(dl, du, du2, dd, piv, b, pivmin):
    n = dd.size
    x = b.copy()
    for i in range(n - 1):
        if piv[i]:
            tmp = x[i]
            x[i] = x[i + 1]
            x[i + 1] = tmp - dl[i] * x[i + 1]
        else:
            x[i + 1] -= dl[i] * x[i]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        if i + 1 < n:
            acc -= du[i] * x[i + 1]
        if i + 2 < n:
            acc -= du2[i] * x[i + 2]
        p = dd[i]
        # a singular pivot means the shift hit an eigenvalue; nudge it
        if abs(p) < pivmin:
            p = pivmin if p >= 0.0 else -pivmin
        x[i] = acc / p
    return x


@njit(cache=True, error_model="numpy")
def residual_norm(d, e, lam, v):
    n = d.size
    acc = 0.0
    for i in range(n):
        r = (d[i] - lam) * v[i]
        if i > 0:
            r += e[i - 1] * v[i - 1]
        if i + 1 < n:
            r += e[i] * v[i + 1]
        acc += r * r
    return math.sqrt(acc)


@njit(cache=True, error_model="numpy")
def inverse_iteration(d, e, lam, shift, start, against, max_iter, target, pivmin):
    """Inverse iteration at ``shift``, orthogonalized against the columns of
    ``against`` (used inside eigenvalue clusters).

    Returns (vector, residual, iterations); residual is measured at ``lam``.
    """
    dl, du, du2, dd, piv = tridiag_factor(d, e, shift)
    n = d.size
    x = start / np.sqrt(np.dot(start, start))
    res = np.inf
    restarts = 0
    it = 0
    while it < max_iter:
        y = tridiag_solve(dl, du, du2, dd, piv, x, pivmin)
        before = np.sqrt(np.dot(y, y))
        for c in range(against.shape[1]):
            col = np.ascontiguousarray(against[:, c])
            y -= np.dot(col, y) * col
        nrm = np.sqrt(np.dot(y, y))
        if not np.isfinite(nrm):
            break
        if nrm <= 1e-8 * before:
            # the iterate lay in the span already found; restart from a unit vector
            if restarts >= n:
                break
            x = np.zeros(n)
            x[restarts] = 1.0
            restarts += 1
            continue
        it += 1
        x = y / nrm
        res = residual_norm(d, e, lam, x)
        if res <= target:
            break
    return x, res, it


@njit(cache=True, error_model="numpy")
def gershgorin(d, e, pivmin):
    n = d.size
    lo = np.inf
    hi = -np.inf
    for i in range(n):
        r = 0.0
        if i > 0:
            r += abs(e[i - 1])
        if i + 1 < n:
            r += abs(e[i])
        lo = min(lo, d[i] - r)
        hi = max(hi, d[i] + r)
    margin = 2.0 * _EPS * n * max(abs(lo), abs(hi), 1.0) + 2.0 * pivmin
    return lo - margin, hi + margin


@njit(cache=True, error_model="numpy")
def norm_bound(d, e):
    n = d.size
    best = 0.0
    for i in range(n):
        r = abs(d[i])
        if i > 0:
            r += abs(e[i - 1])
        if i + 1 < n:
            r += abs(e[i])
        best = max(best, r)
    return best


@njit(cache=True, error_model="numpy")
def path_tridiagonal(w):
    n = w.size + 1
    d = np.ones(n)
    for i in range(n - 1):
        d[i] -= w[i]
        d[i + 1] -= w[i]
    return d, w.copy(), w * w


@njit(cache=True, error_model="numpy")
def slem_branches(w, tol, start, shift_eps, max_iter):
    """Second-largest and smallest eigenvalue of the path weight matrix with
    their unit eigenvectors, in one compiled call.

    Returns (lam2, lamn, u, v, worst_residual, target).
    """
    d, e, e2 = path_tridiagonal(w)
    n = d.size
    pivmin = pivot_floor(e2)
    lo, hi = gershgorin(d, e, pivmin)
    ks = np.empty(2, dtype=np.int64)
    ks[0] = n - 2
    ks[1] = 0
    vals = bisect_eigenvalues(d, e2, ks, lo, hi, tol, pivmin)
    scale = max(norm_bound(d, e), _TINY)
    target = 100.0 * max(tol, _EPS) * scale
    shift = shift_eps * max(scale, 1.0)
    none = np.zeros((n, 0))
    u, ru, _ = inverse_iteration(d, e, vals[0], vals[0] + shift, start, none, max_iter, target, pivmin)
    v, rv, _ = inverse_iteration(d, e, vals[1], vals[1] + shift, start, none, max_iter, target, pivmin)
    return vals[0], vals[1], u, v, max(ru, rv), target


@njit(cache=True, error_model="numpy", nogil=True)
def tridiag_matvec(d, e, x, out):
    n = d.size
    for i in range(n):
        acc = d[i] * x[i]
        if i > 0:
            acc += e[i - 1] * x[i - 1]
        if i + 1 < n:
            acc += e[i] * x[i + 1]
        out[i] = acc


@njit(cache=True, error_model="numpy", nogil=True)
def run_iteration(d, e, x0, steps, keep_every):
    """``x(t+1) = W x(t)`` for ``steps`` steps.

    States are kept every ``keep_every`` steps (plus the last one). The error
    norms come from iterating the deviation ``x - mean`` with its mean
    re-projected to zero each step, so they decay past the round-off floor
    that ``||x(t) - mean||`` computed directly would hit.
    """
    n = d.size
    kept = steps // keep_every + 1
    if steps % keep_every != 0:
        kept += 1
    states = np.empty((kept, n))
    times = np.empty(kept, dtype=np.int64)
    errors = np.empty(steps + 1)
    x = x0.copy()
    y = x0 - x0.mean()
    xn = np.empty(n)
    yn = np.empty(n)
    states[0] = x
    times[0] = 0
    errors[0] = math.sqrt(np.dot(y, y))
    slot = 1
    for t in range(1, steps + 1):
        tridiag_matvec(d, e, x, xn)
        tridiag_matvec(d, e, y, yn)
        yn -= yn.mean()
        x, xn = xn, x
        y, yn = yn, y
        errors[t] = math.sqrt(np.dot(y, y))
        if t % keep_every == 0 or t == steps:
            states[slot] = x
            times[slot] = t
            slot += 1
    return states, times, errors
