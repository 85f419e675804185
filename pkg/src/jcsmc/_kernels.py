"""Compiled inner loops of the barrier solver.

The problems are tiny (a few dozen variables), so per-call numpy overhead
dominates a pure-Python Newton loop.  These kernels mirror the Python-level
definitions in :mod:`jcsmc.cvxcore` one to one.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def constraint_values(P, q, r, C, x):
    m, n = q.shape
    g = np.empty(m)
    for i in range(m):
        s = r[i]
        for a in range(n):
            xa = x[a]
            s += q[i, a] * xa + C[i, a] * xa * xa * xa
            acc = 0.0
            for b in range(n):
                acc += P[i, a, b] * x[b]
            s += xa * acc
        g[i] = s
    return g


@njit(cache=True)
def barrier_value(P, q, r, C, c, Q, has_q, lo, lbv, hi, ubv, x, t):
    g = constraint_values(P, q, r, C, x)
    for i in range(g.size):
        if g[i] >= 0.0:
            return np.inf
    f = 0.0
    for a in range(x.size):
        f += c[a] * x[a]
    if has_q:
        f += 0.5 * (x @ (Q @ x))
    val = t * f
    for i in range(g.size):
        val -= np.log(-g[i])
    for j in range(lo.size):
        d = x[lo[j]] - lbv[j]
        if d <= 0.0:
            return np.inf
        val -= np.log(d)
    for j in range(hi.size):
        d = ubv[j] - x[hi[j]]
        if d <= 0.0:
            return np.inf
        val -= np.log(d)
    return val


@njit(cache=True)
def derivatives(P, q, r, C, c, Q, has_q, lo, lbv, hi, ubv, x, t):
    """Barrier gradient and Hessian plus constraint values and Jacobian."""
    m, n = q.shape
    g = constraint_values(P, q, r, C, x)
    G = np.empty((m, n))
    for i in range(m):
        for a in range(n):
            acc = 0.0
            for b in range(n):
                acc += P[i, a, b] * x[b]
            G[i, a] = 2.0 * acc + q[i, a] + 3.0 * C[i, a] * x[a] * x[a]
    grad = t * c.copy()
    H = np.zeros((n, n))
    for i in range(m):
        inv = 1.0 / (-g[i])
        inv2 = inv * inv
        for a in range(n):
            grad[a] += inv * G[i, a]
            H[a, a] += 6.0 * inv * C[i, a] * x[a]
            for b in range(n):
                H[a, b] += 2.0 * inv * P[i, a, b] + inv2 * G[i, a] * G[i, b]
    if has_q:
        grad += t * (Q @ x)
        H += t * Q
    for j in range(lo.size):
        k = lo[j]
        il = 1.0 / (x[k] - lbv[j])
        grad[k] -= il
        H[k, k] += il * il
    for j in range(hi.size):
        k = hi[j]
        iu = 1.0 / (ubv[j] - x[k])
        grad[k] += iu
        H[k, k] += iu * iu
    return grad, H, g, G


@njit(cache=True)
def _cholesky(A):
    n = A.shape[0]
    L = np.zeros((n, n))
    for j in range(n):
        s = A[j, j]
        for k in range(j):
            s -= L[j, k] * L[j, k]
        if not (s > 0.0):
            return L, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, n):
            s = A[i, j]
            for k in range(j):
                s -= L[i, k] * L[j, k]
            L[i, j] = s / L[j, j]
    return L, True


@njit(cache=True)
def newton_direction(H, grad):
    """``-H^{-1} grad`` by Cholesky, regularising the diagonal if needed."""
    n = H.shape[0]
    L, ok = _cholesky(H)
    reg = 0.0
    scale = 1.0
    for a in range(n):
        scale = max(scale, abs(H[a, a]))
    while not ok:
        reg = 1e-12 * scale if reg == 0.0 else reg * 10.0
        A = H.copy()
        for a in range(n):
            A[a, a] += reg
        L, ok = _cholesky(A)
    y = np.empty(n)
    for i in range(n):
        s = -grad[i]
        for k in range(i):
            s -= L[i, k] * y[k]
        y[i] = s / L[i, i]
    d = np.empty(n)
    for i in range(n - 1, -1, -1):
        s = y[i]
        for k in range(i + 1, n):
            s -= L[k, i] * d[k]
        d[i] = s / L[i, i]
    return d


@njit(cache=True)
def max_box_step(lo, lbv, hi, ubv, x, dx):
    s = np.inf
    for j in range(lo.size):
        d = dx[lo[j]]
        if d < 0.0:
            s = min(s, (lbv[j] - x[lo[j]]) / d)
    for j in range(hi.size):
        d = dx[hi[j]]
        if d > 0.0:
            s = min(s, (ubv[j] - x[hi[j]]) / d)
    return s


@njit(cache=True)
def center(P, q, r, C, c, Q, has_q, lo, lbv, hi, ubv, x, t, newton_tol, max_steps):
    """Damped Newton centring at barrier weight ``t``.

    Returns ``(x, steps, ok)``; ``ok`` is False only when the step cap is hit.
    """
    alpha, beta = 0.01, 0.5
    x = x.copy()
    f = barrier_value(P, q, r, C, c, Q, has_q, lo, lbv, hi, ubv, x, t)
    for step in range(1, max_steps + 1):
        grad, H, _, _ = derivatives(P, q, r, C, c, Q, has_q, lo, lbv, hi, ubv, x, t)
        dx = newton_direction(H, grad)
        slope = grad @ dx
        if -slope / 2.0 <= newton_tol:
            return x, step - 1, True
        s = min(1.0, 0.99 * max_box_step(lo, lbv, hi, ubv, x, dx))
        while True:
            xn = x + s * dx
            fn = barrier_value(P, q, r, C, c, Q, has_q, lo, lbv, hi, ubv, xn, t)
            if fn <= f + alpha * s * slope:
                break
            s *= beta
            if s < 1e-16:
                return x, step, True
        stalled = f - fn <= 1e-14 * (1.0 + abs(f))
        x = xn
        f = fn
        if stalled:
            # decrement cannot shrink further in double precision
            return x, step, True
    return x, max_steps, False
