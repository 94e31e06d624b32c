"""Flight-phase random walk kernels, in two interchangeable forms.

``_flight_scalar`` is a straight-line scalar loop meant for numba; when numba
is active it gets compiled below.  ``_flight_numpy`` is the vectorized twin
used when numba is off.  Both implement the identical walk:

1. restrict the balancing matrix to the currently fractional coordinates,
   taken in ascending index order;
2. find the first dependent column of that restricted matrix (Gauss-Jordan
   with partial pivoting) and read off the null vector it defines, which is
   the first kernel-basis vector under this ordering;
3. step to whichever box face the null direction hits, choosing the sign with
   the probability that keeps every coordinate a martingale;
4. snap coordinates that reached a face and repeat until the restricted
   kernel is trivial.

Because every column before the first dependent one is a pivot, the null
vector never involves more than min(q + 1, #fractional) leading fractional
columns, so only that window is ever eliminated.  The walk consumes exactly
one uniform per step, passed in as a pre-drawn array so that both backends
follow the same trajectory.

Status codes: 0 done, 1 degenerate step length, 2 no coordinate fixed,
3 uniforms exhausted.
"""

import numpy as np

from ._backend import NUMBA_ENABLED, njit

FLIGHT_OK = 0
FLIGHT_DEGENERATE = 1
FLIGHT_STALLED = 2
FLIGHT_NO_RANDOMNESS = 3


def _flight_scalar(pi, a, u, eps_int, pivot_rtol, lam_guard, record, history):
    q, m = a.shape

    for k in range(m):
        if abs(pi[k]) <= eps_int:
            pi[k] = 0.0
        elif abs(pi[k] - 1.0) <= eps_int:
            pi[k] = 1.0

    free = np.empty(m, dtype=np.int64)
    nf = 0
    for k in range(m):
        if 0.0 < pi[k] < 1.0:
            free[nf] = k
            nf += 1

    if record:
        for k in range(m):
            history[0, k] = pi[k]

    wmax = q + 1
    w_mat = np.empty((q, wmax))
    piv_col = np.empty(q, dtype=np.int64)
    vwin = np.empty(wmax)

    t = 0
    while nf > 0:
        w = wmax if nf > wmax else nf
        for j in range(w):
            kj = free[j]
            for i in range(q):
                w_mat[i, j] = a[i, kj]

        amax = 0.0
        for j in range(w):
            for i in range(q):
                x = abs(w_mat[i, j])
                if x > amax:
                    amax = x
        tol = pivot_rtol * amax

        jd = -1
        r = 0
        for j in range(w):
            p_row = -1
            best = tol
            for i in range(r, q):
                x = abs(w_mat[i, j])
                if x > best:
                    best = x
                    p_row = i
            if p_row < 0:
                jd = j
                break
            if p_row != r:
                for c in range(j, w):
                    tmp = w_mat[r, c]
                    w_mat[r, c] = w_mat[p_row, c]
                    w_mat[p_row, c] = tmp
            piv = w_mat[r, j]
            for c in range(j, w):
                w_mat[r, c] /= piv
            for i in range(q):
                if i != r:
                    f = w_mat[i, j]
                    if f != 0.0:
                        for c in range(j, w):
                            w_mat[i, c] -= f * w_mat[r, c]
            piv_col[r] = j
            r += 1
        if jd < 0:
            return FLIGHT_OK, t

        for j in range(w):
            vwin[j] = 0.0
        vwin[jd] = 1.0
        for rr in range(r):
            vwin[piv_col[rr]] = -w_mat[rr, jd]

        lam1 = np.inf
        lam2 = np.inf
        for j in range(w):
            val = vwin[j]
            if val > lam_guard:
                k = free[j]
                c1 = (1.0 - pi[k]) / val
                c2 = pi[k] / val
                if c1 < lam1:
                    lam1 = c1
                if c2 < lam2:
                    lam2 = c2
            elif val < -lam_guard:
                k = free[j]
                c1 = pi[k] / (-val)
                c2 = (1.0 - pi[k]) / (-val)
                if c1 < lam1:
                    lam1 = c1
                if c2 < lam2:
                    lam2 = c2
        if not (np.isfinite(lam1) and np.isfinite(lam2)) or lam1 <= 0.0 or lam2 <= 0.0:
            return FLIGHT_DEGENERATE, t

        if t >= u.shape[0]:
            return FLIGHT_NO_RANDOMNESS, t
        step = lam1 if u[t] < lam2 / (lam1 + lam2) else -lam2

        for j in range(w):
            val = vwin[j]
            if val > lam_guard or val < -lam_guard:
                k = free[j]
                x = pi[k] + step * val
                if abs(x) <= eps_int:
                    x = 0.0
                elif abs(x - 1.0) <= eps_int:
                    x = 1.0
                pi[k] = x

        t += 1
        if record:
            for k in range(m):
                history[t, k] = pi[k]

        nf_new = 0
        for idx in range(nf):
            k = free[idx]
            if 0.0 < pi[k] < 1.0:
                free[nf_new] = k
                nf_new += 1
        if nf_new == nf:
            return FLIGHT_STALLED, t
        nf = nf_new

    return FLIGHT_OK, t


def _flight_numpy(pi, a, u, eps_int, pivot_rtol, lam_guard, record, history):
    q, m = a.shape

    near0 = np.abs(pi) <= eps_int
    near1 = np.abs(pi - 1.0) <= eps_int
    pi[near0] = 0.0
    pi[near1] = 1.0

    free = np.flatnonzero((pi > 0.0) & (pi < 1.0)).astype(np.int64)

    if record:
        history[0] = pi

    wmax = q + 1
    t = 0
    while free.size > 0:
        w = min(wmax, free.size)
        window = free[:w]
        w_mat = a[:, window].copy()

        amax = np.abs(w_mat).max() if w_mat.size else 0.0
        tol = pivot_rtol * amax

        jd = -1
        r = 0
        piv_col = np.empty(q, dtype=np.int64)
        for j in range(w):
            col = np.abs(w_mat[r:, j])
            p_rel = int(col.argmax()) if col.size else -1
            if p_rel < 0 or col[p_rel] <= tol:
                jd = j
                break
            p_row = r + p_rel
            if p_row != r:
                w_mat[[p_row, r]] = w_mat[[r, p_row]]
            w_mat[r] /= w_mat[r, j]
            fac = w_mat[:, j].copy()
            fac[r] = 0.0
            w_mat -= np.outer(fac, w_mat[r])
            piv_col[r] = j
            r += 1
        if jd < 0:
            return FLIGHT_OK, t

        vwin = np.zeros(w)
        vwin[jd] = 1.0
        if r > 0:
            vwin[piv_col[:r]] = -w_mat[:r, jd]

        sup = np.abs(vwin) > lam_guard
        vals = vwin[sup]
        cur = pi[window[sup]]
        up = np.where(vals > 0.0, (1.0 - cur) / vals, cur / (-vals))
        dn = np.where(vals > 0.0, cur / vals, (1.0 - cur) / (-vals))
        lam1 = up.min() if up.size else np.inf
        lam2 = dn.min() if dn.size else np.inf
        if not (np.isfinite(lam1) and np.isfinite(lam2)) or lam1 <= 0.0 or lam2 <= 0.0:
            return FLIGHT_DEGENERATE, t

        if t >= u.shape[0]:
            return FLIGHT_NO_RANDOMNESS, t
        step = lam1 if u[t] < lam2 / (lam1 + lam2) else -lam2

        kidx = window[sup]
        x = pi[kidx] + step * vals
        x[np.abs(x) <= eps_int] = 0.0
        x[np.abs(x - 1.0) <= eps_int] = 1.0
        pi[kidx] = x

        t += 1
        if record:
            history[t] = pi

        keep = (pi[free] > 0.0) & (pi[free] < 1.0)
        if keep.all():
            return FLIGHT_STALLED, t
        free = free[keep]

    return FLIGHT_OK, t


if NUMBA_ENABLED:
    _flight_scalar = njit(cache=True)(_flight_scalar)


def flight_kernel(backend: str):
    """Kernel picker: 'numba' (compiled scalar) or 'numpy' (vectorized)."""
    if backend == "numba":
        if not NUMBA_ENABLED:
            raise RuntimeError("numba backend requested but numba is disabled")
        return _flight_scalar
    if backend == "numpy":
        return _flight_numpy
    raise ValueError(f"unknown backend {backend!r}")
