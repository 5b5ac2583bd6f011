"""Dormand-Prince 5(4) integrator compiled with numba.

The right-hand side is chosen by an integer ``kind`` (``RHS_MODAL``,
``RHS_ROTATING``, ``RHS_AVERAGED``) and writes into ``out``.  Output
is produced by the fourth-order dense interpolant at the requested times.

Error norms.  ``norm_kind == 0`` scales each component separately.
``norm_kind == 1`` treats ``y`` as ``n`` pairs ``(y[k], y[n+k])`` weighted by
``(w[k], 1)``; the scale of pair ``k`` is ``atol + rtol * max(amp_old, amp_new)``
with ``amp = hypot(w*y[k], y[n+k])``.  For the modal system ``w = lambda`` makes
the amplitude the square root of the modal energy.  The error is the max over
components (or pairs).
"""

import numpy as np
from numba import njit

OK = 0
CONVERGED = 1
STEP_UNDERFLOW = 2
NOT_FINITE = 3
TOO_MANY_STEPS = 4

STATUS_TEXT = {
    OK: "ok",
    CONVERGED: "converged",
    STEP_UNDERFLOW: "step size underflow",
    NOT_FINITE: "non-finite value",
    TOO_MANY_STEPS: "step budget exhausted",
}

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
A = np.zeros((6, 6))
A[1, :1] = [1 / 5]
A[2, :2] = [3 / 40, 9 / 40]
A[3, :3] = [44 / 45, -56 / 15, 32 / 9]
A[4, :4] = [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]
A[5, :5] = [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]
B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200, -22 / 525, 1 / 40])
P = np.array(
    [
        [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
        [0.0, 0.0, 0.0, 0.0],
        [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
        [0.0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
        [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
        [0.0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
        [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
    ]
)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 10.0


@njit(cache=True)
def _error_norm(err, y_old, y_new, rtol, atol, norm_kind, w):
    m = y_old.size
    worst = 0.0
    if norm_kind == 0:
        for i in range(m):
            sc = atol + rtol * max(abs(y_old[i]), abs(y_new[i]))
            r = abs(err[i]) / sc
            if r > worst:
                worst = r
    else:
        n = m // 2
        for k in range(n):
            a0 = np.hypot(w[k] * y_old[k], y_old[n + k])
            a1 = np.hypot(w[k] * y_new[k], y_new[n + k])
            sc = atol + rtol * max(a0, a1)
            r = np.hypot(w[k] * err[k], err[n + k]) / sc
            if r > worst:
                worst = r
    return worst


@njit(cache=True)
def _initial_step(kind, t0, y0, f0, params, rtol, atol, norm_kind, w, max_step):
    m = y0.size
    sc_y = np.empty(m)
    for i in range(m):
        sc_y[i] = atol + rtol * abs(y0[i])
    d0 = 0.0
    d1 = 0.0
    for i in range(m):
        d0 = max(d0, abs(y0[i]) / sc_y[i])
        d1 = max(d1, abs(f0[i]) / sc_y[i])
    if d0 < 1e-5 or d1 < 1e-5:
        h0 = 1e-6
    else:
        h0 = 0.01 * d0 / d1
    h0 = min(h0, max_step)
    y1 = y0 + h0 * f0
    f1 = np.empty(m)
    evaluate(kind, t0 + h0, y1, params, f1)
    d2 = 0.0
    for i in range(m):
        d2 = max(d2, abs(f1[i] - f0[i]) / sc_y[i])
    d2 = d2 / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100 * h0, h1, max_step)


@njit(cache=True)
def integrate(kind, t0, y0, params, t_out, rtol, atol, max_step, first_step,
              norm_kind, w, stop_tol, stop_count, max_steps):
    """Integrate from ``t0`` and return samples at ``t_out`` (ascending, >= t0).

    Returns ``(Y, n_written, status, t_reached, y_reached, n_accepted, n_rejected)``.
    Samples past a failure are left as NaN; after a ``CONVERGED`` stop they
    are left unwritten too and the caller decides how to fill them.
    """
    m = y0.size
    n_out = t_out.size
    Y = np.full((n_out, m), np.nan)
    K = np.zeros((7, m))
    y = y0.copy()
    t = t0
    f0 = np.empty(m)
    evaluate(kind, t, y, params, f0)
    K[0, :] = f0

    j = 0
    while j < n_out and t_out[j] <= t0:
        Y[j, :] = y
        j += 1
    if j == n_out:
        return Y, j, OK, t, y, 0, 0
    if not np.all(np.isfinite(f0)):
        return Y, j, NOT_FINITE, t, y, 0, 0

    t_end = t_out[n_out - 1]
    if first_step > 0:
        h = min(first_step, max_step)
    else:
        h = _initial_step(kind, t0, y, f0, params, rtol, atol, norm_kind, w, max_step)
    n_acc = 0
    n_rej = 0
    quiet = 0
    ytmp = np.empty(m)
    y_new = np.empty(m)
    err = np.empty(m)
    kbuf = np.empty(m)

    while j < n_out:
        if n_acc + n_rej >= max_steps:
            return Y, j, TOO_MANY_STEPS, t, y, n_acc, n_rej
        h_min = 10.0 * np.finfo(np.float64).eps * max(abs(t), 1.0)
        h = min(h, max_step)
        if t + h > t_end:
            h = t_end - t
        if h < h_min:
            return Y, j, STEP_UNDERFLOW, t, y, n_acc, n_rej

        for s in range(1, 6):
            for i in range(m):
                acc = 0.0
                for r in range(s):
                    acc += A[s, r] * K[r, i]
                ytmp[i] = y[i] + h * acc
            evaluate(kind, t + C[s] * h, ytmp, params, kbuf)
            K[s, :] = kbuf
        for i in range(m):
            acc = 0.0
            for r in range(6):
                acc += B[r] * K[r, i]
            y_new[i] = y[i] + h * acc
        t_new = t + h
        if t_new >= t_end:
            t_new = t_end
        evaluate(kind, t_new, y_new, params, kbuf)
        K[6, :] = kbuf
        for i in range(m):
            acc = 0.0
            for r in range(7):
                acc += E[r] * K[r, i]
            err[i] = h * acc

        finite = True
        for i in range(m):
            if not np.isfinite(y_new[i]) or not np.isfinite(kbuf[i]):
                finite = False
                break
        if not finite:
            # a shorter step may recover; give up once the step is tiny
            n_rej += 1
            h = h * MIN_FACTOR
            if h < h_min:
                return Y, j, NOT_FINITE, t, y, n_acc, n_rej
            continue

        en = _error_norm(err, y, y_new, rtol, atol, norm_kind, w)
        if en <= 1.0:
            # dense output for every requested time in (t, t_new]
            while j < n_out and t_out[j] <= t_new:
                theta = (t_out[j] - t) / h
                th2 = theta * theta
                th3 = th2 * theta
                th4 = th3 * theta
                for i in range(m):
                    acc = 0.0
                    for r in range(7):
                        q = P[r, 0] * theta + P[r, 1] * th2 + P[r, 2] * th3 + P[r, 3] * th4
                        acc += K[r, i] * q
                    Y[j, i] = y[i] + h * acc
                if t_out[j] == t_new:
                    Y[j, :] = y_new
                j += 1
            if en == 0.0:
                factor = MAX_FACTOR
            else:
                factor = min(MAX_FACTOR, SAFETY * en ** -0.2)
            h = h * factor
            t = t_new
            y[:] = y_new
            K[0, :] = K[6, :]
            n_acc += 1
            if stop_tol > 0.0:
                fmax = 0.0
                for i in range(m):
                    fmax = max(fmax, abs(K[0, i]))
                if fmax < stop_tol:
                    quiet += 1
                    if quiet >= stop_count:
                        return Y, j, CONVERGED, t, y, n_acc, n_rej
                else:
                    quiet = 0
        else:
            n_rej += 1
            h = h * max(MIN_FACTOR, SAFETY * en ** -0.2)

    return Y, j, OK, t, y, n_acc, n_rej


# ---------------------------------------------------------------------------
# Right-hand sides


@njit(cache=True)
def damping(v, n):
    """``sum(v[:n]**2)`` in ascending order; Neumaier compensation for n > 64."""
    if n <= 64:
        s = 0.0
        for k in range(n):
            s += v[k] * v[k]
        return s
    s = 0.0
    c = 0.0
    for k in range(n):
        x = v[k] * v[k]
        t = s + x
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
    return s + c


@njit(cache=True)
def modal_rhs(t, y, lam, out):
    """``y = (u, du)``; ``u'' = -(sum du**2) du - lam**2 u``."""
    n = lam.size
    d = damping(y[n:], n)
    for k in range(n):
        out[k] = y[n + k]
        out[n + k] = -d * y[n + k] - lam[k] * lam[k] * y[k]


@njit(cache=True)
def rotating_rhs(t, y, lam, out):
    """``y = (Re a, Im a)`` with ``a_k = exp(i lam_k t)(lam_k u_k + i u'_k)``.

    ``a_k' = -i D u'_k exp(i lam_k t)`` where ``u'_k = Im(exp(-i lam_k t) a_k)``.
    """
    n = lam.size
    du = np.empty(n)
    cs = np.empty(n)
    sn = np.empty(n)
    for k in range(n):
        ph = lam[k] * t
        cs[k] = np.cos(ph)
        sn[k] = np.sin(ph)
        du[k] = y[n + k] * cs[k] - y[k] * sn[k]
    d = damping(du, n)
    for k in range(n):
        g = d * du[k]
        out[k] = g * sn[k]
        out[n + k] = -g * cs[k]


@njit(cache=True)
def averaged_rhs(s, rho, params, out):
    """``rho_k' = rho_k (1/2 - rho_k**2/8 - R/4)`` with ``R = sum rho**2``."""
    n = rho.size
    r = damping(rho, n)
    for k in range(n):
        out[k] = rho[k] * (0.5 - rho[k] * rho[k] / 8.0 - r / 4.0)



RHS_MODAL, RHS_ROTATING, RHS_AVERAGED = 0, 1, 2


@njit(cache=True)
def evaluate(kind, t, y, params, out):
    """Dispatch on an integer code; a function-valued argument would defeat the disk cache."""
    if kind == RHS_MODAL:
        modal_rhs(t, y, params, out)
    elif kind == RHS_ROTATING:
        rotating_rhs(t, y, params, out)
    else:
        averaged_rhs(t, y, params, out)
