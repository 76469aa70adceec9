"""Compiled inner loops for the two integration schemes.

Coefficient arrays are sampled at the left end of every step of the
jump-adapted grid.  Both kernels record, at the requested grid indices, the
state and the running trapezoid integral of the state (using the pre-jump
left limit at the right end of each step), and optionally the full path.
"""

import numba
import numpy as np

OK = 0
OVERFLOW = 1


@numba.njit(cache=True, nogil=True)
def log_euler(x_init, dt, dw, a1, a2, c, sig, shift, ev_steps, ev_log, checkpoints,
              store, bound, out_v, cp_x, cp_int):
    """Explicit Euler on ``v = ln x``, with states recovered as ``x0 exp(v - v0)``
    (exact when ``v`` never moves).

    Returns ``(status, bad_index, integral_0, integral_1)``.
    """
    m = dt.shape[0]
    n_ev = ev_steps.shape[0]
    n_cp = checkpoints.shape[0]
    s_0, s_1 = x_init[0], x_init[1]
    b_0, b_1 = np.log(s_0), np.log(s_1)
    v_0, v_1 = b_0, b_1
    e = 0
    while e < n_ev and ev_steps[e] == 0:
        v_0 += ev_log[e, 0]
        v_1 += ev_log[e, 1]
        e += 1
    x_0, x_1 = s_0 * np.exp(v_0 - b_0), s_1 * np.exp(v_1 - b_1)
    int_0, int_1 = 0.0, 0.0
    k = 0
    while k < n_cp and checkpoints[k] == 0:
        cp_x[k, 0], cp_x[k, 1] = x_0, x_1
        cp_int[k, 0], cp_int[k, 1] = 0.0, 0.0
        k += 1
    if store:
        out_v[0, 0], out_v[0, 1] = v_0, v_1
    for n in range(m):
        h = dt[n]
        br_0 = a2[n, 0] + (a1[n, 0] - a2[n, 0]) / (1.0 + x_1) - c[n, 0] * x_0
        br_1 = a2[n, 1] + (a1[n, 1] - a2[n, 1]) / (1.0 + x_0) - c[n, 1] * x_1
        v_0 = v_0 + (br_0 + shift[n, 0]) * h + sig[n, 0] * dw[n, 0]
        v_1 = v_1 + (br_1 + shift[n, 1]) * h + sig[n, 1] * dw[n, 1]
        if abs(v_0) > bound or abs(v_1) > bound:
            return OVERFLOW, n + 1, int_0, int_1
        y_0, y_1 = s_0 * np.exp(v_0 - b_0), s_1 * np.exp(v_1 - b_1)
        int_0 += 0.5 * (x_0 + y_0) * h
        int_1 += 0.5 * (x_1 + y_1) * h
        if e < n_ev and ev_steps[e] == n + 1:
            while e < n_ev and ev_steps[e] == n + 1:
                v_0 += ev_log[e, 0]
                v_1 += ev_log[e, 1]
                e += 1
            if abs(v_0) > bound or abs(v_1) > bound:
                return OVERFLOW, n + 1, int_0, int_1
            y_0, y_1 = s_0 * np.exp(v_0 - b_0), s_1 * np.exp(v_1 - b_1)
        x_0, x_1 = y_0, y_1
        if store:
            out_v[n + 1, 0], out_v[n + 1, 1] = v_0, v_1
        while k < n_cp and checkpoints[k] == n + 1:
            cp_x[k, 0], cp_x[k, 1] = x_0, x_1
            cp_int[k, 0], cp_int[k, 1] = int_0, int_1
            k += 1
    return OK, -1, int_0, int_1


@numba.njit(cache=True, nogil=True)
def direct_euler(x0, dt, dw, a1, a2, c, sig, shift, ev_steps, ev_factor, checkpoints,
                 store, floor, out_x, cp_x, cp_int):
    """Explicit multiplicative Euler on ``x``, clamping non-positive updates to ``floor``.

    Returns ``(breaches, integral_0, integral_1)``.
    """
    m = dt.shape[0]
    n_ev = ev_steps.shape[0]
    n_cp = checkpoints.shape[0]
    x_0, x_1 = x0[0], x0[1]
    e = 0
    while e < n_ev and ev_steps[e] == 0:
        x_0 *= ev_factor[e, 0]
        x_1 *= ev_factor[e, 1]
        e += 1
    breaches = 0
    int_0, int_1 = 0.0, 0.0
    k = 0
    while k < n_cp and checkpoints[k] == 0:
        cp_x[k, 0], cp_x[k, 1] = x_0, x_1
        cp_int[k, 0], cp_int[k, 1] = 0.0, 0.0
        k += 1
    if store:
        out_x[0, 0], out_x[0, 1] = x_0, x_1
    for n in range(m):
        h = dt[n]
        br_0 = a2[n, 0] + (a1[n, 0] - a2[n, 0]) / (1.0 + x_1) - c[n, 0] * x_0
        br_1 = a2[n, 1] + (a1[n, 1] - a2[n, 1]) / (1.0 + x_0) - c[n, 1] * x_1
        y_0 = x_0 * (1.0 + (br_0 + shift[n, 0]) * h + sig[n, 0] * dw[n, 0])
        y_1 = x_1 * (1.0 + (br_1 + shift[n, 1]) * h + sig[n, 1] * dw[n, 1])
        if not y_0 > 0.0:
            y_0 = floor
            breaches += 1
        if not y_1 > 0.0:
            y_1 = floor
            breaches += 1
        int_0 += 0.5 * (x_0 + y_0) * h
        int_1 += 0.5 * (x_1 + y_1) * h
        while e < n_ev and ev_steps[e] == n + 1:
            y_0 *= ev_factor[e, 0]
            y_1 *= ev_factor[e, 1]
            e += 1
        x_0, x_1 = y_0, y_1
        if store:
            out_x[n + 1, 0], out_x[n + 1, 1] = x_0, x_1
        while k < n_cp and checkpoints[k] == n + 1:
            cp_x[k, 0], cp_x[k, 1] = x_0, x_1
            cp_int[k, 0], cp_int[k, 1] = int_0, int_1
            k += 1
    return breaches, int_0, int_1
