"""Per-step update kernels.

Everything here works on flat numpy arrays (CSR adjacency for both layers,
per-agent parameter vectors) so it compiles under numba and runs unchanged in
the interpreter when JIT is disabled.

Randomness is passed in, never drawn here: each step consumes one row
``(u_node, u_action)`` of a uniform ``(k, 2)`` block. This keeps the two
execution paths bit-identical and makes ``run`` equal to repeated ``step``.
"""
import math

import numpy as np

from ._jit import njit

TIE_TOL = 1e-12


@njit(cache=True, nogil=True)
def action_sum(i, x, a_ptr, a_idx):
    s = 0
    for k in range(a_ptr[i], a_ptr[i + 1]):
        s += x[a_idx[k]]
    return s


@njit(cache=True, nogil=True)
def opinion_update(i, x, y, a_ptr, a_idx, w_ptr, w_idx, w_val, mu_i):
    d = a_ptr[i + 1] - a_ptr[i]
    comm = 0.0
    for k in range(w_ptr[i], w_ptr[i + 1]):
        comm += w_val[k] * y[w_idx[k]]
    if mu_i == 0.0:
        return comm
    return (1.0 - mu_i) * comm + mu_i * action_sum(i, x, a_ptr, a_idx) / d


@njit(cache=True, nogil=True)
def payoffs(y_i, d, xsum, lam_i, alpha):
    """Payoffs of actions +1 and -1 given the neighbours' action sum."""
    if lam_i == 1.0:
        # social term vanishes; also covers agents without influence neighbours
        return 0.5 * y_i, -0.5 * y_i
    plus = 0.5 * lam_i * y_i + (1.0 - lam_i) * (1.0 + alpha) * (d + xsum) / (2.0 * d)
    minus = -0.5 * lam_i * y_i + (1.0 - lam_i) * (d - xsum) / (2.0 * d)
    return plus, minus


@njit(cache=True, nogil=True)
def logistic(z):
    if z >= 0.0:
        return 1.0 / (1.0 + math.exp(-z))
    e = math.exp(z)
    return e / (1.0 + e)


@njit(cache=True, nogil=True)
def choice_prob(gain, beta_i):
    """Probability of an action whose payoff exceeds the alternative by ``gain``."""
    if math.isinf(beta_i):
        if gain > TIE_TOL:
            return 1.0
        if gain < -TIE_TOL:
            return 0.0
        return 0.5
    if beta_i == 0.0:
        return 0.5
    return logistic(beta_i * gain)


@njit(cache=True, nogil=True)
def apply_step(i, u_action, x, y, a_ptr, a_idx, w_ptr, w_idx, w_val, mu, lam, beta, alpha):
    """Update agent ``i`` in place; returns P(+1) used for the draw.

    Opinion and action are both computed from the pre-step state.
    """
    d = a_ptr[i + 1] - a_ptr[i]
    y_new = opinion_update(i, x, y, a_ptr, a_idx, w_ptr, w_idx, w_val, mu[i])
    plus, minus = payoffs(y[i], d, action_sum(i, x, a_ptr, a_idx), lam[i], alpha)
    p_plus = choice_prob(plus - minus, beta[i])
    x[i] = 1 if u_action < p_plus else -1
    y[i] = y_new
    return p_plus


@njit(cache=True, nogil=True)
def pick_node(u, n):
    i = int(u * n)
    return i if i < n else n - 1


@njit(cache=True, nogil=True)
def run_block(x, y, a_ptr, a_idx, w_ptr, w_idx, w_val, mu, lam, beta, alpha,
              uniforms, t0, every, rec_t, rec_x, rec_y, rec_pos):
    """Apply ``len(uniforms)`` steps starting at time ``t0``.

    After each step whose new time is a multiple of ``every`` the population
    averages are written at ``rec_pos`` (when ``every > 0``). Returns the next
    free record slot.
    """
    n = x.shape[0]
    xsum = 0
    for j in range(n):
        xsum += x[j]
    for k in range(uniforms.shape[0]):
        i = pick_node(uniforms[k, 0], n)
        old = x[i]
        apply_step(i, uniforms[k, 1], x, y, a_ptr, a_idx, w_ptr, w_idx, w_val,
                   mu, lam, beta, alpha)
        xsum += x[i] - old
        t = t0 + k + 1
        if every > 0 and t % every == 0:
            ysum = 0.0
            for j in range(n):
                ysum += y[j]
            rec_t[rec_pos] = t
            rec_x[rec_pos] = xsum / n
            rec_y[rec_pos] = ysum / n
            rec_pos += 1
    return rec_pos


@njit(cache=True, nogil=True)
def run_final(x, y, a_ptr, a_idx, w_ptr, w_idx, w_val, mu, lam, beta, alpha, uniforms):
    """Same as :func:`run_block` without recording."""
    n = x.shape[0]
    for k in range(uniforms.shape[0]):
        i = pick_node(uniforms[k, 0], n)
        apply_step(i, uniforms[k, 1], x, y, a_ptr, a_idx, w_ptr, w_idx, w_val,
                   mu, lam, beta, alpha)


def warmup():
    """Compile the kernels on a two-node toy problem."""
    x = np.array([1, -1], dtype=np.int64)
    y = np.array([1.0, -1.0])
    ptr = np.array([0, 1, 2], dtype=np.int64)
    idx = np.array([1, 0], dtype=np.int64)
    w = np.array([1.0, 1.0])
    par = np.array([0.5, 0.5])
    beta = np.array([math.inf, 1.0])
    u = np.full((2, 2), 0.25)
    rec_t = np.zeros(4, dtype=np.int64)
    rec = np.zeros(4)
    run_block(x, y, ptr, idx, ptr, idx, w, par, par, beta, 0.5, u, 0, 1, rec_t, rec, rec.copy(), 0)
    run_final(x, y, ptr, idx, ptr, idx, w, par, par, beta, 0.5, u)
