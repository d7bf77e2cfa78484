"""Breslow-approximation partial likelihood in margin space.

All Cox-objective code (linear fitting and tree boosting) shares this one
routine, so both model families maximize exactly the same criterion. Risk
sets use a single stable ascending-time sort with suffix accumulations;
tied event times share one risk-set denominator (Breslow).
"""

import numpy as np


def margin_loss_grad_hess(time, event, margins):
    """Negative log partial likelihood with its exact margin derivatives.

    For margins m and risk sets R(t) = {j : t_j >= t},

        loss = -sum_{i: event} [ m_i - log sum_{j in R(t_i)} exp(m_j) ]

    Returns ``(loss, grad, hess)`` where grad_i = -delta_i + sum_k p_ik and
    hess_i = sum_k p_ik (1 - p_ik), summing over event times t_k with
    i in R(t_k) and p_ik = exp(m_i) / sum_{j in R(t_k)} exp(m_j).
    """
    time = np.asarray(time, dtype=np.float64)
    event = np.asarray(event, dtype=bool)
    margins = np.asarray(margins, dtype=np.float64)
    n = time.shape[0]

    order = np.argsort(time, kind="stable")
    t = time[order]
    e = event[order]
    m = margins[order]

    shift = m.max()
    w = np.exp(m - shift)
    suffix = np.cumsum(w[::-1])[::-1]

    # tie groups share the denominator taken at the group's first index
    is_start = np.r_[True, t[1:] != t[:-1]]
    group = np.cumsum(is_start) - 1
    denom = suffix[np.flatnonzero(is_start)]
    d_events = np.bincount(group[e], minlength=denom.shape[0])

    cum_a = np.cumsum(d_events / denom)
    cum_b = np.cumsum(d_events / denom**2)
    a = cum_a[group]
    b = cum_b[group]

    g_sorted = -e.astype(np.float64) + w * a
    h_sorted = np.maximum(w * a - w * w * b, 0.0)
    loss = -float(np.sum((m[e] - shift) - np.log(denom[group[e]])))

    grad = np.empty(n)
    hess = np.empty(n)
    grad[order] = g_sorted
    hess[order] = h_sorted
    return loss, grad, hess
