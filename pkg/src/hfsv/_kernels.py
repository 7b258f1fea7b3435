"""Numba-compiled inner loops for the scalar state-space engine.

All randomness enters through pre-drawn standard-normal arrays so that the
kernels are deterministic functions of their inputs and every draw comes
from one seeded generator at the call site.
"""

from __future__ import annotations

import numpy as np
from numba import njit

# predictive variances are clamped here; state dimension is 1 and
# conditioning is mild, so plain variance recursions suffice
VAR_FLOOR = 1e-18

_LOG_2PI = float(np.log(2.0 * np.pi))


@njit(cache=True)
def kalman_filter(y, F, c, Q, H, g, R, m0, P0):
    """Forward filter for a scalar time-varying linear-Gaussian model.

    Returns filtered means, filtered variances and the log likelihood (sum of
    one-step predictive log densities).
    """
    n = y.shape[0]
    mf = np.empty(n)
    pf = np.empty(n)
    m = m0
    p = P0
    loglik = 0.0
    for j in range(n):
        if j > 0:
            m = F[j - 1] * m + c[j - 1]
            p = F[j - 1] * F[j - 1] * p + Q[j - 1]
            if p < VAR_FLOOR:
                p = VAR_FLOOR
        s = H[j] * H[j] * p + R[j]
        v = y[j] - (H[j] * m + g[j])
        loglik += -0.5 * (_LOG_2PI + np.log(s) + v * v / s)
        k = p * H[j] / s
        m = m + k * v
        p = p * (1.0 - k * H[j])
        if p < 0.0:
            p = 0.0
        mf[j] = m
        pf[j] = p
    return mf, pf, loglik


@njit(cache=True)
def backward_draw(F, c, Q, mf, pf, z):
    """One joint draw of the state path given filtered moments.

    ``z`` holds n pre-drawn standard normals; the draw conditions backwards
    from the final filtered law.
    """
    n = mf.shape[0]
    x = np.empty(n)
    x[n - 1] = mf[n - 1] + np.sqrt(pf[n - 1]) * z[n - 1]
    for j in range(n - 2, -1, -1):
        pp = F[j] * F[j] * pf[j] + Q[j]
        if pp < VAR_FLOOR:
            pp = VAR_FLOOR
        gain = pf[j] * F[j] / pp
        mean = mf[j] + gain * (x[j + 1] - (F[j] * mf[j] + c[j]))
        var = pf[j] * (1.0 - gain * F[j])
        if var < 0.0:
            var = 0.0
        x[j] = mean + np.sqrt(var) * z[j]
    return x


@njit(cache=True)
def rts_smooth(F, c, Q, mf, pf):
    """Rauch-Tung-Striebel smoothed means and variances."""
    n = mf.shape[0]
    ms = np.empty(n)
    ps = np.empty(n)
    ms[n - 1] = mf[n - 1]
    ps[n - 1] = pf[n - 1]
    for j in range(n - 2, -1, -1):
        pp = F[j] * F[j] * pf[j] + Q[j]
        if pp < VAR_FLOOR:
            pp = VAR_FLOOR
        gain = pf[j] * F[j] / pp
        ms[j] = mf[j] + gain * (ms[j + 1] - (F[j] * mf[j] + c[j]))
        ps[j] = pf[j] + gain * gain * (ps[j + 1] - pp)
        if ps[j] < 0.0:
            ps[j] = 0.0
    return ms, ps


@njit(cache=True)
def draw_indicators(y_star, h, log_p, m_half, v_half_sq, u):
    """Categorical draws of the mixture indicators, one per observation.

    Log-space normalisation per step; ``u`` holds pre-drawn uniforms.
    """
    n = y_star.shape[0]
    n_comp = log_p.shape[0]
    out = np.empty(n, dtype=np.int64)
    logw = np.empty(n_comp)
    w = np.empty(n_comp)
    for j in range(n):
        top = -np.inf
        for l in range(n_comp):
            resid = y_star[j] - h[j] - m_half[l]
            logw[l] = log_p[l] - 0.5 * np.log(v_half_sq[l]) - 0.5 * resid * resid / v_half_sq[l]
            if logw[l] > top:
                top = logw[l]
        total = 0.0
        for l in range(n_comp):
            w[l] = np.exp(logw[l] - top)
            total += w[l]
        target = u[j] * total
        acc = 0.0
        pick = n_comp - 1
        for l in range(n_comp):
            acc += w[l]
            if acc >= target:
                pick = l
                break
        out[j] = pick
    return out
