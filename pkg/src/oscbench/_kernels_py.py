"""Pure-numpy pair-quadrature kernels (fallback backend).

Semantics here are the reference; the compiled extension in _kernels.pyx
implements the same contract.  Each output point's inner sum is evaluated
row-locally, so results do not depend on chunk boundaries or worker counts.
"""
from __future__ import annotations

import numpy as np

KIND_HOMOGENEOUS = 0
KIND_HILBERT = 1
KIND_RIESZ = 2
KIND_LOG_DINI = 3

# radial modulation of the log_dini kernel; keep in sync with _kernels.pyx
LOG_DINI_AMP = 0.5
LOG_DINI_FREQ = 3.0

# kernel-value matrices are evaluated in slabs of about this many entries
_SLAB_ENTRIES = 4_000_000


def _eta(s):
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_cutoff(rho):
    """Smooth profile equal to 1 on rho <= 1/2 and 0 on rho >= 1."""
    rho = np.asarray(rho, dtype=float)
    up = _eta(1.0 - rho)
    down = _eta(rho - 0.5)
    out = np.ones_like(rho)
    mid = (rho > 0.5) & (rho < 1.0)
    out[mid] = up[mid] / (up[mid] + down[mid])
    out[rho >= 1.0] = 0.0
    return out


def _radial_power(r, expo):
    if expo == 1.0:
        return r
    if expo == 2.0:
        return r * r
    if expo == 0.5:
        return np.sqrt(r)
    if expo == 1.5:
        return r * np.sqrt(r)
    return r ** expo


def kernel_matrix(dx0, dx1, r, kind, n, alpha, delta, om_pos, om_neg, om_table):
    """K(x, y) on precomputed displacement arrays; r must be positive."""
    if kind == KIND_HOMOGENEOUS:
        if n == 1:
            om = np.where(dx0 > 0, om_pos, om_neg)
        else:
            T = om_table.shape[0]
            theta = np.arctan2(dx1, dx0)
            pos = (theta / (2.0 * np.pi)) % 1.0 * T
            i0 = np.floor(pos).astype(np.int64) % T
            u = pos - np.floor(pos)
            om = om_table[i0] * (1.0 - u) + om_table[(i0 + 1) % T] * u
    elif kind == KIND_HILBERT:
        om = np.where(dx0 > 0, 1.0, -1.0)
    elif kind == KIND_RIESZ:
        om = np.ones_like(r)
    elif kind == KIND_LOG_DINI:
        om = np.where(dx0 > 0, 1.0, -1.0) * (1.0 + LOG_DINI_AMP * np.cos(LOG_DINI_FREQ * np.log(r)))
    else:
        raise ValueError(f"unknown kernel kind {kind}")
    K = om / _radial_power(r, n - alpha)
    if delta > 0.0:
        K = K * (1.0 - smooth_cutoff(r / delta))
    return K


def pair_quadrature(xp, ip, yp, jp, w, bx, by, exps, kind, alpha, delta,
                    om_pos, om_neg, om_table):
    """sum_j K(x_i, y_j) * prod_s (b_s(x_i)-b_s(y_j))^e_s * w_j, diagonal omitted.

    xp (P,n) output coordinates with flat ids ip (-1 when off-grid), yp/jp/w
    the source cells, bx (S,P) / by (S,M) symbol samples with exponents exps.
    """
    P, n = xp.shape
    M = yp.shape[0]
    out = np.zeros(P)
    if M == 0 or P == 0:
        return out
    chunk = max(1, _SLAB_ENTRIES // M)
    for lo in range(0, P, chunk):
        hi = min(P, lo + chunk)
        dx0 = xp[lo:hi, 0][:, None] - yp[:, 0][None, :]
        if n == 2:
            dx1 = xp[lo:hi, 1][:, None] - yp[:, 1][None, :]
            r = np.hypot(dx0, dx1)
        else:
            dx1 = None
            r = np.abs(dx0)
        bad = (ip[lo:hi, None] == jp[None, :]) | (r == 0.0)
        r_safe = np.where(bad, 1.0, r)
        K = kernel_matrix(dx0, dx1, r_safe, kind, n, alpha, delta, om_pos, om_neg, om_table)
        for s in range(bx.shape[0]):
            d = bx[s, lo:hi][:, None] - by[s][None, :]
            e = int(exps[s])
            K = K * (d if e == 1 else d ** e)
        K[bad] = 0.0
        out[lo:hi] = (K * w[None, :]).sum(axis=1)
    return out
