"""Per-cell two-well density kernels in plain numpy.

This is the fallback used when the compiled ``_kernels`` module is not
available, and the only path for d >= 3.  Both implementations share the
calling convention of :func:`density_and_grad`.
"""

import numpy as np

HARD_MIN = 0
SMOOTH_HARMONIC = 1


def well_projection(F, m):
    """Nearest point of SO(d)·diag(m) to each matrix in ``F``.

    Returns ``(dist2, P)``.  The squared distance is summed from the entries
    of ``F - P`` rather than from singular values, which keeps it accurate
    close to the well.
    """
    F = np.asarray(F, dtype=float)
    m = np.asarray(m, dtype=float)
    d = F.shape[-1]
    if d == 1:
        P = np.broadcast_to(m.reshape(1, 1), F.shape)
    elif d == 2:
        # X = F M^T, the optimal rotation is the rotation part of X
        a = F[..., 0, 0] * m[0] + F[..., 1, 1] * m[1]
        b = F[..., 1, 0] * m[0] - F[..., 0, 1] * m[1]
        r = np.hypot(a, b)
        safe = r > 0.0
        cs = np.where(safe, a / np.where(safe, r, 1.0), 1.0)
        sn = np.where(safe, b / np.where(safe, r, 1.0), 0.0)
        P = np.empty_like(F)
        P[..., 0, 0] = cs * m[0]
        P[..., 0, 1] = -sn * m[1]
        P[..., 1, 0] = sn * m[0]
        P[..., 1, 1] = cs * m[1]
    else:
        X = F * m
        U, _, Vt = np.linalg.svd(X)
        sign = np.sign(np.linalg.det(U @ Vt))
        sign = np.where(sign == 0, 1.0, sign)
        U = U.copy()
        U[..., :, -1] *= sign[..., None]
        P = (U @ Vt) * m
    diff = F - P
    return np.einsum("...ij,...ij->...", diff, diff), P


def density_and_grad(F, kappa, c, variant, want_grad=True):
    """Density values and derivatives for a stack of matrices of shape (n, d, d)."""
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    mA = np.ones(d)
    mB = np.ones(d)
    mB[-1] = 1.0 + kappa
    a, PA = well_projection(F, mA)
    b, PB = well_projection(F, mB)
    if variant == HARD_MIN:
        use_a = a <= b
        W = c * np.where(use_a, a, b)
        if not want_grad:
            return W, None
        P = np.where(use_a[..., None, None], PA, PB)
        return W, 2.0 * c * (F - P)
    s = a + b
    pos = s > 0.0
    s_safe = np.where(pos, s, 1.0)
    W = np.where(pos, c * a * b / s_safe, 0.0)
    if not want_grad:
        return W, None
    wa = np.where(pos, (b / s_safe) ** 2, 0.0)
    wb = np.where(pos, (a / s_safe) ** 2, 0.0)
    dW = 2.0 * c * (wa[..., None, None] * (F - PA) + wb[..., None, None] * (F - PB))
    return W, dW
