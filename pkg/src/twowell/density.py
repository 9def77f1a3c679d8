"""Two-well stored-energy densities and their derivatives.

The wells are ``A = Id`` and ``B = diag(1, ..., 1, 1 + kappa)``.  A density
is a function of the distances to the rotated wells ``SO(d)A`` and
``SO(d)B`` only, which makes it frame indifferent by construction.
"""

from dataclasses import dataclass

import numpy as np

from . import _backend
from ._kernels_py import HARD_MIN, SMOOTH_HARMONIC, well_projection
from .errors import DomainError, InvalidInputError

VARIANTS = {"hard-min": HARD_MIN, "smooth-harmonic": SMOOTH_HARMONIC}
WELLS = ("A", "B")


@dataclass(frozen=True)
class TwoWellDensity:
    """Model two-well density ``W`` with amplitude ``c`` and well gap ``kappa``.

    ``hard-min`` is ``c * min(dA, dB)**2``; ``smooth-harmonic`` is
    ``c * dA**2 dB**2 / (dA**2 + dB**2)``.
    """

    d: int = 2
    kappa: float = 1.0
    c: float = 1.0
    variant: str = "smooth-harmonic"

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise DomainError(f"dimension must be a positive integer, got {self.d!r}")
        if not (np.isfinite(self.kappa) and self.kappa > 0):
            raise DomainError(f"kappa must be positive, got {self.kappa!r}")
        if not (np.isfinite(self.c) and self.c > 0):
            raise DomainError(f"c must be positive, got {self.c!r}")
        if self.variant not in VARIANTS:
            raise DomainError(f"unknown variant {self.variant!r}; expected one of {sorted(VARIANTS)}")

    @property
    def code(self):
        return VARIANTS[self.variant]

    def diag(self, label):
        """Diagonal entries of well ``label``."""
        if label not in WELLS:
            raise InvalidInputError(f"well label must be 'A' or 'B', got {label!r}")
        m = np.ones(self.d)
        if label == "B":
            m[-1] = 1.0 + self.kappa
        return m

    def well(self, label, R=None):
        M = np.diag(self.diag(label))
        return M if R is None else np.asarray(R, dtype=float) @ M

    @property
    def c1(self):
        return self.c / 2.0 if self.variant == "smooth-harmonic" else self.c

    @property
    def c2(self):
        return self.c

    @property
    def delta_W(self):
        """Radius around each well set inside which the density is C^2."""
        return self.kappa / 4.0

    def __call__(self, F):
        return density_eval(self, F)


def _check_matrices(F, d):
    F = np.asarray(F, dtype=float)
    if F.shape[-2:] != (d, d):
        raise InvalidInputError(f"expected trailing shape ({d}, {d}), got {F.shape}")
    if not np.all(np.isfinite(F)):
        raise InvalidInputError("matrix entries must be finite")
    return F


def _polar_rotation(X):
    """Rotation factor of ``X`` with the determinant sign folded into the last column."""
    U, _, Vt = np.linalg.svd(X)
    if np.linalg.det(U @ Vt) < 0:
        U = U.copy()
        U[:, -1] *= -1.0
    return U @ Vt


def distance_to_well(F, M, R_pre=None, kappa=1.0):
    """Frobenius distance from ``F`` to the orbit ``SO(d) M``.

    ``M`` is a well label (``'A'``/``'B'``, using ``kappa``) or an explicit
    matrix.  ``R_pre`` rotates ``M`` before the orbit is formed; since it is a
    rotation the orbit, and hence the distance, is unchanged.
    """
    F = np.asarray(F, dtype=float)
    d = F.shape[-1]
    F = _check_matrices(F, d)
    if isinstance(M, str):
        if M not in WELLS:
            raise InvalidInputError(f"well label must be 'A' or 'B', got {M!r}")
        m = np.ones(d)
        if M == "B":
            m[-1] = 1.0 + kappa
        if R_pre is None:
            dist2, _ = well_projection(F, m)
            return np.sqrt(dist2)
        M = np.diag(m)
    M = np.asarray(M, dtype=float)
    if R_pre is not None:
        M = np.asarray(R_pre, dtype=float) @ M
    flat = F.reshape(-1, d, d)
    out = np.empty(len(flat))
    for i, Fi in enumerate(flat):
        R = _polar_rotation(Fi @ M.T)
        out[i] = np.linalg.norm(Fi - R @ M)
    return out.reshape(F.shape[:-2]) if F.ndim > 2 else float(out[0])


def distance_to_wells(W, F):
    """Distance to the union ``SO(d)A ∪ SO(d)B``."""
    F = _check_matrices(F, W.d)
    a, _ = well_projection(F, W.diag("A"))
    b, _ = well_projection(F, W.diag("B"))
    return np.sqrt(np.minimum(a, b))


def density_eval(W, F):
    """Density value at one matrix or a stack of matrices."""
    F = _check_matrices(F, W.d)
    val, _ = _backend.density_and_grad(F, W.kappa, W.c, W.code, want_grad=False)
    return float(val) if F.ndim == 2 else val


def density_gradient(W, F):
    """Density value and its derivative ``dW/dF`` (analytic for both variants)."""
    F = _check_matrices(F, W.d)
    val, grad = _backend.density_and_grad(F, W.kappa, W.c, W.code, want_grad=True)
    if F.ndim == 2:
        return float(val), grad
    return val, grad


def density_hessian(W, F, step=1e-5):
    """Central finite-difference Hessian of ``W`` at ``F`` as a (d*d, d*d) matrix."""
    F = _check_matrices(F, W.d)
    n = W.d * W.d
    base = F.reshape(n)
    pts = []
    for a in range(n):
        for b in range(n):
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                x = base.copy()
                x[a] += sa * step
                x[b] += sb * step
                pts.append(x)
    vals = density_eval(W, np.array(pts).reshape(-1, W.d, W.d)).reshape(n, n, 4)
    H = (vals[..., 0] - vals[..., 1] - vals[..., 2] + vals[..., 3]) / (4.0 * step * step)
    return 0.5 * (H + H.T)


def _skew_basis(d):
    basis = []
    for i in range(d):
        for j in range(i + 1, d):
            S = np.zeros((d, d))
            S[i, j], S[j, i] = -1.0, 1.0
            basis.append(S)
    return basis


def density_hessian_at_well(W, M, R=None, method="analytic"):
    """Second derivative of ``W`` at the well point ``R @ M`` as a (d*d, d*d) matrix.

    Both model variants reduce to ``c * dist^2`` to second order at a well,
    so the Hessian is ``2c`` times the projection onto the normal space of
    the orbit ``SO(d)M``; its tangent space at ``RM`` is ``{S R M : S skew}``.
    ``method='fd'`` uses central differences with step 1e-5 instead.
    """
    d = W.d
    R = np.eye(d) if R is None else np.asarray(R, dtype=float)
    P = R @ W.well(M)
    if method == "fd":
        return density_hessian(W, P)
    if method != "analytic":
        raise InvalidInputError(f"unknown method {method!r}")
    n = d * d
    tangent = [(S @ P).reshape(n) for S in _skew_basis(d)]
    proj = np.eye(n)
    if tangent:
        Q, _ = np.linalg.qr(np.array(tangent).T)
        proj = proj - Q @ Q.T
    H = 2.0 * W.c * proj
    return 0.5 * (H + H.T)


def q_lin(W, M, R, G, hessian=None):
    """Linearized elastic energy ``½ D²W(RM) G:G``."""
    H = density_hessian_at_well(W, M, R) if hessian is None else hessian
    g = np.asarray(G, dtype=float).reshape(-1, W.d * W.d)
    out = 0.5 * np.einsum("ka,ab,kb->k", g, H, g)
    return float(out[0]) if np.ndim(G) == 2 else out


@dataclass(frozen=True)
class TaylorReport:
    region: str  # "near" uses inequality (i), "far" uses (ii)
    C: float
    C_delta: float
    rho: float
    max_violation: float
    holds: bool


def taylor_bounds_check(W, F, G, delta, C=None):
    """Fit the smallest constants for the two Taylor-type upper bounds.

    Near the wells (``dist(F) < delta``) the bound is
    ``W(F+G) <= W(F) + C sqrt(W(F))|G| + ½D²W(F)G:G + rho|G|^2``
    with ``C = |DW(F)|/sqrt(W(F))`` unless given; far from them it is
    ``W(F+G) <= W(F) + C_delta sqrt(W(F))|G|``.  ``G`` may be one matrix or
    a stack of samples.
    """
    F = _check_matrices(F, W.d)
    Gs = _check_matrices(G, W.d).reshape(-1, W.d, W.d)
    if not (0 < delta <= W.delta_W / 2.0):
        raise DomainError(f"delta must lie in (0, {W.delta_W / 2.0}], got {delta}")
    gnorm = np.linalg.norm(Gs.reshape(len(Gs), -1), axis=1)
    if np.any(gnorm >= delta):
        raise DomainError("every perturbation must satisfy |G| < delta")
    w0, dw0 = density_gradient(W, F)
    w1 = density_eval(W, F + Gs)
    root = np.sqrt(max(w0, 0.0))
    near = float(distance_to_wells(W, F)) < delta
    nz = gnorm > 0
    if near:
        if C is None:
            C = float(np.linalg.norm(dw0) / root) if root > 0 else 0.0
        H = density_hessian(W, F)
        quad = 0.5 * np.einsum("ka,ab,kb->k", Gs.reshape(len(Gs), -1), H, Gs.reshape(len(Gs), -1))
        excess = w1 - w0 - C * root * gnorm - quad
        rho = float(np.max(np.where(nz, excess / np.where(nz, gnorm**2, 1.0), 0.0), initial=0.0))
        rho = max(rho, 0.0)
        rhs = w0 + C * root * gnorm + quad + rho * gnorm**2
        viol = float(np.max(w1 - rhs, initial=0.0))
        return TaylorReport("near", C, float("nan"), rho, viol, viol <= 1e-14)
    denom = root * gnorm
    ratio = np.where(nz & (denom > 0), (w1 - w0) / np.where(denom > 0, denom, 1.0), 0.0)
    C_delta = max(float(np.max(ratio, initial=0.0)), 0.0)
    rhs = w0 + C_delta * denom
    viol = float(np.max(w1 - rhs, initial=0.0))
    return TaylorReport("far", float("nan"), C_delta, float("nan"), viol, viol <= 1e-14)
