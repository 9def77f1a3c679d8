"""Global rotation plus per-cell phase indicator for a deformation.

Phase labels are stored as small integers: 0 for the ``A`` well, 1 for ``B``.
"""

from dataclasses import dataclass, field

import numpy as np

from .energy import cell_gradients
from .errors import InvalidInputError

PHASE_A = 0
PHASE_B = 1
LABELS = ("A", "B")


def well_diagonals(kappa, d):
    mA = np.ones(d)
    mB = np.ones(d)
    mB[-1] = 1.0 + kappa
    return mA, mB


def _phase_distances(F, R, kappa):
    d = F.shape[-1]
    mA, mB = well_diagonals(kappa, d)
    RA = R * mA
    RB = R * mB
    dA = np.sum((F - RA) ** 2, axis=(-2, -1))
    dB = np.sum((F - RB) ** 2, axis=(-2, -1))
    return dA, dB


def nearest_phase(F, R, kappa=1.0):
    """Label of the well ``R A`` or ``R B`` nearest to each matrix; ties go to A."""
    F = np.asarray(F, dtype=float)
    R = np.asarray(R, dtype=float)
    if not np.all(np.isfinite(F)):
        raise InvalidInputError("gradient entries must be finite")
    dA, dB = _phase_distances(F, R, kappa)
    lab = np.where(dA <= dB, PHASE_A, PHASE_B).astype(np.int8)
    return int(lab) if lab.ndim == 0 else lab


def phase_matrices(phi, kappa, d):
    """Stack of well matrices matching the labels in ``phi``."""
    mA, mB = well_diagonals(kappa, d)
    diag = np.where(np.asarray(phi)[..., None] == PHASE_B, mB, mA)
    return diag[..., None, :] * np.eye(d)


def _polar(X):
    U, S, Vt = np.linalg.svd(X)
    if np.linalg.det(U @ Vt) < 0:
        U = U.copy()
        U[:, -1] *= -1.0
    return U @ Vt, S


def fit_rotation(grads, phi, kappa=1.0, weights=None):
    """Rotation minimizing ``sum |F - R M_phi|^2`` (Procrustes with det correction)."""
    grads = np.asarray(grads, dtype=float)
    d = grads.shape[-1]
    F = grads.reshape(-1, d, d)
    if len(F) == 0:
        raise InvalidInputError("need at least one cell")
    M = phase_matrices(np.asarray(phi).reshape(-1), kappa, d)
    w = np.ones(len(F)) if weights is None else np.asarray(weights, dtype=float).reshape(-1)
    acc = np.einsum("n,nij,nkj->ik", w, F, M)
    R, S = _polar(acc)
    if np.all(S <= 1e-14):
        raise InvalidInputError("degenerate rotation accumulator")
    return R


def alternating_objective(grads, phi, R, kappa, cellvol=1.0):
    d = grads.shape[-1]
    M = phase_matrices(phi, kappa, d)
    return float(np.sum((grads - R @ M) ** 2) * cellvol)


@dataclass
class PhaseDecomposition:
    R: np.ndarray
    phi: np.ndarray
    residual_l2: float
    perimeter: float
    aniso: list
    slice_integral: float
    objective_trace: list = field(default_factory=list, repr=False)
    monotone: bool = True
    converged: bool = True
    warning: str = ""
    window: str = "interior"


def window_mask(cell_shape, window):
    """Cells used for fitting: all of them, or all but the outer cell ring."""
    if window == "full":
        return np.ones(cell_shape, dtype=bool)
    if window != "interior":
        raise InvalidInputError(f"window must be 'interior' or 'full', got {window!r}")
    if any(n < 3 for n in cell_shape):
        raise InvalidInputError("interior window needs at least 3 cells per axis")
    mask = np.zeros(cell_shape, dtype=bool)
    mask[tuple(slice(1, n - 1) for n in cell_shape)] = True
    return mask


def _run(F, R, kappa, max_iter, tol):
    phi = nearest_phase(F, R, kappa)
    trace = [alternating_objective(F, phi, R, kappa)]
    monotone = True
    converged = False
    for _ in range(max_iter):
        R = fit_rotation(F, phi, kappa)
        half = alternating_objective(F, phi, R, kappa)
        new_phi = nearest_phase(F, R, kappa)
        obj = alternating_objective(F, new_phi, R, kappa)
        slack = 1e-12 * max(1.0, trace[-1])
        if half > trace[-1] + slack or obj > half + slack:
            monotone = False
        drop = trace[-1] - obj
        trace.append(obj)
        same = np.array_equal(new_phi, phi)
        phi = new_phi
        if same or drop < tol * max(1.0, trace[-2]):
            converged = True
            break
    return R, phi, trace, monotone, converged


def decompose_gradients(grads, spacing, kappa=1.0, window="interior", max_iter=50, tol=1e-12):
    """Alternate nearest-phase labeling and Procrustes fitting on a cell gradient field.

    ``grads`` has shape ``cell_shape + (d, d)``.  Besides the identity, the
    polar rotations of the all-A and all-B accumulators are tried as starting
    points and the run with the lowest final objective wins.
    """
    grads = np.asarray(grads, dtype=float)
    d = grads.shape[-1]
    cell_shape = grads.shape[:-2]
    if len(cell_shape) != d:
        raise InvalidInputError("gradient field must have one cell axis per dimension")
    mask = window_mask(cell_shape, window)
    Fw = grads[mask]
    cellvol = float(np.prod(spacing))
    mA, mB = well_diagonals(kappa, d)
    starts = [np.eye(d)]
    for m in (mA, mB):
        R0, S = _polar(np.einsum("nij,j->ij", Fw, m))
        if np.any(S > 1e-14):
            starts.append(R0)
    best = None
    for R0 in starts:
        run = _run(Fw, R0, kappa, max_iter, tol)
        if best is None or run[2][-1] < best[2][-1] - 1e-14 * max(1.0, best[2][-1]):
            best = run
    R, _, trace, monotone, converged = best
    phi = nearest_phase(grads, R, kappa)
    resid = np.sqrt(alternating_objective(Fw, phi[mask], R, kappa, cellvol))
    meas = phase_boundary_measures(phi, spacing)
    warning = "" if converged else f"no convergence within {max_iter} iterations; best iterate returned"
    return PhaseDecomposition(R, phi, float(resid), meas["perimeter"], meas["aniso"],
                              meas["slice_integral"], [t * cellvol for t in trace],
                              monotone, converged, warning, window)


def decompose_phases(y, kappa=1.0, window="interior", max_iter=50, tol=1e-12):
    """Rotation ``R`` and phase field ``phi`` with ``grad y ≈ R phi`` cellwise."""
    if not np.all(np.isfinite(y.values)):
        raise InvalidInputError("field values must be finite")
    grads = cell_gradients(y).reshape(tuple(y.dims) + (y.d, y.d))
    return decompose_gradients(grads, y.spacing, kappa, window, max_iter, tol)


def phase_boundary_measures(phi, spacing):
    """Discrete perimeter of ``{phi = A}``, its directional parts and slice integral.

    Each A/B face adjacency counts its face area.  ``aniso[i]`` keeps the faces
    with normal ``e_i`` for the non-vertical axes; ``slice_integral`` adds up,
    slab by slab along the last axis, the in-slice boundary measure times the
    slab height.
    """
    phi = np.asarray(phi)
    d = phi.ndim
    if d not in (1, 2, 3):
        raise InvalidInputError("phase field must have 1, 2 or 3 axes")
    spacing = tuple(float(h) for h in spacing)
    per_axis = []
    for k in range(d):
        changes = np.count_nonzero(np.diff(phi, axis=k) != 0)
        face = float(np.prod([spacing[m] for m in range(d) if m != k]))
        per_axis.append(changes * face)
    perimeter = float(sum(per_axis))
    aniso = [float(a) for a in per_axis[:-1]]
    slice_integral = 0.0
    if d >= 2:
        for layer in np.moveaxis(phi, -1, 0):
            for k in range(d - 1):
                changes = np.count_nonzero(np.diff(layer, axis=k) != 0)
                length = float(np.prod([spacing[m] for m in range(d - 1) if m != k]))
                slice_integral += changes * length * spacing[-1]
    return {"perimeter": perimeter, "aniso": aniso, "slice_integral": float(slice_integral)}


def angle_scan_rotation(grads, kappa=1.0, n_angles=10_000, zoom_steps=3, cellvol=1.0):
    """Brute-force global minimizer over SO(2) of ``sum_cells min_M |F - R M|^2``.

    A uniform scan is followed by ``zoom_steps`` rescans of the bracket around
    the best angle.  Returns ``(R, theta, objective)``.
    """
    F = np.asarray(grads, dtype=float).reshape(-1, 2, 2)
    if F.shape[-1] != 2:
        raise InvalidInputError("angle scan is only defined in two dimensions")

    # |F - R M|^2 = |F|^2 + |M|^2 - 2 (cos(t) a + sin(t) b) with a, b linear in F
    sq = np.sum(F**2, axis=(-2, -1))
    coeffs = []
    for m in well_diagonals(kappa, 2):
        a = F[:, 0, 0] * m[0] + F[:, 1, 1] * m[1]
        b = F[:, 1, 0] * m[0] - F[:, 0, 1] * m[1]
        coeffs.append((sq + np.sum(m**2), a, b))

    def objective(thetas):
        out = np.empty(len(thetas))
        for i0 in range(0, len(thetas), 256):
            c = np.cos(thetas[i0:i0 + 256])[:, None]
            s = np.sin(thetas[i0:i0 + 256])[:, None]
            dA, dB = (base - 2.0 * (c * a + s * b) for base, a, b in coeffs)
            out[i0:i0 + 256] = np.sum(np.minimum(dA, dB), axis=1)
        return out

    thetas = np.linspace(-np.pi, np.pi, n_angles, endpoint=False)
    step = thetas[1] - thetas[0]
    vals = objective(thetas)
    best = thetas[np.argmin(vals)]
    for _ in range(zoom_steps):
        thetas = np.linspace(best - 2 * step, best + 2 * step, n_angles)
        step = thetas[1] - thetas[0]
        vals = objective(thetas)
        best = thetas[np.argmin(vals)]
    c, s = np.cos(best), np.sin(best)
    return np.array([[c, -s], [s, c]]), float(best), float(np.min(vals) * cellvol)


def phi_labels(phi):
    """Human-readable labels for an integer phase field."""
    return np.where(np.asarray(phi) == PHASE_B, "B", "A")


def run_length_encode(phi):
    """Run-length encoding of the flattened phase field as ``[[label, count], ...]``."""
    flat = np.asarray(phi).ravel()
    if flat.size == 0:
        return []
    edges = np.flatnonzero(np.diff(flat)) + 1
    starts = np.concatenate([[0], edges])
    ends = np.concatenate([edges, [flat.size]])
    return [[LABELS[int(flat[a])], int(b - a)] for a, b in zip(starts, ends)]
