"""One-dimensional optimal transition profiles and the double-profile construction.

Along the lamination direction a transition from ``B`` to ``A`` reduces to a
scalar problem in ``t -> psi(t)`` with density ``W~(s) = W(Id + (s-1) e_dd)``.

The discretization is conforming: the slope ``v = psi'`` is continuous and
piecewise linear between nodes, so ``psi`` is a genuine H^2 function and its
discrete energy is its exact continuum energy.  Cell integrals of ``W~`` are
split at the kinks of the density and done by Gauss-Legendre quadrature,
which is exact for the piecewise-quadratic hard-min model.  Every discrete
energy therefore sits above the Modica-Mortola value ``2 int sqrt(W~)``.
A damped Newton iteration on the free nodal slopes with a tridiagonal
Hessian solves N = 4096 in well under a second.
"""

import math
import re
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.integrate import simpson
from scipy.sparse.linalg import spsolve

from .density import TwoWellDensity, density_gradient
from .errors import DomainError, GeometryError, InvalidInputError, StagnationError
from .grid import GridField
from .reduce import tree_sum


@dataclass(frozen=True)
class ReducedDensity:
    """``W~(t) = W(Id + (t-1) e_dd)`` for a base two-well density."""

    base: TwoWellDensity

    @property
    def kappa(self):
        return self.base.kappa

    @property
    def kinks(self):
        """Slopes in (1, 1+kappa) where ``W~`` is not smooth."""
        return (1.0 + self.kappa / 2.0,) if self.base.variant == "hard-min" else ()

    def _stack(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        F = np.broadcast_to(np.eye(self.base.d), t.shape + (self.base.d, self.base.d)).copy()
        F[..., -1, -1] = t
        return F

    def value_and_slope(self, t):
        scalar = np.ndim(t) == 0
        val, grad = density_gradient(self.base, self._stack(t))
        slope = grad[..., -1, -1]
        if scalar:
            return float(val[0]), float(slope[0])
        return val, slope

    def __call__(self, t):
        return self.value_and_slope(t)[0]

    def curvature(self, t, step=1e-6):
        """Central difference of the slope; may be very negative at a kink."""
        t = np.asarray(t, dtype=float)
        return (self.value_and_slope(t + step)[1] - self.value_and_slope(t - step)[1]) / (2 * step)


def reduced_density_eval(rd, t):
    if not np.all(np.isfinite(t)):
        raise InvalidInputError("t must be finite")
    return rd(t)


def analytic_K(rd, quad_points=4000):
    """``2 * int_1^{1+kappa} sqrt(W~(s)) ds`` by composite Simpson quadrature."""
    if quad_points < 1000:
        raise DomainError(f"quad_points must be at least 1000, got {quad_points}")
    n = int(quad_points) + (int(quad_points) % 2)
    s = np.linspace(1.0, 1.0 + rd.kappa, n + 1)
    w = rd(s)
    if not np.all(np.isfinite(w)):
        raise InvalidInputError("reduced density is not finite on the integration range")
    return 2.0 * float(simpson(np.sqrt(np.maximum(w, 0.0)), x=s))


# discrete profile energy ----------------------------------------------------

_GAUSS_S, _GAUSS_W = np.polynomial.legendre.leggauss(6)
_GAUSS_S = 0.5 * (_GAUSS_S + 1.0)
_GAUSS_W = 0.5 * _GAUSS_W


def _cell_quadrature(rd, a, b):
    """Quadrature nodes ``s`` and weights on [0, 1] per cell, split at density kinks.

    The slope on a cell runs linearly from ``a`` to ``b``.  Returns arrays of
    shape (n_cells, n_points).
    """
    breaks = [np.zeros_like(a), np.ones_like(a)]
    span = b - a
    for k in rd.kinks:
        crosses = (a - k) * (b - k) < 0
        s = np.where(crosses, (k - a) / np.where(crosses, span, 1.0), 1.0)
        breaks.append(s)
    brk = np.sort(np.stack(breaks, axis=1), axis=1)
    lo, hi = brk[:, :-1], brk[:, 1:]
    length = hi - lo
    s = lo[:, :, None] + length[:, :, None] * _GAUSS_S
    w = length[:, :, None] * _GAUSS_W
    n = len(a)
    return s.reshape(n, -1), w.reshape(n, -1)


def cell_energies(v, h, eps, rd):
    """Bulk plus gradient energy of each cell for nodal slopes ``v``."""
    v = np.asarray(v, dtype=float)
    a, b = v[:-1], v[1:]
    s, w = _cell_quadrature(rd, a, b)
    vals = rd(a[:, None] + (b - a)[:, None] * s)
    bulk = (h / eps**2) * np.sum(w * vals, axis=1)
    return bulk + (eps**2 / h) * (b - a) ** 2


def slope_energy(v, h, eps, rd):
    """``int (1/eps^2) W~(psi') + eps^2 |psi''|^2`` for piecewise-linear nodal slopes."""
    return tree_sum(cell_energies(v, h, eps, rd))


def _slope_derivatives(v, h, eps, rd):
    """Gradient and the three Hessian bands of the bulk part (curvature clipped at 0)."""
    a, b = v[:-1], v[1:]
    s, w = _cell_quadrature(rd, a, b)
    pts = a[:, None] + (b - a)[:, None] * s
    _, slope = rd.value_and_slope(pts.ravel())
    slope = slope.reshape(pts.shape)
    curv = np.maximum(rd.curvature(pts.ravel()).reshape(pts.shape), 0.0)
    c = h / eps**2
    g = np.zeros_like(v)
    g[:-1] += c * np.sum(w * slope * (1 - s), axis=1)
    g[1:] += c * np.sum(w * slope * s, axis=1)
    haa = c * np.sum(w * curv * (1 - s) ** 2, axis=1)
    hab = c * np.sum(w * curv * (1 - s) * s, axis=1)
    hbb = c * np.sum(w * curv * s * s, axis=1)
    diag = np.zeros_like(v)
    diag[:-1] += haa
    diag[1:] += hbb
    k = 2.0 * eps**2 / h
    dv = np.diff(v)
    g[:-1] -= k * dv
    g[1:] += k * dv
    diag[:-1] += k
    diag[1:] += k
    off = hab - k
    return g, diag, off


def slopes_of(field_):
    """Nodal slopes of a 1D field by second-order differences."""
    return np.gradient(field_.values[:, 0], field_.spacing[0], edge_order=2)


def modica_mortola_bound(v, rd):
    """``2 * sum sqrt(W~(v_i)) |v_{i+1} - v_i|``, the discrete Modica-Mortola sum."""
    v = np.asarray(v, dtype=float)
    return 2.0 * tree_sum(np.sqrt(np.maximum(rd(v[:-1]), 0.0)) * np.abs(np.diff(v)))


def integrate_slopes(v, h):
    """Nodal values of ``psi`` with ``psi' = v`` piecewise linear and ``psi[0] = 0``."""
    return np.concatenate([[0.0], np.cumsum(0.5 * h * (v[:-1] + v[1:]))])


@dataclass
class ProfileSolution:
    grid: np.ndarray
    psi: np.ndarray
    energy: float
    eps: float
    bc_ok: bool
    slopes: np.ndarray = field(repr=False)
    n_clamp: int = 0
    trace: list = field(default_factory=list, repr=False)
    iterations: int = 0

    @property
    def h(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def N(self):
        return len(self.slopes) - 1

    def as_field(self):
        return GridField((self.N,), (self.h,), self.psi, (float(self.grid[0]),))


def solve_single_profile(rd, eps, N=4096, clamp_fraction=0.05, max_iter=200, tol=1e-13,
                         init="ramp"):
    """Minimize the discrete 1D transition energy from ``1+kappa`` to ``1`` on (-1/2, 1/2).

    Nodal slopes are frozen to ``1+kappa`` on the left and ``1`` on the right
    ``clamp_fraction`` of the interval; ``psi(0) = 0`` fixes the constant.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if N < 64:
        raise DomainError(f"N must be at least 64, got {N}")
    if not (0 < clamp_fraction <= 0.1):
        raise DomainError(f"clamp_fraction must lie in (0, 0.1], got {clamp_fraction}")
    kappa = rd.kappa
    h = 1.0 / N
    nc = max(2, int(round(clamp_fraction * N)))
    v = np.empty(N + 1)
    v[:nc + 1] = 1.0 + kappa
    v[N - nc:] = 1.0
    free = np.zeros(N + 1, dtype=bool)
    free[nc + 1:N - nc] = True
    nf = int(free.sum())
    if init == "ramp":
        v[free] = 1.0 + kappa - kappa * np.arange(1, nf + 1) / (nf + 1)
    elif init == "step":
        v[free] = np.where(np.arange(nf) < nf // 2, 1.0 + kappa, 1.0)
    else:
        raise InvalidInputError(f"unknown init {init!r}")

    E = slope_energy(v, h, eps, rd)
    trace = [E]
    it = 0
    converged = False
    while it < max_iter:
        g, diag, off = _slope_derivatives(v, h, eps, rd)
        gf = g[free]
        H = sp.diags([off[free[:-1] & free[1:]], diag[free], off[free[:-1] & free[1:]]],
                     [-1, 0, 1], format="csc")
        step = spsolve(H, -gf)
        dec = -float(np.dot(gf, step))
        if dec <= tol * max(E, 1.0) or np.max(np.abs(gf)) <= 1e-14:
            converged = True
            break
        t = 1.0
        for _ in range(60):
            trial = v.copy()
            trial[free] += t * step
            E_new = slope_energy(trial, h, eps, rd)
            if E_new <= E - 1e-4 * t * dec:
                break
            t *= 0.5
        else:
            if dec <= 1e-9 * max(E, 1.0):
                converged = True
                break
            raise StagnationError("profile line search failed", iterate=v.copy(), trace=trace)
        v, E = trial, E_new
        trace.append(E)
        it += 1
    if not converged:
        raise StagnationError(f"profile solver did not converge in {max_iter} iterations",
                              iterate=v.copy(), trace=trace)
    grid = -0.5 + h * np.arange(N + 1)
    psi = integrate_slopes(v, h)
    psi = psi - np.interp(0.0, grid, psi)
    bc_ok = bool(np.all(v[:nc + 1] == 1.0 + kappa) and np.all(v[N - nc:] == 1.0))
    return ProfileSolution(grid, psi, E, float(eps), bc_ok, v, nc, trace, it)


# double profiles --------------------------------------------------------------

WIDTH_RATIO_FLOOR = 0.25


def parse_w_rule(rule):
    """Parse a layer-width rule into ``(C, beta)`` meaning ``w = C * eps**beta``.

    Accepted spellings: ``eps``, ``2eps``, ``const*eps`` forms such as
    ``3*eps``, ``sqrt-eps`` (``eps**0.5``) and general ``C*eps^beta``.
    The admissible class needs ``w -> 0`` and ``liminf w/eps > 0``, that is
    ``0 < beta <= 1``; anything else is rejected.
    """
    text = str(rule).replace(" ", "").lower()
    if text.startswith("w="):
        text = text[2:]
    named = {"eps": (1.0, 1.0), "sqrt-eps": (1.0, 0.5), "sqrt(eps)": (1.0, 0.5)}
    if text in named:
        C, beta = named[text]
    else:
        m = re.fullmatch(r"([0-9.eE+-]+)\*?eps(?:(?:\^|\*\*)([0-9.eE+-]+))?", text)
        m2 = re.fullmatch(r"eps(?:\^|\*\*)([0-9.eE+-]+)", text)
        if m:
            C, beta = float(m.group(1)), float(m.group(2) or 1.0)
        elif m2:
            C, beta = 1.0, float(m2.group(1))
        else:
            raise InvalidInputError(f"cannot parse layer-width rule {rule!r}")
    if not (C > 0 and 0 < beta <= 1):
        raise DomainError(f"layer-width rule {rule!r} leaves the admissible class "
                          "(needs w -> 0 with w/eps bounded below)")
    return C, beta


@dataclass(frozen=True)
class DoubleProfileSpec:
    w_eps: float
    eps0: float
    h: float = 2.0

    def __post_init__(self):
        if not (self.w_eps > 0 and self.eps0 > 0 and self.h > 0):
            raise DomainError("w_eps, eps0 and h must be positive")


@dataclass
class DoubleProfile:
    """Double profile ``z`` with its nodal slopes and the cell ranges of its five pieces."""

    z: GridField
    slopes: np.ndarray = field(repr=False)
    eps: float = 0.0
    ratio: float = 1.0    # eps / eps0
    w_eff: float = 0.0    # layer width after snapping to the grid
    well: str = "A"
    pieces: tuple = ()    # ((name, first_cell, end_cell), ...)


def build_double_profile(profile, eps, spec, kappa, well="A"):
    """Glue two rescaled copies of ``profile`` around a layer of the opposite phase.

    For ``well='A'`` the slope is 1 outside, ``1+kappa`` on ``(0, w/kappa)``
    and follows the reversed (left) and forward (right) rescaled profile on
    the two transition zones of width ``(eps/eps0)**2``.  ``well='B'`` swaps
    the roles of the two values.  The grid step is the profile step scaled by
    ``(eps/eps0)**2`` so the transition cells map one-to-one onto profile
    cells; ``w/kappa`` is snapped to a whole number of cells.
    """
    if well not in ("A", "B"):
        raise InvalidInputError(f"well must be 'A' or 'B', got {well!r}")
    if not (0 < eps <= spec.eps0):
        raise DomainError(f"need 0 < eps <= eps0, got eps={eps}, eps0={spec.eps0}")
    if spec.w_eps < WIDTH_RATIO_FLOOR * eps:
        raise DomainError(f"layer width {spec.w_eps} is below {WIDTH_RATIO_FLOOR}*eps; "
                          "it does not belong to the admissible width class")
    v = np.asarray(profile.slopes, dtype=float)
    N = len(v) - 1
    nc = profile.n_clamp
    top, low = v[0], v[-1]
    if nc < 2 or not (np.all(v[:nc + 1] == top) and np.all(v[N - nc:] == low)):
        raise InvalidInputError("profile must have constant-slope clamp zones")
    ratio = eps / spec.eps0
    hz = ratio**2 / N
    M = int(round(spec.h / hz))
    mw = max(1, int(round((spec.w_eps / kappa) / hz)))
    if N > M or mw + N > M:
        raise GeometryError("transition zones do not fit in (-h, h); increase h or reduce w")
    # node j sits at (j - M) * hz
    outside, middle = (low, top) if well == "A" else (top, low)
    slopes = np.full(2 * M + 1, outside)
    slopes[M - N:M + 1] = v[::-1] if well == "A" else v
    slopes[M:M + mw + 1] = middle
    slopes[M + mw:M + mw + N + 1] = v if well == "A" else v[::-1]
    nodes = integrate_slopes(slopes, hz)
    nodes -= nodes[M]
    z = GridField((2 * M,), (hz,), nodes, (-M * hz,))
    pieces = (("outer-left", 0, M - N), ("transition-left", M - N, M), ("layer", M, M + mw),
              ("transition-right", M + mw, M + mw + N), ("outer-right", M + mw + N, 2 * M))
    return DoubleProfile(z, slopes, float(eps), ratio, mw * hz * kappa, well, pieces)


def double_profile_energy(z, eps, rd):
    """Discrete ``int (1/eps^2) W~(z') + eps^2 |z''|^2`` of a 1D profile.

    A :class:`DoubleProfile` is evaluated exactly through its nodal slopes;
    a bare 1D field gets its slopes from second-order differences first.
    """
    if isinstance(z, DoubleProfile):
        return slope_energy(z.slopes, z.z.spacing[0], eps, rd)
    return slope_energy(slopes_of(z), z.spacing[0], eps, rd)


def double_profile_breakdown(dp, rd):
    """Energy carried by each of the five pieces; they add up to the total."""
    cells = cell_energies(dp.slopes, dp.z.spacing[0], dp.eps, rd)
    return {name: tree_sum(cells[a:b]) for name, a, b in dp.pieces}


@dataclass
class DoubleProfileRow:
    eps: float
    K_eps: float
    w_eps: float
    E_dp: float
    ratio: float


@dataclass
class DoubleProfileReport:
    analytic_K: float
    eps0: float
    rule: str
    rows: list
    eps0_within_tolerance: bool


def kdp_equals_2k_report(rd, eps_list, w_rule="eps", N=4096, clamp_fraction=0.05, h=2.0,
                         well="A", profiles=None):
    """Tabulate ``E_dp / (2 K_eps)`` along a decreasing eps sweep.

    ``eps0`` is the largest sweep value whose single-profile energy is within
    5% of :func:`analytic_K`; its profile is rescaled for every smaller eps.
    ``profiles`` may supply precomputed single-profile solutions keyed by eps.
    """
    eps_list = [float(e) for e in eps_list]
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise InvalidInputError("eps sweep must be strictly decreasing")
    C, beta = parse_w_rule(w_rule)
    aK = analytic_K(rd)
    sols = dict(profiles or {})
    for e in eps_list:
        if e not in sols:
            sols[e] = solve_single_profile(rd, e, N, clamp_fraction)
    good = [e for e in eps_list if abs(sols[e].energy / aK - 1.0) <= 0.05]
    ok = bool(good)
    eps0 = good[0] if good else min(eps_list, key=lambda e: abs(sols[e].energy / aK - 1.0))
    rows = []
    for e in eps_list:
        K = sols[e].energy
        w = C * e**beta
        if e > eps0:
            rows.append(DoubleProfileRow(e, K, w, math.nan, math.nan))
            continue
        dp = build_double_profile(sols[eps0], e, DoubleProfileSpec(w, eps0, h), rd.kappa, well)
        E = double_profile_energy(dp, e, rd)
        rows.append(DoubleProfileRow(e, K, w, E, E / (2.0 * K)))
    return DoubleProfileReport(aK, eps0, str(w_rule), rows, ok)
