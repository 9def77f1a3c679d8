"""Discrete anisotropically penalized two-well energy and its gradient.

The deformation gradient lives at cell centers (forward differences averaged
over the parallel cell edges).  Second derivatives live at nodes: three-point
differences inside, one-sided three-point differences on the boundary, and
mixed derivatives as products of first-difference operators.  Nodal sums use
trapezoid weights so that every node carries its share of the domain volume.
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from . import _backend
from .errors import DomainError, GridTooSmallError, InvalidInputError
from .reduce import tree_sum


def eta_bar(eps, d):
    """Default anisotropic weight ``eps ** (-1 + 1/(2d))``."""
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return float(eps) ** (-1.0 + 1.0 / (2.0 * d))


@dataclass(frozen=True)
class EnergyParams:
    eps: float
    d: int = 2
    eta: float = field(default=None)

    def __post_init__(self):
        if not self.eps > 0:
            raise DomainError(f"eps must be positive, got {self.eps}")
        if self.eta is None:
            object.__setattr__(self, "eta", eta_bar(self.eps, self.d))
        elif self.eta < 0:
            raise DomainError(f"eta must be non-negative, got {self.eta}")

    @property
    def alpha_d(self):
        return 1.0 / (2.0 * self.d)


@dataclass(frozen=True)
class EnergyBreakdown:
    bulk: float
    second_gradient: float
    anisotropic: float
    total: float


# 1D building blocks ---------------------------------------------------------

def _forward(n, h):
    """(n, n+1) cell forward difference."""
    return sp.diags([-np.ones(n), np.ones(n)], [0, 1], shape=(n, n + 1)) / h


def _average(n):
    return sp.diags([0.5 * np.ones(n), 0.5 * np.ones(n)], [0, 1], shape=(n, n + 1))


def _second(n, h):
    """(n+1, n+1) second difference; boundary rows copy their neighbour's stencil."""
    m = n + 1
    centre = np.clip(np.arange(m), 1, m - 2)
    rows = np.repeat(np.arange(m), 3)
    cols = (centre[:, None] + np.array([-1, 0, 1])).ravel()
    vals = np.tile([1.0, -2.0, 1.0], m)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m)) / (h * h)


def _first(n, h):
    """(n+1, n+1) nodal first difference: central inside, one-sided at the ends."""
    m = n + 1
    lo = np.maximum(np.arange(m) - 1, 0)
    hi = np.minimum(np.arange(m) + 1, m - 1)
    rows = np.repeat(np.arange(m), 2)
    cols = np.stack([lo, hi], axis=1).ravel()
    span = (hi - lo).astype(float)
    vals = np.stack([-1.0 / span, 1.0 / span], axis=1).ravel()
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, m)) / h


def _trapezoid(n, h):
    w = np.full(n + 1, h)
    w[0] = w[-1] = 0.5 * h
    return w


def _kron_all(mats):
    out = mats[0]
    for m in mats[1:]:
        out = sp.kron(out, m, format="csr")
    return sp.csr_matrix(out)


@dataclass(frozen=True)
class _Operators:
    grad: tuple          # G_k, cells x nodes
    second: tuple        # (j, k, multiplicity, L_jk) with j <= k, nodes x nodes
    node_weights: np.ndarray
    cellvol: float


@lru_cache(maxsize=16)
def grid_operators(dims, spacing):
    """Sparse difference operators for a grid, cached by shape and spacing."""
    d = len(dims)
    if any(n < 2 for n in dims):
        raise GridTooSmallError(f"need at least 3 nodes per axis, got cell counts {dims}")
    eyes = [sp.identity(n + 1, format="csr") for n in dims]
    grad = []
    for k in range(d):
        mats = [_forward(dims[m], spacing[m]) if m == k else _average(dims[m]) for m in range(d)]
        grad.append(_kron_all(mats))
    second = []
    for j in range(d):
        for k in range(j, d):
            if j == k:
                mats = [_second(dims[m], spacing[m]) if m == k else eyes[m] for m in range(d)]
                mult = 1.0
            else:
                mats = [_first(dims[m], spacing[m]) if m in (j, k) else eyes[m] for m in range(d)]
                mult = 2.0
            second.append((j, k, mult, _kron_all(mats)))
    w = _trapezoid(dims[0], spacing[0])
    for m in range(1, d):
        w = np.multiply.outer(w, _trapezoid(dims[m], spacing[m]))
    return _Operators(tuple(grad), tuple(second), np.ravel(w), float(np.prod(spacing)))


def _check(y, W):
    if y.d != W.d:
        raise InvalidInputError(f"field dimension {y.d} does not match density dimension {W.d}")
    if not np.all(np.isfinite(y.values)):
        raise InvalidInputError("field values must be finite")
    return grid_operators(y.dims, y.spacing)


def cell_gradients(y):
    """Deformation gradient at every cell center, shape (n_cells, d, d)."""
    ops = grid_operators(y.dims, y.spacing)
    Y = y.flat()
    return np.stack([G @ Y for G in ops.grad], axis=-1)


def _second_terms(ops, Y):
    """Every second-derivative component applied to the nodal values."""
    return [(j, k, mult, L @ Y) for j, k, mult, L in ops.second]


def energy_densities(y, W, p):
    """Per-cell bulk integrand and per-node second-gradient integrands (already weighted)."""
    ops = _check(y, W)
    Y = y.flat()
    F = np.stack([G @ Y for G in ops.grad], axis=-1)
    w_cell, _ = _backend.density_and_grad(F, W.kappa, W.c, W.code, want_grad=False)
    bulk = w_cell * ops.cellvol / p.eps**2
    full = np.zeros(len(Y))
    dd = np.zeros(len(Y))
    for j, k, mult, Z in _second_terms(ops, Y):
        sq = mult * ops.node_weights * np.einsum("ni,ni->n", Z, Z)
        full += sq
        if j == k == W.d - 1:
            dd += sq
    eta = p.eta if W.d > 1 else 0.0
    nodal = p.eps**2 * full + eta**2 * (full - dd)
    return bulk.reshape(tuple(y.dims)), nodal.reshape(y.node_shape)


def energy_eval(y, W, p):
    """Bulk, second-gradient and anisotropic parts of the discrete energy."""
    ops = _check(y, W)
    Y = y.flat()
    F = np.stack([G @ Y for G in ops.grad], axis=-1)
    w_cell, _ = _backend.density_and_grad(F, W.kappa, W.c, W.code, want_grad=False)
    bulk = tree_sum(w_cell) * ops.cellvol / p.eps**2
    full = 0.0
    dd = 0.0
    for j, k, mult, Z in _second_terms(ops, Y):
        s = mult * tree_sum(ops.node_weights[:, None] * Z * Z, axis=0)
        s = tree_sum(s)
        full += s
        if j == k == W.d - 1:
            dd += s
    second = p.eps**2 * full
    aniso = (p.eta**2 * (full - dd)) if W.d > 1 else 0.0
    return EnergyBreakdown(bulk, second, aniso, bulk + second + aniso)


def energy_gradient(y, W, p):
    """Exact gradient of :func:`energy_eval` with respect to the nodal values."""
    ops = _check(y, W)
    Y = y.flat()
    F = np.stack([G @ Y for G in ops.grad], axis=-1)
    _, dW = _backend.density_and_grad(F, W.kappa, W.c, W.code, want_grad=True)
    g = np.zeros_like(Y)
    scale = ops.cellvol / p.eps**2
    for k, G in enumerate(ops.grad):
        g += scale * (G.T @ dW[:, :, k])
    eta2 = p.eta**2 if W.d > 1 else 0.0
    for j, k, mult, L in ops.second:
        coef = p.eps**2 if j == k == W.d - 1 else p.eps**2 + eta2
        Z = L @ Y
        g += 2.0 * coef * mult * (L.T @ (ops.node_weights[:, None] * Z))
    return y.with_values(g)


def total_energy(y, W, p):
    return energy_eval(y, W, p).total
