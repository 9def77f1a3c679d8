"""Laminate test fields, mollified exactly in closed form.

All generated maps have the form ``y(x) = R (x_1, ..., x_{d-1}, phi(x_d)) + b``
with ``phi`` continuous and piecewise linear.  Convolving with the bump
``(1 - |x|^2)^4`` on a ball of radius ``delta`` therefore only acts on
``phi``, through the one-dimensional marginal ``(1 - s^2)^(4 + (d-1)/2)``.
The kinks of ``phi`` are smoothed with the closed-form ramp convolution
below, so the fields carry no quadrature error and are exactly affine
wherever the kernel does not reach a kink.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import betainc, beta as beta_fn

from .errors import InvalidInputError, ResolutionError
from .grid import GridField


def marginal_exponent(d):
    return 4.0 + 0.5 * (d - 1)


def _ramp_conv(u, m):
    """``int (u - s)_+ k(s) ds`` for the normalized kernel ``k ∝ (1 - s^2)^m`` on [-1, 1]."""
    u = np.asarray(u, dtype=float)
    uc = np.clip(u, -1.0, 1.0)
    k0 = betainc(m + 1.0, m + 1.0, 0.5 * (uc + 1.0))
    Z = beta_fn(0.5, m + 1.0)
    k1 = -((1.0 - uc * uc) ** (m + 1.0)) / (2.0 * (m + 1.0) * Z)
    return np.where(u >= 1.0, u, np.where(u <= -1.0, 0.0, u * k0 - k1))


def _ramp_conv_slope(u, m):
    uc = np.clip(np.asarray(u, dtype=float), -1.0, 1.0)
    return betainc(m + 1.0, m + 1.0, 0.5 * (uc + 1.0))


@dataclass(frozen=True)
class PiecewiseLinear:
    """``phi(t) = s0 * t + c + sum_j ds_j (t - z_j)_+``."""

    s0: float
    c: float
    kinks: tuple
    jumps: tuple

    def __call__(self, t, delta=0.0, m=4.5):
        t = np.asarray(t, dtype=float)
        out = self.s0 * t + self.c
        for z, ds in zip(self.kinks, self.jumps):
            if delta > 0:
                out = out + ds * delta * _ramp_conv((t - z) / delta, m)
            else:
                out = out + ds * np.maximum(t - z, 0.0)
        return out

    def slope(self, t, delta=0.0, m=4.5):
        t = np.asarray(t, dtype=float)
        out = np.full_like(t, self.s0)
        for z, ds in zip(self.kinks, self.jumps):
            if delta > 0:
                out = out + ds * _ramp_conv_slope((t - z) / delta, m)
            else:
                out = out + ds * (t > z)
        return out


def laminate_profile(phases, interfaces, kappa, anchor=0.0):
    """Continuous piecewise-linear ``phi`` with slope 1 on A bands and 1+kappa on B bands.

    ``phases`` lists band labels from bottom to top and ``interfaces`` the
    heights between them; ``phi(anchor) = anchor``.
    """
    phases = list(phases)
    interfaces = [float(z) for z in interfaces]
    if len(phases) != len(interfaces) + 1:
        raise InvalidInputError("need exactly one more band than interfaces")
    if any(p not in ("A", "B") for p in phases):
        raise InvalidInputError("band labels must be 'A' or 'B'")
    if any(b <= a for a, b in zip(interfaces, interfaces[1:])):
        raise InvalidInputError("interfaces must be strictly increasing")
    slopes = [1.0 + kappa if p == "B" else 1.0 for p in phases]
    jumps = tuple(b - a for a, b in zip(slopes, slopes[1:]))
    base = PiecewiseLinear(slopes[0], 0.0, tuple(interfaces), jumps)
    c = anchor - float(base(anchor))
    return PiecewiseLinear(slopes[0], c, tuple(interfaces), jumps)


def _laminate_values(nodes, phi, R, delta, b, tilt=None):
    d = nodes.shape[-1]
    m = marginal_exponent(d)
    t = nodes[..., -1]
    if tilt is not None:
        t = t - tilt(nodes[..., :-1])
    pre = nodes.copy()
    pre[..., -1] = phi(t, delta, m)
    out = pre @ np.asarray(R, dtype=float).T
    if b is not None:
        out = out + np.asarray(b, dtype=float)
    return out


def laminate_grid(dims, extent, origin=None):
    """Probe grid with the given cell counts over a box."""
    dims = tuple(int(n) for n in dims)
    origin = (0.0,) * len(dims) if origin is None else tuple(origin)
    spacing = tuple(L / n for L, n in zip(extent, dims))
    return dims, spacing, origin


def generate_laminate(phases, interfaces, kappa=1.0, R=None, mollify_scale=0.0, dims=(8, 64),
                      extent=(1.0, 1.0), origin=None, anchor=0.0, b=None, tilt=None):
    """Laminate with gradient ``R M`` on each band, mollified at ``mollify_scale``.

    ``tilt`` optionally shifts the interfaces laterally: the profile is
    evaluated at ``x_d - tilt(x')``.
    """
    dims, spacing, origin = laminate_grid(dims, extent, origin)
    d = len(dims)
    R = np.eye(d) if R is None else np.asarray(R, dtype=float)
    phi = laminate_profile(phases, interfaces, kappa, anchor)
    probe = GridField(dims, spacing, np.zeros(tuple(n + 1 for n in dims) + (d,)), origin)
    vals = _laminate_values(probe.node_coords(), phi, R, float(mollify_scale), b, tilt)
    return probe.with_values(vals)


# Example family with three regimes -------------------------------------------

EXAMPLE_EXTENT = (1.0, 2.0)


def resolution_rule(eps, height=2.0, cells_per_eps2=8, lateral_cells=8, width=1.0):
    """Cell counts with spacing at most ``eps^2 / cells_per_eps2`` across the layers.

    The fields vary only along the last axis, so the lateral axis keeps a
    fixed small count.
    """
    n_vert = int(math.ceil(height * cells_per_eps2 / eps**2 - 1e-9))
    return (int(lateral_cells), n_vert)


def example_interfaces(eps, l):
    a = eps**l
    return 1.0 - a, 1.0 + a


def generate_example_sequence(eps, l, kappa=1.0, grid=None, R=None):
    """Mollified three-band map: identity below, a B band of half-height ``eps**l``, shifted identity above.

    Far below the band ``y = x`` and far above ``y = x + 2 kappa eps**l e_2``.
    The mollification radius is ``eps**2``.  ``grid`` gives the cell counts
    on (0, 1) x (0, 2); by default :func:`resolution_rule` picks them.
    """
    if l not in (0.5, 1, 1.0, 2, 2.0):
        raise InvalidInputError(f"l must be 1/2, 1 or 2, got {l}")
    if not (0 < eps < 1):
        raise InvalidInputError(f"eps must lie in (0, 1), got {eps}")
    dims = resolution_rule(eps) if grid is None else tuple(grid)
    h = EXAMPLE_EXTENT[1] / dims[1]
    delta = eps**2
    need = resolution_rule(eps)[1]
    if h > delta / 4.0 + 1e-15:
        raise ResolutionError(f"vertical spacing {h:g} does not resolve the mollifier "
                              f"radius {delta:g}; need at least {need} cells", required=need)
    z_lo, z_hi = example_interfaces(eps, l)
    return generate_laminate(["A", "B", "A"], [z_lo, z_hi], kappa, R, delta, dims,
                             EXAMPLE_EXTENT, (0.0, 0.0), anchor=0.0)


def generate_single_interface(eps, kappa=1.0, grid=None, z=1.0, R=None):
    """Mollified B-below / A-above laminate on (0, 1) x (0, 2)."""
    dims = resolution_rule(eps) if grid is None else tuple(grid)
    return generate_laminate(["B", "A"], [z], kappa, R, eps**2, dims, EXAMPLE_EXTENT,
                             (0.0, 0.0), anchor=z)


def generate_double_interface(eps, w, kappa=1.0, grid=None, z=1.0, R=None):
    """Mollified A | B | A laminate whose B layer has height ``w``."""
    dims = resolution_rule(eps) if grid is None else tuple(grid)
    return generate_laminate(["A", "B", "A"], [z, z + w], kappa, R, eps**2, dims,
                             EXAMPLE_EXTENT, (0.0, 0.0), anchor=0.0)
