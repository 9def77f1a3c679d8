"""Slab partitions of a phase field, per-component translations and rescaled displacements.

The domain is cut into horizontal slabs wherever the slice-area function of
either phase crosses a threshold ``sigma``; the phase sets are intersected
with the slabs and split into face-connected components.
"""

import itertools
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import ndimage

from .errors import DomainError, InvalidInputError
from .grid import GridField
from .rigidity import LABELS, PHASE_A, PHASE_B, phase_matrices

N_SIGMA = 16
_ids = itertools.count(1)


def p_exponent(d):
    """``1 + 3 / (2d(2d - 3))``, which lies in (1, 2) for every d >= 2."""
    if d < 2 or int(d) != d:
        raise DomainError(f"d must be an integer >= 2, got {d}")
    return 1.0 + 3.0 / (2.0 * d * (2.0 * d - 3.0))


def _cross_area(spacing):
    return float(np.prod(spacing[:-1])) if len(spacing) > 1 else 1.0


def slice_area_function(phi, phase, spacing=None):
    """Cross-sectional area of the cells labelled ``phase``, one value per layer along the last axis."""
    phi = np.asarray(phi)
    code = LABELS.index(phase) if isinstance(phase, str) else int(phase)
    spacing = (1.0,) * phi.ndim if spacing is None else tuple(spacing)
    counts = np.count_nonzero(phi == code, axis=tuple(range(phi.ndim - 1)))
    return counts * _cross_area(spacing)


def sigma_candidates(eps, d):
    """Sixteen evenly spaced values strictly inside ``(eps^p / 2, eps^p)``."""
    top = eps ** p_exponent(d)
    k = np.arange(1, N_SIGMA + 1)
    return 0.5 * top + 0.5 * top * k / (N_SIGMA + 1)


def _jumps(f, sigma):
    below = f <= sigma
    return np.flatnonzero(below[1:] != below[:-1]) + 1


@dataclass(frozen=True)
class Component:
    cells: np.ndarray            # sorted flat cell indices
    phase: int
    volume: float
    interval: tuple              # (z_lo, z_hi) of the owning slab
    layers: tuple                # (first layer, one past last layer)
    kind: str                    # "layer" or "small-volume"
    fill: float
    translation: np.ndarray = None
    empty_flag: bool = False

    @property
    def label(self):
        return LABELS[self.phase]


@dataclass(frozen=True)
class CaccioppoliPartition:
    components: tuple
    sigma_eps: float
    p_exponent: float
    cell_shape: tuple
    spacing: tuple
    origin: tuple
    eps: float
    slabs: dict = field(default_factory=dict)   # phase -> list of (first, stop) layer ranges
    pid: int = 0

    @property
    def n_cells(self):
        return int(np.prod(self.cell_shape))

    @property
    def height(self):
        return self.cell_shape[-1] * self.spacing[-1]

    @property
    def has_translations(self):
        return all(c.translation is not None for c in self.components)

    def owner(self):
        """Component index of every cell, shape ``cell_shape``."""
        out = np.full(self.n_cells, -1, dtype=np.int64)
        for j, c in enumerate(self.components):
            out[c.cells] = j
        return out.reshape(self.cell_shape)

    def to_dict(self):
        comps = []
        for c in self.components:
            comps.append({
                "phase": c.label,
                "volume": c.volume,
                "n_cells": int(len(c.cells)),
                "d_interval": [float(c.interval[0]), float(c.interval[1])],
                "translation": None if c.translation is None else [float(v) for v in c.translation],
                "class": c.kind,
                "fill_fraction": c.fill,
            })
        return {"sigma_eps": self.sigma_eps, "p_exponent": self.p_exponent, "eps": self.eps,
                "components": comps}


def _classify(volume, fill, sigma, height):
    return "small-volume" if volume <= sigma * height else "layer"


def _sort_key(c):
    return (-c.volume, c.interval[0], c.phase, int(c.cells[0]) if len(c.cells) else -1)


def build_partition(phi, eps, spacing=None, origin=None):
    """Partition of the cells of ``phi`` into slab-confined connected phase components.

    ``sigma`` is the candidate in ``(eps^p / 2, eps^p)`` with the fewest jumps
    of ``{f <= sigma}`` summed over both phases (first one on ties).  Each
    phase is cut at its own jump heights, and face-connected pieces of the
    phase set inside one slab become components.
    """
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    phi = np.asarray(phi)
    d = phi.ndim
    if d < 2:
        raise InvalidInputError("phase field needs at least two axes")
    if not np.all(np.isin(phi, (PHASE_A, PHASE_B))):
        raise InvalidInputError("phase field must contain only A/B labels")
    spacing = (1.0 / phi.shape[-1],) * d if spacing is None else tuple(float(h) for h in spacing)
    origin = (0.0,) * d if origin is None else tuple(float(o) for o in origin)
    p = p_exponent(d)
    f = {ph: slice_area_function(phi, ph, spacing) for ph in (PHASE_A, PHASE_B)}
    cands = sigma_candidates(eps, d)
    counts = [sum(len(_jumps(f[ph], s)) for ph in f) for s in cands]
    sigma = float(cands[int(np.argmin(counts))])

    n_layers = phi.shape[-1]
    cellvol = float(np.prod(spacing))
    area = _cross_area(spacing) * int(np.prod(phi.shape[:-1]))
    height = n_layers * spacing[-1]
    structure = ndimage.generate_binary_structure(d, 1)
    flat_index = np.arange(phi.size).reshape(phi.shape)
    comps = []
    slabs = {}
    for ph in (PHASE_A, PHASE_B):
        cuts = [0] + list(_jumps(f[ph], sigma)) + [n_layers]
        slabs[ph] = [(a, b) for a, b in zip(cuts, cuts[1:])]
        for a, b in slabs[ph]:
            mask = phi[..., a:b] == ph
            if not mask.any():
                continue
            lab, n = ndimage.label(mask, structure=structure)
            idx = flat_index[..., a:b]
            for k in range(1, n + 1):
                cells = np.sort(idx[lab == k])
                vol = len(cells) * cellvol
                z = (origin[-1] + a * spacing[-1], origin[-1] + b * spacing[-1])
                fill = vol / ((b - a) * spacing[-1] * area)
                comps.append(Component(cells, ph, vol, z, (a, b), _classify(vol, fill, sigma, height), fill))
    comps.sort(key=_sort_key)
    return CaccioppoliPartition(tuple(comps), sigma, p, tuple(phi.shape), spacing, origin,
                                float(eps), slabs, next(_ids))


def _cell_centers(y):
    """Cell-centre positions and cell-averaged deformation values (corner means)."""
    vals = y.values
    d = y.d
    acc = np.zeros(tuple(y.dims) + (d,))
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(c, c + n) for c, n in zip(corner, y.dims))
        acc += vals[sl]
    return y.cell_centers(), acc / 2**d


def _check_grid(y, partition):
    if tuple(y.dims) != tuple(partition.cell_shape):
        raise InvalidInputError("field and partition have different cell grids")


def component_translations(y, R, partition, kappa=1.0):
    """Fill ``t_j`` with the mean of ``y - R M_j x`` over the cells of each component."""
    _check_grid(y, partition)
    R = np.asarray(R, dtype=float)
    x, yc = _cell_centers(y)
    x = x.reshape(-1, y.d)
    yc = yc.reshape(-1, y.d)
    comps = []
    for c in partition.components:
        if len(c.cells) == 0:
            comps.append(replace(c, translation=np.zeros(y.d), empty_flag=True))
            continue
        RM = R @ phase_matrices(c.phase, kappa, y.d)
        t = np.mean(yc[c.cells] - x[c.cells] @ RM.T, axis=0)
        comps.append(replace(c, translation=t))
    return replace(partition, components=tuple(comps), pid=next(_ids))


def _gap(a, b, eps):
    return float(np.linalg.norm(a.translation - b.translation)) / eps


def coarsen_partition(partition, eps, threshold=10.0):
    """Merge same-phase components whose translations differ by less than ``threshold * eps``.

    The closest offending pair is merged first (lowest indices on ties); the
    merged component keeps the translation of the larger one.  Stops once
    every same-phase pair is at least ``threshold * eps`` apart.
    """
    if not partition.has_translations:
        raise InvalidInputError("translations must be filled before coarsening")
    if not eps > 0 or not threshold > 0:
        raise DomainError("eps and threshold must be positive")
    comps = list(partition.components)
    while True:
        best = None
        for i in range(len(comps)):
            for j in range(i + 1, len(comps)):
                if comps[i].phase != comps[j].phase:
                    continue
                g = _gap(comps[i], comps[j], eps)
                if g < threshold and (best is None or g < best[0]):
                    best = (g, i, j)
        if best is None:
            break
        _, i, j = best
        a, b = comps[i], comps[j]
        keep = a if (a.volume >= b.volume) else b
        cells = np.union1d(a.cells, b.cells)
        vol = a.volume + b.volume
        interval = (min(a.interval[0], b.interval[0]), max(a.interval[1], b.interval[1]))
        layers = (min(a.layers[0], b.layers[0]), max(a.layers[1], b.layers[1]))
        area = _cross_area(partition.spacing) * int(np.prod(partition.cell_shape[:-1]))
        fill = vol / ((interval[1] - interval[0]) * area)
        merged = Component(cells, a.phase, vol, interval, layers,
                           _classify(vol, fill, partition.sigma_eps, partition.height), fill,
                           keep.translation, a.empty_flag and b.empty_flag)
        comps = [c for k, c in enumerate(comps) if k not in (i, j)] + [merged]
        comps.sort(key=_sort_key)
    if len(comps) == len(partition.components):
        return partition
    return replace(partition, components=tuple(comps), pid=next(_ids))


def selection_margin(partition, eps):
    """Smallest ``|t_i - t_j| / eps`` over same-phase pairs (``inf`` if there are none)."""
    out = np.inf
    comps = partition.components
    for i in range(len(comps)):
        for j in range(i + 1, len(comps)):
            if comps[i].phase == comps[j].phase:
                out = min(out, _gap(comps[i], comps[j], eps))
    return out


@dataclass(frozen=True)
class RescaledDisplacement:
    u: GridField
    eps: float
    partition_id: int
    node_owner: np.ndarray = field(repr=False)


def node_owners(partition):
    """Owning component of each node: majority over adjacent cells, lower index on ties."""
    owner = partition.owner()
    d = owner.ndim
    n_comp = len(partition.components)
    node_shape = tuple(n + 1 for n in partition.cell_shape)
    votes = np.zeros(node_shape + (n_comp,), dtype=np.int32)
    onehot = np.eye(n_comp, dtype=np.int32)[owner]
    for corner in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(c, c + n) for c, n in zip(corner, partition.cell_shape))
        votes[sl] += onehot
    return np.argmax(votes, axis=-1)


def rescaled_displacement(y, R, partition, eps, kappa=1.0):
    """``u = (y - (R M_j x + t_j)) / eps`` at every node, ``j`` its owning component."""
    if not partition.has_translations:
        raise InvalidInputError("translations must be filled first")
    if not eps > 0:
        raise DomainError(f"eps must be positive, got {eps}")
    _check_grid(y, partition)
    R = np.asarray(R, dtype=float)
    owner = node_owners(partition)
    x = y.node_coords()
    u = np.empty_like(y.values)
    for j, c in enumerate(partition.components):
        sel = owner == j
        RM = R @ phase_matrices(c.phase, kappa, y.d)
        u[sel] = (y.values[sel] - x[sel] @ RM.T - c.translation) / eps
    return RescaledDisplacement(y.with_values(u), float(eps), partition.pid, owner)


@dataclass(frozen=True)
class JumpReport:
    jump: np.ndarray
    deviation: float
    row_below: int
    row_above: int

    @property
    def height(self):
        return float(np.linalg.norm(self.jump))


def slab_rows(field, z_lo, z_hi):
    """Node rows bracketing the height interval ``[z_lo, z_hi]``."""
    h = field.spacing[-1]
    o = field.origin[-1]
    lo = int(np.floor((z_lo - o) / h + 1e-9))
    hi = int(np.ceil((z_hi - o) / h - 1e-9))
    return lo, hi


def jump_height_extract(u, slab, offset=3):
    """Mean jump of ``u`` across an interface slab and its spread over the slab.

    ``slab`` is a height interval ``(z_lo, z_hi)`` containing the interface
    layer; ``u`` is sampled ``offset`` node rows below and above it.
    """
    field = u.u if isinstance(u, RescaledDisplacement) else u
    if offset < 3:
        raise InvalidInputError("evaluation offset must be at least 3 cells")
    lo, hi = slab_rows(field, *slab)
    below, above = lo - offset, hi + offset
    n = field.node_shape[-1]
    if below < 0 or above > n - 1:
        raise InvalidInputError("interface slab too close to the domain boundary")
    diff = field.values[..., above, :] - field.values[..., below, :]
    diff = diff.reshape(-1, field.d)
    mean = diff.mean(axis=0)
    dev = float(np.max(np.linalg.norm(diff - mean, axis=-1)))
    return JumpReport(mean, dev, below, above)
