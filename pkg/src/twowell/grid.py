"""Vector fields sampled on uniform paraxial grids, plus the TWG file format."""

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidInputError

_MAGIC_TEXT = "TWG 1"
_MAGIC_BINARY = "TWGB 1"


@dataclass(frozen=True, eq=False)
class GridField:
    """Nodal samples of a map ``R^d -> R^d`` on a uniform grid.

    ``dims`` counts cells per axis, so ``values`` has shape
    ``(dims[0]+1, ..., dims[d-1]+1, d)`` in row-major order (last axis fastest).
    """

    dims: tuple
    spacing: tuple
    values: np.ndarray
    origin: tuple = field(default=None)

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        spacing = tuple(float(h) for h in self.spacing)
        d = len(dims)
        if d < 1 or len(spacing) != d:
            raise InvalidInputError("dims and spacing must have the same positive length")
        if any(n < 1 for n in dims):
            raise InvalidInputError(f"cell counts must be positive, got {dims}")
        if any(not (np.isfinite(h) and h > 0) for h in spacing):
            raise InvalidInputError(f"spacing must be positive on every axis, got {spacing}")
        origin = (0.0,) * d if self.origin is None else tuple(float(o) for o in self.origin)
        if len(origin) != d:
            raise InvalidInputError("origin must have one entry per axis")
        shape = tuple(n + 1 for n in dims) + (d,)
        vals = np.array(self.values, dtype=float)
        if vals.size != int(np.prod(shape)):
            raise InvalidInputError(f"expected {int(np.prod(shape))} values, got {vals.size}")
        vals = vals.reshape(shape)
        vals.setflags(write=False)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "spacing", spacing)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "values", vals)

    @property
    def d(self):
        return len(self.dims)

    @property
    def node_shape(self):
        return tuple(n + 1 for n in self.dims)

    @property
    def n_nodes(self):
        return int(np.prod(self.node_shape))

    @property
    def cellvol(self):
        return float(np.prod(self.spacing))

    @property
    def extent(self):
        return tuple(n * h for n, h in zip(self.dims, self.spacing))

    def axis_nodes(self, k):
        return self.origin[k] + self.spacing[k] * np.arange(self.dims[k] + 1)

    def axis_centers(self, k):
        return self.origin[k] + self.spacing[k] * (np.arange(self.dims[k]) + 0.5)

    def node_coords(self):
        axes = [self.axis_nodes(k) for k in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def cell_centers(self):
        axes = [self.axis_centers(k) for k in range(self.d)]
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def with_values(self, values):
        return GridField(self.dims, self.spacing, values, self.origin)

    def flat(self):
        return self.values.reshape(-1, self.d)


def grid_from_function(fn, dims, spacing, origin=None):
    """Sample ``fn`` (mapping an array of points ``(..., d)`` to ``(..., d)``) at the nodes."""
    probe = GridField(dims, spacing, np.zeros(tuple(n + 1 for n in dims) + (len(dims),)), origin)
    return probe.with_values(fn(probe.node_coords()))


def affine_field(F, dims, spacing, origin=None, b=None):
    """Nodal samples of ``x -> F x + b``."""
    F = np.asarray(F, dtype=float)
    b = np.zeros(F.shape[0]) if b is None else np.asarray(b, dtype=float)
    return grid_from_function(lambda x: x @ F.T + b, dims, spacing, origin)


def _header(field_):
    parts = [f"d {field_.d}", "dims " + " ".join(str(n) for n in field_.dims),
             "spacing " + " ".join(repr(h) for h in field_.spacing),
             "origin " + " ".join(repr(o) for o in field_.origin)]
    return " ".join(parts)


def _parse_header(line):
    tok = line.split()
    try:
        if tok[0] != "d":
            raise ValueError
        d = int(tok[1])
        i = 2
        out = {}
        for key in ("dims", "spacing", "origin"):
            if tok[i] != key:
                raise ValueError
            vals = tok[i + 1:i + 1 + d]
            if len(vals) != d:
                raise ValueError
            out[key] = [int(v) for v in vals] if key == "dims" else [float(v) for v in vals]
            i += 1 + d
        if i != len(tok):
            raise ValueError
    except (ValueError, IndexError):
        raise InvalidInputError(f"malformed TWG header: {line!r}") from None
    return d, out["dims"], out["spacing"], out["origin"]


def write_twg(field_, path, binary=False):
    """Write a field as ``TWG 1`` text or ``TWGB 1`` little-endian binary."""
    path = Path(path)
    head = (_MAGIC_BINARY if binary else _MAGIC_TEXT) + "\n" + _header(field_) + "\n"
    if binary:
        with open(path, "wb") as fh:
            fh.write(head.encode("ascii"))
            fh.write(np.ascontiguousarray(field_.flat(), dtype="<f8").tobytes())
        return path
    with open(path, "w") as fh:
        fh.write(head)
        np.savetxt(fh, field_.flat(), fmt="%.17g")
    return path


def read_twg(path):
    """Read either TWG flavour, detected from the first line."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.readline().decode("ascii", "replace").strip()
        header = fh.readline().decode("ascii", "replace").strip()
        body = fh.read()
    if magic not in (_MAGIC_TEXT, _MAGIC_BINARY):
        raise InvalidInputError(f"{path}: not a TWG file (first line {magic!r})")
    d, dims, spacing, origin = _parse_header(header)
    n = int(np.prod([k + 1 for k in dims])) * d
    if magic == _MAGIC_BINARY:
        vals = np.frombuffer(body, dtype="<f8")
    else:
        text = body.decode("ascii").split()
        try:
            vals = np.array([float(v) for v in text])
        except ValueError:
            raise InvalidInputError(f"{path}: non-numeric node value") from None
    if vals.size != n:
        raise InvalidInputError(f"{path}: expected {n} values, found {vals.size}")
    return GridField(dims, spacing, vals, origin)
