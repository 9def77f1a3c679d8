"""Symbolic limiting triples (laminate y, piecewise-affine u, band partition) and their limit energy.

A triple lives on the box ``[0, width_1] x ... x [z0, z1]``.  Bands stack
along the last axis; each internal band boundary carries an interface tagged

* ``grad``: the phase of ``y`` changes there (a gradient jump of ``y``),
* ``disp``: same phase on both sides, ``u`` may jump,
* ``partition``: a boundary between partition components.

Partition components are the maximal runs of bands between ``grad`` and
``partition`` interfaces.
"""

from dataclasses import dataclass, field

import numpy as np

from .density import density_hessian_at_well, q_lin
from .energy import EnergyParams, cell_gradients, energy_eval
from .errors import InvalidInputError, StructuralError
from .textconfig import floats, read_sections

KINDS = ("grad", "disp", "partition")
TOL_DIRECTION = 1e-9
TOL_CONSTANT = 1e-9


@dataclass(frozen=True)
class Band:
    phase: str
    z0: float
    z1: float
    grad_u: np.ndarray

    @property
    def height(self):
        return self.z1 - self.z0


@dataclass(frozen=True)
class Interface:
    z: float
    jump: np.ndarray
    kind: str


@dataclass(frozen=True)
class LimitingTriple:
    R: np.ndarray
    bands: tuple
    interfaces: tuple
    width: tuple
    kappa: float = 1.0

    @property
    def d(self):
        return self.R.shape[0]

    @property
    def area(self):
        return float(np.prod(self.width)) if self.width else 1.0

    def well_diagonal(self, phase):
        m = np.ones(self.d)
        if phase == "B":
            m[-1] += self.kappa
        return m

    def components(self):
        """Band index ranges ``[(first, stop), ...]`` of the partition components."""
        cuts = [i + 1 for i, f in enumerate(self.interfaces) if f.kind != "disp"]
        edges = [0] + cuts + [len(self.bands)]
        return list(zip(edges, edges[1:]))

    def component_of_band(self):
        out = np.empty(len(self.bands), dtype=int)
        for j, (a, b) in enumerate(self.components()):
            out[a:b] = j
        return out

    def offsets(self):
        """Constant parts ``c_b`` of ``u = G_b x + c_b``, anchored by ``c_0 = 0``."""
        d = self.d
        c = [np.zeros(d)]
        for i, f in enumerate(self.interfaces):
            dG = self.bands[i + 1].grad_u - self.bands[i].grad_u
            c.append(c[-1] + f.jump - dG[:, -1] * f.z)
        return c

    def rotated(self, Q):
        """Same triple seen through the global rotation ``Q`` (``y -> Q y``, ``u -> Q u``)."""
        Q = np.asarray(Q, dtype=float)
        bands = tuple(Band(b.phase, b.z0, b.z1, Q @ b.grad_u) for b in self.bands)
        faces = tuple(Interface(f.z, Q @ f.jump, f.kind) for f in self.interfaces)
        return LimitingTriple(Q @ self.R, bands, faces, self.width, self.kappa)

    def to_dict(self):
        return {
            "R": self.R.tolist(),
            "kappa": self.kappa,
            "width": list(self.width),
            "bands": [{"phase": b.phase, "z0": b.z0, "z1": b.z1, "grad_u": b.grad_u.tolist()}
                      for b in self.bands],
            "interfaces": [{"z": f.z, "jump": f.jump.tolist(), "kind": f.kind}
                           for f in self.interfaces],
        }


def make_triple(bands, interfaces=(), R=None, width=None, d=None, kappa=1.0):
    """Validated :class:`LimitingTriple`.

    ``bands`` holds ``(phase, z0, z1[, grad_u])`` tuples or :class:`Band`
    objects from bottom to top; ``interfaces`` holds ``(z, jump, kind)``
    tuples, one per internal band boundary.
    """
    if d is None:
        d = 2 if R is None else np.asarray(R).shape[0]
    R = np.eye(d) if R is None else np.asarray(R, dtype=float)
    if R.shape != (d, d) or not np.allclose(R.T @ R, np.eye(d), atol=1e-10) or np.linalg.det(R) < 0:
        raise StructuralError("R must be a rotation matrix")
    width = (1.0,) * (d - 1) if width is None else tuple(float(w) for w in width)
    if len(width) != d - 1 or any(w <= 0 for w in width):
        raise StructuralError(f"width needs {d - 1} positive entries")
    blist = []
    for b in bands:
        if not isinstance(b, Band):
            phase, z0, z1 = b[0], float(b[1]), float(b[2])
            G = np.zeros((d, d)) if len(b) < 4 or b[3] is None else np.asarray(b[3], dtype=float).reshape(d, d)
            b = Band(phase, z0, z1, G)
        if b.phase not in ("A", "B"):
            raise StructuralError(f"band phase must be 'A' or 'B', got {b.phase!r}")
        if not b.z1 > b.z0:
            raise StructuralError(f"band [{b.z0}, {b.z1}] has non-positive height")
        if np.asarray(b.grad_u).shape != (d, d):
            raise StructuralError("band displacement gradient has the wrong shape")
        blist.append(Band(b.phase, b.z0, b.z1, np.array(b.grad_u, dtype=float)))
    if not blist:
        raise StructuralError("a triple needs at least one band")
    for lo, hi in zip(blist, blist[1:]):
        if abs(lo.z1 - hi.z0) > 1e-12:
            raise StructuralError(f"bands do not tile the height: gap or overlap at {lo.z1} / {hi.z0}")
    flist = []
    for f in interfaces:
        if not isinstance(f, Interface):
            f = Interface(float(f[0]), np.asarray(f[1], dtype=float).reshape(d), f[2])
        if f.kind not in KINDS:
            raise StructuralError(f"interface kind must be one of {KINDS}, got {f.kind!r}")
        flist.append(Interface(float(f.z), np.array(f.jump, dtype=float).reshape(d), f.kind))
    flist.sort(key=lambda f: f.z)
    if len(flist) != len(blist) - 1:
        raise StructuralError(f"{len(blist) - 1} internal band boundaries but {len(flist)} interfaces")
    for i, f in enumerate(flist):
        if abs(f.z - blist[i].z1) > 1e-12:
            raise StructuralError(f"interface {i} at z={f.z} is not on a band boundary")
        same = blist[i].phase == blist[i + 1].phase
        if f.kind == "grad" and same:
            raise StructuralError(f"interface {i} is tagged 'grad' but both sides are phase {blist[i].phase}")
    if not kappa > 0:
        raise StructuralError(f"kappa must be positive, got {kappa}")
    return LimitingTriple(R, tuple(blist), tuple(flist), width, float(kappa))


def parse_triple(sections):
    """Build a triple from parsed ``[triple]``, ``[band]`` and ``[interface]`` sections."""
    head = {}
    bands, faces = [], []
    for name, kv in sections:
        if name == "triple":
            head.update(kv)
        elif name == "band":
            try:
                bands.append((kv["phase"], float(kv["z0"]), float(kv["z1"]),
                              floats(kv["grad_u"]) if "grad_u" in kv else None))
            except KeyError as exc:
                raise StructuralError(f"[band] is missing {exc.args[0]!r}") from None
        elif name == "interface":
            try:
                faces.append((float(kv["z"]), floats(kv.get("jump", "0")), kv.get("kind", "disp")))
            except KeyError as exc:
                raise StructuralError(f"[interface] is missing {exc.args[0]!r}") from None
        else:
            raise StructuralError(f"unknown section [{name}] in triple spec")
    d = int(head.get("d", 2))
    R = np.array(floats(head["R"])).reshape(d, d) if "R" in head else None
    width = floats(head["width"]) if "width" in head else None
    faces = [(z, j * d if len(j) == 1 else j, k) for z, j, k in faces]
    return make_triple(bands, faces, R, width, d, float(head.get("kappa", 1.0)))


def read_triple(path):
    return parse_triple(read_sections(path))


@dataclass(frozen=True)
class Violation:
    interface: int
    rule: str
    message: str


@dataclass(frozen=True)
class AdmissibilityReport:
    ok: bool
    violations: tuple


def check_admissible(t):
    """Constant jumps, jump directions on same-phase interfaces, and gradient jumps on partition boundaries."""
    out = []
    n_dir = t.R[:, -1]
    for i, f in enumerate(t.interfaces):
        lo, hi = t.bands[i], t.bands[i + 1]
        dG = hi.grad_u - lo.grad_u
        lateral = float(np.max(np.abs(dG[:, :-1]), initial=0.0))
        if lateral > TOL_CONSTANT:
            out.append(Violation(i, "constant-jump",
                                 f"jump varies along the interface (lateral gradient mismatch {lateral:.3g})"))
        if f.kind == "disp" and lo.phase != hi.phase:
            out.append(Violation(i, "gradient-jump-off-partition",
                                 "phase changes across an interface that is not a partition boundary"))
        if f.kind == "disp" and lo.phase == hi.phase:
            normal = float(f.jump @ n_dir)
            perp = float(np.linalg.norm(f.jump - normal * n_dir))
            sign = 1.0 if lo.phase == "A" else -1.0
            if perp > TOL_DIRECTION or sign * normal < -TOL_DIRECTION:
                want = "[0,inf) R e_d" if lo.phase == "A" else "(-inf,0] R e_d"
                out.append(Violation(i, "jump-direction",
                                     f"jump {f.jump.tolist()} on phase {lo.phase} must lie in {want}"))
    return AdmissibilityReport(not out, tuple(out))


@dataclass(frozen=True)
class GammaEnergyReport:
    elastic: float
    single_surface: float
    double_surface: float
    total: float


def limiting_energy(t, K, W, check=True):
    """Linearized elastic energy plus ``K`` per phase interface area and ``2K`` per jump/partition area."""
    if not K >= 0:
        raise InvalidInputError(f"K must be non-negative, got {K}")
    if W.d != t.d or abs(W.kappa - t.kappa) > 1e-12:
        raise InvalidInputError("density and triple disagree on dimension or kappa")
    if check:
        rep = check_admissible(t)
        if not rep.ok:
            raise InvalidInputError("triple is not admissible: "
                                    + "; ".join(f"#{v.interface} {v.rule}" for v in rep.violations))
    hess = {m: density_hessian_at_well(W, m, t.R) for m in ("A", "B")}
    elastic = 0.0
    for b in t.bands:
        elastic += q_lin(W, b.phase, t.R, b.grad_u, hessian=hess[b.phase]) * b.height * t.area
    n_single = sum(1 for f in t.interfaces if f.kind == "grad")
    n_double = sum(1 for f in t.interfaces
                   if f.kind == "partition" or (f.kind == "disp" and np.linalg.norm(f.jump) > 0))
    single = K * t.area * n_single
    double = 2.0 * K * t.area * n_double
    return GammaEnergyReport(float(elastic), float(single), float(double),
                             float(elastic + single + double))


def _skew_basis(d):
    out = []
    for i in range(d):
        for j in range(i + 1, d):
            S = np.zeros((d, d))
            S[i, j], S[j, i] = 1.0, -1.0
            out.append(S)
    return out


def _band_at(t, z):
    zs = [b.z1 for b in t.bands[:-1]]
    return int(np.searchsorted(zs, z, side="right"))


def _boundaries(t):
    return sorted(f.z for f in t.interfaces if f.kind != "disp")


@dataclass(frozen=True)
class TripleDistance:
    residual: float
    equivalent: bool
    same_structure: bool
    skew: np.ndarray = field(default=None, repr=False)


def triple_distance(t1, t2, tol=1e-8):
    """L2 distance between the displacements after removing ``S y + t_j`` (S skew, t_j per component)."""
    d = t1.d
    if t2.d != d or t1.width != t2.width or t1.kappa != t2.kappa:
        raise InvalidInputError("triples live on different domains")
    if abs(t1.bands[0].z0 - t2.bands[0].z0) > 1e-12 or abs(t1.bands[-1].z1 - t2.bands[-1].z1) > 1e-12:
        raise InvalidInputError("triples live on different domains")
    zs = sorted({b.z0 for b in t1.bands} | {b.z0 for b in t2.bands} | {t1.bands[-1].z1})
    pieces = [(a, b) for a, b in zip(zs, zs[1:]) if b - a > 1e-14]
    same = bool(np.allclose(t1.R, t2.R, atol=1e-12))
    b1 = [_band_at(t1, 0.5 * (a + b)) for a, b in pieces]
    b2 = [_band_at(t2, 0.5 * (a + b)) for a, b in pieces]
    same &= all(t1.bands[i].phase == t2.bands[j].phase for i, j in zip(b1, b2))
    p1, p2 = _boundaries(t1), _boundaries(t2)
    same &= len(p1) == len(p2) and np.allclose(p1, p2, atol=1e-12)
    comp = t1.component_of_band()
    n_comp = len(t1.components())
    c1, c2 = t1.offsets(), t2.offsets()
    skews = _skew_basis(d)
    gx, gw = np.polynomial.legendre.leggauss(2)
    rows, rhs = [], []
    for (za, zb), i, j in zip(pieces, b1, b2):
        M = t1.R @ np.diag(t1.well_diagonal(t1.bands[i].phase))
        dG = t1.bands[i].grad_u - t2.bands[j].grad_u
        dc = c1[i] - c2[j]
        axes = [0.5 * w * (gx + 1.0) for w in t1.width] + [za + 0.5 * (zb - za) * (gx + 1.0)]
        weights = [0.5 * w * gw for w in t1.width] + [0.5 * (zb - za) * gw]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
        wts = np.prod(np.stack(np.meshgrid(*weights, indexing="ij"), -1).reshape(-1, d), axis=1)
        for x, w in zip(grid, wts):
            sw = np.sqrt(w)
            block = np.zeros((d, len(skews) + d * n_comp))
            for k, S in enumerate(skews):
                block[:, k] = S @ (M @ x)
            block[:, len(skews) + d * comp[i]: len(skews) + d * (comp[i] + 1)] = np.eye(d)
            rows.append(sw * block)
            rhs.append(sw * (dG @ x + dc))
    A = np.concatenate(rows)
    r = np.concatenate(rhs)
    coef, *_ = np.linalg.lstsq(A, r, rcond=None)
    resid = float(np.sqrt(max(float(np.sum((A @ coef - r) ** 2)), 0.0)))
    S = sum((coef[k] * Sk for k, Sk in enumerate(skews)), np.zeros((d, d)))
    return TripleDistance(resid, bool(same and resid <= tol), bool(same), S)


def symmetric_min_eigenvalue(W, M, R=None):
    """Smallest eigenvalue of ``G -> D²W(RM)(G RM):(G RM)`` on symmetric ``G``."""
    d = W.d
    R = np.eye(d) if R is None else np.asarray(R, dtype=float)
    RM = R @ W.well(M)
    H = density_hessian_at_well(W, M, R)
    basis = []
    for i in range(d):
        for j in range(i, d):
            G = np.zeros((d, d))
            if i == j:
                G[i, i] = 1.0
            else:
                G[i, j] = G[j, i] = 1.0 / np.sqrt(2.0)
            basis.append((G @ RM).reshape(-1))
    Bm = np.array(basis)
    return float(np.linalg.eigvalsh(Bm @ H @ Bm.T)[0])


def gradient_jumps_resolved(y, kappa, fraction=0.5):
    """False when neighbouring cell gradients differ by ``fraction * kappa`` or more (a sharp jump)."""
    F = cell_gradients(y).reshape(tuple(y.dims) + (y.d, y.d))
    worst = 0.0
    for k in range(y.d):
        if F.shape[k] > 1:
            worst = max(worst, float(np.max(np.linalg.norm(np.diff(F, axis=k), axis=(-2, -1)))))
    return worst < fraction * kappa


@dataclass(frozen=True)
class GapReport:
    E_eps: float
    E_limit: float
    gap: float
    resolved: bool


def gamma_gap_report(y_eps, eps, K, triple, W, eta=None):
    limit = limiting_energy(triple, K, W).total
    if not gradient_jumps_resolved(y_eps, W.kappa):
        return GapReport(float("inf"), limit, float("inf"), False)
    E = energy_eval(y_eps, W, EnergyParams(eps, W.d, eta)).total
    return GapReport(float(E), limit, float(E - limit), True)


def gamma_gap(y_eps, eps, K, triple, W, eta=None):
    """``E_eps(y_eps) - E_0(triple)``; ``inf`` when ``y_eps`` has unresolved gradient jumps."""
    return gamma_gap_report(y_eps, eps, K, triple, W, eta).gap
