"""Quick built-in checks on exactly known cases; used by ``twowell selftest``."""

import numpy as np


def _checks():
    from .density import TwoWellDensity, density_eval, q_lin
    from .energy import EnergyParams, energy_eval
    from .gamma import check_admissible, limiting_energy, make_triple
    from .generators import generate_laminate
    from .grid import affine_field
    from .partition import build_partition, p_exponent
    from .reduce import tree_sum
    from .rigidity import decompose_phases

    W = TwoWellDensity(2, 1.0, 1.0, "hard-min")
    th = 0.3
    R = np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])
    yield "density vanishes on both wells", abs(density_eval(W, R)) + abs(density_eval(W, R @ np.diag([1, 2]))) < 1e-14
    S = np.array([[0.0, 1.0], [-1.0, 0.0]])
    yield "linearized energy vanishes on skew perturbations", abs(q_lin(W, "A", np.eye(2), S)) < 1e-12
    y = affine_field(R, (8, 8), (0.125, 0.125))
    yield "rotated affine field has zero energy", abs(energy_eval(y, W, EnergyParams(0.1)).total) < 1e-20
    yield "p exponent in two dimensions", p_exponent(2) == 1.75
    part = build_partition(np.zeros((8, 8), dtype=np.int8), 0.1, (0.125, 0.125))
    yield "single phase gives one layer component", (len(part.components) == 1
                                                     and part.components[0].kind == "layer")
    t = make_triple([("A", 0.0, 2.0)])
    yield "trivial triple is admissible with zero energy", (check_admissible(t).ok
                                                            and limiting_energy(t, 0.5, W).total == 0.0)
    lam = generate_laminate(["A", "B", "A"], [0.3, 0.6], 1.0, R, 0.0, (12, 30))
    dec = decompose_phases(lam, 1.0, "full")
    yield "sharp laminate decomposition recovers the rotation", np.max(np.abs(dec.R - R)) < 1e-10
    yield "tree sum of ones", tree_sum(np.ones(1000)) == 1000.0


def run_selftest(verbose=True):
    """Run every check, print one line each and return the names of the failures."""
    failures = []
    for name, ok in _checks():
        if verbose:
            print(f"{'PASS' if ok else 'FAIL'}  {name}")
        if not ok:
            failures.append(name)
    return failures
