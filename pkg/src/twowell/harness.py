"""Epsilon sweeps through the whole pipeline, with CSV and JSON reports.

Each sweep point runs: generate field, evaluate the energy, decompose into
rotation and phases, build the slab partition, fill translations, coarsen,
form the rescaled displacement, measure the interface jump and compare the
energy with the limit energy of the matching limiting triple.
"""

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import generators
from .density import TwoWellDensity
from .energy import EnergyParams, energy_eval
from .errors import InvalidInputError, StageError, TwoWellError
from .gamma import gamma_gap_report, make_triple, read_triple
from .grid import read_twg
from .partition import (build_partition, coarsen_partition, component_translations,
                        jump_height_extract, rescaled_displacement, selection_margin)
from .profile import ReducedDensity, analytic_K, parse_w_rule
from .rigidity import decompose_phases
from .textconfig import floats, fraction, merged, read_sections

SCENARIOS = ("example-ex", "single-interface", "double-interface", "custom-field")


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str = "example-ex"
    eps: tuple = (0.1, 0.05, 0.025)
    l: float = 1.0
    w_rule: str = "eps"
    kappa: float = 1.0
    c: float = 1.0
    variant: str = "hard-min"
    threshold: float = 10.0
    cells_per_eps2: int = 8
    lateral_cells: int = 8
    window: str = "full"
    offset: int = 3
    field_path: str = ""
    triple_path: str = ""
    interface: tuple = ()
    csv_path: str = ""
    json_path: str = ""
    workers: int = 1

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidInputError(f"scenario must be one of {SCENARIOS}, got {self.scenario!r}")
        eps = tuple(float(e) for e in self.eps)
        if not eps:
            raise InvalidInputError("eps list is empty")
        if any(not (0 < e < 1) for e in eps):
            raise InvalidInputError("every eps must lie in (0, 1)")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            raise InvalidInputError("eps list must be strictly decreasing")
        object.__setattr__(self, "eps", eps)
        if self.cells_per_eps2 < 4:
            raise InvalidInputError("need at least 4 cells per eps^2 (8 across each mollified band)")
        if self.scenario == "example-ex" and self.l not in (0.5, 1.0, 2.0):
            raise InvalidInputError(f"l must be 1/2, 1 or 2, got {self.l}")
        if self.scenario == "double-interface":
            parse_w_rule(self.w_rule)
        if self.scenario == "custom-field" and (len(self.eps) != 1 or not self.field_path
                                                or not self.triple_path or len(self.interface) != 2):
            raise InvalidInputError("custom-field needs one eps, a field, a triple and an interface z-range")

    def density(self):
        return TwoWellDensity(2, self.kappa, self.c, self.variant)


_SECTION_KEYS = {
    "density": {"kappa": float, "c": float, "variant": str},
    "sweep": {"eps": lambda v: tuple(floats(v)), "cells_per_eps2": int, "lateral_cells": int,
              "workers": int},
    "scenario": {"name": str, "l": fraction, "w_rule": str, "threshold": float, "window": str,
                 "offset": int, "field": str, "triple": str, "interface": lambda v: tuple(floats(v))},
    "output": {"csv": str, "json": str},
}
_RENAME = {"name": "scenario", "field": "field_path", "triple": "triple_path",
           "csv": "csv_path", "json": "json_path"}


def config_from_sections(sections, **overrides):
    """Experiment config from ``[density] [sweep] [scenario] [output]`` sections."""
    kwargs = {}
    for name, pairs in merged(sections).items():
        if name not in _SECTION_KEYS:
            raise InvalidInputError(f"unknown config section [{name}]")
        for k, v in pairs.items():
            conv = _SECTION_KEYS[name].get(k)
            if conv is None:
                raise InvalidInputError(f"unknown key {k!r} in [{name}]")
            kwargs[_RENAME.get(k, k)] = conv(v)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**kwargs)


def read_config(path, **overrides):
    return config_from_sections(read_sections(path), **overrides)


@dataclass
class ConvergenceReport:
    config: dict
    K: float
    rows: list
    rates: dict = field(default_factory=dict)

    def to_dict(self):
        return {"config": self.config, "K": self.K, "rows": self.rows, "rates": self.rates}


CSV_COLUMNS = ("eps", "n_cells_x", "n_cells_z", "E_eps", "bulk", "second_gradient", "anisotropic",
               "E_limit", "gap", "resolved", "jump_x", "jump_z", "jump_height", "jump_deviation",
               "n_components_raw", "n_components", "max_same_phase", "selection_margin",
               "small_volume_total", "sigma", "residual", "perimeter", "aniso_x", "slice_integral")


def scenario_setup(cfg, eps):
    """Field, limiting triple and interface height range for one sweep point."""
    k = cfg.kappa
    dims = generators.resolution_rule(eps, cells_per_eps2=cfg.cells_per_eps2,
                                      lateral_cells=cfg.lateral_cells)
    d2 = eps**2
    if cfg.scenario == "example-ex":
        y = generators.generate_example_sequence(eps, cfg.l, k, dims)
        lo, hi = generators.example_interfaces(eps, cfg.l)
        if cfg.l == 2.0:
            triple = make_triple([("A", 0.0, 2.0)], kappa=k)
        elif cfg.l == 1.0:
            triple = make_triple([("A", 0.0, 1.0), ("A", 1.0, 2.0)],
                                 [(1.0, [0.0, 2.0 * k], "disp")], kappa=k)
        else:
            triple = make_triple([("A", 0.0, 1.0), ("A", 1.0, 2.0)],
                                 [(1.0, [0.0, 0.0], "partition")], kappa=k)
        return y, triple, (lo - d2, hi + d2)
    if cfg.scenario == "single-interface":
        y = generators.generate_single_interface(eps, k, dims)
        triple = make_triple([("B", 0.0, 1.0), ("A", 1.0, 2.0)], [(1.0, [0.0, 0.0], "grad")], kappa=k)
        return y, triple, (1.0 - d2, 1.0 + d2)
    if cfg.scenario == "double-interface":
        C, beta = parse_w_rule(cfg.w_rule)
        w = C * eps**beta
        y = generators.generate_double_interface(eps, w, k, dims)
        triple = make_triple([("A", 0.0, 1.0), ("A", 1.0, 2.0)],
                             [(1.0, [0.0, k * w / eps], "disp")], kappa=k)
        return y, triple, (1.0 - d2, 1.0 + w + d2)
    y = read_twg(cfg.field_path)
    return y, read_triple(cfg.triple_path), tuple(cfg.interface)


def _stage(name, eps, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except TwoWellError as exc:
        raise StageError(name, eps, exc) from exc


def run_point(cfg, eps, K):
    """One sweep point; returns a flat row dict."""
    W = cfg.density()
    y, triple, slab = _stage("generate", eps, scenario_setup, cfg, eps)
    E = _stage("energy", eps, energy_eval, y, W, EnergyParams(eps, 2))
    dec = _stage("decompose", eps, decompose_phases, y, cfg.kappa, cfg.window)
    part = _stage("partition", eps, build_partition, dec.phi, eps, y.spacing, y.origin)
    part = _stage("translations", eps, component_translations, y, dec.R, part, cfg.kappa)
    coarse = _stage("coarsen", eps, coarsen_partition, part, eps, cfg.threshold)
    u = _stage("displacement", eps, rescaled_displacement, y, dec.R, coarse, eps, cfg.kappa)
    jump = _stage("jump", eps, jump_height_extract, u, slab, cfg.offset)
    gap = _stage("gamma", eps, gamma_gap_report, y, eps, K, triple, W)
    phases = [c.phase for c in coarse.components]
    small = sum(c.volume for c in part.components if c.kind == "small-volume")
    margin = selection_margin(coarse, eps)
    return {
        "eps": eps,
        "n_cells_x": int(y.dims[0]),
        "n_cells_z": int(y.dims[1]),
        "E_eps": E.total,
        "bulk": E.bulk,
        "second_gradient": E.second_gradient,
        "anisotropic": E.anisotropic,
        "E_limit": gap.E_limit,
        "gap": gap.gap,
        "resolved": bool(gap.resolved),
        "jump_x": float(jump.jump[0]),
        "jump_z": float(jump.jump[1]),
        "jump_height": jump.height,
        "jump_deviation": jump.deviation,
        "n_components_raw": len(part.components),
        "n_components": len(coarse.components),
        "max_same_phase": max(phases.count(p) for p in set(phases)),
        "selection_margin": margin if math.isfinite(margin) else None,
        "small_volume_total": small,
        "sigma": part.sigma_eps,
        "residual": dec.residual_l2,
        "perimeter": dec.perimeter,
        "aniso_x": dec.aniso[0],
        "slice_integral": dec.slice_integral,
        "rotation": dec.R.tolist(),
        "components": coarse.to_dict()["components"],
    }


def loglog_slope(eps, values):
    """Least-squares slope of ``log values`` against ``log eps``; None unless all values are positive and finite."""
    v = np.asarray(values, dtype=float)
    e = np.asarray(eps, dtype=float)
    if len(v) < 2 or not np.all(np.isfinite(v)) or np.any(v <= 0):
        return None
    return float(np.polyfit(np.log(e), np.log(v), 1)[0])


def _point(args):
    cfg, eps, K = args
    return run_point(cfg, eps, K)


def run_convergence(cfg):
    """Run the sweep; rows come back ordered by the configured (decreasing) eps."""
    K = float(analytic_K(ReducedDensity(cfg.density())))
    jobs = [(cfg, e, K) for e in cfg.eps]
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_point, jobs))
    else:
        rows = [_point(j) for j in jobs]
    eps = [r["eps"] for r in rows]
    rates = {
        "gap": loglog_slope(eps, [r["gap"] for r in rows]),
        "jump_height": loglog_slope(eps, [r["jump_height"] for r in rows]),
        "small_volume_total": loglog_slope(eps, [r["small_volume_total"] for r in rows]),
    }
    return ConvergenceReport(asdict(cfg), K, rows, rates)


def write_report(report, csv_path=None, json_path=None, workdir="."):
    """Write the CSV (one row per eps) and/or the full JSON report; returns the paths written."""
    written = []
    if csv_path:
        path = os.path.join(workdir, csv_path)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_COLUMNS)
            for r in report.rows:
                writer.writerow([_fmt(r[c]) for c in CSV_COLUMNS])
        written.append(path)
    if json_path:
        path = os.path.join(workdir, json_path)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, sort_keys=True, indent=1, default=_json_default)
            fh.write("\n")
        written.append(path)
    return written


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return "" if v is None else str(v)


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")
