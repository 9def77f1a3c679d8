"""Order-fixed summation so energies do not depend on thread count or chunking."""

import numpy as np


def tree_sum(values, axis=0):
    """Pairwise sum along ``axis`` in a fixed binary-tree order."""
    a = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    if a.shape[0] == 0:
        return np.zeros(a.shape[1:]) if a.ndim > 1 else 0.0
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.zeros((1,) + a.shape[1:])])
        a = a[0::2] + a[1::2]
    out = a[0]
    return float(out) if np.ndim(out) == 0 else out
