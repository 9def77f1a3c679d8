"""Picks the compiled density kernel when it imports, numpy otherwise.

Set ``TWOWELL_PURE=1`` to force the numpy path.
"""

import os

from . import _kernels_py

BACKEND = "numpy"
_compiled = None

if os.environ.get("TWOWELL_PURE") != "1":
    try:
        from . import _kernels as _compiled  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _compiled = None


def density_and_grad(F, kappa, c, variant, want_grad=True, backend=None):
    """Dispatch to the selected kernel; d >= 3 always uses numpy."""
    use = backend or BACKEND
    if use == "cython" and _compiled is not None and F.shape[-1] <= 2:
        d = F.shape[-1]
        W, G = _compiled.density_and_grad(F.reshape(-1, d, d), kappa, c, variant, want_grad)
        W = W.reshape(F.shape[:-2])
        return W, (None if G is None else G.reshape(F.shape))
    return _kernels_py.density_and_grad(F, kappa, c, variant, want_grad)
