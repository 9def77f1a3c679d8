"""Line-search minimization of the grid energy with frozen (Dirichlet) nodes."""

from dataclasses import dataclass

import numpy as np

from .energy import energy_eval, energy_gradient
from .errors import InvalidInputError, StagnationError


@dataclass
class MinimizeResult:
    y: object
    trace: list
    iterations: int
    converged: bool
    grad_norm: float


def boundary_ring(node_shape, width=1):
    """Boolean node mask of the outer ``width`` node layers."""
    mask = np.zeros(node_shape, dtype=bool)
    for k, n in enumerate(node_shape):
        idx = [slice(None)] * len(node_shape)
        idx[k] = slice(0, width)
        mask[tuple(idx)] = True
        idx[k] = slice(n - width, n)
        mask[tuple(idx)] = True
    return mask


def _two_loop(g, S, Y):
    q = g.copy()
    alphas = []
    for s, yv in reversed(list(zip(S, Y))):
        rho = 1.0 / np.dot(yv, s)
        a = rho * np.dot(s, q)
        alphas.append((rho, a))
        q -= a * yv
    if S:
        q *= np.dot(S[-1], Y[-1]) / np.dot(Y[-1], Y[-1])
    for (s, yv), (rho, a) in zip(zip(S, Y), reversed(alphas)):
        b = rho * np.dot(yv, q)
        q += (a - b) * s
    return -q


def minimize_vector(fun, grad, x0, free, max_iter=500, grad_tol=1e-8, method="lbfgs",
                    memory=10, c_armijo=1e-4, shrink=0.5, max_halvings=60):
    """Minimize ``fun`` over the entries of ``x0`` flagged in ``free``.

    Returns ``(x, trace, iterations, converged, grad_norm)``; the energy trace
    is non-increasing because every accepted step passes the Armijo test.
    """
    if method not in ("lbfgs", "gd"):
        raise InvalidInputError(f"unknown method {method!r}")
    x = np.array(x0, dtype=float)
    free = np.asarray(free, dtype=bool)
    f = fun(x)
    g = np.where(free, grad(x), 0.0)
    trace = [f]
    S, Yh = [], []
    gnorm = float(np.max(np.abs(g), initial=0.0))
    it = 0
    while gnorm > grad_tol and it < max_iter:
        d = _two_loop(g, S, Yh) if (method == "lbfgs" and S) else -g
        slope = float(np.dot(g, d))
        if slope >= 0:
            S, Yh = [], []
            d = -g
            slope = -float(np.dot(g, g))
        t = 1.0 if S else min(1.0, 1.0 / max(np.sum(np.abs(g)), 1e-300))
        for _ in range(max_halvings):
            x_new = x + t * d
            if np.array_equal(x_new, x):
                t = 0.0
                break
            f_new = fun(x_new)
            if f_new <= f + c_armijo * t * slope:
                break
            t *= shrink
        else:
            t = 0.0
        if t == 0.0:
            if S:
                S, Yh = [], []
                continue
            raise StagnationError(
                f"line search failed after {max_halvings} halvings at iteration {it}",
                iterate=x, trace=trace)
        g_new = np.where(free, grad(x_new), 0.0)
        s, yv = x_new - x, g_new - g
        if np.dot(s, yv) > 1e-12 * np.dot(yv, yv):
            S.append(s)
            Yh.append(yv)
            if len(S) > memory:
                S.pop(0)
                Yh.pop(0)
        x, f, g = x_new, f_new, g_new
        trace.append(f)
        gnorm = float(np.max(np.abs(g), initial=0.0))
        it += 1
    return x, trace, it, gnorm <= grad_tol, gnorm


def minimize(y0, W, p, frozen=None, max_iter=500, grad_tol=1e-8, method="lbfgs", memory=10):
    """Minimize the discrete energy over the nodes that are not frozen.

    ``frozen`` is a boolean mask over nodes; it must contain the outer node
    ring.  Defaults to exactly that ring.
    """
    shape = y0.node_shape
    ring = boundary_ring(shape)
    frozen = ring if frozen is None else np.asarray(frozen, dtype=bool).reshape(shape)
    if np.any(ring & ~frozen):
        raise InvalidInputError("frozen mask must cover the outer node ring")
    free = np.repeat(~frozen.reshape(-1, 1), y0.d, axis=1).ravel()

    def fun(x):
        return energy_eval(y0.with_values(x), W, p).total

    def grad(x):
        return energy_gradient(y0.with_values(x), W, p).values.ravel()

    try:
        x, trace, it, ok, gnorm = minimize_vector(
            fun, grad, y0.values.ravel(), free, max_iter=max_iter, grad_tol=grad_tol,
            method=method, memory=memory)
    except StagnationError as exc:
        raise StagnationError(str(exc), iterate=y0.with_values(exc.iterate), trace=exc.trace) from None
    return MinimizeResult(y0.with_values(x), trace, it, ok, gnorm)
