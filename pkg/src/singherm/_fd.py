"""Central finite differences in the 2n real coordinates, combined into
Wirtinger derivatives.

Real coordinate ``2k`` is ``Re z_k`` and ``2k+1`` is ``Im z_k``.
"""

from __future__ import annotations

import itertools

import numpy as np


class StencilError(ValueError):
    """The stencil touched a point where the function is not valued."""


def default_steps(x: np.ndarray, rel: float = 1e-3) -> np.ndarray:
    return rel * (1.0 + np.abs(x))


def _stencil(x, steps):
    n = x.shape[0]
    m = 2 * n
    units = np.zeros((m, n), dtype=complex)
    for k in range(n):
        units[2 * k, k] = steps[k]
        units[2 * k + 1, k] = 1j * steps[k]
    pts = [x]
    for a in range(m):
        pts += [x + units[a], x - units[a]]
    for a, b in itertools.combinations(range(m), 2):
        pts += [x + units[a] + units[b], x + units[a] - units[b],
                x - units[a] + units[b], x - units[a] - units[b]]
    return np.array(pts)


def _real_derivatives(f, x, steps):
    """Gradient and Hessian in real coordinates from one batched call to ``f``."""
    n = x.shape[0]
    m = 2 * n
    vals, ok = f(_stencil(x, steps))
    if not np.all(ok):
        raise StencilError("finite-difference stencil meets the degenerate locus")
    h = np.repeat(steps, 2)
    f0 = vals[0]
    grad = np.empty((m,) + f0.shape, dtype=complex)
    hess = np.empty((m, m) + f0.shape, dtype=complex)
    idx = 1
    for a in range(m):
        fp, fm = vals[idx], vals[idx + 1]
        idx += 2
        grad[a] = (fp - fm) / (2 * h[a])
        hess[a, a] = (fp - 2 * f0 + fm) / h[a] ** 2
    for a, b in itertools.combinations(range(m), 2):
        fpp, fpm, fmp, fmm = vals[idx:idx + 4]
        idx += 4
        hess[a, b] = hess[b, a] = (fpp - fpm - fmp + fmm) / (4 * h[a] * h[b])
    return f0, grad, hess


def wirtinger_derivatives(f, x, steps=None, richardson: bool = True):
    """First and mixed second Wirtinger derivatives of ``f`` at ``x``.

    ``f`` maps a batch of points ``(m, n)`` to ``(values, ok)`` with values of
    shape ``(m, ...)``. Returns ``(f0, d, dbar, d_dbar)`` where ``d[i]`` is
    ``df/dz_i``, ``dbar[j]`` is ``df/dconj(z_j)`` and ``d_dbar[i, j]`` is
    ``d^2 f / dz_i dconj(z_j)``. With ``richardson`` the step-h and step-h/2
    estimates are combined as ``(4 F(h/2) - F(h)) / 3``.
    """
    x = np.asarray(x, dtype=complex)
    n = x.shape[0]
    steps = default_steps(x) if steps is None else np.broadcast_to(
        np.asarray(steps, dtype=float), (n,))
    f0, grad, hess = _real_derivatives(f, x, steps)
    if richardson:
        _, grad2, hess2 = _real_derivatives(f, x, steps / 2)
        grad = (4 * grad2 - grad) / 3
        hess = (4 * hess2 - hess) / 3
    d = 0.5 * (grad[0::2] - 1j * grad[1::2])
    dbar = 0.5 * (grad[0::2] + 1j * grad[1::2])
    hxx = hess[0::2, 0::2]
    hyy = hess[1::2, 1::2]
    hxy = hess[0::2, 1::2]
    hyx = hess[1::2, 0::2]
    d_dbar = 0.25 * (hxx + hyy + 1j * (hxy - hyx))
    return f0, d, dbar, d_dbar
