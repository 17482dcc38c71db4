"""Closed forms for the rank-2 example with sections ``(1, 0)`` and ``(z, w)``.

These are reference values, kept separate from the computational routes so
that tests and the ``reproduce`` command can compare against them.
"""

from __future__ import annotations

import math

import numpy as np


def _m_matrix(z: complex, w: complex, eps: float, a: float) -> np.ndarray:
    """The 4x4 matrix multiplying the prefactor; ``a`` is ``|z|^2 + 1`` shifted."""
    zz, ww = abs(z) ** 2, abs(w) ** 2
    zc, wc = np.conj(z), np.conj(w)
    b = ww + eps
    return np.array([
        [-b ** 2, w * b * zc, w * b * zc, -w ** 2 * zc ** 2],
        [wc * b * z, -ww * zz, -b * a, w * zc * a],
        [wc * b * z, -b * a, -ww * zz, w * zc * a],
        [-wc ** 2 * z ** 2, wc * z * a, wc * z * a, -a ** 2],
    ], dtype=complex)


def closed_form_nakano(family: str, eps: float, z: complex, w: complex) -> np.ndarray:
    """Nakano matrix of ``h_eps`` or ``h_prime_eps`` at ``(z, w)`` in closed form."""
    zz, ww = abs(z) ** 2, abs(w) ** 2
    if family == "h_eps":
        pref = -eps / (eps * zz + ww + eps) ** 3
        return pref * _m_matrix(z, w, eps, zz + 1)
    if family == "h_prime_eps":
        pref = -eps * (eps + 1) / (eps * zz + eps * ww + ww + eps ** 2 + eps) ** 3
        return pref * _m_matrix(z, w, eps, zz + eps + 1)
    raise ValueError(f"unknown family {family!r}")


def closed_form_min_eigenvalue(family: str, eps: float, C: float) -> float:
    """Smallest eigenvalue of ``Theta_Nak + C (omega (x) h)`` at the origin."""
    if family == "h_eps":
        return ((eps + 1) * C - math.sqrt((1 - eps) ** 2 * C ** 2 + 4)) / (2 * eps)
    if family == "h_prime_eps":
        return ((2 * eps + 1) * C - math.sqrt(C ** 2 + 4)) / (2 * eps ** 2 + 2 * eps)
    raise ValueError(f"unknown family {family!r}")


def closed_form_h(z: complex, w: complex) -> np.ndarray:
    """The quotient metric ``h`` off the locus ``w = 0``."""
    zz, ww = abs(z) ** 2, abs(w) ** 2
    return np.array([[ww, -w * np.conj(z)], [-z * np.conj(w), zz + 1]], dtype=complex) / ww


def closed_form_h_dual(z: complex, w: complex) -> np.ndarray:
    zz, ww = abs(z) ** 2, abs(w) ** 2
    return np.array([[zz + 1, z * np.conj(w)], [w * np.conj(z), ww]], dtype=complex)
