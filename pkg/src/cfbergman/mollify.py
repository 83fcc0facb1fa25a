"""Smoothing of kinked Hessian profiles by mollification.

The model domains' second derivatives are smooth except for factors of
|Re w_1|.  Convolving t -> |t| with the standard C-infinity bump at scale s
gives a smooth profile m_s with sup |m_s(t) - |t|| = s * m_s(0)/s = s * GAP.
Everything reduces to the single scale-free function

    M(a) = integral_{-1}^{1} |a - u| phi(u) du,      m_s(t) = s * M(t / s),

with M(a) = |a| exactly for |a| >= 1.  M is tabulated once to machine
precision (piecewise Gauss-Legendre split at the kink u = a) and evaluated
through a cubic spline; the derivative used by the kernel assembly is the
derivative of that same spline, so analytic and finite-difference
derivatives of anything built on m_s agree to spline smoothness.
"""

from __future__ import annotations

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import CubicSpline

_GRID_POINTS = 1601
_GL_NODES = 48


def _bump(u: np.ndarray) -> np.ndarray:
    """Standard C-infinity bump on (-1, 1), not yet normalized."""
    out = np.zeros_like(u, dtype=float)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui * ui))
    return out


def _gl_integral(fn, lo: float, hi: float) -> float:
    x, w = leggauss(_GL_NODES)
    t = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    return 0.5 * (hi - lo) * float(np.sum(w * fn(t)))


def _build_spline():
    norm = _gl_integral(_bump, -1.0, 1.0)

    def phi(u):
        return _bump(u) / norm

    grid = np.linspace(-1.0, 1.0, _GRID_POINTS)
    vals = np.empty_like(grid)
    for i, a in enumerate(grid):
        # split the |a - u| kink so each piece is smooth for Gauss-Legendre
        left = _gl_integral(lambda u: (a - u) * phi(u), -1.0, a)
        right = _gl_integral(lambda u: (u - a) * phi(u), a, 1.0)
        vals[i] = left + right
    # first derivatives at the ends match the |a| continuation exactly
    spline = CubicSpline(grid, vals, bc_type=((1, -1.0), (1, 1.0)))
    return spline, spline.derivative(), float(vals[_GRID_POINTS // 2])


_M_SPLINE, _M_DERIV, ABS_KINK_GAP = _build_spline()


def abs_mollified(t: np.ndarray, scale: float) -> np.ndarray:
    """Mollified |t| at spatial scale ``scale`` (exact |t| when scale == 0)."""
    t = np.asarray(t, dtype=float)
    if scale <= 0.0:
        return np.abs(t)
    out = np.abs(t)
    inner = out < scale
    if np.any(inner):
        out = out.copy()
        out[inner] = scale * _M_SPLINE(t[inner] / scale)
    return out


def abs_mollified_deriv(t: np.ndarray, scale: float) -> np.ndarray:
    """Derivative of ``abs_mollified`` in t (sign(t) when scale == 0)."""
    t = np.asarray(t, dtype=float)
    if scale <= 0.0:
        return np.sign(t)
    out = np.sign(t)
    inner = np.abs(t) < scale
    if np.any(inner):
        out = out.copy()
        out[inner] = _M_DERIV(t[inner] / scale)
    return out
