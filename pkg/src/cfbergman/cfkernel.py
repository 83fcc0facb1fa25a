"""Cauchy-Fantappie forms and the scalar kernels built from them.

The generating data is the (1,0)-form with coefficients

    eta_j = chi (p_j - (1/2) sum_k Q_jk (w_k - z_k)) + (1 - chi) (wbar_j - zbar_j)

whose pairing with w - z recovers the support function:
<eta, w - z> - rho(w) = g.  The volume kernel is the scalar density of the
n-fold conjugate-derivative power of eta/g against Euclidean volume, which
reduces once and for all to

    b(w, z) = (n!/pi^n) det A,     A_jm = d/dwbar_m [ eta_j / g ],

with the sign and (2i)^n/(2 pi i)^n = 1/pi^n conversion pinned by the disc
case reproducing the classical Bergman kernel exactly.  All conjugate
derivatives are assembled analytically from first/second derivatives of
rho, the smoothed Hessian family, and the cutoff profile's derivative;
finite differences are kept only as a test oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domains import as_batch
from .errors import DegenerateGeneratingForm, SingularKernel
from .levi import CoreValues, KernelContext, core_values

Array = np.ndarray

_ABS_G_GUARD = 1e-60
_BOUNDARY_BAND = 1e-10
_CHUNK = 200_000


@dataclass(frozen=True)
class CFForm:
    """Coefficients of a (1,0)-form sum_j a_j dw_j at base point w, parameter z."""

    coeffs: Array
    base_point: Array
    parameter: Array


@dataclass(frozen=True)
class KernelValue:
    """Scalar volume-kernel value with numerator/denominator diagnostics."""

    value: complex
    numerator: complex    # value * g^(n+1)
    denominator: complex  # g^(n+1)


def cf_form(ctx: KernelContext, w, z) -> CFForm:
    """Generating (1,0)-form coefficients at (w, z)."""
    W, _ = as_batch(w, ctx.domain.dim)
    Z, _ = as_batch(z, ctx.domain.dim)
    coeffs = cf_form_batch(ctx, W, Z)
    return CFForm(coeffs=coeffs[0], base_point=W[0], parameter=Z[0])


def cf_form_batch(ctx: KernelContext, W: Array, Z: Array) -> Array:
    cv = core_values(ctx, W, Z)
    return _eta(cv)


def _eta(cv: CoreValues) -> Array:
    chi = cv.chi[:, None]
    return chi * (cv.p - 0.5 * cv.Qd) + (1.0 - chi) * np.conj(cv.d)


def _eta_dbar(cv: CoreValues) -> Array:
    """Conjugate derivatives d eta_j / d wbar_m, shape (batch, j, m)."""
    m, n = cv.d.shape
    chi = cv.chi[:, None, None]
    chip_d = (cv.chip[:, None] * cv.d)[:, None, :]          # chi' d_m in slot m
    base = (cv.p - 0.5 * cv.Qd)[:, :, None]                 # slot j
    Td = np.einsum("mjkc,mk->mjc", cv.T, cv.d)              # sum_k T_jkm d_k
    eye = np.broadcast_to(np.eye(n, dtype=complex), (m, n, n))
    return (
        chip_d * base
        + chi * (cv.H - 0.5 * Td)
        - chip_d * np.conj(cv.d)[:, :, None]
        + (1.0 - chi) * eye
    )


def _g_dbar(cv: CoreValues, eta_dbar: Array) -> Array:
    """d g / d wbar_m via the pairing identity g = <eta, w - z> - rho(w)."""
    return np.einsum("mjc,mj->mc", eta_dbar, cv.d) - np.conj(cv.p)


def _jacobian(cv: CoreValues) -> Array:
    """A_jm = d/dwbar_m [eta_j / g], shape (batch, j, m)."""
    eta = _eta(cv)
    eta_dbar = _eta_dbar(cv)
    g_dbar = _g_dbar(cv, eta_dbar)
    g = cv.g[:, None, None]
    return eta_dbar / g - eta[:, :, None] * g_dbar[:, None, :] / g**2


def volume_kernel_batch(ctx: KernelContext, W: Array, Z: Array) -> Array:
    """Scalar volume-kernel values on batches of source/target pairs."""
    n = ctx.domain.dim
    factor = math.factorial(n) / math.pi**n
    out = np.empty(W.shape[0], dtype=complex)
    for lo in range(0, W.shape[0], _CHUNK):
        hi = min(lo + _CHUNK, W.shape[0])
        cv = core_values(ctx, W[lo:hi], Z[lo:hi])
        if np.any(np.abs(cv.g) < _ABS_G_GUARD):
            raise SingularKernel(
                "support function below the underflow guard "
                "(boundary-coincident source/target pair)"
            )
        out[lo:hi] = factor * np.linalg.det(_jacobian(cv))
    return out


def volume_kernel(ctx: KernelContext, w, z) -> KernelValue:
    """Scalar volume kernel at one pair, with numerator/denominator parts."""
    W, _ = as_batch(w, ctx.domain.dim)
    Z, _ = as_batch(z, ctx.domain.dim)
    n = ctx.domain.dim
    cv = core_values(ctx, W, Z)
    g = complex(cv.g[0])
    if abs(g) < _ABS_G_GUARD:
        raise SingularKernel("support function below the underflow guard")
    val = complex((math.factorial(n) / math.pi**n) * np.linalg.det(_jacobian(cv))[0])
    gp = g ** (n + 1)
    return KernelValue(value=val, numerator=val * gp, denominator=gp)


# ---------------------------------------------------------------------------
# Leading coefficient of kernel * g^(n+1) at the coincidence limit
# ---------------------------------------------------------------------------

def leading_coefficient(ctx: KernelContext, W) -> Array:
    """Coincidence limit of (volume kernel) * g^(n+1) at source points W.

    Equals (n!/pi^n) (<adj(H) p, p> - rho det H) with H the Levi matrix and
    p the (1,0)-derivative of rho; on the boundary this is the classical
    gradient-squared times Levi-determinant density, and the convention is
    pinned by the disc oracle (constant 1/pi there).  Real-valued.
    """
    W, single = as_batch(W, ctx.domain.dim)
    n = ctx.domain.dim
    p = ctx.domain.d_rho(W)
    H = ctx.domain.hess_mixed(W)
    detH = np.linalg.det(H)
    adj = detH[:, None, None] * np.linalg.inv(H)
    S = np.real(np.einsum("mj,mjk,mk->m", np.conj(p), adj, p))
    vals = (math.factorial(n) / math.pi**n) * (S - ctx.domain.rho(W) * np.real(detH))
    return float(vals[0]) if single else vals


def kernel_leading_term(ctx: KernelContext, w, z) -> dict:
    """Leading coefficient at w and the measured remainder of the kernel law.

    The remainder |kernel * g^(n+1) - leading_coeff| is O(|w - z|) with an
    epsilon-dependent constant (it involves first derivatives of the
    smoothed Hessian, which may grow as the smoothing level shrinks).
    """
    kv = volume_kernel(ctx, w, z)
    lc = leading_coefficient(ctx, w)
    return {"leading_coeff": lc, "remainder": abs(kv.numerator - lc)}


# ---------------------------------------------------------------------------
# Boundary kernel: Cauchy-Fantappie density of order 0 on bD
# ---------------------------------------------------------------------------

def generating_form(ctx: KernelContext, w, z) -> CFForm:
    """Normalized form eta / <eta, w - z> with pairing identically 1."""
    W, _ = as_batch(w, ctx.domain.dim)
    Z, _ = as_batch(z, ctx.domain.dim)
    cv = core_values(ctx, W, Z)
    eta = _eta(cv)
    h = cv.g + cv.rho_w  # <eta, w - z>
    if np.any(np.abs(h) < _ABS_G_GUARD):
        raise DegenerateGeneratingForm("generating-form pairing vanishes")
    return CFForm(coeffs=(eta / h[:, None])[0], base_point=W[0], parameter=Z[0])


def _real_gram_volume(frames: Array) -> Array:
    """sqrt(det Gram) of tangent frames under the real inner product."""
    gram = np.real(np.einsum("mai,mbi->mab", frames, np.conj(frames)))
    return np.sqrt(np.linalg.det(gram))


def boundary_kernel_batch(ctx: KernelContext, nodes: Array, z, frames: Array) -> Array:
    """Boundary CF density per surface measure at boundary nodes, target z.

    ``frames`` holds per node the 2n-1 tangent vectors of the surface
    parametrization, ordered positively for the outward-normal-first
    orientation.  Only n <= 2 is assembled (the shipped surface rules stop
    there); the n = 1 case is the Cauchy kernel density.
    """
    n = ctx.domain.dim
    W = np.asarray(nodes, dtype=complex)
    Z = np.broadcast_to(np.asarray(z, dtype=complex), W.shape).copy()
    if np.any(np.abs(ctx.domain.rho(W)) > _BOUNDARY_BAND):
        raise ValueError("boundary kernel requires nodes inside the boundary band")
    cv = core_values(ctx, W, Z)
    eta = _eta(cv)
    h = cv.g + cv.rho_w
    if np.any(np.abs(h) < _ABS_G_GUARD):
        raise DegenerateGeneratingForm(
            "generating-form pairing vanishes at a boundary node"
        )
    ghat = eta / h[:, None]
    jac = _real_gram_volume(frames)

    if n == 1:
        dens = ghat[:, 0] * frames[:, 0, 0] / (2j * math.pi * jac)
        return dens

    if n == 2:
        eta_dbar = _eta_dbar(cv)
        g_dbar = _g_dbar(cv, eta_dbar)
        h_dbar = g_dbar + np.conj(cv.p)
        A = eta_dbar / h[:, None, None] - eta[:, :, None] * h_dbar[:, None, :] / (
            h[:, None, None] ** 2
        )
        # ghat ^ dbar(ghat) = sum_m (ghat_2 A_1m - ghat_1 A_2m) dw1 ^ dw2 ^ dwbar_m
        c1 = ghat[:, 1] * A[:, 0, 0] - ghat[:, 0] * A[:, 1, 0]
        c2 = ghat[:, 1] * A[:, 0, 1] - ghat[:, 0] * A[:, 1, 1]
        V = frames  # (m, 3, 2) complex tangent vectors
        rows_w1 = V[:, :, 0]
        rows_w2 = V[:, :, 1]

        def det3(a, b, c):
            return (
                a[:, 0] * (b[:, 1] * c[:, 2] - b[:, 2] * c[:, 1])
                - a[:, 1] * (b[:, 0] * c[:, 2] - b[:, 2] * c[:, 0])
                + a[:, 2] * (b[:, 0] * c[:, 1] - b[:, 1] * c[:, 0])
            )

        form = c1 * det3(rows_w1, rows_w2, np.conj(rows_w1)) + c2 * det3(
            rows_w1, rows_w2, np.conj(rows_w2)
        )
        return form / ((2j * math.pi) ** 2 * jac)

    raise NotImplementedError("boundary densities are assembled for n <= 2 only")


def boundary_kernel(ctx: KernelContext, w, z, frame: Array) -> tuple[Array, complex]:
    """Generating-form coefficients and the boundary density at one node."""
    W, _ = as_batch(w, ctx.domain.dim)
    gf = generating_form(ctx, w, z)
    dens = boundary_kernel_batch(ctx, W, z, np.asarray(frame, dtype=complex)[None])
    return gf.coeffs, complex(dens[0])


# ---------------------------------------------------------------------------
# Finite-difference oracles (test use)
# ---------------------------------------------------------------------------

def finite_difference_dbar(fn, w: Array, h: float = 1e-6) -> Array:
    """Central-difference conjugate Wirtinger derivatives of fn at w.

    fn maps a single point (n,) to a complex scalar or vector; the result
    stacks d fn / d wbar_m over m in the last axis.
    """
    w = np.asarray(w, dtype=complex)
    n = w.size
    probe = np.asarray(fn(w))
    out = np.empty(probe.shape + (n,), dtype=complex)
    for m in range(n):
        e = np.zeros(n, dtype=complex)
        e[m] = h
        dx = (np.asarray(fn(w + e)) - np.asarray(fn(w - e))) / (2 * h)
        e[m] = 1j * h
        dy = (np.asarray(fn(w + e)) - np.asarray(fn(w - e))) / (2 * h)
        out[..., m] = 0.5 * (dx + 1j * dy)
    return out


def jacobian_matrix(ctx: KernelContext, w, z) -> Array:
    """The analytic matrix A_jm at one pair (exposed for the FD cross-check)."""
    W, _ = as_batch(w, ctx.domain.dim)
    Z, _ = as_batch(z, ctx.domain.dim)
    cv = core_values(ctx, W, Z)
    return _jacobian(cv)[0]
