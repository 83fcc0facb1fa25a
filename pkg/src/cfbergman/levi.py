"""Levi polynomial, cutoff, Hessian smoothing, and support functions.

The support function

    g(w, z) = -P_w(z) chi(|z - w|^2) + |z - w|^2 (1 - chi) - rho(w)

patches the Levi polynomial P_w near the diagonal into the plain squared
distance far from it; its real part is bounded below in terms of
-rho(w) - rho(z) + c |w - z|^2.  The smoothed variant replaces the
holomorphic Hessian inside P_w by a family of smooth matrices within
``epsilon`` of it (the domain's ``hess_smooth_family``), which is what
makes conjugate-in-w differentiation of the kernel legitimate on domains
that are only C2.

All evaluators are pure and batched over point arrays; a KernelContext is
immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .domains import DomainSpec, as_batch, sample_pairs, uniform_directions
from .errors import NoAdmissibleDelta

Array = np.ndarray


# ---------------------------------------------------------------------------
# Smooth plateau profile for the cutoff chi
# ---------------------------------------------------------------------------

def _f_exp(x: Array) -> Array:
    """exp(-1/x) for x > 0, 0 otherwise; C-infinity on the real line."""
    out = np.zeros_like(x, dtype=float)
    pos = x > 0.0
    out[pos] = np.exp(-1.0 / x[pos])
    return out


def _f_exp_deriv(x: Array) -> Array:
    out = np.zeros_like(x, dtype=float)
    pos = x > 1e-8  # below this the factor exp(-1/x)/x^2 underflows anyway
    xp = x[pos]
    out[pos] = np.exp(-1.0 / xp) / (xp * xp)
    return out


def plateau(x: Array) -> Array:
    """C-infinity transition: exactly 1 for x <= 0, exactly 0 for x >= 1."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = _f_exp(1.0 - x)
    b = _f_exp(x)
    return a / (a + b)  # a + b > 0 everywhere: the two supports overlap


def plateau_deriv(x: Array) -> Array:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    a = _f_exp(1.0 - x)
    b = _f_exp(x)
    da = -_f_exp_deriv(1.0 - x)
    db = _f_exp_deriv(x)
    return (da * b - a * db) / (a + b) ** 2


# ---------------------------------------------------------------------------
# Kernel context
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class KernelContext:
    """Frozen bundle from which the support functions and kernels are evaluated.

    ``mu`` is the cutoff outer radius (chi = 1 for |z-w| <= mu/2 and 0 for
    |z-w| >= mu), ``c_bound`` the calibrated constant of the lower bounds.
    ``tau_policy`` is "exact" (smoothing scale 0) or "mollified" with
    ``tau_scale`` resolved so the sampled Hessian distance is <= epsilon.
    In ``global_holomorphic_mode`` chi is identically 1, which requires the
    calibrated mu to be at least the domain diameter.
    """

    domain: DomainSpec
    epsilon: float
    mu: float
    c_bound: float
    chi_profile: str = "exp_plateau"
    tau_policy: str = "exact"
    tau_scale: float = 0.0
    global_holomorphic_mode: bool = False

    def chi(self, u: Array) -> Array:
        """Cutoff evaluated on squared distances u = |z - w|^2."""
        if self.global_holomorphic_mode:
            return np.ones_like(np.asarray(u, dtype=float))
        lo = 0.25 * self.mu**2
        return plateau((np.asarray(u, dtype=float) - lo) / (3.0 * lo))

    def chi_prime(self, u: Array) -> Array:
        """d chi / du on squared distances."""
        if self.global_holomorphic_mode:
            return np.zeros_like(np.asarray(u, dtype=float))
        lo = 0.25 * self.mu**2
        return plateau_deriv((np.asarray(u, dtype=float) - lo) / (3.0 * lo)) / (3.0 * lo)

    def tau(self, W: Array) -> tuple[Array, Array]:
        """Smoothed holomorphic Hessian and its conjugate-derivative tensor."""
        scale = self.tau_scale if self.tau_policy == "mollified" else 0.0
        return self.domain.hess_smooth_family(W, scale)

    def with_epsilon(self, epsilon: float, seed: int = 0) -> "KernelContext":
        """Same context at a different smoothing level (re-resolves the scale)."""
        scale = (
            resolve_tau_scale(self.domain, epsilon, seed=seed)
            if self.tau_policy == "mollified" and epsilon > 0.0
            else 0.0
        )
        return replace(self, epsilon=epsilon, tau_scale=scale)


def resolve_tau_scale(
    domain: DomainSpec,
    epsilon: float,
    seed: int = 0,
    grid_size: int = 4000,
) -> float:
    """Largest smoothing scale whose sampled sup |hessian - tau| is <= epsilon.

    Found by bisection on a seeded calibration grid that includes points
    straddling the kink set of the C2-only domains.
    """
    if epsilon <= 0.0:
        return 0.0
    rng = np.random.default_rng(seed)
    xi = uniform_directions(rng, grid_size, domain.dim)
    s = rng.random(grid_size) ** (1.0 / (2 * domain.dim))
    W = (s * domain.boundary_radius(xi))[:, None] * xi
    # force coverage of small |Re w_1| where the mollification error peaks
    W[: grid_size // 4, 0] = (
        1j * np.imag(W[: grid_size // 4, 0])
        + np.linspace(-0.2, 0.2, grid_size // 4)
    )
    exact = domain.hess_holo(W)

    def sup_dist(scale: float) -> float:
        tau, _ = domain.hess_smooth_family(W, scale)
        return float(np.max(np.abs(exact - tau))) if exact.size else 0.0

    hi = 0.5 * domain.diameter
    if sup_dist(hi) <= epsilon:
        return hi
    lo = 0.0
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if sup_dist(mid) <= epsilon:
            lo = mid
        else:
            hi = mid
    return lo


# ---------------------------------------------------------------------------
# Core batched evaluation
# ---------------------------------------------------------------------------

class CoreValues:
    """Shared intermediates for a batch of (w, z) pairs.

    Attributes follow the assembly formulas: d = w - z, u = |d|^2, chi and
    its u-derivative, the (1,0)-derivative p, the mixed Hessian H, the
    (smoothed) holomorphic Hessian Q with derivative tensor T, the Levi
    polynomial value P, the support function g, and rho at w.
    """

    __slots__ = ("d", "u", "chi", "chip", "p", "H", "Q", "T", "Qd", "P", "g", "rho_w")


def core_values(ctx: KernelContext, W: Array, Z: Array, exact_tau: bool = False) -> CoreValues:
    """Evaluate all shared intermediates on batches W, Z of shape (m, n)."""
    cv = CoreValues()
    cv.d = W - Z
    cv.u = np.sum(np.abs(cv.d) ** 2, axis=-1)
    cv.chi = ctx.chi(cv.u)
    cv.chip = ctx.chi_prime(cv.u)
    cv.p = ctx.domain.d_rho(W)
    cv.H = ctx.domain.hess_mixed(W)
    if exact_tau:
        cv.Q, cv.T = ctx.domain.hess_smooth_family(W, 0.0)
    else:
        cv.Q, cv.T = ctx.tau(W)
    cv.Qd = np.einsum("mjk,mk->mj", cv.Q, cv.d)
    # P^eps_w(z) = <p, z - w> + (1/2) <Q; z - w, z - w> = -<p, d> + (1/2) <Q; d, d>
    cv.P = -np.sum(cv.p * cv.d, axis=-1) + 0.5 * np.einsum("mj,mj->m", cv.d, cv.Qd)
    cv.rho_w = ctx.domain.rho(W)
    cv.g = -cv.chi * cv.P + (1.0 - cv.chi) * cv.u - cv.rho_w
    return cv


def _pairup(ctx: KernelContext, w, z) -> tuple[Array, Array, bool]:
    W, single_w = as_batch(w, ctx.domain.dim)
    Z, single_z = as_batch(z, ctx.domain.dim)
    if W.shape[0] == 1 and Z.shape[0] > 1:
        W = np.broadcast_to(W, Z.shape).copy()
    if Z.shape[0] == 1 and W.shape[0] > 1:
        Z = np.broadcast_to(Z, W.shape).copy()
    return W, Z, single_w and single_z


def levi_polynomial(ctx: KernelContext, w, z):
    """Holomorphic second-order Taylor polynomial of rho at w, evaluated at z."""
    W, Z, single = _pairup(ctx, w, z)
    cv = core_values(ctx, W, Z, exact_tau=True)
    return complex(cv.P[0]) if single else cv.P


def levi_polynomial_smoothed(ctx: KernelContext, w, z):
    """Levi polynomial with the smoothed Hessian; equals the exact one at scale 0."""
    W, Z, single = _pairup(ctx, w, z)
    cv = core_values(ctx, W, Z)
    return complex(cv.P[0]) if single else cv.P


def support_function(ctx: KernelContext, w, z):
    """Smoothed support function g_eps(w, z) per the context's tau policy."""
    W, Z, single = _pairup(ctx, w, z)
    cv = core_values(ctx, W, Z)
    return complex(cv.g[0]) if single else cv.g


def support_function_exact(ctx: KernelContext, w, z):
    """Support function g(w, z) built from the exact holomorphic Hessian."""
    W, Z, single = _pairup(ctx, w, z)
    cv = core_values(ctx, W, Z, exact_tau=True)
    return complex(cv.g[0]) if single else cv.g


def size_proxy(ctx: KernelContext, w, z):
    """|rho(w)| + |rho(z)| + |Im <d rho(w), w - z>| + |w - z|^2.

    The two-sided comparison quantity for |g|; it vanishes only when
    w = z lies on the boundary.
    """
    W, Z, single = _pairup(ctx, w, z)
    d = W - Z
    p = ctx.domain.d_rho(W)
    vals = (
        np.abs(ctx.domain.rho(W))
        + np.abs(ctx.domain.rho(Z))
        + np.abs(np.imag(np.sum(p * d, axis=-1)))
        + np.sum(np.abs(d) ** 2, axis=-1)
    )
    return float(vals[0]) if single else vals


# ---------------------------------------------------------------------------
# Modulus of continuity of the second derivatives
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModulusOfContinuity:
    """Sampled sup of second-derivative oscillation at pair distances <= delta.

    The sampled sup is a lower bound of the true sup and is reported as
    such; ``omegas`` is nondecreasing by construction.
    """

    deltas: Array
    omegas: Array
    per_entry: Optional[Array] = None  # (len(deltas), n, n) breakdown
    samples: int = 0
    seed: int = 0


def modulus_of_continuity(
    domain: DomainSpec,
    deltas,
    samples: int = 20000,
    seed: int = 0,
) -> ModulusOfContinuity:
    """Sample omega(delta) = sum_jk sup (|holo Hessian diff| + |mixed Hessian diff|)."""
    deltas = np.asarray(sorted(float(d) for d in deltas))
    if deltas.size == 0 or np.any(deltas <= 0.0):
        raise ValueError("deltas must be positive and nonempty")
    rng = np.random.default_rng(seed)
    n = domain.dim

    xi = uniform_directions(rng, samples, n)
    s = rng.random(samples) ** (1.0 / (2 * n))
    W = (s * domain.boundary_radius(xi))[:, None] * xi
    dirs = uniform_directions(rng, samples, n)
    h = deltas[-1] * rng.random(samples) ** 2
    # half the pairs straddle the kink axis Re w_1 = 0 where oscillation peaks
    half = samples // 2
    W[:half, 0] = 1j * np.imag(W[:half, 0]) + 0.5 * h[:half] * np.real(dirs[:half, 0])
    Z = W + h[:, None] * dirs
    norms = np.linalg.norm(Z, axis=1)
    unit = Z / np.where(norms[:, None] == 0.0, 1.0, norms[:, None])
    rb = domain.boundary_radius(unit)
    Z *= np.minimum(1.0, rb / np.where(norms == 0.0, 1.0, norms))[:, None]
    dist = np.linalg.norm(Z - W, axis=1)

    diff = np.abs(domain.hess_holo(Z) - domain.hess_holo(W)) + np.abs(
        domain.hess_mixed(Z) - domain.hess_mixed(W)
    )
    total = np.sum(diff, axis=(1, 2))

    omegas = np.zeros_like(deltas)
    per_entry = np.zeros((deltas.size, n, n))
    for i, dlt in enumerate(deltas):
        mask = dist <= dlt
        if np.any(mask):
            omegas[i] = float(np.max(total[mask]))
            per_entry[i] = np.max(diff[mask], axis=0)
    omegas = np.maximum.accumulate(omegas)
    per_entry = np.maximum.accumulate(per_entry, axis=0)
    return ModulusOfContinuity(
        deltas=deltas, omegas=omegas, per_entry=per_entry, samples=samples, seed=seed
    )


def delta_for_epsilon(mod: ModulusOfContinuity, epsilon: float) -> float:
    """Largest sampled delta with omega(delta) <= epsilon."""
    ok = mod.omegas <= epsilon
    if not np.any(ok):
        raise NoAdmissibleDelta(
            f"omega({mod.deltas[0]:g}) = {mod.omegas[0]:.3g} already exceeds {epsilon:g}"
        )
    return float(mod.deltas[np.nonzero(ok)[0][-1]])
