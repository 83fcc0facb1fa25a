"""Discrete integral operators on quadrature grids and their norm estimates.

A DiscreteOperator is a (targets x nodes) matrix with the source quadrature
weights folded in, so applying it to sampled function values performs the
integral.  Adjoints are taken with respect to the weighted inner product
(f, g) = sum f conj(g) w, matching the L^2(D) pairing; operator p-norms are
certified nowhere: p = 2 uses power iteration on T*T and general p reports
randomized lower bounds over rough/oscillatory test families.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import beta as beta_function

from .cfkernel import leading_coefficient, volume_kernel_batch
from .domains import uniform_directions
from .errors import NonIntegrable, UnsupportedDomain
from .levi import (
    KernelContext,
    core_values,
    delta_for_epsilon,
    modulus_of_continuity,
)
from .quadrature import QuadratureRule, _gauss_panel

Array = np.ndarray


# ---------------------------------------------------------------------------
# Discrete operators
# ---------------------------------------------------------------------------

@dataclass(eq=False)
class DiscreteOperator:
    """Matrix form of an integral operator between two quadrature grids."""

    matrix: Array
    source_points: Array
    source_weights: Array
    target_points: Array
    target_weights: Array
    label: str = ""
    aux: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def apply(self, values: Array) -> Array:
        return self.matrix @ np.asarray(values)

    def adjoint(self) -> "DiscreteOperator":
        """Adjoint with quadrature weights refolded so (Tf, g) = (f, T*g)."""
        mat = (
            np.conj(self.matrix.T)
            * self.target_weights[None, :]
            / self.source_weights[:, None]
        )
        return DiscreteOperator(
            matrix=mat,
            source_points=self.target_points,
            source_weights=self.target_weights,
            target_points=self.source_points,
            target_weights=self.source_weights,
            label=self.label + "*",
            aux={"rho_source": self.aux.get("rho_target"),
                 "rho_target": self.aux.get("rho_source")},
        )

    def __sub__(self, other: "DiscreteOperator") -> "DiscreteOperator":
        if self.shape != other.shape:
            raise ValueError("operator shapes differ")
        return DiscreteOperator(
            matrix=self.matrix - other.matrix,
            source_points=self.source_points,
            source_weights=self.source_weights,
            target_points=self.target_points,
            target_weights=self.target_weights,
            label=f"{self.label}-{other.label}",
            aux=dict(self.aux),
        )


def lp_norm(values: Array, weights: Array, p: float) -> float:
    return float(np.sum(np.abs(values) ** p * weights) ** (1.0 / p))


def _resolve_targets(targets) -> tuple[Array, Array]:
    if isinstance(targets, QuadratureRule):
        return targets.nodes, targets.weights
    pts = np.asarray(targets, dtype=complex)
    # unweighted targets still act as evaluation points; norm estimation
    # needs a weighted target grid
    return pts, np.full(pts.shape[0], np.nan)


def _assemble(kernel_row: Callable[[Array], Array], rule: QuadratureRule,
              tgt_pts: Array) -> Array:
    mat = np.empty((tgt_pts.shape[0], rule.size), dtype=complex)
    for i, z in enumerate(tgt_pts):
        mat[i] = kernel_row(z) * rule.weights
    return mat


def gamma_operator(
    ctx: KernelContext,
    rule: QuadratureRule,
    targets,
    use_eps: bool = True,
) -> DiscreteOperator:
    """Positive comparison operator with kernel |g(w, z)|^-(n+1)."""
    n = ctx.domain.dim
    tgt_pts, tgt_w = _resolve_targets(targets)

    def row(z):
        Z = np.broadcast_to(z, rule.nodes.shape).copy()
        cv = core_values(ctx, rule.nodes, Z, exact_tau=not use_eps)
        return np.abs(cv.g) ** (-(n + 1))

    mat = _assemble(row, rule, tgt_pts)
    if not np.all(np.isfinite(mat)):
        raise NonIntegrable("comparison kernel not finite (coincident node/target)")
    return DiscreteOperator(
        matrix=mat,
        source_points=rule.nodes,
        source_weights=rule.weights,
        target_points=tgt_pts,
        target_weights=tgt_w,
        label="gamma_eps" if use_eps else "gamma",
        aux={"rho_source": ctx.domain.rho(rule.nodes),
             "rho_target": ctx.domain.rho(tgt_pts)},
    )


def b1_operator(ctx: KernelContext, rule: QuadratureRule, targets) -> DiscreteOperator:
    """Volume Cauchy-Fantappie projection on the grid (reproduces holomorphic f)."""
    tgt_pts, tgt_w = _resolve_targets(targets)

    def row(z):
        Z = np.broadcast_to(z, rule.nodes.shape).copy()
        return volume_kernel_batch(ctx, rule.nodes, Z)

    mat = _assemble(row, rule, tgt_pts)
    return DiscreteOperator(
        matrix=mat,
        source_points=rule.nodes,
        source_weights=rule.weights,
        target_points=tgt_pts,
        target_weights=tgt_w,
        label="cf_volume",
        aux={"rho_source": ctx.domain.rho(rule.nodes),
             "rho_target": ctx.domain.rho(tgt_pts)},
    )


def abs_operator(op: DiscreteOperator) -> DiscreteOperator:
    """Entrywise modulus of the kernel matrix (weights are positive, so folded ones too)."""
    return DiscreteOperator(
        matrix=np.abs(op.matrix),
        source_points=op.source_points,
        source_weights=op.source_weights,
        target_points=op.target_points,
        target_weights=op.target_weights,
        label=f"|{op.label}|",
        aux=dict(op.aux),
    )


# ---------------------------------------------------------------------------
# Truncation and the adjoint defect
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TruncationProfile:
    """Continuous near-diagonal cutoff: 1 on [0, 1/2], linear to 0 at 1.

    Applied to (|rho(z)| + |rho(w)| + |z - w|) / r, which is symmetric in
    w and z.
    """

    r: float

    def __call__(self, t: Array) -> Array:
        return np.clip(2.0 * (1.0 - np.asarray(t)), 0.0, 1.0)


def _phi_matrix(op: DiscreteOperator, profile: TruncationProfile) -> Array:
    rho_s = np.abs(op.aux["rho_source"])
    rho_t = np.abs(op.aux["rho_target"])
    dist = np.linalg.norm(
        op.target_points[:, None, :] - op.source_points[None, :, :], axis=-1
    )
    arg = (rho_t[:, None] + rho_s[None, :] + dist) / profile.r
    return profile(arg)


def truncate(op: DiscreteOperator, profile: TruncationProfile):
    """Split into near-diagonal and far parts; the split is exact entrywise."""
    phi = _phi_matrix(op, profile)
    near = DiscreteOperator(
        matrix=op.matrix * phi,
        source_points=op.source_points,
        source_weights=op.source_weights,
        target_points=op.target_points,
        target_weights=op.target_weights,
        label=f"{op.label}[near r={profile.r:g}]",
        aux=dict(op.aux),
    )
    far = DiscreteOperator(
        matrix=op.matrix * (1.0 - phi),
        source_points=op.source_points,
        source_weights=op.source_weights,
        target_points=op.target_points,
        target_weights=op.target_weights,
        label=f"{op.label}[far r={profile.r:g}]",
        aux=dict(op.aux),
    )
    return near, far


def square_b1_operator(ctx: KernelContext, rule: QuadratureRule) -> DiscreteOperator:
    """Volume kernel on (nodes -> nodes) with the removed-diagonal convention."""
    op = b1_operator(ctx, rule, rule)
    np.fill_diagonal(op.matrix, 0.0)
    op.label = "cf_volume_square"
    return op


def defect_operator(
    ctx: KernelContext, rule: QuadratureRule, profile: TruncationProfile
) -> DiscreteOperator:
    """Near-diagonal truncation minus its adjoint (the approximate-symmetry defect)."""
    near, _ = truncate(square_b1_operator(ctx, rule), profile)
    out = near - near.adjoint()
    out.label = f"defect r={profile.r:g} eps={ctx.epsilon:g}"
    return out


def remainder_slope(ctx: KernelContext, samples: int = 400, seed: int = 0,
                    h_lo: float = 1e-4, h_hi: float = 1e-2) -> float:
    """Empirical coefficient of the O(|w - z|) remainder of kernel * g^(n+1)."""
    rng = np.random.default_rng(seed)
    n = ctx.domain.dim
    xi = uniform_directions(rng, samples, n)
    s = 0.2 + 0.78 * rng.random(samples)
    W = (s * ctx.domain.boundary_radius(xi))[:, None] * xi
    dirs = uniform_directions(rng, samples, n)
    h = h_lo * (h_hi / h_lo) ** rng.random(samples)
    Z = W - h[:, None] * dirs
    vals = volume_kernel_batch(ctx, W, Z)
    cv = core_values(ctx, W, Z)
    resid = np.abs(vals * cv.g ** (n + 1) - leading_coefficient(ctx, W))
    return float(np.quantile(resid / h, 0.95))


def select_truncation_radius(
    ctx: KernelContext,
    mod=None,
    samples: int = 4000,
    seed: int = 0,
) -> TruncationProfile:
    """Truncation radius min(delta_eps, delta'_eps, eps / remainder slope).

    delta_eps comes from the sampled modulus of continuity of the second
    derivatives, delta'_eps from the sampled modulus of the kernel's
    leading coefficient, and the last term caps the measured O(|w-z|)
    remainder at eps on the truncation support.
    """
    eps = ctx.epsilon
    if eps <= 0.0:
        raise ValueError("truncation radius selection needs epsilon > 0")
    if mod is None:
        deltas = np.geomspace(1e-4, 1.0, 25)
        mod = modulus_of_continuity(ctx.domain, deltas, samples=samples, seed=seed)
    try:
        d_eps = delta_for_epsilon(mod, eps)
    except Exception:
        d_eps = float(mod.deltas[0])

    # modulus of continuity of the leading coefficient
    rng = np.random.default_rng(seed + 1)
    xi = uniform_directions(rng, samples, ctx.domain.dim)
    s = rng.random(samples) ** (1.0 / (2 * ctx.domain.dim))
    W = (s * ctx.domain.boundary_radius(xi))[:, None] * xi
    dirs = uniform_directions(rng, samples, ctx.domain.dim)
    h = 10.0 ** (-4.0 * rng.random(samples))
    Z = W - h[:, None] * dirs
    inside = ctx.domain.rho(Z) < 0.0
    lc_diff = np.abs(
        leading_coefficient(ctx, W[inside]) - leading_coefficient(ctx, Z[inside])
    )
    dist = np.linalg.norm((W - Z)[inside], axis=1)
    order = np.argsort(dist)
    running = np.maximum.accumulate(lc_diff[order])
    ok = running <= eps
    d_prime = float(dist[order][np.nonzero(ok)[0][-1]]) if np.any(ok) else float(
        dist[order][0]
    )

    slope = remainder_slope(ctx, samples=min(samples, 500), seed=seed + 2)
    r = min(d_eps, d_prime, eps / max(slope, 1e-12))
    return TruncationProfile(r=r)


# ---------------------------------------------------------------------------
# Norm estimation
# ---------------------------------------------------------------------------

def _weighted_l2(values: Array, weights: Array) -> float:
    return float(np.sqrt(np.real(np.sum(np.abs(values) ** 2 * weights))))


def estimate_norm(op: DiscreteOperator, p: float, trials: int = 8, seed: int = 0) -> float:
    """Operator norm estimate on the weighted grid.

    p = 2: power iteration on T*T (20 iterations or 1e-6 stagnation).
    Other p: a lower bound, the max of |Tf|_p / |f|_p over seeded random,
    rough, oscillatory, and boundary-concentrated test vectors.
    """
    if not (1.0 < p < math.inf):
        raise ValueError("p must lie in (1, inf)")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if np.any(~np.isfinite(op.target_weights)):
        raise ValueError("norm estimation needs a weighted target grid")
    rng = np.random.default_rng(seed)
    ms = op.shape[1]

    if p == 2.0:
        adj = op.adjoint()
        v = rng.standard_normal(ms) + 1j * rng.standard_normal(ms)
        v /= _weighted_l2(v, op.source_weights)
        prev = 0.0
        for _ in range(20):
            u = op.apply(v)
            v = adj.apply(u)
            nv = _weighted_l2(v, op.source_weights)
            if nv == 0.0:
                return 0.0
            v /= nv
            est = math.sqrt(nv)
            if abs(est - prev) <= 1e-6 * max(est, 1.0):
                prev = est
                break
            prev = est
        return prev

    rho_s = op.aux.get("rho_source")
    xs = np.real(op.source_points)
    best = 0.0
    for _ in range(trials):
        fams = [
            rng.standard_normal(ms) + 1j * rng.standard_normal(ms),
            rng.choice([-1.0, 1.0], size=ms),
        ]
        freq = rng.uniform(2.0, 30.0, size=op.source_points.shape[1])
        fams.append(np.exp(1j * (xs @ freq)))
        if rho_s is not None:
            expo = rng.uniform(0.1, 0.9 / p)
            fams.append(np.abs(rho_s) ** (-expo))
        for f in fams:
            nf = lp_norm(f, op.source_weights, p)
            if nf == 0.0:
                continue
            best = max(best, lp_norm(op.apply(f), op.target_weights, p) / nf)
    return best


# ---------------------------------------------------------------------------
# Schur-test integrals
# ---------------------------------------------------------------------------

def schur_integral(ctx: KernelContext, rule: QuadratureRule, z, alpha: float,
                   use_eps: bool = False) -> float:
    """Integral of |g(w, z)|^-(n+1) |rho(w)|^-alpha over the rule."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    n = ctx.domain.dim
    Z = np.broadcast_to(np.asarray(z, dtype=complex), rule.nodes.shape).copy()
    cv = core_values(ctx, rule.nodes, Z, exact_tau=not use_eps)
    vals = np.abs(cv.g) ** (-(n + 1)) * np.abs(ctx.domain.rho(rule.nodes)) ** (-alpha)
    total = float(np.sum(rule.weights * vals))
    if rule.coarse is not None:
        Zc = np.broadcast_to(np.asarray(z, dtype=complex), rule.coarse.nodes.shape).copy()
        cvc = core_values(ctx, rule.coarse.nodes, Zc, exact_tau=not use_eps)
        coarse = float(np.sum(
            rule.coarse.weights
            * np.abs(cvc.g) ** (-(n + 1))
            * np.abs(ctx.domain.rho(rule.coarse.nodes)) ** (-alpha)
        ))
        if abs(total - coarse) > 0.5 * abs(total):
            raise NonIntegrable(
                f"refinement diverges (full {total:.4g} vs coarse {coarse:.4g})"
            )
    return total


def schur_integral_swapped(ctx: KernelContext, rule: QuadratureRule, w, alpha: float) -> float:
    """Same integral with the roles of the slots swapped: integrate over z."""
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    n = ctx.domain.dim
    W = np.broadcast_to(np.asarray(w, dtype=complex), rule.nodes.shape).copy()
    cv = core_values(ctx, W, rule.nodes)
    vals = np.abs(cv.g) ** (-(n + 1)) * np.abs(ctx.domain.rho(rule.nodes)) ** (-alpha)
    return float(np.sum(rule.weights * vals))


# ---------------------------------------------------------------------------
# Rescaled half-space model integral
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RescaledIntegralResult:
    direct: float
    reduced: float
    rel_diff: float
    c_alpha: float


def _graded_panels(lo_scale: float, hi: float, per: int = 10):
    """Panels geometric toward 0 on [0, 1] then geometric growth to hi."""
    edges = [0.0]
    small = [lo_scale * 2.0**k for k in range(int(math.log2(1.0 / lo_scale)) + 1)]
    edges.extend(e for e in small if e < 1.0)
    edges.append(1.0)
    e = 1.0
    while e < hi:
        e *= 2.0
        edges.append(min(e, hi))
    xs, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        x, w = _gauss_panel(a, b, per)
        xs.append(x)
        ws.append(w)
    return np.concatenate(xs), np.concatenate(ws)


def _model_integral_direct(n: int, alpha: float, cutoff: float) -> float:
    s, ws = _graded_panels(1e-7, cutoff)
    u, wu = _graded_panels(1e-4, cutoff)
    if n == 1:
        S, U = np.meshgrid(s, u, indexing="ij")
        WSU = np.outer(ws, wu)
        vals = S ** (-alpha) / (1.0 + S + U) ** (n + 1)
        return 2.0 * float(np.sum(WSU * vals))
    r, wr = _graded_panels(1e-3, math.sqrt(cutoff))
    area = 2.0 * math.pi ** (n - 1) / math.factorial(n - 2)
    S, U, R = np.meshgrid(s, u, r, indexing="ij")
    Wgt = ws[:, None, None] * wu[None, :, None] * wr[None, None, :]
    vals = S ** (-alpha) * R ** (2 * n - 3) / (1.0 + S + U + R * R) ** (n + 1)
    return 2.0 * area * float(np.sum(Wgt * vals))


def _model_integral_reduced(n: int, alpha: float, cutoff: float) -> tuple[float, float]:
    c_alpha = float(beta_function(1.0 - alpha, n + alpha))
    u, wu = _graded_panels(1e-4, cutoff)
    if n == 1:
        rest = 2.0 * float(np.sum(wu / (1.0 + u) ** (n + alpha)))
    else:
        r, wr = _graded_panels(1e-3, math.sqrt(cutoff))
        area = 2.0 * math.pi ** (n - 1) / math.factorial(n - 2)
        U, R = np.meshgrid(u, r, indexing="ij")
        Wgt = np.outer(wu, wr)
        rest = 2.0 * area * float(
            np.sum(Wgt * R ** (2 * n - 3) / (1.0 + U + R * R) ** (n + alpha))
        )
    return c_alpha * rest, c_alpha


def rescaled_model_integral(n: int, alpha: float, cutoff: float = 256.0) -> RescaledIntegralResult:
    """Model boundary integral two ways: direct quadrature vs Beta-function reduction.

    The integrand s^-alpha (1 + s + |u| + |x'|^2)^-(n+1) over
    R+ x R x C^(n-1) is computed (i) by graded tensor quadrature with
    geometric cutoff extrapolation and (ii) by the closed-form s-integral
    (Beta(1-alpha, n+alpha)) followed by quadrature of the remaining
    factor.  Both values are returned with their relative difference.
    """
    if not (0.0 < alpha < 1.0):
        raise ValueError("alpha must lie strictly between 0 and 1")
    if n < 1:
        raise ValueError("n must be >= 1")
    # geometric cutoff extrapolation from three nested boxes
    vals = [_model_integral_direct(n, alpha, c) for c in (cutoff, 2 * cutoff, 4 * cutoff)]
    d10, d21 = vals[1] - vals[0], vals[2] - vals[1]
    direct = vals[2] + (d21 * d21 / (d10 - d21) if abs(d10 - d21) > 1e-300 else 0.0)
    reduced_vals = [_model_integral_reduced(n, alpha, c) for c in (cutoff, 2 * cutoff, 4 * cutoff)]
    r10 = reduced_vals[1][0] - reduced_vals[0][0]
    r21 = reduced_vals[2][0] - reduced_vals[1][0]
    reduced = reduced_vals[2][0] + (
        r21 * r21 / (r10 - r21) if abs(r10 - r21) > 1e-300 else 0.0
    )
    rel = abs(direct - reduced) / max(abs(reduced), 1e-300)
    return RescaledIntegralResult(
        direct=direct, reduced=reduced, rel_diff=rel, c_alpha=reduced_vals[-1][1]
    )
