"""Calibration of the cutoff radius, lower-bound constant, and smoothing range.

The cutoff radius mu and constant c are found by a randomized grid scan
with a declared seed, not by analytic minimization: for each candidate mu
(descending geometric grid) the support function built with that cutoff is
tested on seeded sample pairs against

    2 Re g >= -rho(w) - rho(z) + c |w - z|^2   (|w - z| <= mu)
    2 Re g >= c                                 (|w - z| >= mu)

and the largest mu with a strictly positive c wins.  lambda0 = c mu^2 / 8
is the inner-shift constant used by the density experiment, and c_levi the
smallest sampled Levi eigenvalue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domains import DomainSpec, sample_closure, sample_pairs
from .errors import CalibrationFailed
from .levi import KernelContext, core_values, resolve_tau_scale

Array = np.ndarray


@dataclass(frozen=True)
class CalibrationResult:
    mu: float
    c: float
    lambda0: float
    c_levi: float
    samples: int
    seed: int


def calibrate_constants(
    domain: DomainSpec,
    samples: int = 4000,
    seed: int = 0,
    mu_grid: int = 24,
    c_floor: float = 1e-6,
) -> CalibrationResult:
    """Largest cutoff radius for which the two-branch lower bound holds.

    Raises CalibrationFailed when no radius in the grid works, which
    signals non-pseudoconvex input.
    """
    if samples < 1000:
        raise ValueError("samples must be >= 1000 for a meaningful scan")
    W, Z = sample_pairs(domain, samples, seed=seed)
    d2 = np.sum(np.abs(W - Z) ** 2, axis=-1)
    dist = np.sqrt(d2)
    rho_sum = domain.rho(W) + domain.rho(Z)

    pts = sample_closure(domain, max(samples // 2, 1000), seed=seed + 1,
                         boundary_fraction=0.3)
    eigs = np.linalg.eigvalsh(domain.hess_mixed(pts))
    c_levi = float(np.min(eigs))

    diam = domain.diameter
    mus = 2.5 * diam * (0.75 ** np.arange(mu_grid))
    for mu in mus:
        ctx = KernelContext(domain=domain, epsilon=0.0, mu=float(mu), c_bound=1.0)
        g = core_values(ctx, W, Z, exact_tau=True).g
        lower = 2.0 * np.real(g)
        near = dist <= mu
        far = ~near
        ok = d2 > 1e-18  # exclude coincident pairs: the ratio is 0/0 there
        c_near = np.inf
        if np.any(near & ok):
            c_near = float(np.min((lower[near & ok] + rho_sum[near & ok]) / d2[near & ok]))
        c_far = float(np.min(lower[far])) if np.any(far) else np.inf
        c = min(c_near, c_far)
        if np.isfinite(c) and c > c_floor:
            return CalibrationResult(
                mu=float(mu),
                c=float(c),
                lambda0=float(c * mu**2 / 8.0),
                c_levi=c_levi,
                samples=samples,
                seed=seed,
            )
    raise CalibrationFailed(
        f"no cutoff radius in the scan grid satisfies the lower bounds on {domain.name}"
    )


def admissible_epsilon_range(
    domain: DomainSpec,
    eps_grid,
    samples: int = 4000,
    seed: int = 0,
    slack: float = 0.5,
) -> list[dict]:
    """Empirical admissibility of each smoothing level.

    An epsilon is admissible when the smoothed support function still
    satisfies the lower bounds with the calibrated c reduced by at most
    ``slack``.  Returned entries: {epsilon, c_eps, admissible}.
    """
    cal = calibrate_constants(domain, samples=samples, seed=seed)
    W, Z = sample_pairs(domain, samples, seed=seed + 7)
    d2 = np.sum(np.abs(W - Z) ** 2, axis=-1)
    dist = np.sqrt(d2)
    rho_sum = domain.rho(W) + domain.rho(Z)
    out = []
    for eps in eps_grid:
        scale = resolve_tau_scale(domain, float(eps), seed=seed)
        ctx = KernelContext(
            domain=domain, epsilon=float(eps), mu=cal.mu, c_bound=cal.c,
            tau_policy="mollified", tau_scale=scale,
        )
        g = core_values(ctx, W, Z).g
        lower = 2.0 * np.real(g)
        near = dist <= cal.mu
        ok = d2 > 1e-18
        c_near = np.inf
        if np.any(near & ok):
            c_near = float(np.min((lower[near & ok] + rho_sum[near & ok]) / d2[near & ok]))
        c_far = float(np.min(lower[~near])) if np.any(~near) else np.inf
        c_eps = min(c_near, c_far)
        out.append({
            "epsilon": float(eps),
            "c_eps": c_eps,
            "admissible": bool(np.isfinite(c_eps) and c_eps >= (1.0 - slack) * cal.c),
        })
    return out


def make_context(
    domain: DomainSpec,
    epsilon: float = 0.0,
    tau_policy: str = "exact",
    mu_override: float | None = None,
    global_holomorphic_mode: bool = False,
    calibration: CalibrationResult | None = None,
    seed: int = 0,
) -> KernelContext:
    """Build a KernelContext, running calibration unless one is supplied.

    Global holomorphic mode (chi identically 1) is only allowed when the
    calibrated cutoff radius covers the whole domain.
    """
    if tau_policy not in ("exact", "mollified"):
        raise ValueError(f"unknown tau policy {tau_policy!r}")
    if calibration is None:
        calibration = calibrate_constants(domain, seed=seed)
    mu = float(mu_override) if mu_override is not None else calibration.mu
    if mu <= 0.0:
        raise ValueError("mu must be positive")
    if global_holomorphic_mode and calibration.mu < domain.diameter:
        raise ValueError(
            f"global holomorphic mode needs calibrated mu >= diameter "
            f"({calibration.mu:.3g} < {domain.diameter:.3g})"
        )
    scale = (
        resolve_tau_scale(domain, epsilon, seed=seed)
        if (tau_policy == "mollified" and epsilon > 0.0)
        else 0.0
    )
    return KernelContext(
        domain=domain,
        epsilon=float(epsilon),
        mu=mu,
        c_bound=calibration.c,
        tau_policy=tau_policy,
        tau_scale=scale,
        global_holomorphic_mode=global_holomorphic_mode,
    )
