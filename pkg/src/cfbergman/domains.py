"""Model domains: defining functions, analytic derivatives, and samplers.

Every domain is described by a real C2 defining function rho with
D = {rho < 0}.  Evaluators are batched: points are arrays of shape (m, n)
over the complex coordinates, and derivative evaluators return stacked
gradients/Hessians.  Derivatives are supplied in closed form per domain;
the kernel formulas consume second derivatives, and numerical
differentiation inside a singular integrand is too noisy.

Shipped domains:

* unit ball          rho(w) = |w|^2 - 1
* ellipsoid          rho(w) = sum |w_j|^2 / a_j^2 - 1
* C2 perturbed ball  rho(w) = |w|^2 - 1 + delta |Re w_1|^3

The perturbed ball is genuinely C2-but-not-C3: its Hessian entries carry
continuous |Re w_1| factors whose derivative jumps across Re w_1 = 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import PerturbationTooLarge
from .mollify import abs_mollified, abs_mollified_deriv

Array = np.ndarray


@dataclass(frozen=True, eq=False)
class DomainSpec:
    """A bounded strongly pseudoconvex domain given through its defining function.

    All evaluators accept a batch of points of shape (m, dim) and are pure,
    so they are safe to call concurrently.  ``hess_smooth_family(W, s)``
    returns the smoothed holomorphic Hessian at spatial scale s together
    with its conjugate-derivative tensor (entries d tau_jk / d wbar_m);
    scale 0 is the exact Hessian with its almost-everywhere derivative.
    """

    dim: int
    name: str
    rho: Callable[[Array], Array]
    grad_rho: Callable[[Array], Array]
    d_rho: Callable[[Array], Array]
    hess_holo: Callable[[Array], Array]
    hess_mixed: Callable[[Array], Array]
    bounding_box: Array
    boundary_radius: Callable[[Array], Array]
    hess_smooth_family: Callable[[Array, float], tuple[Array, Array]]
    params: dict = field(default_factory=dict)

    @property
    def diameter(self) -> float:
        spans = self.bounding_box[:, 1] - self.bounding_box[:, 0]
        return float(np.sqrt(np.sum(spans**2)))


@dataclass(frozen=True)
class LeviForm:
    """Value of the complex Hessian (d^2 rho / dw dwbar) at one point."""

    matrix: Array
    point: Array

    def apply(self, v: Array) -> float:
        """Quadratic form v* M v; real for a Hermitian matrix."""
        return float(np.real(np.vdot(v, self.matrix @ v)))


def levi_form_at(domain: DomainSpec, w: Array) -> LeviForm:
    w = np.asarray(w, dtype=complex)
    return LeviForm(matrix=domain.hess_mixed(w[None, :])[0], point=w)


def as_batch(points: Array, dim: int) -> tuple[Array, bool]:
    """Coerce a single point or a batch to shape (m, dim)."""
    arr = np.asarray(points, dtype=complex)
    if arr.ndim == 1:
        if arr.shape != (dim,):
            raise ValueError(f"expected a point in C^{dim}, got shape {arr.shape}")
        return arr[None, :], True
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"expected points of shape (m, {dim}), got {arr.shape}")
    return arr, False


def _grad_from_d_rho(d_rho_vals: Array) -> Array:
    """Real gradient (x1, y1, ..., xn, yn) from the (1,0)-derivative of real rho."""
    m, n = d_rho_vals.shape
    grad = np.empty((m, 2 * n), dtype=float)
    grad[:, 0::2] = 2.0 * np.real(d_rho_vals)
    grad[:, 1::2] = -2.0 * np.imag(d_rho_vals)
    return grad


def make_ball(dim: int) -> DomainSpec:
    """Unit ball in C^dim: rho(w) = |w|^2 - 1, Levi matrix identically I."""
    if dim < 1:
        raise ValueError("dim must be >= 1")

    def rho(W):
        return np.sum(np.abs(W) ** 2, axis=-1) - 1.0

    def d_rho(W):
        return np.conj(W)

    def grad_rho(W):
        return _grad_from_d_rho(d_rho(W))

    def hess_holo(W):
        m = W.shape[0]
        return np.zeros((m, dim, dim), dtype=complex)

    def hess_mixed(W):
        m = W.shape[0]
        return np.broadcast_to(np.eye(dim, dtype=complex), (m, dim, dim)).copy()

    def boundary_radius(directions):
        return np.ones(directions.shape[0], dtype=float)

    def hess_smooth_family(W, scale):
        m = W.shape[0]
        return (
            np.zeros((m, dim, dim), dtype=complex),
            np.zeros((m, dim, dim, dim), dtype=complex),
        )

    box = np.array([[-1.0, 1.0]] * (2 * dim))
    return DomainSpec(
        dim=dim,
        name=f"ball{dim}",
        rho=rho,
        grad_rho=grad_rho,
        d_rho=d_rho,
        hess_holo=hess_holo,
        hess_mixed=hess_mixed,
        bounding_box=box,
        boundary_radius=boundary_radius,
        hess_smooth_family=hess_smooth_family,
        params={"kind": "ball", "dim": dim},
    )


def make_ellipsoid(semi_axes) -> DomainSpec:
    """Ellipsoid rho(w) = sum |w_j|^2 / a_j^2 - 1 with Levi matrix diag(1/a_j^2)."""
    axes = np.asarray(semi_axes, dtype=float)
    if axes.ndim != 1 or axes.size < 1:
        raise ValueError("semi_axes must be a 1-d sequence")
    if np.any(axes <= 0.0):
        raise ValueError("semi_axes must all be positive")
    dim = axes.size
    inv2 = 1.0 / axes**2

    def rho(W):
        return np.sum(np.abs(W) ** 2 * inv2, axis=-1) - 1.0

    def d_rho(W):
        return np.conj(W) * inv2

    def grad_rho(W):
        return _grad_from_d_rho(d_rho(W))

    def hess_holo(W):
        m = W.shape[0]
        return np.zeros((m, dim, dim), dtype=complex)

    def hess_mixed(W):
        m = W.shape[0]
        return np.broadcast_to(np.diag(inv2).astype(complex), (m, dim, dim)).copy()

    def boundary_radius(directions):
        return 1.0 / np.sqrt(np.sum(np.abs(directions) ** 2 * inv2, axis=-1))

    def hess_smooth_family(W, scale):
        m = W.shape[0]
        return (
            np.zeros((m, dim, dim), dtype=complex),
            np.zeros((m, dim, dim, dim), dtype=complex),
        )

    box = np.repeat(np.column_stack([-axes, axes]), 2, axis=0)
    return DomainSpec(
        dim=dim,
        name="ellipsoid" + "x".join(f"{a:g}" for a in axes),
        rho=rho,
        grad_rho=grad_rho,
        d_rho=d_rho,
        hess_holo=hess_holo,
        hess_mixed=hess_mixed,
        bounding_box=box,
        boundary_radius=boundary_radius,
        hess_smooth_family=hess_smooth_family,
        params={"kind": "ellipsoid", "axes": axes.tolist()},
    )


def make_c2_perturbed_ball(dim: int, delta: float) -> DomainSpec:
    """Ball perturbed by delta |Re w_1|^3: C2 but not C3 across Re w_1 = 0.

    The admissibility gate is sign-symmetric in delta: it requires the
    worst-case Levi matrix I - (3|delta|/2) |t| E_11 to stay positive
    definite over the calibration grid, so +delta and -delta experiments
    are interchangeable.  Raises PerturbationTooLarge otherwise.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    delta = float(delta)

    # worst |Re w_1| over the closed domain is at most 1 for admissible delta
    t_grid = np.linspace(0.0, 1.0, 201)
    worst = 1.0 - 1.5 * abs(delta) * t_grid
    if np.min(worst) <= 1e-6:
        raise PerturbationTooLarge(
            f"delta={delta} fails the strict plurisubharmonicity gate: "
            f"worst-case Levi eigenvalue {np.min(worst):.3g}"
        )

    def _t(W):
        return np.real(W[..., 0])

    def rho(W):
        return np.sum(np.abs(W) ** 2, axis=-1) - 1.0 + delta * np.abs(_t(W)) ** 3

    def d_rho(W):
        out = np.conj(W).copy()
        t = _t(W)
        out[..., 0] += 1.5 * delta * t * np.abs(t)
        return out

    def grad_rho(W):
        return _grad_from_d_rho(d_rho(W))

    def hess_holo(W):
        m = W.shape[0]
        H = np.zeros((m, dim, dim), dtype=complex)
        H[:, 0, 0] = 1.5 * delta * np.abs(_t(W))
        return H

    def hess_mixed(W):
        m = W.shape[0]
        H = np.broadcast_to(np.eye(dim, dtype=complex), (m, dim, dim)).copy()
        H[:, 0, 0] += 1.5 * delta * np.abs(_t(W))
        return H

    def boundary_radius(directions):
        # solve r^2 - 1 + delta r^3 |Re xi_1|^3 = 0 along each unit direction
        a = delta * np.abs(np.real(directions[:, 0])) ** 3
        r = np.ones(directions.shape[0], dtype=float)
        for _ in range(60):
            f = r * r - 1.0 + a * r**3
            df = 2.0 * r + 3.0 * a * r * r
            step = f / df
            r = r - step
            if np.max(np.abs(step)) < 1e-15:
                break
        return r

    def hess_smooth_family(W, scale):
        m = W.shape[0]
        t = _t(W)
        Q = np.zeros((m, dim, dim), dtype=complex)
        Q[:, 0, 0] = 1.5 * delta * abs_mollified(t, scale)
        T = np.zeros((m, dim, dim, dim), dtype=complex)
        # d/d wbar_1 of q(Re w_1) is q'(t)/2
        T[:, 0, 0, 0] = 0.75 * delta * abs_mollified_deriv(t, scale)
        return Q, T

    r_max = 1.0 if delta >= 0.0 else float(np.max(
        boundary_radius(np.eye(dim, dtype=complex))
    )) + 0.1
    box = np.array([[-r_max, r_max]] * (2 * dim))
    return DomainSpec(
        dim=dim,
        name=f"perturbed_ball{dim}_d{delta:g}",
        rho=rho,
        grad_rho=grad_rho,
        d_rho=d_rho,
        hess_holo=hess_holo,
        hess_mixed=hess_mixed,
        bounding_box=box,
        boundary_radius=boundary_radius,
        hess_smooth_family=hess_smooth_family,
        params={"kind": "perturbed_ball", "dim": dim, "delta": delta},
    )


def domain_from_config(cfg: dict) -> DomainSpec:
    """Build a domain from {"kind": ..., "dim": ..., "axes": ..., "delta": ...}."""
    kind = cfg.get("kind")
    if kind == "ball":
        return make_ball(int(cfg.get("dim", 1)))
    if kind == "ellipsoid":
        return make_ellipsoid(cfg.get("axes", [1.0, 2.0]))
    if kind == "perturbed_ball":
        return make_c2_perturbed_ball(int(cfg.get("dim", 1)), float(cfg.get("delta", 0.1)))
    raise ValueError(f"unknown domain kind {kind!r}")


def uniform_directions(rng: np.random.Generator, count: int, dim: int) -> Array:
    """Uniformly distributed complex unit vectors (real-2n sphere measure)."""
    raw = rng.standard_normal((count, dim)) + 1j * rng.standard_normal((count, dim))
    return raw / np.linalg.norm(raw, axis=1, keepdims=True)


def sample_closure(
    domain: DomainSpec,
    count: int,
    seed: int,
    boundary_fraction: float = 0.0,
) -> Array:
    """Seeded samples of the closed domain, uniform in volume off the boundary part.

    A ``boundary_fraction`` share of the points is placed exactly on the
    boundary (radial coordinate 1 in the star-shaped parametrization).
    """
    rng = np.random.default_rng(seed)
    xi = uniform_directions(rng, count, domain.dim)
    s = rng.random(count) ** (1.0 / (2 * domain.dim))
    n_bd = int(round(boundary_fraction * count))
    if n_bd > 0:
        s[:n_bd] = 1.0
    return (s * domain.boundary_radius(xi))[:, None] * xi


def sample_pairs(
    domain: DomainSpec,
    count: int,
    seed: int,
    boundary_fraction: float = 0.25,
    near_fraction: float = 0.4,
    near_scale: float = 0.3,
) -> tuple[Array, Array]:
    """Seeded sample pairs (W, Z) in the closed product domain.

    A ``near_fraction`` share of the Z points is drawn close to W at
    log-uniform distances up to ``near_scale`` (then clipped back into the
    closure), since the support-function bounds are most binding near the
    diagonal and near the boundary.
    """
    rng = np.random.default_rng(seed)
    W = sample_closure(domain, count, seed=int(rng.integers(2**31)),
                       boundary_fraction=boundary_fraction)
    Z = sample_closure(domain, count, seed=int(rng.integers(2**31)),
                       boundary_fraction=boundary_fraction)
    n_near = int(round(near_fraction * count))
    if n_near > 0:
        dirs = uniform_directions(rng, n_near, domain.dim)
        dist = near_scale * 10.0 ** (-3.0 * rng.random(n_near))
        cand = W[:n_near] + dist[:, None] * dirs
        # radially clip back into the closure
        norms = np.linalg.norm(cand, axis=1)
        unit = cand / np.where(norms[:, None] == 0.0, 1.0, norms[:, None])
        rb = domain.boundary_radius(unit)
        scale = np.minimum(1.0, rb / np.where(norms == 0.0, 1.0, norms))
        Z[:n_near] = cand * scale[:, None]
    # a small stratum of pairs reflected across Re w_1 = 0: these straddle
    # the kink set of the C2-only domains, where the bounds are tightest
    n_ref = count // 10
    if n_ref > 0:
        lo = count - n_ref
        Z[lo:] = W[lo:].copy()
        Z[lo:, 0] = -np.conj(Z[lo:, 0])
    return W, Z
