"""Hamiltonians H = |p|^2/2 + h on the cotangent phase space of a torus.

The nonlinearity h(t, q, p) may depend on the base point t of the 2-torus.
A cut-off radius rho suppresses h where |p|^2 >= rho through a C^1
smoothstep chi, giving the modified Hamiltonian used by the gradient flow;
below |p|^2 <= rho - 1 nothing changes.  The module supplies gradients and
residuals of the first-order system "dirac Z = grad H(Z)", the action
functional whose L2 gradient that residual is, the oscillation (Hofer)
norm of the nonlinearity, the scalar first-order system with two momenta
and its explicit kernel family, and the Legendre bridge to the Lagrangian
picture.

Conventions: a phase-space field Z has layout (q1, q2, p1, p2) with
n_pairs entries per slot; callables are vectorized with signature
f(t1, t2, z) where t1, t2 broadcast against z[..., :].
"""

from __future__ import annotations

from dataclasses import InitVar, dataclass

import numpy as np

from .spectral import (
    TorusField,
    derivative,
    dirac,
    grid_points,
    l2_norm,
)

DEFAULT_GRAD_CHECK_TOL = 1e-6


class HamiltonianError(ValueError):
    pass


class LegendreError(RuntimeError):
    def __init__(self, message, iterate=None):
        super().__init__(message)
        self.iterate = iterate


# ---------------------------------------------------------------------------
# cut-off profile


def chi_cutoff(x, rho: float):
    """C^1 smoothstep: 1 for x <= rho - 1, 0 for x >= rho, cubic in between."""
    x = np.asarray(x, dtype=float)
    if np.isinf(rho):
        return np.ones_like(x)
    u = np.clip(x - (rho - 1.0), 0.0, 1.0)
    return 1.0 - u * u * (3.0 - 2.0 * u)


def chi_cutoff_prime(x, rho: float):
    x = np.asarray(x, dtype=float)
    if np.isinf(rho):
        return np.zeros_like(x)
    u = x - (rho - 1.0)
    inside = (u > 0.0) & (u < 1.0)
    out = np.zeros_like(x)
    uu = u[inside]
    out[inside] = -6.0 * uu * (1.0 - uu)
    return out


# ---------------------------------------------------------------------------
# built-in nonlinearities (classes so that worker processes can pickle them)


class ZeroNonlinearity:
    """h identically zero."""

    def __init__(self, n_pairs: int):
        self.n_pairs = n_pairs
        self.sup_h = 0.0
        self.sup_grad_p = 0.0
        self.c3_norm = 0.0
        self.time_dependent = False

    def value(self, t1, t2, z):
        z = np.asarray(z, dtype=float)
        shape = np.broadcast_shapes(np.shape(t1), np.shape(t2), z.shape[:-1])
        return np.zeros(shape)

    def grad(self, t1, t2, z):
        z = np.asarray(z, dtype=float)
        shape = np.broadcast_shapes(np.shape(t1), np.shape(t2), z.shape[:-1])
        return np.zeros(shape + (z.shape[-1],))

    def hess(self, t1, t2, z):
        z = np.asarray(z, dtype=float)
        shape = np.broadcast_shapes(np.shape(t1), np.shape(t2), z.shape[:-1])
        return np.zeros(shape + (z.shape[-1], z.shape[-1]))


class TrigPotential:
    """h(q) = epsilon * sum_a cos(a . q) over integer frequency vectors a."""

    def __init__(self, epsilon: float, modes):
        modes = np.atleast_2d(np.asarray(modes, dtype=float))
        if modes.shape[1] % 2 != 0:
            raise HamiltonianError("trig modes must have 2n components")
        self.epsilon = float(epsilon)
        self.modes = modes
        self.n_pairs = modes.shape[1] // 2
        norms = np.linalg.norm(modes, axis=1)
        self.sup_h = abs(self.epsilon) * modes.shape[0]
        self.sup_grad_p = 0.0
        self.c3_norm = abs(self.epsilon) * float(np.sum(np.maximum(1.0, norms) ** 3))
        self.time_dependent = False

    def _phases(self, z):
        q = np.asarray(z, dtype=float)[..., : 2 * self.n_pairs]
        return q @ self.modes.T

    def value(self, t1, t2, z):
        return self.epsilon * np.sum(np.cos(self._phases(z)), axis=-1)

    def grad(self, t1, t2, z):
        z = np.asarray(z, dtype=float)
        out = np.zeros_like(z)
        out[..., : 2 * self.n_pairs] = -self.epsilon * (np.sin(self._phases(z)) @ self.modes)
        return out

    def hess(self, t1, t2, z):
        z = np.asarray(z, dtype=float)
        dim = z.shape[-1]
        out = np.zeros(z.shape[:-1] + (dim, dim))
        cosines = np.cos(self._phases(z))
        block = -self.epsilon * np.einsum("...m,ma,mb->...ab", cosines, self.modes, self.modes)
        out[..., : 2 * self.n_pairs, : 2 * self.n_pairs] = block
        return out

    def critical_points(self):
        """Constant critical points for the separable single-frequency case.

        Valid when the modes are the 2n coordinate directions: the gradient
        vanishes exactly on the lattice {0, pi}^(2n).
        """
        eye = np.eye(2 * self.n_pairs)
        if self.modes.shape != eye.shape or not np.array_equal(np.abs(self.modes), eye):
            raise HamiltonianError("closed-form critical points need coordinate modes")
        pts = []
        for bits in range(2 ** (2 * self.n_pairs)):
            pt = np.array(
                [np.pi if (bits >> i) & 1 else 0.0 for i in range(2 * self.n_pairs)]
            )
            pts.append(pt)
        return np.array(pts)


class TimeTrigPotential:
    """h(t, q) = epsilon * cos(w . t) * cos(a . q); oscillates in torus time."""

    def __init__(self, epsilon: float, t_mode, q_mode):
        self.epsilon = float(epsilon)
        self.t_mode = np.asarray(t_mode, dtype=float)
        self.q_mode = np.asarray(q_mode, dtype=float)
        if self.t_mode.shape != (2,):
            raise HamiltonianError("t_mode must have 2 components")
        if self.q_mode.shape[0] % 2 != 0:
            raise HamiltonianError("q_mode must have 2n components")
        self.n_pairs = self.q_mode.shape[0] // 2
        self.sup_h = abs(self.epsilon)
        self.sup_grad_p = 0.0
        qn = float(np.linalg.norm(self.q_mode))
        self.c3_norm = abs(self.epsilon) * max(1.0, qn) ** 3
        self.time_dependent = True

    def _tfactor(self, t1, t2):
        return np.cos(self.t_mode[0] * np.asarray(t1) + self.t_mode[1] * np.asarray(t2))

    def value(self, t1, t2, z):
        q = np.asarray(z, dtype=float)[..., : 2 * self.n_pairs]
        return self.epsilon * self._tfactor(t1, t2) * np.cos(q @ self.q_mode)

    def grad(self, t1, t2, z):
        z = np.asarray(z, dtype=float)
        q = z[..., : 2 * self.n_pairs]
        out = np.zeros(np.broadcast_shapes(np.shape(t1), np.shape(t2), z.shape[:-1]) + (z.shape[-1],))
        factor = -self.epsilon * self._tfactor(t1, t2) * np.sin(q @ self.q_mode)
        out[..., : 2 * self.n_pairs] = factor[..., None] * self.q_mode
        return out


NONLINEARITY_KINDS = ("zero", "trig_potential", "time_trig")


def nonlinearity_from_config(cfg: dict):
    """Build a registry nonlinearity from {'kind': ..., ...}."""
    kind = cfg.get("kind")
    if kind == "zero":
        return ZeroNonlinearity(int(cfg.get("n_pairs", 1)))
    if kind == "trig_potential":
        return TrigPotential(cfg["epsilon"], cfg["modes"])
    if kind == "time_trig":
        return TimeTrigPotential(cfg["epsilon"], cfg["t_mode"], cfg["q_mode"])
    raise HamiltonianError(f"unknown nonlinearity kind {kind!r}; have {NONLINEARITY_KINDS}")


# ---------------------------------------------------------------------------
# Hamiltonian specification


@dataclass(frozen=True)
class HamiltonianSpec:
    """H(t, q, p) = |p|^2/2 + h(t, q, p) with cut-off radius rho.

    h and grad_h are vectorized callables (t1, t2, z) -> values / vectors;
    hess_h is optional and only used by diagnostics.  sup_h / sup_grad_p /
    c3_norm are optional global bounds on h used for a-priori constants.
    """

    n_pairs: int
    h: object
    grad_h: object
    hess_h: object = None
    rho: float = np.inf
    time_dependent: bool = False
    name: str = "custom"
    sup_h: float | None = None
    sup_grad_p: float | None = None
    c3_norm: float | None = None
    check_gradient: InitVar[bool] = True

    def __post_init__(self, check_gradient):
        if self.n_pairs < 1:
            raise HamiltonianError("n_pairs must be positive")
        if not self.rho > 0:
            raise HamiltonianError("cut-off radius must be positive")
        if check_gradient:
            self._validate_gradient()

    @property
    def dim(self) -> int:
        return 4 * self.n_pairs

    def _validate_gradient(self, tol: float = DEFAULT_GRAD_CHECK_TOL, step: float = 1e-5):
        rng = np.random.default_rng(1234)
        for _ in range(5):
            t1, t2 = rng.uniform(0, 2 * np.pi, size=2)
            z = rng.uniform(-1.0, 1.0, size=self.dim)
            grad = np.asarray(self.grad_h(t1, t2, z), dtype=float)
            fd = np.zeros(self.dim)
            for c in range(self.dim):
                zp, zm = z.copy(), z.copy()
                zp[c] += step
                zm[c] -= step
                fd[c] = (float(self.h(t1, t2, zp)) - float(self.h(t1, t2, zm))) / (2 * step)
            err = np.max(np.abs(grad - fd)) / max(1.0, float(np.max(np.abs(grad))))
            if err > tol:
                raise HamiltonianError(
                    f"gradient of h disagrees with finite differences (residual {err:.3e})"
                )


def hamiltonian_from_config(cfg: dict, rho: float = np.inf) -> HamiltonianSpec:
    pot = nonlinearity_from_config(cfg)
    return HamiltonianSpec(
        n_pairs=pot.n_pairs,
        h=pot.value,
        grad_h=pot.grad,
        hess_h=getattr(pot, "hess", None),
        rho=rho,
        time_dependent=pot.time_dependent,
        name=cfg.get("kind", "custom"),
        sup_h=pot.sup_h,
        sup_grad_p=pot.sup_grad_p,
        c3_norm=pot.c3_norm,
    )


# pointwise cut-off evaluations ------------------------------------------------


def _p_norm_sq(spec: HamiltonianSpec, z: np.ndarray) -> np.ndarray:
    return np.sum(z[..., 2 * spec.n_pairs :] ** 2, axis=-1)


def h_tilde(spec: HamiltonianSpec, t1, t2, z) -> np.ndarray:
    """Cut-off nonlinearity chi(|p|^2) h; vanishes identically for |p|^2 >= rho."""
    z = np.asarray(z, dtype=float)
    return chi_cutoff(_p_norm_sq(spec, z), spec.rho) * np.asarray(spec.h(t1, t2, z), dtype=float)


def grad_h_tilde(spec: HamiltonianSpec, t1, t2, z) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    psq = _p_norm_sq(spec, z)
    chi = chi_cutoff(psq, spec.rho)
    grad = chi[..., None] * np.asarray(spec.grad_h(t1, t2, z), dtype=float)
    if np.isfinite(spec.rho):
        hval = np.asarray(spec.h(t1, t2, z), dtype=float)
        dchi = chi_cutoff_prime(psq, spec.rho)
        grad[..., 2 * spec.n_pairs :] += (2.0 * dchi * hval)[..., None] * z[..., 2 * spec.n_pairs :]
    return grad


def hamiltonian_value(spec: HamiltonianSpec, t1, t2, z, h_weight: float = 1.0) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    return 0.5 * _p_norm_sq(spec, z) + h_weight * h_tilde(spec, t1, t2, z)


# field-level operations -------------------------------------------------------


def _check_z_field(spec: HamiltonianSpec, Z: TorusField):
    if Z.layout != "z" or Z.components != spec.dim:
        raise HamiltonianError(
            f"expected layout 'z' with {spec.dim} components, got {Z.layout!r}/{Z.components}"
        )


def grad_H(spec: HamiltonianSpec, Z: TorusField, h_weight: float = 1.0) -> TorusField:
    """Gradient field (dH/dq, dH/dp) = (w*dh/dq, p + w*dh/dp), cut-off applied."""
    _check_z_field(spec, Z)
    t1, t2 = grid_points(Z.grid_size)
    grad = grad_h_tilde(spec, t1, t2, Z.values)
    if h_weight != 1.0:
        grad = h_weight * grad
    grad[:, :, 2 * spec.n_pairs :] += Z.p_part()
    return TorusField(grad, "z")


def hamiltonian_residual(
    spec: HamiltonianSpec, Z: TorusField, triple, h_weight: float = 1.0
) -> TorusField:
    """Residual dirac(Z) - grad H(Z); zero exactly on solutions of the system."""
    _check_z_field(spec, Z)
    out = dirac(Z, triple).values - grad_H(spec, Z, h_weight).values
    return TorusField(out, "z")


def residual_norm(spec: HamiltonianSpec, Z: TorusField, triple, h_weight: float = 1.0) -> float:
    return l2_norm(hamiltonian_residual(spec, Z, triple, h_weight))


def kinetic_density(Z: TorusField) -> np.ndarray:
    """Pointwise pairing <p, v> with v the holomorphic velocity of the q block."""
    qf = TorusField(Z.q_part(), "q")
    v = 2.0 * derivative(qf, "dt").values
    return np.sum(Z.p_part() * v, axis=-1)


def action(spec: HamiltonianSpec, Z: TorusField, h_weight: float = 1.0) -> float:
    """Action integral, unit-mass normalized: mean(<p, v> - H_tilde)."""
    _check_z_field(spec, Z)
    t1, t2 = grid_points(Z.grid_size)
    density = kinetic_density(Z) - hamiltonian_value(spec, t1, t2, Z.values, h_weight)
    return float(np.mean(density))


def action_bound_constants(spec: HamiltonianSpec) -> tuple:
    """(c0, c1) with action >= c0 |p|_L2^2 - c1 pointwise under the integral.

    From |p|^2/2 + <p, dh/dp> - h >= |p|^2/4 - (sup|dh/dp|^2 + sup|h|).
    Uses the declared bounds when available, otherwise a coarse sampling
    estimate over the cut-off support.
    """
    sup_h = spec.sup_h
    sup_gp = spec.sup_grad_p
    if sup_h is None or sup_gp is None:
        rng = np.random.default_rng(99)
        pmax = np.sqrt(spec.rho) if np.isfinite(spec.rho) else 4.0
        z = rng.uniform(-np.pi, np.pi, size=(4096, spec.dim))
        z[:, 2 * spec.n_pairs :] *= pmax / np.pi
        t1 = rng.uniform(0, 2 * np.pi, size=4096)
        t2 = rng.uniform(0, 2 * np.pi, size=4096)
        hv = np.abs(h_tilde(spec, t1, t2, z))
        gp = np.abs(grad_h_tilde(spec, t1, t2, z)[:, 2 * spec.n_pairs :])
        sup_h = float(np.max(hv)) if sup_h is None else sup_h
        sup_gp = float(np.max(gp)) if sup_gp is None else sup_gp
    return 0.25, sup_gp**2 + sup_h


@dataclass(frozen=True)
class HoferEstimate:
    value: float
    q_points_per_dim: int
    p_sample_count: int
    t_points: int
    time_dependent: bool

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "q_points_per_dim": self.q_points_per_dim,
            "p_sample_count": self.p_sample_count,
            "t_points": self.t_points,
            "time_dependent": self.time_dependent,
        }


def _p_samples(spec: HamiltonianSpec, shells: int) -> np.ndarray:
    dim_p = 2 * spec.n_pairs
    pmax = np.sqrt(spec.rho) if np.isfinite(spec.rho) else 4.0
    radii = np.linspace(0.0, pmax, shells)
    dirs = [np.zeros(dim_p)]
    for a in range(dim_p):
        e = np.zeros(dim_p)
        e[a] = 1.0
        dirs.append(e)
        dirs.append(-e)
    dirs.append(np.ones(dim_p) / np.sqrt(dim_p))
    samples = [r * d for r in radii for d in dirs]
    return np.unique(np.array(samples), axis=0)


def hofer_norm(
    spec: HamiltonianSpec,
    q_points_cap: int = 4096,
    p_shells: int = 5,
    t_points: int = 32,
) -> HoferEstimate:
    """Integrated oscillation of the cut-off nonlinearity over torus time.

    Estimates integral over t of (sup_Z h_tilde - inf_Z h_tilde) with the
    unit-mass time measure, sampling q on a lattice of the base torus and p
    on radial shells within the cut-off support.  A sampling estimate, not
    an exact value; the resolution is reported alongside.
    """
    dim_q = 2 * spec.n_pairs
    cap = min(q_points_cap, 1024) if spec.time_dependent else q_points_cap
    per_dim = int(round(cap ** (1.0 / dim_q)))
    per_dim = int(np.clip(per_dim, 4, 64))
    axes = [2 * np.pi * np.arange(per_dim) / per_dim] * dim_q
    qs = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, dim_q)
    ps = _p_samples(spec, p_shells)
    zs = np.concatenate(
        [
            np.repeat(qs, ps.shape[0], axis=0),
            np.tile(ps, (qs.shape[0], 1)),
        ],
        axis=1,
    )
    if not spec.time_dependent:
        vals = h_tilde(spec, 0.0, 0.0, zs)
        value = float(np.max(vals) - np.min(vals))
        return HoferEstimate(value, per_dim, ps.shape[0], 1, False)
    t1g, t2g = grid_points(t_points)
    t1f, t2f = t1g.ravel(), t2g.ravel()
    sup = np.full(t1f.shape, -np.inf)
    inf = np.full(t1f.shape, np.inf)
    chunk = max(1, 2**22 // max(1, t1f.size))
    for start in range(0, zs.shape[0], chunk):
        vals = h_tilde(spec, t1f[:, None], t2f[:, None], zs[None, start : start + chunk, :])
        sup = np.maximum(sup, vals.max(axis=1))
        inf = np.minimum(inf, vals.min(axis=1))
    return HoferEstimate(float(np.mean(sup - inf)), per_dim, ps.shape[0], t_points**2, True)


# ---------------------------------------------------------------------------
# scalar first-order system with two momenta (q, p1, p2)


def ddw_residual(grad3, Z3: TorusField) -> TorusField:
    """Residual of the three-equation first-order system for (q, p1, p2):

        -d1 p1 - d2 p2 = dH/dq,   d1 q = dH/dp1,   d2 q = dH/dp2.

    grad3 maps grid arrays (q, p1, p2) to (dH/dq, dH/dp1, dH/dp2);
    pass None for the zero Hamiltonian.
    """
    if Z3.layout != "ddw":
        raise HamiltonianError("expected a 3-component field with layout 'ddw'")
    d1 = derivative(Z3, "d1").values
    d2 = derivative(Z3, "d2").values
    if grad3 is None:
        gq = gp1 = gp2 = 0.0
    else:
        gq, gp1, gp2 = grad3(Z3.values[:, :, 0], Z3.values[:, :, 1], Z3.values[:, :, 2])
    out = np.empty_like(Z3.values)
    out[:, :, 0] = -d1[:, :, 1] - d2[:, :, 2] - gq
    out[:, :, 1] = d1[:, :, 0] - gp1
    out[:, :, 2] = d2[:, :, 0] - gp2
    return TorusField(out, "ddw")


def ddw_kernel_witness(psi: TorusField, q0: float = 0.0) -> TorusField:
    """Kernel family of the free system: constant q, p1 = d2 psi, p2 = -d1 psi."""
    if psi.layout != "scalar":
        raise HamiltonianError("psi must be a scalar field")
    d1 = derivative(psi, "d1").values[:, :, 0]
    d2 = derivative(psi, "d2").values[:, :, 0]
    out = np.empty((psi.grid_size, psi.grid_size, 3))
    out[:, :, 0] = q0
    out[:, :, 1] = d2
    out[:, :, 2] = -d1
    return TorusField(out, "ddw")


# ---------------------------------------------------------------------------
# Lagrangian side


@dataclass(frozen=True)
class LagrangianSpec:
    """Fiberwise convex Lagrangian L(t, q, v) on a 2n-dimensional base.

    v_grad is the fiber gradient dL/dv; q_grad is optional (finite
    differences otherwise); v_hess is optional and accelerates the inner
    Newton iteration of the Legendre transform.
    """

    n_pairs: int
    lagrangian: object
    v_grad: object
    q_grad: object = None
    v_hess: object = None
    name: str = "custom"
    check_convexity: InitVar[bool] = True

    def __post_init__(self, check_convexity):
        if self.n_pairs < 1:
            raise HamiltonianError("n_pairs must be positive")
        if check_convexity:
            self._spot_check_convexity()

    @property
    def base_dim(self) -> int:
        return 2 * self.n_pairs

    def _fd_v_hess(self, t1, t2, q, v, step: float = 1e-5) -> np.ndarray:
        dim = self.base_dim
        hess = np.zeros((dim, dim))
        for c in range(dim):
            vp, vm = v.copy(), v.copy()
            vp[c] += step
            vm[c] -= step
            hess[:, c] = (
                np.asarray(self.v_grad(t1, t2, q, vp), dtype=float)
                - np.asarray(self.v_grad(t1, t2, q, vm), dtype=float)
            ) / (2 * step)
        return 0.5 * (hess + hess.T)

    def fiber_hessian(self, t1, t2, q, v) -> np.ndarray:
        if self.v_hess is not None:
            return np.asarray(self.v_hess(t1, t2, q, v), dtype=float)
        return self._fd_v_hess(t1, t2, q, np.asarray(v, dtype=float))

    def _spot_check_convexity(self):
        rng = np.random.default_rng(4321)
        for _ in range(4):
            t1, t2 = rng.uniform(0, 2 * np.pi, size=2)
            q = rng.uniform(-np.pi, np.pi, size=self.base_dim)
            v = rng.uniform(-1.0, 1.0, size=self.base_dim)
            w = np.linalg.eigvalsh(self.fiber_hessian(t1, t2, q, v))
            if w[0] < -1e-8 * max(1.0, abs(w[-1])):
                raise HamiltonianError(
                    f"Lagrangian is not fiberwise convex (Hessian eigenvalue {w[0]:.3e})"
                )


@dataclass(frozen=True)
class LegendreResult:
    value: float
    v: np.ndarray
    iterations: int


def legendre_transform(
    L: LagrangianSpec, t1, t2, q, p, max_iter: int = 50, grad_tol: float = 1e-10
) -> LegendreResult:
    """H(t, q, p) = max_v (<p, v> - L(t, q, v)) by damped Newton from v = p."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    v = p.copy()

    def residual(vv):
        return p - np.asarray(L.v_grad(t1, t2, q, vv), dtype=float)

    g = residual(v)
    for it in range(max_iter):
        gn = float(np.max(np.abs(g)))
        if gn < grad_tol:
            value = float(np.dot(p, v) - float(L.lagrangian(t1, t2, q, v)))
            return LegendreResult(value, v, it)
        hess = L.fiber_hessian(t1, t2, q, v)
        try:
            step = np.linalg.solve(hess, g)
        except np.linalg.LinAlgError as exc:
            raise LegendreError("singular fiber Hessian", iterate=v) from exc
        alpha = 1.0
        for _ in range(30):
            g_new = residual(v + alpha * step)
            if np.max(np.abs(g_new)) < gn:
                break
            alpha *= 0.5
        else:
            raise LegendreError("line search failed", iterate=v)
        v = v + alpha * step
        g = g_new
    if float(np.max(np.abs(g))) < grad_tol:
        value = float(np.dot(p, v) - float(L.lagrangian(t1, t2, q, v)))
        return LegendreResult(value, v, max_iter)
    raise LegendreError(f"no convergence in {max_iter} iterations", iterate=v)


def euler_lagrange_residual(L: LagrangianSpec, q_field: TorusField) -> TorusField:
    """Residual of the variational equations with velocity v = 2 dt q:

        dL/dq1 - d1 (dL/dv1) + d2 (dL/dv2)
        dL/dq2 - d1 (dL/dv2) - d2 (dL/dv1)

    evaluated pointwise, fiber derivatives differentiated spectrally.
    """
    if q_field.layout != "q" or q_field.components != L.base_dim:
        raise HamiltonianError(
            f"expected layout 'q' with {L.base_dim} components, got "
            f"{q_field.layout!r}/{q_field.components}"
        )
    n = L.n_pairs
    t1, t2 = grid_points(q_field.grid_size)
    v = 2.0 * derivative(q_field, "dt").values
    q = q_field.values
    if L.q_grad is not None:
        lq = np.asarray(L.q_grad(t1, t2, q, v), dtype=float)
    else:
        step = 1e-6
        lq = np.zeros_like(q)
        for c in range(L.base_dim):
            qp, qm = q.copy(), q.copy()
            qp[:, :, c] += step
            qm[:, :, c] -= step
            lq[:, :, c] = (
                np.asarray(L.lagrangian(t1, t2, qp, v), dtype=float)
                - np.asarray(L.lagrangian(t1, t2, qm, v), dtype=float)
            ) / (2 * step)
    lv = TorusField(np.asarray(L.v_grad(t1, t2, q, v), dtype=float), "q")
    d1lv = derivative(lv, "d1").values
    d2lv = derivative(lv, "d2").values
    out = np.empty_like(q)
    out[:, :, :n] = lq[:, :, :n] - d1lv[:, :, :n] + d2lv[:, :, n:]
    out[:, :, n:] = lq[:, :, n:] - d1lv[:, :, n:] - d2lv[:, :, :n]
    return TorusField(out, "q")


class _QuadraticLagrangian:
    """L(t, q, v) = |v|^2/2 - h(t, q); Legendre partner of H = |p|^2/2 + h."""

    def __init__(self, potential):
        self.potential = potential
        self.n_pairs = potential.n_pairs

    def _embed(self, q):
        q = np.asarray(q, dtype=float)
        z = np.zeros(q.shape[:-1] + (2 * q.shape[-1],))
        z[..., : q.shape[-1]] = q
        return z

    def value(self, t1, t2, q, v):
        v = np.asarray(v, dtype=float)
        return 0.5 * np.sum(v * v, axis=-1) - self.potential.value(t1, t2, self._embed(q))

    def v_grad(self, t1, t2, q, v):
        return np.asarray(v, dtype=float)

    def q_grad(self, t1, t2, q, v):
        q = np.asarray(q, dtype=float)
        g = self.potential.grad(t1, t2, self._embed(q))
        return -g[..., : q.shape[-1]]

    def v_hess(self, t1, t2, q, v):
        dim = np.asarray(v).shape[-1]
        return np.eye(dim)


def quadratic_lagrangian(potential) -> LagrangianSpec:
    impl = _QuadraticLagrangian(potential)
    return LagrangianSpec(
        n_pairs=potential.n_pairs,
        lagrangian=impl.value,
        v_grad=impl.v_grad,
        q_grad=impl.q_grad,
        v_hess=impl.v_hess,
        name="quadratic",
    )
