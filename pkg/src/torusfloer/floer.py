"""Negative L2-gradient flow of the action functional.

The flow is d_s Z = -dirac(Z) + grad H(Z) with the cut-off Hamiltonian, so
stationary points are exactly the solutions of the first-order system.  A
switching profile beta_r(s) can multiply the nonlinearity, turning it on
over an s-interval of length (k+1)*r and off again; with the profile
absent the flow is autonomous and the action decreases monotonically.

Time stepping is IMEX Euler: the stiff linear part (the dirac operator
minus the p-block projector) is diagonal per Fourier mode and is treated
implicitly through precomputed 4n x 4n mode solves, while the bounded
nonlinear gradient is explicit.  The per-mode matrices Id + ds*L(m) are
invertible for every step size used here (ds < 1; a determinant guard
asserts it), and states solving the system are exact fixed points of the
step because the implicit solve uses the same discrete derivative
convention as the residual.

Initial-value flows find critical points; they are not two-point
boundary-value trajectories.  The action functional is strongly
indefinite, so generic data exits along growing directions - that outcome
is reported as divergence, not raised.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field, replace

import numpy as np

from .hamiltonians import (
    HamiltonianSpec,
    action,
    grad_h_tilde,
    h_tilde,
    hamiltonian_residual,
    hamiltonian_value,
)
from .spectral import (
    FieldError,
    TorusField,
    derivative,
    derivative_numbers,
    grid_points,
    l2_norm,
)
from .structures import StructureTriple, standard_structures

DEFAULT_DS = 1e-2
DEFAULT_TOL = 1e-8
DEFAULT_S_MAX = 1e3
MONOTONE_SLACK = 1e-12


class FlowError(RuntimeError):
    pass


# ---------------------------------------------------------------------------
# switching profile


def smoothstep(u):
    """0 for u <= 0, u^2 (3 - 2u) in between, 1 for u >= 1; C^1 at the knots."""
    u = np.asarray(u, dtype=float)
    v = np.clip(u, 0.0, 1.0)
    return v * v * (3.0 - 2.0 * v)


def smoothstep_prime(u):
    u = np.asarray(u, dtype=float)
    inside = (u > 0.0) & (u < 1.0)
    out = np.zeros_like(u)
    uu = u[inside]
    out[inside] = 6.0 * uu * (1.0 - uu)
    return out


@dataclass(frozen=True)
class BetaProfile:
    """Switching profile: 0 outside [-1, (k+1)r + 1], plateau min(r, 1) inside.

    The plateau equals 1 on [0, (k+1)r] once r >= 1; the height factor
    min(r, 1) makes the whole family collapse to zero uniformly (with all
    s-derivatives) as r -> 0+.  Ramp slopes stay within +/- 3/2.
    """

    r: float
    k: int

    def __post_init__(self):
        if self.r < 0:
            raise FlowError("profile parameter r must be >= 0")
        if self.k < 1:
            raise FlowError("profile factor k must be >= 1")

    @property
    def height(self) -> float:
        return min(self.r, 1.0)

    @property
    def s_on(self) -> float:
        return -1.0

    @property
    def s_off(self) -> float:
        return (self.k + 1) * self.r + 1.0

    def value(self, s):
        s = np.asarray(s, dtype=float)
        return self.height * smoothstep(s + 1.0) * smoothstep(self.s_off - s)

    def derivative(self, s):
        s = np.asarray(s, dtype=float)
        up = smoothstep(s + 1.0)
        down = smoothstep(self.s_off - s)
        return self.height * (smoothstep_prime(s + 1.0) * down - up * smoothstep_prime(self.s_off - s))

    def __call__(self, s):
        return self.value(s)


def _weight(profile: BetaProfile | None, s: float) -> float:
    return 1.0 if profile is None else float(profile.value(s))


# ---------------------------------------------------------------------------
# IMEX propagator


_PROP_CACHE: dict = {}


def _propagator(n_grid: int, ds: float, triple: StructureTriple) -> np.ndarray:
    """Inverse per-mode matrices (Id + ds * (i(m1 J + m2 K) - P))^(-1)."""
    if not 0.0 < ds < 1.0:
        raise FlowError(f"step size must lie in (0, 1), got {ds}")
    key = (n_grid, float(ds), triple.dim, triple.J.tobytes(), triple.K.tobytes())
    cached = _PROP_CACHE.get(key)
    if cached is not None:
        return cached
    dim = triple.dim
    m1, m2 = derivative_numbers(n_grid)
    proj = np.zeros((dim, dim))
    half = dim // 2
    proj[half:, half:] = np.eye(half)
    lin = (
        1j * m1[:, :, None, None] * triple.J
        + 1j * m2[:, :, None, None] * triple.K
        - proj
    )
    a = np.eye(dim) + ds * lin
    dets = np.linalg.det(a)
    if np.min(np.abs(dets)) < 1e-12:
        raise FlowError(f"singular implicit solve at ds={ds}")
    inv = np.linalg.inv(a)
    if len(_PROP_CACHE) > 64:
        _PROP_CACHE.clear()
    _PROP_CACHE[key] = inv
    return inv


def _imex_apply(zvals, zhat, spec, prop, ds, weight, t1, t2, mask=None):
    """One implicit-explicit Euler update in mode space; returns values and modes."""
    if weight != 0.0:
        nl = weight * grad_h_tilde(spec, t1, t2, zvals)
        nhat = np.fft.fft2(nl, axes=(0, 1), norm="forward")
        if mask is not None:
            nhat *= mask[:, :, None]
        rhs = zhat + ds * nhat
    else:
        rhs = zhat
    new_hat = np.einsum("xyab,xyb->xya", prop, rhs)
    new_vals = np.fft.ifft2(new_hat, axes=(0, 1), norm="forward").real
    return new_vals, new_hat


def band_mask(n_grid: int, band_limit: int | None) -> np.ndarray | None:
    """Boolean (N, N) mask keeping modes with max(|m1|, |m2|) <= band_limit."""
    if band_limit is None:
        return None
    m1, m2 = derivative_numbers(n_grid)
    return (np.abs(m1) <= band_limit) & (np.abs(m2) <= band_limit)


def _action_from_modes(spec, zvals, zhat, m1, m2, t1, t2, weight):
    """Action via Parseval for the kinetic pairing, grid values for H."""
    n = spec.n_pairs
    qa, qb = zhat[:, :, :n], zhat[:, :, n : 2 * n]
    pa, pb = zhat[:, :, 2 * n : 3 * n], zhat[:, :, 3 * n :]
    im1 = (1j * m1)[:, :, None]
    im2 = (1j * m2)[:, :, None]
    va = im1 * qa + im2 * qb
    vb = im1 * qb - im2 * qa
    pairing = float(np.sum((np.conj(pa) * va + np.conj(pb) * vb).real))
    ham = float(np.mean(hamiltonian_value(spec, t1, t2, zvals, weight)))
    return pairing - ham


def floer_rhs(state) -> TorusField:
    """Flow velocity -dirac(Z) + grad H(Z), nonlinearity weighted by the profile."""
    res = hamiltonian_residual(state.spec, state.Z, state.triple, _weight(state.profile, state.s))
    return TorusField(-res.values, "z")


@dataclass
class FlowState:
    """One point on a flow trajectory, plus integration bookkeeping."""

    Z: TorusField
    spec: HamiltonianSpec
    triple: StructureTriple
    s: float = 0.0
    ds: float = DEFAULT_DS
    profile: BetaProfile | None = None
    energy_total: float = 0.0
    diagnostics: deque = field(default_factory=lambda: deque(maxlen=100_000))


def imex_step(state: FlowState, ds: float | None = None) -> FlowState:
    """Advance one IMEX Euler step; returns a new state, input untouched.

    Appends (s, action, max|p|^2, cumulative energy) to the shared
    diagnostics ring.
    """
    ds = state.ds if ds is None else float(ds)
    n_grid = state.Z.grid_size
    prop = _propagator(n_grid, ds, state.triple)
    t1, t2 = grid_points(n_grid)
    m1, m2 = derivative_numbers(n_grid)
    zhat = np.fft.fft2(state.Z.values, axes=(0, 1), norm="forward")
    new_vals, new_hat = _imex_apply(
        state.Z.values, zhat, state.spec, prop, ds, _weight(state.profile, state.s), t1, t2
    )
    dz = new_vals - state.Z.values
    vsq = float(np.mean(np.sum(dz * dz, axis=2))) / ds**2
    new = replace(state)
    new.Z = TorusField(new_vals, "z")
    new.s = state.s + ds
    new.energy_total = state.energy_total + vsq * ds
    new.diagnostics = state.diagnostics
    act = _action_from_modes(
        state.spec, new_vals, new_hat, m1, m2, t1, t2, _weight(state.profile, new.s)
    )
    max_p_sq = float(np.max(np.sum(new.Z.p_part() ** 2, axis=2)))
    new.diagnostics.append((new.s, act, max_p_sq, new.energy_total))
    return new


# ---------------------------------------------------------------------------
# autonomous flow to a critical point


@dataclass
class FlowResult:
    Z: TorusField
    s_reached: float
    residual_norm: float
    converged: bool
    diverged: bool
    reason: str
    n_steps: int
    ds_final: float
    rows: list

    def to_dict(self) -> dict:
        return {
            "s_reached": self.s_reached,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "diverged": self.diverged,
            "reason": self.reason,
            "n_steps": self.n_steps,
            "ds_final": self.ds_final,
        }


DIAGNOSTIC_COLUMNS = ("s", "action", "residual", "max_p_sq", "energy_cum")


def flow_to_solution(
    Z0: TorusField,
    spec: HamiltonianSpec,
    triple: StructureTriple | None = None,
    tol: float = DEFAULT_TOL,
    s_max: float = DEFAULT_S_MAX,
    ds: float = DEFAULT_DS,
    ds_min: float = 1e-6,
    check_every: int = 10,
    divergence_p_sq: float | None = None,
    residual_blowup: float = 1e6,
    band_limit: int | None = None,
) -> FlowResult:
    """Run the autonomous flow until the system residual drops below tol.

    The step is halved whenever the action increases beyond round-off (the
    autonomous flow is a descent, so a genuine increase means the step is
    too long).  Divergence - the escape of |p|^2 past the threshold, a
    residual blow-up, or non-finite values - is reported in the result,
    not raised.

    The flow amplifies content at spatial mode m roughly like
    exp(|m| s), so transform round-off seeds the fastest grid modes and
    caps how small the residual of a non-constant state can get over long
    horizons (exactly constant states are immune: they stay constant to
    the last bit).  band_limit optionally confines the run to modes with
    max(|m1|, |m2|) <= band_limit, which pushes that floor out far enough
    to converge band-limited low-mode data.
    """
    triple = standard_structures(spec.n_pairs) if triple is None else triple
    if divergence_p_sq is None:
        divergence_p_sq = 2.0 * spec.rho if np.isfinite(spec.rho) else 1e6

    n_grid = Z0.grid_size
    t1, t2 = grid_points(n_grid)
    m1, m2 = derivative_numbers(n_grid)

    mask = band_mask(n_grid, band_limit)
    z = Z0
    s = 0.0
    rows = []
    energy_cum = 0.0
    zhat = np.fft.fft2(z.values, axes=(0, 1), norm="forward")
    if mask is not None:
        zhat *= mask[:, :, None]
        z = TorusField(np.fft.ifft2(zhat, axes=(0, 1), norm="forward").real, "z")
    # diagnostics rows carry the latest residual, refreshed every check_every steps
    residual = l2_norm(hamiltonian_residual(spec, z, triple))
    residual_scale = max(1.0, residual)
    act = _action_from_modes(spec, z.values, zhat, m1, m2, t1, t2, 1.0)
    max_p_sq = float(np.max(np.sum(z.p_part() ** 2, axis=2)))
    rows.append((s, act, residual, max_p_sq, energy_cum))
    if residual < tol:
        return FlowResult(z, 0.0, residual, True, False, "initial residual below tol", 0, ds, rows)

    n_steps = 0
    while s < s_max:
        prop = _propagator(n_grid, ds, triple)
        new_vals, new_hat = _imex_apply(z.values, zhat, spec, prop, ds, 1.0, t1, t2, mask)
        if not np.all(np.isfinite(new_vals)):
            return FlowResult(z, s, residual, False, True, "non-finite state", n_steps, ds, rows)
        new_act = _action_from_modes(spec, new_vals, new_hat, m1, m2, t1, t2, 1.0)
        slack = MONOTONE_SLACK * max(1.0, abs(act))
        if new_act > act + slack and ds > ds_min:
            ds *= 0.5
            continue
        dz = new_vals - z.values
        energy_cum += float(np.mean(np.sum(dz * dz, axis=2))) / ds
        z = TorusField(new_vals, "z")
        zhat = new_hat
        s += ds
        act = new_act
        n_steps += 1
        max_p_sq = float(np.max(np.sum(z.p_part() ** 2, axis=2)))
        if n_steps % check_every == 0 or max_p_sq > divergence_p_sq:
            residual = l2_norm(hamiltonian_residual(spec, z, triple))
        rows.append((s, act, residual, max_p_sq, energy_cum))
        if max_p_sq > divergence_p_sq:
            return FlowResult(
                z, s, residual, False, True, f"max|p|^2 {max_p_sq:.3g} escaped", n_steps, ds, rows
            )
        if residual > residual_blowup * residual_scale:
            return FlowResult(z, s, residual, False, True, "residual blow-up", n_steps, ds, rows)
        if residual < tol:
            return FlowResult(z, s, residual, True, False, "residual below tol", n_steps, ds, rows)
    residual = l2_norm(hamiltonian_residual(spec, z, triple))
    return FlowResult(z, s, residual, False, False, "s_max reached", n_steps, ds, rows)


# ---------------------------------------------------------------------------
# switching trajectories and energy bookkeeping


@dataclass
class FlowTrajectory:
    """Uniformly sampled flow run with the scalars needed for energy checks.

    Arrays are indexed by sample; vsq holds the squared L2 velocity of each
    step (length len(s) - 1).  action is evaluated with the instantaneous
    profile weight, h_int is the torus mean of the cut-off nonlinearity.
    """

    s: np.ndarray
    action: np.ndarray
    h_int: np.ndarray
    max_p_sq: np.ndarray
    vsq: np.ndarray
    ds: float
    profile: BetaProfile
    end_residuals: tuple
    ends_converged: tuple
    snapshots: list


def run_homotopy(
    Z0: TorusField,
    spec: HamiltonianSpec,
    r: float,
    triple: StructureTriple | None = None,
    ds: float = 5e-3,
    pad: float = 1.0,
    k: int | None = None,
    tol: float = DEFAULT_TOL,
    snapshot_every: int | None = None,
) -> FlowTrajectory:
    """Flow across the full switching window of beta_r, recording diagnostics.

    Integrates from s = -(1 + pad) to (k+1)r + 1 + pad so the profile is
    identically zero at both ends; end residuals are taken against the
    plain quadratic Hamiltonian there.
    """
    triple = standard_structures(spec.n_pairs) if triple is None else triple
    k = 2 * spec.n_pairs if k is None else k
    profile = BetaProfile(r=r, k=k)
    s_start = profile.s_on - pad
    s_end = profile.s_off + pad
    n_steps = int(np.ceil((s_end - s_start) / ds))

    n_grid = Z0.grid_size
    t1, t2 = grid_points(n_grid)
    m1, m2 = derivative_numbers(n_grid)

    svals = np.empty(n_steps + 1)
    act = np.empty(n_steps + 1)
    h_int = np.empty(n_steps + 1)
    max_p_sq = np.empty(n_steps + 1)
    vsq = np.empty(n_steps)
    snapshots = []

    z = Z0
    zhat = np.fft.fft2(z.values, axes=(0, 1), norm="forward")
    for i in range(n_steps + 1):
        s = s_start + i * ds
        w = float(profile.value(s))
        svals[i] = s
        act[i] = _action_from_modes(spec, z.values, zhat, m1, m2, t1, t2, w)
        h_int[i] = float(np.mean(h_tilde(spec, t1, t2, z.values)))
        max_p_sq[i] = float(np.max(np.sum(z.p_part() ** 2, axis=2)))
        if snapshot_every is not None and i % snapshot_every == 0:
            snapshots.append((s, z))
        if i == n_steps:
            break
        prop = _propagator(n_grid, ds, triple)
        new_vals, new_hat = _imex_apply(z.values, zhat, spec, prop, ds, w, t1, t2)
        if not np.all(np.isfinite(new_vals)):
            raise FlowError(f"homotopy flow lost finiteness at s={s:.3f}")
        dz = new_vals - z.values
        vsq[i] = float(np.mean(np.sum(dz * dz, axis=2))) / ds**2
        z = TorusField(new_vals, "z")
        zhat = new_hat

    res_start = l2_norm(hamiltonian_residual(spec, Z0, triple, h_weight=0.0))
    res_end = l2_norm(hamiltonian_residual(spec, z, triple, h_weight=0.0))
    return FlowTrajectory(
        s=svals,
        action=act,
        h_int=h_int,
        max_p_sq=max_p_sq,
        vsq=vsq,
        ds=ds,
        profile=profile,
        end_residuals=(res_start, res_end),
        ends_converged=(res_start < tol, res_end < tol),
        snapshots=snapshots,
    )


def _sample_index(traj: FlowTrajectory, s: float | None, default: int) -> int:
    if s is None:
        return default
    idx = int(np.argmin(np.abs(traj.s - s)))
    return idx


def energy(traj: FlowTrajectory, s0: float | None = None, s1: float | None = None) -> float:
    """Flow energy: integral of |d_s Z|^2 over [s0, s1] from stored velocities."""
    i0 = _sample_index(traj, s0, 0)
    i1 = _sample_index(traj, s1, len(traj.s) - 1)
    if i1 - i0 < 1:
        raise FlowError("energy window contains fewer than two samples")
    return float(np.sum(traj.vsq[i0:i1]) * traj.ds)


@dataclass(frozen=True)
class EnergyIdentityReport:
    energy: float
    action_drop: float
    switch_integral: float
    defect: float

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "action_drop": self.action_drop,
            "switch_integral": self.switch_integral,
            "defect": self.defect,
        }


def energy_identity_check(
    traj: FlowTrajectory, s0: float | None = None, s1: float | None = None
) -> EnergyIdentityReport:
    """Defect of E = A(s0) - A(s1) - integral of beta' * h over the window.

    The actions carry the instantaneous profile weight; the switching
    integral is a trapezoid over the stored torus means of h.  Expected
    size O(ds^2) plus quadrature error on smooth runs.
    """
    i0 = _sample_index(traj, s0, 0)
    i1 = _sample_index(traj, s1, len(traj.s) - 1)
    e = energy(traj, traj.s[i0], traj.s[i1])
    drop = float(traj.action[i0] - traj.action[i1])
    bprime = traj.profile.derivative(traj.s[i0 : i1 + 1])
    switch = float(np.trapezoid(bprime * traj.h_int[i0 : i1 + 1], dx=traj.ds))
    return EnergyIdentityReport(e, drop, switch, abs(e - (drop - switch)))


@dataclass(frozen=True)
class MaxPrincipleReport:
    max_p_sq: float
    rho: float
    passed: bool
    ends_converged: tuple
    grid_tol: float = 1e-8

    def to_dict(self) -> dict:
        return {
            "max_p_sq": self.max_p_sq,
            "rho": self.rho,
            "passed": self.passed,
            "ends_converged": list(self.ends_converged),
            "grid_tol": self.grid_tol,
        }


def max_principle_check(traj: FlowTrajectory, rho: float, grid_tol: float = 1e-8) -> MaxPrincipleReport:
    """Report whether |p|^2 stayed below rho along the whole trajectory."""
    worst = float(np.max(traj.max_p_sq))
    return MaxPrincipleReport(worst, rho, worst <= rho + grid_tol, traj.ends_converged, grid_tol)


def energy_density(Z: TorusField, dZds: TorusField) -> np.ndarray:
    """Pointwise density (|d_s Z|^2 + |d1 Z|^2 + |d2 Z|^2) / 2 on the grid."""
    if Z.values.shape != dZds.values.shape:
        raise FieldError("field and velocity shapes differ")
    d1 = derivative(Z, "d1").values
    d2 = derivative(Z, "d2").values
    return 0.5 * (
        np.sum(dZds.values**2, axis=2) + np.sum(d1**2, axis=2) + np.sum(d2**2, axis=2)
    )
