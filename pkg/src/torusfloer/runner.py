"""Multistart search for solutions of the first-order system on the torus.

Seeds are constants on a lattice of the base torus plus random band-limited
perturbations; each seed flows under the autonomous gradient flow until the
residual converges or the run is reported divergent.  Converged limits are
deduplicated in the quotient L2 metric (the base torus identifies constant
shifts by 2*pi lattice vectors) and counted against the 2n+1 lower bound.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .floer import FlowResult, flow_to_solution
from .hamiltonians import (
    HamiltonianSpec,
    action,
    action_bound_constants,
    hamiltonian_from_config,
    nonlinearity_from_config,
)
from .spectral import TorusField, constant_field, random_band_limited, sobolev_seminorm


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    n_pairs: int = 1
    grid_size: int = 32
    potential: dict = field(
        default_factory=lambda: {"kind": "trig_potential", "epsilon": 0.1, "modes": [[1, 0], [0, 1]]}
    )
    rho: float | None = None
    lattice_per_dim: int = 6
    random_starts: int = 14
    perturbation_amplitude: float = 0.01
    perturbation_band: int = 2
    residual_tol: float = 1e-8
    dedup_delta: float = 0.05
    s_max: float = 400.0
    ds: float = 0.02
    check_every: int = 10
    seed: int = 0
    wall_clock_cap: float | None = None

    def __post_init__(self):
        if self.dedup_delta <= 10.0 * self.residual_tol:
            raise ConfigError("dedup_delta must exceed 10x residual_tol")
        if self.lattice_per_dim < 1:
            raise ConfigError("lattice_per_dim must be >= 1")
        if self.random_starts < 0:
            raise ConfigError("random_starts must be >= 0")
        pot = nonlinearity_from_config(self.potential)
        if pot.n_pairs != self.n_pairs:
            raise ConfigError(
                f"potential is for n_pairs={pot.n_pairs}, config says {self.n_pairs}"
            )
        if not np.isfinite(pot.c3_norm):
            raise ConfigError("potential C3-norm estimate must be finite")

    @property
    def n_lattice_seeds(self) -> int:
        return self.lattice_per_dim ** (2 * self.n_pairs)

    @property
    def n_seeds(self) -> int:
        return self.n_lattice_seeds + self.random_starts

    def resolved_rho(self) -> float:
        """Configured rho, or 4 plus the a-priori |p|^2 level of the action bound."""
        if self.rho is not None:
            return float(self.rho)
        spec = hamiltonian_from_config(self.potential)
        c0, c1 = action_bound_constants(spec)
        return 4.0 + c1 / c0

    def build_spec(self) -> HamiltonianSpec:
        return hamiltonian_from_config(self.potential, rho=self.resolved_rho())

    def to_dict(self) -> dict:
        return {
            "n_pairs": self.n_pairs,
            "grid_size": self.grid_size,
            "potential": dict(self.potential),
            "rho": self.rho,
            "lattice_per_dim": self.lattice_per_dim,
            "random_starts": self.random_starts,
            "perturbation_amplitude": self.perturbation_amplitude,
            "perturbation_band": self.perturbation_band,
            "residual_tol": self.residual_tol,
            "dedup_delta": self.dedup_delta,
            "s_max": self.s_max,
            "ds": self.ds,
            "check_every": self.check_every,
            "seed": self.seed,
            "wall_clock_cap": self.wall_clock_cap,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)


def seed_field(config: ExperimentConfig, index: int) -> TorusField:
    """Deterministic seed: lattice constants first, then perturbed constants."""
    dim_q = 2 * config.n_pairs
    n = config.grid_size
    if index < 0 or index >= config.n_seeds:
        raise ConfigError(f"seed index {index} out of range")
    if index < config.n_lattice_seeds:
        digits = []
        rest = index
        for _ in range(dim_q):
            digits.append(rest % config.lattice_per_dim)
            rest //= config.lattice_per_dim
        q = 2.0 * np.pi * np.array(digits, dtype=float) / config.lattice_per_dim
        vec = np.concatenate([q, np.zeros(dim_q)])
        return constant_field(n, vec, "z")
    rng = np.random.default_rng([config.seed, index])
    q = rng.uniform(0.0, 2.0 * np.pi, size=dim_q)
    base = np.concatenate([q, np.zeros(dim_q)])
    bump = random_band_limited(
        rng,
        n,
        4 * config.n_pairs,
        max_mode=config.perturbation_band,
        amplitude=config.perturbation_amplitude,
        layout="z",
    )
    return TorusField(bump.values + base, "z")


def seed_kind(config: ExperimentConfig, index: int) -> str:
    return "lattice" if index < config.n_lattice_seeds else "perturbed"


@dataclass
class SolutionRecord:
    seed_index: int
    field: TorusField
    action: float
    residual: float
    classification: str
    q_mean: np.ndarray
    max_p_sq: float
    s_reached: float
    n_steps: int
    p_norm_sq: float
    bound_margin: float
    action_trace: np.ndarray | None = None  # (samples, 2): s, action

    def to_row(self) -> dict:
        return {
            "seed_index": self.seed_index,
            "action": self.action,
            "residual": self.residual,
            "classification": self.classification,
            "q_mean": [float(x) for x in np.mod(self.q_mean, 2.0 * np.pi)],
            "max_p_sq": self.max_p_sq,
            "s_reached": self.s_reached,
            "bound_margin": self.bound_margin,
        }


@dataclass
class DivergenceRecord:
    seed_index: int
    reason: str
    s_reached: float
    residual: float


def _record_from_result(
    config: ExperimentConfig, spec: HamiltonianSpec, index: int, result: FlowResult
) -> SolutionRecord:
    z = result.Z
    seminorm = sobolev_seminorm(z, 1)
    classification = "constant" if seminorm < 10.0 * config.residual_tol else "nonconstant"
    q_mean = np.mean(z.q_part(), axis=(0, 1))
    p_norm_sq = float(np.mean(np.sum(z.p_part() ** 2, axis=2)))
    c0, c1 = action_bound_constants(spec)
    act = action(spec, z)
    trace = np.array([(row[0], row[1]) for row in result.rows[::20]])
    return SolutionRecord(
        seed_index=index,
        field=z,
        action=act,
        residual=result.residual_norm,
        classification=classification,
        q_mean=q_mean,
        max_p_sq=float(np.max(np.sum(z.p_part() ** 2, axis=2))),
        s_reached=result.s_reached,
        n_steps=result.n_steps,
        p_norm_sq=p_norm_sq,
        bound_margin=act - (c0 * p_norm_sq - c1),
        action_trace=trace,
    )


def solve_seed(config: ExperimentConfig, index: int):
    """Flow one seed; returns (index, FlowResult)."""
    spec = config.build_spec()
    z0 = seed_field(config, index)
    result = flow_to_solution(
        z0,
        spec,
        tol=config.residual_tol,
        s_max=config.s_max,
        ds=config.ds,
        check_every=config.check_every,
    )
    return index, result


def _solve_seed_task(config_json: str, index: int):
    config = ExperimentConfig.from_dict(json.loads(config_json))
    idx, result = solve_seed(config, index)
    return idx, result


@dataclass
class MultistartResult:
    records: list
    divergent: list
    unfinished: list
    budget_exhausted: bool


def multistart_solve(config: ExperimentConfig, jobs: int = 1) -> MultistartResult:
    """Run every seed; converged limits become records, the rest are reported."""
    spec = config.build_spec()
    records, divergent, unfinished = [], [], []
    start = time.monotonic()
    budget_exhausted = False
    indices = list(range(config.n_seeds))

    results: dict = {}
    if jobs > 1:
        config_json = json.dumps(config.to_dict())
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for idx, result in pool.map(
                _solve_seed_task, [config_json] * len(indices), indices
            ):
                results[idx] = result
    else:
        for idx in indices:
            if config.wall_clock_cap is not None and time.monotonic() - start > config.wall_clock_cap:
                budget_exhausted = True
                break
            results[idx] = solve_seed(config, idx)[1]

    for idx in sorted(results):
        result = results[idx]
        if result.converged:
            records.append(_record_from_result(config, spec, idx, result))
        elif result.diverged:
            divergent.append(
                DivergenceRecord(idx, result.reason, result.s_reached, result.residual_norm)
            )
        else:
            unfinished.append(
                DivergenceRecord(idx, result.reason, result.s_reached, result.residual_norm)
            )
    return MultistartResult(records, divergent, unfinished, budget_exhausted)


# ---------------------------------------------------------------------------
# deduplication in the quotient metric


def quotient_l2_distance(a: TorusField, b: TorusField) -> float:
    """L2 distance with the q block compared modulo constant 2*pi shifts.

    Only the q mean can differ by a lattice vector between two lifts of the
    same torus-valued field, so the minimizing shift is the rounded mean
    difference per component.
    """
    if a.values.shape != b.values.shape:
        raise ConfigError("cannot compare fields of different shapes")
    dq = a.q_part() - b.q_part()
    shift = 2.0 * np.pi * np.round(np.mean(dq, axis=(0, 1)) / (2.0 * np.pi))
    dq = dq - shift
    dp = a.p_part() - b.p_part()
    dist_sq = float(np.mean(np.sum(dq**2, axis=2) + np.sum(dp**2, axis=2)))
    return float(np.sqrt(max(dist_sq, 0.0)))


@dataclass
class DedupResult:
    clusters: list
    representatives: list
    diameters: list
    delta: float

    @property
    def distinct(self) -> int:
        return len(self.clusters)


def dedup(records: list, delta: float) -> DedupResult:
    """Single-linkage greedy clustering; representatives take the lowest residual."""
    if delta <= 0:
        raise ConfigError("dedup delta must be positive")
    order = sorted(range(len(records)), key=lambda i: records[i].residual)
    clusters: list[list[int]] = []
    for i in order:
        hits = []
        for ci, members in enumerate(clusters):
            if any(
                quotient_l2_distance(records[i].field, records[j].field) <= delta
                for j in members
            ):
                hits.append(ci)
        if not hits:
            clusters.append([i])
        else:
            keep = hits[0]
            clusters[keep].append(i)
            for ci in reversed(hits[1:]):
                clusters[keep].extend(clusters.pop(ci))
    representatives = [
        min(members, key=lambda i: records[i].residual) for members in clusters
    ]
    diameters = []
    for members in clusters:
        worst = 0.0
        for a in range(len(members)):
            for b in range(a + 1, len(members)):
                worst = max(
                    worst,
                    quotient_l2_distance(
                        records[members[a]].field, records[members[b]].field
                    ),
                )
        diameters.append(worst)
    return DedupResult(clusters, representatives, diameters, delta)


def detect_continuum(records: list, dedup_result: DedupResult, config: ExperimentConfig) -> bool:
    """Heuristic for a continuum of solutions rather than isolated ones.

    Fires when a cluster chains beyond 10*delta, or when many clusters
    share one action value to within residual noise (the flat landscape a
    vanishing nonlinearity produces: isolated lattice seeds never chain, so
    diameter alone cannot see it).
    """
    if any(d > 10.0 * dedup_result.delta for d in dedup_result.diameters):
        return True
    if dedup_result.distinct > max(10, 3 * (2 * config.n_pairs + 1)):
        acts = [records[i].action for i in dedup_result.representatives]
        if max(acts) - min(acts) < 10.0 * config.residual_tol:
            return True
    return False


@dataclass
class CountReport:
    config: ExperimentConfig
    bound: int
    distinct: int
    passed: bool
    inconclusive: bool
    continuum_detected: bool
    records: list
    dedup_result: DedupResult
    divergent: list
    unfinished: list
    rho: float
    bound_constants: tuple

    def table(self) -> list:
        """Representative rows sorted by action, largest first."""
        reps = [self.records[i] for i in self.dedup_result.representatives]
        sizes = {
            min(m, key=lambda i: self.records[i].residual): len(m)
            for m in self.dedup_result.clusters
        }
        rows = []
        for rec, members in sorted(
            zip(reps, self.dedup_result.clusters), key=lambda t: -t[0].action
        ):
            row = rec.to_row()
            row["cluster_size"] = len(members)
            rows.append(row)
        return rows

    def to_report_dict(self) -> dict:
        c0, c1 = self.bound_constants
        return {
            "bound": self.bound,
            "distinct": self.distinct,
            "passed": self.passed,
            "inconclusive": self.inconclusive,
            "continuum_detected": self.continuum_detected,
            "rho": self.rho,
            "action_bound_constants": {"c0": c0, "c1": c1},
            "n_seeds": self.config.n_seeds,
            "n_converged": len(self.records),
            "n_divergent": len(self.divergent),
            "n_unfinished": len(self.unfinished),
            "records": self.table(),
            "config": self.config.to_dict(),
        }


def verify_count(config: ExperimentConfig, jobs: int = 1) -> CountReport:
    """Full experiment: multistart, dedup, count against the 2n+1 bound."""
    spec = config.build_spec()
    multi = multistart_solve(config, jobs=jobs)
    dd = dedup(multi.records, config.dedup_delta)
    continuum = detect_continuum(multi.records, dd, config) if multi.records else False
    bound = 2 * config.n_pairs + 1
    inconclusive = multi.budget_exhausted
    passed = (dd.distinct >= bound or continuum) and not inconclusive
    return CountReport(
        config=config,
        bound=bound,
        distinct=dd.distinct,
        passed=passed,
        inconclusive=inconclusive,
        continuum_detected=continuum,
        records=multi.records,
        dedup_result=dd,
        divergent=multi.divergent,
        unfinished=multi.unfinished,
        rho=config.resolved_rho(),
        bound_constants=action_bound_constants(spec),
    )
