"""The approximating sequence for local existence.

u^(0) = p^(0) = 0 and, for n >= 1,

    d_t u^(n) + (u^(n-1) . grad) u^(n) = -grad p^(n-1),   u^(n)(0) = S_n u0,

with p^(n-1) = (-Lap)^{-1} sum_{i,j} d_i u_j^(n-1) d_j u_i^(n-1).  Each step is
followed by a Leray projection whose size is logged as the divergence residual.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .euler import (EulerState, RunConfig, biot_savart, divergence, leray, parse_init, pressure_source, run,
                    step)
from .lp import (DyadicPartition, FrequencyGrid, SpectralField, build_partition, deriv, dot_grad, lp_norm, s_n)
from .spaces import SpaceSpec, grad_linf, norm, parse_space
from .weights import parse_weight

T0_LIMIT = 1.25


class ConstantTooLargeError(ValueError):
    """The fitted constant leaves no admissible short time."""


class IterationError(ValueError):
    pass


def t0(C: float, u0_norm: float) -> float:
    """min{(5 - 4C) / (16 C ||u0||), ln(5/4) / (2 ||u0||)}.

    C = 0 takes the first entry as +inf (its limit); a zero norm gives +inf.
    """
    if C >= T0_LIMIT:
        raise ConstantTooLargeError(f"C = {C:g} >= 5/4 makes the short-time bound non-positive")
    if C < 0 or u0_norm < 0:
        raise ValueError("C and the norm must be non-negative")
    if u0_norm == 0:
        return math.inf
    second = math.log(1.25) / (2 * u0_norm)
    if C == 0:
        return second
    return min((5 - 4 * C) / (16 * C * u0_norm), second)


# trajectories -----------------------------------------------------------------

class Trajectory:
    """Velocity at the step nodes plus its time derivative, for Hermite midpoints."""

    def __init__(self, dt: float, values: list, slopes: list):
        self.dt = dt
        self.values = values
        self.slopes = slopes
        self._mid: dict = {}

    @classmethod
    def zero(cls, grid: FrequencyGrid, steps: int, dt: float) -> "Trajectory":
        z = SpectralField.zeros(grid, 2)
        return cls(dt, [z] * (steps + 1), [z] * (steps + 1))

    @property
    def steps(self) -> int:
        return len(self.values) - 1

    def at_node(self, k: int) -> SpectralField:
        return self.values[k]

    def at_mid(self, k: int) -> SpectralField:
        """Cubic Hermite value at t_k + dt/2."""
        if k not in self._mid:
            a, b = self.values[k], self.values[k + 1]
            self._mid[k] = (a + b) * 0.5 + (self.slopes[k] - self.slopes[k + 1]) * (self.dt / 8)
        return self._mid[k]


def _forcing(a: SpectralField) -> SpectralField:
    """-grad p for the advecting field a."""
    p = pressure_source(a)
    p = p.with_coeffs(p.coeffs * a.grid.inv_lap)
    return SpectralField.stack([deriv(p, 0), deriv(p, 1)]) * -1.0


def _rhs(a: SpectralField, force: SpectralField, u: SpectralField) -> SpectralField:
    return (force - dot_grad(a, u)).dealiased()


@dataclass
class AdvanceResult:
    trajectory: Trajectory
    divergence_residual: float  # max over steps of ||div||_inf / ||grad u||_inf before projection


def linearized_advance(u_prev: Trajectory, u_init: SpectralField) -> AdvanceResult:
    """RK4 for d_t u + (u_prev . grad) u = -grad p(u_prev), Leray-projected after every step."""
    dt = u_prev.dt
    forces = {}

    def force(key, a):
        if key not in forces:
            forces[key] = _forcing(a)
        return forces[key]

    u = leray(u_init.dealiased())
    values, slopes = [u], []
    worst = 0.0
    for k in range(u_prev.steps):
        a0, am, a1 = u_prev.at_node(k), u_prev.at_mid(k), u_prev.at_node(k + 1)
        f0, fm, f1 = force(("n", k), a0), force(("m", k), am), force(("n", k + 1), a1)
        k1 = _rhs(a0, f0, u)
        slopes.append(k1)
        k2 = _rhs(am, fm, u + k1 * (dt / 2))
        k3 = _rhs(am, fm, u + k2 * (dt / 2))
        k4 = _rhs(a1, f1, u + k3 * dt)
        raw = u + (k1 + k2 * 2 + k3 * 2 + k4) * (dt / 6)
        if not np.all(np.isfinite(raw.coeffs)):
            raise IterationError(f"non-finite iterate at step {k + 1}")
        scale = grad_linf(raw)
        div = lp_norm(divergence(raw).physical(), math.inf)
        if scale > 0:
            worst = max(worst, div / scale)
        u = leray(raw)
        values.append(u)
    slopes.append(_rhs(u_prev.at_node(u_prev.steps), force(("n", u_prev.steps), u_prev.at_node(u_prev.steps)), u))
    return AdvanceResult(Trajectory(dt, values, slopes), worst)


# the sequence -----------------------------------------------------------------

@dataclass
class IterationConfig:
    n_max: int = 8
    T: float | None = None
    dt: float = 1e-3
    grid_n: int = 64
    domain_l: float = 2 * math.pi
    space: str = "B:s=2,p=2,q=2"
    weight: str = "log:alpha=1"
    C_empirical: float | None = None
    enforce_t0: bool = True
    init: str = "taylor"
    seed: int = 0
    fit_t_end: float = 1.0

    def space_spec(self) -> SpaceSpec:
        return parse_space(self.space, parse_weight(self.weight))


@dataclass
class IterateRecord:
    n: int
    sup_norm: float
    delta_n: float
    divergence_residual: float
    rho_n: float = math.nan
    uniform_ok: bool = True


@dataclass
class IterationResult:
    config: IterationConfig
    records: list
    u0_norm: float
    T: float
    C: float
    t0_applicable: bool
    rho: float
    final: Trajectory | None = field(default=None, repr=False)

    @property
    def uniform_bound(self) -> bool:
        return all(r.uniform_ok for r in self.records)


def fitted_constant(cfg: IterationConfig) -> float:
    """A priori constant fitted by the solver on the same data (first 10% of ``fit_t_end``)."""
    rc = RunConfig(grid_n=cfg.grid_n, domain_l=cfg.domain_l, dt=cfg.dt, t_end=cfg.fit_t_end, init=cfg.init,
                   space=cfg.space, weight=cfg.weight, sample_every=max(1, int(round(0.01 / cfg.dt))))
    return run(rc).constants["apriori"]


def resolve_horizon(cfg: IterationConfig, u0_norm: float):
    """(T, C, t0_applicable) following the T0 gate rules."""
    C = fitted_constant(cfg) if cfg.C_empirical is None else cfg.C_empirical
    try:
        limit = t0(C, u0_norm)
    except ConstantTooLargeError:
        if cfg.T is None:
            raise
        return cfg.T, C, False
    if cfg.T is None:
        if not math.isfinite(limit):
            raise IterationError("zero data gives no finite T0; set T explicitly")
        return limit, C, True
    if cfg.enforce_t0 and cfg.T > limit * (1 + 1e-12):
        raise IterationError(f"T = {cfg.T:g} exceeds T0 = {limit:g}")
    return cfg.T, C, True


def _initial_velocity(cfg: IterationConfig, grid: FrequencyGrid) -> SpectralField:
    return biot_savart(parse_init(cfg.init, grid))


RHO_FLOOR = 1e-11


def iterate(u0: SpectralField | None, cfg: IterationConfig) -> IterationResult:
    grid = FrequencyGrid(cfg.grid_n, cfg.domain_l)
    partition = build_partition(grid)
    spec = cfg.space_spec()
    lower = spec.shifted(-1)
    if u0 is None:
        u0 = _initial_velocity(cfg, grid)
    u0_norm = norm(u0, spec, partition)
    if u0_norm == 0:
        T, C, applicable = (cfg.T if cfg.T is not None else 0.1), 0.0, True
    else:
        T, C, applicable = resolve_horizon(cfg, u0_norm)
    steps = max(1, math.ceil(T / cfg.dt - 1e-9))
    dt = T / steps

    prev = Trajectory.zero(grid, steps, dt)
    records = []
    for n in range(1, cfg.n_max + 1):
        adv = linearized_advance(prev, s_n(u0, n, partition))
        cur = adv.trajectory
        sup = max(norm(v, spec, partition) for v in cur.values)
        delta = max(norm(a - b, lower, partition) for a, b in zip(cur.values, prev.values))
        records.append(IterateRecord(n, sup, delta, adv.divergence_residual,
                                     uniform_ok=sup <= 2 * u0_norm * (1 + 1e-12)))
        prev = cur
    floor = RHO_FLOOR * max(u0_norm, 1e-300)
    for a, b in zip(records, records[1:]):
        b.rho_n = 0.0 if a.delta_n <= floor or b.delta_n <= floor else b.delta_n / a.delta_n
    rhos = [r.rho_n for r in records[1:]]
    rho = max(rhos) if rhos else 0.0
    return IterationResult(cfg, records, u0_norm, T, C, applicable, rho, prev)


def initial_remainder(u0: SpectralField, n: int, m: int, spec: SpaceSpec, partition: DyadicPartition) -> float:
    """||S_n u0 - S_m u0||_{X^{s-1}}."""
    return norm(s_n(u0, n, partition) - s_n(u0, m, partition), spec.shifted(-1), partition)


def convergence_vs_solver(u0: SpectralField | None, cfg: IterationConfig, result: IterationResult | None = None) -> float:
    """sup_t ||u^(n_max)(t) - u_euler(t)||_{X^{s-1}} with the solver run on the same data and steps."""
    grid = FrequencyGrid(cfg.grid_n, cfg.domain_l)
    partition = build_partition(grid)
    if u0 is None:
        u0 = _initial_velocity(cfg, grid)
    if result is None:
        result = iterate(u0, cfg)
    traj = result.final
    lower = cfg.space_spec().shifted(-1)
    omega = deriv(u0[1], 0) - deriv(u0[0], 1)
    state = EulerState(omega.with_coeffs(np.where(grid.retained, omega.coeffs, 0)), 0.0)
    worst = norm(traj.values[0] - biot_savart(state.omega), lower, partition)
    for k in range(1, traj.steps + 1):
        state = step(state, traj.dt)
        worst = max(worst, norm(traj.values[k] - biot_savart(state.omega), lower, partition))
    return worst

