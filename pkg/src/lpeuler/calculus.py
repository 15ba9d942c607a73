"""Paraproducts, commutators, Fourier multipliers, the maximal operator and the
estimate-verification harness.

Every estimate is measured as lhs/rhs over a seeded ensemble; the largest
ratio is the empirical constant.  Constants are reported, never compared with
theoretical values, except where an identity or an exact bound is being checked.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import fft as sfft

from .lp import (DyadicPartition, FrequencyGrid, SpectralField, build_partition, deriv, from_padded_physical,
                 grad, lp_norm, padded_physical, product, random_field)
from .spaces import (BESOV, TRIEBEL, UNWEIGHTED, SpaceSpec, band_range, band_weights, embedding_exponent, grad_linf,
                     lq_sum, norm, verify_embedding)
from .weights import AdmissibilityError, is_admissible


class ConfigurationError(ValueError):
    """Exponent or space arithmetic that an estimate cannot accept."""


# paraproducts -----------------------------------------------------------------

def _padded_blocks(f: SpectralField, partition: DyadicPartition) -> dict:
    return {j: padded_physical(f.with_coeffs(partition.table(j) * f.coeffs)) for j in partition.bands}


def paraproduct(f: SpectralField, g: SpectralField, partition: DyadicPartition):
    """(T_f g, T_g f, R(f, g)) with T_g f = sum_{j>=1} S_{j-2} g Delta_j f.

    R collects the pairs |j - j'| <= 1.  Products are taken on the padded grid.
    """
    if f.is_vector or g.is_vector:
        raise ValueError("paraproduct takes scalar fields")
    grid = f.grid
    bf, bg = _padded_blocks(f, partition), _padded_blocks(g, partition)
    bands = list(partition.bands)

    def para(low, high):
        acc = np.zeros_like(low[-1])
        running = np.zeros_like(low[-1])  # S_{j-2} of the low factor
        for j in bands:
            if j >= 1:
                running = running + low[j - 2]
                acc = acc + running * high[j]
        return from_padded_physical(grid, acc)

    rem = np.zeros_like(bf[-1])
    for j in bands:
        near = sum(bg[i] for i in (j - 1, j, j + 1) if i in bg)
        rem = rem + bf[j] * near
    return para(bf, bg), para(bg, bf), from_padded_physical(grid, rem)


def paraproduct_residual(f: SpectralField, g: SpectralField, partition: DyadicPartition):
    """(||fg - (T_f g + T_g f + R)||_inf, ||f||_inf ||g||_inf)."""
    tfg, tgf, r = paraproduct(f, g, partition)
    resid = product(f, g) - (tfg + tgf + r)
    return lp_norm(resid.physical(), math.inf), lp_norm(f.physical(), math.inf) * lp_norm(g.physical(), math.inf)


def remainder(f: SpectralField, g: SpectralField, partition: DyadicPartition) -> SpectralField:
    return paraproduct(f, g, partition)[2]


# commutators ------------------------------------------------------------------

def check_divergence_free(u: SpectralField, rtol: float = 1e-10) -> None:
    div = lp_norm((deriv(u[0], 0) + deriv(u[1], 1)).physical(), math.inf)
    scale = grad_linf(u)
    if div > rtol * scale and div > 1e-14:
        from .euler import PreconditionError

        raise PreconditionError(f"u is not divergence-free: ||div u|| = {div:.3e} vs ||grad u|| = {scale:.3e}")


def _table(partition: DyadicPartition, j: int, homogeneous: bool) -> np.ndarray:
    return partition.table(j, homogeneous)


def commutator(u: SpectralField, omega: SpectralField, j: int, partition: DyadicPartition,
               homogeneous: bool = False) -> SpectralField:
    """[u.grad, Delta_j] omega = u.grad Delta_j omega - Delta_j (u.grad omega)."""
    return commutators(u, omega, partition, homogeneous, bands=[j])[j]


def commutators(u: SpectralField, omega: SpectralField, partition: DyadicPartition,
                homogeneous: bool = False, bands=None) -> dict:
    """All band commutators at once, reusing the padded transforms of u and grad omega."""
    if not u.is_vector or u.components != 2 or omega.is_vector:
        raise ValueError("commutator takes a 2-vector u and a scalar omega")
    check_divergence_free(u)
    grid = u.grid
    if bands is None:
        bands = partition.homogeneous_bands if homogeneous else partition.bands
    uu = padded_physical(u)
    dw = [padded_physical(deriv(omega, a)) for a in range(2)]
    transport = from_padded_physical(grid, uu[0] * dw[0] + uu[1] * dw[1])
    out = {}
    for j in bands:
        tab = _table(partition, j, homogeneous)
        local = [padded_physical(deriv(omega.with_coeffs(tab * omega.coeffs), a)) for a in range(2)]
        first = from_padded_physical(grid, uu[0] * local[0] + uu[1] * local[1])
        out[j] = first - transport.with_coeffs(tab * transport.coeffs)
    return out


# multipliers ------------------------------------------------------------------

@dataclass(frozen=True)
class Symbol:
    """A homogeneous Fourier multiplier sigma with |d^g sigma| <~ |xi|^(-|g|-degree)."""

    name: str
    degree: float
    i: int = 1
    j: int = 1

    @property
    def singular(self) -> bool:
        return self.degree > 0 or self.name == "grad_invlap_div"

    def table(self, grid: FrequencyGrid) -> np.ndarray:
        xi = grid.xi
        r2 = grid.xi_abs**2
        safe = np.where(r2 > 0, r2, 1.0)
        if self.name == "riesz":
            return np.where(r2 > 0, xi[self.i - 1] * xi[self.j - 1] / safe, 0.0)
        bs = grid.biot_savart_symbol
        if self.name == "biot_savart":
            return bs
        if self.name == "grad_invlap_div":
            # same component-major layout as lp.grad: entry 2c + a is d_a u_c
            return np.stack([1j * xi[a] * bs[c] for c in range(2) for a in range(2)])
        raise ValueError(f"unknown symbol {self.name!r}")

    def label(self) -> str:
        return f"riesz_{self.i}{self.j}" if self.name == "riesz" else self.name


def parse_symbol(text: str) -> Symbol:
    """``riesz_ij`` (degree 0), ``grad_invlap_div`` (omega -> grad u, degree 0), ``biot_savart`` (degree 1)."""
    if text.startswith("riesz_") and len(text) == 8 and set(text[6:]) <= {"1", "2"}:
        return Symbol("riesz", 0.0, int(text[6]), int(text[7]))
    if text == "grad_invlap_div":
        return Symbol(text, 0.0)
    if text == "biot_savart":
        return Symbol(text, 1.0)
    raise ValueError(f"unknown multiplier {text!r}")


def multiplier_apply(symbol: Symbol, f: SpectralField) -> SpectralField:
    if symbol.singular and abs(f.coeffs[..., 0, 0]).max() > 1e-12 * max(1.0, float(np.abs(f.coeffs).max())):
        from .euler import PreconditionError

        raise PreconditionError(f"{symbol.label()} needs a mean-zero input")
    return SpectralField(f.grid, symbol.table(f.grid) * f.coeffs)


# maximal function -------------------------------------------------------------

N_RADII = 32


def _periodic_distance(grid: FrequencyGrid) -> np.ndarray:
    d = np.minimum(np.arange(grid.n), grid.n - np.arange(grid.n)) * grid.dx
    return np.hypot(d[:, None], d[None, :])


def maximal_radii(grid: FrequencyGrid, count: int = N_RADII) -> np.ndarray:
    return np.geomspace(grid.dx, grid.l / 2, count)


def _disc_averages(values: np.ndarray, grid: FrequencyGrid, radii) -> np.ndarray:
    dist = _periodic_distance(grid)
    fv = sfft.rfft2(values)
    out = []
    for r in radii:
        disc = (dist <= r * (1 + 1e-12)).astype(float)
        out.append(sfft.irfft2(fv * sfft.rfft2(disc), s=values.shape) / disc.sum())
    return np.array(out)


def maximal_function(f: SpectralField | np.ndarray, grid: FrequencyGrid | None = None) -> np.ndarray:
    """Discrete Hardy-Littlewood maximal function over periodic discs.

    The supremum runs over the r -> 0 limit |f|, 32 geometric radii from one
    cell to l/2, and the r -> infinity limit (the torus mean of |f|).
    """
    if isinstance(f, SpectralField):
        grid, values = f.grid, f.physical()
    else:
        values = np.asarray(f, dtype=float)
    a = np.abs(values)
    avgs = _disc_averages(a, grid, maximal_radii(grid))
    return np.maximum(np.maximum(a, avgs.max(axis=0)), a.mean())


def radial_majorant_mass(kernel: np.ndarray, grid: FrequencyGrid) -> float:
    """Normalized mass of a radially decreasing majorant of |kernel| built from the maximal radii.

    The majorant is a nonnegative combination of disc indicators on the same
    radii the maximal function uses (plus the whole torus), so
    |kernel * f| <= mass * M f holds pointwise on the grid.
    """
    dist = _periodic_distance(grid)
    radii = np.append(maximal_radii(grid), np.inf)
    a = np.abs(kernel)
    # level on the shell (r_{m-1}, r_m]: largest |kernel| at distance > r_{m-1}
    levels = []
    inner = -1.0
    for r in radii:
        outside = dist > inner
        levels.append(a[outside].max() if outside.any() else 0.0)
        inner = r
    levels.append(0.0)
    mass = 0.0
    for m, r in enumerate(radii):
        step = levels[m] - levels[m + 1]
        count = np.count_nonzero(dist <= r * (1 + 1e-12)) if np.isfinite(r) else dist.size
        mass += step * count / dist.size
    return float(mass)


def band_kernel(partition: DyadicPartition, j: int) -> np.ndarray:
    """Physical kernel k_j with Delta_j f(x) = mean_y k_j(x - y) f(y) on the grid."""
    grid = partition.grid
    return SpectralField(grid, partition.table(j).astype(complex)).physical()


def convolution_majorant_check(f: SpectralField, partition: DyadicPartition):
    """(max_x sup_j |Delta_j f|(x) / M f(x), A) with A the largest band majorant mass."""
    grid = f.grid
    mf = maximal_function(f)
    bands = list(partition.bands)
    sup = np.max([np.abs(f.with_coeffs(partition.table(j) * f.coeffs).physical()) for j in bands], axis=0)
    A = max(radial_majorant_mass(band_kernel(partition, j), grid) for j in bands)
    ratio = np.where(mf > 0, sup / np.where(mf > 0, mf, 1.0), 0.0)
    return float(ratio.max()), A


def fefferman_stein(family, p: float, q: float):
    """(||(M f_j)_j||_{L^p(l^q)}, ||(f_j)_j||_{L^p(l^q)}) for a finite family of scalar fields."""
    maxed = np.array([maximal_function(f) for f in family])
    raw = np.array([np.abs(f.physical()) for f in family])
    return lp_norm(lq_sum(maxed, q), p), lp_norm(lq_sum(raw, q), p)


# estimate reports -------------------------------------------------------------

@dataclass
class EstimateReport:
    estimate_id: str
    lhs: np.ndarray
    rhs: np.ndarray
    grid_n: int = 0
    bound: float | None = None
    resolution_sweep: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.lhs = np.asarray(self.lhs, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)

    @property
    def samples(self) -> int:
        return len(self.lhs)

    @property
    def ratios(self) -> np.ndarray:
        out = np.zeros_like(self.lhs)
        pos = self.rhs > 0
        out[pos] = self.lhs[pos] / self.rhs[pos]
        out[(~pos) & (self.lhs > 0)] = math.inf
        return out

    @property
    def empirical_constant(self) -> float:
        return float(self.ratios.max()) if self.samples else 0.0

    @property
    def violations(self) -> list:
        r = self.ratios
        bad = ~np.isfinite(r) | ~np.isfinite(self.lhs)
        if self.bound is not None:
            bad |= r > self.bound
        return [int(i) for i in np.flatnonzero(bad)]

    @property
    def sweep_spread(self) -> float:
        vals = [v for v in self.resolution_sweep.values()]
        if not vals:
            return 1.0
        lo, hi = min(vals), max(vals)
        if hi == 0:
            return 1.0
        return math.inf if lo == 0 else hi / lo

    @property
    def ok(self) -> bool:
        return not self.violations and math.isfinite(self.empirical_constant)

    def rows(self):
        for i, (a, b, r) in enumerate(zip(self.lhs, self.rhs, self.ratios)):
            yield i, float(a), float(b), float(r)


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("LPEULER_THREADS", "1")))
    except ValueError:
        return 1


def sample_rngs(seed: int, samples: int):
    """Independent per-sample generators; sample i depends only on (seed, i)."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(samples)]


def _map(fn, items, workers: int | None):
    workers = thread_count() if workers is None else workers
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def ensemble_field(grid: FrequencyGrid, rng, slope: float = 2.0, components: int = 1) -> SpectralField:
    """Random field whose products with another ensemble field are exact on the grid."""
    return random_field(grid, rng, slope=slope, components=components, kcut=grid.n / 4 - 1)


def _divergence_free(grid: FrequencyGrid, rng, slope: float):
    from .euler import biot_savart

    omega = ensemble_field(grid, rng, slope)
    return biot_savart(omega), omega


# single-sample estimates ------------------------------------------------------

def leibniz_terms(f: SpectralField, g: SpectralField, spec: SpaceSpec, partition: DyadicPartition):
    """(||fg||_X, ||f||_inf ||g||_X + ||g||_inf ||f||_X)."""
    fi = lp_norm(f.physical(), math.inf)
    gi = lp_norm(g.physical(), math.inf)
    lhs = norm(product(f, g), spec, partition)
    return lhs, fi * norm(g, spec, partition) + gi * norm(f, spec, partition)


def _weighted_blocks(fields: dict, spec: SpaceSpec, partition: DyadicPartition, localize: bool):
    bands = list(band_range(spec, partition))
    w = band_weights(spec, bands)
    out = []
    for wj, j in zip(w, bands):
        piece = fields[j]
        if localize:
            piece = piece.with_coeffs(partition.table(j, spec.homogeneous) * piece.coeffs)
        out.append(wj * piece.physical())
    return np.array(out)


def commutator_terms(u: SpectralField, omega: SpectralField, spec: SpaceSpec, partition: DyadicPartition):
    """(lhs, rhs_grad, rhs_linf) of the commutator estimate in ``spec``.

    Besov: lhs = ||(2^{js} psi(2^j) ||Delta_j R_j||_p)_j||_{l^q} over inhomogeneous bands.
    Triebel-Lizorkin: lhs = || ||(2^{js} psi(2^j) R_j)_j||_{l^q} ||_{L^p} over homogeneous bands.
    rhs_grad carries ||grad omega||_inf ||grad u||_{X^{s-1}}, rhs_linf carries ||omega||_inf ||grad u||_X.
    """
    comms = commutators(u, omega, partition, homogeneous=spec.homogeneous)
    if spec.family == BESOV:
        pieces = _weighted_blocks(comms, spec, partition, localize=True)
        lhs = float(lq_sum([lp_norm(b, spec.p) for b in pieces], spec.q))
    else:
        pieces = _weighted_blocks(comms, spec, partition, localize=False)
        lhs = lp_norm(lq_sum(pieces, spec.q), spec.p)
    gu = grad(u)
    base = grad_linf(u) * norm(omega, spec, partition)
    rhs_grad = base + lp_norm(grad(omega).physical(), math.inf) * norm(gu, spec.shifted(-1), partition)
    rhs_linf = base + lp_norm(omega.physical(), math.inf) * norm(gu, spec, partition)
    return lhs, rhs_grad, rhs_linf


def remainder_specs(spec1: SpaceSpec, spec2: SpaceSpec) -> SpaceSpec:
    """Target space B^{s1+s2, psi}_{p, r} with 1/p = 1/p1 + 1/p2 and 1/r = 1/r1 + 1/r2."""
    if spec1.family != BESOV or spec2.family != BESOV:
        raise ConfigurationError("the remainder estimate is stated for Besov spaces")
    if spec1.s < 0 or spec2.s < 0 or spec1.s + spec2.s <= 0:
        raise ConfigurationError("need s1, s2 >= 0 and s1 + s2 > 0")
    inv_p = 1 / spec1.p + 1 / spec2.p
    inv_r = 1 / spec1.q + 1 / spec2.q
    if inv_p > 1 or inv_r > 1:
        raise ConfigurationError(f"1/p = {inv_p:g} and 1/r = {inv_r:g} must not exceed 1")
    p = math.inf if inv_p == 0 else 1 / inv_p
    r = math.inf if inv_r == 0 else 1 / inv_r
    if not p > 1:
        raise ConfigurationError("the combined integrability exponent must exceed 1")
    return SpaceSpec(BESOV, spec1.s + spec2.s, p, r, spec1.weight, spec1.homogeneous)


def remainder_terms(f: SpectralField, g: SpectralField, spec1: SpaceSpec, spec2: SpaceSpec,
                    partition: DyadicPartition):
    """(||R(f,g)||_{B^{s,psi}_{p,r}}, ||f||_{B^{s1,psi}_{p1,r1}} ||g||_{B^{s2}_{p2,r2}})."""
    target = remainder_specs(spec1, spec2)
    unweighted = spec2.with_(weight=UNWEIGHTED)
    return norm(remainder(f, g, partition), target, partition), \
        norm(f, spec1, partition) * norm(g, unweighted, partition)


def multiplier_terms(symbol: Symbol, f: SpectralField, spec: SpaceSpec, partition: DyadicPartition):
    """(||T_sigma f||_{F-dot^{s}}, ||f||_{F-dot^{s-a}})."""
    if spec.family != TRIEBEL or not spec.homogeneous:
        raise ConfigurationError("the multiplier estimate is stated in homogeneous Triebel-Lizorkin spaces")
    return norm(multiplier_apply(symbol, f), spec, partition), norm(f, spec.shifted(-symbol.degree), partition)


# suites -----------------------------------------------------------------------

@dataclass(frozen=True)
class SuiteConfig:
    samples: int = 20
    grid_n: int = 64
    seed: int = 0
    spec: SpaceSpec | None = None
    slope: float | None = None
    workers: int | None = None


DEFAULT_SLOPE = 2.0


def _slope(cfg: SuiteConfig, default: float = DEFAULT_SLOPE) -> float:
    return default if cfg.slope is None else cfg.slope


def _default_spec(cfg: SuiteConfig) -> SpaceSpec:
    from .spaces import parse_space

    return cfg.spec if cfg.spec is not None else parse_space("B:s=2,p=2,q=2", "log:alpha=1")


def _require_admissible(spec: SpaceSpec) -> None:
    r = embedding_exponent(spec)
    verdict = is_admissible(spec.weight, r)
    if not verdict:
        raise AdmissibilityError(f"weight {spec.weight.describe()} is not admissible for r = {r:g}: {verdict.reason}")


def _ensemble(cfg: SuiteConfig, build):
    grid = FrequencyGrid(cfg.grid_n)
    partition = build_partition(grid)
    rngs = sample_rngs(cfg.seed, cfg.samples)
    return partition, _map(lambda rng: build(grid, partition, rng), rngs, cfg.workers)


def suite_paraproduct(cfg: SuiteConfig):
    def one(grid, part, rng):
        f = ensemble_field(grid, rng, _slope(cfg))
        g = ensemble_field(grid, rng, _slope(cfg))
        return paraproduct_residual(f, g, part)

    _, res = _ensemble(cfg, one)
    lhs, rhs = zip(*res)
    # an identity residual, not a constant: excluded from resolution-sweep comparisons
    return [EstimateReport("paraproduct", lhs, rhs, cfg.grid_n, bound=1e-10, extra={"identity": True})]


def suite_leibniz(cfg: SuiteConfig):
    spec = _default_spec(cfg)
    if spec.s <= 0:
        raise ConfigurationError("the Leibniz rule needs s > 0")
    specs = {"leibniz-b": spec.with_(family=BESOV)}
    if math.isfinite(spec.p):
        specs["leibniz-tl"] = spec.with_(family=TRIEBEL)
    for s in specs.values():
        _require_admissible(s)

    def one(grid, part, rng):
        f = ensemble_field(grid, rng, _slope(cfg))
        g = ensemble_field(grid, rng, _slope(cfg))
        return [leibniz_terms(f, g, s, part) for s in specs.values()]

    _, res = _ensemble(cfg, one)
    return [EstimateReport(name, [r[k][0] for r in res], [r[k][1] for r in res], cfg.grid_n)
            for k, name in enumerate(specs)]


def _commutator_suite(cfg: SuiteConfig, family: str, prefix: str):
    spec = _default_spec(cfg).with_(family=family, homogeneous=family == TRIEBEL)
    if family == TRIEBEL and math.isinf(spec.p):
        raise ConfigurationError("the Triebel-Lizorkin commutator needs p < inf")
    configs = {f"s={spec.s:g}": spec, f"s={spec.s - 1:g}": spec.shifted(-1)}
    if family == TRIEBEL and spec.s - 1 <= 0:
        del configs[f"s={spec.s - 1:g}"]

    def one(grid, part, rng):
        u, omega = _divergence_free(grid, rng, _slope(cfg))
        return [commutator_terms(u, omega, s, part) for s in configs.values()]

    _, res = _ensemble(cfg, one)
    reports = []
    for k, tag in enumerate(configs):
        lhs = [r[k][0] for r in res]
        reports.append(EstimateReport(f"{prefix}:grad:{tag}", lhs, [r[k][1] for r in res], cfg.grid_n))
        reports.append(EstimateReport(f"{prefix}:linf:{tag}", lhs, [r[k][2] for r in res], cfg.grid_n))
    return reports


def suite_commutator_b(cfg: SuiteConfig):
    return _commutator_suite(cfg, BESOV, "commutator-b")


def suite_commutator_tl(cfg: SuiteConfig):
    return _commutator_suite(cfg, TRIEBEL, "commutator-tl")


def suite_remainder(cfg: SuiteConfig):
    """f in B^{s/2,psi}_{p,q}, g in B^{s/2}_{inf,inf}: the target is the configured space."""
    spec = _default_spec(cfg).with_(family=BESOV)
    spec1 = spec.with_(s=spec.s / 2)
    spec2 = SpaceSpec(BESOV, spec.s / 2, math.inf, math.inf)

    def one(grid, part, rng):
        return remainder_terms(ensemble_field(grid, rng, _slope(cfg)), ensemble_field(grid, rng, _slope(cfg)),
                               spec1, spec2, part)

    _, res = _ensemble(cfg, one)
    lhs, rhs = zip(*res)
    return [EstimateReport("remainder", lhs, rhs, cfg.grid_n)]


MULTIPLIERS = ("riesz_12", "riesz_11", "grad_invlap_div", "biot_savart")


def suite_multiplier(cfg: SuiteConfig):
    spec = _default_spec(cfg).with_(family=TRIEBEL, homogeneous=True)
    if math.isinf(spec.p):
        raise ConfigurationError("the multiplier estimate needs p < inf")
    symbols = [parse_symbol(s) for s in MULTIPLIERS]

    def one(grid, part, rng):
        f = ensemble_field(grid, rng, _slope(cfg))
        return [multiplier_terms(sym, f, spec, part) for sym in symbols]

    _, res = _ensemble(cfg, one)
    return [EstimateReport(f"multiplier:{sym.label()}", [r[k][0] for r in res], [r[k][1] for r in res], cfg.grid_n)
            for k, sym in enumerate(symbols)]


def suite_maximal(cfg: SuiteConfig):
    spec = _default_spec(cfg)
    p = spec.p if math.isfinite(spec.p) else 2.0

    def one(grid, part, rng):
        f = ensemble_field(grid, rng, _slope(cfg))
        ratio, A = convolution_majorant_check(f, part)
        family = [f.with_coeffs(part.table(j) * f.coeffs) for j in part.bands]
        return ratio, A, *fefferman_stein(family, p, spec.q)

    _, res = _ensemble(cfg, one)
    conv = EstimateReport("maximal:convolution", [r[0] for r in res], [r[1] for r in res], cfg.grid_n, bound=1.0)
    fs = EstimateReport("maximal:fefferman-stein", [r[2] for r in res], [r[3] for r in res], cfg.grid_n)
    return [conv, fs]


def suite_embedding(cfg: SuiteConfig):
    """The right side sees more regularity than the left, so on rough fields the ratio
    only tracks how fast ||f||_X diverges with n.  The default ensemble (slope s + 2)
    keeps both norms bounded as n grows."""
    spec = _default_spec(cfg)
    _require_admissible(spec)
    slope = _slope(cfg, spec.s + 2)

    def one(grid, part, rng):
        lhs, rhs, _ = verify_embedding(ensemble_field(grid, rng, slope), spec, part)
        return lhs, rhs

    _, res = _ensemble(cfg, one)
    lhs, rhs = zip(*res)
    rep = EstimateReport("embedding", lhs, rhs, cfg.grid_n, bound=1.0)
    rep.extra["slope"] = slope
    return [rep]


def suite_bernstein(cfg: SuiteConfig):
    """First-derivative Bernstein ratios max_a ||d_a Delta_j f||_p / (2^j ||Delta_j f||_p) over clean bands."""
    spec = _default_spec(cfg)
    p = spec.p

    def one(grid, part, rng):
        f = ensemble_field(grid, rng, _slope(cfg))
        bands = [j for j in part.clean_bands if j >= 0]
        tops, bases = [], []
        for j in bands:
            block = f.with_coeffs(part.table(j) * f.coeffs)
            tops.append(max(lp_norm(deriv(block, a).physical(), p) for a in range(2)))
            bases.append(2.0**j * lp_norm(block.physical(), p))
        return np.array(tops), np.array(bases)

    _, res = _ensemble(cfg, one)
    ratios = np.array([t / b for t, b in res])
    worst = ratios.argmax(axis=1)
    lhs = [t[k] for (t, _), k in zip(res, worst)]
    rhs = [b[k] for (_, b), k in zip(res, worst)]
    rep = EstimateReport("bernstein", lhs, rhs, cfg.grid_n)
    rep.extra["band_ratios"] = ratios
    return [rep]


SUITES = {
    "paraproduct": suite_paraproduct,
    "leibniz": suite_leibniz,
    "commutator-b": suite_commutator_b,
    "commutator-tl": suite_commutator_tl,
    "remainder": suite_remainder,
    "multiplier": suite_multiplier,
    "maximal": suite_maximal,
    "embedding": suite_embedding,
    "bernstein": suite_bernstein,
}

SWEEP_GRIDS = (64, 128, 256)


def run_suite(name: str, cfg: SuiteConfig, sweep=None) -> list:
    """Run a suite at ``cfg.grid_n``; with ``sweep`` also record the constant at each listed grid."""
    try:
        fn = SUITES[name]
    except KeyError:
        raise ConfigurationError(f"unknown suite {name!r}; choose from {', '.join(SUITES)}") from None
    reports = fn(cfg)
    if sweep:
        by_id = {r.estimate_id: r for r in reports}
        for n in sweep:
            others = reports if n == cfg.grid_n else fn(replace(cfg, grid_n=n))
            for o in others:
                by_id[o.estimate_id].resolution_sweep[n] = o.empirical_constant
                if o is not by_id[o.estimate_id] and o.violations:
                    by_id[o.estimate_id].extra.setdefault("sweep_violations", {})[n] = o.violations
    return reports
