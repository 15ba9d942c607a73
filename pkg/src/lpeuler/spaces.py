"""Generalized Besov / Triebel-Lizorkin norms and the embedding checks."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .lp import (DyadicPartition, SpectralField, chi_hat, delta_j, delta_j_homogeneous, grad, lp_norm, phi_hat)
from .weights import (AdmissibilityError, SlowlyVaryingWeight, dyadic_tail_bound, evaluate,
                      is_admissible, parse_weight)

BESOV = "besov"
TRIEBEL = "triebel"

UNWEIGHTED = SlowlyVaryingWeight.constant(1.0)


class SpaceError(ValueError):
    pass


def conjugate(x: float) -> float:
    if x == 1:
        return math.inf
    if math.isinf(x):
        return 1.0
    return x / (x - 1.0)


@dataclass(frozen=True)
class SpaceSpec:
    family: str
    s: float
    p: float
    q: float
    weight: SlowlyVaryingWeight = UNWEIGHTED
    homogeneous: bool = False

    def __post_init__(self):
        if self.family not in (BESOV, TRIEBEL):
            raise SpaceError(f"unknown family {self.family!r}")
        if not self.p > 1:
            raise SpaceError(f"p must lie in (1, inf], got {self.p}")
        if not self.q >= 1:
            raise SpaceError(f"q must lie in [1, inf], got {self.q}")
        if self.family == TRIEBEL and math.isinf(self.p):
            raise SpaceError("Triebel-Lizorkin norms need p < inf")

    @property
    def p_conj(self) -> float:
        return conjugate(self.p)

    @property
    def q_conj(self) -> float:
        return conjugate(self.q)

    def shifted(self, ds: float) -> "SpaceSpec":
        return replace(self, s=self.s + ds)

    def with_(self, **kw) -> "SpaceSpec":
        return replace(self, **kw)

    def label(self) -> str:
        head = "B" if self.family == BESOV else "F"
        hom = ",hom" if self.homogeneous else ""
        return f"{head}:s={self.s:g},p={self.p:g},q={self.q:g}{hom}"


def _real(text: str) -> float:
    text = text.strip().lower()
    if text in ("inf", "infinity"):
        return math.inf
    return float(text)


def parse_space(text: str, weight: SlowlyVaryingWeight | str | None = None) -> SpaceSpec:
    """Parse ``B:s=<f>,p=<f>,q=<f>[,hom]`` or the ``F:`` analogue."""
    if isinstance(weight, str):
        weight = parse_weight(weight)
    head, sep, body = text.strip().partition(":")
    families = {"B": BESOV, "F": TRIEBEL}
    if not sep or head not in families:
        raise SpaceError(f"bad space spec {text!r}")
    values, hom = {}, False
    for item in body.split(","):
        item = item.strip()
        if item == "hom":
            hom = True
            continue
        key, eq, val = item.partition("=")
        if not eq or key not in ("s", "p", "q") or key in values:
            raise SpaceError(f"bad entry {item!r} in space spec {text!r}")
        try:
            values[key] = _real(val)
        except ValueError as exc:
            raise SpaceError(f"bad number in {item!r}") from exc
    if set(values) != {"s", "p", "q"}:
        raise SpaceError(f"space spec {text!r} needs s, p and q")
    return SpaceSpec(families[head], values["s"], values["p"], values["q"],
                     weight if weight is not None else UNWEIGHTED, hom)


def band_range(spec: SpaceSpec, partition: DyadicPartition):
    bands = partition.homogeneous_bands if spec.homogeneous else partition.bands
    if len(bands) == 0:
        raise SpaceError("empty band range")
    return bands


def band_weights(spec: SpaceSpec, bands) -> np.ndarray:
    js = np.asarray(list(bands), dtype=float)
    return 2.0 ** (js * spec.s) * np.asarray(evaluate(spec.weight, 2.0**js))


def _block(f, j, spec, partition):
    if spec.homogeneous:
        return delta_j_homogeneous(f, j, partition)
    return delta_j(f, j, partition)


def lq_sum(values, q: float, axis=0):
    values = np.abs(np.asarray(values))
    if math.isinf(q):
        return np.max(values, axis=axis)
    return np.sum(values**q, axis=axis) ** (1.0 / q)


def _scalar_norm(f: SpectralField, spec: SpaceSpec, partition: DyadicPartition) -> float:
    bands = band_range(spec, partition)
    w = band_weights(spec, bands)
    if spec.family == BESOV:
        seq = [wj * lp_norm(_block(f, j, spec, partition).physical(), spec.p)
               for wj, j in zip(w, bands)]
        return float(lq_sum(seq, spec.q))
    pieces = np.stack([wj * np.abs(_block(f, j, spec, partition).physical())
                       for wj, j in zip(w, bands)])
    return lp_norm(lq_sum(pieces, spec.q), spec.p)


def norm(f: SpectralField, spec: SpaceSpec, partition: DyadicPartition) -> float:
    """Generalized Besov or Triebel-Lizorkin norm.

    Vector and tensor fields combine the per-component norms in l^2.
    """
    if f.is_vector:
        return float(math.sqrt(sum(_scalar_norm(c, spec, partition) ** 2 for c in f.parts())))
    return _scalar_norm(f, spec, partition)


def band_sequence(f: SpectralField, spec: SpaceSpec, partition: DyadicPartition) -> np.ndarray:
    """Weighted per-band L^p norms 2^{js} psi(2^j) ||Delta_j f||_p (scalar fields)."""
    bands = band_range(spec, partition)
    w = band_weights(spec, bands)
    return np.array([wj * lp_norm(_block(f, j, spec, partition).physical(), spec.p)
                     for wj, j in zip(w, bands)])


def inhomogeneous_equivalence(f: SpectralField, spec: SpaceSpec, partition: DyadicPartition):
    """(||f||_X, ||f||_{L^p} + ||f||_{X-dot})."""
    if spec.homogeneous:
        raise SpaceError("equivalence check takes an inhomogeneous spec")
    lhs = norm(f, spec, partition)
    rhs = lp_norm(f.physical(), spec.p) + norm(f, spec.with_(homogeneous=True), partition)
    return lhs, rhs


def hoelder_sum(weight: SlowlyVaryingWeight, r: float, j_max: int) -> float:
    """sum_{j=-1}^{j_max} psi(2^j)^-r."""
    js = np.arange(-1, j_max + 1, dtype=float)
    vals = np.asarray(evaluate(weight, 2.0**js))
    if np.any(vals <= 0):
        return math.inf
    if math.isinf(r):
        return float(np.max(1.0 / vals))
    return float(np.sum(vals ** (-r)))


def embedding_exponent(spec: SpaceSpec) -> float:
    return spec.q_conj if spec.family == BESOV else spec.p_conj


def embedding_constant(spec: SpaceSpec, j_max: int | None = None) -> float:
    """Hoelder constant ||(1/psi(2^j))_j||_{l^r} with r = q' (Besov) or p' (Triebel).

    With ``j_max`` the sum stops at that band (the exact constant for fields on a
    grid with that many bands).  Without it the full series is bounded by the
    partial sum to j = 60 plus an integral tail, and the weight must be admissible.
    """
    r = embedding_exponent(spec)
    if j_max is not None:
        total = hoelder_sum(spec.weight, r, j_max)
        return total if math.isinf(r) else total ** (1.0 / r)
    verdict = is_admissible(spec.weight, r)
    if not verdict:
        raise AdmissibilityError(f"weight {spec.weight.describe()} not in M_{r:g}: {verdict.reason}")
    if math.isinf(r):
        return hoelder_sum(spec.weight, r, 60)
    total = hoelder_sum(spec.weight, r, 60) + dyadic_tail_bound(spec.weight, r, 60)
    return total ** (1.0 / r)


def bernstein_factor(partition: DyadicPartition, j: int, p: float) -> float:
    """B_j with ||Delta_j f||_inf <= B_j 2^{2j/p} ||Delta_j f||_p for every grid field.

    Delta_j f equals its own convolution with the kernel of a multiplier that is
    1 on the band (the sum of the neighbouring profiles), so Young's inequality
    gives B_j = ||kernel||_{p'} 2^{-2j/p} under the normalized measure.
    """
    grid = partition.grid
    r = grid.xi_abs
    fat = sum(chi_hat(r) if i == -1 else phi_hat(r * 2.0 ** (-i)) for i in (j - 1, j, j + 1) if i >= -1)
    kernel = SpectralField(grid, fat.astype(complex)).physical()
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    return lp_norm(kernel, conjugate(p)) * 2.0 ** (-2 * j * inv_p)


def embedding_bound(spec: SpaceSpec, partition: DyadicPartition) -> float:
    """Grid constant K with ||f||_{B^{s-2/p}_{inf,1}} <= K ||f||_X.

    Bernstein per band, then Hoelder: K = ||(B_j / psi(2^j))_j||_{l^r'}.  For
    Besov r = q; a Triebel-Lizorkin norm dominates the B_{p, max(p,q)} norm, so
    r = max(p, q) there.
    """
    bands = band_range(spec, partition)
    r = spec.q if spec.family == BESOV else max(spec.p, spec.q)
    psi = np.asarray(evaluate(spec.weight, 2.0 ** np.asarray(list(bands), dtype=float)))
    factors = np.array([bernstein_factor(partition, j, spec.p) for j in bands]) / psi
    return float(lq_sum(factors, conjugate(r)))


def verify_embedding(f: SpectralField, spec: SpaceSpec, partition: DyadicPartition):
    """(lhs, rhs, ratio) for ||f||_{B^{s-2/p}_{inf,1}} <= K ||f||_{X^{s,psi}_{p,q}}, K from ``embedding_bound``."""
    r = embedding_exponent(spec)
    verdict = is_admissible(spec.weight, r)
    if not verdict:
        raise AdmissibilityError(f"weight {spec.weight.describe()} not in M_{r:g}: {verdict.reason}")
    target = SpaceSpec(BESOV, spec.s - 2.0 / spec.p, math.inf, 1.0, UNWEIGHTED, spec.homogeneous)
    lhs = norm(f, target, partition)
    rhs = embedding_bound(spec, partition) * norm(f, spec, partition)
    if lhs == 0:
        return 0.0, rhs, 0.0
    return lhs, rhs, lhs / rhs


def bkm_integrand(omega: SpectralField, partition: DyadicPartition) -> float:
    """||omega||_{B-dot^0_{inf,1}} = sum over homogeneous bands of ||Delta_j omega||_inf."""
    return float(sum(lp_norm(delta_j_homogeneous(omega, j, partition).physical(), math.inf)
                     for j in partition.homogeneous_bands))


def matrix_linf(m: np.ndarray) -> float:
    """max over x of the spectral norm of a 2x2 matrix field stored as m[2c + a] = d_a u_c."""
    a, b, c, d = m
    fro2 = a * a + b * b + c * c + d * d
    det = a * d - b * c
    disc = np.sqrt(np.maximum(fro2 * fro2 - 4 * det * det, 0.0))
    return float(np.sqrt(np.max((fro2 + disc) / 2.0)))


def grad_linf(u: SpectralField) -> float:
    return matrix_linf(grad(u).physical())


def grad_u_linf_bound_terms(omega: SpectralField, partition: DyadicPartition, p: float):
    """(||omega||_{L^p}, ||omega||_{B-dot^0_{inf,1}}, ||grad u||_inf) with u the Biot-Savart velocity."""
    from .euler import biot_savart

    u = biot_savart(omega)
    return lp_norm(omega.physical(), p), bkm_integrand(omega, partition), grad_linf(u)
