"""Slowly varying weights psi and their admissibility classes M_r.

A weight enters every generalized norm through the dyadic factor
``2**(j*s) * psi(2**j)``.  Two families are supported: the closed form
``log**alpha(e + t) - 1`` and a piecewise-linear table read from CSV.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import integrate


class WeightError(ValueError):
    """Raised for invalid weights or out-of-domain evaluations."""


class AdmissibilityError(WeightError):
    """Raised when a weight is not in the class M_r required by a caller."""


@dataclass(frozen=True)
class SlowlyVaryingWeight:
    family: str
    alpha: float = 1.0
    table: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.family == "log_power":
            if not self.alpha > 0:
                raise WeightError(f"alpha must be positive, got {self.alpha}")
        elif self.family == "tabulated":
            _check_table(self.table)
        else:
            raise WeightError(f"unknown weight family {self.family!r}")

    @classmethod
    def log_power(cls, alpha: float) -> "SlowlyVaryingWeight":
        return cls("log_power", alpha=float(alpha))

    @classmethod
    def tabulated(cls, t, psi) -> "SlowlyVaryingWeight":
        pairs = tuple((float(a), float(b)) for a, b in zip(t, psi))
        return cls("tabulated", alpha=0.0, table=pairs)

    @classmethod
    def constant(cls, value: float) -> "SlowlyVaryingWeight":
        return cls.tabulated([0.0, 1.0], [value, value])

    def __call__(self, t):
        return evaluate(self, t)

    def describe(self) -> str:
        if self.family == "log_power":
            a = repr(self.alpha)
            return f"log:alpha={a[:-2] if a.endswith('.0') else a}"
        return f"table:{len(self.table)} points"


def _check_table(table) -> None:
    if table is None or len(table) < 2:
        raise WeightError("tabulated weight needs at least two (t, psi) rows")
    t = np.array([row[0] for row in table])
    psi = np.array([row[1] for row in table])
    if t[0] != 0.0:
        raise WeightError("tabulated weight must start at t = 0")
    if np.any(np.diff(t) <= 0):
        raise WeightError("tabulated t values must be strictly increasing")
    if np.any(psi < 0) or not np.all(np.isfinite(psi)):
        raise WeightError("tabulated psi values must be finite and non-negative")
    # oscillatory weights are outside M_r: reject at construction
    if np.any(np.diff(psi) < 0):
        raise WeightError("tabulated psi must be non-decreasing")


def evaluate(w: SlowlyVaryingWeight, t):
    """Return psi(t); scalar in, float out; array in, array out."""
    arr = np.asarray(t, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise WeightError("psi is only defined for t >= 0")
    if w.family == "log_power":
        out = np.log(math.e + arr) ** w.alpha - 1.0
    else:
        ts = np.array([row[0] for row in w.table])
        ps = np.array([row[1] for row in w.table])
        # beyond the table the last value is held
        out = np.interp(arr, ts, ps)
    if np.ndim(out) == 0:
        return float(out)
    return out


def parse_weight(text: str) -> SlowlyVaryingWeight:
    """Parse ``log:alpha=<float>`` or ``table:<path>``."""
    text = text.strip()
    if text.startswith("log:"):
        key, _, value = text[4:].partition("=")
        if key.strip() != "alpha" or not value:
            raise WeightError(f"bad weight spec {text!r}; expected log:alpha=<float>")
        try:
            return SlowlyVaryingWeight.log_power(float(value))
        except ValueError as exc:
            raise WeightError(f"bad alpha in {text!r}") from exc
    if text.startswith("table:"):
        return read_weight_table(text[6:])
    raise WeightError(f"bad weight spec {text!r}")


def read_weight_table(path) -> SlowlyVaryingWeight:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["t", "psi"]:
            raise WeightError(f"{path}: header must be 't,psi'")
        rows = [(float(r["t"]), float(r["psi"])) for r in reader]
    return SlowlyVaryingWeight("tabulated", alpha=0.0, table=tuple(rows))


def write_weight_table(path, t, psi) -> None:
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "psi"])
        for a, b in zip(t, psi):
            writer.writerow([repr(float(a)), repr(float(b))])


def slow_variation_defect(w: SlowlyVaryingWeight, lam: float, t_grid) -> np.ndarray:
    """|psi(lam t)/psi(t) - 1| on each grid point."""
    if not lam > 0:
        raise WeightError("lambda must be positive")
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 1):
        raise WeightError("slow-variation grid must lie in [1, inf)")
    base = np.asarray(evaluate(w, t))
    if np.any(base == 0):
        raise WeightError("psi vanishes on the grid; ratio undefined")
    if lam == 1:
        return np.zeros_like(t)
    return np.abs(np.asarray(evaluate(w, lam * t)) / base - 1.0)


@dataclass(frozen=True)
class KaramataRepresentation:
    """psi(t) = c(t) exp(int_a^t eps(s)/s ds)."""

    a: float
    c_limit: float
    c_of_t: Callable[[float], float] = field(compare=False)
    eps_of_t: Callable[[float], float] = field(compare=False)


def paper_karamata(w: SlowlyVaryingWeight) -> KaramataRepresentation:
    """The textbook parameters for the log family: eps(s) = alpha/log(e+s), a = e-1, c = 1.

    With a constant c these reproduce psi only up to a factor that settles to
    a constant as t grows; see :func:`exact_karamata` for a pointwise match.
    """
    if w.family != "log_power":
        raise WeightError("closed-form representation exists only for log_power")
    alpha = w.alpha
    return KaramataRepresentation(
        a=math.e - 1.0,
        c_limit=1.0,
        c_of_t=lambda t: 1.0,
        eps_of_t=lambda s: alpha / math.log(math.e + s),
    )


def exact_karamata(w: SlowlyVaryingWeight) -> KaramataRepresentation:
    """Representation with c = 1 and eps = s psi'(s)/psi(s), anchored where psi(a) = 1."""
    if w.family != "log_power":
        raise WeightError("closed-form representation exists only for log_power")
    alpha = w.alpha
    a = math.exp(2.0 ** (1.0 / alpha)) - math.e

    def eps(s):
        lg = math.log(math.e + s)
        return alpha * s * lg ** (alpha - 1.0) / ((math.e + s) * (lg**alpha - 1.0))

    return KaramataRepresentation(a=a, c_limit=1.0, c_of_t=lambda t: 1.0, eps_of_t=eps)


def karamata_reconstruct(rep: KaramataRepresentation, t: float, rtol: float = 1e-12) -> float:
    if t < rep.a:
        raise WeightError(f"t = {t} lies below the anchor a = {rep.a}")
    if t == rep.a:
        return float(rep.c_of_t(t))
    # integrate in log s: eps(s)/s ds = eps(e^x) dx
    lo, hi = math.log(rep.a), math.log(t)
    value, err, info = _quad(lambda x: rep.eps_of_t(math.exp(x)), lo, hi, rtol)
    return float(rep.c_of_t(t)) * math.exp(value)


def _quad(func, lo, hi, rtol):
    value, err, info = integrate.quad(func, lo, hi, epsabs=0.0, epsrel=rtol, limit=500, full_output=1)[:3]
    if err > max(rtol * abs(value), 1e-300) * 10:
        raise ArithmeticError(f"quadrature did not converge (estimate {value}, error {err})")
    return value, err, info


@dataclass(frozen=True)
class AdmissibilityIntegral:
    partial_integral: float
    dyadic_sum: float
    divergent: bool

    @property
    def ratio(self) -> float:
        return self.dyadic_sum / self.partial_integral


def _psi_exp(w: SlowlyVaryingWeight, x: float) -> float:
    """psi(e^x) without overflowing for large x."""
    if w.family == "log_power":
        return (x + math.log1p(math.exp(1.0 - x))) ** w.alpha - 1.0 if x > 1 else evaluate(w, math.exp(x))
    return evaluate(w, math.exp(min(x, 700.0)))


def admissibility_integral(w: SlowlyVaryingWeight, r: float, t_max: float) -> AdmissibilityIntegral:
    """Quadrature of int_1^t_max dt/(t psi^r) and the dyadic proxy sum_{1 <= 2^j <= t_max} psi^-r(2^j)."""
    if r < 1:
        raise WeightError("r must be >= 1")
    if t_max < 2:
        raise WeightError("t_max must be >= 2")
    if evaluate(w, 1.0) <= 0:
        return AdmissibilityIntegral(math.inf, math.inf, True)
    # substitution t = e^x turns the integrand into psi(e^x)^-r
    upper = math.log(t_max)
    breaks = np.linspace(0.0, upper, max(2, int(upper) + 1))
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        value, err = integrate.quad(lambda x: _psi_exp(w, x) ** (-r), lo, hi,
                                    epsabs=0.0, epsrel=1e-10, limit=200)
        total += value
    js = np.arange(0, int(math.floor(math.log2(t_max))) + 1)
    dyadic = float(np.sum(np.asarray(evaluate(w, 2.0**js)) ** (-r)))
    return AdmissibilityIntegral(total, dyadic, False)


def dyadic_tail_bound(w: SlowlyVaryingWeight, r: float, j: int) -> float:
    """Upper bound for sum_{i > j} psi^-r(2^i), valid for non-decreasing psi.

    Equals int_j^inf psi^-r(2^x) dx; infinite when the integral diverges.
    """
    lo = j * math.log(2.0)
    if w.family == "tabulated":
        # the held last value makes every tail diverge
        return math.inf
    # psi(e^x)^-r ~ x^(-alpha r): convergent iff alpha r > 1
    if w.alpha * r <= 1:
        return math.inf
    value, err = integrate.quad(lambda x: _psi_exp(w, x) ** (-r), lo, math.inf,
                                epsabs=0.0, epsrel=1e-9, limit=500)
    return value / math.log(2.0)


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    monotone: bool
    empirical: bool
    reason: str
    tail_exponent: float | None = None

    def __bool__(self):
        return self.admissible


def is_monotone(w: SlowlyVaryingWeight, t_grid=None) -> bool:
    t = np.geomspace(1e-3, 1e12, 400) if t_grid is None else np.asarray(t_grid, dtype=float)
    t = np.concatenate([[0.0], t])
    vals = np.asarray(evaluate(w, t))
    return bool(np.all(np.diff(vals) >= -1e-14 * np.maximum(1.0, np.abs(vals[1:]))))


def is_admissible(w: SlowlyVaryingWeight, r: float) -> Admissibility:
    """Decide psi in M_r.  Exact for log_power, an empirical tail test for tables."""
    monotone = is_monotone(w)
    if not monotone:
        return Admissibility(False, False, False, "psi is not non-decreasing")
    if math.isinf(r):
        # M_inf only needs psi bounded below at infinity
        ok = evaluate(w, 1.0) > 0
        return Admissibility(ok, True, w.family == "tabulated", "r = inf: psi(1) > 0 suffices")
    if w.family == "log_power":
        ok = w.alpha > 1.0 / r
        reason = f"alpha = {w.alpha:g} {'>' if ok else '<='} 1/r = {1.0 / r:g}"
        return Admissibility(ok, True, False, reason)

    t_last = w.table[-1][0]
    js = np.arange(0, int(math.floor(math.log2(t_last))) + 1) if t_last >= 2 else np.array([], dtype=int)
    if len(js) < 4:
        return Admissibility(False, True, True, "table range too short for a tail test")
    terms = np.asarray(evaluate(w, 2.0**js)) ** (-r)
    if not np.all(np.isfinite(terms)):
        return Admissibility(False, True, True, "psi vanishes on the dyadic grid")
    # local decay exponents overshoot the asymptotic one, so fit only the last quarter
    tail = js >= js[(3 * len(js)) // 4]
    x = np.log(js[tail] + 1.0)
    slope = np.polyfit(x, np.log(terms[tail]), 1)[0]
    beta = -float(slope)
    ok = beta > 1.0
    return Admissibility(ok, True, True,
                         f"empirical: dyadic terms decay like j^-{beta:.3g} over the table range",
                         tail_exponent=beta)


def require_admissible(w: SlowlyVaryingWeight, r: float) -> None:
    verdict = is_admissible(w, r)
    if not verdict:
        raise AdmissibilityError(f"weight {w.describe()} is not in M_{r:g}: {verdict.reason}")


def dyadic_constant(w: SlowlyVaryingWeight, l: int, j_range) -> float:
    """Measured C_{l,psi} = max psi(2^(j+l))/psi(2^j) over the given j range."""
    js = np.asarray(list(j_range), dtype=float)
    lo = np.asarray(evaluate(w, 2.0**js))
    hi = np.asarray(evaluate(w, 2.0 ** (js + l)))
    return float(np.max(hi / lo))
