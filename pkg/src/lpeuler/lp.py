"""Periodic grids, spectral fields and the dyadic Littlewood-Paley partition.

Fields live on the torus [0, l)^2 sampled at n x n points.  Coefficients are
stored in the full ``numpy.fft.fft2`` layout with ``norm="forward"``, so a
coefficient is the Fourier-series amplitude of its mode and zero-padding
to a finer grid preserves physical values.  Axis -2 is x, axis -1 is y.

Lebesgue norms use the normalized measure (averages over the torus), so
``||1||_{L^p} = 1`` for every p.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft


class GridError(ValueError):
    pass


class BandRangeError(IndexError):
    pass


def _fft(values):
    return sfft.fft2(values, norm="forward")


def _ifft(coeffs):
    return sfft.ifft2(coeffs, norm="forward")


def _irfft(coeffs):
    """Physical samples of a Hermitian coefficient array."""
    n = coeffs.shape[-1]
    return sfft.irfft2(coeffs[..., : n // 2 + 1], s=(n, n), norm="forward")


@dataclass(frozen=True)
class FrequencyGrid:
    n: int
    l: float = 2 * math.pi

    def __post_init__(self):
        if self.n < 16 or self.n & (self.n - 1):
            raise GridError(f"n must be a power of two >= 16, got {self.n}")
        if not self.l > 0:
            raise GridError(f"domain period must be positive, got {self.l}")

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavenumbers in fft order."""
        return np.fft.fftfreq(self.n, d=1.0 / self.n).astype(int)

    @cached_property
    def k1(self) -> np.ndarray:
        return np.broadcast_to(self.k[:, None], (self.n, self.n))

    @cached_property
    def k2(self) -> np.ndarray:
        return np.broadcast_to(self.k[None, :], (self.n, self.n))

    @property
    def unit(self) -> float:
        """Spacing 2 pi / l between neighbouring wavenumbers."""
        return 2 * math.pi / self.l

    @cached_property
    def xi(self) -> tuple[np.ndarray, np.ndarray]:
        return self.k1 * self.unit, self.k2 * self.unit

    @cached_property
    def xi_abs(self) -> np.ndarray:
        x1, x2 = self.xi
        return np.hypot(x1, x2)

    @cached_property
    def inv_lap(self) -> np.ndarray:
        """Symbol of (-Lap)^{-1} with the zero mode mapped to 0."""
        k2 = self.xi_abs**2
        return np.where(k2 > 0, 1.0 / np.where(k2 > 0, k2, 1.0), 0.0)

    @cached_property
    def biot_savart_symbol(self) -> np.ndarray:
        """Multipliers taking omega-hat to (u1-hat, u2-hat); Nyquist modes zeroed."""
        x1, x2 = self.xi
        ok = ~self.nyquist
        return np.stack([np.where(ok, 1j * x2, 0), np.where(ok, -1j * x1, 0)]) * self.inv_lap

    @cached_property
    def nyquist(self) -> np.ndarray:
        return (self.k1 == -self.n // 2) | (self.k2 == -self.n // 2)

    @property
    def kmax(self) -> int:
        """Largest retained integer wavenumber per axis (2/3 rule)."""
        return (self.n - 1) // 3

    @cached_property
    def retained(self) -> np.ndarray:
        return (np.abs(self.k1) <= self.kmax) & (np.abs(self.k2) <= self.kmax)

    @property
    def dx(self) -> float:
        return self.l / self.n

    @cached_property
    def x(self) -> tuple[np.ndarray, np.ndarray]:
        pts = np.arange(self.n) * self.dx
        return np.meshgrid(pts, pts, indexing="ij")

    @cached_property
    def padded_n(self) -> int:
        return 3 * self.n // 2



@dataclass(frozen=True, eq=False)
class SpectralField:
    """Real field on the periodic grid held as Fourier coefficients.

    ``coeffs`` has shape (n, n) for scalars and (c, n, n) for c components.
    """

    grid: FrequencyGrid
    coeffs: np.ndarray

    @classmethod
    def from_physical(cls, grid: FrequencyGrid, values) -> "SpectralField":
        values = np.asarray(values, dtype=float)
        if values.shape[-2:] != (grid.n, grid.n):
            raise GridError(f"expected trailing shape {(grid.n, grid.n)}, got {values.shape}")
        return cls(grid, _fft(values))

    @classmethod
    def zeros(cls, grid: FrequencyGrid, components: int = 1) -> "SpectralField":
        shape = (grid.n, grid.n) if components == 1 else (components, grid.n, grid.n)
        return cls(grid, np.zeros(shape, dtype=complex))

    @classmethod
    def stack(cls, parts) -> "SpectralField":
        parts = list(parts)
        return cls(parts[0].grid, np.stack([p.coeffs for p in parts]))

    @property
    def components(self) -> int:
        return 1 if self.coeffs.ndim == 2 else self.coeffs.shape[0]

    @property
    def is_vector(self) -> bool:
        return self.coeffs.ndim == 3

    def __getitem__(self, i) -> "SpectralField":
        if not self.is_vector:
            raise TypeError("scalar field has no components")
        return SpectralField(self.grid, self.coeffs[i])

    def parts(self):
        return [self] if not self.is_vector else [self[i] for i in range(self.components)]

    def physical(self) -> np.ndarray:
        return _irfft(self.coeffs)

    def imag_defect(self) -> float:
        """Largest imaginary part in physical space relative to the field size."""
        z = _ifft(self.coeffs)
        scale = max(float(np.max(np.abs(z.real))), 1e-300)
        return float(np.max(np.abs(z.imag))) / scale

    def mean(self):
        return self.coeffs[..., 0, 0].real

    def with_coeffs(self, coeffs) -> "SpectralField":
        return SpectralField(self.grid, coeffs)

    def __add__(self, other):
        return self.with_coeffs(self.coeffs + other.coeffs)

    def __sub__(self, other):
        return self.with_coeffs(self.coeffs - other.coeffs)

    def __neg__(self):
        return self.with_coeffs(-self.coeffs)

    def __mul__(self, c):
        return self.with_coeffs(self.coeffs * c)

    __rmul__ = __mul__

    def dealiased(self) -> "SpectralField":
        return self.with_coeffs(np.where(self.grid.retained, self.coeffs, 0))


def lp_norm(values, p: float) -> float:
    """Normalized L^p norm of physical samples; vector arrays use the pointwise Euclidean length."""
    a = np.abs(values)
    if a.ndim == 3:
        a = np.sqrt(np.sum(a**2, axis=0))
    if math.isinf(p):
        return float(np.max(a))
    return float(np.mean(a**p) ** (1.0 / p))


def deriv(f: SpectralField, axis: int) -> SpectralField:
    """Spectral partial derivative; the Nyquist row/column is zeroed."""
    sym = 1j * f.grid.xi[axis]
    return f.with_coeffs(np.where(f.grid.nyquist, 0, sym * f.coeffs))


def grad(f: SpectralField) -> SpectralField:
    """Gradient of a scalar (2 components) or of a vector field (component-major, 2c entries)."""
    out = [deriv(part, a) for part in f.parts() for a in range(2)]
    return SpectralField.stack(out)


def derivative(f: SpectralField, alpha) -> SpectralField:
    a1, a2 = alpha
    sym = (1j * f.grid.xi[0]) ** a1 * (1j * f.grid.xi[1]) ** a2
    if a1 + a2 > 0:
        sym = np.where(f.grid.nyquist, 0, sym)
    return f.with_coeffs(sym * f.coeffs)


def pad(coeffs: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Half-spectrum (rfft layout) of the field on the 3/2-padded grid; Nyquist modes dropped."""
    m, h = grid.padded_n, grid.n // 2
    out = np.zeros(coeffs.shape[:-2] + (m, m // 2 + 1), dtype=complex)
    out[..., :h, :h] = coeffs[..., :h, :h]
    out[..., m - h + 1:, :h] = coeffs[..., h + 1:, :h]
    return out


def unpad(half: np.ndarray, grid: FrequencyGrid) -> np.ndarray:
    """Full n-grid coefficients from a padded half spectrum, using Hermitian symmetry."""
    n, m, h = grid.n, grid.padded_n, grid.n // 2
    out = np.zeros(half.shape[:-2] + (n, n), dtype=complex)
    out[..., :h, :h] = half[..., :h, :h]
    out[..., h + 1:, :h] = half[..., m - h + 1:, :h]
    pos = out[..., :, 1:h]
    mirrored = np.roll(pos[..., ::-1, :], 1, axis=-2)
    out[..., :, h + 1:] = np.conj(mirrored[..., :, ::-1])
    return out


def padded_physical(f: SpectralField) -> np.ndarray:
    m = f.grid.padded_n
    return sfft.irfft2(pad(f.coeffs, f.grid), s=(m, m), norm="forward")


def from_padded_physical(grid: FrequencyGrid, values) -> SpectralField:
    return SpectralField(grid, unpad(sfft.rfft2(values, norm="forward"), grid))


def product(f: SpectralField, g: SpectralField) -> SpectralField:
    """Pointwise product formed on the 3/2-padded grid.

    Exact on every mode |k| < n/2 of the n-grid; scalar times vector broadcasts.
    """
    return from_padded_physical(f.grid, padded_physical(f) * padded_physical(g))


def dot_grad(u: SpectralField, f: SpectralField) -> SpectralField:
    """(u . grad) f for a vector u and a scalar or vector f."""
    uu = padded_physical(u)
    total = 0.0
    for a in range(2):
        total = total + uu[a] * padded_physical(deriv(f, a))
    return from_padded_physical(u.grid, total)


def random_field(grid: FrequencyGrid, rng, slope: float = 2.0, components: int = 1,
                 mean_zero: bool = True, kcut: float | None = None) -> SpectralField:
    """Band-limited random field with amplitudes ~ |xi|^-slope and random phases.

    Supported on the retained (dealiased) modes, optionally on |k| <= kcut.
    Normalized so the largest absolute physical value of each component is 1.
    """
    parts = []
    for _ in range(components):
        noise = _fft(rng.standard_normal((grid.n, grid.n)))
        mag = np.where(grid.xi_abs > 0, grid.xi_abs, 1.0) ** (-slope)
        mask = grid.retained & ~grid.nyquist
        if kcut is not None:
            mask &= np.hypot(grid.k1, grid.k2) <= kcut
        c = np.where(mask, noise * mag, 0)
        if mean_zero:
            c[0, 0] = 0
        f = SpectralField(grid, c)
        amp = float(np.max(np.abs(f.physical())))
        parts.append(f * (1.0 / amp) if amp > 0 else f)
    return parts[0] if components == 1 else SpectralField.stack(parts)


def _theta(r, r0: float, r1: float):
    """C-infinity radial cutoff: 1 on [0, r0], 0 on [r1, inf), smooth monotone glue."""
    x = np.clip((r1 - np.asarray(r, dtype=float)) / (r1 - r0), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(x > 0, np.exp(-1.0 / np.where(x > 0, x, 1.0)), 0.0)
        b = np.where(x < 1, np.exp(-1.0 / np.where(x < 1, 1.0 - x, 1.0)), 0.0)
    return a / (a + b)


INNER = 3.0 / 5.0
OUTER = 5.0 / 3.0
BALL = 5.0 / 6.0


def chi_hat(r):
    """Low-frequency profile: equals 1 for r <= 3/5, supported in r < 5/6."""
    return _theta(r, INNER, BALL)


def phi_hat(r):
    """Annulus profile chi_hat(r/2) - chi_hat(r), supported in (3/5, 5/3)."""
    r = np.asarray(r, dtype=float)
    return chi_hat(r / 2.0) - chi_hat(r)


class DyadicPartition:
    """Band multipliers on a grid.

    Inhomogeneous blocks run over j = -1 .. j_max (j = -1 is the chi block,
    which holds the mean).  Homogeneous blocks run over j_min .. j_max and
    never touch the zero mode.
    """

    def __init__(self, grid: FrequencyGrid):
        self.grid = grid
        r = grid.xi_abs
        ret = grid.retained
        rmax = float(np.max(r[ret]))
        self.j_max = int(math.floor(math.log2(rmax / INNER)))
        # keep the open annulus condition 2^j * 3/5 < rmax
        while 2.0**self.j_max * INNER >= rmax:
            self.j_max -= 1
        self.j_min = int(math.ceil(math.log2(grid.unit / OUTER)))
        # smallest j whose annulus reaches the first nonzero shell
        while 2.0 ** (self.j_min - 1) * OUTER > grid.unit:
            self.j_min -= 1
        if self.j_max < 1:
            raise GridError(f"grid n={grid.n} hosts fewer than 3 bands")
        edge = (grid.kmax + 1) * grid.unit
        self.clean_max = max(j for j in range(-1, self.j_max + 1) if 2.0**j * OUTER <= edge or j == -1)
        self._tables: dict = {}

    def __repr__(self):
        return f"DyadicPartition(n={self.grid.n}, j_min={self.j_min}, j_max={self.j_max})"

    @property
    def bands(self) -> range:
        return range(-1, self.j_max + 1)

    @property
    def homogeneous_bands(self) -> range:
        return range(self.j_min, self.j_max + 1)

    @property
    def clean_bands(self) -> range:
        """Inhomogeneous bands whose annulus lies wholly inside the retained square."""
        return range(-1, self.clean_max + 1)

    def _cached(self, key, build):
        table = self._tables.get(key)
        if table is None:
            table = build()
            table.setflags(write=False)
            self._tables[key] = table
        return table

    def table(self, j: int, homogeneous: bool = False) -> np.ndarray:
        lo = self.j_min if homogeneous else -1
        if not lo <= j <= self.j_max:
            raise BandRangeError(f"band {j} outside [{lo}, {self.j_max}]")
        r = self.grid.xi_abs
        if j == -1 and not homogeneous:
            return self._cached(("chi",), lambda: chi_hat(r))
        return self._cached(("phi", j), lambda: phi_hat(r * 2.0 ** (-j)))

    def low_table(self, n: int, homogeneous: bool = False) -> np.ndarray:
        """Multiplier of S_n (sum of blocks up to and including n)."""
        if homogeneous:
            def build():
                out = np.zeros_like(self.grid.xi_abs)
                for j in range(self.j_min, min(n, self.j_max) + 1):
                    out = out + self.table(j, True)
                return out
            return self._cached(("Sdot", n), build)
        if n < -1:
            return self._cached(("zero",), lambda: np.zeros_like(self.grid.xi_abs))
        return self._cached(("S", n), lambda: chi_hat(self.grid.xi_abs * 2.0 ** (-n - 1)))

    def fattened_table(self, j: int) -> np.ndarray:
        def build():
            out = np.zeros_like(self.grid.xi_abs)
            for i in (j - 1, j, j + 1):
                if -1 <= i <= self.j_max:
                    out = out + self.table(i)
            return out
        return self._cached(("fat", j), build)


def build_partition(grid: FrequencyGrid) -> DyadicPartition:
    return DyadicPartition(grid)


def delta_j(f: SpectralField, j: int, partition: DyadicPartition) -> SpectralField:
    return f.with_coeffs(partition.table(j) * f.coeffs)


def delta_j_homogeneous(f: SpectralField, j: int, partition: DyadicPartition) -> SpectralField:
    return f.with_coeffs(partition.table(j, homogeneous=True) * f.coeffs)


def fattened_delta_j(f: SpectralField, j: int, partition: DyadicPartition) -> SpectralField:
    return f.with_coeffs(partition.fattened_table(j) * f.coeffs)


def low_freq_block(f: SpectralField, partition: DyadicPartition) -> SpectralField:
    return delta_j(f, -1, partition)


def s_n(f: SpectralField, n: int, partition: DyadicPartition, homogeneous: bool = False) -> SpectralField:
    return f.with_coeffs(partition.low_table(n, homogeneous) * f.coeffs)


def bernstein_ratio(f: SpectralField, j: int, k: int, p: float, b: float,
                    partition: DyadicPartition) -> float:
    """sup_{|alpha|=k} ||d^alpha Delta_j f||_b / (2^{j(k + 2(1/p - 1/b))} ||Delta_j f||_p)."""
    if b < p:
        raise ValueError("Bernstein ratio needs b >= p")
    block = delta_j(f, j, partition)
    base = lp_norm(block.physical(), p)
    if base == 0:
        raise ZeroDivisionError(f"band {j} of the field is empty")
    inv_p = 0.0 if math.isinf(p) else 1.0 / p
    inv_b = 0.0 if math.isinf(b) else 1.0 / b
    top = max(lp_norm(derivative(block, (a, k - a)).physical(), b) for a in range(k + 1))
    return top / (2.0 ** (j * (k + 2 * (inv_p - inv_b))) * base)
