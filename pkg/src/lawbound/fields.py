"""Spectral algebra on periodic grids.

Everything here lives on the flat torus [0, 2pi)^d sampled on a uniform
lattice with n points per dimension.  Transforms use the convention

    u(x) = sum_k uhat(k) exp(i k.x),        uhat(k) = (1/n^d) * FFT(u)[k],

so Parseval reads ||u||_2^2 = (2pi)^d * sum_k |uhat(k)|^2 and the grid
quadrature L2 norm is ||u||_2^2 = (2pi/n)^d * sum_x |u(x)|^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Grid",
    "GridField",
    "SpecField",
    "DyadicCutoffs",
    "DEFAULT_CUTOFFS",
    "forward",
    "inverse",
    "l2_norm",
    "inner",
    "spec_l2_norm",
    "project_leq",
    "project_gt",
    "dyadic_block",
    "increment",
    "lattice_offsets_in_ball",
    "sobolev_norm",
    "grad_sup",
    "bernstein_ratio",
    "leray_project",
    "divergence_norm",
    "random_divfree",
    "spectrum_exponent_for_structure",
]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic lattice on the d-torus with side length 2pi."""

    d: int
    n: int

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"d must be 1 or 2, got {self.d}")
        if self.n < 8 or self.n & (self.n - 1) != 0:
            raise ValueError(f"n must be a power of two >= 8, got {self.n}")

    @property
    def spacing(self) -> float:
        return 2.0 * np.pi / self.n

    @property
    def shape(self) -> tuple:
        return (self.n,) * self.d

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.d

    @property
    def volume(self) -> float:
        return (2.0 * np.pi) ** self.d

    def axes(self, m_offset: int = 1) -> tuple:
        """FFT axes for arrays carrying a leading component axis."""
        return tuple(range(m_offset, m_offset + self.d))

    def coordinates(self):
        """Arrays of physical coordinates, shape (d, *shape)."""
        x1 = np.arange(self.n) * self.spacing
        if self.d == 1:
            return x1[None, :]
        xx, yy = np.meshgrid(x1, x1, indexing="ij")
        return np.stack([xx, yy])


@lru_cache(maxsize=None)
def _modes(d: int, n: int):
    """Integer wavevectors, shape (d, *shape), numpy FFT layout."""
    k1 = np.fft.fftfreq(n, d=1.0 / n)
    if d == 1:
        kk = k1[None, :]
    else:
        kx, ky = np.meshgrid(k1, k1, indexing="ij")
        kk = np.stack([kx, ky])
    kk.setflags(write=False)
    return kk


@lru_cache(maxsize=None)
def _mode_magnitude(d: int, n: int):
    mag = np.sqrt((_modes(d, n) ** 2).sum(axis=0))
    mag.setflags(write=False)
    return mag


@lru_cache(maxsize=None)
def _deriv_modes(d: int, n: int):
    """Wavevectors for odd-order derivatives: Nyquist rows zeroed so that
    ik-multipliers preserve Hermitian symmetry on even grids."""
    kk = np.array(_modes(d, n))
    for axis in range(d):
        sl = [slice(None)] * (d + 1)
        sl[0] = axis
        sl[axis + 1] = n // 2
        kk[tuple(sl)] = 0.0
    kk.setflags(write=False)
    return kk


@dataclass
class GridField:
    """Real field sampled on a periodic lattice; values shape (m, *grid.shape)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        expected = (self.values.shape[0],) + self.grid.shape
        if self.values.shape != expected:
            raise ValueError(
                f"values shape {self.values.shape} incompatible with grid {self.grid}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("field values must be finite")

    @property
    def m(self) -> int:
        return self.values.shape[0]

    def copy(self) -> "GridField":
        return GridField(self.grid, self.values.copy())


@dataclass
class SpecField:
    """Fourier coefficients of a real field; Hermitian-symmetric layout."""

    grid: Grid
    coef: np.ndarray

    def __post_init__(self):
        self.coef = np.asarray(self.coef, dtype=np.complex128)
        expected = (self.coef.shape[0],) + self.grid.shape
        if self.coef.shape != expected:
            raise ValueError(
                f"coef shape {self.coef.shape} incompatible with grid {self.grid}"
            )

    @property
    def m(self) -> int:
        return self.coef.shape[0]

    def copy(self) -> "SpecField":
        return SpecField(self.grid, self.coef.copy())


def forward(f: GridField) -> SpecField:
    g = f.grid
    coef = np.fft.fftn(f.values, axes=g.axes()) / (g.n**g.d)
    return SpecField(g, coef)


def inverse(F: SpecField) -> GridField:
    g = F.grid
    values = np.fft.ifftn(F.coef * (g.n**g.d), axes=g.axes()).real
    return GridField(g, values)


def l2_norm(f: GridField) -> float:
    return float(np.sqrt(f.grid.cell_volume * np.sum(f.values**2)))


def inner(f: GridField, g: GridField) -> float:
    if f.grid != g.grid:
        raise ValueError("inner product requires matching grids")
    return float(f.grid.cell_volume * np.sum(f.values * g.values))


def spec_l2_norm(F: SpecField) -> float:
    return float(np.sqrt(F.grid.volume * np.sum(np.abs(F.coef) ** 2)))


def project_leq(F: SpecField, K: float) -> SpecField:
    """Sharp Fourier projector onto Euclidean modes |k| <= K."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    mag = _mode_magnitude(F.grid.d, F.grid.n)
    return SpecField(F.grid, np.where(mag <= K, F.coef, 0.0))


def project_gt(F: SpecField, K: float) -> SpecField:
    """Complement of project_leq: modes with |k| > K."""
    if K < 1:
        raise ValueError(f"K must be >= 1, got {K}")
    mag = _mode_magnitude(F.grid.d, F.grid.n)
    return SpecField(F.grid, np.where(mag > K, F.coef, 0.0))


def _smoothstep5(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * t * (t * (6.0 * t - 15.0) + 10.0)


class DyadicCutoffs:
    """Smooth radial Littlewood-Paley cutoffs.

    chi is 1 on |xi|<=1, 0 on |xi|>=2, quintic-smoothstep in between (C^2 at
    the endpoints); phi(xi) = chi(xi) - chi(2 xi) is supported in
    {1/2 <= |xi| <= 2} and sums to 1 over dyadic dilations on every nonzero
    integer mode.
    """

    def chi(self, xi):
        xi = np.abs(np.asarray(xi, dtype=np.float64))
        return 1.0 - _smoothstep5(xi - 1.0)

    def phi(self, xi):
        xi = np.asarray(xi, dtype=np.float64)
        return self.chi(xi) - self.chi(2.0 * xi)

    def max_block_index(self, grid: Grid) -> int:
        """Largest j whose block can touch a lattice mode of the grid."""
        kmax = np.sqrt(grid.d) * (grid.n / 2)
        # support of phi(2^-j .) is 2^(j-1) <= |k| <= 2^(j+1)
        return int(np.floor(np.log2(kmax))) + 1

    def block_multiplier(self, grid: Grid, j: int) -> np.ndarray:
        mag = _mode_magnitude(grid.d, grid.n)
        if j == -1:
            # low block: remainder of the dyadic partition; on the integer
            # lattice this is exactly the mean mode
            return self.chi(2.0 * mag)
        if j < -1:
            raise ValueError(f"block index must be >= -1, got {j}")
        return self.phi(mag / 2.0**j)

    def partition_values(self, grid: Grid) -> np.ndarray:
        """sum_{j>=0} phi(2^-j k) on every lattice mode (1 except at k=0)."""
        mag = _mode_magnitude(grid.d, grid.n)
        total = np.zeros_like(mag)
        for j in range(self.max_block_index(grid) + 1):
            total += self.phi(mag / 2.0**j)
        return total

    def overlap_constants(self, grid: Grid) -> tuple:
        """(c*, C*): min and max of sum_j phi(2^-j k)^2 over lattice k != 0."""
        mag = _mode_magnitude(grid.d, grid.n)
        total = np.zeros_like(mag)
        for j in range(self.max_block_index(grid) + 1):
            total += self.phi(mag / 2.0**j) ** 2
        nz = total[mag > 0]
        return float(nz.min()), float(nz.max())


DEFAULT_CUTOFFS = DyadicCutoffs()


def dyadic_block(F: SpecField, j: int, cutoffs: DyadicCutoffs = DEFAULT_CUTOFFS) -> SpecField:
    mult = cutoffs.block_multiplier(F.grid, j)
    return SpecField(F.grid, F.coef * mult)


def lattice_offsets_in_ball(grid: Grid, r: float) -> np.ndarray:
    """Integer min-image offsets h != 0 with |h * spacing| <= r, shape (count, d)."""
    if r < grid.spacing:
        raise ValueError(
            f"radius {r} below lattice spacing {grid.spacing}: empty offset set"
        )
    jmax = int(np.floor(r / grid.spacing))
    half = grid.n // 2
    lo, hi = -half + 1, min(jmax, half)
    rng = np.arange(lo, hi + 1)
    rng = rng[np.abs(rng) <= jmax]
    if grid.d == 1:
        offs = rng[:, None]
    else:
        a, b = np.meshgrid(rng, rng, indexing="ij")
        offs = np.stack([a.ravel(), b.ravel()], axis=1)
    norms = np.sqrt((offs**2).sum(axis=1)) * grid.spacing
    keep = (norms > 0) & (norms <= r)
    return offs[keep]


def increment(f: GridField, h) -> GridField:
    """delta_h u(x) = u(x + h) - u(x) for a lattice offset h (physical units)."""
    g = f.grid
    h = np.atleast_1d(np.asarray(h, dtype=np.float64))
    if h.shape != (g.d,):
        raise ValueError(f"offset must have {g.d} components")
    steps = h / g.spacing
    rounded = np.rint(steps)
    if np.max(np.abs(steps - rounded)) > 1e-9:
        raise ValueError(f"offset {h} is not a lattice offset for spacing {g.spacing}")
    shifted = f.values
    for axis, s in enumerate(rounded.astype(int)):
        # u(x + h): sample index i picks up value at i + s
        shifted = np.roll(shifted, -s, axis=axis + 1)
    return GridField(g, shifted - f.values)


def sobolev_norm(f: GridField, s: float) -> float:
    """((2pi)^d sum (1+|k|^2)^s |uhat(k)|^2)^(1/2); s=-1 gives the H^-1 norm."""
    F = forward(f)
    mag2 = _mode_magnitude(f.grid.d, f.grid.n) ** 2
    weighted = (1.0 + mag2) ** s * np.abs(F.coef) ** 2
    return float(np.sqrt(f.grid.volume * weighted.sum()))


def _spectral_jacobian(F: SpecField) -> np.ndarray:
    """Physical-space partial derivatives, shape (m, d, *shape)."""
    g = F.grid
    kk = _deriv_modes(g.d, g.n)
    parts = []
    for a in range(g.d):
        da = np.fft.ifftn(1j * kk[a] * F.coef * (g.n**g.d), axes=g.axes()).real
        parts.append(da)
    return np.stack(parts, axis=1)


def grad_sup(f: GridField) -> float:
    """sup_x of the Frobenius norm of the Jacobian, evaluated on the lattice."""
    jac = _spectral_jacobian(forward(f))
    pointwise = np.sqrt((jac**2).sum(axis=(0, 1)))
    return float(pointwise.max())


def bernstein_ratio(f: GridField, K: float) -> float:
    """||grad f||_inf / (K^(1+d/2) ||f||_2) for a field band-limited to K."""
    F = forward(f)
    high = project_gt(F, K)
    total = spec_l2_norm(F)
    if total == 0.0:
        return 0.0
    if spec_l2_norm(high) > 1e-10 * total:
        raise ValueError(f"field is not band-limited to K={K}")
    denom = K ** (1.0 + f.grid.d / 2.0) * l2_norm(f)
    return grad_sup(f) / denom


def leray_project(F: SpecField) -> SpecField:
    """Remove the gradient part: uhat(k) <- (I - k k^T/|k|^2) uhat(k), k != 0."""
    g = F.grid
    if F.m != g.d:
        raise ValueError(f"Leray projection needs m == d, got m={F.m}, d={g.d}")
    kk = _modes(g.d, g.n)
    mag2 = (kk**2).sum(axis=0)
    safe = np.where(mag2 == 0, 1.0, mag2)
    kdotu = sum(kk[a] * F.coef[a] for a in range(g.d))
    coef = F.coef - kk * (kdotu / safe)[None]
    # k = 0 column untouched by construction (kk = 0 there)
    return SpecField(g, coef)


def divergence_norm(F: SpecField) -> float:
    """L2 norm of the spectral divergence of a velocity field."""
    g = F.grid
    if F.m != g.d:
        raise ValueError("divergence needs m == d")
    kk = _modes(g.d, g.n)
    div = sum(1j * kk[a] * F.coef[a] for a in range(g.d))
    return float(np.sqrt(g.volume * np.sum(np.abs(div) ** 2)))


def spectrum_exponent_for_structure(s: float) -> float:
    """Velocity coefficient decay exponent giving structure exponent s in 2D."""
    return 2.0 * s + 2.0


def random_divfree(grid: Grid, spectrum_exponent: float, k_max: int, seed) -> GridField:
    """Divergence-free Gaussian field with E|uhat(k)|^2 ~ |k|^(-p), 1<=|k|<=k_max.

    Built as the perpendicular gradient of a Gaussian stream function with
    E|psihat(k)|^2 ~ |k|^(-p-2).  Deterministic for a fixed seed.
    """
    if grid.d != 2:
        raise ValueError("divergence-free synthesis requires d=2 "
                         "(1D divergence-free fields are constants)")
    if not 1 <= k_max <= grid.n // 2 - 1:
        raise ValueError(f"k_max must be in [1, n/2-1], got {k_max}")
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(grid.shape)
    psi_hat = np.fft.fftn(white) / (grid.n**grid.d)
    mag = _mode_magnitude(grid.d, grid.n)
    amp = np.zeros_like(mag)
    band = (mag >= 1.0) & (mag <= k_max)
    amp[band] = mag[band] ** (-(spectrum_exponent + 2.0) / 2.0)
    psi_hat = psi_hat * amp
    kk = _deriv_modes(grid.d, grid.n)
    # u = (-d_y psi, d_x psi)
    u_hat = np.stack([-1j * kk[1] * psi_hat, 1j * kk[0] * psi_hat])
    return inverse(SpecField(grid, u_hat))
