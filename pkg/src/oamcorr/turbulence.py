"""Kolmogorov phase screens, sub-harmonics, and scintillation parameters.

Screens are synthesized by spectral filtering of white Gaussian noise: each
discrete spatial-frequency mode K receives a complex Gaussian amplitude of
variance 2 * Phi_theta(K) * dk^2, where Phi_theta(K) = 2 pi k_ref^2 dz *
Phi_n(K) is the phase PSD accumulated over one slab and dk = 2 pi / window.
The real and imaginary parts of the inverse transform are two independent
screens, each with per-mode variance Phi_theta(K) dk^2, i.e. the correct
covariance B(r) = integral d2K Phi_theta(K) exp(iK.r).

The FFT grid excludes frequencies below dk, which depresses the structure
function at large separations; sub-harmonic levels n = 1..N_s patch in the
modes at K = (p, q) dk / 3^n, p, q in {-1, 0, 1}.

Screen values are phases at the reference wavenumber k_ref; a consumer at
wavenumber k applies theta * k / k_ref, so every wavelength sees the same
refractive-index realization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TurbulenceParams",
    "PhaseScreenBase",
    "TurbulenceRealization",
    "kolmogorov_psd",
    "phase_psd",
    "generate_screen_pair",
    "add_subharmonics",
    "fried_parameter",
    "scintillation_strength",
    "solve_z_for_w",
    "solve_cn2_for_w",
    "rytov_variance",
    "plan_slabs",
    "make_realization",
    "measure_structure_function",
    "analytic_structure_function",
]

KOLMOGOROV_COEFF = 0.033
RYTOV_COEFF = 1.23
RYTOV_PER_SLAB = 0.1
FRIED_COEFF = 0.185
STRUCTURE_COEFF = 6.88


@dataclass(frozen=True)
class TurbulenceParams:
    """Path-level turbulence description.

    cn2 is the refractive-index structure constant in m^(-2/3); dispersion
    is neglected, so one reference wavelength fixes the screen phases.
    """

    cn2: float
    path_length: float
    reference_wavelength: float = 1.0e-6
    subharmonic_levels: int = 3

    def __post_init__(self):
        if self.cn2 < 0:
            raise ValueError("cn2 must be non-negative")
        if self.path_length <= 0:
            raise ValueError("path_length must be positive")
        if self.subharmonic_levels < 0:
            raise ValueError("subharmonic_levels must be >= 0")

    @property
    def reference_wavenumber(self) -> float:
        return 2.0 * np.pi / self.reference_wavelength


@dataclass(frozen=True)
class PhaseScreenBase:
    """Zero-mean random phase (radians at k_ref) for one path slab."""

    grid: "GridSpec"
    values: np.ndarray
    dz_slab: float

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape != (self.grid.n, self.grid.n):
            raise ValueError("screen shape does not match grid")
        if not np.all(np.isfinite(vals)):
            raise ValueError("screen contains non-finite values")
        if abs(vals.mean()) > 1e-6:
            raise ValueError(f"screen mean {vals.mean():.2e} exceeds 1e-6")
        vals.flags.writeable = False
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class TurbulenceRealization:
    """One frozen snapshot of the medium: ordered screens covering the path."""

    screens: tuple[PhaseScreenBase, ...]
    seed: int
    params: TurbulenceParams

    def __post_init__(self):
        if not self.screens:
            raise ValueError("realization needs at least one screen")
        total = sum(s.dz_slab for s in self.screens)
        if not math.isclose(total, self.params.path_length, rel_tol=1e-9):
            raise ValueError(
                f"slab thicknesses sum to {total}, expected {self.params.path_length}"
            )
        object.__setattr__(self, "screens", tuple(self.screens))


def kolmogorov_psd(k_mag, cn2):
    """Refractive-index PSD 0.033 * Cn^2 * |K|^(-11/3); zero at K = 0."""
    k_mag = np.asarray(k_mag, dtype=np.float64)
    out = np.zeros_like(k_mag)
    np.divide(
        KOLMOGOROV_COEFF * cn2,
        np.power(k_mag, 11.0 / 3.0, where=k_mag > 0, out=np.ones_like(k_mag)),
        where=k_mag > 0,
        out=out,
    )
    if out.ndim == 0:
        return float(out)
    return out


def phase_psd(k_mag, cn2, k_ref, dz):
    """Phase PSD for one slab: 2 pi k_ref^2 dz * Phi_n(K)."""
    return 2.0 * np.pi * k_ref**2 * dz * kolmogorov_psd(k_mag, cn2)


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


def _cell_variance(kcx, kcy, half, cn2, k_ref, dz):
    """Phase power integrated over one square spectral cell.

    The PSD varies steeply across low-frequency cells, so sampling it at
    the cell center systematically under-weights them; Gauss-Legendre
    integration keeps the ensemble structure function on the analytic
    curve (the acceptance requirement for screen statistics).
    """
    kx = kcx + half * _GAUSS_X[:, None]
    ky = kcy + half * _GAUSS_X[None, :]
    weights = (_GAUSS_W[:, None] * _GAUSS_W[None, :]) * half * half
    return float(np.sum(phase_psd(np.hypot(kx, ky), cn2, k_ref, dz) * weights))


def _subharmonic_complex(grid, params, dz_slab, rng):
    """Complex low-frequency patch; Re/Im are the two screens' shares."""
    n = grid.n
    dk = 2.0 * np.pi / grid.window
    j = np.arange(n)
    out = np.zeros((n, n), dtype=np.complex128)
    k_ref = params.reference_wavenumber
    for level in range(1, params.subharmonic_levels + 1):
        cell = dk / 3.0**level
        draws = rng.standard_normal((3, 3, 2))
        for ip, p in enumerate((-1, 0, 1)):
            for iq, q in enumerate((-1, 0, 1)):
                if p == 0 and q == 0:
                    continue
                sigma = math.sqrt(
                    _cell_variance(p * cell, q * cell, cell / 2.0, params.cn2, k_ref, dz_slab)
                )
                a, b = draws[ip, iq] * sigma
                # exp(i K . R) on sample indices (j, l), K = (p, q) * dk / 3^n
                col = np.exp(2j * np.pi * p * j / (3.0**level * n))
                row = np.exp(2j * np.pi * q * j / (3.0**level * n))
                out += (a + 1j * b) * np.outer(row, col)
    return out


def generate_screen_pair(grid, params, dz_slab, rng):
    """Two independent screens from one filtered complex-noise draw.

    Returns (PhaseScreenBase, PhaseScreenBase) holding the real and the
    imaginary part; sub-harmonics are added when params.subharmonic_levels
    is positive, and both screens are re-centered to zero mean.
    """
    if dz_slab <= 0:
        raise ValueError("dz_slab must be positive")
    n = grid.n
    dk = 2.0 * np.pi / grid.window
    kx, ky = grid.freq_meshgrid()
    k_mag = np.hypot(kx, ky)
    sigma = np.sqrt(
        phase_psd(k_mag, params.cn2, params.reference_wavenumber, dz_slab)
    ) * dk
    noise = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    spectrum = noise * sigma  # DC already zero through the PSD
    theta = np.fft.ifft2(spectrum) * n**2
    if params.subharmonic_levels > 0:
        theta = theta + _subharmonic_complex(grid, params, dz_slab, rng)
    re = theta.real - theta.real.mean()
    im = theta.imag - theta.imag.mean()
    return (
        PhaseScreenBase(grid=grid, values=re, dz_slab=dz_slab),
        PhaseScreenBase(grid=grid, values=im, dz_slab=dz_slab),
    )


def add_subharmonics(screen, n_levels, params, rng):
    """Return ``screen`` plus ``n_levels`` of low-frequency sub-harmonics.

    Uses the real part of a fresh complex draw and re-centers the result.
    Call with the same params the screen was generated with (minus the
    sub-harmonics already applied).
    """
    if n_levels < 1:
        raise ValueError("n_levels must be >= 1; zero levels is a caller no-op")
    sub = TurbulenceParams(
        cn2=params.cn2,
        path_length=params.path_length,
        reference_wavelength=params.reference_wavelength,
        subharmonic_levels=n_levels,
    )
    patch = _subharmonic_complex(screen.grid, sub, screen.dz_slab, rng).real
    values = screen.values + patch
    values = values - values.mean()
    return PhaseScreenBase(grid=screen.grid, values=values, dz_slab=screen.dz_slab)


def fried_parameter(cn2, z, wavelength):
    """Fried coherence length r0 = 0.185 * (lambda^2 / (Cn^2 z))^(3/5)."""
    if cn2 <= 0 or z <= 0:
        raise ValueError("fried_parameter needs cn2 > 0 and z > 0")
    return FRIED_COEFF * (wavelength**2 / (cn2 * z)) ** 0.6


def scintillation_strength(w0, r0):
    """Dimensionless turbulence strength W = w0 / r0."""
    if r0 <= 0:
        raise ValueError("r0 must be positive")
    return w0 / r0


def solve_z_for_w(w0, cn2, wavelength, target_w):
    """Path length giving the requested W; closed-form power-law inversion."""
    if target_w <= 0:
        raise ValueError("target_w must be positive")
    return (wavelength**2 / cn2) * (FRIED_COEFF * target_w / w0) ** (5.0 / 3.0)


def solve_cn2_for_w(w0, z, wavelength, target_w):
    """Structure constant giving the requested W at a fixed path length."""
    if target_w <= 0:
        raise ValueError("target_w must be positive")
    return (wavelength**2 / z) * (FRIED_COEFF * target_w / w0) ** (5.0 / 3.0)


def rytov_variance(cn2, wavelength, dz):
    """Weak-fluctuation Rytov variance 1.23 Cn^2 k^(7/6) dz^(11/6)."""
    k = 2.0 * np.pi / wavelength
    return RYTOV_COEFF * cn2 * k ** (7.0 / 6.0) * dz ** (11.0 / 6.0)


def plan_slabs(params: TurbulenceParams, grid=None):
    """Partition the path into equal slabs of weak per-slab scintillation.

    Returns the smallest even count >= 2 of equal slabs whose individual
    Rytov variance stays below 0.1; an even count lets every complex screen
    draw be consumed as a full Re/Im pair.  ``grid`` is accepted for
    interface symmetry and not needed by the plan itself.
    """
    z = params.path_length
    count = 2
    if params.cn2 > 0:
        k = 2.0 * np.pi / params.reference_wavelength
        dz_max = (RYTOV_PER_SLAB / (RYTOV_COEFF * params.cn2 * k ** (7.0 / 6.0))) ** (
            6.0 / 11.0
        )
        count = max(2, math.ceil(z / dz_max))
        if count % 2:
            count += 1
    return [z / count] * count


def make_realization(params, grid, seed):
    """Generate the full ordered screen set for one channel snapshot."""
    slabs = plan_slabs(params, grid)
    rng = np.random.default_rng(seed)
    screens = []
    for i in range(0, len(slabs), 2):
        pair = generate_screen_pair(grid, params, slabs[i], rng)
        screens.extend(pair)
    return TurbulenceRealization(screens=tuple(screens), seed=seed, params=params)


def measure_structure_function(screens, separations_px):
    """Ensemble phase structure function D(r) along the grid axes.

    ``screens`` is an iterable of PhaseScreenBase (or 2-D arrays); returns
    the mean of [theta(R + r) - theta(R)]^2 over pixels, both axes, and the
    ensemble, for each pixel separation.  Non-periodic differencing.
    """
    separations_px = list(separations_px)
    totals = np.zeros(len(separations_px))
    count = 0
    for screen in screens:
        values = screen.values if hasattr(screen, "values") else np.asarray(screen)
        for i, d in enumerate(separations_px):
            dx = values[:, d:] - values[:, :-d]
            dy = values[d:, :] - values[:-d, :]
            totals[i] += 0.5 * (np.mean(dx**2) + np.mean(dy**2))
        count += 1
    return totals / count


def analytic_structure_function(r, r0):
    """Kolmogorov phase structure function 6.88 * (r / r0)^(5/3)."""
    return STRUCTURE_COEFF * (np.asarray(r, dtype=np.float64) / r0) ** (5.0 / 3.0)
