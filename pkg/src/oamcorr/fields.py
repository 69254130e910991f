"""Sampled optical fields, Laguerre-Gaussian modes, and paraxial propagation.

Conventions used throughout:

* fields are complex envelopes of an exp(+ikz) carrier, so one free-space
  step multiplies the angular spectrum by exp(-i(kx^2+ky^2) dz / (2 k0));
* an LG mode has waist ``w0`` at z=0, azimuthal factor exp(i l phi), and
  picks up curvature exp(+i k r^2 / (2 R(z))) and Gouy phase
  exp(-i (2p+|l|+1) arctan(z/zR)) downstream.  With these signs the
  sampled modes are exact eigenfunctions of `free_space_step`;
* all lengths are in meters, phases in radians;
* the discrete L2 norm is sum(|a|^2) * spacing^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import eval_genlaguerre

from .exceptions import GridMismatch, UnresolvedMode

__all__ = [
    "GridSpec",
    "SampledField",
    "LGIndex",
    "ModeBasis",
    "lg_mode_field",
    "inner_product",
    "decompose",
    "free_space_step",
    "super_gaussian_absorber",
]


@dataclass(frozen=True)
class GridSpec:
    """Square sampling grid: ``n`` samples per side over a physical ``window``."""

    n: int = 1024
    window: float = 1.6

    def __post_init__(self):
        if self.n < 64 or (self.n & (self.n - 1)) != 0:
            raise ValueError(f"n must be a power of two >= 64, got {self.n}")
        if self.window <= 0:
            raise ValueError(f"window must be positive, got {self.window}")

    @property
    def spacing(self) -> float:
        return self.window / self.n

    def axes(self):
        """Centered spatial coordinate along one side (origin at n/2)."""
        return (np.arange(self.n) - self.n // 2) * self.spacing

    def meshgrid(self):
        x = self.axes()
        return np.meshgrid(x, x, indexing="xy")

    def radial(self):
        """(r, phi) polar coordinates of every sample."""
        xx, yy = self.meshgrid()
        return np.hypot(xx, yy), np.arctan2(yy, xx)

    def freq_axes(self):
        """Angular spatial frequencies (rad/m) in FFT order."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.spacing)

    def freq_meshgrid(self):
        k = self.freq_axes()
        return np.meshgrid(k, k, indexing="xy")


@dataclass(frozen=True)
class SampledField:
    """Complex field amplitude on a grid at propagation distance ``z``."""

    grid: GridSpec
    wavelength: float
    amplitude: np.ndarray
    z: float = 0.0

    def __post_init__(self):
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        amp = np.ascontiguousarray(self.amplitude, dtype=np.complex128)
        if amp.shape != (self.grid.n, self.grid.n):
            raise ValueError(
                f"amplitude shape {amp.shape} does not match grid n={self.grid.n}"
            )
        amp.flags.writeable = False  # fields are immutable value objects
        object.__setattr__(self, "amplitude", amp)

    @property
    def wavenumber(self) -> float:
        return 2.0 * np.pi / self.wavelength

    def norm_squared(self) -> float:
        return float(np.sum(np.abs(self.amplitude) ** 2)) * self.grid.spacing**2

    def with_amplitude(self, amplitude, z=None) -> "SampledField":
        return SampledField(
            grid=self.grid,
            wavelength=self.wavelength,
            amplitude=amplitude,
            z=self.z if z is None else z,
        )


@dataclass(frozen=True, order=True)
class LGIndex:
    """Laguerre-Gaussian mode index: azimuthal ``ell``, radial ``p >= 0``."""

    ell: int
    p: int = 0

    def __post_init__(self):
        if self.p < 0:
            raise ValueError(f"radial index must be non-negative, got p={self.p}")

    @property
    def order(self) -> int:
        """Combined mode order 2p + |ell|, controlling transverse extent."""
        return 2 * self.p + abs(self.ell)


@dataclass(frozen=True)
class ModeBasis:
    """Ordered truncated LG basis sharing one waist.

    The ordering is row-major over (p, ell): all ell for the first p, then
    the next p, and so on.  Mode wavelengths are assigned by the consumer
    (each field is decomposed with modes at its own wavelength).
    """

    waist: float
    indices: tuple[LGIndex, ...]

    def __post_init__(self):
        if self.waist <= 0:
            raise ValueError("waist must be positive")
        if len(set(self.indices)) != len(self.indices):
            raise ValueError("basis indices must be distinct")
        object.__setattr__(self, "indices", tuple(self.indices))

    @classmethod
    def rectangular(cls, waist, p_values, ell_values) -> "ModeBasis":
        """Basis over the cartesian product of radial and azimuthal indices."""
        idx = tuple(
            LGIndex(ell=int(l), p=int(p))
            for p in sorted(p_values)
            for l in sorted(ell_values)
        )
        return cls(waist=waist, indices=idx)

    def __len__(self):
        return len(self.indices)

    def position(self, idx: LGIndex) -> int:
        return self.indices.index(idx)


def _resolution_check(idx, waist, grid, z, wavelength):
    if grid.spacing > waist / 4.0:
        raise UnresolvedMode(
            f"waist {waist} spans fewer than 8 samples at spacing {grid.spacing}"
        )
    if waist >= grid.window / 4.0:
        raise UnresolvedMode(
            f"waist {waist} must be smaller than a quarter window {grid.window / 4.0}"
        )
    zr = np.pi * waist**2 / wavelength
    w_z = waist * math.sqrt(1.0 + (z / zr) ** 2)
    extent = w_z * math.sqrt(idx.order + 1.0)
    if extent > grid.window / 2.0:
        raise UnresolvedMode(
            f"mode (ell={idx.ell}, p={idx.p}) extent {2 * extent:.3f} m exceeds "
            f"window {grid.window:.3f} m at z={z:.1f} m"
        )


def lg_mode_field(idx, waist, wavelength, grid, z=0.0):
    """Sample an LG mode on ``grid`` at plane ``z`` (waist plane by default).

    The result is renormalized to unit discrete L2 norm.  Raises
    UnresolvedMode when the grid cannot resolve the waist or the mode
    outgrows the window at the evaluation plane.
    """
    _resolution_check(idx, waist, grid, z, wavelength)
    k = 2.0 * np.pi / wavelength
    zr = np.pi * waist**2 / wavelength
    w_z = waist * math.sqrt(1.0 + (z / zr) ** 2)
    inv_r = z / (z**2 + zr**2)  # 1/R(z), finite at the waist
    gouy = (idx.order + 1.0) * math.atan2(z, zr)

    r, phi = grid.radial()
    a = abs(idx.ell)
    rho = 2.0 * r**2 / w_z**2
    radial = (
        math.sqrt(2.0 * math.factorial(idx.p) / (np.pi * math.factorial(idx.p + a)))
        / w_z
        * np.sqrt(rho) ** a
        * eval_genlaguerre(idx.p, a, rho)
        * np.exp(-rho / 2.0)
    )
    phase = idx.ell * phi + 0.5 * k * inv_r * r**2 - gouy
    amp = radial * np.exp(1j * phase)
    amp /= math.sqrt(np.sum(np.abs(amp) ** 2) * grid.spacing**2)
    return SampledField(grid=grid, wavelength=wavelength, amplitude=amp, z=z)


def inner_product(a: SampledField, b: SampledField) -> complex:
    """Discrete overlap <a|b> = sum(conj(a) * b) * spacing^2."""
    if a.grid != b.grid:
        raise GridMismatch(f"grids differ: {a.grid} vs {b.grid}")
    return complex(np.vdot(a.amplitude, b.amplitude)) * a.grid.spacing**2


def decompose(field: SampledField, basis: ModeBasis) -> np.ndarray:
    """Project ``field`` onto each basis mode evaluated at the field's plane.

    Modes are synthesized at the field's wavelength and z.  Returns the
    complex coefficient vector in basis order.
    """
    coeffs = np.empty(len(basis), dtype=np.complex128)
    for i, idx in enumerate(basis.indices):
        mode = lg_mode_field(idx, basis.waist, field.wavelength, field.grid, z=field.z)
        coeffs[i] = inner_product(mode, field)
    return coeffs


def free_space_step(field: SampledField, dz: float) -> SampledField:
    """Propagate by ``dz`` with the paraxial angular-spectrum transfer factor.

    Phase-only in the Fourier domain, so the discrete L2 norm is preserved
    to rounding.  dz = 0 returns the field unchanged.
    """
    if dz < 0:
        raise ValueError("dz must be non-negative")
    if dz == 0.0:
        return field
    kx, ky = field.grid.freq_meshgrid()
    transfer = np.exp(-1j * (kx**2 + ky**2) * dz / (2.0 * field.wavenumber))
    out = np.fft.ifft2(np.fft.fft2(field.amplitude) * transfer)
    return field.with_amplitude(out, z=field.z + dz)


def super_gaussian_absorber(grid: GridSpec, radius_fraction=0.45, order=8):
    """Soft-edge transmission mask suppressing wrap-around at the window edge.

    exp(-(r/a)^(2*order)) with a = radius_fraction * window; near unity over
    the central beam region.
    """
    r, _ = grid.radial()
    a = radius_fraction * grid.window
    return np.exp(-((r / a) ** (2 * order)))
