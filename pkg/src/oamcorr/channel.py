"""Split-step propagation of the three-mode input state and Choi assembly.

The input is a maximally non-separable qutrit: three p=0 LG modes, each
perfectly correlated with its own wavelength, amplitudes 1/sqrt(3).  The
composite index convention everywhere is (spatial m, wavelength n) ->
m * n_wavelengths + n.

Each branch propagates through the same frozen medium (screens scaled by
k/k_ref), is decomposed onto the truncated output LG basis, and the three
coefficient columns form both the ground-truth channel matrix and the
output Choi vector.  Turbulence never mixes wavelengths, so wavelength
sub-blocks of the Choi vector are exactly the per-branch decompositions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import CaptureTooLow, ZeroBlock
from .fields import (
    GridSpec,
    LGIndex,
    ModeBasis,
    decompose,
    free_space_step,
    lg_mode_field,
    super_gaussian_absorber,
)

__all__ = [
    "InputStateSpec",
    "OutputBasisSpec",
    "ChoiResult",
    "build_input_state",
    "propagate_branch",
    "propagate_choi",
    "truncate_to_input_subspace",
]


@dataclass(frozen=True)
class InputStateSpec:
    """Three OAM values, their wavelengths, and the common beam waist."""

    ell_values: tuple[int, int, int] = (-1, 0, 1)
    wavelengths: tuple[float, float, float] = (1.000e-6, 1.020e-6, 1.040e-6)
    waist: float = 0.1

    def __post_init__(self):
        if len(self.ell_values) != 3 or len(set(self.ell_values)) != 3:
            raise ValueError("need three distinct ell values")
        if len(self.wavelengths) != 3 or len(set(self.wavelengths)) != 3:
            raise ValueError("need three distinct wavelengths")
        if any(w <= 0 for w in self.wavelengths) or self.waist <= 0:
            raise ValueError("wavelengths and waist must be positive")
        object.__setattr__(self, "ell_values", tuple(int(l) for l in self.ell_values))
        object.__setattr__(self, "wavelengths", tuple(float(w) for w in self.wavelengths))

    @property
    def n_wavelengths(self) -> int:
        return 3

    @property
    def modes(self) -> tuple[LGIndex, ...]:
        return tuple(LGIndex(ell=l, p=0) for l in self.ell_values)

    @property
    def dim(self) -> int:
        return 9


@dataclass(frozen=True)
class OutputBasisSpec:
    """Truncated LG output basis: radial values x an azimuthal range.

    Spatial ordering is row-major over (p, ell); composite output dimension
    is n_spatial * 3 wavelength slots.  ``basis_plane`` selects whether the
    receiver modes carry the input beam's diffraction to the output plane
    ("propagated", the default) or are fresh waist-plane modes ("waist").
    """

    p_values: tuple[int, ...] = tuple(range(7))
    ell_range: tuple[int, int] = (-14, 15)
    basis_plane: str = "propagated"
    n_wavelengths: int = 3

    def __post_init__(self):
        if self.basis_plane not in ("propagated", "waist"):
            raise ValueError(f"unknown basis_plane {self.basis_plane!r}")
        if self.ell_range[0] > self.ell_range[1]:
            raise ValueError("ell_range must be (min, max)")
        object.__setattr__(self, "p_values", tuple(sorted(int(p) for p in self.p_values)))
        object.__setattr__(self, "ell_range", (int(self.ell_range[0]), int(self.ell_range[1])))

    @property
    def ell_values(self) -> tuple[int, ...]:
        return tuple(range(self.ell_range[0], self.ell_range[1] + 1))

    @property
    def spatial_indices(self) -> tuple[LGIndex, ...]:
        return tuple(
            LGIndex(ell=l, p=p) for p in self.p_values for l in self.ell_values
        )

    @property
    def n_spatial(self) -> int:
        return len(self.p_values) * len(self.ell_values)

    @property
    def n_total(self) -> int:
        return self.n_spatial * self.n_wavelengths

    def mode_basis(self, waist) -> ModeBasis:
        return ModeBasis(waist=waist, indices=self.spatial_indices)

    def spatial_position(self, idx: LGIndex) -> int:
        if idx.p not in self.p_values or not (
            self.ell_range[0] <= idx.ell <= self.ell_range[1]
        ):
            raise ValueError(f"mode {idx} not contained in the output basis")
        return self.p_values.index(idx.p) * len(self.ell_values) + (
            idx.ell - self.ell_range[0]
        )

    def input_positions(self, spec: InputStateSpec):
        """Composite output indices of the nine input mode (x) wavelength slots."""
        return np.array(
            [
                self.spatial_position(mode) * self.n_wavelengths + n
                for mode in spec.modes
                for n in range(spec.n_wavelengths)
            ],
            dtype=np.int64,
        )


def build_input_state(spec: InputStateSpec) -> np.ndarray:
    """Nine-component vector with 1/sqrt(3) on the three diagonal slots."""
    psi = np.zeros(spec.dim, dtype=np.complex128)
    for k in range(spec.n_wavelengths):
        psi[k * spec.n_wavelengths + k] = 1.0 / np.sqrt(3.0)
    return psi


def propagate_branch(mode, wavelength, realization, grid, waist, absorber=True):
    """Run one input mode through the realization with the split-step scheme.

    Per slab: multiply by exp(i * theta * k / k_ref), then free-space
    propagate over the slab thickness.  The optional super-Gaussian border
    (on by default) absorbs light scattered toward the window edge after
    each step.
    """
    field = lg_mode_field(mode, waist, wavelength, grid, z=0.0)
    scale = field.wavenumber / realization.params.reference_wavenumber
    mask = super_gaussian_absorber(grid) if absorber else None
    for screen in realization.screens:
        amp = field.amplitude * np.exp(1j * scale * screen.values)
        field = free_space_step(field.with_amplitude(amp), screen.dz_slab)
        if mask is not None:
            field = field.with_amplitude(field.amplitude * mask)
    return field


@dataclass(frozen=True)
class ChoiResult:
    """Output of one channel snapshot acting on the input state."""

    state: np.ndarray            # normalized Choi vector, dim n_spatial * 3
    kraus_true: np.ndarray       # ground-truth channel matrix, n_spatial x 3
    captured_power: float        # squared norm before renormalization
    branch_fields: tuple = field(default=(), repr=False)


def propagate_choi(
    spec,
    basis,
    realization,
    grid,
    absorber=True,
    capture_floor=0.8,
    keep_fields=False,
):
    """Propagate all three branches and assemble the output Choi state.

    Column k of the ground-truth channel matrix is branch k's decomposition
    onto the output basis at wavelength k; Choi entries are column_k / sqrt 3
    renormalized.  Raises CaptureTooLow when the basis truncation (plus any
    absorber loss) drops the captured power below ``capture_floor``.
    """
    n_spatial = basis.n_spatial
    nb = spec.n_wavelengths
    kraus = np.zeros((n_spatial, nb), dtype=np.complex128)
    fields = []
    for k, (mode, wavelength) in enumerate(zip(spec.modes, spec.wavelengths)):
        out = propagate_branch(mode, wavelength, realization, grid, spec.waist, absorber)
        if basis.basis_plane == "waist":
            out = out.with_amplitude(out.amplitude, z=0.0)
        kraus[:, k] = decompose(out, basis.mode_basis(spec.waist))
        if keep_fields:
            fields.append(out)
    choi = np.zeros(n_spatial * nb, dtype=np.complex128)
    for k in range(nb):
        choi[k::nb] = kraus[:, k] / np.sqrt(3.0)
    captured = float(np.sum(np.abs(choi) ** 2))
    if captured < capture_floor:
        raise CaptureTooLow(captured, capture_floor)
    return ChoiResult(
        state=choi / np.sqrt(captured),
        kraus_true=kraus,
        captured_power=captured,
        branch_fields=tuple(fields),
    )


def truncate_to_input_subspace(rho, spec, basis):
    """9x9 sub-block of the output density matrix on the input slots.

    Renormalized to unit trace; this is the uncorrected comparator.
    """
    rho = np.asarray(rho, dtype=np.complex128)
    positions = basis.input_positions(spec)
    block = rho[np.ix_(positions, positions)]
    tr = float(np.real(np.trace(block)))
    if tr < 1e-12:
        raise ZeroBlock(f"input-subspace trace {tr:.3e} below 1e-12")
    return block / tr
