import numpy as np
import pytest

from oamcorr.channel import InputStateSpec, OutputBasisSpec, propagate_choi
from oamcorr.fields import GridSpec
from oamcorr.turbulence import TurbulenceParams, make_realization, solve_cn2_for_w

DESK_SEED = 77


@pytest.fixture(scope="session")
def desk_setup():
    """Shared desk-scale geometry: spec, 36-mode basis, grid, z = 2 z_R."""
    spec = InputStateSpec()
    basis = OutputBasisSpec(p_values=(0, 1, 2), ell_range=(-5, 6))
    z = 2.0 * np.pi * spec.waist**2 / spec.wavelengths[0]
    grid = GridSpec(n=512, window=1.93)
    return spec, basis, grid, z


@pytest.fixture(scope="session")
def desk_choi(desk_setup):
    """One propagated W=0.5 desk realization, reused across test modules."""
    spec, basis, grid, z = desk_setup
    cn2 = solve_cn2_for_w(spec.waist, z, spec.wavelengths[0], 0.5)
    params = TurbulenceParams(
        cn2=cn2, path_length=z, reference_wavelength=spec.wavelengths[0]
    )
    realization = make_realization(params, grid, seed=DESK_SEED)
    choi = propagate_choi(spec, basis, realization, grid, capture_floor=0.0)
    return spec, basis, choi
