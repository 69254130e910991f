"""Turbulent OAM channel simulation, compressive tomography, and correction."""

from .channel import (
    ChoiResult,
    InputStateSpec,
    OutputBasisSpec,
    build_input_state,
    propagate_branch,
    propagate_choi,
    truncate_to_input_subspace,
)
from .correction import (
    CorrectionReport,
    assemble_kraus,
    correct_state,
    extract_state_vector,
    fidelity,
    negativity,
    partial_transpose,
    trace_distance,
)
from .fields import (
    GridSpec,
    LGIndex,
    ModeBasis,
    SampledField,
    decompose,
    free_space_step,
    inner_product,
    lg_mode_field,
)
from .harness import (
    ExperimentConfig,
    child_seed,
    run_experiment,
    run_realization,
    sweep_nout,
    sweep_w,
    validate_screens,
)
from .tomography import (
    GGMBasis,
    MeasurementRecord,
    ReconstructionConfig,
    SVTReconstructor,
    measure_state,
    project_measurements,
    reconstruct,
    sample_measurement_set,
    threshold_step,
)
from .turbulence import (
    PhaseScreenBase,
    TurbulenceParams,
    TurbulenceRealization,
    fried_parameter,
    generate_screen_pair,
    kolmogorov_psd,
    make_realization,
    plan_slabs,
    scintillation_strength,
    solve_cn2_for_w,
    solve_z_for_w,
)

__version__ = "0.1.0"
