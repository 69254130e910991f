"""Experiment configuration, seeded orchestration, and sweep drivers.

One realization = generate a frozen medium, propagate the three-branch
input, sample an undersampled GGM measurement set, reconstruct, assemble
the channel matrix, correct, and score.  Child seeds derive from
(master seed, realization index, purpose), so sweeps sharing a master seed
see identical turbulence and differences are attributable to the swept
parameter.  Per-realization failures become status rows and never abort a
sweep.

The W knob: setting ``target_w`` rescales cn2 at the configured path
length (default 2 z_R, the setup behind the fidelity/trace-distance
statistics), while `sweep_w` varies the path length per W, which is how
the negativity-vs-dimension study varies scintillation.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import channel as _channel
from . import correction as _correction
from . import tomography as _tomography
from . import turbulence as _turbulence
from .exceptions import OamCorrError
from .fields import GridSpec

__all__ = [
    "ExperimentConfig",
    "RealizationRow",
    "ExperimentResult",
    "child_seed",
    "run_realization",
    "run_experiment",
    "summarize",
    "sweep_nout",
    "sweep_w",
    "validate_screens",
    "default_nout_grid",
    "write_rows_csv",
    "write_summary_json",
    "METRIC_COLUMNS",
]

METRIC_COLUMNS = (
    "F_corr",
    "F_unc",
    "D_corr",
    "D_unc",
    "Neg_corr",
    "Neg_unc",
)

CSV_HEADER = (
    "realization,seed,W,N_out,m,F_corr,F_unc,D_corr,D_unc,Neg_corr,Neg_unc,"
    "iterations,residual,captured,status"
)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full experiment description; defaults mirror the headline setup."""

    # grid
    n: int = 1024
    window: float | None = None  # None: auto-sized (>= 16 * waist)
    # input state
    ell_values: tuple[int, int, int] = (-1, 0, 1)
    wavelengths: tuple[float, float, float] = (1.000e-6, 1.020e-6, 1.040e-6)
    waist: float = 0.1
    # turbulence
    cn2: float = 1e-16
    z: float | None = None  # None: 2 Rayleigh ranges at the first wavelength
    target_w: float | None = None  # rescales cn2 to hit W at the configured z
    subharmonic_levels: int = 3
    # output basis
    p_values: tuple[int, ...] = tuple(range(7))
    ell_range: tuple[int, int] = (-14, 15)
    basis_plane: str = "propagated"
    # tomography
    m_fraction: float = 0.05
    epsilon0: float = 0.5
    tol: float = 1e-6
    max_iter: int = 5000
    noise_sigma: float = 0.0
    # correction / gating
    extraction_method: str = "column-division"
    extraction_rank_threshold: float = 0.1
    capture_floor: float = 0.8
    absorber: bool = True
    # experiment
    realizations: int = 100
    master_seed: int = 0

    @classmethod
    def desk(cls, **overrides) -> "ExperimentConfig":
        """Minutes-scale preset: 512 grid, 36 spatial modes, 20 realizations."""
        base = dict(
            n=512,
            p_values=(0, 1, 2),
            ell_range=(-5, 6),
            m_fraction=0.2,
            realizations=20,
        )
        base.update(overrides)
        return cls(**base)

    @classmethod
    def paper(cls, **overrides) -> "ExperimentConfig":
        """Full-scale preset (long-running): 1024 grid, 630 output dims."""
        return cls(**overrides)

    # ---- derived quantities ----

    def input_spec(self) -> _channel.InputStateSpec:
        return _channel.InputStateSpec(
            ell_values=self.ell_values,
            wavelengths=self.wavelengths,
            waist=self.waist,
        )

    def output_basis(self) -> _channel.OutputBasisSpec:
        return _channel.OutputBasisSpec(
            p_values=self.p_values,
            ell_range=self.ell_range,
            basis_plane=self.basis_plane,
        )

    @property
    def rayleigh_range(self) -> float:
        return math.pi * self.waist**2 / self.wavelengths[0]

    def propagation_distance(self) -> float:
        return self.z if self.z is not None else 2.0 * self.rayleigh_range

    def effective_cn2(self) -> float:
        if self.target_w is None:
            return self.cn2
        return _turbulence.solve_cn2_for_w(
            self.waist, self.propagation_distance(), self.wavelengths[0], self.target_w
        )

    def scintillation_w(self) -> float:
        cn2 = self.effective_cn2()
        if cn2 <= 0:
            return 0.0
        r0 = _turbulence.fried_parameter(
            cn2, self.propagation_distance(), self.wavelengths[0]
        )
        return _turbulence.scintillation_strength(self.waist, r0)

    def window_value(self) -> float:
        if self.window is not None:
            return self.window
        z = self.propagation_distance()
        w_z = self.waist * math.sqrt(1.0 + (z / self.rayleigh_range) ** 2)
        max_order = max(idx.order for idx in self.output_basis().spatial_indices)
        return max(16.0 * self.waist, 2.6 * w_z * math.sqrt(max_order + 1.0))

    def grid_spec(self) -> GridSpec:
        return GridSpec(n=self.n, window=self.window_value())

    def turbulence_params(self) -> _turbulence.TurbulenceParams:
        return _turbulence.TurbulenceParams(
            cn2=self.effective_cn2(),
            path_length=self.propagation_distance(),
            reference_wavelength=self.wavelengths[0],
            subharmonic_levels=self.subharmonic_levels,
        )

    def m_count(self, dim: int) -> int:
        return min(max(int(round(self.m_fraction * dim * dim)), 1), dim * dim)

    def reconstruction_config(self) -> _tomography.ReconstructionConfig:
        return _tomography.ReconstructionConfig(
            epsilon0=self.epsilon0, tol=self.tol, max_iter=self.max_iter
        )

    # ---- (de)serialization ----

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        for key, value in out.items():
            if isinstance(value, tuple):
                out[key] = list(value)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("ell_values", "wavelengths", "p_values", "ell_range"):
            if key in kwargs and kwargs[key] is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def child_seed(master_seed: int, index: int, purpose: str) -> int:
    """Stable 64-bit seed derived from (master, realization, purpose)."""
    digest = hashlib.blake2b(
        f"{master_seed}:{index}:{purpose}".encode(), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class RealizationRow:
    """One CSV row: per-realization metrics or a failure status."""

    realization: int
    seed: int
    w: float
    n_out: int
    m: int
    metrics: dict = field(default_factory=dict)
    iterations: int = 0
    residual: float = float("nan")
    captured: float = float("nan")
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def csv_line(self) -> str:
        vals = [self.metrics.get(k, float("nan")) for k in METRIC_COLUMNS]
        fields = [
            str(self.realization),
            str(self.seed),
            repr(self.w),
            str(self.n_out),
            str(self.m),
            *[repr(v) for v in vals],
            str(self.iterations),
            repr(self.residual),
            repr(self.captured),
            self.status,
        ]
        return ",".join(fields)


def run_realization(config: ExperimentConfig, index: int) -> RealizationRow:
    """Full pipeline for one turbulence snapshot; failures become statuses."""
    spec = config.input_spec()
    basis = config.output_basis()
    grid = config.grid_spec()
    params = config.turbulence_params()
    d = basis.n_total
    m = config.m_count(d)
    seed = child_seed(config.master_seed, index, "turbulence")
    w_value = config.scintillation_w()

    def fail(status, captured=float("nan")):
        return RealizationRow(
            realization=index,
            seed=seed,
            w=w_value,
            n_out=d,
            m=m,
            captured=captured,
            status=status,
        )

    try:
        realization = _turbulence.make_realization(params, grid, seed)
        choi = _channel.propagate_choi(
            spec,
            basis,
            realization,
            grid,
            absorber=config.absorber,
            capture_floor=config.capture_floor,
        )
    except OamCorrError as exc:
        return fail(type(exc).__name__, getattr(exc, "captured", float("nan")))

    rho_out = np.outer(choi.state, choi.state.conj())
    ggm = _tomography.GGMBasis(d)
    sample_rng = np.random.default_rng(child_seed(config.master_seed, index, "sampling"))
    indices = _tomography.sample_measurement_set(d, m, sample_rng)
    noise_rng = np.random.default_rng(child_seed(config.master_seed, index, "noise"))
    records = _tomography.measure_state(
        choi.state, ggm, indices, noise_sigma=config.noise_sigma, rng=noise_rng
    )
    try:
        rho_r, info = _tomography.reconstruct(records, ggm, config.reconstruction_config())
        psi_r = _correction.extract_state_vector(
            rho_r,
            method=config.extraction_method,
            rank_threshold=config.extraction_rank_threshold,
        )
        kraus, _ = _correction.assemble_kraus(psi_r, spec.n_wavelengths)
        rho_c = _correction.correct_state(rho_out, kraus)
        rho_unc = _channel.truncate_to_input_subspace(rho_out, spec, basis)
    except OamCorrError as exc:
        return fail(type(exc).__name__, choi.captured_power)

    psi_in = _channel.build_input_state(spec)
    report = _correction.CorrectionReport.evaluate(
        rho_c,
        rho_unc,
        psi_in,
        extraction_method=config.extraction_method,
        residual=info["residual"],
        iterations=info["iterations"],
    )
    metrics = {
        "F_corr": report.fidelity_corrected,
        "F_unc": report.fidelity_uncorrected,
        "D_corr": report.trace_distance_corrected,
        "D_unc": report.trace_distance_uncorrected,
        "Neg_corr": report.negativity_corrected,
        "Neg_unc": report.negativity_uncorrected,
    }
    return RealizationRow(
        realization=index,
        seed=seed,
        w=w_value,
        n_out=d,
        m=m,
        metrics=metrics,
        iterations=info["iterations"],
        residual=info["residual"],
        captured=choi.captured_power,
        status="ok",
    )


def _run_star(args):
    return run_realization(*args)


@dataclass(frozen=True)
class ExperimentResult:
    rows: list
    summary: list

    @property
    def ok_rows(self):
        return [r for r in self.rows if r.ok]

    @property
    def failed(self):
        return [r for r in self.rows if not r.ok]

    def mean(self, metric):
        vals = [r.metrics[metric] for r in self.ok_rows]
        return float(np.mean(vals)) if vals else float("nan")

    def stderr(self, metric):
        vals = [r.metrics[metric] for r in self.ok_rows]
        if len(vals) < 2:
            return float("nan")
        return float(np.std(vals, ddof=1) / np.sqrt(len(vals)))


def summarize(rows, group_keys=("W", "N_out")):
    """Mean and standard error per metric over successful rows per group."""
    groups = {}
    for row in rows:
        if not row.ok:
            continue
        key = tuple(
            row.w if g == "W" else row.n_out if g == "N_out" else None
            for g in group_keys
        )
        groups.setdefault(key, []).append(row)
    summary = []
    for key in sorted(groups):
        bucket = groups[key]
        for metric in METRIC_COLUMNS:
            vals = np.array([r.metrics[metric] for r in bucket])
            summary.append(
                {
                    "metric": metric,
                    "mean": float(vals.mean()),
                    "stderr": float(vals.std(ddof=1) / np.sqrt(len(vals)))
                    if len(vals) > 1
                    else float("nan"),
                    "count": len(vals),
                    "group_keys": dict(zip(group_keys, key)),
                }
            )
    return summary


def run_experiment(config: ExperimentConfig, threads: int = 1) -> ExperimentResult:
    """All realizations of one configuration; never aborts on a bad row."""
    tasks = [(config, i) for i in range(config.realizations)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_run_star, tasks))
    else:
        rows = [run_realization(config, i) for i in range(config.realizations)]
    rows.sort(key=lambda r: r.realization)
    return ExperimentResult(rows=rows, summary=summarize(rows))


def default_nout_grid(config: ExperimentConfig):
    """Desk-scale output bases for N_out = 9, 36, 72, 108.

    Shapes follow the measured crosstalk footprint (azimuthal spread first,
    then radial rows), so capture rises steeply and then saturates across
    the grid.
    """
    del config
    return [
        ((0,), (-1, 1)),
        ((0, 1), (-2, 3)),
        ((0, 1, 2), (-3, 4)),
        ((0, 1, 2), (-5, 6)),
    ]


def sweep_nout(config: ExperimentConfig, sizes=None, threads: int = 1):
    """Paired-seed sweep over output-basis sizes.

    The capture gate is disabled: the smallest bases intentionally truncate
    hard (that is the effect under study) and must still produce rows.
    """
    sizes = default_nout_grid(config) if sizes is None else sizes
    rows = []
    for p_values, ell_range in sizes:
        sub = replace(
            config, p_values=tuple(p_values), ell_range=tuple(ell_range), capture_floor=0.0
        )
        sub.output_basis().input_positions(sub.input_spec())  # validate containment
        rows.extend(run_experiment(sub, threads=threads).rows)
    return ExperimentResult(rows=rows, summary=summarize(rows, group_keys=("W", "N_out")))


def sweep_w(config: ExperimentConfig, w_values=(0.5, 1.0, 2.0), threads: int = 1):
    """Paired-seed sweep over scintillation strengths.

    Each W is realized by solving for the path length at the configured cn2
    (the swept quantity is the distance, with shared turbulence seeds).
    """
    rows = []
    for w in w_values:
        z = _turbulence.solve_z_for_w(
            config.waist, config.cn2, config.wavelengths[0], w
        )
        sub = replace(config, z=z, target_w=None)
        rows.extend(run_experiment(sub, threads=threads).rows)
    return ExperimentResult(rows=rows, summary=summarize(rows, group_keys=("W",)))


def validate_screens(config: ExperimentConfig, ensemble=500, r_factors=None, seed=None):
    """Ensemble structure-function check, with and without sub-harmonics.

    Returns rows (r, D_measured, D_analytic, rel_error, n_s) at separations
    spanning [0.5, 2] x the slab Fried parameter (clipped to the grid).
    """
    r_factors = (0.5, 0.75, 1.0, 1.5, 2.0) if r_factors is None else r_factors
    grid = config.grid_spec()
    params = config.turbulence_params()
    dz = _turbulence.plan_slabs(params, grid)[0]
    r0 = _turbulence.fried_parameter(params.cn2, dz, params.reference_wavelength)
    seps, factors = [], []
    for f in r_factors:
        px = int(round(f * r0 / grid.spacing))
        if 1 <= px < grid.n // 2 and px not in seps:
            seps.append(px)
            factors.append(f)
    if not seps:
        raise ValueError(
            f"slab r0 {r0:.3g} m is not resolvable on the configured grid"
        )
    if seed is None:
        seed = child_seed(config.master_seed, 0, "validate-screens")
    out = []
    for n_s in (config.subharmonic_levels, 0):
        sub_params = _turbulence.TurbulenceParams(
            cn2=params.cn2,
            path_length=params.path_length,
            reference_wavelength=params.reference_wavelength,
            subharmonic_levels=n_s,
        )
        rng = np.random.default_rng(seed)
        screens = []
        for _ in range((ensemble + 1) // 2):
            screens.extend(
                _turbulence.generate_screen_pair(grid, sub_params, dz, rng)
            )
        measured = _turbulence.measure_structure_function(screens[:ensemble], seps)
        for px, d_meas in zip(seps, measured):
            r = px * grid.spacing
            d_ana = float(_turbulence.analytic_structure_function(r, r0))
            out.append(
                {
                    "r": r,
                    "D_measured": float(d_meas),
                    "D_analytic": d_ana,
                    "rel_error": float(d_meas / d_ana - 1.0),
                    "n_s": n_s,
                }
            )
    return out


def write_rows_csv(path, rows):
    with open(path, "w") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(row.csv_line() + "\n")


def write_summary_json(path, summary):
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")


def write_validation_csv(path, rows):
    with open(path, "w") as fh:
        fh.write("r,D_measured,D_analytic,rel_error,n_s\n")
        for row in rows:
            fh.write(
                f"{row['r']!r},{row['D_measured']!r},{row['D_analytic']!r},"
                f"{row['rel_error']!r},{row['n_s']}\n"
            )
