"""Command-line entry points.

Subcommands: simulate, tomography, correct, run, sweep-nout, sweep-w,
validate-screens.  Exit code 0 on full success, 2 if any realization
failed, 1 on a configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import channel as _channel
from . import correction as _correction
from . import harness as _harness
from . import oamf as _oamf
from . import tomography as _tomography
from . import turbulence as _turbulence
from .exceptions import OamCorrError


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="oamcorr",
        description="Turbulent OAM channel simulation, compressive tomography, correction",
    )
    parser.add_argument("--config", help="JSON config file overriding preset fields")
    parser.add_argument("--seed", type=int, help="master seed override")
    parser.add_argument("--out-dir", default="oamcorr-out", help="output directory")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--preset", choices=("desk", "paper"), default="desk")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="one realization: dump fields, Choi data, records")
    sim.add_argument("--index", type=int, default=0, help="realization index")

    tomo = sub.add_parser("tomography", help="reconstruct from saved measurement records")
    tomo.add_argument("--records", required=True, help="records CSV (index,alpha)")

    corr = sub.add_parser("correct", help="correct a saved output state with a reconstruction")
    corr.add_argument("--choi", required=True, help="choi.json from simulate")
    corr.add_argument("--rho", required=True, help="rho.json from tomography")

    sub.add_parser("run", help="full experiment at the configured settings")

    sw = sub.add_parser("sweep-nout", help="output-dimension sweep with paired seeds")
    sw.add_argument(
        "--sizes",
        default=None,
        help='JSON list of [p_values, [ell_min, ell_max]] pairs, e.g. "[[[0],[-1,1]]]"',
    )

    sww = sub.add_parser("sweep-w", help="scintillation sweep with paired seeds")
    sww.add_argument("--w-values", default="0.5,1,2", help="comma-separated W targets")

    vs = sub.add_parser("validate-screens", help="structure-function validation CSV")
    vs.add_argument("--ensemble", type=int, default=500)
    return parser


def _load_config(args):
    preset = (
        _harness.ExperimentConfig.desk()
        if args.preset == "desk"
        else _harness.ExperimentConfig.paper()
    )
    data = preset.to_dict()
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    if args.seed is not None:
        data["master_seed"] = args.seed
    return _harness.ExperimentConfig.from_dict(data)


def _cmd_simulate(config, args, out_dir):
    index = args.index
    spec = config.input_spec()
    basis = config.output_basis()
    grid = config.grid_spec()
    seed = _harness.child_seed(config.master_seed, index, "turbulence")
    realization = _turbulence.make_realization(config.turbulence_params(), grid, seed)
    choi = _channel.propagate_choi(
        spec,
        basis,
        realization,
        grid,
        absorber=config.absorber,
        capture_floor=config.capture_floor,
        keep_fields=True,
    )
    for k, field in enumerate(choi.branch_fields):
        _oamf.write_field(out_dir / f"branch_{k}.oamf", field)
    for i, screen in enumerate(realization.screens):
        _oamf.write_screen(
            out_dir / f"screen_{i:02d}.oamf", screen, config.wavelengths[0]
        )
    with open(out_dir / "choi.json", "w") as fh:
        json.dump(
            {
                "state": _oamf.complex_to_pairs(choi.state),
                "kraus_true": _oamf.complex_to_pairs(choi.kraus_true),
                "captured_power": choi.captured_power,
                "n_wavelengths": spec.n_wavelengths,
                "seed": seed,
            },
            fh,
        )
    d = basis.n_total
    ggm = _tomography.GGMBasis(d)
    rng = np.random.default_rng(_harness.child_seed(config.master_seed, index, "sampling"))
    indices = _tomography.sample_measurement_set(d, config.m_count(d), rng)
    noise_rng = np.random.default_rng(_harness.child_seed(config.master_seed, index, "noise"))
    records = _tomography.measure_state(
        choi.state, ggm, indices, noise_sigma=config.noise_sigma, rng=noise_rng
    )
    _tomography.save_records_csv(out_dir / "records.csv", records)
    print(
        f"realization {index}: captured power {choi.captured_power:.4f}, "
        f"{len(records)} records, outputs in {out_dir}"
    )
    return 0


def _cmd_tomography(config, args, out_dir):
    records = _tomography.load_records_csv(args.records)
    d = config.output_basis().n_total
    ggm = _tomography.GGMBasis(d)
    rho, info = _tomography.reconstruct(records, ggm, config.reconstruction_config())
    with open(out_dir / "rho.json", "w") as fh:
        json.dump({"rho": _oamf.complex_to_pairs(rho), "dim": d}, fh)
    with open(out_dir / "diagnostics.json", "w") as fh:
        json.dump(info, fh, indent=2)
    print(
        f"reconstructed dim {d}: {info['iterations']} iterations, "
        f"residual {info['residual']:.3e}, {info['wall_time_s']:.2f} s"
    )
    return 0


def _cmd_correct(config, args, out_dir):
    with open(args.choi) as fh:
        choi_data = json.load(fh)
    with open(args.rho) as fh:
        rho_data = json.load(fh)
    psi_out = _oamf.pairs_to_complex(choi_data["state"])
    rho_r = _oamf.pairs_to_complex(rho_data["rho"])
    spec = config.input_spec()
    basis = config.output_basis()
    psi_r = _correction.extract_state_vector(rho_r, method=config.extraction_method)
    kraus, _ = _correction.assemble_kraus(psi_r, spec.n_wavelengths)
    rho_out = np.outer(psi_out, psi_out.conj())
    rho_c = _correction.correct_state(rho_out, kraus)
    rho_unc = _channel.truncate_to_input_subspace(rho_out, spec, basis)
    report = _correction.CorrectionReport.evaluate(
        rho_c, rho_unc, _channel.build_input_state(spec),
        extraction_method=config.extraction_method,
    )
    with open(out_dir / "corrected.json", "w") as fh:
        json.dump({"rho": _oamf.complex_to_pairs(rho_c)}, fh)
    with open(out_dir / "report.json", "w") as fh:
        json.dump(
            {k: getattr(report, k) for k in _correction.REPORT_COLUMNS},
            fh,
            indent=2,
        )
    print(
        f"corrected fidelity {report.fidelity_corrected:.4f} "
        f"(uncorrected {report.fidelity_uncorrected:.4f})"
    )
    return 0


def _finish_experiment(result, out_dir, label):
    _harness.write_rows_csv(out_dir / f"{label}.csv", result.rows)
    _harness.write_summary_json(out_dir / f"{label}_summary.json", result.summary)
    failed = result.failed
    for entry in result.summary:
        keys = ",".join(f"{k}={v}" for k, v in entry["group_keys"].items())
        print(
            f"{entry['metric']:8s} [{keys}] mean {entry['mean']:.4f} "
            f"stderr {entry['stderr']:.4f} (n={entry['count']})"
        )
    if failed:
        print(f"{len(failed)} realization(s) failed:", file=sys.stderr)
        for row in failed:
            print(f"  realization {row.realization}: {row.status}", file=sys.stderr)
        return 2
    return 0


def _cmd_run(config, args, out_dir):
    result = _harness.run_experiment(config, threads=args.threads)
    return _finish_experiment(result, out_dir, "realizations")


def _cmd_sweep_nout(config, args, out_dir):
    sizes = None
    if args.sizes:
        sizes = [(tuple(p), tuple(e)) for p, e in json.loads(args.sizes)]
    result = _harness.sweep_nout(config, sizes, threads=args.threads)
    return _finish_experiment(result, out_dir, "sweep_nout")


def _cmd_sweep_w(config, args, out_dir):
    w_values = tuple(float(w) for w in args.w_values.split(","))
    result = _harness.sweep_w(config, w_values, threads=args.threads)
    return _finish_experiment(result, out_dir, "sweep_w")


def _cmd_validate_screens(config, args, out_dir):
    rows = _harness.validate_screens(config, ensemble=args.ensemble)
    _harness.write_validation_csv(out_dir / "screen_validation.csv", rows)
    worst = {}
    for row in rows:
        worst[row["n_s"]] = max(worst.get(row["n_s"], 0.0), abs(row["rel_error"]))
    for n_s, err in sorted(worst.items(), reverse=True):
        print(f"N_s={n_s}: max |relative error| {err:.3f}")
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "tomography": _cmd_tomography,
    "correct": _cmd_correct,
    "run": _cmd_run,
    "sweep-nout": _cmd_sweep_nout,
    "sweep-w": _cmd_sweep_w,
    "validate-screens": _cmd_validate_screens,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except (OSError, ValueError, TypeError, json.JSONDecodeError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 1
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        return _COMMANDS[args.command](config, args, out_dir)
    except OamCorrError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
