"""Command-line front end.

Every subcommand parses and validates all of its flags before any file is
read or written.  Errors go to standard error as one JSON line and map to
exit codes 2 (usage), 3 (data or format) and 4 (statistical floor or regime).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path
from typing import Optional

from . import accuracy
from .errors import TempModeError, UsageError
from .kernel import (eigendecompose, estimate_effective_mode_count, estimate_kernel, read_kernel,
                     save_spectrum, write_kernel)
from .modes import ShapeSpec, TimeGrid, load_mode, make_shape, save_mode
from .reconstruct import (classify_spectrum, load_result, reconstruct_mode, save_result,
                          verify_single_mode)
from .report import KINDS, ReportSpec, emit_report
from .simulate import (FilterSpec, SimulationConfig, StateSpec, ingest_batch, synthesize_batch,
                       write_batch)
from .streams import check_seed
from .sweep import compare_to_model, load_plan, run_sweep, summary_to_json

SHAPES = {"gaussian": "gaussian", "chirped": "chirped_gaussian", "exp_decay": "exp_decay",
          "hermite": "hermite_gauss", "file": "from_file"}


class _Parser(argparse.ArgumentParser):
    def __init__(self, *args, **kwargs):
        # abbreviated flags would let typos through silently
        kwargs.setdefault("allow_abbrev", False)
        super().__init__(*args, **kwargs)

    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _count(text: str) -> int:
    """Integer count; scientific notation such as ``1e6`` is accepted."""
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(v) or v != int(v) or v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return int(v)


def _real(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _seed(text: str) -> int:
    # parsed as an exact integer: 64-bit seeds do not survive a float
    try:
        return check_seed(int(text))
    except (ValueError, TempModeError) as exc:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}: {exc}")


def _threads(text: str) -> int:
    return _count(text)


def _add_threads(p):
    p.add_argument("--threads", type=_threads, default=None,
                   help="worker threads (default: TMR_THREADS or available cores)")


def _add_simulation(p):
    p.add_argument("--state", choices=("vacuum", "single_photon", "coherent"), default="coherent")
    p.add_argument("--shape", choices=tuple(SHAPES), default="gaussian")
    p.add_argument("--n", type=_real, default=1.0, help="photon number (efficiency for single_photon)")
    p.add_argument("--nwf", type=_count, required=True)
    p.add_argument("--nsamp", type=_count, required=True)
    p.add_argument("--nmode", type=_count, default=None, help="detected modes (default: nsamp)")
    p.add_argument("--dt", type=_real, default=1.0)
    p.add_argument("--seed", type=_seed, required=True)
    p.add_argument("--center", type=_real, default=None)
    p.add_argument("--width", type=_real, default=None)
    p.add_argument("--chirp", type=_real, default=None,
                   help="quadratic phase rate (chirped default: 0.25 / width^2)")
    p.add_argument("--detuning", type=_real, default=0.0)
    p.add_argument("--rate", type=_real, default=None)
    p.add_argument("--order", type=int, default=0)
    p.add_argument("--mode-file", default=None)
    p.add_argument("--highpass", type=_real, default=None)
    p.add_argument("--lowpass", type=_real, default=None)
    p.add_argument("--numtaps", type=_count, default=101)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tempmode", description="Temporal-mode reconstruction from homodyne waveforms.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="synthesize a waveform batch")
    _add_simulation(p)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("tmrw", "csv"), default=None)
    p.add_argument("--mode-out", default=None, help="true mode JSON (default: shape.json next to --out)")
    _add_threads(p)

    p = sub.add_parser("reconstruct", help="reconstruct the mode from waveforms or a kernel")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input")
    src.add_argument("--kernel")
    p.add_argument("--target", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--nmode-eff", type=_real, default=None)
    p.add_argument("--z", type=_real, default=3.0)
    p.add_argument("--calibration", default=None)
    p.add_argument("--dt", type=_real, default=1.0)
    _add_threads(p)

    p = sub.add_parser("spectrum", help="kernel eigenvalue spectrum")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--in", dest="input")
    src.add_argument("--kernel")
    p.add_argument("--out", required=True)
    p.add_argument("--kernel-out", default=None)
    p.add_argument("--vacuum", action="store_true",
                   help="treat the input as vacuum and report the effective mode count")
    p.add_argument("--calibration", default=None)
    p.add_argument("--dt", type=_real, default=1.0)
    _add_threads(p)

    p = sub.add_parser("verify", help="single-mode check after phase compensation")
    p.add_argument("--result", required=True)
    p.add_argument("--compensated", action="append", default=None,
                   help="recorded compensated batch (repeat for the minus candidate)")
    p.add_argument("--state", choices=("vacuum", "single_photon", "coherent"), default="coherent")
    p.add_argument("--shape", choices=tuple(SHAPES), default="gaussian")
    p.add_argument("--n", type=_real, default=1.0)
    p.add_argument("--nwf", type=_count, default=None)
    p.add_argument("--nmode", type=_count, default=None)
    p.add_argument("--seed", type=_seed, default=None)
    p.add_argument("--center", type=_real, default=None)
    p.add_argument("--width", type=_real, default=None)
    p.add_argument("--chirp", type=_real, default=None)
    p.add_argument("--detuning", type=_real, default=0.0)
    p.add_argument("--rate", type=_real, default=None)
    p.add_argument("--order", type=int, default=0)
    p.add_argument("--mode-file", default=None)
    p.add_argument("--nmode-eff", type=_real, default=None)
    p.add_argument("--z", type=_real, default=3.0)
    p.add_argument("--out", default=None)
    _add_threads(p)

    p = sub.add_parser("predict", help="closed-form accuracy prediction")
    p.add_argument("--nwf", type=_real, required=True)
    p.add_argument("--nmode", type=_real, required=True)
    p.add_argument("--n", type=_real, required=True)
    p.add_argument("--target-infidelity", type=_real, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("sweep", help="Monte-Carlo sweep against the accuracy model")
    p.add_argument("--plan", required=True)
    p.add_argument("--seed", type=_seed, required=True, help="base seed (overrides the plan's)")
    p.add_argument("--out", required=True, help="sweep CSV; also the resume checkpoint")
    p.add_argument("--summary", default=None, help="comparison JSON (default: next to --out)")
    _add_threads(p)

    p = sub.add_parser("report", help="SVG figure plus CSV of the plotted numbers")
    p.add_argument("--kind", choices=KINDS, required=True)
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--csv", default=None)
    p.add_argument("--target", default=None)
    p.add_argument("--nmode-eff", type=_real, default=None)
    p.add_argument("--z", type=_real, default=3.0)
    return parser


# --------------------------------------------------------------------------
# helpers

def _shape_spec(args) -> ShapeSpec:
    kind = SHAPES[args.shape]
    if kind == "from_file" and args.mode_file is None:
        raise UsageError("--shape file needs --mode-file")
    chirp = args.chirp
    if kind == "chirped_gaussian" and chirp is None:
        width = args.width if args.width is not None else args.nsamp * args.dt / 8
        chirp = 0.25 / width**2
    return ShapeSpec(kind, args.center, args.width, chirp or 0.0, args.detuning,
                     args.rate, args.order, args.mode_file)


def _state(kind: str, mode, n: float) -> StateSpec:
    if kind == "vacuum":
        return StateSpec.vacuum()
    if kind == "single_photon":
        return StateSpec.single_photon(mode, n)
    return StateSpec.coherent(mode, n)


def _filter(args) -> Optional[FilterSpec]:
    if args.highpass is None and args.lowpass is None:
        return None
    return FilterSpec(args.highpass, args.lowpass, args.numtaps)


def _write_json(obj, path: Optional[str]):
    text = json.dumps(obj, indent=2) + "\n"
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _load_source(args, threads):
    if args.kernel is not None:
        return read_kernel(args.kernel, dt=args.dt)
    return estimate_kernel(ingest_batch(args.input, calibration=args.calibration, dt=args.dt), threads)


# --------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    spec = _shape_spec(args)
    flt = _filter(args)
    mode_out = args.mode_out or str(Path(args.out).with_name("shape.json"))
    grid = TimeGrid(args.nsamp, args.dt)
    mode = make_shape(spec, grid)
    cfg = SimulationConfig(_state(args.state, mode, args.n), grid, args.nwf, args.seed,
                           args.nmode, flt)
    batch = synthesize_batch(cfg, args.threads)
    write_batch(batch, args.out, args.format)
    save_mode(mode, mode_out)
    return 0


def cmd_reconstruct(args) -> int:
    kernel = _load_source(args, args.threads)
    target = load_mode(args.target) if args.target else None
    spectrum = eigendecompose(kernel)
    verdict = classify_spectrum(spectrum, n_mode_eff=args.nmode_eff, z=args.z)
    result = reconstruct_mode(spectrum, verdict, target)
    save_result(result, args.out)
    return 0


def cmd_spectrum(args) -> int:
    kernel = _load_source(args, args.threads)
    if args.kernel_out:
        write_kernel(kernel, args.kernel_out)
    spectrum = eigendecompose(kernel)
    save_spectrum(spectrum, args.out)
    if args.vacuum:
        est = estimate_effective_mode_count(spectrum)
        _write_json({"n_mode_eff": est.estimate, "count_based": est.count_based,
                     "max_deviation": est.max_deviation}, None)
    return 0


def cmd_verify(args) -> int:
    if args.compensated:
        if len(args.compensated) > 2:
            raise UsageError("at most two --compensated batches (plus and minus)")
    else:
        missing = [f for f, v in (("--seed", args.seed), ("--nwf", args.nwf)) if v is None]
        if missing:
            raise UsageError(f"simulated verification needs {' and '.join(missing)}")
    result = load_result(args.result)
    if args.compensated:
        batches = tuple(ingest_batch(p) for p in args.compensated)
        source = batches[0] if len(batches) == 1 else batches
    else:
        grid = result.candidate_plus.grid
        args.nsamp, args.dt = grid.n_samp, grid.dt
        mode = make_shape(_shape_spec(args), grid)
        source = SimulationConfig(_state(args.state, mode, args.n), grid, args.nwf, args.seed, args.nmode)
    verdict = verify_single_mode(source, result, args.nmode_eff, args.z, args.threads)
    _write_json(verdict.to_dict(), args.out)
    return 0


def cmd_predict(args) -> int:
    pred = accuracy.predict(accuracy.AccuracyInputs(args.nwf, args.nmode, args.n))
    d = pred.to_dict()
    if args.target_infidelity is not None:
        d["required_waveforms"] = accuracy.required_waveforms(args.target_infidelity, args.nmode, args.n)
    # NaN is not valid JSON
    d = {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in d.items()}
    if any(isinstance(v, float) and math.isnan(v) for v in d["complex_bounds"]):
        d["complex_bounds"] = None
    _write_json(d, args.out)
    return 0


def cmd_sweep(args) -> int:
    plan = load_plan(args.plan)
    plan = dataclasses.replace(plan, base_seed=args.seed)
    summary_path = args.summary or str(Path(args.out).with_suffix(".summary.json"))
    rows = run_sweep(plan, checkpoint=args.out, threads=args.threads)
    Path(summary_path).write_text(summary_to_json(compare_to_model(rows)))
    return 0


def cmd_report(args) -> int:
    emit_report(ReportSpec(args.kind, args.input, args.out, args.csv, args.target,
                           args.nmode_eff, args.z))
    return 0


COMMANDS = {"simulate": cmd_simulate, "reconstruct": cmd_reconstruct, "spectrum": cmd_spectrum,
            "verify": cmd_verify, "predict": cmd_predict, "sweep": cmd_sweep, "report": cmd_report}


def _report_error(exc: TempModeError) -> int:
    line = {"error": type(exc).__name__, "exit_code": exc.exit_code, "message": str(exc)}
    line.update(exc.details())
    sys.stderr.write(json.dumps(line) + "\n")
    return exc.exit_code


def run(argv=None) -> int:
    """Parse ``argv`` and dispatch; returns the process exit code."""
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except TempModeError as exc:
        return _report_error(exc)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
