"""Command-line interface: ``dualloop {decompose,compile,verify,run,estimate}``.

Exit codes: 0 success, 1 verification failure, 2 invalid input, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .decomp import DecompositionPlan, decompose, reconstruct
from .errors import DualLoopError, NumericalError, ValidationError
from .gaussian import (LossModel, cov_to_csv, cov_to_json, is_physical, physicality,
                       simulate)
from .homodyne import (BASIS_LABELS, DEFAULT_SAMPLES, estimate_covariance,
                       sample_all_bases, samples_from_csv, samples_to_csv)
from .linops import as_unitary, complex_from_json
from .loopcompiler import (MEASUREMENT_BASIS, TAU_NS, VPS, ControlTimeline, compile_plan,
                           round_trip_counts, verify)
from .metrics import (INSEPARABILITY_PAIRS, combo, combo_variance, gaussian_fidelity,
                      inseparability)
from .presets import NULLIFIERS, PRESET_NAMES, preset_timeline

EXIT_OK, EXIT_MISMATCH, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2, 3
OUTPUT_DIR_ENV = "DUALLOOP_OUTPUT_DIR"
VERIFY_TOL = 1e-9

DEFAULTS = {
    "preset": None,
    "unitary": None,
    "final_phase_mode": MEASUREMENT_BASIS,
    "tau_ns": TAU_NS,
    "source_detection_loss": 0.23,
    "inner_trip_loss": 0.15,
    "outer_trip_loss": 0.20,
    "input_squeezing_dB": 7.4,
    "charge_loading_trip": False,
    "lossless": False,
    "estimate": False,
    "seed": 0,
    "samples": DEFAULT_SAMPLES,
    "output_dir": None,
}


def _read_json(path) -> object:
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise ValidationError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc


def _read_unitary(path) -> np.ndarray:
    return as_unitary(complex_from_json(_read_json(path)))


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _emit(text: str, out) -> None:
    if out:
        write_atomic(Path(out), text)
    else:
        sys.stdout.write(text)


# -- subcommands -----------------------------------------------------------

def cmd_decompose(args) -> int:
    U = _read_unitary(args.unitary)
    plan = decompose(U)
    err = float(np.linalg.norm(reconstruct(plan) - U))
    _emit(_dumps(plan.to_json()), args.output)
    print(f"reconstruction error (Frobenius): {err:.3e}", file=sys.stderr)
    return EXIT_OK


def cmd_compile(args) -> int:
    if (args.plan is None) == (args.unitary is None):
        raise ValidationError("give exactly one of a plan file or --unitary")
    if args.plan is not None:
        data = _read_json(args.plan)
        if not isinstance(data, dict):
            raise ValidationError("plan file must hold a JSON object")
        plan = DecompositionPlan.from_json(data)
    else:
        plan = decompose(_read_unitary(args.unitary))
    t = compile_plan(plan, apply_final_phases=args.final_phase_mode == VPS, tau_ns=args.tau_ns)
    _emit(_dumps(t.to_json()), args.output)
    print(t.control_table(), end="", file=sys.stderr)
    return EXIT_OK


def cmd_verify(args) -> int:
    data = _read_json(args.timeline)
    if not isinstance(data, dict):
        raise ValidationError("timeline file must hold a JSON object")
    t = ControlTimeline.from_json(data)
    dev = verify(t, _read_unitary(args.unitary))
    ok = dev < VERIFY_TOL
    print(f"max deviation up to global phase: {dev:.3e} ({'match' if ok else 'MISMATCH'})")
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_estimate(args) -> int:
    try:
        text = Path(args.samples_csv).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {args.samples_csv}: {exc.strerror}") from exc
    G = estimate_covariance(samples_from_csv(text))
    _emit(cov_to_csv(G), args.output)
    if not is_physical(G):
        print(f"warning: estimate is unphysical (min eig {physicality(G):.3e})", file=sys.stderr)
    return EXIT_OK


def resolve_config(args) -> dict:
    """Merge defaults, the JSON config file and explicit flags (flags win)."""
    cfg = dict(DEFAULTS)
    if args.config:
        data = _read_json(args.config)
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        cfg.update(data)
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    if cfg["output_dir"] is None:
        cfg["output_dir"] = os.environ.get(OUTPUT_DIR_ENV, "dualloop-out")
    if (cfg["preset"] is None) == (cfg["unitary"] is None):
        raise ValidationError("give exactly one of --preset or --unitary")
    if cfg["preset"] is not None and cfg["preset"] not in PRESET_NAMES:
        raise ValidationError(f"unknown preset {cfg['preset']!r}; choose from {', '.join(PRESET_NAMES)}")
    if cfg["final_phase_mode"] not in (VPS, MEASUREMENT_BASIS):
        raise ValidationError(f"final_phase_mode must be {VPS!r} or {MEASUREMENT_BASIS!r}")
    if int(cfg["samples"]) < 2:
        raise ValidationError("need at least 2 samples per basis")
    if float(cfg["tau_ns"]) <= 0:
        raise ValidationError("tau_ns must be positive")
    return cfg


def config_hash(cfg: dict) -> str:
    # The output location does not change the results.
    key = {k: v for k, v in cfg.items() if k != "output_dir"}
    return hashlib.sha256(json.dumps(key, sort_keys=True).encode()).hexdigest()


def _loss_model(cfg: dict) -> LossModel:
    if cfg["lossless"]:
        return LossModel.lossless(float(cfg["input_squeezing_dB"]))
    return LossModel(float(cfg["source_detection_loss"]), float(cfg["inner_trip_loss"]),
                     float(cfg["outer_trip_loss"]), float(cfg["input_squeezing_dB"]),
                     bool(cfg["charge_loading_trip"]))


def run(cfg: dict) -> dict[str, str]:
    """Produce the output files of a run as {file name: contents}."""
    tau = float(cfg["tau_ns"])
    if cfg["preset"] is not None:
        t, target = preset_timeline(cfg["preset"], tau_ns=tau)
    else:
        plan = decompose(_read_unitary(cfg["unitary"]))
        t = compile_plan(plan, apply_final_phases=cfg["final_phase_mode"] == VPS, tau_ns=tau)
        target = f"compiled unitary from {Path(cfg['unitary']).name}"
    lm = _loss_model(cfg)
    G = simulate(t, lm=lm, check_every_step=True)
    n = t.n_modes
    ideal = simulate(t, lm=LossModel.lossless(lm.input_squeezing_dB))
    no_loop = simulate(t, lm=lm.without_loop_losses())
    counts = round_trip_counts(t, lm.charge_loading_trip)
    report = {
        "provenance": {"version": __version__, "seed": int(cfg["seed"]),
                       "config_hash": config_hash(cfg)},
        "config": {k: v for k, v in cfg.items() if k != "output_dir"},
        "target": target,
        "n_modes": n,
        "round_trips": {str(k): v for k, v in counts.as_dict().items()},
        "fidelity": {
            "vs_lossless": gaussian_fidelity(G, ideal),
            "vs_without_loop_losses": gaussian_fidelity(G, no_loop),
        },
        "quadrature_variances": {
            f"{q}{i + 1}": float(G[2 * i + (q == 'p'), 2 * i + (q == 'p')])
            for i in range(n) for q in ("x", "p")
        },
    }
    name = cfg["preset"]
    if name is not None:
        report["nullifiers"] = {e: combo_variance(G, combo(e, n)) for e in NULLIFIERS[name]}
        if name in INSEPARABILITY_PAIRS:
            report["inseparability"] = inseparability(G, name).to_json()
    files = {
        "control_table.txt": t.control_table(),
        "timeline.json": _dumps(t.to_json()),
        "covariance.csv": cov_to_csv(G),
        "covariance.json": _dumps(cov_to_json(G)),
    }
    if cfg["estimate"]:
        if n != 3:
            raise ValidationError("sampled estimation is implemented for 3 modes only")
        samples = sample_all_bases(G, int(cfg["samples"]), int(cfg["seed"]))
        G_hat = estimate_covariance(samples)
        files["samples.csv"] = samples_to_csv(samples)
        files["estimate.csv"] = cov_to_csv(G_hat)
        files["estimate.json"] = _dumps(cov_to_json(G_hat))
        est = {
            "bases": list(BASIS_LABELS),
            "samples_per_basis": int(cfg["samples"]),
            "max_abs_error": float(np.max(np.abs(G_hat - G))),
            "physical": is_physical(G_hat),
        }
        if name in INSEPARABILITY_PAIRS:
            est["inseparability"] = inseparability(G_hat, name).to_json()
        report["estimate"] = est
    files["report.json"] = _dumps(report)
    return files


def cmd_run(args) -> int:
    cfg = resolve_config(args)
    files = run(cfg)
    out = Path(cfg["output_dir"])
    for fname, text in files.items():
        write_atomic(out / fname, text)
    report = json.loads(files["report.json"])
    print(f"wrote {len(files)} files to {out}")
    print(f"fidelity vs lossless target: {report['fidelity']['vs_lossless']:.4f}")
    for e in report.get("inseparability", {}).get("entries", []):
        verdict = "pass" if e["passes"] else "FAIL"
        print(f"V({e['combos'][0]}) + V({e['combos'][1]}) = {e['value']:.4f} < 4: {verdict}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dualloop", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("decompose", help="decompose a unitary into a T-matrix plan")
    d.add_argument("unitary", help="JSON unitary (rows of [re, im] pairs)")
    d.add_argument("-o", "--output", help="plan file (default: stdout)")
    d.set_defaults(func=cmd_decompose)

    c = sub.add_parser("compile", help="compile a plan or unitary into a control timeline")
    c.add_argument("plan", nargs="?", help="plan JSON from 'decompose'")
    c.add_argument("--unitary", help="compile this unitary directly")
    c.add_argument("--final-phase-mode", choices=(VPS, MEASUREMENT_BASIS), default=MEASUREMENT_BASIS)
    c.add_argument("--tau-ns", type=float, default=TAU_NS)
    c.add_argument("-o", "--output", help="timeline file (default: stdout)")
    c.set_defaults(func=cmd_compile)

    v = sub.add_parser("verify", help="check that a timeline realises a unitary")
    v.add_argument("timeline")
    v.add_argument("unitary")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("run", help="simulate a preset or unitary and write a report bundle")
    r.add_argument("--config", help="JSON file with run settings")
    r.add_argument("--preset", help=f"one of {', '.join(PRESET_NAMES)}")
    r.add_argument("--unitary", help="JSON unitary to compile and simulate")
    r.add_argument("--final-phase-mode", choices=(VPS, MEASUREMENT_BASIS))
    r.add_argument("--tau-ns", type=float)
    r.add_argument("--source-detection-loss", type=float)
    r.add_argument("--inner-trip-loss", type=float)
    r.add_argument("--outer-trip-loss", type=float)
    r.add_argument("--squeezing-db", dest="input_squeezing_dB", type=float)
    r.add_argument("--charge-loading-trip", action="store_true", default=None,
                   help="also charge the inner trip right after a pulse is loaded")
    r.add_argument("--lossless", action="store_true", default=None)
    r.add_argument("--estimate", action="store_true", default=None,
                   help="sample the five homodyne bases and reconstruct the covariance")
    r.add_argument("--seed", type=int)
    r.add_argument("--samples", type=int, help=f"samples per basis (default {DEFAULT_SAMPLES})")
    r.add_argument("--output-dir", help=f"default: ${OUTPUT_DIR_ENV} or ./dualloop-out")
    r.set_defaults(func=cmd_run)

    e = sub.add_parser("estimate", help="reconstruct a covariance from homodyne samples")
    e.add_argument("samples_csv")
    e.add_argument("-o", "--output", help="covariance CSV (default: stdout)")
    e.set_defaults(func=cmd_estimate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DualLoopError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
