"""Command-line front end: config-driven experiment pipelines.

Verbs: tune-curve, ple, inhomo, stabilize, calibrate-pulse.  Every command
reads one JSON configuration (shipped default unless --config is given),
derives per-task seeds from the master seed, and emits CSV/JSON files with
provenance headers.  Identical config and seed give byte-identical outputs.

Exit codes: 0 success, 2 configuration or input validation error, 3 runtime
range/domain error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import zlib
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import (RunConfig, load_config, load_default_config,
                     matched_sample_path)
from .control import run_stabilization, summarize_log
from .emitters import TuningCurve, shift_from_voltage_chain
from .errors import (ConfigError, ContractError, DomainError, InputError,
                     RangeError)
from .spectroscopy import (InhomogeneousSample, cdf_and_window,
                           effective_linewidth, sample_inhomogeneous,
                           scan_to_csv, simulate_ple)
from .actuator import pulsed_resonance_offset


def derive_seed(master: int, *keys) -> int:
    """Stable per-task sub-seed from the master seed and task labels."""
    parts = [master]
    for key in keys:
        parts.append(zlib.crc32(str(key).encode("utf-8")))
    return int(np.random.SeedSequence(parts).generate_state(1)[0])


def _fmt(x: float) -> str:
    return f"{float(x):.12g}"


def _provenance(cfg: RunConfig, command: str, seed: int) -> list[str]:
    return [
        f"tool=snvtune {__version__}",
        f"command={command}",
        f"config_sha256={cfg.config_hash()}",
        f"seed={seed}",
    ]


def _write_csv(path: Path, header_lines: list[str], columns: list[str],
               rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh)
        writer.writerow(columns)
        writer.writerows(rows)


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _parallel_map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(task) for task in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ---------------------------------------------------------------------------
# tune-curve

def _tune_one(args) -> list[tuple]:
    cfg, name, voltages = args
    emitter = cfg.emitter(name)
    rows = []
    for v in voltages:
        shift = shift_from_voltage_chain(emitter, cfg.device, v)
        fwhm = effective_linewidth(emitter, shift)
        rows.append((name, _fmt(v), _fmt(shift), _fmt(fwhm)))
    return rows


def cmd_tune_curve(cfg: RunConfig, ns, out: Path, seed: int, jobs: int) -> int:
    names = ns.emitters.split(",") if ns.emitters else list(cfg.emitters)
    for name in names:
        cfg.emitter(name)  # validate before any output
    v_max = ns.v_max if ns.v_max is not None else cfg.device.calibration.v_max
    if not 0.0 <= ns.v_min <= v_max:
        raise InputError(f"voltage grid [{ns.v_min}, {v_max}] is invalid")
    voltages = np.linspace(ns.v_min, v_max, ns.steps)
    chunks = _parallel_map(_tune_one, [(cfg, n, voltages) for n in names], jobs)
    rows = [row for chunk in chunks for row in chunk]
    path = out / "tune_curve.csv"
    _write_csv(path, _provenance(cfg, "tune-curve", seed),
               ["emitter", "bias_V", "shift_GHz", "fwhm_MHz"], rows)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# ple

def _ple_one(args) -> str:
    cfg, name, v, detunings, dwell, expected_mode, out_str, seed = args
    emitter = cfg.emitter(name)
    if expected_mode:
        scan = simulate_ple(emitter, cfg.device, v, detunings, dwell)
    else:
        scan = simulate_ple(emitter, cfg.device, v, detunings, dwell, seed=seed)
    path = Path(out_str) / f"ple_{name}_{v:g}V.csv"
    scan_to_csv(scan, path, header_lines=_provenance(cfg, "ple", seed),
                include_expected=expected_mode)
    return str(path)


def cmd_ple(cfg: RunConfig, ns, out: Path, seed: int, jobs: int) -> int:
    emitter = cfg.emitter(ns.emitter)
    voltages = [float(v) for v in ns.bias.split(",")]
    for v in voltages:
        if not 0.0 <= v <= cfg.device.calibration.v_max:
            raise RangeError(
                f"bias {v} V outside [0, {cfg.device.calibration.v_max}] V")
    tasks = []
    for v in voltages:
        center = ns.center
        if center is None:
            center = float(TuningCurve(emitter, cfg.device).shift(v))
        detunings = center + np.linspace(-0.5 * ns.span, 0.5 * ns.span, ns.points)
        task_seed = derive_seed(seed, "ple", ns.emitter, f"{v:g}")
        tasks.append((cfg, ns.emitter, v, detunings, ns.dwell,
                      ns.expected_value, str(out), task_seed))
    for path in _parallel_map(_ple_one, tasks, jobs):
        print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------
# inhomo

def _read_resonances_csv(path: Path) -> np.ndarray:
    values = []
    with path.open("r", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header is None:
            raise InputError(f"{path}: empty resonance file")
        try:
            values.append(float(header[0]))  # headerless file support
        except ValueError:
            pass
        for row in reader:
            if row:
                values.append(float(row[0]))
    if not values:
        raise InputError(f"{path}: no resonance values found")
    return np.asarray(values)


def cmd_inhomo(cfg: RunConfig, ns, out: Path, seed: int, jobs: int) -> int:
    if ns.input is not None and ns.n is not None:
        raise InputError("give either --n or --input, not both")
    if ns.input is not None:
        source = Path(ns.input)
        values = _read_resonances_csv(source)
        origin = str(source)
    elif ns.matched:
        source = matched_sample_path()
        values = _read_resonances_csv(source)
        origin = "shipped synthetic-matched dataset"
    else:
        n = ns.n if ns.n is not None else 173
        if n < 1:
            raise InputError("--n must be >= 1")
        rng = np.random.default_rng(derive_seed(seed, "inhomo", n))
        inh = cfg.inhomogeneous
        values = sample_inhomogeneous(
            n, inh.cluster_sigma_ghz, inh.cluster_weight, inh.broad_span_ghz,
            rng, center_ghz=cfg.physics.nu0)
        origin = f"generated, n={n}"
    sample = InhomogeneousSample(resonances=values, spot_count=values.size)
    result = cdf_and_window(sample, ns.window)

    cdf_path = out / "inhomo_cdf.csv"
    _write_csv(cdf_path, _provenance(cfg, "inhomo", seed) + [f"source={origin}"],
               ["frequency_GHz", "cdf"],
               [( _fmt(v), _fmt(c)) for v, c in zip(result.values, result.cdf)])
    summary = {
        "n_resonances": int(result.values.size),
        "window_GHz": ns.window,
        "best_window_fraction": result.best_fraction,
        "best_window_start_GHz": result.best_window_start,
        "source": origin,
        "config_sha256": cfg.config_hash(),
        "seed": seed,
    }
    _write_json(out / "inhomo_summary.json", summary)
    print(f"wrote {cdf_path}")
    print(f"best {ns.window:g} GHz window captures "
          f"{100.0 * result.best_fraction:.1f}% of resonances")
    return 0


# ---------------------------------------------------------------------------
# stabilize

def _stabilize_one(args) -> tuple[str, dict]:
    cfg, ns_dict, out_str, run_seed = args
    from dataclasses import asdict, replace
    emitter = cfg.emitter(ns_dict["emitter"])
    stab = cfg.control.stabilization
    overrides = {}
    if ns_dict["duration"] is not None:
        overrides["duration_s"] = ns_dict["duration"]
    if ns_dict["scans"] is not None:
        overrides["n_scans"] = ns_dict["scans"]
    if ns_dict["no_feedback"]:
        overrides["feedback"] = False
    if overrides:
        stab = replace(stab, **overrides)
    log = run_stabilization(emitter, cfg.device, cfg.control.drift,
                            cfg.control.lockin, cfg.control.pid,
                            cfg.control.cr_check, stab, run_seed)
    summary = summarize_log(log)
    summary.update(log.meta)
    summary["config_sha256"] = cfg.config_hash()
    summary["configs"] = {
        "drift": asdict(replace(cfg.control.drift)),
        "lockin": asdict(cfg.control.lockin),
        "pid": asdict(cfg.control.pid),
        "cr_check": asdict(cfg.control.cr_check),
        "stabilization": asdict(stab),
        "provenance": "drift block calibrated to the free-running spread; "
                      "lock-in/PID/CR values are documented defaults",
    }

    out = Path(out_str)
    tag = f"{run_seed}"
    head = _provenance(cfg, "stabilize", run_seed)
    upd_path = out / f"stabilize_updates_{tag}.csv"
    _write_csv(upd_path, head,
               ["time_s", "dc_voltage_V", "error_GHz", "lockin_valid", "cr_pass"],
               ((_fmt(t), _fmt(v), "" if np.isnan(e) else _fmt(e),
                 int(val), int(cr))
                for t, v, e, val, cr in zip(log.update_time_s, log.dc_voltage_v,
                                            log.error_ghz, log.lockin_valid,
                                            log.cr_pass)))
    scan_path = out / f"stabilize_scans_{tag}.csv"
    _write_csv(scan_path, head,
               ["time_s", "fitted_center_GHz", "fitted_fwhm_MHz", "converged",
                "true_center_GHz"],
               ((_fmt(t), _fmt(c), _fmt(w), int(k), _fmt(tr))
                for t, c, w, k, tr in zip(log.scan_time_s, log.scan_center_ghz,
                                          log.scan_fwhm_mhz, log.scan_converged,
                                          log.scan_true_center_ghz)))
    _write_json(out / f"stabilize_summary_{tag}.json", summary)
    return str(upd_path), summary


def cmd_stabilize(cfg: RunConfig, ns, out: Path, seed: int, jobs: int) -> int:
    cfg.emitter(ns.emitter)
    if ns.seeds:
        run_seeds = [int(s) for s in ns.seeds.split(",")]
    else:
        run_seeds = [seed]
    ns_dict = {"emitter": ns.emitter, "duration": ns.duration,
               "scans": ns.scans, "no_feedback": ns.no_feedback}
    tasks = [(cfg, ns_dict, str(out), s) for s in run_seeds]
    for path, summary in _parallel_map(_stabilize_one, tasks, jobs):
        mode = "free-running" if ns.no_feedback else "feedback"
        print(f"wrote {path}")
        print(f"seed {summary['seed']} ({mode}): center std = "
              f"{1000.0 * summary['center_std_ghz']:.1f} MHz over "
              f"{summary['n_converged']} scans, mean FWHM = "
              f"{summary['fwhm_mean_mhz']:.1f} MHz, summed FWHM = "
              f"{summary.get('fwhm_summed_mhz', float('nan')):.1f} MHz")
    return 0


# ---------------------------------------------------------------------------
# calibrate-pulse

def cmd_calibrate_pulse(cfg: RunConfig, ns, out: Path, seed: int, jobs: int) -> int:
    pulses = [float(p) for p in ns.pulses.split(",")]
    cooldowns = [float(c) for c in ns.cooldowns.split(",")]
    if not pulses or not cooldowns:
        raise InputError("pulse and cooldown grids must be non-empty")
    bias = ns.bias if ns.bias is not None else cfg.device.calibration.v_ref
    thermal = cfg.device.thermal
    rows = []
    for p in pulses:
        for c in cooldowns:
            offset = pulsed_resonance_offset(thermal, p, c, bias,
                                             v_ref=cfg.device.calibration.v_ref)
            rows.append((_fmt(p), _fmt(c), _fmt(offset), int(offset == 0.0)))
    path = out / "pulse_calibration.csv"
    _write_csv(path, _provenance(cfg, "calibrate-pulse", seed),
               ["pulse_us", "cooldown_us", "offset_GHz", "safe"], rows)
    print(f"wrote {path}")
    return 0


# ---------------------------------------------------------------------------

def _add_global_flags(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # registered on the main parser with real defaults and on every
    # subparser with SUPPRESS defaults, so the flags work in both positions
    def default(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--config", type=Path, default=default(None),
                        help="configuration JSON (default: shipped config)")
    parser.add_argument("--seed", type=int, default=default(None),
                        help="master seed (default: from config)")
    parser.add_argument("--out", type=Path, default=default(Path(".")),
                        help="output directory")
    parser.add_argument("--jobs", type=int, default=default(1),
                        help="parallel workers for independent tasks")
    parser.add_argument("--expected-value", action="store_true",
                        default=default(False),
                        help="noise-free expected-value mode where supported")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="snvtune",
        description="Strain-tuning and resonance-stabilization simulator "
                    "for SnV- centers in MEMS waveguide devices.")
    _add_global_flags(parser, suppress=False)
    parser.add_argument("--version", action="version",
                        version=f"snvtune {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    _add_global_flags(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("tune-curve", help="voltage-tuning curves per emitter",
                       parents=[common])
    p.add_argument("--emitters", default=None,
                   help="comma-separated emitter ids (default: all)")
    p.add_argument("--v-min", type=float, default=0.0)
    p.add_argument("--v-max", type=float, default=None)
    p.add_argument("--steps", type=int, default=33)
    p.set_defaults(func=cmd_tune_curve)

    p = sub.add_parser("ple", help="simulate PLE scans at given bias voltages",
                   parents=[common])
    p.add_argument("--emitter", required=True)
    p.add_argument("--bias", default="0",
                   help="comma-separated bias voltages in V")
    p.add_argument("--center", type=float, default=None,
                   help="scan window center in GHz (default: predicted shift)")
    p.add_argument("--span", type=float, default=4.0, help="scan span in GHz")
    p.add_argument("--points", type=int, default=161)
    p.add_argument("--dwell", type=float, default=0.005,
                   help="dwell time per point in s")
    p.set_defaults(func=cmd_ple)

    p = sub.add_parser("inhomo", help="inhomogeneous-distribution statistics",
                   parents=[common])
    group = p.add_mutually_exclusive_group()
    group.add_argument("--n", type=int, default=None,
                       help="number of resonances to generate")
    group.add_argument("--input", default=None,
                       help="CSV of resonance frequencies to ingest")
    group.add_argument("--matched", action="store_true",
                       help="use the shipped synthetic-matched dataset")
    p.add_argument("--window", type=float, default=40.0,
                   help="capture window width in GHz")
    p.set_defaults(func=cmd_inhomo)

    p = sub.add_parser("stabilize", help="run the stabilization loop",
                   parents=[common])
    p.add_argument("--emitter", default="axial_hinge")
    p.add_argument("--duration", type=float, default=None,
                   help="run duration in s (default: from config)")
    p.add_argument("--scans", type=int, default=None,
                   help="number of PLE scans (default: from config)")
    p.add_argument("--no-feedback", action="store_true",
                   help="free-running comparison run")
    p.add_argument("--seeds", default=None,
                   help="comma-separated run seeds (default: master seed)")
    p.set_defaults(func=cmd_stabilize)

    p = sub.add_parser("calibrate-pulse", help="pulsed-bias thermal offsets",
                   parents=[common])
    p.add_argument("--pulses", default="10,25,50,100,200",
                   help="pulse durations in us")
    p.add_argument("--cooldowns", default="0,250,500,1000,1500,3000",
                   help="cooldown durations in us")
    p.add_argument("--bias", type=float, default=None,
                   help="bias voltage in V (default: calibration v_ref)")
    p.set_defaults(func=cmd_calibrate_pulse)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    try:
        cfg = load_config(ns.config) if ns.config else load_default_config()
        seed = ns.seed if ns.seed is not None else cfg.seed
        out = ns.out
        out.mkdir(parents=True, exist_ok=True)
        return ns.func(cfg, ns, out, seed, max(1, ns.jobs))
    except (ConfigError, InputError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (RangeError, DomainError, ContractError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
