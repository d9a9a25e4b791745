"""Command-line entry point.

Every subcommand resolves a configuration from built-in defaults, an
optional ``--config`` JSON file (a plain config or a previous
``manifest.json``) and explicit flags, in that order of precedence. Outputs
go to ``--out`` together with a ``manifest.json`` that reproduces the run.

Examples::

    shadowkit correlate --qubits 3 --projections 10000 --observables 5000 --seed 7 --out runs/corr
    shadowkit fidelity-curve --qubits 5 --grid 50,100,251,1000,10000 --estimator shadow --out runs/fid
    shadowkit correlate --config runs/corr/manifest.json --out runs/corr2
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import platform
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    ESTIMATORS,
    OBSERVABLE_KINDS,
    estimate_state,
    run_bias_study,
    run_correlation_study,
    run_fidelity_vs_p,
    run_median_sweep,
    simulate_run,
)
from .baselines import compensated_fidelity, fidelity
from .io import (
    matrix_to_json,
    read_csv,
    read_json,
    vector_from_json,
    vector_to_json,
    write_csv,
    write_json,
)
from .sim import ExperimentConfig
from .stabilizer import build_state, sample_stabilizer_params

DEFAULTS = {
    "qubits": 3,
    "projections": 10000,
    "exposure": 3e5,
    "seed": 0,
    "gouy_phase": 0.0,
    "observables": 5000,
    "observable_kind": "haar",
    "estimator": "shadow",
    "grid": [50, 100, 251, 1000, 10000],
    "k_grid": list(range(1, 51)),
    "repetitions": None,
    "count": 10,
}

DEFAULT_REPETITIONS = {"fidelity-curve": 5}


class ConfigError(ValueError):
    pass


def _int_field(cfg, name, minimum=None):
    v = cfg[name]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"config field '{name}' must be an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"config field '{name}' must be >= {minimum}, got {v}")
    return v


def _int_list_field(cfg, name):
    v = cfg[name]
    if not isinstance(v, list) or not v or any(isinstance(x, bool) or not isinstance(x, int) or x < 1 for x in v):
        raise ConfigError(f"config field '{name}' must be a nonempty list of positive integers, got {v!r}")
    return v


def validate_config(cfg: dict) -> dict:
    unknown = sorted(set(cfg) - set(DEFAULTS))
    if unknown:
        raise ConfigError(f"unknown config field '{unknown[0]}'")
    _int_field(cfg, "qubits", 1)
    _int_field(cfg, "projections", 1)
    _int_field(cfg, "seed", 0)
    _int_field(cfg, "observables", 2)
    _int_field(cfg, "count", 1)
    if cfg["repetitions"] is not None:
        _int_field(cfg, "repetitions", 1)
    exp = cfg["exposure"]
    if exp is not None and (isinstance(exp, bool) or not isinstance(exp, (int, float)) or not exp > 0 or math.isinf(exp)):
        raise ConfigError(f"config field 'exposure' must be a positive number or null, got {exp!r}")
    if isinstance(cfg["gouy_phase"], bool) or not isinstance(cfg["gouy_phase"], (int, float)):
        raise ConfigError(f"config field 'gouy_phase' must be a number, got {cfg['gouy_phase']!r}")
    if cfg["estimator"] not in ESTIMATORS:
        raise ConfigError(f"config field 'estimator' must be one of {ESTIMATORS}, got {cfg['estimator']!r}")
    if cfg["observable_kind"] not in OBSERVABLE_KINDS:
        raise ConfigError(f"config field 'observable_kind' must be one of {OBSERVABLE_KINDS}, got {cfg['observable_kind']!r}")
    grid = _int_list_field(cfg, "grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("config field 'grid' must be strictly ascending")
    _int_list_field(cfg, "k_grid")
    return cfg


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _exposure(text: str):
    if text.lower() in ("inf", "none", "exact"):
        return None
    return float(text)


def resolve_config(args: argparse.Namespace) -> dict:
    cfg = dict(DEFAULTS)
    if args.config:
        data = read_json(args.config)
        if not isinstance(data, dict):
            raise ConfigError(f"{args.config}: config must be a JSON object")
        if "config" in data and "command" in data:
            data = data["config"]
        cfg.update(data)
    for name in DEFAULTS:
        value = getattr(args, name, None)
        if value is not None:
            cfg[name] = value
    if getattr(args, "exact", False):
        cfg["exposure"] = None
    if cfg["repetitions"] is None:
        cfg["repetitions"] = DEFAULT_REPETITIONS.get(args.command, 1)
    return validate_config(cfg)


def experiment_config(cfg: dict) -> ExperimentConfig:
    return ExperimentConfig(cfg["qubits"], cfg["projections"], cfg["exposure"], cfg["seed"], float(cfg["gouy_phase"]))


def write_manifest(out: Path, command: str, cfg: dict) -> None:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    write_json(
        out / "manifest.json",
        {
            "command": command,
            "seed": cfg["seed"],
            "config": cfg,
            "config_hash": hashlib.sha256(canonical.encode()).hexdigest(),
            "versions": {"shadowkit": __version__, "numpy": np.__version__, "python": platform.python_version()},
        },
    )


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _report_rows(report):
    return ((i, m, e) for i, (m, e) in enumerate(report.points))


# -- subcommands ----------------------------------------------------------------------


def cmd_stab_sample(args, cfg):
    rng = np.random.default_rng(cfg["seed"])
    n = cfg["qubits"]
    records = []
    for _ in range(cfg["count"]):
        params = sample_stabilizer_params(n, rng)
        records.append({"n": n, "k": params.k, "amplitudes": vector_to_json(build_state(params))})
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_json(out, records)
    write_manifest(out.parent, args.command, cfg)


def cmd_simulate(args, cfg):
    out = _out_dir(args)
    run = simulate_run(experiment_config(cfg))
    write_csv(out / "records.csv", ["projector_index", "count"], enumerate(run.counts))
    write_json(out / "projectors.json", {"n": cfg["qubits"], "projectors": [vector_to_json(p) for p in run.psi]})
    write_json(
        out / "true_state.json",
        {"n": cfg["qubits"], "prepared": vector_to_json(run.prepared), "true_state": vector_to_json(run.true_state)},
    )
    write_manifest(out, args.command, cfg)


def load_records(records_path, projectors_path):
    header, rows = read_csv(records_path)
    if header != ["projector_index", "count"]:
        raise ConfigError(f"{records_path}: expected columns projector_index,count")
    proj = read_json(projectors_path)
    psi = np.array([vector_from_json(p) for p in proj["projectors"]])
    idx = np.array([int(r[0]) for r in rows])
    counts = np.array([float(r[1]) for r in rows])
    if (idx < 0).any() or (idx >= len(psi)).any():
        raise ConfigError(f"{records_path}: projector_index out of range")
    if np.all(counts == np.round(counts)):
        counts = counts.astype(np.int64)
    return int(proj["n"]), psi[idx], counts


def cmd_estimate(args, cfg):
    if not args.records or not args.projectors:
        raise ConfigError("estimate needs --records and --projectors")
    out = _out_dir(args)
    n, psi, counts = load_records(args.records, args.projectors)
    est = estimate_state(cfg["estimator"], psi, counts, n)
    matrix = getattr(est, "matrix", est)
    write_json(out / "estimate.json", {"n": n, "estimator": cfg["estimator"], "matrix": matrix_to_json(matrix)})
    if args.prepared:
        prepared = vector_from_json(read_json(args.prepared)["prepared"])
        res = compensated_fidelity(est, prepared)
        write_json(out / "fidelity.json", {"fidelity": res.fidelity, "phase": res.phase, "uncompensated": fidelity(est, prepared)})
        write_csv(out / "gouy_curve.csv", ["phi", "fidelity"], zip(res.curve_phi, res.curve_fidelity))
    write_manifest(out, args.command, cfg)


def cmd_correlate(args, cfg):
    out = _out_dir(args)
    report = run_correlation_study(
        experiment_config(cfg), cfg["observables"], cfg["observable_kind"], repetitions=cfg["repetitions"]
    )
    write_json(out / "report.json", report.to_json())
    write_csv(out / "points.csv", ["index", "o_meas", "o_est"], _report_rows(report))
    write_manifest(out, args.command, cfg)


def cmd_bias(args, cfg):
    out = _out_dir(args)
    shadow, mle = run_bias_study(experiment_config(cfg), cfg["observables"], repetitions=cfg["repetitions"])
    write_json(out / "report.json", {"shadow": shadow.to_json(), "mle": mle.to_json()})
    write_csv(out / "points_shadow.csv", ["index", "o_meas", "o_est"], _report_rows(shadow))
    write_csv(out / "points_mle.csv", ["index", "o_meas", "o_est"], _report_rows(mle))
    write_manifest(out, args.command, cfg)


def cmd_fidelity_curve(args, cfg):
    out = _out_dir(args)
    curve = run_fidelity_vs_p(experiment_config(cfg), cfg["grid"], cfg["estimator"], cfg["repetitions"])
    write_csv(
        out / "curve.csv",
        ["P", "mean_F", "stderr_F"],
        zip(curve.projection_counts, curve.fidelity_mean, curve.fidelity_stderr),
    )
    write_manifest(out, args.command, cfg)


def cmd_median_sweep(args, cfg):
    out = _out_dir(args)
    sweep = run_median_sweep(experiment_config(cfg), cfg["k_grid"], cfg["observables"], repetitions=cfg["repetitions"])
    write_csv(out / "median_sweep.csv", ["K", "pearson_r"], sweep)
    write_manifest(out, args.command, cfg)


COMMANDS = {
    "stab-sample": cmd_stab_sample,
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "correlate": cmd_correlate,
    "bias": cmd_bias,
    "fidelity-curve": cmd_fidelity_curve,
    "median-sweep": cmd_median_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config or a previous manifest.json")
    common.add_argument("--out", required=True, help="output directory (a file for stab-sample)")
    common.add_argument("--qubits", type=int)
    common.add_argument("--projections", type=int)
    common.add_argument("--exposure", type=_exposure, help="photons at unit overlap; 'inf' for exact frequencies")
    common.add_argument("--exact", action="store_true", help="same as --exposure inf")
    common.add_argument("--seed", type=int)
    common.add_argument("--gouy-phase", dest="gouy_phase", type=float)
    common.add_argument("--observables", type=int)
    common.add_argument("--observable-kind", dest="observable_kind", choices=OBSERVABLE_KINDS)
    common.add_argument("--estimator", choices=ESTIMATORS)
    common.add_argument("--grid", type=_int_list)
    common.add_argument("--k-grid", dest="k_grid", type=_int_list)
    common.add_argument("--repetitions", type=int)
    common.add_argument("--count", type=int, help="number of states for stab-sample")

    parser = argparse.ArgumentParser(prog="shadowkit", description="Classical-shadow estimation pipelines")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "estimate":
            p.add_argument("--records", help="records.csv from simulate")
            p.add_argument("--projectors", help="projectors.json from simulate")
            p.add_argument("--prepared", help="true_state.json; enables compensated fidelity output")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](args, cfg)
    except (ValueError, KeyError, OSError, json.JSONDecodeError) as exc:
        print(f"shadowkit {args.command}: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
