"""Command-line surface: tuning, table building, scans, experiments, runtime curves.

Every command accepts ``--config FILE`` with a JSON object whose keys are the
command's flag names; explicit flags override file values and unknown keys
are rejected.  The effective configuration is echoed into every output
sidecar so results are regenerable from the outputs alone.

Exit codes: 0 success, 2 usage error, 3 numeric guard tripped, 4 I/O error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import __version__
from .algebra import DegenerateSubspaceError
from .bias import Scheme, clf_angles
from .inference import DegenerateFitError
from .metrics import (
    GaussianBelief,
    NoiseModel,
    QuadratureDomainError,
    SingularLikelihoodError,
    fisher_information,
    rhat0,
    slope,
)
from .runtime_model import HardwareParams, RateDomainError, hardware_runtime_curve
from .sim import ExperimentConfig, run_experiment, write_experiment_csv
from .tuner import (
    LookupTable,
    Method,
    Objective,
    TuneSpec,
    build_lookup_table,
    tune,
)

NUMERIC_GUARDS = (
    SingularLikelihoodError,
    QuadratureDomainError,
    RateDomainError,
    DegenerateFitError,
    DegenerateSubspaceError,
    ArithmeticError,
)


@dataclass(frozen=True)
class Opt:
    name: str
    type: object = str
    default: object = None
    required: bool = False
    choices: tuple | None = None
    help: str = ""


_COMMON = (
    Opt("config", str, help="JSON file with flag values (flags override)"),
    Opt("seed", int, help="master seed; drawn and printed if absent"),
    Opt("threads", int, 1, help="worker count (outputs are independent of it)"),
)

_NOISE = (
    Opt("layer-fidelity", float, 1.0, help="per-layer process fidelity p"),
    Opt("spam-fidelity", float, 1.0, help="state-preparation-and-measurement fidelity"),
)

OPTIONS: dict[str, tuple[Opt, ...]] = {
    "tune": _COMMON
    + _NOISE
    + (
        Opt("scheme", str, "af", choices=("af", "ab")),
        Opt("objective", str, "fisher", choices=("fisher", "slope")),
        Opt("method", str, "coord", choices=("grad", "coord")),
        Opt("mu", float, required=True, help="tuning point theta in (0, pi)"),
        Opt("layers", int, 1),
        Opt("restarts", int, 10),
        Opt("max-rounds", int, 500),
        Opt("tolerance", float, 1e-8),
    ),
    "table": _COMMON
    + _NOISE
    + (
        Opt("scheme", str, "af", choices=("af", "ab")),
        Opt("objective", str, "fisher", choices=("fisher", "slope")),
        Opt("layers", int, 1),
        Opt("restarts", int, 10),
        Opt("max-rounds", int, 500),
        Opt("grid", int, 4001, help="uniform grid size over [-1, 1]"),
        Opt("grid-min", float, -1.0),
        Opt("grid-max", float, 1.0),
        Opt("out", str, "table.json"),
    ),
    "scan": _COMMON
    + _NOISE
    + (
        Opt("quantity", str, "fisher", choices=("fisher", "slope", "rhat0")),
        Opt("scheme", str, "af", choices=("af", "ab")),
        Opt("layers", int, 1),
        Opt("points", int, 41),
        Opt("min", float, help="grid start (theta for fisher/slope, Pi for rhat0)"),
        Opt("max", float, help="grid end"),
        Opt("restarts", int, 10),
        Opt("max-rounds", int, 500),
        Opt("out", str, "scan", help="output prefix (.csv and .json)"),
    ),
    "simulate": _COMMON
    + _NOISE
    + (
        Opt(
            "scheme",
            str,
            "af-elf",
            choices=("af-elf", "af-clf", "ab-elf", "ab-clf", "standard"),
        ),
        Opt("true-pi", float, required=True),
        Opt("prior-mean", float, required=True, help="prior mean of Pi"),
        Opt("prior-std", float, 0.03, help="prior standard deviation of Pi"),
        Opt("layers", int, 1),
        Opt("runs", int, 300),
        Opt("horizon", int, 20000, help="total time budget in ansatz durations"),
        Opt("table", str, help="lookup-table JSON for the engineered schemes"),
        Opt("table-grid", int, 41, help="grid size when building a table on the fly"),
        Opt("restarts", int, 10, help="restarts for on-the-fly table tuning"),
        Opt("fit-points", int, 11),
        Opt("out", str, "experiment", help="output prefix (.csv and .json)"),
    ),
    "runtime": _COMMON
    + (
        Opt("qubits", int, 100),
        Opt("depth", int, 200, help="two-qubit gate depth per layer"),
        Opt("gate-time", float, 1e-8, help="seconds per two-qubit gate layer"),
        Opt("spam-fidelity", float, 1.0),
        Opt("eps", str, "1e-3,1e-4,1e-5", help="comma-separated target errors"),
        Opt("pi", float, 0.0, help="estimand value for the error conversion"),
        Opt("infidelity-min", float, 1e-8),
        Opt("infidelity-max", float, 1e-2),
        Opt("points", int, 121),
        Opt("out", str, "runtime", help="output prefix (.csv and .json)"),
    ),
}


class UsageError(ValueError):
    pass


def _attr(name: str) -> str:
    return name.replace("-", "_")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="elfkit",
        description="Engineered likelihood functions for amplitude estimation",
    )
    parser.add_argument("--version", action="version", version=f"elfkit {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for command, opts in OPTIONS.items():
        p = sub.add_parser(command)
        for o in opts:
            p.add_argument(
                f"--{o.name}",
                type=o.type,
                default=None,
                choices=o.choices,
                help=o.help,
            )
    return parser


def _effective_config(args, command: str) -> dict:
    """Merge file config, CLI flags, and defaults; validate keys and choices."""
    opts = OPTIONS[command]
    by_name = {o.name: o for o in opts}
    file_cfg: dict = {}
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                file_cfg = json.load(fh)
        except OSError as exc:
            raise exc
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}")
        if not isinstance(file_cfg, dict):
            raise UsageError("config file must contain a JSON object")
        unknown = set(file_cfg) - set(by_name) - {"config"}
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
    effective = {}
    for o in opts:
        value = getattr(args, _attr(o.name))
        if value is None and o.name in file_cfg:
            value = file_cfg[o.name]
            if o.choices is not None and value not in o.choices:
                raise UsageError(f"config key {o.name!r} must be one of {o.choices}")
            if value is not None and o.type in (int, float) and not isinstance(value, bool):
                value = o.type(value)
        if value is None:
            value = o.default
        if value is None and o.required:
            raise UsageError(f"missing required option --{o.name}")
        effective[o.name] = value
    effective.pop("config", None)
    return effective


def _ensure_seed(cfg: dict) -> dict:
    if cfg.get("seed") is None:
        cfg["seed"] = int.from_bytes(os.urandom(6), "big")
        print(f"seed: {cfg['seed']}", file=sys.stderr)
    return cfg


def _sidecar(command: str, cfg: dict, extra: dict | None = None) -> dict:
    doc = {"tool": "elfkit", "version": __version__, "command": command, "config": cfg}
    if extra:
        doc.update(extra)
    return doc


def _out_paths(prefix: str) -> tuple[str, str]:
    base = prefix[:-4] if prefix.endswith(".csv") else prefix
    return base + ".csv", base + ".json"


def _write_json(path: str, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")


# -- commands -------------------------------------------------------------------


def cmd_tune(cfg: dict) -> int:
    spec = TuneSpec(
        scheme=Scheme(cfg["scheme"]),
        layers=cfg["layers"],
        mu=cfg["mu"],
        fidelity=NoiseModel(cfg["layer-fidelity"], cfg["spam-fidelity"]).process_fidelity(
            cfg["layers"]
        ),
        objective=Objective(cfg["objective"]),
        method=Method(cfg["method"]),
        restarts=cfg["restarts"],
        seed=cfg["seed"],
        tolerance=cfg["tolerance"],
        max_rounds=cfg["max-rounds"],
    )
    result = tune(spec)
    doc = _sidecar(
        "tune",
        cfg,
        {
            "result": {
                "x_opt": [float(v) for v in result.x_opt],
                "objective_value": result.objective_value,
                "iterations": result.iterations,
                "restart_index": result.restart_index,
            }
        },
    )
    json.dump(doc, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0


def cmd_table(cfg: dict) -> int:
    noise = NoiseModel(cfg["layer-fidelity"], cfg["spam-fidelity"])
    n = cfg["grid"]
    grid = np.linspace(cfg["grid-min"], cfg["grid-max"], n)

    def progress(done: int, total: int) -> None:
        if done % 50 == 0 or done == total:
            print(f"tuned {done}/{total} grid points", file=sys.stderr)

    table = build_lookup_table(
        Scheme(cfg["scheme"]),
        cfg["layers"],
        noise,
        grid,
        restarts=cfg["restarts"],
        seed=cfg["seed"],
        objective=Objective(cfg["objective"]),
        progress=progress,
        max_rounds=cfg["max-rounds"],
    )
    doc = table.to_json_dict()
    doc["config"] = cfg
    out = cfg["out"] if cfg["out"].endswith(".json") else cfg["out"] + ".json"
    _write_json(out, doc)
    print(f"wrote {out}", file=sys.stderr)
    return 0


def cmd_scan(cfg: dict) -> int:
    scheme = Scheme(cfg["scheme"])
    layers = cfg["layers"]
    noise = NoiseModel(cfg["layer-fidelity"], cfg["spam-fidelity"])
    f = noise.process_fidelity(layers)
    quantity = cfg["quantity"]
    over_pi = quantity == "rhat0"
    lo = cfg["min"] if cfg["min"] is not None else (-0.9 if over_pi else 0.1)
    hi = cfg["max"] if cfg["max"] is not None else (0.9 if over_pi else math.pi - 0.1)
    grid = np.linspace(lo, hi, cfg["points"])
    clf = clf_angles(layers)
    point_seeds = np.random.SeedSequence(cfg["seed"]).generate_state(grid.size, dtype=np.uint64)

    def evaluate(value: float, x) -> float:
        if quantity == "fisher":
            return fisher_information(scheme, value, f, x)
        if quantity == "slope":
            return slope(scheme, value, f, x)
        return rhat0(scheme, value, f, x, layers)

    rows = []
    warm: tuple = ()
    for i, v in enumerate(grid):
        mu = math.acos(v) if over_pi else float(v)
        spec = TuneSpec(
            scheme=scheme,
            layers=layers,
            mu=mu,
            fidelity=f,
            restarts=cfg["restarts"],
            seed=int(point_seeds[i]),
            max_rounds=cfg["max-rounds"],
            objective=Objective.SLOPE if quantity == "slope" else Objective.FISHER,
        )
        result = tune(spec, warm_starts=warm)
        warm = (result.x_opt,)
        rows.append((float(v), evaluate(float(v), clf), evaluate(float(v), result.x_opt)))

    csv_path, json_path = _out_paths(cfg["out"])
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["theta_or_pi", "clf_value", "elf_value"])
        for row in rows:
            writer.writerow([repr(row[0]), repr(row[1]), repr(row[2])])
    _write_json(json_path, _sidecar("scan", cfg))
    print(f"wrote {csv_path}", file=sys.stderr)
    return 0


def cmd_simulate(cfg: dict) -> int:
    noise = NoiseModel(cfg["layer-fidelity"], cfg["spam-fidelity"])
    table = None
    if cfg["scheme"].endswith("elf"):
        if cfg["table"]:
            table = LookupTable.load(cfg["table"])
        else:
            scheme = Scheme.AF if cfg["scheme"].startswith("af") else Scheme.AB
            print(
                f"building a {cfg['table-grid']}-point lookup table (pass --table to reuse one)",
                file=sys.stderr,
            )
            table = build_lookup_table(
                scheme,
                cfg["layers"],
                noise,
                cfg["table-grid"],
                restarts=cfg["restarts"],
                seed=cfg["seed"],
                max_rounds=100,
            )
    config = ExperimentConfig(
        scheme=cfg["scheme"],
        true_pi=cfg["true-pi"],
        prior_pi=GaussianBelief(cfg["prior-mean"], cfg["prior-std"] ** 2),
        layers=cfg["layers"],
        noise=noise,
        runs=cfg["runs"],
        horizon=cfg["horizon"],
        master_seed=cfg["seed"],
        table=table,
        fit_points=cfg["fit-points"],
        threads=cfg["threads"],
    )
    traces = run_experiment(config)
    csv_path, json_path = _out_paths(cfg["out"])
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        write_experiment_csv(traces, fh)
    _write_json(
        json_path,
        _sidecar(
            "simulate",
            cfg,
            {
                "growth_rate": traces.growth_rate,
                "excluded_runs": traces.excluded_runs,
                "final_rmse": float(traces.rmse[-1]),
            },
        ),
    )
    print(f"wrote {csv_path}", file=sys.stderr)
    return 0


def cmd_runtime(cfg: dict) -> int:
    hw = HardwareParams(
        qubits=cfg["qubits"],
        depth=cfg["depth"],
        gate_fidelity=0.999,  # placeholder; the curve sweeps the grid below
        gate_time=cfg["gate-time"],
        spam_fidelity=cfg["spam-fidelity"],
    )
    eps_raw = cfg["eps"]
    eps_list = (
        [float(v) for v in eps_raw.split(",")] if isinstance(eps_raw, str) else [float(v) for v in eps_raw]
    )
    grid = 1.0 - np.geomspace(cfg["infidelity-max"], cfg["infidelity-min"], cfg["points"])
    points = hardware_runtime_curve(hw, eps_list, f2q_grid=grid, pi=cfg["pi"])
    csv_path, json_path = _out_paths(cfg["out"])
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["f2q", "eps", "t_lower_s", "t_upper_s", "t_mid_s", "flags"])
        for p in points:
            writer.writerow(
                [
                    repr(p.gate_fidelity),
                    repr(p.eps),
                    repr(p.t_lower_s),
                    repr(p.t_upper_s),
                    repr(p.t_mid_s),
                    "ok" if p.valid else "lam_gt_1",
                ]
            )
    _write_json(json_path, _sidecar("runtime", cfg))
    print(f"wrote {csv_path}", file=sys.stderr)
    return 0


_HANDLERS = {
    "tune": cmd_tune,
    "table": cmd_table,
    "scan": cmd_scan,
    "simulate": cmd_simulate,
    "runtime": cmd_runtime,
}

_RANDOMIZED = {"tune", "table", "scan", "simulate"}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = _effective_config(args, args.command)
        if args.command in _RANDOMIZED:
            _ensure_seed(cfg)
        return _HANDLERS[args.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NUMERIC_GUARDS as exc:
        print(f"numeric guard: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
