"""Command-line entry point: ``elrp generate|solve|check|export-lp|bench|sweep``.

Results go to files; diagnostics go to stderr. Exit codes: 0 success,
1 infeasible instance or violated solution, 2 usage or input errors.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Optional, Sequence

from . import __version__
from .bench import (ALGORITHMS, SUITE_SIZES, BenchmarkError, default_suite,
                    temperature_sweep)
from .feasibility import (InfeasibleError, check_solution, exact_solve_tiny,
                          load_solution, save_solution)
from .instance import (InstanceFormatError, generate_instance, load_instance,
                       save_instance)
from .milp import build_ev_model, build_evl_model, export_lp
from .sigalns import SigalnsParams
from .soc import (DEFAULT_CHARGE_TIME, DEFAULT_LAMBDA0, DEFAULT_LAMBDA1, DEFAULT_LAMBDA2,
                  ChargingModel, calibration_hash, charging_from_dict)
from .tsmcws import TsMcwsParams

EXIT_OK, EXIT_INFEASIBLE, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _param_table() -> dict[str, object]:
    """Every documented override key with its default."""
    table: dict[str, object] = {}
    for prefix, cls in (("tsmcws", TsMcwsParams), ("sigalns", SigalnsParams)):
        for f in dataclasses.fields(cls):
            if f.name != "seed":
                table[f"{prefix}.{f.name}"] = f.default
    table["charging.lambda0"] = DEFAULT_LAMBDA0
    table["charging.lambda1"] = DEFAULT_LAMBDA1
    table["charging.lambda2"] = DEFAULT_LAMBDA2
    return table


PARAMETERS = _param_table()


def _parse_value(key: str, text):
    default = PARAMETERS[key]
    if not isinstance(text, str):
        return text
    if text.lower() in ("none", "null"):
        return None
    if isinstance(default, bool):
        return text.lower() in ("1", "true", "yes")
    if isinstance(default, int) and not isinstance(default, bool):
        return int(text)
    return float(text)


def parse_overrides(pairs: Sequence[str], base: Optional[dict] = None) -> dict[str, object]:
    out = dict(base or {})
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {pair!r}")
        out[key.strip()] = value.strip()
    for key in list(out):
        if key not in PARAMETERS:
            raise UsageError(f"unknown parameter {key!r}; see --help for the list")
        try:
            out[key] = _parse_value(key, out[key])
        except ValueError:
            raise UsageError(f"bad value for {key}: {out[key]!r}") from None
    return out


def split_overrides(overrides: dict) -> tuple[dict[str, dict], dict]:
    algos: dict[str, dict] = {name: {} for name in ALGORITHMS}
    charging: dict = {}
    for key, value in overrides.items():
        prefix, name = key.split(".", 1)
        if prefix == "charging":
            charging[name] = value
        else:
            algos[prefix][name] = value
    return algos, charging


def load_config() -> dict:
    path = os.environ.get("ELRP_CONFIG")
    if not path:
        return {}
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"ELRP_CONFIG={path}: {exc}") from None
    if not isinstance(doc, dict):
        raise UsageError(f"ELRP_CONFIG={path}: expected a JSON object")
    allowed = {"temperature", "charge_time", "seed", "jobs", "params"}
    unknown = set(doc) - allowed
    if unknown:
        raise UsageError(f"ELRP_CONFIG={path}: unknown keys {sorted(unknown)}")
    return doc


def _charging(temperature: float, charge_time: float, charging_over: dict) -> ChargingModel:
    return ChargingModel(
        charging_over.get("lambda0", DEFAULT_LAMBDA0),
        charging_over.get("lambda1", DEFAULT_LAMBDA1),
        charging_over.get("lambda2", DEFAULT_LAMBDA2),
        float(charge_time), float(temperature),
    )


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated number list, got {text!r}") from None


# -- subcommands --------------------------------------------------------------

def cmd_generate(args, cfg) -> int:
    if args.suite_dir:
        out = Path(args.suite_dir)
        out.mkdir(parents=True, exist_ok=True)
        sizes = [int(x) for x in _floats(args.sizes)] if args.sizes else list(SUITE_SIZES)
        entries = []
        for iid, inst in default_suite(sizes):
            save_instance(inst, out / f"{iid}.json")
            entries.append({"id": iid, "path": f"{iid}.json"})
        (out / "suite.json").write_text(json.dumps({"instances": entries}, indent=1) + "\n",
                                        encoding="utf-8")
        return EXIT_OK
    if not args.out:
        raise UsageError("generate needs --out (or --suite-dir)")
    inst = generate_instance(args.seed, args.customers, args.stations, args.side, args.fleet)
    save_instance(inst, args.out)
    return EXIT_OK


def cmd_solve(args, cfg) -> int:
    inst = load_instance(args.instance)
    algos, charging_over = split_overrides(args.overrides)
    charging = _charging(args.temperature, args.charge_time, charging_over)
    if args.algorithm == "exact":
        sol = exact_solve_tiny(inst, charging, variant="EVL")
        sol.info.update(algorithm="exact")
    else:
        _, cls = ALGORITHMS[args.algorithm]
        fn = ALGORITHMS[args.algorithm][0]
        try:
            params = cls(**dict(algos[args.algorithm], seed=args.seed))
        except (TypeError, ValueError) as exc:
            raise UsageError(str(exc)) from None
        sol = fn(inst, charging, params)
    sol.info["charging"] = charging.to_dict()
    save_solution(sol, args.out)
    return EXIT_OK


def cmd_check(args, cfg) -> int:
    inst = load_instance(args.instance)
    sol = load_solution(args.solution)
    if args.temperature is not None:
        _, charging_over = split_overrides(args.overrides)
        charge_time = args.charge_time if args.charge_time is not None else DEFAULT_CHARGE_TIME
        charging = _charging(args.temperature, charge_time, charging_over)
    elif "charging" in sol.info:
        charging = charging_from_dict(sol.info["charging"])
    else:
        raise UsageError("solution has no charging record; pass --temperature")
    report = check_solution(inst, charging, sol)
    if args.out:
        Path(args.out).write_text(
            json.dumps({"clean": report.clean, "objective": sol.total,
                        "violations": [str(v) for v in report]}, indent=1) + "\n",
            encoding="utf-8")
    if not report.clean:
        print(f"{len(report)} violation(s):", file=sys.stderr)
        for v in report:
            print(f"  {v}", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_export_lp(args, cfg) -> int:
    inst = load_instance(args.instance)
    sec = not args.no_subtour
    if args.model == "ev":
        model = build_ev_model(inst, subtour_elimination=sec)
    else:
        _, charging_over = split_overrides(args.overrides)
        model = build_evl_model(inst, _charging(args.temperature, args.charge_time, charging_over),
                                subtour_elimination=sec)
    export_lp(model, args.out)
    return EXIT_OK


def _load_suite(path: Optional[str], temps, charge_times):
    # generated suites are sized so that every cell of the requested grid is servable
    grid = {"temps": temps, "charge_times": charge_times}
    if path is None or path == "default":
        return default_suite(**grid)
    p = Path(path)
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"suite file {path}: {exc}") from None
    if "sizes" in doc:
        return default_suite([int(n) for n in doc["sizes"]], **grid)
    items = []
    for entry in doc.get("instances", []):
        items.append((str(entry["id"]), load_instance(p.parent / entry["path"])))
    if not items:
        raise UsageError(f"suite file {path}: no instances")
    return items


def _run_grid(args, cfg, temps, charge_times) -> int:
    algos, charging_over = split_overrides(args.overrides)
    if charging_over:
        raise UsageError("charging.* overrides are not supported by bench/sweep")
    names = [a.strip() for a in args.algorithms.split(",") if a.strip()]
    for a in names:
        if a not in ALGORITHMS:
            raise UsageError(f"unknown algorithm {a!r}")
    Path(args.out).mkdir(parents=True, exist_ok=True)
    temperature_sweep(_load_suite(args.suite, temps, charge_times), names, temps, charge_times,
                      args.reps,
                      args.base_seed, overrides={a: algos[a] for a in names},
                      jobs=args.jobs, out_dir=args.out)
    return EXIT_OK


def cmd_grid(args, cfg) -> int:
    """Shared by bench and sweep; they differ only in default grids."""
    return _run_grid(args, cfg, _floats(args.temps), _floats(args.charge_times))


# -- parser -------------------------------------------------------------------------

def _param_help() -> str:
    lines = ["parameters accepted by --param key=value (and the ELRP_CONFIG 'params' object):"]
    for key, default in PARAMETERS.items():
        lines.append(f"  {key} (default {default})")
    return "\n".join(lines)


def build_parser(cfg: Optional[dict] = None) -> argparse.ArgumentParser:
    cfg = cfg or {}
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="elrp", formatter_class=fmt,
        description="Electric-vehicle location-routing toolkit under ambient temperature.",
        epilog=_param_help())
    parser.add_argument("--version", action="version",
                        version=f"elrp {__version__} (calibration {calibration_hash()})")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def charging_args(p):
        p.add_argument("--temperature", type=float, default=cfg.get("temperature", 10.0),
                       help="ambient temperature in C (default %(default)s)")
        p.add_argument("--charge-time", type=float,
                       default=cfg.get("charge_time", DEFAULT_CHARGE_TIME),
                       help="charging session length in minutes (default %(default)s)")

    def param_arg(p):
        p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                       help="parameter override, repeatable; keys are listed below")

    p = sub.add_parser("generate", help="write a random instance", formatter_class=fmt)
    p.add_argument("--seed", type=int, default=cfg.get("seed", 0))
    p.add_argument("--customers", type=int, default=10)
    p.add_argument("--stations", type=int, default=5)
    p.add_argument("--side", type=float, default=60.0, help="region side in km")
    p.add_argument("--fleet", type=int, default=3)
    p.add_argument("--out", help="instance file to write")
    p.add_argument("--suite-dir", help="write the default benchmark suite here instead")
    p.add_argument("--sizes", help="comma-separated sizes for --suite-dir")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("solve", help="solve an instance", formatter_class=fmt, epilog=_param_help())
    p.add_argument("--algorithm", choices=sorted(ALGORITHMS) + ["exact"], default="sigalns")
    p.add_argument("--instance", required=True)
    charging_args(p)
    p.add_argument("--seed", type=int, default=cfg.get("seed", 0))
    p.add_argument("--out", required=True, help="solution file to write")
    param_arg(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("check", help="verify a solution", formatter_class=fmt)
    p.add_argument("--instance", required=True)
    p.add_argument("--solution", required=True)
    p.add_argument("--temperature", type=float, default=None,
                   help="override the charging model stored in the solution")
    p.add_argument("--charge-time", type=float, default=None)
    p.add_argument("--out", help="optional JSON report")
    param_arg(p)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export-lp", help="write the MILP in LP format", formatter_class=fmt)
    p.add_argument("--instance", required=True)
    p.add_argument("--model", choices=["ev", "evl"], default="evl")
    charging_args(p)
    p.add_argument("--no-subtour", action="store_true",
                   help="omit the subtour-elimination rows")
    p.add_argument("--out", required=True)
    param_arg(p)
    p.set_defaults(func=cmd_export_lp)

    for name, temps, cts, helptext in (
        ("bench", "-10,10,30", "80", "replication benchmark over a suite"),
        ("sweep", "-10,0,10,20,30", "40,80,120", "temperature and charge-time sensitivity"),
    ):
        p = sub.add_parser(name, help=helptext, formatter_class=fmt, epilog=_param_help())
        p.add_argument("--suite", default="default",
                       help="suite JSON file, or 'default' for the built-in suite")
        p.add_argument("--algorithms", default="tsmcws,sigalns")
        p.add_argument("--temps", default=temps)
        p.add_argument("--charge-times", default=cts)
        p.add_argument("--reps", type=int, default=5)
        p.add_argument("--base-seed", type=int, default=cfg.get("seed", 0))
        p.add_argument("--jobs", type=int, default=cfg.get("jobs", 1))
        p.add_argument("--out", required=True, help="output directory")
        param_arg(p)
        p.set_defaults(func=cmd_grid)
    return parser


_LIST_OPTIONS = ("--temps", "--charge-times", "--temperature", "--charge-time")


def _join_negative_values(argv: Sequence[str]) -> list[str]:
    """Let ``--temps -10,10,30`` through; argparse would read the value as a flag."""
    out: list[str] = []
    it = iter(argv)
    for arg in it:
        if arg in _LIST_OPTIONS:
            nxt = next(it, None)
            if nxt is not None and nxt.startswith("-") and nxt[1:2].isdigit():
                out.append(f"{arg}={nxt}")
                continue
            out.append(arg)
            if nxt is not None:
                out.append(nxt)
            continue
        out.append(arg)
    return out


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = _join_negative_values(sys.argv[1:] if argv is None else argv)
    try:
        cfg = load_config()
    except UsageError as exc:
        print(f"elrp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    parser = build_parser(cfg)
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        args.overrides = parse_overrides(getattr(args, "param", []), cfg.get("params"))
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"elrp: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InstanceFormatError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"elrp: input error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InfeasibleError, BenchmarkError) as exc:
        print(f"elrp: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except ValueError as exc:
        print(f"elrp: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
