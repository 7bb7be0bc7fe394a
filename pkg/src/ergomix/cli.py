"""Command line driver: ``ergomix run | list-instances | ou-check``."""

from __future__ import annotations

import argparse
import copy
import inspect
import json
import math
import os
import sys
from importlib import resources

import jsonschema
import numpy as np

from . import experiments, modelspace, pushforward
from .errors import ConfigurationError, ErgomixError
from .semigroups import INSTANCES, make_instance

OUTPUT_ENV = "ERGOMIX_OUTPUT_DIR"
DEFAULT_OUTPUT = "ergomix-out"
DEFAULT_SEED = 424242

EXIT_OK, EXIT_ERROR, EXIT_FAIL = 0, 1, 2


def load_schema(name: str) -> dict:
    return json.loads(resources.files("ergomix").joinpath("schemas", f"{name}.json").read_text())


def validate_config(cfg: dict) -> None:
    """Schema check plus instance-parameter and experiment-knob names."""
    validator = jsonschema.Draft202012Validator(load_schema("run_config.v1"))
    errors = sorted(validator.iter_errors(cfg), key=lambda e: list(e.absolute_path))
    if errors:
        e = errors[0]
        raise ConfigurationError(f"config error at /{'/'.join(map(str, e.absolute_path))}: {e.message}")
    name = cfg["instance"]["name"]
    if name not in INSTANCES:
        raise ConfigurationError(f"config error at /instance/name: unknown instance {name!r}")
    inst_schema = {"type": "object", "additionalProperties": False,
                   "properties": INSTANCES[name].schema}
    for e in jsonschema.Draft202012Validator(inst_schema).iter_errors(cfg["instance"].get("params", {})):
        raise ConfigurationError(f"config error at /instance/params/{'/'.join(map(str, e.absolute_path))}: "
                                 f"{e.message}")
    for i, exp in enumerate(cfg["experiments"]):
        allowed = set(inspect.signature(experiments.EXPERIMENTS[exp["kind"]]).parameters) - {"ctx"}
        extra = sorted(set(exp) - allowed - {"kind"})
        if extra:
            raise ConfigurationError(f"config error at /experiments/{i}: unknown knob(s) {extra} "
                                     f"for {exp['kind']!r}; allowed {sorted(allowed)}")


def resolve(cfg: dict, *, seed=None, workers=None, output=None) -> dict:
    """Fill defaults; CLI flags override the file, ``ERGOMIX_OUTPUT_DIR`` only the output dir."""
    out = copy.deepcopy(cfg)
    out.setdefault("schema", "run_config.v1")
    out["instance"].setdefault("params", {})
    m = out.setdefault("measure", {})
    m.setdefault("p", {"ratio": 0.5})
    m.setdefault("N", [2 * j * (j + 1) for j in range(1, 9)])
    t = out.setdefault("truncation", {})
    if "J" not in t and "target_tol" not in t:
        t["J"] = pushforward.DEFAULT_J
    t.setdefault("target_tol", pushforward.DEFAULT_TARGET_TOL)
    t.setdefault("schedule_base", 2.0)
    if seed is not None:
        out["seed"] = seed
    out.setdefault("seed", DEFAULT_SEED)
    if workers is not None:
        out["workers"] = workers
    out.setdefault("workers", 1)
    out["output_dir"] = output or os.environ.get(OUTPUT_ENV) or out.get("output_dir") or DEFAULT_OUTPUT
    return out


def build_measure(block: dict, N_override=None) -> modelspace.MeasureParams:
    p = block["p"]
    if "ratio" in p:
        r = float(p["ratio"])
        head = (1 - r) * r ** np.arange(modelspace.SUPPORT_CAP)
        tail = r
    else:
        head, tail = np.asarray(p["head"], float), float(p["tail_ratio"])
    N = N_override if N_override is not None else block["N"]
    if N == "calibrate":
        N = [2 * j * (j + 1) for j in range(1, 9)]   # replaced after calibration
    return modelspace.make_measure_params(head, tail, N)


def build_context(cfg: dict, use_cache: bool = True) -> experiments.Context:
    system = make_instance(cfg["instance"]["name"], cfg["instance"]["params"])
    params = build_measure(cfg["measure"])
    plan = None
    if any(e["kind"] in experiments.NEEDS_PLAN for e in cfg["experiments"]) or cfg["measure"]["N"] == "calibrate":
        t = cfg["truncation"]
        tol = math.inf if t["target_tol"] == "inf" else float(t["target_tol"])
        cache = os.path.join(cfg["output_dir"], ".cache") if use_cache else None
        calibrated, plan = pushforward.calibrate_truncation(
            system, params, tol, J=t.get("J"), schedule_base=t["schedule_base"], cache_dir=cache)
        if cfg["measure"]["N"] == "calibrate":
            params = calibrated
    return experiments.Context(system, params, plan, int(cfg["seed"]), int(cfg["workers"]),
                               os.path.join(cfg["output_dir"], ".cache") if use_cache else None)


def embedded_config(cfg: dict) -> dict:
    # worker count and output location do not change results
    return {k: v for k, v in cfg.items() if k not in ("workers", "output_dir")}


def cmd_run(args) -> int:
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except (OSError, ValueError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        validate_config(raw)
        cfg = resolve(raw, seed=args.seed, workers=args.workers, output=args.output)
        ctx = build_context(cfg, use_cache=not args.no_cache)
        status = EXIT_OK
        for exp in cfg["experiments"]:
            knobs = {k: v for k, v in exp.items() if k != "kind"}
            rep = experiments.run_experiment(exp["kind"], ctx, **knobs)
            rep.config = {**embedded_config(cfg), "experiments": [exp]}
            paths = rep.write(cfg["output_dir"], cfg["seed"])
            verdict = "PASS" if rep.passed else "FAIL"
            print(f"{verdict} {exp['kind']} [{ctx.system.id}] -> {paths[0]}")
            if not rep.passed:
                status = EXIT_FAIL
        return status
    except ErgomixError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


def cmd_list(args) -> int:
    rows = [{"id": k, "params": sorted(v.schema), "condition": v.condition,
             "provenance": v.provenance} for k, v in sorted(INSTANCES.items())]
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            print(f"{r['id']:22s} {r['condition']}")
            print(f"{'':22s} params: {', '.join(r['params'])}")
            print(f"{'':22s} {r['provenance']}")
    return EXIT_OK


def cmd_ou(args) -> int:
    ctx = experiments.Context(system=None, params=None, plan=None, seed=args.seed)
    rep = experiments.ou_check(ctx, n_paths=args.paths, t_max=args.tmax)
    for r in rep.tests["lags"]:
        print(f"h={r['h']:<5g} corr={r['corr']:.4f} expected={r['expected']:.4f} (3se={3 * r['se']:.4f})")
    if args.output:
        rep.write(args.output, args.seed)
    print("PASS" if rep.passed else "FAIL")
    return EXIT_OK if rep.passed else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ergomix", description="Invariant mixing measures for C0-semigroups")
    sub = ap.add_subparsers(dest="cmd", required=True)
    r = sub.add_parser("run", help="run the experiments of a config file")
    r.add_argument("config")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int)
    r.add_argument("--output")
    r.add_argument("--no-cache", action="store_true")
    r.set_defaults(func=cmd_run)
    li = sub.add_parser("list-instances", help="show the instance registry")
    li.add_argument("--json", action="store_true")
    li.set_defaults(func=cmd_list)
    ou = sub.add_parser("ou-check", help="covariance check of the OU process")
    ou.add_argument("--paths", type=int, default=10_000)
    ou.add_argument("--tmax", type=float, default=2.0)
    ou.add_argument("--seed", type=int, default=DEFAULT_SEED)
    ou.add_argument("--output")
    ou.set_defaults(func=cmd_ou)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "workers", None) is not None and args.workers < 1:
        print("error: --workers must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
