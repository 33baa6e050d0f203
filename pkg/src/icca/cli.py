"""Command-line entry point: compile, simulate, compare, sweep, fit-cost, validate.

Exit codes: 0 success, 1 trace violation, 2 infeasible plan, 3 invalid input.
Models are YAML/JSON files or built-in generators named ``zoo:<name>``
(gpt-like, opt30b, llama2-70b, tiny, random-chain[:N]).  Hardware configs are
YAML files or preset names.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import zoo
from .baselines import KINDS, ideal_roofline, run_baseline
from .cost import CalibrationError, CostMode, CostModelConfig, SramContention, fit_calibrated, read_profile
from .curves import build_curves
from .hw import ConfigError, load_config, with_hbm_bandwidth, with_link_bandwidth, with_num_cores
from .memalloc import AllocationInfeasible
from .model_ir import ModelFormatError, load_model
from .plans import NoFeasiblePlan
from .scheduler import InvalidAssignment, SchedulingInfeasible, load_plan, plan_to_dict, save_plan
from .simulator import SimulationError, simulate_full, trace_to_rows, validate_trace

EXIT_OK, EXIT_VIOLATION, EXIT_INFEASIBLE, EXIT_INPUT = 0, 1, 2, 3
WORKERS_ENV = "ICCA_WORKERS"

METRICS = ("total_time", "analytic_t_end", "preload_only", "execute_only", "overlapped", "interconnect_stall",
           "hbm_utilization", "interconnect_utilization", "intercore_utilization", "preload_link_utilization",
           "achieved_flops", "occupancy_peak")
SWEEP_AXES = ("hbm_bandwidth", "noc_bandwidth", "num_cores")


class InputError(ValueError):
    pass


def load_any_model(spec: str, seed: int = 0):
    if spec.startswith("zoo:"):
        name, _, arg = spec[4:].partition(":")
        makers = {"gpt-like": zoo.gpt_like, "opt30b": zoo.opt30b_shaped, "llama2-70b": zoo.llama2_70b_shaped,
                  "tiny": zoo.tiny_block}
        if name == "random-chain":
            return zoo.random_chain(np.random.default_rng(seed), int(arg or 12))
        if name not in makers:
            raise InputError(f"unknown built-in model {name!r}")
        return makers[name]()
    if not Path(spec).exists():
        raise InputError(f"model file not found: {spec}")
    return load_model(spec)


def cost_model(args) -> CostModelConfig:
    base = CostModelConfig(sram_contention=SramContention(args.sram_contention))
    if args.cost_mode == CostMode.CALIBRATED.value:
        if not args.profile:
            raise InputError("--cost-mode calibrated needs --profile")
        return fit_calibrated(read_profile(args.profile), base)
    return base


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def run_point(model, chip, cm, kind, max_orders=None):
    """One (chip, scheduler) evaluation -> metrics dict."""
    curves = build_curves(model, cm, chip)
    if kind == "ideal":
        return {"total_time": ideal_roofline(curves, chip.hbm.total_bandwidth)}
    plan = run_baseline(kind, model, curves, max_orders=max_orders)
    rep = simulate_full(plan, model, chip, cm).report.as_dict()
    row = {k: rep[k] for k in METRICS if k in rep}
    row["analytic_t_end"] = plan.t_end
    return row


def _write(text: str, out):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_compile(args):
    model = load_any_model(args.model, args.seed)
    chip = load_config(args.config)
    cm = cost_model(args)
    t0 = time.perf_counter()
    curves = build_curves(model, cm, chip)
    kind = "dynamic" if args.no_reorder and args.scheduler == "full" else args.scheduler
    if kind == "ideal":
        raise InputError("the ideal bound has no schedule; use compare")
    plan = run_baseline(kind, model, curves, max_orders=args.max_orders)
    wall = time.perf_counter() - t0
    stats = {"scheduler": kind, "t_end": plan.t_end, "candidate_orders": plan.stats.get("candidate_orders", 1),
             "alloc_invocations": plan.stats.get("alloc_invocations", 0),
             "alloc_invocations_max_per_order": plan.stats.get("alloc_invocations_max_per_order",
                                                               plan.stats.get("alloc_invocations", 0)),
             "mean_edit_distance": plan.stats.get("mean_edit_distance", 0.0), "wall_time_s": wall}
    if args.output:
        save_plan(plan, args.output)
        Path(str(args.output) + ".stats.yaml").write_text(yaml.safe_dump(stats, sort_keys=False))
    if args.dump_plans:
        doc = plan_to_dict(plan)
        sys.stdout.write(yaml.safe_dump(doc["operators"], sort_keys=False))
    sys.stdout.write(yaml.safe_dump(stats, sort_keys=False))
    return EXIT_OK


def cmd_simulate(args):
    model = load_any_model(args.model, args.seed)
    chip = load_config(args.config)
    cm = cost_model(args)
    plan = load_plan(args.plan)
    res = simulate_full(plan, model, chip, cm)
    lines = [f"{k}: {fmt(v)}" for k, v in res.report.as_dict().items()]
    _write("\n".join(lines) + "\n", args.output)
    if args.trace:
        with open(args.trace, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["id", "kind", "resource", "start", "end", "op", "core", "bytes"])
            w.writerows(trace_to_rows(res.trace))
    return EXIT_OK


def cmd_validate(args):
    model = load_any_model(args.model, args.seed)
    chip = load_config(args.config)
    plan = load_plan(args.plan)
    res = simulate_full(plan, model, chip, cost_model(args))
    v = validate_trace(res.trace)
    if v is None:
        print(f"ok: {len(res.trace)} events")
        return EXIT_OK
    print(f"violation ({v.kind}): {v.message}; events {list(v.events)}")
    return EXIT_VIOLATION


def _schedulers(args):
    kinds = [k.strip() for k in args.schedulers.split(",") if k.strip()]
    bad = [k for k in kinds if k not in KINDS]
    if bad or not kinds:
        raise InputError(f"unknown scheduler(s) {bad}; choose from {', '.join(KINDS)}")
    return kinds


def cmd_compare(args):
    model = load_any_model(args.model, args.seed)
    chip = load_config(args.config)
    cm = cost_model(args)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["scheduler", *METRICS])
    for kind in _schedulers(args):
        row = run_point(model, chip, cm, kind, args.max_orders)
        w.writerow([kind, *(fmt(row.get(m)) for m in METRICS)])
    _write(buf.getvalue(), args.output)
    return EXIT_OK


def parse_axis(text):
    name, sep, values = text.partition("=")
    if not sep or name not in SWEEP_AXES:
        raise InputError(f"--axis expects NAME=v1,v2,... with NAME in {', '.join(SWEEP_AXES)}")
    try:
        vals = [int(v) if name == "num_cores" else float(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise InputError(f"--axis {name}: values must be numbers") from None
    if not vals:
        raise InputError(f"--axis {name}: needs at least one value")
    return name, vals


def _sweep_task(task):
    model, chip, cm, point, kind, max_orders = task
    try:
        for axis, v in point:
            if axis == "hbm_bandwidth":
                chip = with_hbm_bandwidth(chip, v)
            elif axis == "noc_bandwidth":
                chip = with_link_bandwidth(chip, v)
            else:
                chip = with_num_cores(chip, v)
        return run_point(model, chip, cm, kind, max_orders), ""
    except (SchedulingInfeasible, AllocationInfeasible, NoFeasiblePlan, ConfigError, SimulationError) as exc:
        return {}, f"{type(exc).__name__}: {exc}".replace("\n", " ")


def cmd_sweep(args):
    model = load_any_model(args.model, args.seed)
    chip = load_config(args.config)
    cm = cost_model(args)
    axes = [parse_axis(a) for a in args.axis or []]
    if not axes:
        raise InputError("sweep needs at least one --axis")
    names = [n for n, _ in axes]
    if len(set(names)) != len(names):
        raise InputError("each sweep axis may appear once")
    kinds = _schedulers(args)
    points = list(itertools.product(*[[(n, v) for v in vals] for n, vals in axes]))
    tasks = [(model, chip, cm, pt, kind, args.max_orders) for pt in points for kind in kinds]
    workers = int(os.environ.get(WORKERS_ENV, "1") or 1)
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, tasks))  # map preserves task order
    else:
        results = [_sweep_task(t) for t in tasks]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([*names, "scheduler", *METRICS, "error"])
    for (_, _, _, pt, kind, _), (row, err) in zip(tasks, results):
        w.writerow([*(fmt(v) for _, v in pt), kind, *(fmt(row.get(m)) for m in METRICS), err])
    _write(buf.getvalue(), args.output)
    return EXIT_OK


def cmd_fit_cost(args):
    cm = fit_calibrated(read_profile(args.profile))
    doc = {}
    for group, models in (("compute", cm.compute_models), ("link", cm.link_models)):
        for key, m in sorted(models.items()):
            doc.setdefault(group, {})[key] = {"breaks": [float(b) for b in m.breaks],
                                              "slopes": [float(s) for s in m.slopes],
                                              "intercepts": [float(b) for b in m.intercepts]}
    _write(yaml.safe_dump(doc, sort_keys=True), args.output)
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser():
    ap = argparse.ArgumentParser(prog="icca", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, plan=False):
        p.add_argument("--model", required=True, help="model file or zoo:<name>")
        p.add_argument("--config", required=True, help="hardware config file or preset name")
        p.add_argument("--cost-mode", choices=[m.value for m in CostMode], default=CostMode.ANALYTIC.value)
        p.add_argument("--profile", help="profiling CSV for the calibrated cost model")
        p.add_argument("--sram-contention", choices=[m.value for m in SramContention],
                       default=SramContention.BLOCKING.value)
        p.add_argument("--seed", type=int, default=0, help="seed for generated models")
        p.add_argument("-o", "--output")
        if plan:
            p.add_argument("--plan", required=True, help="schedule file written by compile")

    p = sub.add_parser("compile", help="schedule a model and write the plan")
    common(p)
    p.add_argument("--scheduler", choices=[k for k in KINDS if k != "ideal"], default="full")
    p.add_argument("--no-reorder", action="store_true", help="keep the preload order equal to execution order")
    p.add_argument("--max-orders", type=int, help="cap on preload orders tried per layer group")
    p.add_argument("--dump-plans", action="store_true", help="print every operator's schedule")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("simulate", help="simulate a compiled plan")
    common(p, plan=True)
    p.add_argument("--trace", help="write the per-event trace as CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate", help="simulate a plan and check its trace")
    common(p, plan=True)
    p.set_defaults(func=cmd_validate)

    for name, func, helptext in (("compare", cmd_compare, "compare schedulers on one chip"),
                                 ("sweep", cmd_sweep, "sweep hardware parameters")):
        p = sub.add_parser(name, help=helptext)
        common(p)
        p.add_argument("--schedulers", default=",".join(KINDS))
        p.add_argument("--max-orders", type=int)
        if name == "sweep":
            p.add_argument("--axis", action="append", help=f"NAME=v1,v2,... with NAME in {', '.join(SWEEP_AXES)}")
        p.set_defaults(func=func)

    p = sub.add_parser("fit-cost", help="fit the calibrated cost model to a profile")
    p.add_argument("--profile", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_fit_cost)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (SchedulingInfeasible, AllocationInfeasible, NoFeasiblePlan) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except SimulationError as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (InputError, ModelFormatError, ConfigError, CalibrationError, InvalidAssignment, FileNotFoundError,
            yaml.YAMLError, KeyError, ValueError) as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
