"""Command line front end: single runs, V sweeps, oracle verification.

Outputs are deterministic given config and seed: JSON is emitted with
sorted keys and no timestamps, CSV rows are written in sorted task order
regardless of execution order, floats are repr-round-tripped.
"""

import argparse
import concurrent.futures
import json
import sys
from dataclasses import dataclass

from . import engine, oracles
from .config import load_config
from .metrics import drift_constant_c, theorem1_power_bound, theorem1_queue_bound

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_ORACLE = 2
EXIT_RUNTIME = 3

METRICS_SCHEMA = "mecsched-metrics-v1"
SWEEP_SCHEMA = "mecsched-sweep-v1"
SWEEP_COLUMNS = ("V", "mode", "w_server", "seed", "n_slots",
                 "avg_weighted_power_w", "avg_mobile_power_w",
                 "avg_server_power_w", "avg_sum_queue_bits_per_device",
                 "exec_delay_ms", "final_queue_over_T", "C_bits2",
                 "gs_nonconverged_slots")


@dataclass
class SweepSpec:
    v_values: tuple
    modes: tuple
    seeds: tuple
    server_weights: tuple
    n_slots: int = 10000

    def __post_init__(self):
        if not (self.v_values and self.modes and self.seeds and self.server_weights):
            raise ValueError("sweep needs at least one V, mode, seed and server weight")
        if self.n_slots < 1:
            raise ValueError("n_slots must be at least 1")
        for mode in self.modes:
            if mode not in engine.MODES:
                raise ValueError(f"unknown mode {mode!r}")

    def tasks(self):
        # deterministic row order, independent of execution order
        for v in self.v_values:
            for mode in self.modes:
                for w in self.server_weights:
                    for seed in self.seeds:
                        yield (v, mode, w, seed)


def _fmt(x):
    return repr(float(x)) if isinstance(x, float) else str(x)


def cmd_run(args):
    cfg, overrides = load_config(args.config, args.set)
    if args.mode not in engine.MODES:
        raise ValueError(f"unknown mode {args.mode!r}, pick one of {engine.MODES}")
    if args.slots < 1:
        raise ValueError("--slots must be at least 1")
    m = engine.run(cfg, args.mode, args.slots, trace_path=args.trace,
                   warmup_slots=args.warmup)
    c = m.c_bits2
    p_opt_proxy = args.p_opt_estimate if args.p_opt_estimate is not None \
        else m.avg_weighted_power_w
    bounds = {
        "power_bound_w": theorem1_power_bound(p_opt_proxy, cfg),
        "p_opt_proxy_w": p_opt_proxy,
        "p_opt_proxy_source": "flag" if args.p_opt_estimate is not None else "self",
        "queue_bound_bits": None,
    }
    if args.psi_eps is not None and args.slater_eps is not None:
        bounds["queue_bound_bits"] = theorem1_queue_bound(
            args.psi_eps, args.slater_eps, p_opt_proxy, cfg)
    doc = {
        "schema": METRICS_SCHEMA,
        "config_sha256": cfg.sha256(),
        "overrides": overrides,
        "mode": args.mode,
        "seed": cfg.rng_seed,
        "control_v": cfg.control_v,
        "server_weight": cfg.server_weight,
        "n_slots": args.slots,
        "c_bits2": c,
        "bounds": bounds,
        "metrics": m.to_dict(),
    }
    text = json.dumps(doc, sort_keys=True, indent=2)
    if args.out == "-":
        print(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    return EXIT_OK


def _sweep_one(raw_cfg, overrides, v, mode, w_server, seed, n_slots):
    cfg, _ = load_config(raw_cfg, overrides)
    cfg = cfg.replace(control_v=v, server_weight=w_server, rng_seed=seed)
    m = engine.run(cfg, mode, n_slots)
    return {
        "V": v, "mode": mode, "w_server": w_server, "seed": seed,
        "n_slots": m.n_slots,
        "avg_weighted_power_w": m.avg_weighted_power_w,
        "avg_mobile_power_w": m.avg_mobile_power_w,
        "avg_server_power_w": m.avg_server_power_w,
        "avg_sum_queue_bits_per_device": m.avg_sum_queue_bits / cfg.n_devices,
        "exec_delay_ms": m.exec_delay_ms,
        "final_queue_over_T": m.final_queue_over_t,
        "C_bits2": m.c_bits2,
        "gs_nonconverged_slots": m.gs_nonconverged_slots,
    }


def cmd_sweep(args):
    spec = SweepSpec(v_values=tuple(_parse_floats(args.v_values)),
                     modes=tuple(args.modes.split(",")),
                     seeds=tuple(int(s) for s in args.seeds.split(",")),
                     server_weights=tuple(_parse_floats(args.server_weights)),
                     n_slots=args.slots)
    tasks = list(spec.tasks())
    results = {}
    if args.workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=args.workers) as pool:
            futs = {pool.submit(_sweep_one, args.config, args.set, *t,
                                spec.n_slots): t for t in tasks}
            for fut in concurrent.futures.as_completed(futs):
                t = futs[fut]
                try:
                    results[t] = fut.result()
                except Exception as exc:
                    raise RuntimeError(f"sweep run {t} failed: {exc}") from exc
    else:
        for t in tasks:
            results[t] = _sweep_one(args.config, args.set, *t, spec.n_slots)
    with open(args.out, "w", newline="") as fh:
        fh.write(f"# schema: {SWEEP_SCHEMA}\n")
        fh.write(",".join(SWEEP_COLUMNS) + "\n")
        for t in tasks:
            row = results[t]
            fh.write(",".join(_fmt(row[c]) for c in SWEEP_COLUMNS) + "\n")
    return EXIT_OK


def cmd_verify(args):
    names = ("sp1", "sp2", "sp3") if args.suite == "all" else (args.suite,)
    reports, ok = oracles.run_suites(names, cases=args.cases, seed=args.seed)
    if args.report:
        with open(args.report, "w") as fh:
            for r in reports:
                fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    failures = sum(not r.passed for r in reports)
    print(f"verify: {len(reports)} cases, {failures} failures")
    return EXIT_OK if ok else EXIT_ORACLE


def _parse_floats(text):
    return [float(x) for x in text.split(",") if x]


def build_parser():
    ap = argparse.ArgumentParser(prog="mecsched",
                                 description="edge offloading scheduler experiments")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single simulation run")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--mode", default="baseline_alg1", choices=engine.MODES)
    p.add_argument("--slots", type=int, default=10000)
    p.add_argument("--warmup", type=int, default=0)
    p.add_argument("--out", default="-", help="metrics JSON path, - for stdout")
    p.add_argument("--trace", default=None, help="optional per-slot CSV path")
    p.add_argument("--p-opt-estimate", type=float, default=None)
    p.add_argument("--psi-eps", type=float, default=None)
    p.add_argument("--slater-eps", type=float, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="V/mode/seed/weight sweep to CSV")
    p.add_argument("--config", default=None)
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("--v-values", default="1e6,1e7,1e8,1e9,3e9,7e9")
    p.add_argument("--modes", default="baseline_alg1")
    p.add_argument("--seeds", default="1")
    p.add_argument("--server-weights", default="0.02")
    p.add_argument("--slots", type=int, default=10000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run brute-force solver certification")
    p.add_argument("--suite", default="all", choices=("sp1", "sp2", "sp3", "all"))
    p.add_argument("--cases", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", default=None, help="JSONL report path")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
