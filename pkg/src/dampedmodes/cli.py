"""Command-line front end.

Exit codes: 0 when every criterion passes, 1 when a criterion fails, 2 on an
execution error (bad config, unwritable directory, solver failure).
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import io as dio
from .config import ScenarioConfig, bundled_names, load_config
from .runner import EXIT_CRITERIA, EXIT_ERROR, EXIT_PASS, load_manifests, run_scenario

COMMAND_MODE = {"simulate": "full", "average": "averaged", "verify": "verify"}


def _print_manifest(m) -> None:
    print(f"{m.scenario_id}: {m.status}  ({m.wall_seconds:.2f} s)  -> {m.out_dir}")
    if m.failure:
        print(f"  failure: {m.failure['type']}: {m.failure['message']}")
    for name, rec in m.criteria.items():
        print(f"  {'PASS' if rec['pass'] else 'FAIL'}  {name}  value={rec['value']!r}  "
              f"target={rec['target']}")


def _run_one(args_tuple):
    ini, out, seed = args_tuple
    cfg = ScenarioConfig.from_ini(ini)
    m = run_scenario(cfg, out, seed)
    return m.scenario_id, m.exit_code, str(out), m.status


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    expected = COMMAND_MODE[args.command]
    if cfg.mode != expected:
        print(f"error: scenario {cfg.scenario_id!r} has mode {cfg.mode!r}; "
              f"'{args.command}' runs {expected!r} scenarios", file=sys.stderr)
        return EXIT_ERROR
    m = run_scenario(cfg, args.out, args.seed)
    _print_manifest(m)
    return m.exit_code


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if not cfg.sweep:
        print("error: config has no [sweep] section", file=sys.stderr)
        return EXIT_ERROR
    param, values = cfg.sweep
    root = Path(args.out) if args.out else Path("runs") / f"{cfg.scenario_id}_sweep"
    jobs = []
    for i, v in enumerate(values):
        point = cfg.with_value(param, v)
        point = replace(point, scenario_id=f"{cfg.scenario_id}[{param}={v!r}]", sweep=())
        jobs.append((point.to_ini(), root / f"point_{i:03d}", args.seed))
    threads = max(1, args.threads)
    if threads == 1:
        results = [_run_one(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_run_one, jobs))
    # aggregation happens here, serially, after all workers finish
    rows = [{"scenario_id": sid, "exit_code": code, "out_dir": out, "status": st}
            for sid, code, out, st in results]
    dio.atomic_write(root / "sweep.json", dio.dumps({"parameter": param, "values": list(values),
                                                      "points": rows}))
    for r in rows:
        print(f"{r['exit_code']}  {r['scenario_id']}  -> {r['out_dir']}")
    return max(r["exit_code"] for r in rows)


def cmd_report(args) -> int:
    root = Path(args.out or "runs")
    if not root.exists():
        print(f"error: {root} does not exist", file=sys.stderr)
        return EXIT_ERROR
    manifests = load_manifests(root)
    if not manifests:
        print(f"error: no manifests under {root}", file=sys.stderr)
        return EXIT_ERROR
    code = EXIT_PASS
    rows = []
    for m in manifests:
        failed = [n for n, c in m["criteria"].items() if not c["pass"]]
        if m["status"] != "ok":
            verdict, code = "ERROR", EXIT_ERROR
        elif failed:
            verdict, code = "FAIL", max(code, EXIT_CRITERIA)
        else:
            verdict = "PASS"
        rows.append({"scenario_id": m["scenario_id"], "verdict": verdict, "failed": failed,
                     "manifest": m["_path"]})
        extra = f"  failed: {', '.join(failed)}" if failed else ""
        print(f"{verdict:5s} {m['scenario_id']}{extra}")
    if root.is_dir():
        dio.atomic_write(root / "report.json", dio.dumps({"runs": rows}))
    return code


def cmd_list(args) -> int:
    for name in bundled_names():
        cfg = load_config(f"builtin:{name}")
        print(f"{name:28s} {cfg.mode:9s} {cfg.description}")
    return EXIT_PASS


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dampedmodes", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, needs_config=True):
        if needs_config:
            sp.add_argument("--config", required=True,
                            help="path to an INI file or builtin:<name> (see 'list')")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="seed for randomised sweeps")
        sp.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                        help="worker processes for sweeps")

    for name, text in (("simulate", "integrate the full modal system"),
                       ("average", "integrate the averaged amplitude flow"),
                       ("verify", "run the quadrature, averaging and scalar-harness checks"),
                       ("sweep", "run a scenario over a parameter grid")):
        common(sub.add_parser(name, help=text))
    common(sub.add_parser("report", help="aggregate manifests under --out (default runs/)"),
           needs_config=False)
    sub.add_parser("list", help="list bundled scenarios")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"simulate": cmd_run, "average": cmd_run, "verify": cmd_run,
                "sweep": cmd_sweep, "report": cmd_report, "list": cmd_list}
    try:
        return handlers[args.command](args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
