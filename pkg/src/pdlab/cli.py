"""Command-line entry points.

Subcommands:
  generate            build a dataset of instances + trajectories (+ labels)
  solve               run an algorithm over a records file, emit solutions
  exact               attach exact-oracle solutions to a records file
  verify-replication  check the constructive network against the engine
  infer               run a weights file over a records file, emit solutions
  bench               compare model vs algorithm solution files
  export              write LP / MST files for external solvers

Every failure exits nonzero after printing one machine-readable JSON line
on stderr: {"status": "error", "message": ...}.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import bench, dataset, neural
from .engine import AlgoConfig, run_general
from .instances import is_hitting_set
from .oracle import solve_optimal

EXIT_ERROR = 2
EXIT_CHECK_FAILED = 3


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except BrokenPipeError:
        return 0
    except Exception as exc:  # noqa: BLE001 - single reporting point
        print(
            json.dumps({"status": "error", "message": str(exc), "type": type(exc).__name__}),
            file=sys.stderr,
        )
        return EXIT_ERROR


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pdlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a dataset cell")
    p.add_argument("--task", required=True, choices=["mvc", "msc", "mhs"])
    p.add_argument("--family", default=None, help="graph family (default: ba for mvc, ba_bipartite otherwise)")
    p.add_argument("--size", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--with-optimal", action="store_true")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="auto", choices=["auto", "train", "val", "test"])
    p.add_argument("--epsilon", type=float, default=dataset.DEFAULT_EPSILON)
    p.add_argument("--b", type=int, default=5, help="bipartite attachment parameter")
    p.add_argument("--budget-ms", type=float, default=10_000.0)
    p.set_defaults(handler=_cmd_generate)

    p = sub.add_parser("solve", help="solve instances from a records file")
    p.add_argument("--algo", required=True, choices=["pd", "pd-uniform", "cover"])
    p.add_argument("--epsilon", type=float, default=dataset.DEFAULT_EPSILON)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_solve)

    p = sub.add_parser("exact", help="attach exact optima to a records file")
    p.add_argument("--budget-ms", type=float, default=10_000.0)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(handler=_cmd_exact)

    p = sub.add_parser("verify-replication", help="network-vs-engine lockstep check")
    p.add_argument("--task", required=True, choices=["mvc", "msc", "mhs"])
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--size", type=int, default=16)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--hidden-dim", type=int, default=32)
    p.set_defaults(handler=_cmd_verify_replication)

    p = sub.add_parser("infer", help="run a weights file over a records file")
    p.add_argument("--weights", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", required=True)
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--free-run", dest="mode", action="store_const", const="free_run")
    mode.add_argument("--teacher-forced", dest="mode", action="store_const", const="teacher_forced")
    p.set_defaults(mode="free_run", handler=_cmd_infer)

    p = sub.add_parser("bench", help="ratio report of model vs algorithm solutions")
    p.add_argument("--model", required=True, help="model solutions file")
    p.add_argument("--algo", required=True, help="algorithm solutions file")
    p.add_argument("--report", required=True)
    p.set_defaults(handler=_cmd_bench)

    p = sub.add_parser("export", help="write LP or MST files")
    p.add_argument("--format", required=True, choices=["mst", "lp"])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--solution", default=None, help="solutions file (required for mst)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(handler=_cmd_export)

    return parser


def _cmd_generate(args) -> int:
    family = args.family or ("ba" if args.task == "mvc" else "ba_bipartite")
    params = {"b": args.b} if family == "ba_bipartite" else {}
    records = dataset.build_dataset(
        task=args.task,
        family=family,
        size=args.size,
        count=args.count,
        seed=args.seed,
        with_optimal=args.with_optimal,
        epsilon=args.epsilon,
        split=args.split,
        oracle_budget_ms=args.budget_ms,
        params=params,
    )
    name = f"{args.task}_{family}_n{args.size}_{args.split}_s{args.seed}"
    gen_params = {
        "task": args.task,
        "family": family,
        "size": args.size,
        "count": args.count,
        "seed": args.seed,
        "with_optimal": args.with_optimal,
        "epsilon": args.epsilon,
        "split": args.split,
        **params,
    }
    path = dataset.write_dataset(args.out, records, name, gen_params)
    print(json.dumps({"status": "ok", "records": len(records), "file": str(path)}))
    return 0


def _solution_entry(record, solution, cleanup_used=False, feasible=None) -> dict:
    inst = record.instance
    if feasible is None:
        feasible = is_hitting_set(inst, solution.chosen)
    return {
        "id": inst.id,
        "chosen": list(solution.chosen),
        "weight": solution.weight,
        "feasible": bool(feasible),
        "cleanup_used": bool(cleanup_used),
        "size": inst.n_elements,
        "seed_group": inst.meta.get("seed", 0),
    }


def _cmd_solve(args) -> int:
    records = dataset.read_records(args.infile)
    out = []
    for record in records:
        inst = record.instance
        if args.algo == "pd":
            traj = run_general(inst, AlgoConfig(uniform=False))
        elif args.algo == "pd-uniform":
            traj = run_general(inst, AlgoConfig(uniform=True))
        else:
            traj = dataset.solve_for_task(inst, args.epsilon)
        out.append(_solution_entry(record, traj.final_solution))
    _write_jsonl(args.out, out)
    print(json.dumps({"status": "ok", "solved": len(out), "file": args.out}))
    return 0


def _cmd_exact(args) -> int:
    records = dataset.read_records(args.infile)
    updated = []
    n_timeout = 0
    for record in records:
        opt = solve_optimal(record.instance, args.budget_ms)
        n_timeout += opt.status == "timeout"
        updated.append(
            dataset.DatasetRecord(
                instance=record.instance,
                trajectory=record.trajectory,
                optimal=opt,
                split=record.split,
            )
        )
    dataset.write_records(args.out, updated)
    print(json.dumps({"status": "ok", "records": len(updated), "timeouts": n_timeout}))
    return 0


def _cmd_verify_replication(args) -> int:
    failures = 0
    worst = 0.0
    for i in range(args.count):
        inst = dataset._build_instance(
            args.task,
            "ba" if args.task == "mvc" else "ba_bipartite",
            args.size,
            args.seed,
            i,
            {"b": 5} if args.task != "mvc" else {},
        )
        report = neural.verify_replication(inst, args.hidden_dim, tol=args.tol)
        worst = max(worst, max(report.max_err.values()))
        if not report.passed(args.tol):
            failures += 1
            print(json.dumps({"instance": inst.id, "max_err": dict(report.max_err),
                              "steps_match": report.steps_match,
                              "solutions_equal": report.solutions_equal}))
    print(
        json.dumps(
            {
                "status": "ok" if failures == 0 else "failed",
                "task": args.task,
                "count": args.count,
                "failures": failures,
                "max_err": worst,
                "tol": args.tol,
            }
        )
    )
    return 0 if failures == 0 else EXIT_CHECK_FAILED


def _cmd_infer(args) -> int:
    weights = dataset.load_weights(args.weights)
    records = dataset.read_records(args.infile)
    out = []
    for record in records:
        pred = neural.rollout(
            weights,
            record.instance,
            mode=args.mode,
            trajectory=record.trajectory if args.mode == "teacher_forced" else None,
        )
        out.append(
            _solution_entry(record, pred.final_solution, cleanup_used=pred.cleanup_used)
        )
    _write_jsonl(args.out, out)
    print(json.dumps({"status": "ok", "solved": len(out), "file": args.out}))
    return 0


def _cmd_bench(args) -> int:
    model = _read_solutions(args.model)
    algo = _read_solutions(args.algo)
    grouping = {
        d["id"]: (d.get("size", "all"), d.get("seed_group", "all")) for d in model
    }
    report = bench.ratio_report(
        [_to_entry(d) for d in model], [_to_entry(d) for d in algo], grouping
    )
    payload = {
        "groups": {str(k): v for k, v in report.groups.items()},
        "feasibility_rate": report.feasibility_rate,
        "cleanup_rate": report.cleanup_rate,
        "n_instances": report.n_instances,
    }
    Path(args.report).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n")
    print(json.dumps({"status": "ok", "report": args.report}))
    return 0


def _to_entry(d: dict) -> bench.SolutionEntry:
    return bench.SolutionEntry(
        instance_id=d["id"],
        weight=d["weight"],
        feasible=d.get("feasible", True),
        cleanup_used=d.get("cleanup_used", False),
    )


def _cmd_export(args) -> int:
    records = dataset.read_records(args.infile)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    solutions = {}
    if args.solution:
        solutions = {d["id"]: d for d in _read_solutions(args.solution)}
    written = 0
    for record in records:
        inst = record.instance
        if args.format == "lp":
            (out_dir / f"{inst.id}.lp").write_text(bench.export_lp(inst))
        else:
            if inst.id not in solutions:
                raise ValueError(f"no solution for instance {inst.id}")
            sol = solutions[inst.id]
            from .instances import make_solution

            solution = make_solution(inst, sol["chosen"])
            (out_dir / f"{inst.id}.mst").write_text(bench.export_mst(inst, solution))
        written += 1
    print(json.dumps({"status": "ok", "files": written, "dir": str(out_dir)}))
    return 0


def _write_jsonl(path, dicts) -> None:
    with Path(path).open("w", encoding="utf-8", newline="\n") as fh:
        for d in dicts:
            fh.write(json.dumps(d, sort_keys=True, separators=(",", ":")))
            fh.write("\n")


def _read_solutions(path) -> list[dict]:
    out = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if line:
                try:
                    out.append(json.loads(line))
                except json.JSONDecodeError as exc:
                    raise dataset.ParseError(path, lineno, str(exc)) from exc
    return out


if __name__ == "__main__":
    sys.exit(main())
