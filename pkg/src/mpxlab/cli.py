"""Command-line front end: analyze, simulate, assign, oracle-check.

Exit codes are stable: 0 success, 1 check failure, 2 malformed spec file,
3 domain or bound error, 4 unsupported mechanism/pattern combination.
Output files land in --out, then $MPXLAB_OUT, then the working directory.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import semantics
from .channels import collision_report, map_communicators, map_endpoints
from .errors import (
    DomainError,
    MpxlabError,
    OracleBoundError,
    SpecFileError,
    UnsupportedPatternError,
)
from .patterns import (
    STENCIL_KINDS,
    assign_communicators_ideal,
    assign_communicators_naive,
    assign_endpoints,
    assign_partitioned,
    boundary_thread_count,
    min_channels_3d,
    min_communicators_3d,
)
from .patterns.specfile import Scenario, load_scenario
from .simulator import CSV_HEADER, default_policy, run

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_SPEC = 2
EXIT_DOMAIN = 3
EXIT_UNSUPPORTED = 4

_DIR_NAMES_2D = {
    (0, -1): "n", (0, 1): "s", (-1, 0): "e", (1, 0): "w",
    (-1, -1): "ne", (1, -1): "nw", (-1, 1): "se", (1, 1): "sw",
}


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("MPXLAB_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _apply_overrides(scenario: Scenario, args) -> Scenario:
    if getattr(args, "mechanism", None):
        scenario.mechanism = args.mechanism
    if getattr(args, "policy", None):
        scenario.policy = args.policy
    if getattr(args, "channels", None):
        scenario.channel_pool = args.channels
    if getattr(args, "seed", None) is not None:
        scenario.seed = args.seed
    return scenario


def cmd_analyze(args) -> int:
    scenario = _apply_overrides(load_scenario(args.spec), args)
    pattern = scenario.build_pattern()
    pool = scenario.build_pool()
    print(f"kind: {pattern.kind.value}")
    print(f"process_grid: {list(pattern.process_grid)}")
    print(f"thread_grid: {list(pattern.thread_grid)}")

    if pattern.kind in STENCIL_KINDS:
        grid = pattern.thread_grid
        if len(grid) == 3:
            formula = min_communicators_3d(*grid)
            channels_needed = min_channels_3d(*grid)
            print(f"min_communicators_formula: {formula}")
        else:
            channels_needed = boundary_thread_count(grid)
        ideal = assign_communicators_ideal(pattern)
        naive = assign_communicators_naive(pattern)
        endpoints = assign_endpoints(pattern)
        partitioned = assign_partitioned(pattern)
        print(f"communicators_ideal: {ideal.objects_created['communicators']}")
        print(f"communicators_naive: {naive.objects_created['communicators']}")
        print(f"endpoints: {endpoints.objects_created['endpoints_per_process']}")
        print(f"partitioned_requests: "
              f"{partitioned.objects_created['requests_per_process']}")
        print(f"min_channels: {channels_needed}")

        policy = default_policy(ideal, pool)
        ideal_ctx = [c.context_id for c in ideal.comms[1:]]
        report = collision_report(map_communicators(ideal_ctx, policy, pool), pool)
        print(f"pool_channels: {pool.num_channels}")
        print(f"ideal_comm_channels_used: {report.distinct_channels_used}")
        print(f"ideal_comm_max_per_channel: {report.max_entities_per_channel}")
        print(f"ideal_comm_serialized_pairs: {len(report.serialized_pairs)}")
        eps = range(endpoints.objects_created["endpoints_per_process"])
        ep_report = collision_report(map_endpoints(eps, pool), pool)
        print(f"endpoint_serialized_pairs: {len(ep_report.serialized_pairs)}")
        return EXIT_OK

    # irregular kinds: report object counts per supported mechanism
    for label in ("communicators-naive", "endpoints", "partitioned", "windows"):
        probe = Scenario(**{**scenario.to_dict(),
                            "mechanism": label,
                            "process_grid": list(scenario.process_grid),
                            "thread_grid": list(scenario.thread_grid)})
        try:
            assignment = probe.build_assignment(pattern)
        except UnsupportedPatternError as exc:
            print(f"{label}: unsupported ({exc})")
            continue
        print(f"{label}: {assignment.describe_objects()}")
    return EXIT_OK


def _simulate_one(spec_path: str, args) -> str:
    scenario = _apply_overrides(load_scenario(spec_path), args)
    pattern = scenario.build_pattern()
    assignment = scenario.build_assignment(pattern)
    report = run(
        pattern, assignment,
        pool=scenario.build_pool(),
        policy=scenario.build_policy(),
        seed=scenario.seed,
    )
    out = _out_dir(args)
    stem = Path(spec_path).stem
    written = []
    if args.format in ("json", "both"):
        json_path = out / f"{stem}.report.json"
        json_path.write_text(report.to_json())
        written.append(str(json_path))
    if args.format in ("csv", "both"):
        csv_path = out / f"{stem}.report.csv"
        csv_path.write_text(
            ",".join(CSV_HEADER) + "\n"
            + ",".join(str(v) for v in report.csv_row()) + "\n"
        )
        written.append(str(csv_path))
    return (f"{stem}: mechanism={report.mechanism} makespan={report.makespan} "
            f"max_concurrency={report.max_concurrent_transfers} "
            f"matches={report.matches_total} -> {', '.join(written)}")


def cmd_simulate(args) -> int:
    specs = args.spec if isinstance(args.spec, list) else [args.spec]
    if args.jobs > 1 and len(specs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            futures = [pool.submit(_simulate_one, s, args) for s in specs]
            for future in futures:
                print(future.result())
    else:
        for spec in specs:
            print(_simulate_one(spec, args))
    return EXIT_OK


def _binding_label(assignment, op_id) -> str:
    desc = assignment.bindings[op_id]
    if desc.partition is not None:
        return f"req:{desc.partition[0]} part:{desc.partition[1]}"
    if desc.window is not None:
        loc = f" loc:{desc.target_location}" if desc.target_location is not None else ""
        return f"win:{desc.window}{loc}"
    if desc.endpoint is not None:
        return f"ep:{desc.endpoint}->{desc.target}"
    tag = f" tag:{desc.tag.raw}" if desc.tag is not None else ""
    return f"comm:{desc.context.key}{tag}"


def cmd_assign(args) -> int:
    scenario = _apply_overrides(load_scenario(args.spec), args)
    if args.emit_spec:
        sys.stdout.write(scenario.to_json())
        return EXIT_OK
    pattern = scenario.build_pattern()
    assignment = scenario.build_assignment(pattern)
    process = args.process
    print(f"# mechanism={scenario.mechanism} process={process}")
    print("thread\tdirection\top\tbinding")
    rows = [op for op in pattern.ops if op.process == process]
    for op in sorted(rows, key=lambda o: (o.thread, o.phase, o.kind.value)):
        if op.direction is not None and len(op.direction) == 2:
            direction = _DIR_NAMES_2D.get(op.direction, str(op.direction))
        elif op.direction is not None:
            direction = "".join(axis + ("-" if c < 0 else "+")
                                for axis, c in zip("xyz", op.direction) if c)
        else:
            direction = "-"
        print(f"{op.thread}\t{direction}\t{op.kind.value}\t"
              f"{_binding_label(assignment, op.op_id)}")
    print(f"# objects: {assignment.describe_objects()}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    comparisons, mismatches = semantics.oracle_equivalence_check(args.bound)
    if mismatches:
        name, a, b, hints, verdict, ref = mismatches[0]
        print(f"oracle equivalence: FAIL ({len(mismatches)} of {comparisons})")
        print(f"counterexample family: {name}")
        print(f"  hints: {hints}")
        print(f"  a: {a}")
        print(f"  b: {b}")
        print(f"  classifier: parallel={verdict.parallel} ({verdict.reason.value})")
        print(f"  oracle: parallel={ref}")
        return EXIT_FAIL
    print(f"oracle equivalence: PASS ({comparisons} comparisons)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpxlab",
        description="Model how MPI+threads mechanisms expose communication "
                    "parallelism and what each costs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, spec_nargs=None):
        if spec_nargs:
            p.add_argument("--spec", required=True, nargs="+",
                           help="scenario spec file(s)")
        else:
            p.add_argument("--spec", required=True, help="scenario spec file")
        p.add_argument("--out", help="output directory (default $MPXLAB_OUT or .)")
        p.add_argument("--mechanism", choices=[
            "communicators", "communicators-naive", "tags", "endpoints",
            "partitioned", "windows"])
        p.add_argument("--policy", choices=[
            "round-robin-comm", "hash-comm", "tag-bits", "endpoint-identity",
            "partition-index"])
        p.add_argument("--channels", type=int, metavar="R")
        p.add_argument("--seed", type=int)

    p_analyze = sub.add_parser("analyze", help="object counts, formulas, collisions")
    common(p_analyze)
    p_analyze.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", help="run scenarios, write reports")
    common(p_sim, spec_nargs="+")
    p_sim.add_argument("--format", choices=["json", "csv", "both"], default="both")
    p_sim.add_argument("--jobs", type=int, default=1, metavar="N")
    p_sim.set_defaults(func=cmd_simulate)

    p_assign = sub.add_parser("assign", help="print the per-thread binding table")
    common(p_assign)
    p_assign.add_argument("--process", type=int, default=0)
    p_assign.add_argument("--emit-spec", action="store_true",
                          help="emit the normalized scenario spec and exit")
    p_assign.set_defaults(func=cmd_assign)

    p_oracle = sub.add_parser("oracle-check",
                              help="classifier vs brute-force oracle sweep")
    p_oracle.add_argument("--bound", type=int, default=12,
                          help="max ops per enumerated universe (<= 12)")
    p_oracle.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except BrokenPipeError:
        # downstream closed the pipe (e.g. | head); not a failure of ours
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except SpecFileError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except (DomainError, OracleBoundError) as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except UnsupportedPatternError as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except MpxlabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
