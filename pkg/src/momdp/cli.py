"""Command line interface: synth, eval, simulate, and compare.

Exit codes: 0 on success, 2 on usage or input errors, 3 when a requested
computation exceeds its configured cap.
"""

from __future__ import annotations

import argparse
import csv
import io
import sys
import time
from pathlib import Path

import numpy as np

from . import fileio
from .errors import IntractableError, ModelError
from .exact import DEFAULT_TIE_TOL, TO, TOQ, Q
from .gridworld import compile_grid
from .model import as_belief, uniform_belief
from .pointbased import approx_values, generate_belief_points, synth
from .policy import PolicyHandle
from .simulate import PRIOR, compare, run_rollouts, summarize
from .policy import failure_bound as policy_failure_bound


def _parse_belief(text: str | None, num_e: int) -> np.ndarray:
    if text is None:
        return uniform_belief(num_e)
    values = [float(x) for x in text.split(",") if x.strip()]
    return as_belief(values, num_e)


def _load_problem(args):
    """Resolve --model/--grid into (model, s0, b0, fail_states, name)."""
    if getattr(args, "grid", None):
        spec = fileio.load_gridspec(args.grid)
        compiled = compile_grid(spec)
        return (compiled.model, compiled.start_state, compiled.initial_belief,
                compiled.fail_states, Path(args.grid).stem)
    model = fileio.load_model(args.model)
    s0 = args.state if args.state is not None else 0
    b0 = _parse_belief(args.belief, model.num_e)
    return model, s0, b0, frozenset(), Path(args.model).stem


def _cmd_synth(args) -> int:
    model, s0, b0, _, name = _load_problem(args)
    points = generate_belief_points(model, args.points, args.seed, s0, b0)
    t0 = time.perf_counter()
    stack = synth(model, points, args.variant, args.tie_tol)
    total = time.perf_counter() - t0
    fileio.save_stack(stack, args.out)
    sizes = [len(ps) for ps in stack.stages[0]]
    print(f"synthesized {args.variant} stack for {name}: "
          f"{stack.horizon} stages, {len(points)} belief points, "
          f"max stage-0 set {max(sizes)} pairs, {total:.2f}s")
    print(f"wrote {args.out}")
    return 0


def _cmd_eval(args) -> int:
    stack = fileio.load_stack(args.stack)
    num_e = stack.stages[-1][0].num_e
    b = _parse_belief(args.belief, num_e)
    v, j = approx_values(stack, 0, args.state, b, args.tie_tol)
    print(f"V = {v!r}")
    print(f"J = {j!r}")
    if stack.variant == TO:
        print("failure_bound = N/A")
    else:
        print(f"failure_bound = {1.0 - j!r}")
    return 0


def _write_trace(path, records, num_e) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rollout_id", "k", "s", "a", "z"]
            + [f"belief_{i}" for i in range(num_e)]
            + ["outcome"]
        )
        for i, rec in enumerate(records):
            for step in rec.steps:
                writer.writerow(
                    [i, step.k, step.s, step.a, step.z]
                    + [repr(float(x)) for x in step.belief]
                    + [rec.outcome]
                )


def _cmd_simulate(args) -> int:
    stack = fileio.load_stack(args.stack)
    spec = fileio.load_gridspec(args.grid)
    compiled = compile_grid(spec)
    model = compiled.model
    if stack.stages[-1][0].num_e != model.num_e:
        raise ModelError(
            f"stack was built for |E|={stack.stages[-1][0].num_e}, "
            f"grid compiles to |E|={model.num_e}"
        )
    policy = PolicyHandle(model, stack, tie_tol=args.tie_tol)
    records = run_rollouts(model, policy, args.rollouts, args.seed,
                           compiled.start_state, compiled.initial_belief,
                           PRIOR, None, compiled.fail_states)
    bound = None
    if stack.variant != TO:
        bound = policy_failure_bound(policy, compiled.start_state,
                                     compiled.initial_belief)
    metrics = summarize(records, bound)
    print(f"rollouts       = {metrics.rollout_count}")
    print(f"expected_time  = {metrics.expected_time!r}")
    print(f"failure_rate   = {metrics.failure_rate!r}")
    bound_text = "N/A" if metrics.failure_bound is None else repr(metrics.failure_bound)
    print(f"failure_bound  = {bound_text}")
    print(f"halfwidth95    = {metrics.confidence_halfwidth!r}")
    if args.trace_out:
        _write_trace(args.trace_out, records, model.num_e)
        print(f"wrote {args.trace_out}")
    return 0


def _comparison_rows(name, result, timings: bool):
    rows = []
    for variant in (TO, Q, TOQ):
        m = result.metrics[variant]
        rows.append({
            "world": name,
            "policy": variant,
            "exp_time": repr(m.expected_time),
            "prob_failure": repr(m.failure_rate),
            "failure_bound": "N/A" if m.failure_bound is None else repr(m.failure_bound),
            "total_time_s": f"{m.synth_total_time:.2f}" if timings else "",
            "backup_time_ms": f"{m.backup_time_ms:.3f}" if timings else "",
        })
    return rows


def _cmd_compare(args) -> int:
    spec = fileio.load_gridspec(args.grid)
    compiled = compile_grid(spec)
    result = compare(compiled, args.points, args.rollouts, args.seed, args.tie_tol)
    rows = _comparison_rows(Path(args.grid).stem, result, args.timings)
    fields = ["world", "policy", "exp_time", "prob_failure", "failure_bound",
              "total_time_s", "backup_time_ms"]
    if args.format == "csv":
        buffer = io.StringIO()
        writer = csv.DictWriter(buffer, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
        text = buffer.getvalue()
    else:
        widths = {f: max(len(f), max(len(r[f]) for r in rows)) for f in fields}
        lines = ["  ".join(f.ljust(widths[f]) for f in fields)]
        for r in rows:
            lines.append("  ".join(r[f].ljust(widths[f]) for f in fields))
        text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="momdp",
        description="Synthesize and evaluate reach-avoid policies for "
                    "mixed observable MDPs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_tie_tol(p):
        p.add_argument("--tie-tol", type=float, default=DEFAULT_TIE_TOL,
                       help="tolerance for treating scores as tied")

    p = sub.add_parser("synth", help="synthesize a stage stack")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--model", help="MOMDP model JSON file")
    src.add_argument("--grid", help="grid world JSON file")
    p.add_argument("--variant", choices=[TOQ, Q, TO], default=TOQ)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--state", type=int, default=None,
                   help="initial state for rollout-based points (models only)")
    p.add_argument("--belief", default=None,
                   help="comma-separated initial belief (models only)")
    add_tie_tol(p)
    p.add_argument("--out", required=True, help="output stack JSON file")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("eval", help="evaluate a stack at a point")
    p.add_argument("--stack", required=True)
    p.add_argument("--state", type=int, required=True)
    p.add_argument("--belief", default=None)
    add_tie_tol(p)
    p.set_defaults(func=_cmd_eval)

    p = sub.add_parser("simulate", help="Monte Carlo evaluation of a stack")
    p.add_argument("--stack", required=True)
    p.add_argument("--grid", required=True)
    p.add_argument("--rollouts", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace-out", default=None, help="write a trajectory CSV")
    add_tie_tol(p)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("compare", help="compare to/q/toq on one grid")
    p.add_argument("--grid", required=True)
    p.add_argument("--points", type=int, default=64)
    p.add_argument("--rollouts", type=int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--format", choices=["table", "csv"], default="table")
    p.add_argument("--out", default=None, help="write output to a file")
    p.add_argument("--timings", action="store_true",
                   help="include wall-clock columns (non-deterministic)")
    add_tie_tol(p)
    p.set_defaults(func=_cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except IntractableError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (ModelError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
