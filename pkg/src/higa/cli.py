"""Command line interface.

    higa run --problem square --degree 3 --theta 0.5 --mode adaptive \
             --max-dofs 30000 --out history.csv
    higa verify-axioms [--trials N] [--seed S]
    higa dump-mesh --problem lshape --degree 2 --steps 5 --out mesh.txt
    higa dump-system --problem square --degree 2 --steps 3 --out system.mtx

Exit codes: 0 success, 2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import sys

from .adaptivity import StopRule, adaptive_loop
from .assembly import assemble, dump_system, solve
from .axioms import run_axiom_checks
from .benchmarks import PROBLEM_NAMES, problem_library, write_history_csv
from .errors import ConfigError, InvalidInputError, SolverError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _add_problem_args(p, with_marking=True):
    p.add_argument("--problem", required=True,
                   choices=[n.replace("_", "-") for n in PROBLEM_NAMES])
    p.add_argument("--degree", type=int, required=True, choices=(2, 3, 4))
    if with_marking:
        p.add_argument("--theta", type=float, default=None,
                       help="marking parameter (default: per-problem value)")
        p.add_argument("--mode", choices=("adaptive", "uniform"),
                       default="adaptive")


def _build(args):
    return problem_library(args.problem.replace("-", "_"), args.degree)


def _run_history(args, stop):
    bench = _build(args)
    theta = bench.default_theta if getattr(args, "theta", None) is None \
        else args.theta
    mode = getattr(args, "mode", "adaptive")
    return adaptive_loop(bench.problem, bench.geometry, bench.knots0,
                         theta=theta, mode=mode, stop=stop,
                         exact_gradient=bench.exact_gradient,
                         callback=_print_state)


def _print_state(st):
    err = "" if st.energy_error is None else f" err={st.energy_error:.4e}"
    print(f"step {st.step:3d}  elements {st.n_elements:7d}  "
          f"dofs {st.n_dofs:7d}  levels {st.max_level:2d}  "
          f"eta {st.eta:.4e}{err}", flush=True)


def cmd_run(args):
    stop = StopRule(max_dofs=args.max_dofs, max_steps=args.max_steps)
    history = _run_history(args, stop)
    if args.out:
        write_history_csv(history, args.out)
        print(f"history written to {args.out}")
    return EXIT_OK


def cmd_verify_axioms(args):
    def progress(done, total):
        if done % 25 == 0 or done == total:
            print(f"  {done}/{total} scenarios", flush=True)

    reports = run_axiom_checks(trials=args.trials, seed=args.seed,
                               progress=progress)
    bad = 0
    for r in reports:
        status = "ok" if r.ok else f"FAILED ({len(r.failures)} scenarios)"
        print(f"{r.name:20s} {status}")
        bad += not r.ok
    return EXIT_OK if bad == 0 else 1


def cmd_dump_mesh(args):
    stop = StopRule(max_steps=args.steps, max_dofs=10 ** 9)
    history = _run_history(args, stop)
    with open(args.out, "w") as fh:
        fh.write(history[-1].mesh.to_text())
    print(f"mesh written to {args.out}")
    return EXIT_OK


def cmd_dump_system(args):
    stop = StopRule(max_steps=args.steps, max_dofs=10 ** 9)
    history = _run_history(args, stop)
    bench = _build(args)
    system = assemble(history[-1].mesh, bench.geometry, bench.problem)
    solve(system)
    dump_system(system, args.out)
    print(f"system written to {args.out}")
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="higa",
                                 description="adaptive hierarchical spline solver")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a convergence benchmark")
    _add_problem_args(p)
    p.add_argument("--max-dofs", type=int, default=30_000)
    p.add_argument("--max-steps", type=int, default=30)
    p.add_argument("--out", default=None, help="write history CSV here")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("verify-axioms",
                       help="randomized mesh/basis structure checks")
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--seed", type=int, default=20240801)
    p.set_defaults(fn=cmd_verify_axioms)

    p = sub.add_parser("dump-mesh", help="run a few steps, dump the mesh")
    _add_problem_args(p)
    p.add_argument("--steps", type=int, default=5)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dump_mesh)

    p = sub.add_parser("dump-system",
                       help="run a few steps, dump matrix and rhs")
    _add_problem_args(p)
    p.add_argument("--steps", type=int, default=3)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_dump_system)

    args = ap.parse_args(argv)
    try:
        return args.fn(args)
    except (ConfigError, InvalidInputError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
