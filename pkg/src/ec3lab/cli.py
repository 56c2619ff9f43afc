"""Command-line interface: instance tools, spectra, tunneling checks, experiments.

Exit codes: 0 success, 2 usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    assignment_for,
    clean,
    instance_stats,
    instance_to_text,
    random_instance,
    read_instance,
)
from .dpll import solve_all
from .errors import Ec3Error
from .harness import (
    ExperimentConfig,
    crossing_search,
    run_experiment,
    write_curve_csv,
    write_fit_json,
    write_records_csv,
    write_stats_csv,
)
from .perturbation import correction_series, splitting
from .rng import SplitMix64
from .spectrum import (
    at_coupling,
    certify,
    first_order_state,
    gap_scan,
    lower_bound,
)
from .tunneling import (
    amplitude_bruteforce,
    amplitude_dp,
    barrier_profile,
    random_tree,
    read_agree,
    reduce_to_agree,
    sampled_barrier,
    typicality,
    write_agree,
)


def _parse_n_values(text: str) -> tuple[int, ...]:
    if ":" in text:
        parts = text.split(":")
        if len(parts) == 2:
            start, stop = int(parts[0]), int(parts[1])
            step = 1
        elif len(parts) == 3:
            start, stop, step = (int(p) for p in parts)
        else:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        if step < 1 or stop < start:
            raise argparse.ArgumentTypeError(f"bad range {text!r}")
        return tuple(range(start, stop + 1, step))
    if "," in text:
        return tuple(int(p) for p in text.split(","))
    return (int(text),)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ec3lab",
        description="Spectral-gap laboratory for random Exact Cover 3 instances.",
    )
    parser.add_argument("--version", action="version", version=f"ec3lab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="generate a random instance")
    p.add_argument("-n", type=int, required=True, help="number of bits")
    p.add_argument("-m", type=int, required=True, help="number of clauses")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("clean", help="remove trivially degenerate clauses and absent bits")
    p.add_argument("input", type=Path)
    p.add_argument("-o", "--output", type=Path, default=None)

    p = sub.add_parser("solve", help="enumerate all solutions")
    p.add_argument("input", type=Path)
    p.add_argument("--cap", type=int, default=10**6)

    p = sub.add_parser("stats", help="coupling-graph statistics")
    p.add_argument("input", type=Path)
    p.add_argument("--u-max", type=int, default=4)

    p = sub.add_parser("perturb", help="eigenvalue corrections for solutions")
    p.add_argument("input", type=Path)
    p.add_argument("--assignment", default=None, help="bit string (default: all solutions)")
    p.add_argument("--through", type=int, default=6, choices=(2, 4, 6))
    p.add_argument("--mode", default="float", choices=("exact", "float"))
    p.add_argument("--cap", type=int, default=10**4)

    p = sub.add_parser("splitting", help="order-4/6 splitting between two solutions")
    p.add_argument("input", type=Path)
    p.add_argument("--a", required=True, help="first solution bits")
    p.add_argument("--b", required=True, help="second solution bits")
    p.add_argument("--mode", default="exact", choices=("exact", "float"))

    p = sub.add_parser("gap", help="scan the schedule gap")
    p.add_argument("input", type=Path)
    p.add_argument("--points", type=int, default=50)
    p.add_argument("--refine", action="store_true")
    p.add_argument("-o", "--output", type=Path, default=None, help="CSV path")
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("bound", help="proven gap lower bound (unique-solution instances)")
    p.add_argument("input", type=Path)
    p.add_argument("--s", type=float, required=True)

    p = sub.add_parser("certify", help="residual bracket for a truncated-series eigenvalue")
    p.add_argument("input", type=Path)
    p.add_argument("--assignment", required=True)
    p.add_argument("--coupling", type=float, required=True)
    p.add_argument("--through", type=int, default=6, choices=(2, 4, 6))
    p.add_argument("--mode", default="float", choices=("exact", "float"))

    p = sub.add_parser("tunnel", help="tunneling-amplitude tools")
    p.add_argument("--tree-check", type=int, metavar="K", default=None,
                   help="verify the tree identity on K random trees")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--reduce", type=Path, default=None, metavar="INSTANCE")
    p.add_argument("--a", default=None, help="first solution bits (with --reduce)")
    p.add_argument("--b", default=None, help="second solution bits (with --reduce)")
    p.add_argument("--amplitude", type=Path, default=None, metavar="AGREE")
    p.add_argument("--bruteforce", type=Path, default=None, metavar="AGREE")
    p.add_argument("--barrier", type=Path, default=None, metavar="AGREE")
    p.add_argument("--samples", type=int, default=0,
                   help="Monte-Carlo permutation samples for --barrier")
    p.add_argument("--typicality", type=float, default=None, metavar="ALPHA")
    p.add_argument("--n-bits", type=float, default=1.0)
    p.add_argument("--mode", default="exact", choices=("exact", "float"))
    p.add_argument("-o", "--output", type=Path, default=None)
    p.add_argument("--no-figure", action="store_true")

    p = sub.add_parser("experiment", help="splitting statistics over a range of N")
    p.add_argument("--alpha", type=float, default=0.62)
    p.add_argument("--n", type=_parse_n_values, required=True,
                   help="N values as start:stop:step, comma list, or a single value")
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=10**6)
    p.add_argument("--mode", default="float", choices=("exact", "float"))
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("crossing", help="search accepted trials for level crossings")
    p.add_argument("--alpha", type=float, default=0.62)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--samples", type=int, default=2000, help="accepted trials to scan")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cap", type=int, default=10**6)
    p.add_argument("--mode", default="float", choices=("exact", "float"))
    p.add_argument("--lambda-max", type=float, default=1.0)
    p.add_argument("--stop-after", type=int, default=None,
                   help="stop once this many crossings were found")
    p.add_argument("--max-curves", type=int, default=8)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--quiet", action="store_true")

    return parser


def _cmd_gen(args) -> int:
    inst = random_instance(args.n, args.m, args.seed)
    text = instance_to_text(inst)
    if args.output:
        args.output.write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def _cmd_clean(args) -> int:
    inst = read_instance(args.input)
    result = clean(inst)
    text = instance_to_text(result.instance)
    if args.output:
        args.output.write_text(text, encoding="utf-8")
        print(
            f"kept {result.instance.n_clauses}/{inst.n_clauses} clauses, "
            f"{result.instance.n_bits}/{inst.n_bits} bits "
            f"({result.rounds} rounds)"
        )
    else:
        sys.stdout.write(text)
    return 0


def _cmd_solve(args) -> int:
    inst = read_instance(args.input)
    result = solve_all(inst, cap=args.cap)
    for sol in result.solutions:
        print(sol.bits)
    suffix = " (truncated)" if result.truncated else ""
    print(f"{len(result.solutions)} solutions{suffix}", file=sys.stderr)
    return 0


def _cmd_stats(args) -> int:
    inst = read_instance(args.input)
    stats = instance_stats(inst, args.u_max)
    print(f"n_bits {inst.n_bits}")
    print(f"n_clauses {inst.n_clauses}")
    print(f"alpha {float(inst.alpha):.6g}")
    print(f"present_bits {stats.present_bits}")
    print(f"b_mean {stats.b_mean:.6g}")
    print(f"b_var {stats.b_var:.6g}")
    for u, g in enumerate(stats.g_u, start=1):
        print(f"g_{u} {g}")
    return 0


def _cmd_perturb(args) -> int:
    inst = read_instance(args.input)
    if args.assignment:
        targets = [assignment_for(inst, args.assignment)]
    else:
        solset = solve_all(inst, cap=args.cap)
        targets = list(solset.solutions)
    for a in targets:
        series = correction_series(inst, a, through=args.through, mode=args.mode)
        parts = [f"bits={a.bits}", f"e0={series.e0}"]
        for name, val in (("e2", series.e2), ("e4", series.e4), ("e6", series.e6)):
            if val is not None:
                parts.append(f"{name}={_num(val)}")
        print(" ".join(parts))
    return 0


def _num(value) -> str:
    if isinstance(value, Fraction):
        return str(value)
    return f"{value:.12g}"


def _cmd_splitting(args) -> int:
    inst = read_instance(args.input)
    result = splitting(inst, args.a, args.b, mode=args.mode)
    print(f"e12_4 {_num(result.e12_4)}")
    print(f"e12_6 {_num(result.e12_6)}")
    print(f"hamming_n {result.hamming_n}")
    return 0


def _cmd_gap(args) -> int:
    inst = read_instance(args.input)
    grid = np.linspace(1.0 / args.points, 1.0, args.points)
    scan = gap_scan(inst, grid, refine=args.refine)
    lines = [f"# ec3lab {__version__}", "s,e0,e1,gap"]
    for s, e0, e1, g in scan.grid:
        lines.append(f"{s:.12g},{e0:.12g},{e1:.12g},{g:.12g}")
    text = "\n".join(lines) + "\n"
    if args.output:
        args.output.write_text(text, encoding="utf-8")
        if not args.no_figure:
            from .reports import save_gap_figure

            save_gap_figure(scan, args.output.with_suffix(".png"))
    else:
        sys.stdout.write(text)
    print(f"min_gap {scan.min_gap:.10g} at s={scan.argmin_s:.6f}", file=sys.stderr)
    return 0


def _cmd_bound(args) -> int:
    inst = read_instance(args.input)
    cert = lower_bound(inst, args.s)
    print(f"regime {cert.regime}")
    print(f"s {cert.s:.12g}")
    print(f"bound {cert.bound_value:.12g}")
    print(f"n_bits {cert.n_bits}")
    print(f"energy_cap {cert.energy_cap}")
    return 0


def _cmd_certify(args) -> int:
    inst = read_instance(args.input)
    series = correction_series(inst, args.assignment, through=args.through, mode=args.mode)
    state = first_order_state(inst, args.assignment, args.coupling)
    cert = certify(at_coupling(inst, args.coupling), state, series.evaluate(args.coupling))
    print(f"estimate {cert.estimate_energy:.12g}")
    print(f"residual {cert.residual:.12g}")
    print(f"interval [{cert.interval[0]:.12g}, {cert.interval[1]:.12g}]")
    return 0


def _cmd_tunnel(args) -> int:
    if args.tree_check is not None:
        rng = SplitMix64(args.seed)
        good = 0
        for _ in range(args.tree_check):
            n = 2 + rng.randbelow(11)
            tree = random_tree(n, rng.next_u64())
            result = amplitude_dp(tree, mode="exact")
            if result.coefficient == Fraction(2) ** (n - 1):
                good += 1
        print(f"{good}/{args.tree_check} trees match 2^{{n-1}}")
        return 0 if good == args.tree_check else 3
    if args.reduce is not None:
        if not args.a or not args.b:
            print("--reduce needs --a and --b", file=sys.stderr)
            return 2
        inst = read_instance(args.reduce)
        result = reduce_to_agree(inst, args.a, args.b)
        if args.output:
            write_agree(result.agree, args.output)
        print(f"n {result.agree.n_bits}")
        print(f"m {result.agree.m}")
        print(f"relevant_bits {' '.join(str(b) for b in result.relevant_bits)}")
        print(f"connected {int(result.agree.is_connected())}")
        return 0
    if args.amplitude is not None:
        agree = read_agree(args.amplitude)
        result = amplitude_dp(agree, mode=args.mode)
        print(f"order {result.order}")
        print(f"coefficient {_num(result.coefficient)}")
        return 0
    if args.bruteforce is not None:
        agree = read_agree(args.bruteforce)
        result = amplitude_bruteforce(agree, mode=args.mode)
        print(f"order {result.order}")
        print(f"coefficient {_num(result.coefficient)}")
        return 0
    if args.barrier is not None:
        agree = read_agree(args.barrier)
        profile = barrier_profile(agree)
        lines = [f"# ec3lab {__version__}", "j,mean_e"]
        for jj, e in enumerate(profile.mean_e, start=1):
            lines.append(f"{jj},{e:.12g}")
        text = "\n".join(lines) + "\n"
        if args.output:
            args.output.write_text(text, encoding="utf-8")
            if not args.no_figure:
                from .reports import save_barrier_figure

                save_barrier_figure(profile, args.output.with_suffix(".png"))
        else:
            sys.stdout.write(text)
        if args.samples:
            means, errs = sampled_barrier(agree, args.samples, args.seed)
            for jj, (m_e, se) in enumerate(zip(means, errs), start=1):
                print(f"sampled j={jj} mean={m_e:.6g} stderr={se:.3g}", file=sys.stderr)
        print(f"lambda_a {profile.lambda_a:.6g}", file=sys.stderr)
        return 0
    if args.typicality is not None:
        prof = typicality(args.typicality, args.n_bits)
        print(f"p00 {prof.p00:.10g}")
        print(f"p01 {prof.p01:.10g}")
        print(f"p10 {prof.p10:.10g}")
        print(f"p11 {prof.p11:.10g}")
        print(f"typ_n {prof.typ_n:.10g}")
        print(f"typ_m {prof.typ_m:.10g}")
        print(f"typ_beta {prof.typ_beta:.10g}")
        print(f"lambda_a {prof.lambda_a:.10g}")
        return 0
    print("tunnel: choose one of --tree-check/--reduce/--amplitude/"
          "--bruteforce/--barrier/--typicality", file=sys.stderr)
    return 2


def _cmd_experiment(args) -> int:
    config = ExperimentConfig(
        n_values=args.n,
        alpha=args.alpha,
        samples_per_n=args.samples,
        master_seed=args.seed,
        solution_cap=args.cap,
        numeric_mode=args.mode,
        worker_count=args.workers,
    )
    out = args.output
    out.mkdir(parents=True, exist_ok=True)

    def progress(n, accepted, attempts):
        if not args.quiet:
            print(f"n={n}: {accepted} accepted / {attempts} attempts", file=sys.stderr)

    result = run_experiment(config, progress=progress)
    write_stats_csv(out / "stats.csv", result.stats, config)
    write_records_csv(out / "records.csv", result.records, config)
    write_fit_json(out / "fit.json", result.stats, config)
    if not args.no_figures:
        from .reports import save_splitting_figure

        save_splitting_figure(result.stats, 4, out / "splitting4.png")
        save_splitting_figure(result.stats, 6, out / "splitting6.png")
    print(
        f"c4={result.stats.c4:.5g}+-{result.stats.c4_stderr:.2g} "
        f"c6={result.stats.c6:.5g}+-{result.stats.c6_stderr:.2g} "
        f"lambda_r={result.stats.lambda_r:.4g}"
    )
    return 0


def _cmd_crossing(args) -> int:
    config = ExperimentConfig(
        n_values=(args.n,),
        alpha=args.alpha,
        samples_per_n=args.samples,
        master_seed=args.seed,
        solution_cap=args.cap,
        numeric_mode=args.mode,
    )
    out = args.output
    out.mkdir(parents=True, exist_ok=True)

    def progress(n, accepted, attempts, found):
        if not args.quiet:
            print(
                f"n={n}: {accepted} accepted / {attempts} attempts, {found} crossings",
                file=sys.stderr,
            )

    result = crossing_search(
        config,
        args.n,
        max_accepted=args.samples,
        lambda_max=args.lambda_max,
        stop_after=args.stop_after,
        progress=progress,
    )
    write_records_csv(out / "records.csv", result.records, config)
    for hit in result.hits[: args.max_curves]:
        write_curve_csv(out / f"curve_{hit.trial_index}.csv", hit, config)
        if not args.no_figures:
            from .reports import save_crossing_figure

            save_crossing_figure(hit, out / f"curve_{hit.trial_index}.png")
    print(f"{len(result.hits)} crossings in {result.accepted} accepted trials")
    for hit in result.hits:
        print(
            f"trial {hit.trial_index}: lambda*={hit.lam_star:.4f} n={hit.hamming_n}"
        )
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "clean": _cmd_clean,
    "solve": _cmd_solve,
    "stats": _cmd_stats,
    "perturb": _cmd_perturb,
    "splitting": _cmd_splitting,
    "gap": _cmd_gap,
    "bound": _cmd_bound,
    "certify": _cmd_certify,
    "tunnel": _cmd_tunnel,
    "experiment": _cmd_experiment,
    "crossing": _cmd_crossing,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except Ec3Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except BrokenPipeError:
        # downstream consumer (e.g. head) closed the pipe; not an error
        import os

        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0


if __name__ == "__main__":
    sys.exit(main())
