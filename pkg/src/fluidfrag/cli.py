"""Command-line interface: ``fluidfrag <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import pipeline
from .fluid import RepartitionSolution, apply_repartition, iterate
from .fock.kernels import BACKEND
from .fock.states import ProxyKind
from .fragments import FragmentSet
from .metrics import ShotSimulator, exact_report
from .tensors import FCIDUMPError, read_fcidump, symmetry_residuals


def _e(x: float) -> str:
    return f"{x:.5e}"


def _out(text: str, path: str | None):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_check(args) -> int:
    raw = read_fcidump(pipeline.resolve_input(args.fcidump))
    print(f"norb\t{raw.n_orbitals}")
    print(f"nelec\t{raw.n_electrons}")
    print(f"ms2\t{raw.ms2}")
    print(f"e_nuc\t{_e(raw.e_nuc)}")
    print(f"norm_h\t{_e(np.linalg.norm(raw.core_h))}")
    print(f"norm_eri\t{_e(np.linalg.norm(raw.eri))}")
    for key, value in symmetry_residuals(raw.core_h, raw.eri).items():
        print(f"residual_{key}\t{_e(value)}")
    return 0


def cmd_energy(args) -> int:
    system = pipeline.System(args.fcidump)
    kinds = [ProxyKind.parse(k) for k in args.states.split(",")]
    for kind in kinds:
        print(f"{kind.value}\t{_e(system.energy(kind))}")
    return 0


def cmd_decompose(args) -> int:
    system = pipeline.System(args.fcidump)
    frags = pipeline.decompose(system, args.method, args.threshold, args.seed, args.restarts)
    Path(args.output).write_text(frags.dumps())
    print(f"n_fragments\t{frags.n_fragments}")
    print(f"residual_l1\t{_e(frags.residual_l1)}")
    return 0


def _load(args):
    system = pipeline.System(args.fcidump)
    frags = FragmentSet.loads(Path(args.fragments).read_text())
    if frags.n_orbitals != system.raw.n_orbitals:
        raise ValueError("fragment file and FCIDUMP have different orbital counts")
    return system, frags


def cmd_optimize(args) -> int:
    system, frags = _load(args)
    sol = iterate(frags, system.state(args.proxy), args.variant, tol=args.tol, max_iter=args.max_iter)
    Path(args.output).write_text(sol.dumps())
    print(f"variant\t{sol.variant.value}")
    print(f"n_c\t{sol.n_c}")
    print(f"iterations\t{sol.iterations}")
    print(f"converged\t{sol.converged}")
    print(f"predicted_eps2M\t{_e(sol.predicted_eps2M)}")
    return 0


def _repartitioned(args, frags):
    if not args.solution:
        return frags, None
    sol = RepartitionSolution.loads(Path(args.solution).read_text())
    return apply_repartition(frags, sol.c, sol.variant, sol.spin_paired), sol


def cmd_report(args) -> int:
    system, frags = _load(args)
    final, sol = _repartitioned(args, frags)
    report = exact_report(
        final,
        None if sol is None else sol.m,
        system.state("fci"),
        predicted_eps2M=None if sol is None else sol.predicted_eps2M,
        molecule=system.tag,
        variant="none" if sol is None else sol.variant.value,
        allocation="optimal-exact" if sol is None else "optimized-proxy",
        cisd_frozen_core="none",
    )
    _out(report.to_tsv(), args.output)
    return 0


def cmd_simulate(args) -> int:
    system, frags = _load(args)
    final, sol = _repartitioned(args, frags)
    psi = system.state("fci")
    report = exact_report(final, None if sol is None else sol.m, psi)
    sim = ShotSimulator(final, psi)
    estimates = []
    for k in range(args.runs):
        run = sim.run(report.m, args.shots, args.seed + k)
        for note in run.warnings:
            logging.warning(note)
        estimates.append(run.estimate + system.spatial.e_nuc)
    estimates = np.array(estimates)
    print(f"shots\t{args.shots}")
    print(f"runs\t{args.runs}")
    print(f"e_fci\t{_e(sim.reference + system.spatial.e_nuc)}")
    print(f"mean_estimate\t{_e(estimates.mean())}")
    if args.runs > 1:
        print(f"empirical_variance\t{_e(estimates.var(ddof=1))}")
    print(f"predicted_variance\t{_e(report.eps2M / args.shots)}")
    return 0


def cmd_bench(args) -> int:
    if args.config:
        cfg = pipeline.PipelineConfig.from_file(args.config)
        rows = [pipeline.run_pipeline(cfg)]
    else:
        rows = pipeline.sweep(
            args.molecules.split(","),
            methods=args.methods.split(","),
            variants=args.variants.split(","),
            proxy=args.proxy,
            tol=args.tol,
            seed=args.seed,
        )
    text = pipeline.emit_table(rows, fmt=args.format, timing=args.timing)
    if args.counts:
        text += "\n" + pipeline.emit_counts(rows, fmt=args.format)
    _out(text, args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fluidfrag", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("check", help="validate an FCIDUMP file")
    s.add_argument("fcidump")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("energy", help="HF / CISD / FCI energies")
    s.add_argument("fcidump")
    s.add_argument("--states", default="hf,cisd,fci")
    s.set_defaults(func=cmd_energy)

    s = sub.add_parser("decompose", help="initial LR or GFRO fragments")
    s.add_argument("--method", choices=pipeline.METHODS, default="lr")
    s.add_argument("--threshold", type=float, default=None)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--restarts", type=int, default=5)
    s.add_argument("fcidump")
    s.add_argument("output")
    s.set_defaults(func=cmd_decompose)

    s = sub.add_parser("optimize", help="fluid repartitioning of one-electron weight")
    s.add_argument("--variant", choices=("full", "r1", "r2"), default="full")
    s.add_argument("--proxy", choices=("hf", "cisd", "fci"), default="cisd")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--max-iter", type=int, default=50)
    s.add_argument("fragments")
    s.add_argument("fcidump")
    s.add_argument("output")
    s.set_defaults(func=cmd_optimize)

    for name, func in (("report", cmd_report), ("simulate", cmd_simulate)):
        s = sub.add_parser(name)
        s.add_argument("fragments")
        s.add_argument("fcidump")
        s.add_argument("--solution", default=None)
        s.set_defaults(func=func)
    sub.choices["report"].add_argument("-o", "--output", default=None)
    sub.choices["simulate"].add_argument("--shots", type=int, required=True)
    sub.choices["simulate"].add_argument("--seed", type=int, default=0)
    sub.choices["simulate"].add_argument("--runs", type=int, default=1)

    s = sub.add_parser("bench", help="benchmark table over fixtures")
    s.add_argument("--config", default=None, help="run one pipeline from a key=value file")
    s.add_argument("--molecules", default="h3p,h4")
    s.add_argument("--methods", default="lr")
    s.add_argument("--variants", default="none,full,r1,r2")
    s.add_argument("--proxy", default="cisd")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--format", choices=("tsv", "markdown"), default="tsv")
    s.add_argument("--timing", action="store_true")
    s.add_argument("--counts", action="store_true", help="append N_f / N_c table")
    s.add_argument("-o", "--output", default=None)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    logging.getLogger(__name__).debug("kernel backend: %s", BACKEND)
    if getattr(args, "shots", 1) is not None and getattr(args, "shots", 1) < 1:
        print("error: --shots must be positive", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except pipeline.PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (FCIDUMPError, ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: [{args.command}] {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
