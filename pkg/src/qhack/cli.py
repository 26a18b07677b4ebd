"""Command-line interface: ``qhack <eval|optimize|sweep|theory|verify|hp>``.

Results go to stdout as JSON unless ``--out`` names a file. Exit status is
0 on success, 1 on invalid input and 2 when a verification suite fails.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from qhack import experiments, hacking
from qhack.hacking import OptimizerSettings, UnitaryNetwork
from qhack.random import RngState, haar_unitary
from qhack.theory import DimensionProfile, avg_p_opt, i_kappa, i_kappa_approx

EXIT_OK, EXIT_INPUT, EXIT_VERIFY = 0, 1, 2
SEED_ENV = "QHACK_SEED"
UNITARY_TOL = 1e-8


class InputError(Exception):
    """Invalid flags or input file; reported as a one-line diagnostic."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return args.seed
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise InputError(f"{SEED_ENV}={raw!r} is not an integer") from None


def load_unitary(path) -> UnitaryNetwork:
    """Read a network from JSON with keys ``d_a, d_b[, d_k, d_l, d_0], re, im``."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{path}: top level must be an object")
    missing = [k for k in ("d_a", "d_b", "re", "im") if k not in doc]
    if missing:
        raise InputError(f"{path}: missing keys {missing}")
    try:
        dims = {k: int(doc[k]) for k in ("d_a", "d_b", "d_k", "d_l", "d_0") if doc.get(k) is not None}
        re = np.asarray(doc["re"], dtype=float)
        im = np.asarray(doc["im"], dtype=float)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{path}: non-numeric entries ({exc})") from None
    if re.shape != im.shape or re.ndim != 2:
        raise InputError(f"{path}: re and im must be matrices of equal shape, got {re.shape} and {im.shape}")
    try:
        return UnitaryNetwork(
            re + 1j * im,
            dims["d_a"],
            dims["d_b"],
            dims.get("d_k"),
            dims.get("d_l"),
            dims.get("d_0", 1),
            atol=UNITARY_TOL,
        )
    except ValueError as exc:
        raise InputError(f"{path}: {exc}") from None


def _network(args) -> UnitaryNetwork:
    if args.unitary:
        return load_unitary(args.unitary)
    if args.da is None or args.db is None:
        raise InputError("give either --unitary FILE or both --da and --db")
    dk = args.dk if args.dk is not None else args.da
    dl = args.dl if args.dl is not None else args.db
    try:
        u = haar_unitary(args.da * args.db * args.d0, RngState(_seed(args)))
        return UnitaryNetwork(u, args.da, args.db, dk, dl, args.d0, atol=UNITARY_TOL)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _settings(args) -> OptimizerSettings:
    try:
        return OptimizerSettings(step_size=args.eps, max_iter=args.max_iter, convergence_tol=args.tol, restarts=args.restarts)
    except ValueError as exc:
        raise InputError(str(exc)) from None


def _report_json(rep: hacking.HackingReport, ch: hacking.RotatedChannel, trace: bool) -> dict:
    out = {
        "strategy": rep.strategy,
        "quantity": "hacking_fidelity_trace_form",
        "p_hack": rep.p_hack,
        "chi": rep.chi,
        "recovery": rep.recovery,
        "iterations": rep.iterations,
        "residual": rep.residual,
        "converged": rep.converged,
        "dims": {"d_a": ch.da, "d_b": ch.db, "d_k": ch.dk, "d_l": ch.dl, "d_0": ch.d0},
    }
    if "p_reopt" in rep.extra:
        out["p_reopt"] = rep.extra["p_reopt"]
    if trace:
        out["trace"] = rep.history
        out["total_iterations"] = rep.extra.get("total_iterations", rep.iterations)
    return out


def _emit(doc, out) -> None:
    if out:
        try:
            experiments.write_json(doc, out)
        except OSError as exc:
            raise InputError(str(exc)) from None
    else:
        json.dump(experiments.to_jsonable(doc), sys.stdout, indent=2, sort_keys=True)
        sys.stdout.write("\n")


def cmd_eval(args) -> int:
    net = _network(args)
    ch = hacking.rotated(net)
    strategy = args.strategy.upper()
    gen = RngState(_seed(args), 1).generator()
    if strategy == "ME":
        rep = hacking.me_strategy(ch)
    elif strategy == "PG":
        rep = hacking.pg_strategy(ch)
    elif strategy == "OPT":
        rep = hacking.optimize_probe(ch, OptimizerSettings(), gen)
    else:
        rep = hacking.random_strategy(ch, gen)
    _emit(_report_json(rep, ch, trace=False), args.out)
    return EXIT_OK


def cmd_optimize(args) -> int:
    net = _network(args)
    ch = hacking.rotated(net)
    rep = hacking.optimize_probe(ch, _settings(args), RngState(_seed(args), 1).generator())
    _emit(_report_json(rep, ch, trace=True), args.out)
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"cannot read {args.config}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.config}: malformed JSON ({exc.msg} at line {exc.lineno})") from None
    if not isinstance(doc, dict):
        raise InputError(f"{args.config}: top level must be an object")
    if args.seed is not None or "master_seed" not in doc:
        doc["master_seed"] = _seed(args)
    try:
        config = experiments.ExperimentConfig.from_dict(doc)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{args.config}: {exc}") from None
    if args.threads < 1:
        raise InputError("--threads must be at least 1")
    rows = experiments.run_sweep(config, threads=args.threads)
    if args.out:
        try:
            written = experiments.write_csv(rows, args.out)
        except OSError as exc:
            raise InputError(str(exc)) from None
        _emit({"written": [str(p) for p in written], "rows": len(rows)}, None)
    else:
        _emit({"config": config.to_dict(), "rows": rows, "aggregates": experiments.aggregate(rows)}, None)
    return EXIT_OK


def cmd_theory(args) -> int:
    try:
        prof = DimensionProfile(args.da, args.db, args.dk, args.dl, args.d0)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    doc = {
        "quantity": "haar_average_asymptotic",
        "d_a": prof.da,
        "d_b": prof.db,
        "d_k": prof.dk,
        "d_l": prof.dl,
        "d_0": prof.d0,
        "kappa": prof.kappa,
        "avg_p_opt": avg_p_opt(prof),
        "i_kappa": i_kappa(prof.kappa),
        "i_kappa_approx": i_kappa_approx(prof.kappa),
    }
    _emit(doc, args.out)
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        report = experiments.run_verify(args.suite, args.trials, _seed(args))
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(report, args.out)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_hp(args) -> int:
    net = _network(args)
    try:
        res = hacking.hp_optimal(net, rng=RngState(_seed(args), 1).generator())
    except ValueError as exc:
        raise InputError(str(exc)) from None
    doc = {
        "quantity": "hayden_preskill_duality",
        "kappa": res["kappa"],
        "p_hp_opt": res["p_hp_opt"],
        "p_hack_opt": res["p_hack_opt"],
        "p_hack_opt_over_kappa2": res["p_hack_opt_over_kappa2"],
        "difference": res["p_hp_opt"] - res["p_hack_opt_over_kappa2"],
        "decoder": res["decoder"],
    }
    _emit(doc, args.out)
    return EXIT_OK


def _add_network_args(p):
    p.add_argument("--unitary", metavar="FILE", help="JSON network file (d_a, d_b, [d_k, d_l, d_0], re, im)")
    p.add_argument("--da", type=int)
    p.add_argument("--db", type=int)
    p.add_argument("--dk", type=int)
    p.add_argument("--dl", type=int)
    p.add_argument("--d0", type=int, default=1)
    p.add_argument("--seed", type=int, help=f"master seed (default ${SEED_ENV} or 0)")
    p.add_argument("--out", metavar="FILE")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qhack", description="Quantum hacking fidelities of unitary networks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("eval", help="evaluate one strategy")
    _add_network_args(p)
    p.add_argument("--strategy", choices=["me", "pg", "opt", "rand"], default="opt", type=str.lower)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("optimize", help="optimize the probe and report the trace")
    _add_network_args(p)
    p.add_argument("--eps", type=float, default=0.2)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--tol", type=float, default=1e-10)
    p.add_argument("--restarts", type=int, default=3)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="Monte Carlo sweep from a JSON config")
    p.add_argument("--config", required=True, metavar="FILE")
    p.add_argument("--out", metavar="FILE.csv")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("theory", help="asymptotic Haar averages")
    p.add_argument("--da", type=int, required=True)
    p.add_argument("--db", type=int, required=True)
    p.add_argument("--dk", type=int)
    p.add_argument("--dl", type=int)
    p.add_argument("--d0", type=int, default=1)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("verify", help="randomized invariant suites")
    p.add_argument("--suite", required=True, choices=list(experiments.SUITES))
    p.add_argument("--trials", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", metavar="FILE")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("hp", help="dual decoding fidelity next to p_opt / kappa^2")
    _add_network_args(p)
    p.set_defaults(func=cmd_hp)
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except InputError as exc:
        print(f"qhack: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
