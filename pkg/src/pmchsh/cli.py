"""
Command-line front end.

Exit codes: 0 success, 2 usage or unreadable input, 3 bound violation found
by a verification command, 4 qubit assumption violated where it is required.
Every failure prints one line ``error: <kind>: <reason>`` to stderr.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .attacks import AttackParams, attack_for_chsh, bb84_counterexample, f_z_for_chsh, optimal_attack, optimize_attack
from .entropy import chsh_min_entropy_bound, robust_min_entropy_bound, trace_distance_bound
from .jordan import block_weights_and_scores, check_block_inequalities, eve_sign_operator, joint_block_diagonalize
from .linalg import DEFAULT_TOL, LinalgError
from .report import analyze, rows_to_csv
from .scenario import TSIRELSON, QubitAssumptionViolated, Scenario, ScenarioError, source_geometry
from .verify import CampaignConfig, mixture_check, run_campaign, trial_seed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VIOLATION = 3
EXIT_QUBIT = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _nonneg(text: str) -> float:
    v = _finite(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {text!r}")
    return v


def _chsh(text: str) -> float:
    v = _finite(text)
    if abs(v) > TSIRELSON + 1e-9:
        raise argparse.ArgumentTypeError(f"CHSH value must satisfy |S| <= 2*sqrt(2), got {text!r}")
    return v


def _unit(text: str) -> float:
    v = _finite(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [0, 1], got {text!r}")
    return v


def _global_flags(suppress: bool) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    kw = {"default": argparse.SUPPRESS} if suppress else {}
    p.add_argument("--format", choices=("json", "csv"), help="output format (default json)",
                   **(kw or {"default": "json"}))
    p.add_argument("--out", type=Path, help="write output to this file instead of stdout",
                   **(kw or {"default": None}))
    p.add_argument("--tol", type=_nonneg, help=f"numerical tolerance (default {DEFAULT_TOL:g})",
                   **(kw or {"default": DEFAULT_TOL}))
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="pmchsh", parents=[_global_flags(False)],
                     description="Min-entropy certification from a prepare-and-measure CHSH value.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = [_global_flags(True)]
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    p = sub.add_parser("analyze", parents=common, help="full analysis of a scenario file")
    p.add_argument("path", type=Path)
    p.add_argument("--epsilon", type=_nonneg, help="also evaluate the robust bound at this deviation")

    p = sub.add_parser("bound", parents=common, help="trace-distance and min-entropy bounds from S")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--s", type=_chsh, help="CHSH value")
    g.add_argument("--curve", action="store_true", help="tabulate over an inclusive grid")
    p.add_argument("--points", type=_positive_int, default=100)
    p.add_argument("--s-min", type=_chsh, default=2.0)
    p.add_argument("--s-max", type=_chsh, default=TSIRELSON)
    p.add_argument("--epsilon", type=_nonneg, help="also report the robust bound")

    p = sub.add_parser("attack", parents=common, help="the tight collective attack")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--fz", type=_unit, help="overlap of Eve's states")
    g.add_argument("--s-target", type=_chsh, help="CHSH value in [2, 2*sqrt(2)] to reach")
    p.add_argument("--dim-e", type=_positive_int, default=2)
    p.add_argument("--save-scenario", type=Path, help="also write the scenario as JSON")

    p = sub.add_parser("counterexample", parents=common, help="analysis of the duplicated BB84 source")
    p.add_argument("--save-scenario", type=Path)

    p = sub.add_parser("stress", parents=common, help="property campaign over random qubit scenarios")
    p.add_argument("--trials", type=_positive_int, default=1000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim-b", type=_positive_int, nargs="+", default=[2, 3, 4])
    p.add_argument("--dim-e", type=_positive_int, nargs="+", default=[1, 2, 3, 4])
    p.add_argument("--tolerance", type=_nonneg, default=1e-7)

    p = sub.add_parser("mixture", parents=common, help="convexity check for shared-randomness mixtures")
    p.add_argument("--seeds", type=int, nargs="+", help="one seed per component")
    p.add_argument("--weights", type=_nonneg, nargs="+", help="mixing weights, summing to 1")
    p.add_argument("--random", type=_positive_int, metavar="N",
                   help="instead check N random two-component mixtures derived from --seed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim-b", type=_positive_int, default=2)
    p.add_argument("--dim-e", type=_positive_int, default=2)
    p.add_argument("--tolerance", type=_nonneg, default=1e-7)

    p = sub.add_parser("optimize", parents=common, help="search for the strongest attack at a CHSH value")
    p.add_argument("--s-target", type=_chsh, required=True)
    p.add_argument("--restarts", type=_positive_int, default=32)
    p.add_argument("--iterations", type=_positive_int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--dim-e", type=_positive_int, default=2)
    p.add_argument("--save-scenario", type=Path)

    p = sub.add_parser("jordan", parents=common, help="Jordan block table and per-block checks")
    p.add_argument("path", type=Path)
    return parser


class _Fail(Exception):
    def __init__(self, code: int, kind: str, message: str):
        super().__init__(message)
        self.code = code
        self.kind = kind


def _load(path: Path) -> Scenario:
    try:
        return Scenario.load(path)
    except OSError as exc:
        raise _Fail(EXIT_USAGE, "input", f"cannot read {path}: {exc.strerror or exc}") from exc
    except (ScenarioError, LinalgError, KeyError, TypeError, ValueError) as exc:
        raise _Fail(EXIT_USAGE, "input", f"{path}: {exc}") from exc


def _save(s: Scenario, path: Path | None) -> None:
    if path is not None:
        path.write_text(s.to_json(indent=2) + "\n")


def _bound_row(s: float, epsilon: float | None) -> dict:
    row = {"s": s, "d_bound": min(trace_distance_bound(s), 1.0),
           "h_min_bound": max(chsh_min_entropy_bound(s), 0.0)}
    if epsilon is not None:
        row["robust_h_min_bound"] = max(robust_min_entropy_bound(s, epsilon), 0.0)
    return row


def _attack_row(s: Scenario, extra: dict) -> dict:
    rep = analyze(s)
    return {**extra, **rep.summary_row()}


def _cmd_analyze(a):
    rep = analyze(_load(a.path), a.epsilon, a.tol)
    return (rep.to_dict(), rep.to_csv()), EXIT_OK


def _cmd_bound(a):
    if a.curve:
        if a.s_min > a.s_max:
            raise UsageError("--s-min must not exceed --s-max")
        grid = [a.s_max] if a.points == 1 else np.linspace(a.s_min, a.s_max, a.points).tolist()
        rows = [_bound_row(s, a.epsilon) for s in grid]
        return (rows, rows_to_csv(rows, list(rows[0]))), EXIT_OK
    row = _bound_row(a.s, a.epsilon)
    return (row, rows_to_csv([row], list(row))), EXIT_OK


def _cmd_attack(a):
    if a.dim_e < 2:
        raise UsageError("--dim-e must be at least 2 for the tight attack")
    if a.fz is not None:
        f = a.fz
        scen = optimal_attack(AttackParams(f, a.dim_e))
    else:
        if a.s_target < 2.0:
            raise UsageError("--s-target must lie in [2, 2*sqrt(2)]")
        f = f_z_for_chsh(a.s_target)
        scen = attack_for_chsh(a.s_target, a.dim_e)
    _save(scen, a.save_scenario)
    row = _attack_row(scen, {"f_z": f})
    return (row, rows_to_csv([row], list(row))), EXIT_OK


def _cmd_counterexample(a):
    scen = bb84_counterexample()
    _save(scen, a.save_scenario)
    rep = analyze(scen, tol=a.tol)
    return (rep.to_dict(), rep.to_csv()), EXIT_OK


def _cmd_stress(a):
    try:
        cfg = CampaignConfig(a.trials, a.seed, tuple(a.dim_b), tuple(a.dim_e), a.tolerance)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    res = run_campaign(cfg, keep_rows=a.format == "csv")
    code = EXIT_OK if res.ok else EXIT_VIOLATION
    return (res.to_dict(), res.rows_csv()), code


def _cmd_mixture(a):
    if a.random is not None:
        if a.seeds or a.weights:
            raise UsageError("--random cannot be combined with --seeds/--weights")
        rng = np.random.default_rng(a.seed)
        jobs = []
        for i in range(a.random):
            q = float(rng.uniform())
            jobs.append(([trial_seed(a.seed, 2 * i), trial_seed(a.seed, 2 * i + 1)], [q, 1.0 - q]))
    else:
        if not a.seeds or not a.weights:
            raise UsageError("give --seeds and --weights, or --random N")
        jobs = [(a.seeds, a.weights)]
    records = []
    for seeds, weights in jobs:
        try:
            records.append(mixture_check(seeds, weights, a.dim_b, a.dim_e))
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
    bad = sum(not r.holds(a.tolerance) for r in records)
    rows = [{"seeds": " ".join(map(str, seeds)), "avg_s": r.avg_s, "avg_d": r.avg_d,
             "rhs": r.rhs, "slack": r.slack} for (seeds, _), r in zip(jobs, records)]
    doc = {"checks": [r.to_dict() for r in records], "violations": bad}
    return (doc, rows_to_csv(rows, ["seeds", "avg_s", "avg_d", "rhs", "slack"])), (EXIT_VIOLATION if bad else EXIT_OK)


def _cmd_optimize(a):
    if a.s_target < 2.0:
        raise UsageError("--s-target must lie in [2, 2*sqrt(2)]")
    scen, best_d = optimize_attack(a.s_target, a.dim_e, a.restarts, a.iterations, a.seed)
    _save(scen, a.save_scenario)
    row = _attack_row(scen, {"s_target": a.s_target, "best_d": best_d,
                             "target_bound": trace_distance_bound(a.s_target)})
    return (row, rows_to_csv([row], list(row))), EXIT_OK


def _cmd_jordan(a):
    scen = _load(a.path)
    try:
        g = source_geometry(scen, a.tol)
    except QubitAssumptionViolated as exc:
        raise _Fail(EXIT_QUBIT, "qubit-assumption", str(exc)) from exc
    except ScenarioError as exc:
        raise _Fail(EXIT_USAGE, "input", str(exc)) from exc
    dec = block_weights_and_scores(scen, g, joint_block_diagonalize(scen.obs_u, scen.obs_v, a.tol), a.tol)
    checks = check_block_inequalities(scen, g, dec, eve_sign_operator(scen, g, a.tol), a.tol)
    blocks = [c.to_dict() for c in checks]
    rows = [{"index": b["index"], "dimension": b["dimension"], "gamma": b["gamma"], "p_k": b["p_k"],
             "s_k": b["s_k"], "worst_slack": c.worst_slack()} for b, c in zip(blocks, checks)]
    doc = {"p_total": dec.p_total, "s_total": dec.s_total, "blocks": blocks}
    return (doc, rows_to_csv(rows, ["index", "dimension", "gamma", "p_k", "s_k", "worst_slack"])), EXIT_OK


COMMANDS = {
    "analyze": _cmd_analyze,
    "bound": _cmd_bound,
    "attack": _cmd_attack,
    "counterexample": _cmd_counterexample,
    "stress": _cmd_stress,
    "mixture": _cmd_mixture,
    "optimize": _cmd_optimize,
    "jordan": _cmd_jordan,
}


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)


def _error(kind: str, message: str) -> None:
    line = " ".join(str(message).split())
    print(f"error: {kind}: {line}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        (doc, csv_text), code = COMMANDS[args.command](args)
        if args.format == "csv":
            text = csv_text
        else:
            text = json.dumps(doc, indent=2, allow_nan=False) + "\n"
        _emit(text, args.out)
    except UsageError as exc:
        _error("usage", exc)
        return EXIT_USAGE
    except _Fail as exc:
        _error(exc.kind, exc)
        return exc.code
    except OSError as exc:
        _error("io", exc)
        return EXIT_USAGE
    if code == EXIT_VIOLATION:
        _error("violation", f"{args.command} found bound violations")
    return code


if __name__ == "__main__":
    sys.exit(main())
