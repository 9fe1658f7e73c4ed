"""Command-line entry points: validate, assign, evaluate, calibrate, split-test, compare."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .assignment import assign_iterative
from .calibrate import calibrate, split_test
from .metrics import evaluate, report_text
from .model_io import (
    LoadedModel,
    ModelLoadError,
    apply_scenario,
    load_model,
    load_scenario,
    write_compare_csv,
    write_flows_csv,
    write_history_csv,
    write_scatter_csv,
    write_split_csv,
    write_weights_yaml,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4

log = logging.getLogger("flowfit")


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_assignment(model: LoadedModel, strata=None):
    opts = model.assignment
    n_outer = 1 if opts.mode == "oneoff" else opts.n_outer
    return assign_iterative(
        model.network, model.zones, strata or model.strata, n_outer,
        gap_tol=opts.gap_tol,
    )


def cmd_validate(args) -> int:
    try:
        model = load_model(args.spec)
    except ModelLoadError as exc:
        print(exc)
        return EXIT_PARSE if exc.stage == "parse" else EXIT_VALIDATION
    print(
        f"OK: {len(model.zones)} zones, {len(model.network.links)} links, "
        f"{len(model.counts)} counts, {len(model.strata)} strata"
    )
    return EXIT_OK


def cmd_assign(args) -> int:
    model = load_model(args.spec)
    result = _run_assignment(model)
    out = _outdir(args)
    write_flows_csv(out / "flows.csv", result)
    print(
        f"assigned {len(model.strata)} strata in {result.iterations} iteration(s), "
        f"relative gap {result.relative_gap:.3e}, converged={result.converged}"
    )
    print(f"wrote {out / 'flows.csv'}")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    model = load_model(args.spec)
    result = _run_assignment(model)
    report = evaluate(result.flows, model.counts)
    out = _outdir(args)
    write_scatter_csv(out / "scatter.csv", report)
    text = report_text(report)
    (out / "report.txt").write_text(text + "\n")
    print(text)
    print(f"wrote {out / 'scatter.csv'} and {out / 'report.txt'}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    model = load_model(args.spec)
    opts = model.calibration
    method = args.method or opts.method
    seed = opts.seed if args.seed is None else args.seed
    result = calibrate(
        model.zones, model.network, model.strata, model.counts,
        method=method, seed=seed,
        bounds=opts.bounds or None, bound_overrides=opts.bound_overrides or None,
        assignment_mode=opts.assignment_mode,
        n_outer=model.assignment.n_outer, gap_tol=model.assignment.gap_tol,
        xatol=opts.xatol, fatol=opts.fatol, max_evals=opts.max_evals,
        sa_options=opts.sa or None,
    )
    best_strata = result.best_weights.apply(model.strata)
    out = _outdir(args)
    write_history_csv(out / "history.csv", result)
    write_weights_yaml(out / "calibrated_weights.yaml", best_strata)

    initial_j = result.history[0][1]
    print(f"method: {method}  seed: {seed}  evaluations: {result.n_evaluations}")
    print(f"objective J: {initial_j:.4f} -> {result.best_objective:.4f} "
          f"(converged={result.converged})")
    for e in result.best_weights.entries:
        print(f"  {e.stratum}.{e.param} = {e.value:.6g}")
    # the inner loop ran in opts.assignment_mode; re-score the calibrated
    # weights under the configured (possibly iterative) assignment
    final = _run_assignment(model, best_strata)
    final_report = evaluate(final.flows, model.counts)
    print(f"J at calibrated weights under {model.assignment.mode} assignment: "
          f"{final_report.objective_j:.4f} "
          f"(share GEH<5: {100 * final_report.share_geh_below_5:.1f}%)")
    print(f"wrote {out / 'history.csv'} and {out / 'calibrated_weights.yaml'}")
    return EXIT_OK


def _parse_fractions(raw: str) -> list[float]:
    """"0.3..0.9" expands in steps of 0.1; otherwise a comma list like "0.3,0.5"."""
    raw = raw.strip()
    if ".." in raw:
        lo_s, hi_s = raw.split("..", 1)
        lo, hi = float(lo_s), float(hi_s)
        if not 0.0 < lo <= hi < 1.0:
            raise ValueError(f"bad fraction range {raw!r}")
        steps = int(round((hi - lo) / 0.1))
        return [round(lo + 0.1 * k, 10) for k in range(steps + 1)]
    return [float(tok) for tok in raw.split(",") if tok.strip()]


def cmd_split_test(args) -> int:
    model = load_model(args.spec)
    opts = model.calibration
    fractions = _parse_fractions(args.fractions)
    seeds = list(range(args.seeds))
    results = split_test(
        model.zones, model.network, model.strata, model.counts,
        fractions=fractions, seeds=seeds,
        method=args.method or opts.method,
        assignment_mode=opts.assignment_mode,
        n_outer=model.assignment.n_outer,
        bounds=opts.bounds or None, bound_overrides=opts.bound_overrides or None,
        xatol=opts.xatol, fatol=opts.fatol, max_evals=opts.max_evals,
    )
    out = _outdir(args)
    write_split_csv(out / "split_test.csv", results)
    print(f"{'fraction':>8} {'mean train':>11} {'mean test':>10} {'sd test':>8}")
    for fraction in fractions:
        cell = [r for r in results if r.split_fraction == fraction]
        train = np.array([r.train_geh for r in cell])
        test = np.array([r.test_geh for r in cell])
        print(f"{fraction:>8.2f} {train.mean():>11.4f} {test.mean():>10.4f} "
              f"{test.std(ddof=0):>8.4f}")
    print(f"wrote {out / 'split_test.csv'} ({len(results)} rows)")
    return EXIT_OK


def cmd_compare(args) -> int:
    model = load_model(args.spec)
    scenario = load_scenario(args.scenario)
    edited = apply_scenario(model.network, scenario)
    base = _run_assignment(model)
    opts = model.assignment
    n_outer = 1 if opts.mode == "oneoff" else opts.n_outer
    changed = assign_iterative(
        edited, model.zones, model.strata, n_outer, gap_tol=opts.gap_tol
    )
    out = _outdir(args)
    write_compare_csv(out / "compare.csv", base.flows, changed.flows)
    deltas = {
        lid: changed.flows.get(lid, 0.0) - base.flows.get(lid, 0.0)
        for lid in set(base.flows) | set(changed.flows)
    }
    top = sorted(deltas.items(), key=lambda kv: (-abs(kv[1]), kv[0]))[:10]
    print(f"scenario {scenario.name!r}: {len(scenario.edits)} edit(s)")
    print(f"{'link':<20} {'delta veh/24h':>14}")
    for lid, delta in top:
        print(f"{lid:<20} {delta:>14.1f}")
    print(f"wrote {out / 'compare.csv'}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowfit",
        description="Macroscopic traffic model: build flows from zonal "
                    "attributes and calibrate stratum weights against counts.",
    )
    parser.add_argument("-v", "--verbose", action="store_true",
                        help="log pipeline warnings and progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model spec and its data files")
    p.add_argument("spec", help="path to model.yaml")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("assign", help="assign flows and write flows.csv")
    p.add_argument("spec")
    p.add_argument("-o", "--out", required=True, help="output directory")
    p.set_defaults(func=cmd_assign)

    p = sub.add_parser("evaluate", help="score assigned flows against counts")
    p.add_argument("spec")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("calibrate", help="learn stratum weights from counts")
    p.add_argument("spec")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--method", choices=["nelder_mead", "simulated_annealing"],
                   help="override the configured optimizer")
    p.add_argument("--seed", type=int, help="override the configured seed")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("split-test",
                       help="train/test robustness grid over count splits")
    p.add_argument("spec")
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--fractions", default="0.3..0.9",
                   help='range "0.3..0.9" (step 0.1) or comma list (default: %(default)s)')
    p.add_argument("--seeds", type=int, default=10,
                   help="number of random seeds 0..N-1 (default: %(default)s)")
    p.add_argument("--method", choices=["nelder_mead", "simulated_annealing"])
    p.set_defaults(func=cmd_split_test)

    p = sub.add_parser("compare",
                       help="flow deltas between the base network and a scenario")
    p.add_argument("spec")
    p.add_argument("scenario", help="path to a scenario YAML")
    p.add_argument("-o", "--out", required=True)
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ModelLoadError as exc:
        print(exc, file=sys.stderr)
        return EXIT_PARSE if exc.stage == "parse" else EXIT_VALIDATION
    except Exception as exc:  # noqa: BLE001 - map to the runtime exit class
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
