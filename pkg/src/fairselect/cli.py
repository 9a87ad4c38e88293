"""Command-line entry point.

Subcommands: ``analyze`` (graph verdicts), ``simulate`` (naive-vs-exact
estimation tables), ``pipeline`` (multi-stage selection with an oracle
comparison), ``bound-check`` (suboptimality bound harness) and
``list-scenarios``.  Reports go to stdout (or ``--out``), diagnostics to
stderr.  Exit codes: 0 ok, 2 parse failure, 3 validation failure,
4 infeasible or undefined quantity.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

import numpy as np

from . import df2, graphs, metrics, models, scenarios
from .datagen import (
    CsvSchema,
    DataError,
    DiscreteScm,
    ScmError,
    ZeroProbabilityError,
    apply_missingness,
    fit_cpt,
    load_csv,
    naive_joint,
    sample_scm,
    true_conditional,
    true_joint,
)
from .reports import Report
from .simplex import Infeasible

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_INFEASIBLE = 4

_PARSE_ERRORS = (graphs.GraphSyntaxError, json.JSONDecodeError)
_INFEASIBLE_ERRORS = (
    Infeasible,
    df2.AssumptionViolatedError,
    df2.BudgetInfeasibleError,
    df2.GroupAbsentError,
    df2.DegenerateFairnessError,
    ZeroProbabilityError,
)
_VALIDATION_ERRORS = (
    graphs.GraphError,
    ScmError,
    DataError,
    df2.StageError,
    metrics.MetricError,
    KeyError,
    ValueError,
)


class CliError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


def _emit(report: Report, args) -> None:
    rendered = report.render(args.format)
    if args.out:
        Path(args.out).write_text(rendered)
        print(f"report written to {args.out}", file=sys.stderr)
    else:
        sys.stdout.write(rendered)


def _load_graph(args) -> tuple[graphs.CausalGraph, scenarios.Scenario | None]:
    if args.scenario:
        sc = scenarios.get_scenario(args.scenario)
        return sc.graph, sc
    text = Path(args.graph).read_text()
    return graphs.parse_graph(text), None


def cmd_list_scenarios(args) -> int:
    report = Report(
        command="list-scenarios",
        config={},
        records=[{"name": n, "description": d} for n, d in scenarios.list_scenarios()],
    )
    _emit(report, args)
    return EXIT_OK


def cmd_analyze(args) -> int:
    graph, scenario = _load_graph(args)
    queries = list(args.query or [])
    records: list[dict] = []
    if not queries and scenario is not None:
        for exp in scenario.expected:
            verdict = graphs.classify_query(graph, exp.query)
            records.append(
                {
                    "query": exp.query,
                    "verdict": verdict.kind,
                    "witness": verdict.witness or "",
                    "expected": exp.verdict,
                    "agrees": verdict.kind == exp.verdict,
                }
            )
    else:
        for rec in graphs.audit_report(graph, queries):
            records.append(rec.as_dict())
    report = Report(
        command="analyze",
        config={
            "source": args.scenario or args.graph,
            "queries": ",".join(queries) if queries else "(catalog)",
        },
        records=records,
    )
    _emit(report, args)
    errors = [r for r in records if r.get("error")]
    if errors:
        for r in errors:
            print(f"query {r['query']!r}: {r['error']}", file=sys.stderr)
        return EXIT_VALIDATION
    return EXIT_OK


def _doubling_schedule(n: int) -> list[int]:
    sizes = [n]
    while sizes[-1] > max(n // 16, 1000) and sizes[-1] % 2 == 0:
        sizes.append(sizes[-1] // 2)
    return sorted(set(sizes))


def _conditional_gap(scm, ds, query, smoothing):
    target = query.targets[0]
    cpt = fit_cpt(ds, target, query.given, smoothing)
    worst = None
    for combo in itertools.product(*(range(c) for c in cpt.given_cards)):
        if cpt.undefined[cpt.combo_index(combo)]:
            continue
        naive = cpt.distribution(combo)
        try:
            truth = true_conditional(scm, target, dict(zip(query.given, combo)))
        except ZeroProbabilityError:
            continue
        gaps = np.abs(naive - truth)
        v = int(np.argmax(gaps))
        cell = ",".join(f"{c}={x}" for c, x in zip(query.given, combo)) + f",{target}={v}"
        if worst is None or gaps[v] > worst[0]:
            worst = (float(gaps[v]), cell, float(naive[v]), float(truth[v]))
    if worst is None:
        raise ZeroProbabilityError(f"no estimable cell for {query.raw}")
    return worst


def _joint_gap(scm, ds, query, smoothing):
    naive = naive_joint(ds, query.targets, smoothing)
    truth = true_joint(scm, query.targets)
    gaps = np.abs(naive - truth)
    flat = int(np.argmax(gaps))
    combo = np.unravel_index(flat, gaps.shape)
    cell = ",".join(f"{c}={x}" for c, x in zip(query.targets, combo))
    return (float(gaps[combo]), cell, float(naive[combo]), float(truth[combo]))


def cmd_simulate(args) -> int:
    if args.n <= 0:
        raise CliError("sample size must be positive", EXIT_VALIDATION)
    graph, scenario = _load_graph(args)
    if args.scm:
        scm = DiscreteScm.from_json(args.scm)
    elif args.scenario:
        scm = models.shipped_scm(args.scenario)
    else:
        raise CliError("simulate needs --scm when --graph is used", EXIT_VALIDATION)
    unknown = [v for v in scm.names if v not in graph.kind_of]
    if unknown:
        raise CliError(
            f"SCM variables not in the graph: {', '.join(unknown)}", EXIT_VALIDATION
        )

    queries = [graphs.parse_query(q) for q in (args.query or [])]
    if not queries and scenario is not None:
        queries = [graphs.parse_query(exp.query) for exp in scenario.expected]
    if not queries:
        raise CliError("no queries given", EXIT_VALIDATION)

    if len(graph.indicators) != 1:
        raise CliError("simulate needs a graph with exactly one indicator", EXIT_VALIDATION)
    indicator = graph.indicators[0]
    bound = sorted(v for v, d in graph.bindings if d == indicator and v in scm.names)

    sizes = _doubling_schedule(args.n)
    seeds = np.random.SeedSequence(args.seed).spawn(len(sizes))
    records = []
    for size, seed in zip(sizes, seeds):
        full = sample_scm(scm, size, seed=int(seed.generate_state(1)[0]))
        censored = apply_missingness(full, indicator, bound)
        for query in queries:
            verdict = graphs.classify_query(graph, query)
            try:
                if query.is_conditional:
                    gap, cell, naive, truth = _conditional_gap(
                        scm, censored, query, args.smoothing
                    )
                else:
                    gap, cell, naive, truth = _joint_gap(scm, censored, query, args.smoothing)
                records.append(
                    {
                        "n": size,
                        "query": query.raw,
                        "cell": cell,
                        "naive": round(naive, 6),
                        "true": round(truth, 6),
                        "gap": round(gap, 6),
                        "verdict": verdict.kind,
                    }
                )
            except (ZeroProbabilityError, DataError) as exc:
                records.append(
                    {
                        "n": size,
                        "query": query.raw,
                        "cell": "undefined",
                        "naive": None,
                        "true": None,
                        "gap": None,
                        "verdict": f"{verdict.kind} ({exc})",
                    }
                )
    report = Report(
        command="simulate",
        config={
            "source": args.scenario or args.graph,
            "scm": args.scm or f"shipped:{args.scenario}",
            "n": args.n,
            "smoothing": args.smoothing,
        },
        records=records,
        seed=args.seed,
    )
    _emit(report, args)
    return EXIT_OK


def _parse_sweep(text: str) -> list[float]:
    try:
        start, stop, step = (float(t) for t in text.split(":"))
    except ValueError:
        raise CliError(f"bad sweep spec {text!r}, expected start:stop:step", EXIT_VALIDATION)
    if step <= 0 or stop < start:
        raise CliError("sweep needs step > 0 and stop >= start", EXIT_VALIDATION)
    values = []
    k = 0
    while True:
        v = start + k * step
        if v > stop + 1e-9:
            break
        values.append(round(v, 10))
        k += 1
    return values


def _pipeline_setup(args):
    schema = CsvSchema.from_json(args.schema)
    data = load_csv(args.data, schema)
    with open(args.config) as fh:
        cfg = json.load(fh)
    smoothing = float(cfg.get("smoothing", 1.0))
    plans = []
    for i, raw in enumerate(cfg["stages"]):
        features = tuple(raw.get("features") or schema.stages[i])
        plans.append(
            df2.StagePlan(
                budget=float(raw["budget"]),
                fairness=str(raw.get("fairness", df2.NO_FAIRNESS)),
                features=features,
            )
        )
    df2.validate_stage_plans(plans)
    risk = [fit_cpt(data, schema.outcome, plan.features, smoothing) for plan in plans]
    return schema, data, plans, risk, smoothing


def cmd_pipeline(args) -> int:
    schema, data, plans, risk, smoothing = _pipeline_setup(args)
    groups = data.values[schema.sensitive]
    stage_scores = [cpt.score_rows(data) for cpt in risk]

    def oracle_for(current_plans):
        if args.oracle == "none" or len(current_plans) != 2:
            return None
        return df2.oracle_joint(
            stage_scores[0], stage_scores[-1], groups, current_plans, mode=args.oracle
        )

    records = []
    if args.sweep_alpha1:
        alphas = _parse_sweep(args.sweep_alpha1)
        for alpha1 in alphas:
            current = [
                df2.StagePlan(alpha1, plans[0].fairness, plans[0].features),
                *plans[1:],
            ]
            df2.validate_stage_plans(current)
            result = df2.run_stages(stage_scores, groups, current, args.seed)
            oracle = oracle_for(current)
            rec = {
                "alpha1": alpha1,
                "df2_utility": round(result.precision, 6),
                "max_fairness_residual": result.max_fairness_residual,
            }
            if oracle is not None:
                rec["oracle_utility"] = round(oracle.utility, 6)
                rec["difference"] = round(oracle.utility - result.precision, 6)
            records.append(rec)
    else:
        result = df2.run_stages(stage_scores, groups, plans, args.seed)
        for i, st in enumerate(result.stages, start=1):
            records.append(
                {
                    "stage": i,
                    "budget": st.plan.budget,
                    "fairness": st.plan.fairness,
                    "pool": len(st.pool_indices),
                    "selected_mass": round(st.decision.selected_mass, 6),
                    "precision": round(st.decision.precision, 6),
                    "budget_residual": st.decision.budget_residual,
                    "fairness_residual": st.decision.fairness_residual,
                }
            )
        oracle = oracle_for(plans)
        summary = {
            "stage": "final",
            "budget": plans[-1].budget,
            "fairness": plans[-1].fairness,
            "pool": data.n_rows,
            "selected_mass": round(float(result.final_fractional.sum()), 6),
            "precision": round(result.precision, 6),
            "budget_residual": result.stages[-1].decision.budget_residual,
            "fairness_residual": df2.parity_residual(result.final_fractional, groups),
        }
        records.append(summary)
        if oracle is not None:
            records.append(
                {
                    "stage": f"oracle ({oracle.method})",
                    "budget": plans[-1].budget,
                    "fairness": plans[-1].fairness,
                    "pool": data.n_rows,
                    "selected_mass": round(float(oracle.decision.sum()), 6),
                    "precision": round(oracle.utility, 6),
                    "budget_residual": None,
                    "fairness_residual": None,
                }
            )
    report = Report(
        command="pipeline",
        config={
            "data": args.data,
            "schema": args.schema,
            "config": args.config,
            "smoothing": smoothing,
            "oracle": args.oracle,
            "sweep_alpha1": args.sweep_alpha1 or "",
        },
        records=records,
        seed=args.seed,
    )
    _emit(report, args)
    return EXIT_OK


def _parse_dist(args) -> df2.ScoreDistribution:
    if args.dist_file:
        with open(args.dist_file) as fh:
            return df2.ScoreDistribution.from_dict(json.load(fh))
    spec = args.dist
    kind, _, param = spec.partition(":")
    kwargs = {}
    if kind == "gaussian":
        kind = "gaussian-copula"
        kwargs["rho"] = float(param) if param else 0.8
    elif kind == "jittered" and param:
        kwargs["spread"] = float(param)
    if args.group_shares:
        kwargs["group_shares"] = tuple(float(s) for s in args.group_shares.split(","))
    return df2.ScoreDistribution(kind=kind, **kwargs)


def cmd_bound_check(args) -> int:
    dist = _parse_dist(args)
    result = df2.suboptimality_bound_check(
        dist,
        alpha1=args.alpha1,
        alpha2=args.alpha2,
        replicates=args.replicates,
        seed=args.seed,
        pool_size=args.pool_size,
    )
    records = [
        {
            "quantity": "disagreement_rate",
            "value": round(result.disagreement_rate, 6),
            "detail": f"{result.disagreements}/{result.comparisons}",
        },
        {
            "quantity": "bound",
            "value": round(result.bound, 6),
            "detail": "max over groups",
        },
        {
            "quantity": "ci95",
            "value": round(result.ci_half_width, 6),
            "detail": f"[{result.ci_low:.6f}, {result.ci_high:.6f}]",
        },
    ]
    for g in sorted(result.per_group_bounds):
        records.append(
            {
                "quantity": f"bound[group={g}]",
                "value": round(result.per_group_bounds[g], 6),
                "detail": (
                    f"band half-width {result.bands[g]:.4f} around "
                    f"{result.thresholds_stage2[g]:.4f}"
                ),
            }
        )
    report = Report(
        command="bound-check",
        config={
            "dist": args.dist_file or args.dist,
            "alpha1": args.alpha1,
            "alpha2": args.alpha2,
            "replicates": args.replicates,
            "pool_size": args.pool_size,
            "fairness": result.fairness,
        },
        records=records,
        seed=args.seed,
    )
    _emit(report, args)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fairselect",
        description=(
            "Recoverability verdicts for selectively missing data and "
            "detail-free fair multi-stage selection"
        ),
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p):
        p.add_argument("--format", choices=("text", "json", "csv"), default="text")
        p.add_argument("--out", help="write the report to a file instead of stdout")
        p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("list-scenarios", help="list built-in scenario fixtures")
    common(p)
    p.set_defaults(func=cmd_list_scenarios)

    p = sub.add_parser("analyze", help="classify distribution queries on a graph")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="built-in scenario name")
    src.add_argument("--graph", help="graph file path")
    p.add_argument("--query", action="append", help="e.g. 'P(Y|X,Z)' or 'errorrate'")
    common(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="naive vs exact estimates under censoring")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scenario", help="built-in scenario with a shipped model")
    src.add_argument("--graph", help="graph file path (requires --scm)")
    p.add_argument("--scm", help="SCM definition file (JSON)")
    p.add_argument("--n", type=int, default=200_000, help="largest sample size")
    p.add_argument("--query", action="append")
    p.add_argument("--smoothing", type=float, default=1.0)
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("pipeline", help="run multi-stage selection on a CSV pool")
    p.add_argument("--data", required=True, help="CSV file")
    p.add_argument("--schema", required=True, help="schema config (JSON)")
    p.add_argument("--config", required=True, help="pipeline config (JSON)")
    p.add_argument(
        "--sweep-alpha1",
        help="sweep the stage-1 budget, e.g. 0.3:1.0:0.05, and emit the utility curve",
    )
    p.add_argument(
        "--oracle",
        choices=("auto", "brute-force", "threshold", "none"),
        default="auto",
    )
    common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("bound-check", help="suboptimality bound harness")
    p.add_argument(
        "--dist",
        default="gaussian:0.8",
        help="comonotone | independent | gaussian:RHO | jittered:SPREAD",
    )
    p.add_argument("--dist-file", help="score distribution spec (JSON)")
    p.add_argument("--group-shares", help="comma separated, e.g. 0.5,0.5")
    p.add_argument("--alpha1", type=float, required=True)
    p.add_argument("--alpha2", type=float, required=True)
    p.add_argument("--replicates", type=int, default=2000)
    p.add_argument("--pool-size", type=int, default=200)
    common(p)
    p.set_defaults(func=cmd_bound_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except _PARSE_ERRORS as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except _INFEASIBLE_ERRORS as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except _VALIDATION_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
