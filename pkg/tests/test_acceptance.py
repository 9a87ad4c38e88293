"""Acceptance suite: one test per release criterion, at fixed tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one pass/fail
line per criterion.
"""

import itertools
import time

import numpy as np

from fairselect import df2, metrics, models
from fairselect.datagen import (
    apply_missingness,
    fit_cpt,
    sample_scm,
    true_conditional,
)
from fairselect.graphs import (
    NAIVE_CONSISTENT,
    NAIVE_INCONSISTENT,
    NON_RECOVERABLE,
    classify_query,
    d_separated,
)
from fairselect.scenarios import get_scenario
from fairselect.simplex import Infeasible

from tests.oracles import brute_force_box_lp, enumerate_paths, path_blocked, random_dag


def report(number, description, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    suffix = f" ({detail})" if detail else ""
    print(f"{status} criterion {number}: {description}{suffix}")
    assert ok, f"criterion {number}: {description}{suffix}"


# --------------------------------------------------------------------------
# 1. Verdict table: the catalog's censoring verdicts, zero tolerance
# --------------------------------------------------------------------------

VERDICT_CHECKS = [
    ("fig2", ("P(Yhat|Y,Z)",), NAIVE_INCONSISTENT),
    ("fig2", ("P(Yhat|Z)",), NAIVE_INCONSISTENT),
    ("fig3i", ("P(Y|X)",), NAIVE_CONSISTENT),
    ("fig3i", ("P(Y|X,Z)",), NAIVE_CONSISTENT),
    ("fig3i", ("P(X)", "P(X,Z)"), NON_RECOVERABLE),
    ("fig3ii", ("P(Y|X,Z)",), NAIVE_CONSISTENT),
    ("fig3ii", ("P(Y|X)",), NAIVE_INCONSISTENT),
    ("fig3iii", ("P(Y|X,Z)",), NAIVE_CONSISTENT),
    ("fig3iv", ("P(Y|X,Z)",), NAIVE_INCONSISTENT),
    ("fig3v", ("P(Y|X,Z)",), NAIVE_CONSISTENT),
    ("fig3vi", ("P(Y|X,Z)",), NAIVE_INCONSISTENT),
    ("fig4_stage1", ("P(Y|X1)",), NAIVE_CONSISTENT),
    ("fig4_stage2", ("P(Y|X1,X2)@D2",), NAIVE_CONSISTENT),
    ("fig4_stage2", ("P(X1,X2)@D2",), NON_RECOVERABLE),
]


def test_criterion_1_verdict_table():
    start = time.time()
    assert len(VERDICT_CHECKS) == 14
    failures = []
    for name, queries, expected in VERDICT_CHECKS:
        graph = get_scenario(name).graph
        for query in queries:
            got = classify_query(graph, query).kind
            if got != expected:
                failures.append((name, query, expected, got))
    elapsed = time.time() - start
    report(
        1,
        "14 scenario verdicts reproduced exactly",
        not failures and elapsed < 1.0,
        f"{len(VERDICT_CHECKS)} checks, {elapsed:.2f}s" + (f", failures={failures}" if failures else ""),
    )


# --------------------------------------------------------------------------
# 2. d-separation agrees with brute-force path enumeration everywhere
# --------------------------------------------------------------------------

def test_criterion_2_dseparation_oracle_equivalence():
    start = time.time()
    rng = np.random.default_rng(20240808)
    queries = 0
    disagreements = 0
    for _ in range(500):
        n_nodes = int(rng.integers(3, 8))
        g = random_dag(rng, n_nodes, p_edge=float(rng.uniform(0.2, 0.5)))
        names = list(g.node_names)
        for i, j in itertools.combinations(range(n_nodes), 2):
            s, t = names[i], names[j]
            paths = enumerate_paths(g, s, t)
            others = [x for x in names if x not in (s, t)]
            for r in range(len(others) + 1):
                for given in itertools.combinations(others, r):
                    gset = set(given)
                    brute = all(path_blocked(g, p, gset) for p in paths)
                    fast = d_separated(g, {s}, {t}, gset).separated
                    queries += 1
                    if brute != fast:
                        disagreements += 1
    elapsed = time.time() - start
    report(
        2,
        "traversal matches path enumeration on 500 random DAGs",
        disagreements == 0 and elapsed < 30.0,
        f"{queries} queries, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 3. Consistency and bias at n = 200 000 against the exact oracle
# --------------------------------------------------------------------------

def test_criterion_3_consistency_and_bias_simulation():
    start = time.time()
    n = 200_000

    def worst_cell_gap(scm):
        ds = sample_scm(scm, n, seed=42)
        censored = apply_missingness(ds, "D", [c for c in ("X", "Y", "Z") if c in scm.names])
        cpt = fit_cpt(censored, "Y", ("X", "Z"), smoothing=1.0)
        gaps = []
        for x, z in itertools.product((0, 1), repeat=2):
            naive = cpt.distribution((x, z))
            truth = true_conditional(scm, "Y", {"X": x, "Z": z})
            gaps.append(float(np.abs(naive - truth).max()))
        return gaps

    consistent_gaps = worst_cell_gap(models.shipped_scm("fig3i"))

    scm4 = models.shipped_scm("fig3iv")
    exact_gaps = []
    for x, z in itertools.product((0, 1), repeat=2):
        truth = true_conditional(scm4, "Y", {"X": x, "Z": z})
        censored = true_conditional(scm4, "Y", {"X": x, "Z": z, "D": 1})
        exact_gaps.append(abs(float(truth[1] - censored[1])))
    biased_gaps = worst_cell_gap(scm4)

    elapsed = time.time() - start
    ok = (
        max(consistent_gaps) < 0.02
        and min(exact_gaps) >= 0.05
        and min(biased_gaps) >= 0.03
        and elapsed < 60.0
    )
    report(
        3,
        "naive estimate converges where consistent, stays biased where not",
        ok,
        f"consistent<= {max(consistent_gaps):.4f}, exact>= {min(exact_gaps):.4f}, "
        f"naive-biased>= {min(biased_gaps):.4f}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 4. Censoring amplifies the train/test fairness gap at least threefold
# --------------------------------------------------------------------------

def test_criterion_4_gap_amplification():
    start = time.time()
    scm = models.shipped_scm("gap")

    def run(seed, threshold):
        train = sample_scm(scm, 30_000, seed=seed)
        test = sample_scm(scm, 30_000, seed=seed + 10_000)
        cfg = metrics.GapConfig(
            outcome="Y",
            sensitive="Z",
            risk_features=("X1", "X2"),
            deletion_threshold=threshold,
            budget=0.4,
            fairness=metrics.DEMOGRAPHIC_PARITY,
            seed=seed,
        )
        result = metrics.gap_experiment(train, test, cfg)
        return abs(result.test_report.spd - result.train_report.spd)

    ratios = []
    for seed in range(10):
        censored_gap = run(seed, threshold=0.3)
        clean_gap = run(seed, threshold=0.0)
        ratios.append(censored_gap / max(clean_gap, 1e-12))
    elapsed = time.time() - start
    report(
        4,
        "fairness gap amplified >= 3x by decision-correlated deletion, 10/10 seeds",
        min(ratios) >= 3.0 and elapsed < 60.0,
        f"min ratio {min(ratios):.1f}, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 5. Stage program matches vertex enumeration; no fairness means top-k
# --------------------------------------------------------------------------

def test_criterion_5_lp_correctness():
    start = time.time()
    rng = np.random.default_rng(55)

    compared = 0
    for _ in range(200):
        n = int(rng.integers(3, 9))
        scores = rng.random(n)
        groups = rng.integers(0, 2, n)
        if len(set(groups.tolist())) < 2:
            groups[0] = 1 - groups[0]
        fairness = (df2.NO_FAIRNESS, df2.DEMOGRAPHIC_PARITY, df2.EQUAL_OPPORTUNITY)[
            int(rng.integers(0, 3))
        ]
        plan = df2.StagePlan(float(rng.uniform(0.1, 1.0)), fairness)
        pool = df2.ScoredPool.initial(scores, groups)
        try:
            problem = df2.stage_problem(pool, plan)
            decision = df2.solve_stage(pool, plan)
        except (df2.StageError, Infeasible):
            continue
        oracle = brute_force_box_lp(problem.objective, problem.eq_matrix, problem.eq_rhs)
        assert oracle is not None
        assert abs(decision.objective - oracle) < 1e-9
        assert decision.budget_residual < 1e-9
        assert decision.fairness_residual < 1e-6
        compared += 1
    assert compared >= 150

    for trial in range(1000):
        n = int(rng.integers(3, 50))
        scores = rng.random(n)
        pool = df2.ScoredPool.initial(scores, np.zeros(n, dtype=np.int64))
        alpha = float(rng.uniform(0.05, 1.0))
        decision = df2.solve_stage(pool, df2.StagePlan(alpha))
        expected = df2.top_mass_selection(scores, alpha * n)
        assert np.allclose(decision.values, expected, atol=1e-9), trial

    elapsed = time.time() - start
    report(
        5,
        "stage program matches vertex enumeration and threshold selection",
        elapsed < 30.0,
        f"{compared} enumerated instances, 1000 threshold instances, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 6. Decentralized utility tracks the centralized benchmark over the sweep
# --------------------------------------------------------------------------

def test_criterion_6_df2_matches_oracle_over_sweep():
    start = time.time()
    rng = np.random.default_rng(np.random.SeedSequence(606))
    n = 2000
    dist = df2.ScoreDistribution(kind="jittered", spread=0.04)
    r1, r2, _ = dist.sample(rng, n)
    groups = np.array([0, 1] * (n // 2))

    delta1 = {g: float(np.quantile(r1[groups == g], 1 - 0.6)) for g in (0, 1)}
    assert df2.check_coherence(r1, r2, groups, delta1).ok

    alphas = [round(0.3 + 0.05 * k, 2) for k in range(15)]
    worst = 0.0
    for fairness in (df2.DEMOGRAPHIC_PARITY, df2.EQUAL_OPPORTUNITY):
        for alpha1 in alphas:
            plans = [df2.StagePlan(alpha1, fairness), df2.StagePlan(0.3, fairness)]
            result = df2.run_stages([r1, r2], groups, plans, seed=1)
            oracle = df2.oracle_joint(r1, r2, groups, plans, mode="threshold")
            worst = max(worst, abs(oracle.utility - result.precision))
    elapsed = time.time() - start
    report(
        6,
        "decentralized utility within 0.01 of the oracle at every sweep point",
        worst <= 0.01 and elapsed < 300.0,
        f"worst |difference| {worst:.5f} over {2 * len(alphas)} points, {elapsed:.1f}s",
    )


# --------------------------------------------------------------------------
# 7. Suboptimality bound holds empirically on coherent score distributions
# --------------------------------------------------------------------------

def test_criterion_7_suboptimality_bound():
    start = time.time()
    cases = [
        ("comonotone", df2.ScoreDistribution(kind="comonotone")),
        (
            "gaussian rho=0.8, two groups",
            df2.ScoreDistribution(kind="gaussian-copula", rho=0.8, group_shares=(0.5, 0.5)),
        ),
        ("independent", df2.ScoreDistribution(kind="independent")),
    ]
    details = []
    ok = True
    for name, dist in cases:
        result = df2.suboptimality_bound_check(
            dist, alpha1=0.6, alpha2=0.3, replicates=2000, seed=99, pool_size=200
        )
        holds = result.disagreement_rate <= result.bound + result.ci_half_width
        if name == "comonotone":
            holds = holds and result.disagreements == 0
        ok = ok and holds
        details.append(f"{name}: {result.disagreement_rate:.4f}<={result.bound:.4f}")
    elapsed = time.time() - start
    report(
        7,
        "disagreement rate within the bound on 3 coherent distributions",
        ok and elapsed < 300.0,
        "; ".join(details) + f", {elapsed:.0f}s",
    )


# --------------------------------------------------------------------------
# 8. Per-stage parity gives global parity; the converse fails
# --------------------------------------------------------------------------

def test_criterion_8_local_implies_global():
    start = time.time()
    rng = np.random.default_rng(88)
    worst_residual = 0.0
    for seed in range(10):
        n = 300
        r1 = rng.random(n)
        r2 = np.clip(r1 + 0.2 * (rng.random(n) - 0.5), 0, 1)
        groups = np.array([0] * 150 + [1] * 150)
        plans = [
            df2.StagePlan(0.6, df2.DEMOGRAPHIC_PARITY),
            df2.StagePlan(0.3, df2.DEMOGRAPHIC_PARITY),
        ]
        result = df2.run_stages([r1, r2], groups, plans, seed=seed)
        worst_residual = max(
            worst_residual, df2.parity_residual(result.final_fractional, groups)
        )

    counter = df2.global_only_counterexample()
    elapsed = time.time() - start
    ok = (
        worst_residual <= 1e-6
        and counter.final_parity_residual <= 1e-6
        and counter.stage1_parity_residual >= 0.05
        and elapsed < 10.0
    )
    report(
        8,
        "local parity implies global parity; global-only oracle breaks stage-1 parity",
        ok,
        f"pipeline residual {worst_residual:.2e}, counterexample stage-1 "
        f"residual {counter.stage1_parity_residual:.2f}, {elapsed:.1f}s",
    )
