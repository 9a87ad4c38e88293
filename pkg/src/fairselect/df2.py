"""Detail-free, decentralized, fair multi-stage selection.

Each stage solves a small linear program over per-individual selection
probabilities: maximize expected precision subject to an equality budget
(a fraction of the *stage-1* population) and an optional group fairness
equality.  Stages only ever use the risk scores estimable from their own
censored history, which is what makes the procedure detail-free; the
centralized oracle it is compared against selects with full knowledge of
the final-stage scores for everyone.

Budgets and demographic-parity rates are normalised by stage-1 counts
throughout, so a parity-constrained final stage is fair with respect to
the original population by construction (local fairness gives global
fairness exactly, not just in expectation).
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .simplex import Infeasible, LpProblem, solve_lp

NO_FAIRNESS = "none"
DEMOGRAPHIC_PARITY = "demographic-parity"
EQUAL_OPPORTUNITY = "equal-opportunity"
FAIRNESS_KINDS = (NO_FAIRNESS, DEMOGRAPHIC_PARITY, EQUAL_OPPORTUNITY)

BUDGET_TOL = 1e-9
FAIRNESS_TOL = 1e-6
_FRAC_EPS = 1e-9


class StageError(ValueError):
    """Invalid plan or pool for a selection stage."""


class BudgetInfeasibleError(StageError):
    """Stage budget exceeds the candidates remaining."""


class GroupAbsentError(StageError):
    """A group named by the fairness constraint has no pool members."""


class DegenerateFairnessError(StageError):
    """Equal-opportunity constraint with an all-zero score group."""


class AssumptionViolatedError(ValueError):
    """Sampled scores fail the coherent-features check; carries diagnostics."""

    def __init__(self, message: str, diagnostics: list[dict]):
        super().__init__(message)
        self.diagnostics = diagnostics


@dataclass(frozen=True)
class StagePlan:
    """Budget (fraction of the stage-1 population), fairness kind, features."""

    budget: float
    fairness: str = NO_FAIRNESS
    features: tuple[str, ...] = ()

    def __post_init__(self):
        if not 0.0 < self.budget <= 1.0:
            raise StageError(f"budget must be in (0, 1], got {self.budget}")
        if self.fairness not in FAIRNESS_KINDS:
            raise StageError(f"unknown fairness kind {self.fairness!r}")


def validate_stage_plans(plans: Sequence[StagePlan]) -> None:
    """Budgets must not increase and feature sets must be nested."""
    if not plans:
        raise StageError("need at least one stage")
    for earlier, later in zip(plans, plans[1:]):
        if later.budget > earlier.budget + BUDGET_TOL:
            raise StageError(
                f"stage budgets must be non-increasing ({earlier.budget} -> {later.budget})"
            )
        if not set(earlier.features) <= set(later.features):
            raise StageError("stage feature sets must be nested")


@dataclass(frozen=True)
class ScoredPool:
    """Scored candidates at one stage, carrying stage-1 bookkeeping.

    ``indices`` maps pool positions back to the stage-1 population;
    ``stage1_group_sizes`` normalise budgets and parity rates.
    """

    scores: np.ndarray
    groups: np.ndarray
    indices: np.ndarray
    n1: int
    stage1_group_sizes: dict

    @classmethod
    def initial(cls, scores, groups) -> "ScoredPool":
        scores = np.asarray(scores, dtype=float)
        groups = np.asarray(groups)
        if len(scores) != len(groups):
            raise StageError("scores and groups must have equal length")
        if len(scores) == 0:
            raise StageError("empty pool")
        if (scores < -1e-12).any() or (scores > 1 + 1e-12).any():
            raise StageError("scores must lie in [0, 1]")
        sizes = {g: int((groups == g).sum()) for g in sorted(set(groups.tolist()))}
        return cls(
            scores=np.clip(scores, 0.0, 1.0),
            groups=groups,
            indices=np.arange(len(scores)),
            n1=len(scores),
            stage1_group_sizes=sizes,
        )

    @property
    def size(self) -> int:
        return len(self.scores)

    def restrict(self, positions: np.ndarray, scores: np.ndarray | None = None) -> "ScoredPool":
        return ScoredPool(
            scores=self.scores[positions] if scores is None else np.asarray(scores, float),
            groups=self.groups[positions],
            indices=self.indices[positions],
            n1=self.n1,
            stage1_group_sizes=self.stage1_group_sizes,
        )


@dataclass(frozen=True)
class DecisionVector:
    """Fractional selection probabilities for one stage's pool."""

    values: np.ndarray
    objective: float          # sum of d_j * p_j
    precision: float          # objective / selected mass
    budget_residual: float
    fairness_residual: float
    duals: np.ndarray

    @property
    def selected_mass(self) -> float:
        return float(self.values.sum())


def _fairness_rows(pool: ScoredPool, plan: StagePlan) -> tuple[np.ndarray, np.ndarray]:
    group_ids = sorted(pool.stage1_group_sizes)
    if plan.fairness == NO_FAIRNESS or len(group_ids) < 2:
        return np.zeros((0, pool.size)), np.zeros(0)
    masks = {}
    for g in group_ids:
        mask = pool.groups == g
        if not mask.any():
            raise GroupAbsentError(f"group {g!r} has no candidates at this stage")
        masks[g] = mask
    rows = []
    ref = group_ids[0]
    if plan.fairness == DEMOGRAPHIC_PARITY:
        for g in group_ids[1:]:
            row = np.zeros(pool.size)
            row[masks[ref]] = 1.0 / pool.stage1_group_sizes[ref]
            row[masks[g]] = -1.0 / pool.stage1_group_sizes[g]
            rows.append(row)
    else:  # equal opportunity, outcome probabilities estimated by the scores
        sums = {g: float(pool.scores[masks[g]].sum()) for g in group_ids}
        for g, s in sums.items():
            if s <= 0.0:
                raise DegenerateFairnessError(
                    f"group {g!r} has zero total score; equal-opportunity "
                    f"constraint is degenerate"
                )
        for g in group_ids[1:]:
            row = np.zeros(pool.size)
            row[masks[ref]] = pool.scores[masks[ref]] / sums[ref]
            row[masks[g]] = -pool.scores[masks[g]] / sums[g]
            rows.append(row)
    return np.array(rows), np.zeros(len(rows))


def stage_problem(pool: ScoredPool, plan: StagePlan) -> LpProblem:
    """Assemble the stage LP: budget equality plus fairness equalities."""
    target_mass = plan.budget * pool.n1
    if target_mass > pool.size + BUDGET_TOL:
        raise BudgetInfeasibleError(
            f"budget needs mass {target_mass:.6g} but only {pool.size} candidates remain"
        )
    fair_rows, fair_rhs = _fairness_rows(pool, plan)
    matrix = np.vstack([np.ones((1, pool.size)), fair_rows])
    rhs = np.concatenate([[target_mass], fair_rhs])
    return LpProblem.build(pool.scores, matrix, rhs)


def solve_stage(pool: ScoredPool, plan: StagePlan) -> DecisionVector:
    """Optimal fractional selection for one stage.

    Maximizes the score mass of the selected fraction; at an optimal basic
    solution at most one entry per equality row is strictly fractional.
    """
    problem = stage_problem(pool, plan)
    # warm start: the whole part of the top-score selection
    mass = plan.budget * pool.n1
    order = np.lexsort((np.arange(pool.size), -pool.scores))
    warm = order[: int(math.floor(mass + BUDGET_TOL))]
    solution = solve_lp(problem, start_at_upper=np.sort(warm))
    d = solution.x
    budget_residual = float(abs(d.sum() - plan.budget * pool.n1))
    fairness_residual = 0.0
    if problem.eq_matrix.shape[0] > 1:
        fairness_residual = float(
            np.abs(problem.eq_matrix[1:] @ d - problem.eq_rhs[1:]).max()
        )
    mass = float(d.sum())
    objective = float(pool.scores @ d)
    return DecisionVector(
        values=d,
        objective=objective,
        precision=objective / mass if mass > 0 else float("nan"),
        budget_residual=budget_residual,
        fairness_residual=fairness_residual,
        duals=solution.duals,
    )


def top_mass_selection(scores: np.ndarray, mass: float) -> np.ndarray:
    """Threshold rule: fill ``mass`` by descending score, stable in index."""
    n = len(scores)
    if mass > n + BUDGET_TOL:
        raise BudgetInfeasibleError(f"mass {mass} exceeds {n} candidates")
    order = np.lexsort((np.arange(n), -np.asarray(scores, float)))
    d = np.zeros(n)
    remaining = mass
    for j in order:
        if remaining <= 0:
            break
        d[j] = min(1.0, remaining)
        remaining -= d[j]
    return d


def realize_decisions(values: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Round fractional selections to 0/1 without biasing anyone's chance.

    Strictly fractional entries are coupled pairwise (pivotal sampling):
    each individual is still selected with exactly probability ``d_j``,
    while the realized total stays within one unit of the fractional mass,
    and equals it exactly when that mass is integral.  Entries already at
    a bound are kept as they are.
    """
    values = np.asarray(values, dtype=float)
    out = (values >= 1.0 - _FRAC_EPS).astype(np.int64)
    pending = [
        (int(j), float(values[j]))
        for j in np.flatnonzero((values > _FRAC_EPS) & (values < 1.0 - _FRAC_EPS))
    ]
    while len(pending) >= 2:
        (i, a), (j, b) = pending[0], pending[1]
        rest = pending[2:]
        if a + b <= 1.0:
            keep, merged = (i, a + b) if rng.random() < a / (a + b) else (j, a + b)
            if merged >= 1.0 - _FRAC_EPS:
                out[keep] = 1
                pending = rest
            else:
                pending = [(keep, merged)] + rest
        else:
            if rng.random() < (1.0 - b) / (2.0 - a - b):
                out[i] = 1
                carry = (j, a + b - 1.0)
            else:
                out[j] = 1
                carry = (i, a + b - 1.0)
            if carry[1] <= _FRAC_EPS:
                pending = rest
            else:
                pending = [carry] + rest
    if pending:
        j, mass = pending[0]
        out[j] = int(rng.random() < mass)
    return out


@dataclass(frozen=True)
class ThresholdRule:
    """Per-group score thresholds frozen from a solved stage.

    Scores strictly above the group threshold are accepted; scores at the
    threshold are accepted with the same fraction the stage used, which
    keeps the rule faithful when scores are discrete and heavily tied.
    """

    thresholds: dict
    tie_accept: dict

    def predict(self, scores, groups, rng: np.random.Generator) -> np.ndarray:
        scores = np.asarray(scores, dtype=float)
        groups = np.asarray(groups)
        out = np.zeros(len(scores), dtype=np.int64)
        for g, delta in self.thresholds.items():
            mask = groups == g
            if delta == np.inf:
                continue
            above = mask & (scores > delta + _FRAC_EPS)
            out[above] = 1
            at = mask & (np.abs(scores - delta) <= _FRAC_EPS)
            if at.any():
                accept = self.tie_accept.get(g, 0.0)
                out[at] = rng.random(int(at.sum())) < accept
        return out

    def as_dict(self) -> dict:
        return {
            "thresholds": {str(g): float(v) for g, v in self.thresholds.items()},
            "tie_accept": {str(g): float(v) for g, v in self.tie_accept.items()},
        }


def threshold_rule(pool: ScoredPool, decision: DecisionVector) -> ThresholdRule:
    """Recover the per-group threshold form of an optimal stage decision."""
    thresholds: dict = {}
    tie_accept: dict = {}
    for g in sorted(pool.stage1_group_sizes):
        mask = pool.groups == g
        d = decision.values[mask]
        s = pool.scores[mask]
        picked = d > _FRAC_EPS
        if not picked.any():
            thresholds[g] = np.inf
            tie_accept[g] = 0.0
            continue
        delta = float(s[picked].min())
        thresholds[g] = delta
        at = np.abs(s - delta) <= _FRAC_EPS
        tie_accept[g] = float(d[at].sum() / at.sum())
    return ThresholdRule(thresholds, tie_accept)


@dataclass(frozen=True)
class StageOutcome:
    plan: StagePlan
    pool_indices: np.ndarray
    decision: DecisionVector
    passed: np.ndarray  # original indices realized into the next stage


@dataclass(frozen=True)
class PipelineResult:
    stages: tuple[StageOutcome, ...]
    final_fractional: np.ndarray   # over the stage-1 population
    final_selected: np.ndarray     # realized original indices
    precision: float               # wrt the final stage's scores
    seed: int

    @property
    def max_fairness_residual(self) -> float:
        return max(s.decision.fairness_residual for s in self.stages)


def parity_residual(decision_over_n1: np.ndarray, groups: np.ndarray) -> float:
    """Max pairwise gap in selection rate per stage-1 group."""
    groups = np.asarray(groups)
    rates = [
        decision_over_n1[groups == g].sum() / (groups == g).sum()
        for g in sorted(set(groups.tolist()))
    ]
    return float(max(rates) - min(rates)) if len(rates) > 1 else 0.0


def run_stages(
    stage_scores: Sequence[np.ndarray],
    groups,
    plans: Sequence[StagePlan],
    seed: int,
) -> PipelineResult:
    """Run the per-stage programs, realizing each stage before the next.

    ``stage_scores[i]`` holds stage-``i`` risk scores indexed by the
    stage-1 population; only the entries of individuals still in the pool
    are ever read, so providing full vectors does not leak information
    across stages.
    """
    plans = list(plans)
    validate_stage_plans(plans)
    if len(stage_scores) != len(plans):
        raise StageError("need one score vector per stage")
    groups = np.asarray(groups)
    pool = ScoredPool.initial(np.asarray(stage_scores[0], dtype=float), groups)
    rngs = [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(len(plans))]

    outcomes: list[StageOutcome] = []
    current = pool
    for i, plan in enumerate(plans):
        if current.size == 0:
            raise StageError(f"no candidates entering stage {i + 1}")
        scores_i = np.asarray(stage_scores[i], dtype=float)[current.indices]
        current = current.restrict(np.arange(current.size), scores=scores_i)
        decision = solve_stage(current, plan)
        realized = realize_decisions(decision.values, rngs[i])
        passed = current.indices[realized == 1]
        outcomes.append(
            StageOutcome(
                plan=plan,
                pool_indices=current.indices.copy(),
                decision=decision,
                passed=passed,
            )
        )
        if i + 1 < len(plans):
            keep = np.flatnonzero(realized == 1)
            current = current.restrict(keep)

    last = outcomes[-1]
    final_fractional = np.zeros(pool.n1)
    final_fractional[last.pool_indices] = last.decision.values
    return PipelineResult(
        stages=tuple(outcomes),
        final_fractional=final_fractional,
        final_selected=last.passed,
        precision=last.decision.precision,
        seed=seed,
    )


def run_pipeline(data, plans: Sequence[StagePlan], risk: Sequence, sensitive: str, seed: int) -> PipelineResult:
    """Score a dataset with per-stage fitted CPTs and run the pipeline."""
    plans = list(plans)
    if len(risk) != len(plans):
        raise StageError("need one fitted risk table per stage")
    stage_scores = [cpt.score_rows(data) for cpt in risk]
    return run_stages(stage_scores, data.values[sensitive], plans, seed)


@dataclass(frozen=True)
class OracleResult:
    """Centralized benchmark decision with full final-score knowledge."""

    decision: np.ndarray       # fractional, over the stage-1 population
    utility: float             # precision wrt the final-stage scores
    method: str                # "brute-force" or "threshold"
    stage1_violations: dict    # group -> mass exceeding a feasible stage-1 cut


def _brute_force_oracle(r1, r2, groups, plans) -> OracleResult:
    n = len(r1)
    plan1, plan2 = plans
    k1 = plan1.budget * n
    if abs(k1 - round(k1)) > 1e-9:
        raise StageError("exhaustive oracle needs an integral stage-1 quota")
    k1 = int(round(k1))
    pool = ScoredPool.initial(r2, groups)
    group_ids = sorted(pool.stage1_group_sizes)

    if plan1.fairness == EQUAL_OPPORTUNITY:
        raise StageError("exhaustive oracle does not support stage-1 equal opportunity")
    if plan1.fairness == DEMOGRAPHIC_PARITY and len(group_ids) > 1:
        quotas = {}
        for g in group_ids:
            q = plan1.budget * pool.stage1_group_sizes[g]
            if abs(q - round(q)) > 1e-9:
                raise StageError("exhaustive oracle needs integral per-group quotas")
            quotas[g] = int(round(q))
        per_group_sets = [
            itertools.combinations(np.flatnonzero(groups == g), quotas[g])
            for g in group_ids
        ]
        candidates = (
            tuple(itertools.chain.from_iterable(parts))
            for parts in itertools.product(*per_group_sets)
        )
    else:
        candidates = itertools.combinations(range(n), k1)

    best: tuple[float, np.ndarray] | None = None
    for subset in candidates:
        positions = np.array(subset, dtype=np.int64)
        sub = pool.restrict(positions)
        try:
            decision = solve_stage(sub, plan2)
        except (StageError, Infeasible):
            continue
        if best is None or decision.objective > best[0] + 1e-12:
            d_full = np.zeros(n)
            d_full[positions] = decision.values
            best = (decision.objective, d_full)
    if best is None:
        raise StageError("no feasible stage-1 subset for the exhaustive oracle")
    objective, d_full = best
    mass = d_full.sum()
    return OracleResult(
        decision=d_full,
        utility=float(objective / mass) if mass > 0 else float("nan"),
        method="brute-force",
        stage1_violations={},
    )


def _threshold_oracle(r1, r2, groups, plans) -> OracleResult:
    n = len(r1)
    plan1, plan2 = plans
    pool = ScoredPool.initial(r2, groups)
    decision = solve_stage(pool, plan2)

    # does the final selection fit through some feasible stage-1 cut?
    violations: dict = {}
    if plan1.fairness == DEMOGRAPHIC_PARITY and len(pool.stage1_group_sizes) > 1:
        for g, size in sorted(pool.stage1_group_sizes.items()):
            mass = float(decision.values[groups == g].sum())
            allowed = plan1.budget * size
            if mass > allowed + BUDGET_TOL:
                violations[g] = mass - allowed
    else:
        total = float(decision.values.sum())
        allowed = plan1.budget * n
        if total > allowed + BUDGET_TOL:
            violations["total"] = total - allowed
    return OracleResult(
        decision=decision.values,
        utility=decision.precision,
        method="threshold",
        stage1_violations=violations,
    )


def oracle_joint(
    r1,
    r2,
    groups,
    plans: Sequence[StagePlan],
    mode: str = "auto",
    brute_limit: int = 12,
) -> OracleResult:
    """Centralized two-stage benchmark.

    Small instances are solved exactly by enumerating stage-1 pass sets
    and composing each with the optimal final program.  Larger instances
    use the threshold form: solve the final program over the whole
    population and check that the winners fit through a feasible stage-1
    cut, reporting any group whose winners exceed its stage-1 quota.

    The threshold benchmark dominates any decentralized run exactly under
    budget and demographic-parity constraints.  Under equal opportunity
    the two sides normalise by different score masses (the full population
    here, each stage's own pool in the decentralized run, which is all a
    detail-free stage can see), so the decentralized utility may exceed
    this benchmark by a sliver, on the order of the normalisation shift.
    """
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    groups = np.asarray(groups)
    plans = list(plans)
    if len(plans) != 2:
        raise StageError("the oracle is defined for two-stage plans")
    validate_stage_plans(plans)
    if mode == "auto":
        mode = "brute-force" if len(r1) <= brute_limit else "threshold"
    if mode == "brute-force":
        return _brute_force_oracle(r1, r2, groups, plans)
    if mode == "threshold":
        return _threshold_oracle(r1, r2, groups, plans)
    raise StageError(f"unknown oracle mode {mode!r}")


# ---------------------------------------------------------------------------
# Joint score distributions and the suboptimality bound harness
# ---------------------------------------------------------------------------

_erf = np.frompyfunc(math.erf, 1, 1)


def _norm_cdf(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + _erf(np.asarray(x) / math.sqrt(2.0)).astype(float))


@dataclass(frozen=True)
class ScoreDistribution:
    """Sampler for joint (early score, full score, group) triples.

    Kinds: ``comonotone`` (identical scores), ``gaussian-copula`` with
    correlation ``rho`` (uniform marginals), ``independent``, and
    ``jittered`` (full score is the early score plus bounded noise of
    width ``spread``).  Group labels are independent of the scores.
    """

    kind: str
    rho: float = 0.0
    spread: float = 0.05
    group_shares: tuple[float, ...] = (1.0,)

    def __post_init__(self):
        if self.kind not in ("comonotone", "gaussian-copula", "independent", "jittered"):
            raise ValueError(f"unknown score distribution kind {self.kind!r}")
        if abs(sum(self.group_shares) - 1.0) > 1e-9 or min(self.group_shares) <= 0:
            raise ValueError("group shares must be positive and sum to 1")
        if self.kind == "gaussian-copula" and not -1.0 < self.rho < 1.0:
            raise ValueError("rho must be in (-1, 1)")

    def sample(self, rng: np.random.Generator, n: int):
        if self.kind == "comonotone":
            u = rng.random(n)
            r1, r2 = u, u.copy()
        elif self.kind == "independent":
            r1, r2 = rng.random(n), rng.random(n)
        elif self.kind == "jittered":
            r1 = rng.random(n)
            r2 = np.clip(r1 + self.spread * (rng.random(n) - 0.5), 0.0, 1.0)
        else:
            g1 = rng.standard_normal(n)
            g2 = self.rho * g1 + math.sqrt(1.0 - self.rho**2) * rng.standard_normal(n)
            r1, r2 = _norm_cdf(g1), _norm_cdf(g2)
        if len(self.group_shares) == 1:
            z = np.zeros(n, dtype=np.int64)
        else:
            z = rng.choice(len(self.group_shares), size=n, p=self.group_shares)
        return r1, r2, z

    @classmethod
    def from_dict(cls, spec: Mapping) -> "ScoreDistribution":
        return cls(
            kind=str(spec["kind"]),
            rho=float(spec.get("rho", 0.0)),
            spread=float(spec.get("spread", 0.05)),
            group_shares=tuple(float(s) for s in spec.get("group_shares", (1.0,))),
        )


@dataclass(frozen=True)
class CoherenceCheck:
    ok: bool
    worst_drop: float
    diagnostics: list


def check_coherence(
    r1: np.ndarray,
    r2: np.ndarray,
    z: np.ndarray,
    delta1: Mapping,
    grid: Sequence[float] = tuple(np.arange(0.05, 0.96, 0.05)),
) -> CoherenceCheck:
    """Empirical check that conditioning on a higher full score never
    lowers the chance of clearing the early-stage threshold.

    For each group the exceedance curve m -> P(r1 >= threshold | r2 >= m)
    is evaluated on a quantile grid; a drop beyond sampling slack (two
    standard errors plus a hair) is a violation.
    """
    diagnostics = []
    worst = 0.0
    ok = True
    for g in sorted(set(np.asarray(z).tolist())):
        sel = np.asarray(z) == g
        r1g, r2g = r1[sel], r2[sel]
        threshold = delta1[g]
        prev_rate, prev_se, prev_m = None, None, None
        for q in grid:
            m = float(np.quantile(r2g, q))
            tail = r2g >= m
            count = int(tail.sum())
            if count < 50:
                continue
            rate = float((r1g[tail] >= threshold).mean())
            se = math.sqrt(max(rate * (1 - rate), 1e-12) / count)
            if prev_rate is not None:
                drop = prev_rate - rate
                slack = 2.0 * max(se, prev_se) + 1e-3
                if drop > slack:
                    ok = False
                    worst = max(worst, drop)
                    diagnostics.append(
                        {
                            "group": g,
                            "m_low": prev_m,
                            "m_high": m,
                            "rate_low": prev_rate,
                            "rate_high": rate,
                            "drop": drop,
                            "slack": slack,
                        }
                    )
            prev_rate, prev_se, prev_m = rate, se, m
    return CoherenceCheck(ok=ok, worst_drop=worst, diagnostics=diagnostics)


def _wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float, float]:
    if n == 0:
        return 0.0, 1.0, 0.5
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    return max(0.0, center - half), min(1.0, center + half), half


@dataclass(frozen=True)
class BoundCheckResult:
    disagreement_rate: float
    disagreements: int
    comparisons: int
    bound: float
    per_group_bounds: dict
    ci_low: float
    ci_high: float
    ci_half_width: float
    thresholds_stage1: dict
    thresholds_stage2: dict
    bands: dict
    replicates: int
    pool_size: int
    fairness: str


def suboptimality_bound_check(
    dist: ScoreDistribution,
    alpha1: float,
    alpha2: float,
    replicates: int,
    seed: int,
    pool_size: int = 200,
    fairness: str | None = None,
    calibration_size: int = 100_000,
) -> BoundCheckResult:
    """Monte-Carlo check of the decentralization suboptimality bound.

    Estimates, per group, the probability that the early score misses its
    stage-1 threshold among individuals whose full score sits at the
    final-stage threshold (a band of one percent quantile spacing stands
    in for the measure-zero level set, and its width is reported).  The
    empirical side runs the decentralized pipeline and the centralized
    benchmark on fresh pools and counts per-individual decision
    disagreements.  Samples that fail the coherence check are refused.
    """
    if not 0.0 < alpha2 <= alpha1 <= 1.0:
        raise StageError("need 0 < alpha2 <= alpha1 <= 1")
    if fairness is None:
        fairness = DEMOGRAPHIC_PARITY if len(dist.group_shares) > 1 else NO_FAIRNESS
    master = np.random.SeedSequence(seed)
    calib_seed, *rep_seeds = master.spawn(replicates + 1)

    calib_rng = np.random.default_rng(calib_seed)
    r1c, r2c, zc = dist.sample(calib_rng, calibration_size)
    groups = sorted(set(zc.tolist()))
    delta1, delta2, bands, per_group_bounds = {}, {}, {}, {}
    for g in groups:
        sel = zc == g
        r1g, r2g = r1c[sel], r2c[sel]
        delta1[g] = float(np.quantile(r1g, 1.0 - alpha1))
        delta2[g] = float(np.quantile(r2g, 1.0 - alpha2))
        q = 1.0 - alpha2
        h = 0.5 * (
            float(np.quantile(r2g, min(q + 0.01, 1.0)))
            - float(np.quantile(r2g, max(q - 0.01, 0.0)))
        )
        bands[g] = h
        in_band = sel & (np.abs(r2c - delta2[g]) <= h)
        if not in_band.any():
            in_band = sel  # degenerate marginal; fall back to the whole group
        per_group_bounds[g] = float((r1c[in_band] < delta1[g]).mean())

    coherence = check_coherence(r1c, r2c, zc, delta1)
    if not coherence.ok:
        worst = coherence.diagnostics[0]
        raise AssumptionViolatedError(
            "coherent-features check failed: conditional exceedance drops by "
            f"{coherence.worst_drop:.3f} for group {worst['group']} between "
            f"full-score levels {worst['m_low']:.3f} and {worst['m_high']:.3f}",
            coherence.diagnostics,
        )

    plans = [StagePlan(alpha1, fairness), StagePlan(alpha2, fairness)]
    disagreements = 0
    comparisons = 0
    for rep_seed in rep_seeds:
        rng = np.random.default_rng(rep_seed)
        r1, r2, z = dist.sample(rng, pool_size)
        result = run_stages([r1, r2], z, plans, seed=int(rng.integers(2**32)))
        oracle = oracle_joint(r1, r2, z, plans, mode="threshold")
        disagreements += int(
            (np.abs(result.final_fractional - oracle.decision) > 1e-9).sum()
        )
        comparisons += pool_size

    rate = disagreements / comparisons
    ci_low, ci_high, half = _wilson_interval(disagreements, comparisons)
    return BoundCheckResult(
        disagreement_rate=rate,
        disagreements=disagreements,
        comparisons=comparisons,
        bound=max(per_group_bounds.values()),
        per_group_bounds=per_group_bounds,
        ci_low=ci_low,
        ci_high=ci_high,
        ci_half_width=half,
        thresholds_stage1=delta1,
        thresholds_stage2=delta2,
        bands=bands,
        replicates=replicates,
        pool_size=pool_size,
        fairness=fairness,
    )


# ---------------------------------------------------------------------------
# Shipped counterexample: global fairness does not give local fairness
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GlobalOnlyCounterexample:
    r1: np.ndarray
    r2: np.ndarray
    groups: np.ndarray
    plans: tuple[StagePlan, StagePlan]
    final_decision: np.ndarray
    final_parity_residual: float
    stage1_pass: np.ndarray
    stage1_parity_residual: float


def global_only_counterexample() -> GlobalOnlyCounterexample:
    """A pool where the globally fair centralized selection is grossly
    unfair at stage 1.

    One group dominates the early scores while the other holds the best
    full scores.  A final selection balanced across groups must still be
    routed through a stage-1 cut, and filling that cut by early score
    packs it with the early-score group.
    """
    n_per = 20
    groups = np.array([0] * n_per + [1] * n_per)
    r1 = np.concatenate(
        [
            np.linspace(0.90, 0.71, n_per),        # group 0: strong early scores
            np.concatenate([np.linspace(0.65, 0.61, 5), np.linspace(0.30, 0.11, 15)]),
        ]
    )
    r2 = np.concatenate(
        [
            np.concatenate([np.linspace(0.92, 0.88, 5), np.linspace(0.50, 0.31, 15)]),
            np.concatenate([np.linspace(0.97, 0.93, 5), np.linspace(0.45, 0.26, 15)]),
        ]
    )
    plans = (
        StagePlan(budget=0.5, fairness=NO_FAIRNESS),
        StagePlan(budget=0.25, fairness=DEMOGRAPHIC_PARITY),
    )

    oracle = oracle_joint(r1, r2, groups, list(plans), mode="threshold")
    final = oracle.decision
    final_residual = parity_residual(final, groups)

    # the stage-1 cut the centralized selection implies: winners plus the
    # best remaining early scores up to the stage-1 quota
    n = len(r1)
    k1 = int(round(plans[0].budget * n))
    winners = final > 1e-9
    stage1 = winners.astype(float)
    shortfall = k1 - int(winners.sum())
    if shortfall > 0:
        remaining = np.flatnonzero(~winners)
        order = remaining[np.lexsort((remaining, -r1[remaining]))]
        stage1[order[:shortfall]] = 1.0
    stage1_residual = parity_residual(stage1, groups)

    return GlobalOnlyCounterexample(
        r1=r1,
        r2=r2,
        groups=groups,
        plans=plans,
        final_decision=final,
        final_parity_residual=final_residual,
        stage1_pass=stage1,
        stage1_parity_residual=stage1_residual,
    )
