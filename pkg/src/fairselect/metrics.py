"""Group fairness metrics and the train/test fairness-gap experiment.

Rates follow the usual confusion-matrix definitions per group; difference
metrics are unprivileged minus privileged and the disparate-impact ratio
is unprivileged over privileged.  A metric whose denominator is empty is
reported as an explicit None, never as zero: a silent zero would fake
fairness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import df2
from .datagen import Cpt, Dataset, fit_cpt

DEMOGRAPHIC_PARITY = df2.DEMOGRAPHIC_PARITY
EQUAL_OPPORTUNITY = df2.EQUAL_OPPORTUNITY


class MetricError(ValueError):
    """Unusable metric input (single group, bad shapes, empty data)."""


@dataclass(frozen=True)
class LabeledPredictions:
    """Aligned binary predictions, binary outcomes and group codes."""

    y_hat: np.ndarray
    y: np.ndarray
    z: np.ndarray

    @classmethod
    def of(cls, y_hat, y, z) -> "LabeledPredictions":
        y_hat = np.asarray(y_hat, dtype=np.int64)
        y = np.asarray(y, dtype=np.int64)
        z = np.asarray(z)
        if not (len(y_hat) == len(y) == len(z)):
            raise MetricError("y_hat, y and z must have equal length")
        if len(y_hat) == 0:
            raise MetricError("empty input")
        for name, arr in (("y_hat", y_hat), ("y", y)):
            if not np.isin(arr, (0, 1)).all():
                raise MetricError(f"{name} must be binary")
        return cls(y_hat, y, z)


def _rate(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


@dataclass(frozen=True)
class GroupRates:
    group: object
    n: int
    n_pos: int
    n_neg: int
    selection_rate: float | None
    tpr: float | None
    fpr: float | None
    fnr: float | None


def _diff(unpriv: float | None, priv: float | None) -> float | None:
    if unpriv is None or priv is None:
        return None
    return unpriv - priv


@dataclass(frozen=True)
class MetricReport:
    """Per-group rates plus the pairwise fairness metrics.

    With more than two groups the unprivileged side pools every
    non-privileged row.  None marks an undefined metric.
    """

    privileged: object
    groups: tuple[GroupRates, ...]
    spd: float | None
    fprd: float | None
    fnrd: float | None
    eod: float | None
    aod: float | None
    di: float | None

    def rates_of(self, group) -> GroupRates:
        for gr in self.groups:
            if gr.group == group:
                return gr
        raise MetricError(f"no such group {group!r}")

    def as_records(self) -> list[dict]:
        records = [
            {
                "metric": name,
                "value": getattr(self, name),
            }
            for name in ("spd", "fprd", "fnrd", "eod", "aod", "di")
        ]
        for gr in self.groups:
            records.append(
                {
                    "metric": f"selection_rate[{gr.group}]",
                    "value": gr.selection_rate,
                }
            )
        return records


def _rates_for(y_hat: np.ndarray, y: np.ndarray, group) -> GroupRates:
    n = len(y)
    pos = y == 1
    neg = ~pos
    return GroupRates(
        group=group,
        n=n,
        n_pos=int(pos.sum()),
        n_neg=int(neg.sum()),
        selection_rate=_rate(int(y_hat.sum()), n),
        tpr=_rate(int((y_hat[pos] == 1).sum()), int(pos.sum())),
        fpr=_rate(int((y_hat[neg] == 1).sum()), int(neg.sum())),
        fnr=_rate(int((y_hat[pos] == 0).sum()), int(pos.sum())),
    )


def compute_metrics(p: LabeledPredictions, privileged) -> MetricReport:
    """Fairness report for one prediction set with a declared privileged group."""
    groups = sorted(set(p.z.tolist()))
    if len(groups) < 2:
        raise MetricError("need at least two groups")
    if privileged not in groups:
        raise MetricError(f"privileged group {privileged!r} not present")

    per_group = []
    for g in groups:
        sel = p.z == g
        per_group.append(_rates_for(p.y_hat[sel], p.y[sel], g))

    priv_sel = p.z == privileged
    priv = _rates_for(p.y_hat[priv_sel], p.y[priv_sel], privileged)
    unpriv = _rates_for(p.y_hat[~priv_sel], p.y[~priv_sel], "unprivileged")

    spd = _diff(unpriv.selection_rate, priv.selection_rate)
    fprd = _diff(unpriv.fpr, priv.fpr)
    fnrd = _diff(unpriv.fnr, priv.fnr)
    eod = _diff(unpriv.tpr, priv.tpr)
    tprd = eod
    aod = None if (fprd is None or tprd is None) else (fprd + tprd) / 2
    if unpriv.selection_rate is None or priv.selection_rate in (None, 0):
        di = None
    else:
        di = unpriv.selection_rate / priv.selection_rate
    return MetricReport(
        privileged=privileged,
        groups=tuple(per_group),
        spd=spd,
        fprd=fprd,
        fnrd=fnrd,
        eod=eod,
        aod=aod,
        di=di,
    )


@dataclass(frozen=True)
class GapConfig:
    """Configuration of the missingness gap experiment.

    The risk model scores rows with a plug-in CPT classifier; training
    rows scoring below ``deletion_threshold`` are dropped, mimicking data
    recorded only for favourably assessed individuals.  The downstream
    fair classifier is a single selection stage solved as a linear
    program, then frozen into per-group score thresholds and applied to
    the untouched test set.
    """

    outcome: str
    sensitive: str
    risk_features: tuple[str, ...]
    deletion_threshold: float
    budget: float
    fairness: str = DEMOGRAPHIC_PARITY
    smoothing: float = 1.0
    privileged: int | None = None
    compare_with_clean_model: bool = False
    seed: int = 0


@dataclass(frozen=True)
class GapResult:
    train_report: MetricReport
    test_report: MetricReport
    clean_test_report: MetricReport | None
    privileged: object
    deleted_fraction: float
    thresholds: dict


def _check_survivors(ds: Dataset, keep: np.ndarray, cfg: GapConfig) -> None:
    for col in (cfg.outcome, cfg.sensitive):
        survivors = set(np.unique(ds.values[col][keep]).tolist())
        everyone = set(np.unique(ds.values[col]).tolist())
        lost = everyone - survivors
        if lost:
            raise MetricError(
                f"deletion threshold removes every row with {col} in {sorted(lost)}"
            )


def _fair_threshold_model(train: Dataset, cfg: GapConfig, rng) -> tuple[Cpt, df2.ThresholdRule, np.ndarray]:
    """Fit scores on ``train`` and freeze an LP-fair selection rule."""
    cpt = fit_cpt(train, cfg.outcome, cfg.risk_features, cfg.smoothing)
    scores = cpt.score_rows(train)
    groups = train.values[cfg.sensitive]
    pool = df2.ScoredPool.initial(scores, groups)
    plan = df2.StagePlan(budget=cfg.budget, fairness=cfg.fairness, features=cfg.risk_features)
    decision = df2.solve_stage(pool, plan)
    rule = df2.threshold_rule(pool, decision)
    y_hat_train = df2.realize_decisions(decision.values, rng)
    return cpt, rule, y_hat_train


def gap_experiment(full_train: Dataset, test: Dataset, config: GapConfig) -> GapResult:
    """Measure how training-data censoring breaks fairness on deployment data.

    Returns both the censored-train report (where the constraint was
    enforced, so it looks fair) and the test report (the population the
    deployed rule actually faces).  With ``compare_with_clean_model`` the
    same rule trained without deletion is also scored on the test set, the
    comparison convention used for pre-processing style baselines.
    """
    rng = np.random.default_rng(config.seed)

    risk = fit_cpt(full_train, config.outcome, config.risk_features, config.smoothing)
    scores = risk.score_rows(full_train)
    keep = scores >= config.deletion_threshold
    if not keep.any():
        raise MetricError("deletion threshold removes every training row")
    _check_survivors(full_train, keep, config)
    censored = full_train.take(np.flatnonzero(keep))
    deleted_fraction = 1.0 - keep.mean()

    if config.privileged is not None:
        privileged = config.privileged
    else:
        # default: group with the higher favourable-outcome base rate in training
        base = fit_cpt(full_train, config.outcome, (config.sensitive,), 0.0)
        zvals = sorted(set(full_train.values[config.sensitive].tolist()))
        privileged = max(zvals, key=lambda g: (base.distribution((g,))[1], g))

    cpt, rule, y_hat_train = _fair_threshold_model(censored, config, rng)
    train_report = compute_metrics(
        LabeledPredictions.of(
            y_hat_train, censored.values[config.outcome], censored.values[config.sensitive]
        ),
        privileged,
    )

    test_scores = cpt.score_rows(test)
    y_hat_test = rule.predict(test_scores, test.values[config.sensitive], rng)
    test_report = compute_metrics(
        LabeledPredictions.of(
            y_hat_test, test.values[config.outcome], test.values[config.sensitive]
        ),
        privileged,
    )

    clean_test_report = None
    if config.compare_with_clean_model:
        clean_cpt, clean_rule, _ = _fair_threshold_model(full_train, config, rng)
        clean_scores = clean_cpt.score_rows(test)
        y_hat_clean = clean_rule.predict(clean_scores, test.values[config.sensitive], rng)
        clean_test_report = compute_metrics(
            LabeledPredictions.of(
                y_hat_clean, test.values[config.outcome], test.values[config.sensitive]
            ),
            privileged,
        )

    return GapResult(
        train_report=train_report,
        test_report=test_report,
        clean_test_report=clean_test_report,
        privileged=privileged,
        deleted_fraction=float(deleted_fraction),
        thresholds=rule.as_dict(),
    )
