"""Discrete structural causal models and censored datasets.

This is the empirical counterpart of the graph engine: ancestral sampling
from tabular SCMs, decision-driven cell masking, complete-case conditional
probability estimation, and exact conditionals by joint summation for use
as an oracle.  Random generation uses numpy's PCG64; the seed and
generator name belong in every report that contains sampled numbers.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

ROW_SUM_TOL = 1e-12


class ScmError(ValueError):
    """Invalid SCM definition."""


class DataError(ValueError):
    """Invalid dataset, schema or estimation request."""


class ZeroProbabilityError(DataError):
    """Conditioning event has probability zero under the model."""


@dataclass(frozen=True)
class ScmVariable:
    """One variable: a conditional probability table over parent values."""

    name: str
    cardinality: int
    parents: tuple[str, ...]
    table: dict[tuple[int, ...], tuple[float, ...]]


@dataclass(frozen=True)
class DiscreteScm:
    """Topologically ordered discrete variables with full CPTs."""

    variables: tuple[ScmVariable, ...]

    @classmethod
    def build(cls, variables: Sequence[ScmVariable]) -> "DiscreteScm":
        scm = cls(tuple(variables))
        scm._validate()
        return scm

    def _validate(self) -> None:
        cards: dict[str, int] = {}
        for var in self.variables:
            if var.cardinality < 2:
                raise ScmError(f"{var.name}: cardinality must be at least 2")
            if var.name in cards:
                raise ScmError(f"duplicate variable {var.name}")
            for p in var.parents:
                if p not in cards:
                    raise ScmError(
                        f"{var.name}: parent {p} must be declared earlier (topological order)"
                    )
            expected = list(itertools.product(*(range(cards[p]) for p in var.parents)))
            if sorted(var.table) != sorted(expected):
                raise ScmError(f"{var.name}: CPT must cover every parent combination")
            for combo, probs in var.table.items():
                if len(probs) != var.cardinality:
                    raise ScmError(f"{var.name}{combo}: row length != cardinality")
                if any(p < 0 for p in probs):
                    raise ScmError(f"{var.name}{combo}: negative probability")
                if abs(sum(probs) - 1.0) > ROW_SUM_TOL:
                    raise ScmError(f"{var.name}{combo}: row sums to {sum(probs)!r}, not 1")
            cards[var.name] = var.cardinality

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def cardinalities(self) -> dict[str, int]:
        return {v.name: v.cardinality for v in self.variables}

    def to_dict(self) -> dict:
        return {
            "variables": [
                {
                    "name": v.name,
                    "cardinality": v.cardinality,
                    "parents": list(v.parents),
                    "cpt": [
                        {"given": list(combo), "probs": list(map(float, probs))}
                        for combo, probs in sorted(v.table.items())
                    ],
                }
                for v in self.variables
            ]
        }

    @classmethod
    def from_dict(cls, spec: Mapping) -> "DiscreteScm":
        try:
            raw_vars = spec["variables"]
        except (KeyError, TypeError):
            raise ScmError("SCM definition needs a 'variables' list") from None
        variables = []
        for raw in raw_vars:
            table = {
                tuple(int(g) for g in row["given"]): tuple(float(p) for p in row["probs"])
                for row in raw["cpt"]
            }
            variables.append(
                ScmVariable(
                    name=str(raw["name"]),
                    cardinality=int(raw["cardinality"]),
                    parents=tuple(str(p) for p in raw.get("parents", [])),
                    table=table,
                )
            )
        return cls.build(variables)

    @classmethod
    def from_json(cls, path: str | Path) -> "DiscreteScm":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def scm_variable(name, parents, cards, probs_of) -> ScmVariable:
    """Tabulate P(name=1 | parents) from a callable; binary variables only."""
    table = {}
    for combo in itertools.product(*(range(cards[p]) for p in parents)):
        p1 = float(probs_of(*combo))
        if not 0.0 <= p1 <= 1.0:
            raise ScmError(f"{name}{combo}: probability {p1} outside [0, 1]")
        table[combo] = (1.0 - p1, p1)
    return ScmVariable(name, 2, tuple(parents), table)


@dataclass
class Dataset:
    """Columnar table of category codes with an explicit missingness mask.

    ``mask[col][row]`` is True when the cell's value is missing.  The
    optional ``decision`` column is the driver of that missingness and is
    never masked itself.  ``labels`` keeps original string categories when
    the dataset came from a CSV file.
    """

    columns: tuple[tuple[str, int], ...]
    values: dict[str, np.ndarray]
    mask: dict[str, np.ndarray]
    decision: str | None = None
    labels: dict[str, tuple[str, ...]] | None = None

    def __post_init__(self) -> None:
        names = [name for name, _ in self.columns]
        if sorted(names) != sorted(self.values) or sorted(names) != sorted(self.mask):
            raise DataError("columns, values and mask must name the same columns")
        lengths = {len(self.values[n]) for n in names} | {len(self.mask[n]) for n in names}
        if len(lengths) > 1:
            raise DataError("ragged columns")
        if self.decision is not None:
            if self.decision not in self.values:
                raise DataError(f"decision column {self.decision} not in dataset")
            if self.mask[self.decision].any():
                raise DataError("decision column must not be masked")

    @property
    def n_rows(self) -> int:
        return len(next(iter(self.values.values()))) if self.values else 0

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.columns)

    def cardinality(self, name: str) -> int:
        for col, card in self.columns:
            if col == name:
                return card
        raise DataError(f"unknown column {name}")

    def take(self, indices: np.ndarray) -> "Dataset":
        return Dataset(
            columns=self.columns,
            values={n: v[indices].copy() for n, v in self.values.items()},
            mask={n: m[indices].copy() for n, m in self.mask.items()},
            decision=self.decision,
            labels=self.labels,
        )


def sample_scm(scm: DiscreteScm, n: int, seed: int) -> Dataset:
    """Draw ``n`` complete rows ancestrally, deterministically in the seed."""
    if n < 1:
        raise DataError("sample size must be at least 1")
    rng = np.random.default_rng(seed)
    cards = scm.cardinalities
    values: dict[str, np.ndarray] = {}
    for var in scm.variables:
        combos = list(itertools.product(*(range(cards[p]) for p in var.parents)))
        prob_rows = np.array([var.table[c] for c in combos])
        cdf = np.cumsum(prob_rows, axis=1)
        if var.parents:
            idx = np.zeros(n, dtype=np.int64)
            for p in var.parents:
                idx = idx * cards[p] + values[p]
        else:
            idx = np.zeros(n, dtype=np.int64)
        u = rng.random(n)
        drawn = (u[:, None] > cdf[idx]).sum(axis=1).astype(np.int64)
        # row sums are only 1 within tolerance; never emit an out-of-range code
        values[var.name] = np.minimum(drawn, var.cardinality - 1)
    return Dataset(
        columns=tuple((v.name, v.cardinality) for v in scm.variables),
        values=values,
        mask={name: np.zeros(n, dtype=bool) for name in scm.names},
    )


def apply_missingness(ds: Dataset, decision: str, bound: Iterable[str]) -> Dataset:
    """Mask cells of ``bound`` columns on rows where ``decision`` is 0."""
    bound = tuple(bound)
    if decision not in ds.values:
        raise DataError(f"unknown decision column {decision}")
    if ds.mask[decision].any():
        raise DataError("decision column has masked cells")
    dvals = ds.values[decision]
    if not np.isin(dvals, (0, 1)).all():
        raise DataError(f"decision column {decision} must be binary")
    for col in bound:
        if col not in ds.values:
            raise DataError(f"unknown bound column {col}")
        if col == decision:
            raise DataError("decision column cannot be bound to itself")
    missing = dvals == 0
    mask = {n: m.copy() for n, m in ds.mask.items()}
    for col in bound:
        mask[col] = missing.copy()
    return Dataset(
        columns=ds.columns,
        values={n: v.copy() for n, v in ds.values.items()},
        mask=mask,
        decision=decision,
        labels=ds.labels,
    )


@dataclass
class Cpt:
    """Complete-case conditional probability table with Laplace smoothing.

    ``counts[combo, value]`` are raw complete-case counts; ``probs`` are
    smoothed with ``(count + lam) / (total + lam * cardinality)`` per
    parent-value combination.  Combinations with no usable rows and zero
    smoothing are flagged undefined rather than silently zeroed.
    """

    target: str
    target_card: int
    given: tuple[str, ...]
    given_cards: tuple[int, ...]
    counts: np.ndarray
    probs: np.ndarray
    smoothing: float
    undefined: np.ndarray
    used_rows: int

    def combo_index(self, given_values: Sequence[int]) -> int:
        idx = 0
        for card, value in zip(self.given_cards, given_values):
            if not 0 <= value < card:
                raise DataError(f"value {value} out of range for cardinality {card}")
            idx = idx * card + value
        return idx

    def distribution(self, given_values: Sequence[int] = ()) -> np.ndarray:
        idx = self.combo_index(given_values)
        if self.undefined[idx]:
            raise DataError(
                f"P({self.target}|{','.join(self.given)}) undefined for {tuple(given_values)}"
            )
        return self.probs[idx]

    def score_rows(self, ds: Dataset, positive: int = 1) -> np.ndarray:
        """P(target = positive | given) per row; rows must be complete on given."""
        idx = np.zeros(ds.n_rows, dtype=np.int64)
        for col, card in zip(self.given, self.given_cards):
            if ds.mask[col].any():
                raise DataError(f"cannot score rows with masked feature {col}")
            values = ds.values[col]
            if (values < 0).any() or (values >= card).any():
                raise DataError(
                    f"column {col} holds categories the table was not fitted on"
                )
            idx = idx * card + values
        if self.undefined[idx].any():
            raise DataError("some rows hit undefined CPT combinations")
        return self.probs[idx, positive]


def fit_cpt(
    ds: Dataset,
    target: str,
    given: Sequence[str],
    smoothing: float = 1.0,
) -> Cpt:
    """Naive (complete-case) estimate of P(target | given).

    Rows with a masked cell among the queried columns are skipped; this is
    exactly the estimator whose consistency the graph verdicts describe.
    """
    given = tuple(given)
    if smoothing < 0:
        raise DataError("smoothing must be non-negative")
    for col in (target, *given):
        if col not in ds.values:
            raise DataError(f"unknown column {col}")
    target_card = ds.cardinality(target)
    given_cards = tuple(ds.cardinality(c) for c in given)

    usable = ~ds.mask[target]
    for col in given:
        usable &= ~ds.mask[col]

    n_combos = int(np.prod(given_cards)) if given else 1
    idx = np.zeros(ds.n_rows, dtype=np.int64)
    for col, card in zip(given, given_cards):
        idx = idx * card + ds.values[col]
    flat = idx[usable] * target_card + ds.values[target][usable]
    counts = np.bincount(flat, minlength=n_combos * target_card).reshape(
        n_combos, target_card
    )

    totals = counts.sum(axis=1, keepdims=True)
    undefined = (totals[:, 0] == 0) & (smoothing == 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = (counts + smoothing) / (totals + smoothing * target_card)
    probs[undefined] = np.nan
    return Cpt(
        target=target,
        target_card=target_card,
        given=given,
        given_cards=given_cards,
        counts=counts,
        probs=probs,
        smoothing=smoothing,
        undefined=undefined,
        used_rows=int(usable.sum()),
    )


def _joint_iter(scm: DiscreteScm):
    cards = [v.cardinality for v in scm.variables]
    names = scm.names
    parent_pos = [
        tuple(names.index(p) for p in v.parents) for v in scm.variables
    ]
    for assignment in itertools.product(*(range(c) for c in cards)):
        prob = 1.0
        for i, var in enumerate(scm.variables):
            combo = tuple(assignment[j] for j in parent_pos[i])
            prob *= var.table[combo][assignment[i]]
            if prob == 0.0:
                break
        yield assignment, prob


def true_conditional(
    scm: DiscreteScm,
    target: str,
    given_assignment: Mapping[str, int],
) -> np.ndarray:
    """Exact P(target | given) by summing the full joint distribution.

    Latent and unassigned variables are marginalised out.  Feasible for a
    dozen or so small-cardinality variables, which covers every shipped
    model; intended as the oracle that naive estimates are judged against.
    """
    names = scm.names
    if target not in names:
        raise DataError(f"unknown variable {target}")
    for key in given_assignment:
        if key not in names:
            raise DataError(f"unknown variable {key}")
    if target in given_assignment:
        raise DataError("target cannot be part of the conditioning assignment")
    t_pos = names.index(target)
    fixed = {names.index(k): int(v) for k, v in given_assignment.items()}
    dist = np.zeros(scm.cardinalities[target])
    for assignment, prob in _joint_iter(scm):
        if any(assignment[pos] != val for pos, val in fixed.items()):
            continue
        dist[assignment[t_pos]] += prob
    total = dist.sum()
    if total <= 0.0:
        raise ZeroProbabilityError(
            f"conditioning event {dict(given_assignment)} has probability 0"
        )
    return dist / total


def naive_joint(
    ds: Dataset,
    variables: Sequence[str],
    smoothing: float = 1.0,
) -> np.ndarray:
    """Complete-case joint frequency of ``variables`` with Laplace smoothing."""
    variables = tuple(variables)
    if not variables:
        raise DataError("joint estimate needs at least one variable")
    cards = tuple(ds.cardinality(v) for v in variables)
    usable = np.ones(ds.n_rows, dtype=bool)
    for col in variables:
        if col not in ds.values:
            raise DataError(f"unknown column {col}")
        usable &= ~ds.mask[col]
    total = int(usable.sum())
    n_cells = int(np.prod(cards))
    if total == 0 and smoothing == 0:
        raise DataError("no complete rows and zero smoothing")
    idx = np.zeros(ds.n_rows, dtype=np.int64)
    for col, card in zip(variables, cards):
        idx = idx * card + ds.values[col]
    counts = np.bincount(idx[usable], minlength=n_cells)
    freq = (counts + smoothing) / (total + smoothing * n_cells)
    return freq.reshape(cards)


def true_joint(scm: DiscreteScm, variables: Sequence[str]) -> np.ndarray:
    """Exact joint P(variables) marginalised over everything else."""
    names = scm.names
    positions = []
    for v in variables:
        if v not in names:
            raise DataError(f"unknown variable {v}")
        positions.append(names.index(v))
    cards = tuple(scm.cardinalities[v] for v in variables)
    dist = np.zeros(cards)
    for assignment, prob in _joint_iter(scm):
        key = tuple(assignment[p] for p in positions)
        dist[key] += prob
    return dist


MISSING_TOKENS = ("", "NA")
MAX_CSV_CARDINALITY = 64


@dataclass(frozen=True)
class CsvSchema:
    """Column roles for a loaded CSV: sensitive attribute, outcome, the
    optional historical decision column, and nested per-stage feature lists."""

    sensitive: str
    outcome: str
    stages: tuple[tuple[str, ...], ...]
    decision: str | None = None

    @classmethod
    def from_dict(cls, spec: Mapping) -> "CsvSchema":
        try:
            stages = tuple(tuple(str(c) for c in stage) for stage in spec["stages"])
            schema = cls(
                sensitive=str(spec["sensitive"]),
                outcome=str(spec["outcome"]),
                stages=stages,
                decision=str(spec["decision"]) if spec.get("decision") else None,
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"bad schema config: {exc}") from None
        return schema

    @classmethod
    def from_json(cls, path: str | Path) -> "CsvSchema":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def referenced_columns(self) -> tuple[str, ...]:
        cols = [self.sensitive, self.outcome]
        if self.decision:
            cols.append(self.decision)
        for stage in self.stages:
            cols.extend(stage)
        seen: dict[str, None] = {}
        for c in cols:
            seen.setdefault(c)
        return tuple(seen)


def load_csv(path: str | Path, schema: CsvSchema) -> Dataset:
    """Load a discrete CSV; 'NA' or empty fields set the missingness mask.

    Categories are coded by first appearance per column, with the original
    labels kept on the dataset for reports.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        if len(set(header)) != len(header):
            raise DataError(f"{path}: duplicate column names")
        rows: list[list[str]] = []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                )
            rows.append([f.strip() for f in row])

    missing_refs = [c for c in schema.referenced_columns() if c not in header]
    if missing_refs:
        raise DataError(f"schema references unknown columns: {', '.join(missing_refs)}")

    n = len(rows)
    values: dict[str, np.ndarray] = {}
    mask: dict[str, np.ndarray] = {}
    labels: dict[str, tuple[str, ...]] = {}
    columns: list[tuple[str, int]] = []
    for j, col in enumerate(header):
        codes = np.zeros(n, dtype=np.int64)
        miss = np.zeros(n, dtype=bool)
        seen: dict[str, int] = {}
        for i, row in enumerate(rows):
            token = row[j]
            if token in MISSING_TOKENS:
                miss[i] = True
                continue
            if token not in seen:
                seen[token] = len(seen)
                if len(seen) > MAX_CSV_CARDINALITY:
                    raise DataError(
                        f"{path}: column {col} has more than "
                        f"{MAX_CSV_CARDINALITY} distinct values; not categorical?"
                    )
            codes[i] = seen[token]
        values[col] = codes
        mask[col] = miss
        labels[col] = tuple(seen)
        columns.append((col, max(len(seen), 1)))

    if schema.decision:
        dcol = schema.decision
        if mask[dcol].any():
            raise DataError("decision column has missing cells")
        # decision semantics are literal: "0" masks, "1" keeps
        if not set(labels[dcol]) <= {"0", "1"}:
            raise DataError(f"decision column {dcol} must contain only 0/1")
        remap = {code: int(lbl) for code, lbl in enumerate(labels[dcol])}
        values[dcol] = np.array([remap[c] for c in values[dcol]], dtype=np.int64)
        labels[dcol] = ("0", "1")
        columns = [(c, 2 if c == dcol else card) for c, card in columns]

    return Dataset(
        columns=tuple(columns),
        values=values,
        mask=mask,
        decision=schema.decision,
        labels=labels,
    )
