"""Causal graphs with missingness indicators and d-separation queries.

A graph is a DAG over three kinds of nodes:

- *observed* variables, whose values appear in datasets,
- *latent* variables, which influence others but are never recorded,
- *missingness indicators*, binary decision variables that gate whether an
  observed variable's value is recorded at all.

A binding ``X by D`` means the recorded copy of ``X`` is present on a row
exactly when the indicator ``D`` equals 1.  The recorded copies themselves
are not materialised as nodes: they are deterministic functions of
``(X, D)`` and carry no extra separation structure beyond the binding.

On top of plain d-separation the module classifies distribution queries
against an indicator:

- a conditional ``P(T | G)`` is *naive-consistent* when ``T`` is
  d-separated from the indicator given ``G`` (the complete-case estimate
  converges to the truth), otherwise *naive-inconsistent*;
- a joint ``P(V1, ..., Vk)`` is *non-recoverable* when some ``Vi`` has a
  direct edge into the indicator (no estimator can converge, no matter the
  sample size), *naive-consistent* when all of them are marginally
  d-separated from the indicator, and *unknown* otherwise.

All objects are immutable after construction and every iteration order is
sorted, so witnesses and reports are byte-stable across runs.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Sequence

OBSERVED = "observed"
LATENT = "latent"
MISSING = "missing"
_KINDS = (OBSERVED, LATENT, MISSING)

NAIVE_CONSISTENT = "naive-consistent"
NAIVE_INCONSISTENT = "naive-inconsistent"
NON_RECOVERABLE = "non-recoverable"
UNKNOWN = "unknown"
VERDICT_KINDS = (NAIVE_CONSISTENT, NAIVE_INCONSISTENT, NON_RECOVERABLE, UNKNOWN)

_NAME_RE = re.compile(r"^[A-Za-z0-9_]+$")


class GraphError(ValueError):
    """Base class for graph construction and query failures."""


class GraphSyntaxError(GraphError):
    """Malformed graph text; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GraphValidationError(GraphError):
    """Structurally invalid graph (cycle, bad binding, bad node kind)."""


class QueryError(GraphError):
    """Malformed or inapplicable distribution/independence query."""


@dataclass(frozen=True)
class Verdict:
    """Classification of a queried distribution under censoring.

    ``witness`` holds the open path (for inconsistency) or the offending
    direct edge (for non-recoverability); it is None for clean verdicts.
    """

    kind: str
    witness: str | None = None


@dataclass(frozen=True)
class CausalGraph:
    """Immutable DAG with node kinds and missingness bindings.

    Fields are canonically sorted tuples so structural equality is plain
    field equality.  Use :meth:`build` rather than the raw constructor.
    """

    nodes: tuple[tuple[str, str], ...]     # (name, kind), sorted by name
    edges: tuple[tuple[str, str], ...]     # (parent, child), sorted
    bindings: tuple[tuple[str, str], ...]  # (variable, indicator), sorted

    @classmethod
    def build(
        cls,
        nodes: Iterable[tuple[str, str]] | dict[str, str],
        edges: Iterable[tuple[str, str]] = (),
        bindings: Iterable[tuple[str, str]] | dict[str, str] = (),
    ) -> "CausalGraph":
        if isinstance(nodes, dict):
            nodes = nodes.items()
        if isinstance(bindings, dict):
            bindings = bindings.items()
        node_list = sorted((str(n), str(k)) for n, k in nodes)
        edge_list = sorted((str(a), str(b)) for a, b in edges)
        bind_list = sorted((str(v), str(d)) for v, d in bindings)
        g = cls(tuple(node_list), tuple(edge_list), tuple(bind_list))
        g._validate()
        return g

    def _validate(self) -> None:
        seen: set[str] = set()
        for name, kind in self.nodes:
            if not _NAME_RE.match(name):
                raise GraphValidationError(f"invalid node name {name!r}")
            if kind not in _KINDS:
                raise GraphValidationError(f"node {name}: unknown kind {kind!r}")
            if name in seen:
                raise GraphValidationError(f"duplicate node {name}")
            seen.add(name)
        kind_of = dict(self.nodes)
        for a, b in self.edges:
            for end in (a, b):
                if end not in kind_of:
                    raise GraphValidationError(f"edge {a} -> {b}: unknown node {end}")
            if a == b:
                raise GraphValidationError(f"self-loop on {a}")
            if kind_of[a] == MISSING:
                raise GraphValidationError(
                    f"edge {a} -> {b}: missingness indicator {a} cannot have outgoing edges"
                )
        if len(set(self.edges)) != len(self.edges):
            raise GraphValidationError("duplicate edge")
        bound_vars = set()
        for var, ind in self.bindings:
            if var not in kind_of:
                raise GraphValidationError(f"binding references unknown node {var}")
            if ind not in kind_of:
                raise GraphValidationError(f"binding references unknown node {ind}")
            if kind_of[var] != OBSERVED:
                raise GraphValidationError(f"bound variable {var} must be observed")
            if kind_of[ind] != MISSING:
                raise GraphValidationError(
                    f"binding target {ind} is not a missingness indicator"
                )
            if var in bound_vars:
                raise GraphValidationError(f"variable {var} bound twice")
            bound_vars.add(var)
        self._check_acyclic()

    def _check_acyclic(self) -> None:
        indeg = {name: 0 for name, _ in self.nodes}
        for _, b in self.edges:
            indeg[b] += 1
        queue = deque(sorted(n for n, d in indeg.items() if d == 0))
        emitted = 0
        while queue:
            n = queue.popleft()
            emitted += 1
            for c in self.children.get(n, ()):
                indeg[c] -= 1
                if indeg[c] == 0:
                    queue.append(c)
        if emitted != len(self.nodes):
            cyclic = sorted(n for n, d in indeg.items() if d > 0)
            raise GraphValidationError(f"cycle detected among {', '.join(cyclic)}")

    @cached_property
    def kind_of(self) -> dict[str, str]:
        return dict(self.nodes)

    @cached_property
    def node_names(self) -> tuple[str, ...]:
        return tuple(name for name, _ in self.nodes)

    @cached_property
    def parents(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {name: [] for name, _ in self.nodes}
        for a, b in self.edges:
            out[b].append(a)
        return {n: tuple(sorted(ps)) for n, ps in out.items()}

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        out: dict[str, list[str]] = {name: [] for name, _ in self.nodes}
        for a, b in self.edges:
            out[a].append(b)
        return {n: tuple(sorted(cs)) for n, cs in out.items()}

    @cached_property
    def indicators(self) -> tuple[str, ...]:
        return tuple(n for n, k in self.nodes if k == MISSING)

    @cached_property
    def binding_map(self) -> dict[str, str]:
        return dict(self.bindings)

    def ancestors_or_self(self, names: Iterable[str]) -> frozenset[str]:
        result: set[str] = set()
        stack = list(names)
        while stack:
            n = stack.pop()
            if n in result:
                continue
            result.add(n)
            stack.extend(self.parents[n])
        return frozenset(result)

    def to_text(self, header: Sequence[str] = ()) -> str:
        """Serialize in the line format accepted by :func:`parse_graph`.

        Output is canonical: sorted nodes, edges and bindings, so parsing
        the text reproduces a structurally equal graph byte-for-byte.
        """
        lines = [f"# {h}" for h in header]
        for name, kind in self.nodes:
            lines.append(f"node {name}" if kind == OBSERVED else f"node {name} kind={kind}")
        for a, b in self.edges:
            lines.append(f"edge {a} -> {b}")
        for var, ind in self.bindings:
            lines.append(f"bind {var} by {ind}")
        return "\n".join(lines) + "\n"


def parse_graph(text: str) -> CausalGraph:
    """Parse the line-oriented graph format.

    Directives (one per line, ``#`` starts a comment):

    - ``node <name> [kind=latent|missing|observed]``
    - ``edge <a> -> <b>``
    - ``bind <var> by <indicator>``
    """
    nodes: list[tuple[str, str]] = []
    edges: list[tuple[str, str]] = []
    bindings: list[tuple[str, str]] = []
    declared: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] == "node":
            if len(tokens) == 2:
                name, kind = tokens[1], OBSERVED
            elif len(tokens) == 3 and tokens[2].startswith("kind="):
                name, kind = tokens[1], tokens[2][len("kind="):]
            else:
                raise GraphSyntaxError("expected 'node <name> [kind=...]'", lineno)
            if not _NAME_RE.match(name):
                raise GraphSyntaxError(f"invalid node name {name!r}", lineno)
            if kind not in _KINDS:
                raise GraphSyntaxError(f"unknown kind {kind!r}", lineno)
            if name in declared:
                raise GraphSyntaxError(f"duplicate node {name}", lineno)
            declared.add(name)
            nodes.append((name, kind))
        elif tokens[0] == "edge":
            if len(tokens) != 4 or tokens[2] != "->":
                raise GraphSyntaxError("expected 'edge <a> -> <b>'", lineno)
            a, b = tokens[1], tokens[3]
            if a == b:
                raise GraphSyntaxError(f"self-loop on {a}", lineno)
            for end in (a, b):
                if end not in declared:
                    raise GraphSyntaxError(f"edge references unknown node {end}", lineno)
            if (a, b) in edges:
                raise GraphSyntaxError(f"duplicate edge {a} -> {b}", lineno)
            edges.append((a, b))
        elif tokens[0] == "bind":
            if len(tokens) != 4 or tokens[2] != "by":
                raise GraphSyntaxError("expected 'bind <var> by <indicator>'", lineno)
            var, ind = tokens[1], tokens[3]
            for end in (var, ind):
                if end not in declared:
                    raise GraphSyntaxError(f"binding references unknown node {end}", lineno)
            bindings.append((var, ind))
        else:
            raise GraphSyntaxError(f"unknown directive {tokens[0]!r}", lineno)
    return CausalGraph.build(nodes, edges, bindings)


@dataclass(frozen=True)
class IndependenceQuery:
    """Is ``left`` independent of ``right`` given ``given``?"""

    left: frozenset[str]
    right: frozenset[str]
    given: frozenset[str]

    @classmethod
    def of(cls, left: Iterable[str], right: Iterable[str], given: Iterable[str] = ()):
        return cls(frozenset(left), frozenset(right), frozenset(given))

    def validate(self, g: CausalGraph) -> None:
        all_names = set(g.node_names)
        for label, group in (("left", self.left), ("right", self.right), ("given", self.given)):
            unknown = sorted(group - all_names)
            if unknown:
                raise QueryError(f"{label} set references unknown nodes: {', '.join(unknown)}")
            if not group and label != "given":
                raise QueryError(f"{label} set must be non-empty")
        if self.left & self.right or self.left & self.given or self.right & self.given:
            raise QueryError("query sets must be pairwise disjoint")
        latent_given = sorted(n for n in self.given if g.kind_of[n] == LATENT)
        if latent_given:
            raise QueryError(
                f"cannot condition on latent nodes: {', '.join(latent_given)}"
            )


@dataclass(frozen=True)
class SeparationResult:
    """Outcome of a d-separation test, with an open path when connected."""

    separated: bool
    witness: str | None = None

    def __bool__(self) -> bool:  # truthiness == separated
        return self.separated


# Traversal states: how the current node was entered.
_FROM_CHILD = 0   # arrived against an edge (or a start node)
_FROM_PARENT = 1  # arrived along an edge


def d_separated(
    g: CausalGraph,
    left: Iterable[str],
    right: Iterable[str],
    given: Iterable[str] = (),
) -> SeparationResult:
    """Decide d-separation by reachability over (node, entry-direction) states.

    The walk starts at every node in ``left`` as if entered from a child, so
    both upward and downward moves are allowed.  A node entered along an edge
    may only be left through a parent when it is an ancestor of the
    conditioning set (the collider-opening rule).  The first state that lands
    in ``right`` yields the witness path, reconstructed from predecessor
    links; the expansion order is sorted, so the witness is deterministic.
    """
    query = IndependenceQuery.of(left, right, given)
    query.validate(g)
    z = set(query.given)
    targets = set(query.right)
    opens_collider = g.ancestors_or_self(z) if z else frozenset()

    prev: dict[tuple[str, int], tuple[str, int] | None] = {}
    queue: deque[tuple[str, int]] = deque()
    for s in sorted(query.left):
        state = (s, _FROM_CHILD)
        prev[state] = None
        queue.append(state)

    hit: tuple[str, int] | None = None
    while queue and hit is None:
        node, entered = queue.popleft()
        moves: list[tuple[str, int]] = []
        if entered == _FROM_CHILD:
            if node not in z:
                moves.extend((p, _FROM_CHILD) for p in g.parents[node])
                moves.extend((c, _FROM_PARENT) for c in g.children[node])
        else:
            if node not in z:
                moves.extend((c, _FROM_PARENT) for c in g.children[node])
            if node in opens_collider:
                moves.extend((p, _FROM_CHILD) for p in g.parents[node])
        for state in moves:
            if state in prev:
                continue
            prev[state] = (node, entered)
            if state[0] in targets:
                hit = state
                break
            queue.append(state)

    if hit is None:
        return SeparationResult(True, None)
    return SeparationResult(False, _render_path(prev, hit))


def _render_path(
    prev: dict[tuple[str, int], tuple[str, int] | None],
    end: tuple[str, int],
) -> str:
    chain: list[tuple[str, int]] = []
    state: tuple[str, int] | None = end
    while state is not None:
        chain.append(state)
        state = prev[state]
    chain.reverse()
    parts = [chain[0][0]]
    for node, entered in chain[1:]:
        parts.append("->" if entered == _FROM_PARENT else "<-")
        parts.append(node)
    return " ".join(parts)


def _require_indicator(g: CausalGraph, indicator: str) -> None:
    if indicator not in g.kind_of:
        raise QueryError(f"unknown indicator node {indicator}")
    if g.kind_of[indicator] != MISSING:
        raise QueryError(f"{indicator} is not a missingness indicator")


def _require_observed(g: CausalGraph, names: Iterable[str], role: str) -> None:
    for n in names:
        if n not in g.kind_of:
            raise QueryError(f"unknown node {n}")
        if g.kind_of[n] != OBSERVED:
            raise QueryError(f"{role} node {n} must be observed")


def classify_conditional(
    g: CausalGraph,
    target: str,
    given: Iterable[str],
    indicator: str,
) -> Verdict:
    """Classify the complete-case estimate of ``P(target | given)``.

    Naive-consistent exactly when target is d-separated from the indicator
    given the conditioning set; otherwise naive-inconsistent, with the open
    path as witness.  Non-recoverability of conditionals is not decided
    here: inconsistency of the naive estimate is the strongest conclusion
    this rule supports.
    """
    given = tuple(given)
    _require_indicator(g, indicator)
    _require_observed(g, (target, *given), "conditioning")
    result = d_separated(g, {target}, {indicator}, given)
    if result.separated:
        return Verdict(NAIVE_CONSISTENT)
    return Verdict(NAIVE_INCONSISTENT, witness=result.witness)


def classify_joint(
    g: CausalGraph,
    variables: Iterable[str],
    indicator: str,
) -> Verdict:
    """Classify the joint (or marginal) distribution of ``variables``.

    A direct edge from any queried variable into the indicator makes the
    distribution non-recoverable.  If instead every queried variable is
    d-separated from the indicator unconditionally, censoring is ignorable
    and the naive estimate is consistent.  Anything between is unknown.
    """
    names = sorted(set(variables))
    if not names:
        raise QueryError("joint query needs at least one variable")
    _require_indicator(g, indicator)
    _require_observed(g, names, "queried")
    edge_set = set(g.edges)
    for v in names:
        if (v, indicator) in edge_set:
            return Verdict(NON_RECOVERABLE, witness=f"direct edge {v} -> {indicator}")
    result = d_separated(g, names, {indicator}, ())
    if result.separated:
        return Verdict(NAIVE_CONSISTENT)
    return Verdict(UNKNOWN, witness=result.witness)


_ALIAS_QUERIES = {
    "errorrate": "P(Yhat|Y,Z)",
    "allocationrate": "P(Yhat|Z)",
}

_QUERY_RE = re.compile(r"^P\(([^()|]+)(?:\|([^()|]+))?\)$")


@dataclass(frozen=True)
class DistributionQuery:
    """Parsed form of a distribution query string."""

    targets: tuple[str, ...]
    given: tuple[str, ...]
    indicator: str | None
    raw: str

    @property
    def is_conditional(self) -> bool:
        return bool(self.given)


def parse_query(text: str) -> DistributionQuery:
    """Parse ``P(Y|X,Z)``, ``P(X,Z)`` or the error/allocation-rate aliases.

    An optional ``@IND`` suffix pins the missingness indicator; otherwise
    the graph's unique indicator is used at classification time.
    """
    raw = text.strip()
    body, indicator = raw, None
    if "@" in body:
        body, _, indicator = body.partition("@")
        body = body.strip()
        indicator = indicator.strip()
        if not indicator:
            raise QueryError(f"empty indicator in query {raw!r}")
    normalized = re.sub(r"[\s_-]+", "", body).lower()
    if normalized in _ALIAS_QUERIES:
        body = _ALIAS_QUERIES[normalized]
    m = _QUERY_RE.match(body.replace(" ", ""))
    if m is None:
        raise QueryError(f"cannot parse query {raw!r}")
    targets = tuple(t for t in m.group(1).split(",") if t)
    given = tuple(t for t in (m.group(2) or "").split(",") if t)
    if not targets:
        raise QueryError(f"query {raw!r} names no variables")
    if given and len(targets) != 1:
        raise QueryError(f"conditional query {raw!r} must have a single target")
    return DistributionQuery(targets, given, indicator, raw)


def _resolve_indicator(g: CausalGraph, query: DistributionQuery) -> str:
    if query.indicator is not None:
        return query.indicator
    if len(g.indicators) == 1:
        return g.indicators[0]
    if not g.indicators:
        raise QueryError("graph has no missingness indicator")
    raise QueryError(
        f"graph has several indicators ({', '.join(g.indicators)}); "
        f"qualify the query with @<indicator>"
    )


def classify_query(g: CausalGraph, query: DistributionQuery | str) -> Verdict:
    """Dispatch a distribution query to the conditional or joint rule."""
    if isinstance(query, str):
        query = parse_query(query)
    indicator = _resolve_indicator(g, query)
    if query.is_conditional:
        return classify_conditional(g, query.targets[0], query.given, indicator)
    return classify_joint(g, query.targets, indicator)


@dataclass(frozen=True)
class AuditRecord:
    """One row of an audit report: a query and its verdict or error."""

    query: str
    verdict: str | None = None
    witness: str | None = None
    error: str | None = None

    def as_dict(self) -> dict:
        return {
            "query": self.query,
            "verdict": self.verdict or "",
            "witness": self.witness or "",
            "error": self.error or "",
        }


def audit_report(g: CausalGraph, queries: Sequence[str]) -> list[AuditRecord]:
    """Classify each query, collecting per-query errors instead of raising."""
    records: list[AuditRecord] = []
    for q in queries:
        try:
            verdict = classify_query(g, q)
        except GraphError as exc:
            records.append(AuditRecord(query=q, error=str(exc)))
        else:
            records.append(
                AuditRecord(query=q, verdict=verdict.kind, witness=verdict.witness)
            )
    return records
