"""Built-in catalog of decision-driven missingness mechanisms.

Each scenario is a named causal graph in which a past selection decision
gates what the training data records, together with the distribution
queries whose censoring behaviour is known for that mechanism.  The
catalog covers screening by a fully automated rule (fig3i, fig3ii), by a
human with access to unrecorded information (fig3iii, fig3iv), by a human
advised by an algorithm (fig3v, fig3vi), the classifier-audit setting
(fig2) and a two-round screening pipeline (fig4_stage1, fig4_stage2).

The edge sets are reconstructions from prose descriptions of the
mechanisms, fixed here as the canonical fixtures; the expectation lists
double as the regression suite for the verdict engine.
"""

from __future__ import annotations

from dataclasses import dataclass

from .graphs import (
    LATENT,
    MISSING,
    NAIVE_CONSISTENT,
    NAIVE_INCONSISTENT,
    NON_RECOVERABLE,
    OBSERVED,
    CausalGraph,
)


@dataclass(frozen=True)
class Expectation:
    """A query, the verdict it must receive, and why."""

    query: str
    verdict: str
    note: str


@dataclass(frozen=True)
class Scenario:
    name: str
    description: str
    graph: CausalGraph
    expected: tuple[Expectation, ...]


def _g(nodes, edges, bindings) -> CausalGraph:
    return CausalGraph.build(nodes, edges, bindings)


_FIG3I_NODES = {"X": OBSERVED, "Y": OBSERVED, "Z": OBSERVED, "D": MISSING}
_FIG3I_EDGES = [("Z", "X"), ("X", "Y"), ("X", "D"), ("Z", "D")]
_FIG3I_BINDS = {"X": "D", "Y": "D", "Z": "D"}


def _catalog() -> dict[str, Scenario]:
    scenarios: dict[str, Scenario] = {}

    fig2 = _g(
        {"X": OBSERVED, "Y": OBSERVED, "Yhat": OBSERVED, "Z": OBSERVED, "D": MISSING},
        _FIG3I_EDGES + [("X", "Yhat"), ("Z", "Yhat")],
        _FIG3I_BINDS,
    )
    scenarios["fig2"] = Scenario(
        name="fig2",
        description=(
            "Auditing a trained classifier Yhat when rows are recorded only "
            "for positive past decisions D based on X and Z"
        ),
        graph=fig2,
        expected=(
            Expectation(
                "P(Yhat|Y,Z)",
                NAIVE_INCONSISTENT,
                "group error rates estimated on the selected rows do not "
                "converge to the population error rates",
            ),
            Expectation(
                "P(Yhat|Z)",
                NAIVE_INCONSISTENT,
                "group allocation rates estimated on the selected rows do "
                "not converge to the population allocation rates",
            ),
        ),
    )

    fig3i = _g(_FIG3I_NODES, _FIG3I_EDGES, _FIG3I_BINDS)
    scenarios["fig3i"] = Scenario(
        name="fig3i",
        description="Fully automated decision from the recorded features X and Z",
        graph=fig3i,
        expected=(
            Expectation("P(Y|X)", NAIVE_CONSISTENT, "outcome depends on D only through X"),
            Expectation("P(Y|X,Z)", NAIVE_CONSISTENT, "conditioning set blocks every path to D"),
            Expectation("P(X)", NON_RECOVERABLE, "X feeds the decision directly"),
            Expectation("P(X,Z)", NON_RECOVERABLE, "X feeds the decision directly"),
        ),
    )

    fig3ii = _g(_FIG3I_NODES, _FIG3I_EDGES + [("Z", "Y")], _FIG3I_BINDS)
    scenarios["fig3ii"] = Scenario(
        name="fig3ii",
        description=(
            "Fully automated decision where the sensitive attribute Z also "
            "affects the outcome directly"
        ),
        graph=fig3ii,
        expected=(
            Expectation("P(Y|X,Z)", NAIVE_CONSISTENT, "conditioning on Z closes the extra path"),
            Expectation(
                "P(Y|X)",
                NAIVE_INCONSISTENT,
                "the unconditioned fork at Z keeps Y tied to the decision",
            ),
        ),
    )

    fig3iii = _g(
        {**_FIG3I_NODES, "U": LATENT},
        _FIG3I_EDGES + [("U", "X"), ("U", "D")],
        _FIG3I_BINDS,
    )
    scenarios["fig3iii"] = Scenario(
        name="fig3iii",
        description=(
            "Human decision using unrecorded information U that affects the "
            "outcome only through the recorded features"
        ),
        graph=fig3iii,
        expected=(
            Expectation("P(Y|X,Z)", NAIVE_CONSISTENT, "U reaches Y only through the conditioned X"),
        ),
    )

    fig3iv = _g(
        {**_FIG3I_NODES, "U": LATENT},
        _FIG3I_EDGES + [("U", "Y"), ("U", "D")],
        _FIG3I_BINDS,
    )
    scenarios["fig3iv"] = Scenario(
        name="fig3iv",
        description=(
            "Human decision using unrecorded information U that affects the "
            "outcome directly"
        ),
        graph=fig3iv,
        expected=(
            Expectation(
                "P(Y|X,Z)",
                NAIVE_INCONSISTENT,
                "open path through the latent U; the stronger known result is "
                "that no estimator recovers this conditional in this mechanism",
            ),
        ),
    )

    fig3v = _g(
        {**_FIG3I_NODES, "Da": OBSERVED},
        _FIG3I_EDGES + [("X", "Da"), ("Z", "Da"), ("Da", "D")],
        _FIG3I_BINDS,
    )
    scenarios["fig3v"] = Scenario(
        name="fig3v",
        description=(
            "Machine-aided decision: an algorithmic recommendation Da feeds "
            "the human decision"
        ),
        graph=fig3v,
        expected=(
            Expectation(
                "P(Y|X,Z)",
                NAIVE_CONSISTENT,
                "the recommendation adds no open path once X and Z are conditioned",
            ),
        ),
    )

    fig3vi = _g(
        {**_FIG3I_NODES, "Da": OBSERVED, "U": LATENT},
        _FIG3I_EDGES + [("X", "Da"), ("Z", "Da"), ("Da", "D"), ("U", "Y"), ("U", "D")],
        _FIG3I_BINDS,
    )
    scenarios["fig3vi"] = Scenario(
        name="fig3vi",
        description=(
            "Machine-aided decision where the human also uses unrecorded "
            "information U that affects the outcome directly"
        ),
        graph=fig3vi,
        expected=(
            Expectation(
                "P(Y|X,Z)",
                NAIVE_INCONSISTENT,
                "open path through the latent U; the stronger known result is "
                "that no estimator recovers this conditional in this mechanism",
            ),
        ),
    )

    fig4_stage1 = _g(
        {"X1": OBSERVED, "X2": OBSERVED, "Y": OBSERVED, "D1": MISSING},
        [("X1", "D1"), ("X1", "X2"), ("X1", "Y"), ("X2", "Y")],
        {"X1": "D1", "X2": "D1"},
    )
    scenarios["fig4_stage1"] = Scenario(
        name="fig4_stage1",
        description=(
            "First round of a two-round screening: D1 decides from X1 and "
            "gates whether X1 is recorded and X2 is ever collected"
        ),
        graph=fig4_stage1,
        expected=(
            Expectation(
                "P(Y|X1)",
                NAIVE_CONSISTENT,
                "the round-1 risk score survives round-1 censoring",
            ),
        ),
    )

    fig4_stage2 = _g(
        {"X1": OBSERVED, "X2": OBSERVED, "Y": OBSERVED, "D1": MISSING, "D2": MISSING},
        [
            ("X1", "D1"),
            ("X1", "X2"),
            ("X1", "Y"),
            ("X2", "Y"),
            ("X1", "D2"),
            ("X2", "D2"),
        ],
        {"X2": "D1", "X1": "D2", "Y": "D2"},
    )
    scenarios["fig4_stage2"] = Scenario(
        name="fig4_stage2",
        description=(
            "Full two-round screening: D2 decides from X1 and X2, and the "
            "outcome Y is recorded only for finally selected individuals"
        ),
        graph=fig4_stage2,
        expected=(
            Expectation(
                "P(Y|X1,X2)@D2",
                NAIVE_CONSISTENT,
                "the round-2 risk score survives round-2 censoring",
            ),
            Expectation(
                "P(X1,X2)@D2",
                NON_RECOVERABLE,
                "both feature blocks feed the final decision directly, so "
                "their joint distribution cannot be recovered",
            ),
        ),
    )

    return scenarios


_SCENARIOS = _catalog()

SCENARIO_NAMES = tuple(sorted(_SCENARIOS))


def get_scenario(name: str) -> Scenario:
    """Return the canonical fixture for ``name``; see :data:`SCENARIO_NAMES`."""
    try:
        return _SCENARIOS[name]
    except KeyError:
        known = ", ".join(SCENARIO_NAMES)
        raise KeyError(f"unknown scenario {name!r} (known: {known})") from None


def list_scenarios() -> list[tuple[str, str]]:
    """All scenario names with their one-line descriptions, sorted by name."""
    return [(name, _SCENARIOS[name].description) for name in SCENARIO_NAMES]


def scenario_file_text(name: str) -> str:
    """Canonical graph-file content for a scenario, as shipped in scenarios/."""
    sc = get_scenario(name)
    return sc.graph.to_text(header=[f"{sc.name}: {sc.description}"])
