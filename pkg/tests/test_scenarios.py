from pathlib import Path

import pytest

from fairselect.graphs import (
    LATENT,
    MISSING,
    NAIVE_INCONSISTENT,
    OBSERVED,
    CausalGraph,
    classify_query,
    parse_graph,
)
from fairselect.scenarios import (
    SCENARIO_NAMES,
    get_scenario,
    list_scenarios,
    scenario_file_text,
)

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


def test_catalog_has_nine_entries():
    entries = list_scenarios()
    assert len(entries) == 9
    assert [name for name, _ in entries] == sorted(name for name, _ in entries)


def test_descriptions_non_empty_and_names_round_trip():
    for name, description in list_scenarios():
        assert description
        assert get_scenario(name).name == name


def test_unknown_name():
    with pytest.raises(KeyError, match="nosuch"):
        get_scenario("nosuch")


def test_fig3i_canonical_edges():
    expected = CausalGraph.build(
        {"X": OBSERVED, "Y": OBSERVED, "Z": OBSERVED, "D": MISSING},
        [("Z", "X"), ("X", "Y"), ("X", "D"), ("Z", "D")],
        {"X": "D", "Y": "D", "Z": "D"},
    )
    assert get_scenario("fig3i").graph == expected


def test_fig3iv_is_fig3i_plus_latent_confounder():
    base = get_scenario("fig3i").graph
    expected = CausalGraph.build(
        dict(base.nodes) | {"U": LATENT},
        list(base.edges) + [("U", "Y"), ("U", "D")],
        dict(base.bindings),
    )
    assert get_scenario("fig3iv").graph == expected


def test_repeated_calls_structurally_equal():
    for name in SCENARIO_NAMES:
        assert get_scenario(name).graph == get_scenario(name).graph


def test_every_expected_verdict_reproduced():
    for name in SCENARIO_NAMES:
        sc = get_scenario(name)
        for exp in sc.expected:
            verdict = classify_query(sc.graph, exp.query)
            assert verdict.kind == exp.verdict, (name, exp.query)


def test_shipped_graph_files_byte_identical():
    for name in SCENARIO_NAMES:
        path = SCENARIO_DIR / f"{name}.graph"
        assert path.read_text() == scenario_file_text(name)


def test_shipped_graph_files_parse_to_fixture():
    for name in SCENARIO_NAMES:
        path = SCENARIO_DIR / f"{name}.graph"
        assert parse_graph(path.read_text()) == get_scenario(name).graph


def test_fig2_verdicts_insensitive_to_classifier_using_z():
    # the audit claims hold whether or not the classifier reads Z directly
    base = get_scenario("fig2")
    variant = CausalGraph.build(
        dict(base.graph.nodes),
        [e for e in base.graph.edges if e != ("Z", "Yhat")],
        dict(base.graph.bindings),
    )
    for graph in (base.graph, variant):
        for query in ("P(Yhat|Y,Z)", "P(Yhat|Z)"):
            assert classify_query(graph, query).kind == NAIVE_INCONSISTENT


def test_stage_fixtures_have_one_and_two_indicators():
    assert get_scenario("fig4_stage1").graph.indicators == ("D1",)
    assert get_scenario("fig4_stage2").graph.indicators == ("D1", "D2")
