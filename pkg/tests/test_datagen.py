import itertools
import json
from pathlib import Path

import hypothesis.strategies as st
import numpy as np
import pytest
from hypothesis import given, settings

from fairselect import models
from fairselect.datagen import (
    CsvSchema,
    DataError,
    Dataset,
    DiscreteScm,
    ScmError,
    ScmVariable,
    ZeroProbabilityError,
    apply_missingness,
    fit_cpt,
    load_csv,
    naive_joint,
    sample_scm,
    true_conditional,
    true_joint,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def coin(name, p1, parents=(), table=None):
    if table is None:
        return ScmVariable(name, 2, (), {(): (1 - p1, p1)})
    return ScmVariable(name, 2, tuple(parents), table)


def chain_scm(p_x=0.5, p_y_given_x=(0.3, 0.8)):
    return DiscreteScm.build(
        [
            coin("X", p_x),
            ScmVariable(
                "Y", 2, ("X",),
                {(0,): (1 - p_y_given_x[0], p_y_given_x[0]),
                 (1,): (1 - p_y_given_x[1], p_y_given_x[1])},
            ),
        ]
    )


class TestScmValidation:
    def test_row_sum_enforced(self):
        with pytest.raises(ScmError, match="sums"):
            DiscreteScm.build([ScmVariable("X", 2, (), {(): (0.5, 0.6)})])

    def test_missing_combo(self):
        with pytest.raises(ScmError, match="every parent combination"):
            DiscreteScm.build([coin("X", 0.5), ScmVariable("Y", 2, ("X",), {(0,): (1, 0)})])

    def test_cardinality_minimum(self):
        with pytest.raises(ScmError, match="cardinality"):
            DiscreteScm.build([ScmVariable("X", 1, (), {(): (1.0,)})])

    def test_parents_must_precede(self):
        with pytest.raises(ScmError, match="topological"):
            DiscreteScm.build(
                [ScmVariable("Y", 2, ("X",), {(0,): (1, 0), (1,): (1, 0)}), coin("X", 0.5)]
            )

    def test_json_round_trip(self):
        scm = models.shipped_scm("fig3iv")
        again = DiscreteScm.from_dict(json.loads(json.dumps(scm.to_dict())))
        assert again == scm

    def test_shipped_config_files_match_builders(self):
        for name in models.SHIPPED_MODEL_NAMES:
            path = CONFIG_DIR / f"scm_{name}.json"
            assert DiscreteScm.from_json(path) == models.shipped_scm(name)


class TestSampling:
    def test_degenerate_cpt(self):
        scm = DiscreteScm.build([coin("X", 1.0)])
        ds = sample_scm(scm, 50, seed=0)
        assert (ds.values["X"] == 1).all()

    def test_binomial_concentration(self):
        scm = DiscreteScm.build([coin("X", 0.5)])
        ds = sample_scm(scm, 100_000, seed=7)
        assert abs(ds.values["X"].mean() - 0.5) < 0.01

    def test_same_seed_identical(self):
        scm = models.shipped_scm("fig3i")
        a = sample_scm(scm, 500, seed=3)
        b = sample_scm(scm, 500, seed=3)
        for col in scm.names:
            assert np.array_equal(a.values[col], b.values[col])

    def test_rejects_empty_sample(self):
        with pytest.raises(DataError):
            sample_scm(chain_scm(), 0, seed=0)

    def test_marginals_within_four_standard_errors(self):
        scm = models.shipped_scm("fig3iv")
        n = 50_000
        ds = sample_scm(scm, n, seed=11)
        for name in scm.names:
            truth = true_conditional(scm, name, {})
            for value, p in enumerate(truth):
                se = np.sqrt(max(p * (1 - p), 1e-12) / n)
                observed = (ds.values[name] == value).mean()
                assert abs(observed - p) < 4 * se + 1e-9, (name, value)


class TestMissingness:
    def scm_with_decision(self):
        return models.shipped_scm("fig3i")

    def test_all_selected_changes_nothing(self):
        scm = DiscreteScm.build([coin("D", 1.0), coin("X", 0.5)])
        ds = sample_scm(scm, 100, seed=0)
        out = apply_missingness(ds, "D", ["X"])
        assert not out.mask["X"].any()
        assert np.array_equal(out.values["X"], ds.values["X"])

    def test_none_selected_masks_everything(self):
        scm = DiscreteScm.build([coin("D", 0.0), coin("X", 0.5)])
        ds = sample_scm(scm, 100, seed=0)
        out = apply_missingness(ds, "D", ["X"])
        assert out.mask["X"].all()

    def test_masked_cell_count(self):
        ds = sample_scm(self.scm_with_decision(), 5_000, seed=1)
        out = apply_missingness(ds, "D", ["X", "Y", "Z"])
        n_zero = int((ds.values["D"] == 0).sum())
        total_masked = sum(int(out.mask[c].sum()) for c in ("X", "Y", "Z"))
        assert total_masked == 3 * n_zero

    def test_decision_column_kept_unmasked(self):
        ds = sample_scm(self.scm_with_decision(), 200, seed=2)
        out = apply_missingness(ds, "D", ["X"])
        assert out.decision == "D"
        assert not out.mask["D"].any()
        assert out.n_rows == ds.n_rows

    def test_non_binary_decision_rejected(self):
        scm = DiscreteScm.build(
            [ScmVariable("T", 3, (), {(): (0.2, 0.3, 0.5)}), coin("X", 0.5)]
        )
        ds = sample_scm(scm, 50, seed=0)
        with pytest.raises(DataError, match="binary"):
            apply_missingness(ds, "T", ["X"])


def manual_dataset(rows, columns):
    names = [c for c, _ in columns]
    arr = np.array(rows, dtype=np.int64)
    return Dataset(
        columns=tuple(columns),
        values={c: arr[:, i].copy() for i, c in enumerate(names)},
        mask={c: np.zeros(len(rows), dtype=bool) for c in names},
    )


class TestFitCpt:
    def test_manual_enumeration(self):
        ds = manual_dataset(
            [(1, 1), (1, 0), (0, 1), (0, 1)], [("X", 2), ("Y", 2)]
        )
        cpt = fit_cpt(ds, "Y", ["X"], smoothing=0.0)
        assert cpt.distribution((1,))[1] == pytest.approx(0.5)
        assert cpt.distribution((0,))[1] == pytest.approx(1.0)

    def test_add_one_smoothing_of_unseen_combo(self):
        ds = manual_dataset([(1, 1)], [("X", 2), ("Y", 2)])
        cpt = fit_cpt(ds, "Y", ["X"], smoothing=1.0)
        assert cpt.distribution((0,))[1] == pytest.approx(0.5)

    def test_unseen_combo_flagged_undefined_without_smoothing(self):
        ds = manual_dataset([(1, 1)], [("X", 2), ("Y", 2)])
        cpt = fit_cpt(ds, "Y", ["X"], smoothing=0.0)
        assert cpt.undefined[cpt.combo_index((0,))]
        with pytest.raises(DataError, match="undefined"):
            cpt.distribution((0,))

    def test_masked_rows_equal_deleted_rows(self):
        ds = sample_scm(models.shipped_scm("fig3i"), 4_000, seed=9)
        censored = apply_missingness(ds, "D", ["X", "Y", "Z"])
        kept = ds.take(np.flatnonzero(ds.values["D"] == 1))
        a = fit_cpt(censored, "Y", ["X", "Z"], smoothing=1.0)
        b = fit_cpt(kept, "Y", ["X", "Z"], smoothing=1.0)
        assert np.allclose(a.probs, b.probs)
        assert np.array_equal(a.counts, b.counts)

    def test_complete_data_matches_independent_count(self):
        # second counting pass: plain dict tally over rows
        rng = np.random.default_rng(4)
        rows = [(int(a), int(b), int(c)) for a, b, c in rng.integers(0, 2, (500, 3))]
        ds = manual_dataset(rows, [("A", 2), ("B", 2), ("C", 2)])
        cpt = fit_cpt(ds, "C", ["A", "B"], smoothing=0.0)
        tally: dict = {}
        for a, b, c in rows:
            tally.setdefault((a, b), [0, 0])
            tally[(a, b)][c] += 1
        for combo, counts in tally.items():
            total = sum(counts)
            for v in (0, 1):
                assert cpt.probs[cpt.combo_index(combo), v] == pytest.approx(
                    counts[v] / total
                )

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.0, 5.0))
    def test_rows_sum_to_one(self, seed, smoothing):
        ds = sample_scm(models.shipped_scm("fig3iv"), 200, seed=seed)
        cpt = fit_cpt(ds, "Y", ["X", "Z"], smoothing=smoothing)
        defined = ~cpt.undefined
        if defined.any():
            assert np.allclose(cpt.probs[defined].sum(axis=1), 1.0, atol=1e-12)

    def test_negative_smoothing_rejected(self):
        ds = manual_dataset([(0, 0)], [("X", 2), ("Y", 2)])
        with pytest.raises(DataError):
            fit_cpt(ds, "Y", ["X"], smoothing=-1.0)


class TestExactOracles:
    def test_chain_reads_cpt(self):
        scm = chain_scm(p_y_given_x=(0.3, 0.8))
        assert true_conditional(scm, "Y", {"X": 1}) == pytest.approx([0.2, 0.8])

    def test_distribution_sums_to_one(self):
        scm = models.shipped_scm("fig3iv")
        for x, z in itertools.product((0, 1), repeat=2):
            dist = true_conditional(scm, "Y", {"X": x, "Z": z})
            assert dist.sum() == pytest.approx(1.0, abs=1e-12)

    def test_zero_probability_event(self):
        scm = DiscreteScm.build([coin("X", 1.0), coin("Y", 0.5)])
        with pytest.raises(ZeroProbabilityError):
            true_conditional(scm, "Y", {"X": 0})

    def test_fig3iv_constructed_gap_exceeds_threshold(self):
        scm = models.shipped_scm("fig3iv")
        for x, z in itertools.product((0, 1), repeat=2):
            truth = true_conditional(scm, "Y", {"X": x, "Z": z})
            censored = true_conditional(scm, "Y", {"X": x, "Z": z, "D": 1})
            assert abs(truth[1] - censored[1]) > 0.05

    def test_true_joint_sums_to_one(self):
        scm = models.shipped_scm("fig3i")
        joint = true_joint(scm, ["X", "Z"])
        assert joint.sum() == pytest.approx(1.0, abs=1e-12)

    def test_naive_joint_matches_manual_count(self):
        ds = manual_dataset([(0, 0), (0, 1), (1, 1), (1, 1)], [("X", 2), ("Z", 2)])
        freq = naive_joint(ds, ["X", "Z"], smoothing=0.0)
        assert freq[0, 0] == pytest.approx(0.25)
        assert freq[1, 1] == pytest.approx(0.5)


class TestCsv:
    def write(self, tmp_path, text):
        path = tmp_path / "data.csv"
        path.write_text(text)
        return path

    def schema(self, **kwargs):
        base = {"sensitive": "z", "outcome": "y", "stages": [["z", "x"]]}
        base.update(kwargs)
        return CsvSchema.from_dict(base)

    def test_two_row_file_stable_encoding(self, tmp_path):
        path = self.write(tmp_path, "z,x,y\nm,hi,1\nf,lo,0\n")
        ds = load_csv(path, self.schema())
        assert ds.n_rows == 2
        assert ds.labels["z"] == ("m", "f")
        assert list(ds.values["z"]) == [0, 1]
        again = load_csv(path, self.schema())
        assert np.array_equal(ds.values["x"], again.values["x"])

    def test_na_and_empty_fields_masked(self, tmp_path):
        path = self.write(tmp_path, "z,x,y\n0,NA,1\n1,,0\n0,hi,1\n")
        ds = load_csv(path, self.schema())
        assert list(ds.mask["x"]) == [True, True, False]

    def test_ragged_row_names_line(self, tmp_path):
        path = self.write(tmp_path, "z,x,y\n0,1,1\n0,1\n")
        with pytest.raises(DataError, match="row 3"):
            load_csv(path, self.schema())

    def test_unknown_schema_column(self, tmp_path):
        path = self.write(tmp_path, "z,x,y\n0,1,1\n")
        with pytest.raises(DataError, match="unknown columns: q"):
            load_csv(path, self.schema(stages=[["q"]]))

    def test_decision_column_literal_codes(self, tmp_path):
        path = self.write(tmp_path, "z,x,y,d\n0,1,1,1\n1,0,0,0\n1,1,1,1\n")
        ds = load_csv(path, self.schema(decision="d"))
        assert ds.decision == "d"
        assert list(ds.values["d"]) == [1, 0, 1]

    def test_non_binary_decision_rejected(self, tmp_path):
        path = self.write(tmp_path, "z,x,y,d\n0,1,1,yes\n")
        with pytest.raises(DataError, match="0/1"):
            load_csv(path, self.schema(decision="d"))

    def test_high_cardinality_rejected(self, tmp_path):
        rows = "\n".join(f"0,val{i},1" for i in range(80))
        path = self.write(tmp_path, "z,x,y\n" + rows + "\n")
        with pytest.raises(DataError, match="not categorical"):
            load_csv(path, self.schema())

    def test_sample_files_load(self):
        root = Path(__file__).resolve().parent.parent
        schema = CsvSchema.from_json(root / "configs" / "schema_pool.json")
        ds = load_csv(root / "data" / "sample_pool.csv", schema)
        assert ds.n_rows == 80
        missing_schema = CsvSchema.from_dict(
            {"sensitive": "z", "outcome": "y", "decision": "d",
             "stages": [["z", "x1"], ["z", "x1", "x2"]]}
        )
        ds2 = load_csv(root / "data" / "sample_missing.csv", missing_schema)
        assert ds2.mask["x2"].sum() == 2
        assert ds2.mask["y"].sum() == 2
