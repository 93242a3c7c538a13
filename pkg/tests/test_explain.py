import numpy as np
import pytest

from tmrec.exceptions import DimensionError, RangeError
from tmrec.explain import (
    beeswarm_export,
    clause_inclusion_matrix,
    exact_shapley,
    explain_prediction,
    inclusion_stats,
    shapley_attribute,
)
from tmrec.tm import TMConfig, TsetlinMachine


def fresh_model(classes=3, features=4, clauses=4):
    cfg = TMConfig(num_features=features, num_classes=classes,
                   clauses_per_class=clauses, threshold=4, seed=0)
    return TsetlinMachine(cfg, backend="python")


def rule_model():
    """Class 0 fires on x0 & ~x1; class 1 on x1; class 2 never."""
    model = fresh_model()
    model.set_clause(0, 0, [0, 5])   # literal 5 is ~x1
    model.set_clause(1, 0, [1])
    return model


def test_fresh_matrix_is_all_false():
    inc = clause_inclusion_matrix(fresh_model(), 0)
    assert inc.matrix.shape == (4, 8)
    assert not inc.matrix.any()
    assert inc.to_pairs() == []


def test_matrix_reflects_set_clauses():
    inc = clause_inclusion_matrix(rule_model(), 0)
    assert inc.to_pairs() == [(0, 0), (0, 5)]
    assert inc.positive_rows.sum() == 2
    assert inc.negative_rows.sum() == 0
    with pytest.raises(RangeError):
        clause_inclusion_matrix(rule_model(), 7)


def test_matrix_matches_include_mask():
    model = rule_model()
    for c in range(3):
        assert np.array_equal(clause_inclusion_matrix(model, c).matrix,
                              model.include_mask(c))


def test_inclusion_stats_fresh():
    stats = inclusion_stats(fresh_model())
    assert stats.mean_inclusion_rate == 0.0
    assert all(row.pos == row.neg == 0 for row in stats.rows)
    assert stats.feature_positive_inclusions.tolist() == [0.0] * 4


def test_inclusion_stats_counts_literal_kinds():
    model = rule_model()
    model.set_clause(0, 1, [2, 6])   # negative-polarity clause: x2 & ~x2
    stats = inclusion_stats(model)
    row = {r.class_id: r for r in stats.rows}[0]
    assert row.pos == 1          # x0 in a positive clause
    assert row.not_pos == 1      # ~x1 in a positive clause
    assert row.neg == 1          # x2 in a negative clause
    assert row.not_neg == 1      # ~x2 in a negative clause
    # per-feature tally counts plain literals of positive clauses (all classes),
    # so class 1's x1 clause shows up too
    assert stats.feature_positive_inclusions.tolist() == [1, 1, 0, 0]
    total_included = sum(r.pos + r.not_pos + r.neg + r.not_neg for r in stats.rows)
    assert stats.mean_inclusion_rate == pytest.approx(total_included / (3 * 4 * 8))


def test_inclusion_stats_ordering_by_prediction_count():
    stats = inclusion_stats(fresh_model(), prediction_counts={2: 10, 0: 3, 1: 3})
    assert [r.class_id for r in stats.rows] == [2, 0, 1]
    assert [r.prediction_count for r in stats.rows] == [10, 3, 3]
    doc = stats.to_json()
    assert [r["class_id"] for r in doc["rows"]] == [2, 0, 1]


def test_explanation_on_planted_rule():
    model = rule_model()
    x = np.array([1, 0, 0, 0], dtype=np.uint8)
    exp = explain_prediction(model, x)
    assert exp.predicted_class == 0
    assert exp.score(0) == 1
    contribs = exp.contributions[0]
    assert len(contribs) == 1
    assert contribs[0].clause_index == 0
    assert contribs[0].polarity == 1
    assert contribs[0].satisfied_literals == ("x0", "~x1")


def test_explanation_contributions_sum_to_scores():
    rs = np.random.RandomState(0)
    model = fresh_model(classes=4, features=6, clauses=6)
    for c in range(4):
        for j in range(6):
            lits = rs.choice(12, size=rs.randint(0, 4), replace=False)
            model.set_clause(c, j, sorted(int(v) for v in lits))
    for _ in range(100):
        x = rs.randint(0, 2, size=6).astype(np.uint8)
        exp = explain_prediction(model, x)
        scores = model.class_scores(x[None, :])[0]
        for c in range(4):
            total = sum(k.polarity for k in exp.contributions[c])
            assert total == scores[c]
        ranked_scores = [s for _, s in exp.ranked]
        assert ranked_scores == sorted(ranked_scores, reverse=True)


def test_explanation_on_fresh_model_ties_to_class_zero():
    exp = explain_prediction(fresh_model(), np.zeros(4, dtype=np.uint8))
    assert exp.predicted_class == 0
    assert all(not v for v in exp.contributions.values())


def test_counterfactual_flip():
    model = rule_model()
    x = np.array([1, 0, 0, 0], dtype=np.uint8)
    exp = explain_prediction(model, x, counterfactual_budget=4)
    flips = {(n.feature, n.flipped_to): n.new_prediction for n in exp.counterfactuals}
    # turning x1 on both kills the class-0 clause and fires class 1
    assert flips[(1, 1)] == 1
    assert (2, 1) not in flips  # flips that keep the prediction are dropped
    assert explain_prediction(model, x, counterfactual_budget=0).counterfactuals == ()


def linear_scorer(weights):
    w = np.asarray(weights, dtype=np.float64)
    return lambda X: np.asarray(X, dtype=np.float64) @ w


def test_shapley_constant_scorer_is_zero():
    report = shapley_attribute(lambda X: np.full(len(np.atleast_2d(X)), 3.25),
                               background=np.zeros((5, 4)),
                               x=np.ones(4), n_permutations=50, seed=1)
    assert report.attributions == pytest.approx(np.zeros(4), abs=1e-12)
    assert report.prediction == pytest.approx(3.25)
    assert report.baseline == pytest.approx(3.25)


def test_shapley_additive_closed_form():
    rs = np.random.RandomState(2)
    w = rs.randn(5)
    b = rs.randn(5)
    x = rs.randint(0, 2, size=5).astype(float)
    # with one reference row every permutation yields w_i * (x_i - b_i) exactly
    report = shapley_attribute(linear_scorer(w), b[None, :], x,
                               n_permutations=40, seed=0)
    assert report.attributions == pytest.approx(w * (x - b), abs=1e-9)
    assert report.standard_errors == pytest.approx(np.zeros(5), abs=1e-9)
    # with a sampled background it converges to w_i * (x_i - mean b_i)
    background = rs.randint(0, 2, size=(20, 5)).astype(float)
    sampled = shapley_attribute(linear_scorer(w), background, x,
                                n_permutations=2000, seed=1)
    loose = w * (x - background.mean(axis=0))
    assert sampled.attributions == pytest.approx(loose, abs=0.1)


def test_shapley_efficiency():
    rs = np.random.RandomState(3)
    background = rs.randn(12, 6)
    x = rs.randn(6)

    def scorer(X):
        X = np.atleast_2d(X)
        return X[:, 0] * X[:, 1] + np.sin(X[:, 2]) + X[:, 3:].sum(axis=1)

    report = exact_shapley(scorer, background, x)
    assert report.attributions.sum() == pytest.approx(
        report.prediction - report.baseline, abs=1e-9)


def test_sampled_matches_exact():
    rs = np.random.RandomState(4)
    background = rs.randint(0, 2, size=(10, 6)).astype(float)
    x = rs.randint(0, 2, size=6).astype(float)

    def scorer(X):
        X = np.atleast_2d(X)
        return X[:, 0] * X[:, 1] * 2.0 - X[:, 2] + X[:, 3] * X[:, 4] * X[:, 5]

    exact = exact_shapley(scorer, background, x)
    sampled = shapley_attribute(scorer, background, x, n_permutations=2000, seed=0)
    assert sampled.attributions == pytest.approx(exact.attributions, abs=0.05)
    assert sampled.n_permutations == 2000
    assert (sampled.standard_errors >= 0).all()


def test_exact_shapley_symmetry():
    background = np.zeros((4, 4))
    x = np.ones(4)

    def scorer(X):   # symmetric in features 0 and 1
        X = np.atleast_2d(X)
        return X[:, 0] + X[:, 1] + 3.0 * X[:, 2]

    report = exact_shapley(scorer, background, x)
    assert report.attributions[0] == pytest.approx(report.attributions[1], abs=1e-12)
    assert report.attributions[3] == pytest.approx(0.0, abs=1e-12)


def test_exact_shapley_feature_limit():
    with pytest.raises(RangeError):
        exact_shapley(lambda X: np.zeros(len(np.atleast_2d(X))),
                      np.zeros((2, 17)), np.zeros(17))


def test_shapley_class_column_selection():
    def two_class(X):
        X = np.atleast_2d(X)
        return np.stack([X[:, 0], 2.0 * X[:, 1]], axis=1)

    background = np.zeros((3, 2))
    x = np.ones(2)
    col0 = exact_shapley(two_class, background, x, class_id=0)
    col1 = exact_shapley(two_class, background, x, class_id=1)
    assert col0.attributions == pytest.approx([1.0, 0.0], abs=1e-12)
    assert col1.attributions == pytest.approx([0.0, 2.0], abs=1e-12)


def test_shapley_scorer_failure_names_permutation():
    calls = {"n": 0}

    def flaky(X):
        calls["n"] += 1
        if calls["n"] > 3:
            raise ValueError("backend exploded")
        return np.zeros(len(np.atleast_2d(X)))

    with pytest.raises(ValueError, match=r"scorer failed at permutation \d+") as info:
        shapley_attribute(flaky, np.zeros((2, 3)), np.zeros(3),
                          n_permutations=10, seed=0)
    assert "backend exploded" in info.value.args


def test_shapley_input_validation():
    scorer = lambda X: np.zeros(len(np.atleast_2d(X)))  # noqa: E731
    with pytest.raises(DimensionError):
        shapley_attribute(scorer, np.zeros((3, 4)), np.zeros(5), n_permutations=5)
    with pytest.raises(RangeError):
        shapley_attribute(scorer, np.zeros((3, 4)), np.zeros(4), n_permutations=0)


def make_reports(seed=0):
    rs = np.random.RandomState(seed)
    w = np.array([5.0, 0.1, -3.0, 0.0])
    background = rs.randint(0, 2, size=(15, 4)).astype(float)
    reports = []
    for _ in range(6):
        x = rs.randint(0, 2, size=4).astype(float)
        reports.append(shapley_attribute(linear_scorer(w), background, x,
                                         n_permutations=100, seed=7))
    return reports


def test_beeswarm_export_shape_and_top_feature():
    rows = beeswarm_export(make_reports(), top_m=2)
    assert len(rows) == 6 * 2
    assert set(r["feature"] for r in rows) <= {0, 1, 2, 3}
    # the heaviest |weight| feature dominates mean-|attribution| ranking
    top = max(rows, key=lambda r: r["mean_abs_attribution"])
    assert top["feature"] == 0
    for row in rows:
        assert set(row) == {"report", "feature", "attribution",
                            "feature_value", "mean_abs_attribution"}


def test_beeswarm_selection_stable_under_report_permutation():
    reports = make_reports()
    features = lambda rows: sorted(set(r["feature"] for r in rows))  # noqa: E731
    assert features(beeswarm_export(reports, top_m=2)) == \
        features(beeswarm_export(list(reversed(reports)), top_m=2))


def test_beeswarm_csv(tmp_path):
    from tmrec.explain import write_beeswarm_csv

    path = tmp_path / "swarm.csv"
    write_beeswarm_csv(beeswarm_export(make_reports(), top_m=3), path)
    lines = path.read_text().strip().splitlines()
    assert lines[0].split(",")[:2] == ["report", "feature"]
    assert len(lines) == 1 + 6 * 3
