import numpy as np
import pandas as pd
import pytest

from tmrec.dataset import (
    PlantedRule,
    SyntheticSpec,
    export_csv_dir,
    generate_synthetic,
    load_tables,
    planted_classification,
    temporal_split,
    top_items,
    topk_subset,
    xor_dataset,
)
from tmrec.exceptions import (
    ConfigError,
    DataError,
    IntegrityError,
    RangeError,
    SchemaError,
)


def write_tables(tmp_path, tx_rows, customers=("c1", "c2"), items=("i1", "i2")):
    tx = tmp_path / "transactions.csv"
    cu = tmp_path / "customers.csv"
    it = tmp_path / "articles.csv"
    header = "t_dat,customer_id,article_id,price,sales_channel_id\n"
    tx.write_text(header + "".join(f"{r}\n" for r in tx_rows))
    cu.write_text("customer_id,age\n" + "".join(f"{c},30\n" for c in customers))
    it.write_text("article_id,group\n" + "".join(f"{i},G\n" for i in items))
    return tx, cu, it


def test_load_tables_happy_path(tmp_path):
    paths = write_tables(tmp_path, [
        "2020-01-01,c1,i1,0.5,1",
        "2020-01-02,c1,i2,0.2,2",
        "2020-01-03,c2,i1,0.5,1",
    ])
    log = load_tables(*paths)
    assert log.n_transactions == 3
    assert list(log.transactions.columns[:3]) == ["date", "customer_id", "item_id"]
    assert log.transactions["date"].dtype.kind == "M"
    assert log.customer_record("c1")["age"] == 30
    assert log.item_record("i2")["group"] == "G"
    assert log.item_counts()["i1"] == 2


def test_load_tables_unknown_item(tmp_path):
    paths = write_tables(tmp_path, ["2020-01-01,c1,i9,0.5,1"])
    with pytest.raises(IntegrityError, match="i9"):
        load_tables(*paths)


def test_load_tables_unknown_customer(tmp_path):
    paths = write_tables(tmp_path, ["2020-01-01,c9,i1,0.5,1"])
    with pytest.raises(IntegrityError, match="c9"):
        load_tables(*paths)


def test_load_tables_empty(tmp_path):
    paths = write_tables(tmp_path, [])
    with pytest.raises(DataError):
        load_tables(*paths)


def test_load_tables_missing_column(tmp_path):
    paths = write_tables(tmp_path, ["2020-01-01,c1,i1,0.5,1"])
    paths[0].write_text("t_dat,customer_id,price\n2020-01-01,c1,0.5\n")
    with pytest.raises(SchemaError, match="article_id"):
        load_tables(*paths)


def test_load_tables_bad_date(tmp_path):
    paths = write_tables(tmp_path, ["not-a-date,c1,i1,0.5,1"])
    with pytest.raises(DataError):
        load_tables(*paths)


def day_log(tmp_path, days):
    rows = [f"2020-01-{d:02d},c1,i1,0.1,1" for d in days]
    return load_tables(*write_tables(tmp_path, rows))


def test_split_all_rows_in_test_warns(tmp_path):
    log = day_log(tmp_path, [5])
    with pytest.warns(UserWarning):
        split = temporal_split(log, cutoff_days=30)
    assert split.train.n_transactions == 0
    assert split.test.n_transactions == 1


def test_split_partitions_sixty_days(tmp_path):
    rows = [f"2020-01-{d:02d},c1,i1,0.1,1" for d in range(1, 32)]
    rows += [f"2020-02-{d:02d},c1,i1,0.1,1" for d in range(1, 30)]
    log = load_tables(*write_tables(tmp_path, rows))
    split = temporal_split(log, cutoff_days=30)
    # max date is Feb 29; test is everything strictly after Jan 30
    assert split.cutoff_date == pd.Timestamp("2020-01-30")
    assert split.train.n_transactions + split.test.n_transactions == 60
    assert split.test.n_transactions == 30
    assert (split.train.transactions["date"] <= split.cutoff_date).all()
    assert (split.test.transactions["date"] > split.cutoff_date).all()


def test_split_cutoff_zero_puts_nothing_in_test(tmp_path):
    log = day_log(tmp_path, [1, 2, 3])
    split = temporal_split(log, cutoff_days=0)
    assert split.test.n_transactions == 0
    assert split.train.n_transactions == 3
    with pytest.raises(RangeError):
        temporal_split(log, cutoff_days=-1)


def counts_log(tmp_path):
    rows = (["2020-01-01,c1,iA,0.1,1"] * 5
            + ["2020-01-02,c2,iB,0.1,1"] * 3
            + ["2020-01-03,c2,iC,0.1,1"])
    return load_tables(*write_tables(
        tmp_path, rows, customers=("c1", "c2"), items=("iA", "iB", "iC")))


def test_top_items_fixture(tmp_path):
    log = counts_log(tmp_path)
    assert top_items(log, 2) == ["iA", "iB"]
    assert top_items(log, 99) == ["iA", "iB", "iC"]


def test_top_items_tie_break_ascending(tmp_path):
    rows = ["2020-01-01,c1,iB,0.1,1", "2020-01-01,c1,iA,0.1,1"]
    log = load_tables(*write_tables(tmp_path, rows, items=("iA", "iB")))
    assert top_items(log, 2) == ["iA", "iB"]


def test_topk_subset(tmp_path):
    log = counts_log(tmp_path)
    sub = topk_subset(log, 2)
    assert set(sub.transactions["item_id"]) == {"iA", "iB"}
    assert set(sub.items["item_id"]) == {"iA", "iB"}
    assert set(sub.customers["customer_id"]) == {"c1", "c2"}
    assert sub.n_transactions == 8
    # c2's only remaining purchases are iB; a customer with none left is dropped
    one = topk_subset(log, 1)
    assert set(one.customers["customer_id"]) == {"c1"}
    # k >= distinct items is the identity
    assert topk_subset(log, 3).n_transactions == log.n_transactions


def test_topk_subsets_are_monotone(tmp_path):
    log = counts_log(tmp_path)
    small = set(map(tuple, topk_subset(log, 1).transactions[["customer_id", "item_id"]].values))
    big = set(map(tuple, topk_subset(log, 2).transactions[["customer_id", "item_id"]].values))
    assert small <= big


RULES = (PlantedRule(((0, 1), (1, 0)), 0),
         PlantedRule(((2, 1),), 1))


def test_synthetic_noise_zero_forces_rules():
    spec = SyntheticSpec(num_customers=40, num_items=6, num_features=4,
                         planted_rules=RULES, noise_rate=0.0,
                         purchases_per_customer=8, seed=1)
    log, truth = generate_synthetic(spec)
    assert log.n_transactions == 40 * 8
    assert not truth["noisy"].any()
    customers = log.customers.set_index("customer_id")
    for _, row in truth.iterrows():
        attrs = customers.loc[row["customer_id"]]
        if row["rule_index"] >= 0:
            rule = RULES[row["rule_index"]]
            assert all(int(attrs[f"attr{f}"]) == bit for f, bit in rule.conditions)
            assert row["intended_item"] == f"i{rule.item:04d}"
        else:
            # fallback customers match neither planted rule
            assert not (int(attrs["attr0"]) == 1 and int(attrs["attr1"]) == 0)
            assert int(attrs["attr2"]) != 1
    # every transaction matches its intended item when noise is off
    by_step = log.transactions.sort_values(["customer_id", "date"], kind="stable")
    by_truth = truth.sort_values(["customer_id", "step"], kind="stable")
    assert by_step["item_id"].tolist() == by_truth["intended_item"].tolist()


def test_synthetic_noise_one_is_uniform():
    spec = SyntheticSpec(num_customers=60, num_items=5, num_features=4,
                         planted_rules=RULES, noise_rate=1.0,
                         purchases_per_customer=20, seed=2)
    log, truth = generate_synthetic(spec)
    assert truth["noisy"].all()
    counts = log.transactions["item_id"].value_counts()
    observed = np.array([counts.get(f"i{j:04d}", 0) for j in range(5)], float)
    expected = observed.sum() / 5
    chi2 = ((observed - expected) ** 2 / expected).sum()
    # chi-square critical value at 4 dof, 99.9th percentile
    assert chi2 < 18.47


def test_synthetic_seed_determinism():
    spec = SyntheticSpec(num_customers=25, num_items=5, num_features=4,
                         planted_rules=RULES, seed=9)
    log_a, truth_a = generate_synthetic(spec)
    log_b, truth_b = generate_synthetic(spec)
    assert log_a.transactions.equals(log_b.transactions)
    assert truth_a.equals(truth_b)
    log_c, _ = generate_synthetic(
        SyntheticSpec(num_customers=25, num_items=5, num_features=4,
                      planted_rules=RULES, seed=10))
    assert not log_a.transactions.equals(log_c.transactions)


def test_synthetic_dates_span_cutoff():
    spec = SyntheticSpec(num_customers=10, num_items=4, num_features=3,
                         planted_rules=(), purchases_per_customer=12,
                         days_between_purchases=5, seed=0)
    log, _ = generate_synthetic(spec)
    span = log.transactions["date"].max() - log.transactions["date"].min()
    assert span == pd.Timedelta(days=55)


def test_synthetic_spec_validation():
    with pytest.raises(ConfigError):
        SyntheticSpec(num_customers=0, num_items=4, num_features=3,
                      planted_rules=())
    with pytest.raises(ConfigError):
        SyntheticSpec(num_customers=5, num_items=4, num_features=3,
                      planted_rules=(), noise_rate=1.5)
    with pytest.raises(ConfigError):
        SyntheticSpec(num_customers=5, num_items=4, num_features=3,
                      planted_rules=(PlantedRule(((7, 1),), 0),))


def test_export_round_trip(tmp_path):
    spec = SyntheticSpec(num_customers=12, num_items=5, num_features=4,
                         planted_rules=RULES, seed=4)
    log, _ = generate_synthetic(spec)
    paths = export_csv_dir(log, tmp_path)
    loaded = load_tables(paths["transactions"], paths["customers"], paths["articles"])
    assert loaded.n_transactions == log.n_transactions
    assert loaded.transactions["date"].equals(log.transactions["date"])
    assert sorted(loaded.items["item_id"]) == sorted(log.items["item_id"])


def test_planted_classification_shapes_and_rules():
    X_tr, y_tr, X_te, y_te, rules = planted_classification()
    assert X_tr.shape == (5000, 40) and y_tr.shape == (5000,)
    assert X_te.shape == (1000, 40) and y_te.shape == (1000,)
    assert X_tr.dtype == np.uint8
    assert sorted(set(y_tr.tolist())) == list(range(16))
    assert len(rules) == 16
    for c, rule in enumerate(rules):
        assert len(rule) in (2, 3)
        # every example of class c satisfies its rule...
        rows = X_tr[y_tr == c]
        assert (rows[:, list(rule)] == 1).all()
    # ...and each example's label is the unique satisfied rule
    for X, y in ((X_tr, y_tr), (X_te, y_te)):
        for c, rule in enumerate(rules):
            hits = (X[:, list(rule)] == 1).all(axis=1)
            assert (y[hits] == c).all()


def test_planted_classification_deterministic():
    a = planted_classification(num_train=200, num_test=50, seed=3)
    b = planted_classification(num_train=200, num_test=50, seed=3)
    for left, right in zip(a[:4], b[:4]):
        assert np.array_equal(left, right)
    c = planted_classification(num_train=200, num_test=50, seed=4)
    assert not np.array_equal(a[0], c[0])


def test_xor_dataset():
    X_tr, y_tr, X_te, y_te = xor_dataset(num_train=400, num_test=100, seed=0)
    assert X_tr.shape == (400, 2) and X_te.shape == (100, 2)
    assert np.array_equal(y_tr, X_tr[:, 0] ^ X_tr[:, 1])
    assert np.array_equal(y_te, X_te[:, 0] ^ X_te[:, 1])
    assert set(map(tuple, X_tr.tolist())) == {(0, 0), (0, 1), (1, 0), (1, 1)}
