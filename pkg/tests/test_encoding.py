import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tmrec.encoding import (
    PAD,
    CategoricalSpec,
    ContinuousSpec,
    FeatureSchema,
    Normalizer,
    assemble,
    encode_categorical,
    encode_continuous,
)
from tmrec.exceptions import ConfigError, DimensionError, EncodingError


class FakeFactors:
    def __init__(self, rank, users=None, items=None):
        self.rank = rank
        self.users = users or {}
        self.items = items or {}

    def has_user(self, uid):
        return uid in self.users

    def has_item(self, iid):
        return iid in self.items

    def user_vector(self, uid):
        return np.asarray(self.users.get(uid, np.zeros(self.rank)), dtype=float)

    def item_vector(self, iid):
        return np.asarray(self.items.get(iid, np.zeros(self.rank)), dtype=float)


# -- categorical -----------------------------------------------------------

def test_one_hot_block():
    spec = CategoricalSpec("color", ("a", "b", "c"))
    assert encode_categorical(spec, "b").tolist() == [0, 1, 0, 0]
    assert encode_categorical(spec, PAD).tolist() == [0, 0, 0, 1]


def test_out_of_vocabulary():
    spec = CategoricalSpec("color", ("a", "b", "c"))
    with pytest.raises(EncodingError):
        encode_categorical(spec, "z")
    assert encode_categorical(spec, "z", strict=False).tolist() == [0, 0, 0, 1]


def test_categorical_spec_validation():
    with pytest.raises(ConfigError):
        CategoricalSpec("x", ())
    with pytest.raises(ConfigError):
        CategoricalSpec("x", ("a", "a"))
    with pytest.raises(ConfigError):
        CategoricalSpec("x", ("a", PAD))


@given(st.integers(0, 9))
def test_one_hot_exactness(pick):
    spec = CategoricalSpec("v", tuple(f"v{i}" for i in range(10)))
    block = encode_categorical(spec, f"v{pick}")
    assert block.sum() == 1
    assert block[pick] == 1


# -- continuous ------------------------------------------------------------

def test_thermometer_spec_example():
    spec = ContinuousSpec("t", 0.0, 1.0, bins=4)
    assert np.allclose(spec.thresholds(), [0.2, 0.4, 0.6, 0.8])
    assert encode_continuous(spec, 1.0).tolist() == [1, 1, 1, 1]
    assert encode_continuous(spec, 0.5).tolist() == [1, 1, 0, 0]
    assert encode_continuous(spec, -7.0).tolist() == [0, 0, 0, 0]


def test_continuous_rejects_nan():
    spec = ContinuousSpec("t", 0.0, 1.0, bins=4)
    with pytest.raises(EncodingError):
        encode_continuous(spec, float("nan"))
    with pytest.raises(EncodingError):
        encode_continuous(spec, float("inf"))


def test_continuous_spec_validation():
    with pytest.raises(ConfigError):
        ContinuousSpec("t", 1.0, 1.0)
    with pytest.raises(ConfigError):
        ContinuousSpec("t", 0.0, 1.0, bins=0)


@settings(max_examples=80)
@given(
    st.floats(-5, 5, allow_nan=False),
    st.floats(-5, 5, allow_nan=False),
    st.integers(1, 12),
)
def test_thermometer_monotone(v1, v2, bins):
    spec = ContinuousSpec("t", -2.0, 3.0, bins=bins)
    lo, hi = sorted((v1, v2))
    a = encode_continuous(spec, lo)
    b = encode_continuous(spec, hi)
    # smaller value's set bits are a prefix of the larger value's
    assert (a <= b).all()
    assert a.sum() <= b.sum()
    # thermometer codes are always a prefix of ones
    assert (np.diff(a.astype(int)) <= 0).all()


# -- assembly ---------------------------------------------------------------

def make_schema(history=3, rank=0):
    kwargs = {}
    if rank:
        kwargs = dict(
            latent_rank=rank, latent_bins=2,
            user_latent_min=(0.0,) * rank, user_latent_max=(1.0,) * rank,
            item_latent_min=(0.0,) * rank, item_latent_max=(1.0,) * rank,
        )
    return FeatureSchema(
        customer_features=(
            CategoricalSpec("club", ("yes", "no")),
            ContinuousSpec("age", 18.0, 80.0, bins=4),
        ),
        item_features=(CategoricalSpec("section", ("shoes", "hats", "bags")),),
        history_length=history,
        **kwargs,
    )


def test_widths():
    schema = make_schema()
    assert schema.customer_bit_width == 3 + 4
    assert schema.slot_bit_width == 4
    assert schema.total_bits == 7 + 3 * 4
    assert schema.total_reals == (3 + 1) + 3 * 4


def test_empty_history_pads_every_slot():
    schema = make_schema()
    out = assemble({"customer_id": "c1", "club": "yes", "age": 30}, [], None, schema)
    assert out.bits.shape[0] == schema.total_bits
    for slot in range(3):
        seg = out.provenance[1 + slot]
        assert seg.padded and seg.source_id is None
        start = schema.customer_bit_width + slot * schema.slot_bit_width
        block = out.bits[start : start + schema.slot_bit_width]
        assert block.tolist() == [0, 0, 0, 1]  # PAD bit only


def test_long_history_truncates_most_recent_first():
    schema = make_schema()
    history = [{"item_id": f"i{j}", "section": "shoes"} for j in range(5)]
    out = assemble({"customer_id": "c1", "club": "no", "age": 42},
                   history, None, schema)
    assert [seg.source_id for seg in out.provenance[1:]] == ["i0", "i1", "i2"]
    assert not any(seg.padded for seg in out.provenance[1:])


def test_width_stable_across_inputs():
    schema = make_schema()
    shapes = set()
    for age, hist_len in [(18, 0), (50, 1), (80, 3)]:
        history = [{"item_id": "i", "section": "hats"}] * hist_len
        out = assemble({"customer_id": "c", "club": "yes", "age": age},
                       history, None, schema)
        shapes.add((out.bits.shape[0], out.reals.shape[0]))
    assert shapes == {(schema.total_bits, schema.total_reals)}


def test_assemble_is_deterministic():
    schema = make_schema(rank=2)
    factors = FakeFactors(2, users={"c": [0.2, 0.9]}, items={"i": [0.5, 0.1]})
    args = ({"customer_id": "c", "club": "yes", "age": 30},
            [{"item_id": "i", "section": "bags"}], factors, schema)
    a, b = assemble(*args), assemble(*args)
    assert np.array_equal(a.bits, b.bits)
    assert np.array_equal(a.reals, b.reals)
    assert a.provenance == b.provenance


def test_unknown_latent_id_flagged_and_zero():
    schema = make_schema(history=1, rank=2)
    factors = FakeFactors(2, users={}, items={})
    out = assemble({"customer_id": "nobody", "club": "yes", "age": 30},
                   [{"item_id": "ghost", "section": "hats"}], factors, schema)
    assert out.provenance[0].latent_missing
    assert out.provenance[1].latent_missing
    # zero latent thermometer over [0, 1] bins: all thresholds > 0
    cust_latent = out.bits[3 + 4 : 3 + 4 + 4]
    assert cust_latent.tolist() == [0, 0, 0, 0]


def test_schema_json_round_trip():
    schema = make_schema(rank=2)
    clone = FeatureSchema.from_json(schema.to_json())
    assert clone == schema
    assert clone.bit_feature_names() == schema.bit_feature_names()


def test_bit_feature_names_cover_every_bit():
    schema = make_schema(rank=1)
    assert len(schema.bit_feature_names()) == schema.total_bits


def test_schema_validation():
    with pytest.raises(ConfigError):
        make_schema(history=0)
    with pytest.raises(ConfigError):
        FeatureSchema(customer_features=(), item_features=(), history_length=1,
                      latent_rank=2, user_latent_min=(0.0,))


# -- normalizer ---------------------------------------------------------------

def test_normalizer_zero_mean_unit_variance():
    rs = np.random.RandomState(0)
    X = rs.normal(3.0, 2.0, size=(200, 4))
    norm = Normalizer.fit(X)
    Z = norm.apply(X)
    assert np.allclose(Z.mean(axis=0), 0.0, atol=1e-12)
    assert np.allclose(Z.std(axis=0), 1.0, atol=1e-12)


def test_normalizer_constant_column_passthrough():
    X = np.array([[1.0, 5.0], [1.0, 7.0]])
    norm = Normalizer.fit(X)
    Z = norm.apply(X)
    assert np.allclose(Z[:, 0], 0.0)


def test_normalizer_round_trip_and_checks():
    norm = Normalizer.fit(np.arange(12.0).reshape(4, 3))
    clone = Normalizer.from_json(norm.to_json())
    assert np.allclose(clone.mean, norm.mean)
    with pytest.raises(DimensionError):
        norm.apply(np.zeros((2, 5)))
    with pytest.raises(DimensionError):
        Normalizer.fit(np.zeros((0, 3)))
