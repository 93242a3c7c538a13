"""Feature binarization and assembly.

Raw customer and item attributes plus latent-factor vectors are packed
into a fixed-width binary vector for the clause machine and a
same-layout real vector for the gradient baselines.  Categoricals are
one-hot with a trailing PAD bit; continuous values use a thermometer
code (bit ``i`` set iff value >= threshold ``i``), which keeps order
information in binary form.

Layout of an assembled input: customer attribute blocks, customer
latent block, then ``history_length`` item slots (most recent first),
each slot being the item's attribute blocks plus its latent block.
Slots beyond the available history are padded: categorical blocks get
the PAD bit, continuous and latent blocks are all-zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigError, DimensionError, EncodingError

PAD = "<PAD>"


@dataclass(frozen=True)
class CategoricalSpec:
    """One-hot encoded attribute; the last bit is reserved for PAD."""

    name: str
    vocabulary: tuple[str, ...]

    def __post_init__(self):
        if not self.vocabulary:
            raise ConfigError(f"{self.name}: vocabulary must be non-empty")
        if len(set(self.vocabulary)) != len(self.vocabulary):
            raise ConfigError(f"{self.name}: vocabulary has duplicates")
        if PAD in self.vocabulary:
            raise ConfigError(f"{self.name}: {PAD!r} is reserved")

    @property
    def bit_width(self) -> int:
        return len(self.vocabulary) + 1

    @property
    def real_width(self) -> int:
        return len(self.vocabulary) + 1


@dataclass(frozen=True)
class ContinuousSpec:
    """Thermometer-encoded attribute over [minimum, maximum]."""

    name: str
    minimum: float
    maximum: float
    bins: int = 8

    def __post_init__(self):
        if not self.minimum < self.maximum:
            raise ConfigError(f"{self.name}: require minimum < maximum")
        if self.bins < 1:
            raise ConfigError(f"{self.name}: bins must be >= 1")

    @property
    def bit_width(self) -> int:
        return self.bins

    @property
    def real_width(self) -> int:
        return 1

    def thresholds(self) -> np.ndarray:
        step = (self.maximum - self.minimum) / (self.bins + 1)
        return self.minimum + step * np.arange(1, self.bins + 1)


def encode_categorical(spec: CategoricalSpec, value, strict: bool = True) -> np.ndarray:
    """One-hot block; out-of-vocabulary maps to PAD only in lenient mode."""
    block = np.zeros(spec.bit_width, dtype=np.uint8)
    if value == PAD:
        block[-1] = 1
        return block
    try:
        block[spec.vocabulary.index(value)] = 1
    except ValueError:
        if strict:
            raise EncodingError(
                f"{spec.name}: value {value!r} not in vocabulary"
            ) from None
        block[-1] = 1
    return block


def encode_continuous(spec: ContinuousSpec, value) -> np.ndarray:
    value = float(value)
    if not np.isfinite(value):
        raise EncodingError(f"{spec.name}: value must be finite, got {value!r}")
    value = min(max(value, spec.minimum), spec.maximum)
    return (value >= spec.thresholds()).astype(np.uint8)


def reals_categorical(spec: CategoricalSpec, value, strict: bool = True) -> np.ndarray:
    return encode_categorical(spec, value, strict).astype(np.float64)


def reals_continuous(spec: ContinuousSpec, value) -> np.ndarray:
    value = float(value)
    if not np.isfinite(value):
        raise EncodingError(f"{spec.name}: value must be finite, got {value!r}")
    return np.array([min(max(value, spec.minimum), spec.maximum)])


def _latent_specs(prefix: str, minimum: np.ndarray, maximum: np.ndarray,
                  bins: int) -> tuple[ContinuousSpec, ...]:
    out = []
    for d, (lo, hi) in enumerate(zip(minimum, maximum)):
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            hi = lo + 1e-9  # degenerate training range; keep minimum < maximum
        out.append(ContinuousSpec(f"{prefix}{d}", lo, hi, bins))
    return tuple(out)


@dataclass(frozen=True)
class FeatureSchema:
    """Widths and order of every encoded block, fixed at preparation time.

    Latent thresholds come from per-dimension training-split factor
    ranges so that encoding never peeks at test data.
    """

    customer_features: tuple
    item_features: tuple
    history_length: int
    latent_rank: int = 0
    latent_bins: int = 8
    user_latent_min: tuple = ()
    user_latent_max: tuple = ()
    item_latent_min: tuple = ()
    item_latent_max: tuple = ()

    def __post_init__(self):
        if self.history_length < 1:
            raise ConfigError("history_length must be >= 1")
        if self.latent_rank < 0:
            raise ConfigError("latent_rank must be >= 0")
        for name in ("user_latent_min", "user_latent_max",
                     "item_latent_min", "item_latent_max"):
            if len(getattr(self, name)) != self.latent_rank:
                raise ConfigError(f"{name} must have latent_rank entries")

    def user_latent_specs(self) -> tuple[ContinuousSpec, ...]:
        return _latent_specs("uf", np.asarray(self.user_latent_min),
                             np.asarray(self.user_latent_max), self.latent_bins)

    def item_latent_specs(self) -> tuple[ContinuousSpec, ...]:
        return _latent_specs("if", np.asarray(self.item_latent_min),
                             np.asarray(self.item_latent_max), self.latent_bins)

    @property
    def customer_bit_width(self) -> int:
        return (sum(s.bit_width for s in self.customer_features)
                + self.latent_rank * self.latent_bins)

    @property
    def slot_bit_width(self) -> int:
        return (sum(s.bit_width for s in self.item_features)
                + self.latent_rank * self.latent_bins)

    @property
    def total_bits(self) -> int:
        return self.customer_bit_width + self.history_length * self.slot_bit_width

    @property
    def customer_real_width(self) -> int:
        return sum(s.real_width for s in self.customer_features) + self.latent_rank

    @property
    def slot_real_width(self) -> int:
        return sum(s.real_width for s in self.item_features) + self.latent_rank

    @property
    def total_reals(self) -> int:
        return self.customer_real_width + self.history_length * self.slot_real_width

    def bit_feature_names(self) -> list[str]:
        """One label per bit, usable as literal names for explanations."""
        names = []

        def block(prefix, specs):
            for s in specs:
                if isinstance(s, CategoricalSpec):
                    names.extend(f"{prefix}{s.name}={v}" for v in s.vocabulary)
                    names.append(f"{prefix}{s.name}={PAD}")
                else:
                    names.extend(f"{prefix}{s.name}>=t{i}" for i in range(s.bins))

        block("c_", self.customer_features)
        block("c_", self.user_latent_specs())
        for slot in range(self.history_length):
            block(f"h{slot}_", self.item_features)
            block(f"h{slot}_", self.item_latent_specs())
        return names

    def to_json(self) -> dict:
        def spec_json(s):
            if isinstance(s, CategoricalSpec):
                return {"kind": "categorical", "name": s.name,
                        "vocabulary": list(s.vocabulary)}
            return {"kind": "continuous", "name": s.name, "minimum": s.minimum,
                    "maximum": s.maximum, "bins": s.bins}

        return {
            "customer_features": [spec_json(s) for s in self.customer_features],
            "item_features": [spec_json(s) for s in self.item_features],
            "history_length": self.history_length,
            "latent_rank": self.latent_rank,
            "latent_bins": self.latent_bins,
            "user_latent_min": list(self.user_latent_min),
            "user_latent_max": list(self.user_latent_max),
            "item_latent_min": list(self.item_latent_min),
            "item_latent_max": list(self.item_latent_max),
        }

    @classmethod
    def from_json(cls, doc: dict) -> "FeatureSchema":
        def spec(d):
            if d["kind"] == "categorical":
                return CategoricalSpec(d["name"], tuple(d["vocabulary"]))
            return ContinuousSpec(d["name"], d["minimum"], d["maximum"], d["bins"])

        return cls(
            customer_features=tuple(spec(d) for d in doc["customer_features"]),
            item_features=tuple(spec(d) for d in doc["item_features"]),
            history_length=doc["history_length"],
            latent_rank=doc["latent_rank"],
            latent_bins=doc["latent_bins"],
            user_latent_min=tuple(doc["user_latent_min"]),
            user_latent_max=tuple(doc["user_latent_max"]),
            item_latent_min=tuple(doc["item_latent_min"]),
            item_latent_max=tuple(doc["item_latent_max"]),
        )


@dataclass(frozen=True)
class SegmentInfo:
    """Provenance of one assembled block."""

    label: str
    source_id: object
    padded: bool = False
    latent_missing: bool = False


@dataclass(frozen=True)
class AssembledInput:
    bits: np.ndarray
    reals: np.ndarray
    provenance: tuple[SegmentInfo, ...]


def _encode_record(specs, record, strict):
    bits, reals = [], []
    for s in specs:
        value = record.get(s.name, PAD if isinstance(s, CategoricalSpec) else None)
        if isinstance(s, CategoricalSpec):
            bits.append(encode_categorical(s, value, strict))
            reals.append(reals_categorical(s, value, strict))
        else:
            if value is None:
                raise EncodingError(f"{s.name}: missing continuous value")
            bits.append(encode_continuous(s, value))
            reals.append(reals_continuous(s, value))
    return bits, reals


def _encode_latent(specs, vector):
    bits = [encode_continuous(s, v) for s, v in zip(specs, vector)]
    reals = [np.asarray(vector, dtype=np.float64)]
    return bits, reals


def _pad_blocks(specs, latent_width_bits, latent_width_reals):
    bits, reals = [], []
    for s in specs:
        if isinstance(s, CategoricalSpec):
            bits.append(encode_categorical(s, PAD))
            reals.append(reals_categorical(s, PAD))
        else:
            bits.append(np.zeros(s.bit_width, dtype=np.uint8))
            reals.append(np.zeros(1))
    bits.append(np.zeros(latent_width_bits, dtype=np.uint8))
    reals.append(np.zeros(latent_width_reals))
    return bits, reals


def assemble(customer_record: dict, purchase_history, latents,
             schema: FeatureSchema, strict: bool = True) -> AssembledInput:
    """Build one input; ``purchase_history`` is item records, most recent first.

    ``latents`` may be None when the schema has no latent block; unknown
    ids fall back to the zero vector and are flagged in provenance.
    """
    bits, reals, prov = [], [], []

    cid = customer_record.get("customer_id")
    b, r = _encode_record(schema.customer_features, customer_record, strict)
    missing = False
    if schema.latent_rank:
        vec = latents.user_vector(cid)
        missing = not latents.has_user(cid)
        lb, lr = _encode_latent(schema.user_latent_specs(), vec)
        b, r = b + lb, r + lr
    bits += b
    reals += r
    prov.append(SegmentInfo("customer", cid, latent_missing=missing))

    history = list(purchase_history)[: schema.history_length]
    for slot in range(schema.history_length):
        if slot < len(history):
            item = history[slot]
            iid = item.get("item_id")
            b, r = _encode_record(schema.item_features, item, strict)
            missing = False
            if schema.latent_rank:
                vec = latents.item_vector(iid)
                missing = not latents.has_item(iid)
                lb, lr = _encode_latent(schema.item_latent_specs(), vec)
                b, r = b + lb, r + lr
            prov.append(SegmentInfo(f"slot{slot}", iid, latent_missing=missing))
        else:
            b, r = _pad_blocks(
                schema.item_features,
                schema.latent_rank * schema.latent_bins,
                schema.latent_rank,
            )
            prov.append(SegmentInfo(f"slot{slot}", None, padded=True))
        bits += b
        reals += r

    out = AssembledInput(
        np.concatenate(bits).astype(np.uint8),
        np.concatenate(reals),
        tuple(prov),
    )
    if out.bits.shape[0] != schema.total_bits:
        raise DimensionError(
            f"assembled {out.bits.shape[0]} bits, schema says {schema.total_bits}"
        )
    if out.reals.shape[0] != schema.total_reals:
        raise DimensionError(
            f"assembled {out.reals.shape[0]} reals, schema says {schema.total_reals}"
        )
    return out


@dataclass
class Normalizer:
    """Zero-mean unit-variance scaling fitted on training-split reals."""

    mean: np.ndarray
    std: np.ndarray

    @classmethod
    def fit(cls, reals_matrix: np.ndarray) -> "Normalizer":
        X = np.asarray(reals_matrix, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] == 0:
            raise DimensionError("need a non-empty 2-D matrix to fit")
        std = X.std(axis=0)
        std[std == 0.0] = 1.0  # constant columns pass through
        return cls(X.mean(axis=0), std)

    def apply(self, reals: np.ndarray) -> np.ndarray:
        reals = np.asarray(reals, dtype=np.float64)
        if reals.shape[-1] != self.mean.shape[0]:
            raise DimensionError(
                f"width {reals.shape[-1]} does not match fitted {self.mean.shape[0]}"
            )
        return (reals - self.mean) / self.std

    def to_json(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_json(cls, doc: dict) -> "Normalizer":
        return cls(np.asarray(doc["mean"]), np.asarray(doc["std"]))
