"""Feature selection, one-hot encoding, min-max scaling and sliding windows."""

import hashlib
import json
import threading
from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from edgedetect.ingest import Schema

# Default feature subset: ten numeric columns plus the categorical ``state``.
DEFAULT_SELECTED = (
    "state", "sttl", "dttl", "sbytes", "dbytes", "smeansz", "dmeansz",
    "tcprtt", "dwin", "ct_state_ttl", "ct_dst_src_ltm",
)
DEFAULT_CATEGORICAL = "state"
N_SELECTED = 11
N_CATEGORIES = 15
ENGINEERED_WIDTH = (N_SELECTED - 1) + N_CATEGORIES
DEFAULT_T = 20

SPEC_FORMAT = "edgedetect.feature_spec/1"


class UnknownCategoryCounter:
    """Thread-safe tally of categorical values missing from the vocabulary."""

    def __init__(self):
        self._lock = threading.Lock()
        self._count = 0

    def add(self, n=1):
        with self._lock:
            self._count += n

    @property
    def count(self):
        return self._count


@dataclass(frozen=True)
class FeatureSpec:
    """Fitted, immutable encoding recipe.

    ``category_vocab`` always has ``n_categories`` entries; slots past
    ``n_observed`` are reserved placeholders that never match input.
    """

    selected_columns: tuple
    categorical_column: str
    column_indices: tuple
    schema_width: int
    category_vocab: tuple
    n_observed: int
    mins: tuple
    maxs: tuple

    @property
    def numeric_columns(self):
        return tuple(c for c in self.selected_columns if c != self.categorical_column)

    @property
    def n_categories(self):
        return len(self.category_vocab)

    @property
    def width(self):
        return len(self.numeric_columns) + self.n_categories

    def to_dict(self):
        return {
            "format": SPEC_FORMAT,
            "selected_columns": list(self.selected_columns),
            "categorical_column": self.categorical_column,
            "column_indices": list(self.column_indices),
            "schema_width": self.schema_width,
            "category_vocab": list(self.category_vocab),
            "n_observed": self.n_observed,
            "normalization": {
                "method": "minmax",
                "min": dict(zip(self.numeric_columns, self.mins)),
                "max": dict(zip(self.numeric_columns, self.maxs)),
            },
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d):
        if d.get("format") != SPEC_FORMAT:
            raise ValueError(f"not a feature spec (format={d.get('format')!r})")
        selected = tuple(d["selected_columns"])
        cat = d["categorical_column"]
        numeric = [c for c in selected if c != cat]
        norm = d["normalization"]
        if norm.get("method") != "minmax":
            raise ValueError(f"unsupported normalization {norm.get('method')!r}")
        return cls(
            selected_columns=selected,
            categorical_column=cat,
            column_indices=tuple(int(i) for i in d["column_indices"]),
            schema_width=int(d["schema_width"]),
            category_vocab=tuple(d["category_vocab"]),
            n_observed=int(d["n_observed"]),
            mins=tuple(float(norm["min"][c]) for c in numeric),
            maxs=tuple(float(norm["max"][c]) for c in numeric),
        )

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def digest(self):
        """SHA-256 over the canonical JSON encoding (32 bytes)."""
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode("utf-8")).digest()


def _placeholder(i):
    return f"<reserved:{i}>"


def fit_feature_spec(records, selected=DEFAULT_SELECTED, categorical=DEFAULT_CATEGORICAL,
                     schema=Schema(), n_categories=N_CATEGORIES, strict_width=True):
    """Fit the vocabulary and min-max statistics on training records.

    ``strict_width`` enforces the 11-column / 15-category / 25-wide layout;
    disable it only to deliberately run a different dataset variant.
    """
    records = list(records)
    if not records:
        raise ValueError("cannot fit a feature spec on zero records")
    selected = tuple(selected)
    if len(set(selected)) != len(selected):
        raise ValueError("selected columns must be distinct")
    if categorical not in selected:
        raise ValueError(f"categorical column {categorical!r} must be among the selected columns")
    if strict_width and (len(selected) != N_SELECTED or n_categories != N_CATEGORIES):
        raise ValueError(
            f"expected {N_SELECTED} selected columns and {N_CATEGORIES} categories, "
            f"got {len(selected)} and {n_categories}"
        )
    indices = tuple(schema.index(c) for c in selected)
    cat_idx = schema.index(categorical)

    vocab = list(dict.fromkeys(r.values[cat_idx] for r in records))
    if len(vocab) > n_categories:
        surplus = vocab[n_categories:]
        raise ValueError(
            f"{len(vocab)} distinct {categorical!r} values exceed the {n_categories}-slot "
            f"vocabulary; surplus: {surplus}"
        )
    n_observed = len(vocab)
    vocab += [_placeholder(i) for i in range(n_observed, n_categories)]

    num_idx = [schema.index(c) for c in selected if c != categorical]
    numeric = _numeric_matrix([r.values for r in records], num_idx, [c for c in selected if c != categorical])
    return FeatureSpec(
        selected_columns=selected,
        categorical_column=categorical,
        column_indices=indices,
        schema_width=schema.width,
        category_vocab=tuple(vocab),
        n_observed=n_observed,
        mins=tuple(float(v) for v in numeric.min(axis=0)),
        maxs=tuple(float(v) for v in numeric.max(axis=0)),
    )


def _numeric_matrix(rows, indices, names):
    out = np.empty((len(rows), len(indices)))
    for r, values in enumerate(rows):
        for j, idx in enumerate(indices):
            try:
                out[r, j] = float(values[idx])
            except ValueError:
                raise ValueError(f"record {r}: column {names[j]!r} is not numeric: {values[idx]!r}") from None
    if not np.all(np.isfinite(out)):
        raise ValueError("numeric features must be finite")
    return out


def _spec_layout(spec):
    cat_pos = spec.selected_columns.index(spec.categorical_column)
    cat_idx = spec.column_indices[cat_pos]
    num_idx = [i for c, i in zip(spec.selected_columns, spec.column_indices)
               if c != spec.categorical_column]
    return cat_idx, num_idx


def engineer_rows(rows, spec, counter=None):
    """Encode raw cell rows into an ``(m, width)`` float64 matrix.

    Numeric columns are min-max scaled and clamped to [0, 1]; the category
    becomes a one-hot block, all zeros for values outside the vocabulary.
    Unknown values are added to ``counter`` when one is supplied.
    """
    rows = list(rows)
    cat_idx, num_idx = _spec_layout(spec)
    for r, values in enumerate(rows):
        if len(values) != spec.schema_width:
            raise ValueError(f"record {r}: expected {spec.schema_width} columns, got {len(values)}")
    numeric = _numeric_matrix(rows, num_idx, spec.numeric_columns)
    lo = np.asarray(spec.mins)
    span = np.asarray(spec.maxs) - lo
    safe = np.where(span > 0, span, 1.0)
    scaled = np.where(span > 0, (numeric - lo) / safe, 0.0)
    np.clip(scaled, 0.0, 1.0, out=scaled)

    lookup = {v: i for i, v in enumerate(spec.category_vocab[:spec.n_observed])}
    onehot = np.zeros((len(rows), spec.n_categories))
    unknown = 0
    for r, values in enumerate(rows):
        slot = lookup.get(values[cat_idx])
        if slot is None:
            unknown += 1
        else:
            onehot[r, slot] = 1.0
    if counter is not None and unknown:
        counter.add(unknown)
    return np.concatenate([scaled, onehot], axis=1)


def engineer(record, spec, counter=None):
    """Encode one :class:`PacketRecord` into its engineered vector."""
    return engineer_rows([record.values], spec, counter)[0]


def engineer_records(records, spec, counter=None):
    """Return ``(vectors, labels)`` for a sequence of records."""
    records = list(records)
    X = engineer_rows([r.values for r in records], spec, counter)
    y = np.array([r.label for r in records], dtype=np.int64)
    return X, y


@dataclass(frozen=True)
class WindowTensor:
    data: np.ndarray
    label: int
    origin_index: int


class Windows:
    """Stride-1 sliding windows over a packet sequence.

    ``data`` is ``(m - T + 1, T, width)``; ``labels[i]`` is the label of the
    window's last packet and ``origin_index[i]`` that packet's position.
    ``data`` may be a read-only view into the source vectors.
    """

    def __init__(self, data, labels, origin_index):
        self.data = data
        self.labels = labels
        self.origin_index = origin_index

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i):
        if isinstance(i, slice) or isinstance(i, np.ndarray):
            return Windows(self.data[i], self.labels[i], self.origin_index[i])
        return WindowTensor(np.asarray(self.data[i]), int(self.labels[i]), int(self.origin_index[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def T(self):
        return self.data.shape[1]


def n_windows(m, T):
    if T < 1:
        raise ValueError("window length T must be >= 1")
    if m < T:
        raise ValueError(f"insufficient packets for one window: m={m} < T={T}")
    return m - T + 1


def make_windows(vectors, labels, T=DEFAULT_T):
    """Group consecutive packets into length-``T`` windows moved by one packet."""
    vectors = np.asarray(vectors, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if vectors.ndim != 2 or len(vectors) != len(labels):
        raise ValueError(f"vectors {vectors.shape} and labels {labels.shape} do not align")
    count = n_windows(len(vectors), T)
    data = sliding_window_view(vectors, (T, vectors.shape[1]))[:, 0]
    origin = np.arange(T - 1, T - 1 + count, dtype=np.int64)
    return Windows(data, labels[T - 1:], origin)
