"""Packet-record CSV ingestion and the synthetic traffic generator."""

import csv
import io
import logging
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

# UNSW-NB15 raw record layout (49 columns, the last being the binary label).
UNSW_NB15_COLUMNS = (
    "srcip", "sport", "dstip", "dsport", "proto", "state", "dur", "sbytes",
    "dbytes", "sttl", "dttl", "sloss", "dloss", "service", "Sload", "Dload",
    "Spkts", "Dpkts", "swin", "dwin", "stcpb", "dtcpb", "smeansz", "dmeansz",
    "trans_depth", "res_bdy_len", "Sjit", "Djit", "Stime", "Ltime", "Sintpkt",
    "Dintpkt", "tcprtt", "synack", "ackdat", "is_sm_ips_ports", "ct_state_ttl",
    "ct_flw_http_mthd", "is_ftp_login", "ct_ftp_cmd", "ct_srv_src",
    "ct_srv_dst", "ct_dst_ltm", "ct_src_ltm", "ct_src_dport_ltm",
    "ct_dst_sport_ltm", "ct_dst_src_ltm", "attack_cat", "Label",
)


class ParseError(ValueError):
    """A malformed input row. ``row`` is the 1-based line number."""

    def __init__(self, message, row=None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


@dataclass(frozen=True)
class Schema:
    columns: tuple = UNSW_NB15_COLUMNS
    label_column: str = "Label"
    header: bool = True
    delimiter: str = ","

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        if len(set(self.columns)) != len(self.columns):
            raise ValueError("schema column names must be distinct")
        if self.label_column not in self.columns:
            raise ValueError(f"label column {self.label_column!r} not in schema")

    @property
    def width(self):
        return len(self.columns)

    @property
    def label_index(self):
        return self.columns.index(self.label_column)

    def index(self, column):
        try:
            return self.columns.index(column)
        except ValueError:
            raise ValueError(f"column {column!r} not in schema") from None


@dataclass(frozen=True)
class PacketRecord:
    """One parsed dataset row: raw cells (strings) plus the binary label."""

    values: tuple
    label: int = field(default=0)


def _parse_label(cell, row):
    text = cell.strip()
    if text in ("0", "1"):
        return int(text)
    raise ParseError(f"label must be 0 or 1, got {cell!r}", row)


def iter_records(source, schema=Schema(), on_error="raise", on_skip=None):
    """Yield :class:`PacketRecord` from delimiter-separated text.

    ``source`` is a string, a text file object or any iterable of lines.
    With ``on_error="skip"`` malformed rows are logged and passed to the
    ``on_skip`` callback (when given) instead of raising.
    """
    if isinstance(source, str):
        source = io.StringIO(source)
    reader = csv.reader(source, delimiter=schema.delimiter)
    label_idx = schema.label_index
    for lineno, row in enumerate(reader, start=1):
        if lineno == 1 and schema.header:
            continue
        if not row:
            continue
        try:
            if len(row) != schema.width:
                raise ParseError(f"expected {schema.width} columns, got {len(row)}", lineno)
            label = _parse_label(row[label_idx], lineno)
        except ParseError as exc:
            if on_error == "raise":
                raise
            logger.warning("skipping malformed record: %s", exc)
            if on_skip is not None:
                on_skip(exc)
            continue
        yield PacketRecord(tuple(row), label)


def parse_records(source, schema=Schema()):
    """Parse every row, failing on the first malformed one."""
    return list(iter_records(source, schema))


def write_records(records, fh, schema=Schema()):
    writer = csv.writer(fh, delimiter=schema.delimiter, lineterminator="\n")
    if schema.header:
        writer.writerow(schema.columns)
    for rec in records:
        writer.writerow(rec.values)


def records_to_csv(records, schema=Schema()):
    buf = io.StringIO()
    write_records(records, buf, schema)
    return buf.getvalue()


# --- synthetic traffic -------------------------------------------------------

# (normal mean, attack mean, scale) per numeric column; the draw is
# mean + spread * scale * N(0, 1), clipped at zero.
_SYNTH_NUMERIC = {
    "sttl": (31.0, 254.0, 40.0),
    "dttl": (29.0, 0.0, 30.0),
    "sbytes": (1400.0, 300.0, 600.0),
    "dbytes": (9000.0, 0.0, 4000.0),
    "smeansz": (90.0, 45.0, 30.0),
    "dmeansz": (400.0, 0.0, 200.0),
    "tcprtt": (0.05, 0.0, 0.03),
    "dwin": (255.0, 0.0, 120.0),
    "ct_state_ttl": (0.5, 2.0, 0.6),
    "ct_dst_src_ltm": (3.0, 20.0, 6.0),
    "dur": (1.2, 0.01, 0.8),
    "Spkts": (12.0, 4.0, 6.0),
    "Dpkts": (14.0, 0.0, 6.0),
}
_SYNTH_STATES = {
    0: (("FIN", "CON", "INT", "REQ", "RST"), (0.55, 0.3, 0.08, 0.05, 0.02)),
    1: (("INT", "FIN", "REQ", "CON", "ECO"), (0.7, 0.15, 0.08, 0.05, 0.02)),
}


def _compose(total, parts, rng):
    """Random composition of ``total`` into ``parts`` positive integers."""
    if parts == 1:
        return np.array([total])
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False))
    return np.diff(np.concatenate([[0], cuts, [total]]))


def synthetic_labels(n_packets, attack_fraction, rng, burst=25):
    """Bursty 0/1 label sequence with exactly ``round(n * fraction)`` attacks."""
    n_att = int(round(n_packets * attack_fraction))
    n_norm = n_packets - n_att
    if n_att == 0 or n_norm == 0:
        return np.full(n_packets, 1 if n_norm == 0 else 0, dtype=np.int64)
    k = int(max(1, min(n_att, n_norm + 1, round(n_att / burst))))
    attack_runs = _compose(n_att, k, rng)
    normal_runs = _compose(n_norm + 2, k + 1, rng)
    normal_runs[0] -= 1
    normal_runs[-1] -= 1
    labels = []
    for i in range(k):
        labels.append(np.zeros(normal_runs[i], dtype=np.int64))
        labels.append(np.ones(attack_runs[i], dtype=np.int64))
    labels.append(np.zeros(normal_runs[k], dtype=np.int64))
    return np.concatenate(labels)


def generate_synthetic(n_packets, attack_fraction=0.5, seed=0, spread=2.0,
                       schema=Schema()):
    """Deterministic labeled UNSW-NB15-shaped traffic.

    Attack rows differ from normal rows in the means of many numeric
    columns and in the ``state`` distribution; ``spread`` scales the
    per-class noise and so controls class overlap.
    """
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    if not 0.0 <= attack_fraction <= 1.0:
        raise ValueError("attack_fraction must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    labels = synthetic_labels(n_packets, attack_fraction, rng)
    cols = {name: np.full(n_packets, "0", dtype=object) for name in schema.columns}

    for name, (mu0, mu1, scale) in _SYNTH_NUMERIC.items():
        if name not in cols:
            continue
        mean = np.where(labels == 1, mu1, mu0)
        vals = np.maximum(mean + spread * scale * rng.standard_normal(n_packets), 0.0)
        cols[name] = np.array([f"{v:.6g}" for v in vals], dtype=object)

    if "state" in cols:
        state = np.empty(n_packets, dtype=object)
        for cls, (names, probs) in _SYNTH_STATES.items():
            mask = labels == cls
            state[mask] = rng.choice(names, size=int(mask.sum()), p=probs)
        cols["state"] = state

    host = rng.integers(1, 255, size=n_packets)
    port = rng.integers(1024, 65535, size=n_packets)
    start = 1421927414 + np.cumsum(rng.integers(0, 3, size=n_packets))
    fixed = {
        "srcip": [f"59.166.0.{h % 10}" for h in host],
        "sport": [str(p) for p in port],
        "dstip": [f"149.171.126.{h % 10}" for h in host[::-1]],
        "dsport": np.where(labels == 1, "80", "53").astype(object),
        "proto": np.where(labels == 1, "udp", "tcp").astype(object),
        "service": np.full(n_packets, "-", dtype=object),
        "Stime": [str(s) for s in start],
        "Ltime": [str(s + 1) for s in start],
        "attack_cat": np.where(labels == 1, "DoS", "").astype(object),
    }
    for name, values in fixed.items():
        if name in cols:
            cols[name] = np.asarray(values, dtype=object)
    cols[schema.label_column] = np.array([str(v) for v in labels], dtype=object)

    ordered = [cols[name] for name in schema.columns]
    return [PacketRecord(tuple(str(c[i]) for c in ordered), int(labels[i]))
            for i in range(n_packets)]
