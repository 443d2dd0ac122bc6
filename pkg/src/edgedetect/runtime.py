"""Streaming detection loop, process resource monitor, and run timing."""

import csv
import glob
import json
import logging
import os
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from edgedetect.features import UnknownCategoryCounter, engineer_rows
from edgedetect.ingest import Schema, iter_records
from edgedetect.model import ATTACK, Prediction, classify, forward
from edgedetect.serialization import check_digests

logger = logging.getLogger(__name__)


@dataclass
class StreamCounters:
    packets_seen: int = 0
    windows_classified: int = 0
    attacks_flagged: int = 0
    malformed_records: int = 0
    unknown_categories: UnknownCategoryCounter = field(default_factory=UnknownCategoryCounter)

    def to_dict(self):
        return {
            "packets_seen": self.packets_seen,
            "windows_classified": self.windows_classified,
            "attacks_flagged": self.attacks_flagged,
            "malformed_records": self.malformed_records,
            "unknown_categories": self.unknown_categories.count,
        }


class StreamDetector:
    """Keeps the last ``T`` engineered packets and classifies each full window.

    The buffer never holds more than ``T`` vectors, so memory is independent
    of stream length.
    """

    def __init__(self, params, spec, window_length, threshold=None, model_digest=None):
        if model_digest is not None:
            check_digests(model_digest, spec.digest())
        if params.config.input_size != spec.width:
            raise ValueError(
                f"model expects {params.config.input_size} features, spec produces {spec.width}"
            )
        if window_length < 1:
            raise ValueError("window length must be >= 1")
        self.params = params
        self.spec = spec
        self.window_length = window_length
        self.threshold = params.config.threshold if threshold is None else threshold
        self.buffer = deque(maxlen=window_length)
        self.counters = StreamCounters()

    def push_values(self, values):
        """Feed one raw record; returns a :class:`Prediction` once the window is full.

        Raises ``ValueError`` for records that cannot be engineered; such a
        record leaves the buffer untouched.
        """
        vec = engineer_rows([values], self.spec, self.counters.unknown_categories)[0]
        index = self.counters.packets_seen
        self.counters.packets_seen += 1
        self.buffer.append(vec)
        if len(self.buffer) < self.window_length:
            return None
        p = forward(self.params, np.stack(self.buffer), "infer")
        verdict = classify(p, self.threshold)
        self.counters.windows_classified += 1
        if verdict == ATTACK:
            self.counters.attacks_flagged += 1
        return Prediction(p, verdict, index)

    def push(self, record):
        return self.push_values(record.values)


def detect_stream(source, params, spec, window_length, threshold=None, schema=Schema(),
                  model_digest=None, detector=None):
    """Yield one :class:`Prediction` per full window over a CSV record stream.

    Malformed records are logged, counted and skipped; the stream never
    aborts on bad input. Pass ``detector`` to inspect its counters.
    """
    det = detector or StreamDetector(params, spec, window_length, threshold, model_digest)
    def skipped(exc):
        det.counters.malformed_records += 1

    for record in iter_records(source, schema, on_error="skip", on_skip=skipped):
        try:
            pred = det.push(record)
        except ValueError as exc:
            logger.warning("skipping record that cannot be encoded: %s", exc)
            det.counters.malformed_records += 1
            continue
        if pred is not None:
            yield pred


def write_ndjson(predictions, fh):
    n = 0
    for pred in predictions:
        fh.write(json.dumps(pred.to_dict()) + "\n")
        n += 1
    return n


# --- resource monitoring -----------------------------------------------------

class MonitoringUnavailable(RuntimeError):
    """The platform offers no per-process statistics interface."""


@dataclass(frozen=True)
class ResourceSample:
    timestamp: float
    cpu_percent_per_core: tuple
    resident_bytes: int
    virtual_bytes: int

    @property
    def total_cpu_percent(self):
        return float(sum(self.cpu_percent_per_core))


def _stat_fields(text):
    # fields after the parenthesised command name; index 0 is field 3 (state)
    return text[text.rindex(")") + 2:].split()


class ProcStatBackend:
    """Reads ``/proc/self`` the way ``top`` does.

    CPU ticks of each thread are attributed to the core the thread last ran
    on (``per_core`` capability); memory comes from the process stat line.
    """

    per_core = True

    def __init__(self, pid="self"):
        self.root = f"/proc/{pid}"
        if not os.path.exists(f"{self.root}/stat"):
            raise MonitoringUnavailable(f"{self.root}/stat is not readable on {sys.platform}")
        self.n_cores = os.cpu_count() or 1
        self.clk_tck = os.sysconf("SC_CLK_TCK")
        self.page_size = os.sysconf("SC_PAGE_SIZE")

    def thread_ticks(self):
        """``{tid: (ticks, core)}`` for every live thread."""
        out = {}
        for path in glob.glob(f"{self.root}/task/*/stat"):
            try:
                with open(path) as fh:
                    f = _stat_fields(fh.read())
            except OSError:
                continue  # thread exited between listing and reading
            out[path] = (int(f[11]) + int(f[12]), int(f[36]))
        return out

    def memory(self):
        with open(f"{self.root}/stat") as fh:
            f = _stat_fields(fh.read())
        return int(f[21]) * self.page_size, int(f[20])


class ResourceMonitor:
    """Samples this process every ``period`` seconds on a background thread.

    Use as a context manager around the monitored work::

        with ResourceMonitor(0.1) as mon:
            run_job()
        mon.summary()
    """

    def __init__(self, period=0.1, backend=None):
        if period <= 0:
            raise ValueError("period must be > 0")
        self.period = period
        self.backend = backend or ProcStatBackend()
        self.samples = []
        self._stop = threading.Event()
        self._thread = None

    def _take(self, prev_ticks, prev_time):
        now = time.monotonic()
        ticks = self.backend.thread_ticks()
        rss, vms = self.backend.memory()
        interval = now - prev_time
        per_core = [0.0] * self.backend.n_cores
        for key, (t, core) in ticks.items():
            delta = t - prev_ticks.get(key, (0, core))[0]
            if delta > 0 and 0 <= core < len(per_core):
                per_core[core] += delta
        scale = 100.0 / (self.backend.clk_tck * interval)
        pct = tuple(min(100.0, max(0.0, d * scale)) for d in per_core)
        return ResourceSample(now, pct, rss, vms), ticks, now

    def _run(self):
        ticks = self.backend.thread_ticks()
        last = time.monotonic()
        while True:
            stopping = self._stop.wait(self.period)
            if stopping and time.monotonic() - last < 1e-3:
                break
            sample, ticks, last = self._take(ticks, last)
            if not self.samples or sample.timestamp > self.samples[-1].timestamp:
                self.samples.append(sample)
            if stopping:
                break

    def start(self):
        self._stop.clear()
        self._thread = threading.Thread(target=self._run, name="edgedetect-monitor", daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self._stop.set()
        if self._thread is not None:
            self._thread.join()
            self._thread = None
        return self.samples

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def summary(self):
        return summarize(self.samples, self.period, self.backend.per_core)

    def write_csv(self, fh):
        write_samples_csv(self.samples, fh, self.backend.n_cores)


def summarize(samples, period=None, per_core=True):
    """Mean and max of every sampled quantity."""
    out = {"n_samples": len(samples), "period_s": period, "per_core_attribution": per_core}
    if not samples:
        return out
    cores = np.array([s.cpu_percent_per_core for s in samples])
    series = {
        "total_cpu_percent": cores.sum(axis=1),
        "resident_bytes": np.array([s.resident_bytes for s in samples], dtype=np.float64),
        "virtual_bytes": np.array([s.virtual_bytes for s in samples], dtype=np.float64),
    }
    for name, v in series.items():
        out[name] = {"mean": float(v.mean()), "max": float(v.max())}
    out["cpu_percent_per_core"] = {
        "mean": [float(x) for x in cores.mean(axis=0)],
        "max": [float(x) for x in cores.max(axis=0)],
    }
    return out


def write_samples_csv(samples, fh, n_cores):
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(["timestamp"] + [f"core{i}" for i in range(n_cores)]
                    + ["resident_bytes", "virtual_bytes"])
    for s in samples:
        writer.writerow([f"{s.timestamp:.6f}"] + [f"{c:.3f}" for c in s.cpu_percent_per_core]
                        + [s.resident_bytes, s.virtual_bytes])


# --- timing ------------------------------------------------------------------

@dataclass(frozen=True)
class TimingResult:
    seconds: float
    windows: int

    @property
    def throughput(self):
        """Windows per second (0 for an empty or instantaneous job)."""
        return self.windows / self.seconds if self.seconds > 0 and self.windows else 0.0

    def to_dict(self):
        return {"wall_time_s": self.seconds, "windows": self.windows,
                "windows_per_s": self.throughput}


def time_run(task, n_windows):
    """Run ``task()`` and measure it on the monotonic clock.

    Returns ``(TimingResult, task result)``.
    """
    start = time.perf_counter()
    result = task()
    return TimingResult(time.perf_counter() - start, n_windows), result
