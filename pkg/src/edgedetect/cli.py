"""Command-line interface: ``edgedetect <subcommand>``.

Pipeline: ``preprocess`` -> ``train`` -> ``eval`` / ``detect`` / ``bench``.
Every subcommand reads the same YAML config (``--config``), accepts
``--set section.key=value`` overrides and writes into ``--out``.
"""

import argparse
import io
import json
import logging
import os
import sys
import tempfile
from contextlib import contextmanager
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from edgedetect.config import ConfigError, RunConfig, defaults_yaml
from edgedetect.features import FeatureSpec, engineer_records, fit_feature_spec, make_windows
from edgedetect.ingest import ParseError, generate_synthetic, parse_records, write_records
from edgedetect.model import (
    Prediction,
    build_model,
    classify,
    param_count,
    recurrent_param_count,
)
from edgedetect.runtime import (
    MonitoringUnavailable,
    ResourceMonitor,
    StreamDetector,
    detect_stream,
    time_run,
    write_ndjson,
)
from edgedetect.serialization import (
    DigestMismatchError,
    ModelFileError,
    check_digests,
    load_archive,
    load_model,
    save_archive,
    save_model,
)
from edgedetect.training import evaluate, history_to_dict, predict_scores, train

logger = logging.getLogger("edgedetect")

SPEC_FILE = "feature_spec.json"
TRAIN_ARCHIVE = "train_windows.edw"
TEST_ARCHIVE = "test_windows.edw"
MODEL_FILE = "model.eddm"
HISTORY_FILE = "history.json"
METRICS_FILE = "metrics.json"
RESOURCES_FILE = "resources.csv"
BENCH_FILE = "bench_summary.json"
BENCH_VERDICTS = "bench_verdicts.ndjson"


class CommandError(RuntimeError):
    pass


def _write_atomic(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        os.unlink(tmp)
        raise


def _read_bytes(path, what):
    try:
        return Path(path).read_bytes()
    except FileNotFoundError:
        raise CommandError(f"{what} not found: {path}") from None


def _read_csv(path, schema):
    if path is None:
        raise CommandError("no input path configured (set data.train_path / data.test_path)")
    try:
        with open(path, newline="") as fh:
            return parse_records(fh, schema)
    except FileNotFoundError:
        raise CommandError(f"input file not found: {path}") from None
    except ParseError as exc:
        raise CommandError(f"{path}: {exc}") from None


def _out(cfg, name):
    return Path(cfg["out_dir"]) / name


def _load_spec(cfg):
    text = _read_bytes(_out(cfg, SPEC_FILE), "feature spec").decode("utf-8")
    return FeatureSpec.from_json(text)


def _load_model_file(path):
    params, digest = load_model(_read_bytes(path, "model file"))
    return params, digest


def _emit(obj):
    sys.stdout.write(json.dumps(obj, indent=2) + "\n")


def _partition_summary(records, windows):
    labels = np.array([r.label for r in records])
    return {"packets": len(records), "windows": len(windows),
            "attack_fraction": float(labels.mean()) if len(labels) else 0.0}


# --- subcommands -------------------------------------------------------------

def cmd_synth(cfg, args):
    records = generate_synthetic(args.n_packets, args.attack_fraction, cfg["seed"],
                                 spread=args.spread, schema=cfg.schema())
    if args.output == "-":
        write_records(records, sys.stdout, cfg.schema())
    else:
        buf = io.StringIO()
        write_records(records, buf, cfg.schema())
        _write_atomic(args.output, buf.getvalue())
        logger.info("wrote %d synthetic records to %s", len(records), args.output)
    return 0


def cmd_preprocess(cfg, args):
    schema = cfg.schema()
    data, feats = cfg["data"], cfg["features"]
    T = feats["window_length"]
    train_records = _read_csv(data["train_path"], schema)
    if not train_records:
        raise CommandError(f"{data['train_path']}: no records")
    try:
        spec = fit_feature_spec(train_records, feats["selected_columns"], feats["categorical_column"],
                                schema, feats["n_categories"], feats["strict_width"])
    except ValueError as exc:
        raise CommandError(f"{data['train_path']}: {exc}") from None
    digest = spec.digest()
    summary = {"T": T, "feature_width": spec.width, "spec_digest": digest.hex()}
    parts = [("train", train_records, TRAIN_ARCHIVE)]
    if data["test_path"]:
        parts.append(("test", _read_csv(data["test_path"], schema), TEST_ARCHIVE))
    outputs = []
    for name, records, filename in parts:
        try:
            X, y = engineer_records(records, spec)
            windows = make_windows(X, y, T)
        except ValueError as exc:
            raise CommandError(f"{name} partition: {exc}") from None
        outputs.append((filename, save_archive(windows, digest)))
        summary[name] = _partition_summary(records, windows)
    _write_atomic(_out(cfg, SPEC_FILE), spec.to_json())
    for filename, blob in outputs:
        _write_atomic(_out(cfg, filename), blob)
    _emit(summary)
    return 0


def cmd_train(cfg, args):
    spec = _load_spec(cfg)
    archive = args.archive or _out(cfg, TRAIN_ARCHIVE)
    windows, digest = load_archive(_read_bytes(archive, "window archive"))
    check_digests(digest, spec.digest())
    mcfg = cfg.model_config()
    if mcfg.input_size != windows.data.shape[2]:
        raise CommandError(f"archive windows are {windows.data.shape[2]} wide, model expects {mcfg.input_size}")
    tcfg = cfg.train_config()
    params, history = train(build_model(mcfg, cfg["seed"]), windows.data, windows.labels, tcfg)
    blob = save_model(params, digest)
    _write_atomic(args.model or _out(cfg, MODEL_FILE), blob)
    _write_atomic(_out(cfg, HISTORY_FILE), json.dumps(history_to_dict(tcfg, history), indent=2) + "\n")
    _emit({"epochs_run": len(history), "final": history[-1], "param_count": param_count(params),
           "model_bytes": len(blob)})
    return 0


def _eval_inputs(cfg, args):
    spec = _load_spec(cfg)
    params, model_digest = _load_model_file(args.model or _out(cfg, MODEL_FILE))
    if args.archive:
        archive = Path(args.archive)
    else:
        archive = _out(cfg, TEST_ARCHIVE)
        if not archive.exists():
            archive = _out(cfg, TRAIN_ARCHIVE)
    windows, archive_digest = load_archive(_read_bytes(archive, "window archive"))
    check_digests(model_digest, archive_digest, spec.digest())
    return params, windows


def _comparison_table(paths):
    rows = []
    for path in paths:
        params, _ = _load_model_file(path)
        c = params.config
        rows.append({
            "model": str(path), "cell": c.cell_kind, "layers": c.rnn_layers,
            "cells": c.hidden_size, "recurrent_params": recurrent_param_count(c),
            "total_params": param_count(params), "file_bytes": len(save_model(params)),
        })
    base = max(r["total_params"] for r in rows)
    for r in rows:
        r["param_ratio"] = r["total_params"] / base
    return rows


def _print_table(rows, fh):
    header = f"{'cell':<9} {'layers':>6} {'cells':>5} {'params':>9} {'KB':>8} {'ratio':>6}  model"
    print(header, file=fh)
    for r in rows:
        print(f"{r['cell']:<9} {r['layers']:>6} {r['cells']:>5} {r['total_params']:>9} "
              f"{r['file_bytes'] / 1024:>8.1f} {r['param_ratio']:>6.3f}  {r['model']}", file=fh)


def cmd_eval(cfg, args):
    params, windows = _eval_inputs(cfg, args)
    report = evaluate(params, windows.data, windows.labels)
    _write_atomic(_out(cfg, METRICS_FILE), report.to_json())
    _emit(report.to_dict())
    print(f"AUC {100 * report.auc:.2f}%  KAPPA {100 * report.kappa:.2f}%  "
          f"F1SCORE {report.f1_percent:.2f}", file=sys.stderr)
    if args.compare:
        _print_table(_comparison_table([args.model or _out(cfg, MODEL_FILE), args.compare]), sys.stderr)
    return 0


@contextmanager
def _open_input(path):
    if path == "-":
        yield sys.stdin
    else:
        try:
            fh = open(path, newline="")
        except FileNotFoundError:
            raise CommandError(f"input file not found: {path}") from None
        with fh:
            yield fh


@contextmanager
def _open_output(path):
    if path in (None, "-"):
        yield sys.stdout
        sys.stdout.flush()
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w") as fh:
            yield fh


def cmd_detect(cfg, args):
    spec = _load_spec(cfg)
    params, digest = _load_model_file(args.model or _out(cfg, MODEL_FILE))
    detector = StreamDetector(params, spec, cfg["features"]["window_length"], model_digest=digest)
    with _open_input(args.input) as src, _open_output(args.output) as dst:
        write_ndjson(detect_stream(src, params, spec, detector.window_length,
                                   schema=cfg.schema(), detector=detector), dst)
    logger.info("stream counters: %s", detector.counters.to_dict())
    return 0


def cmd_bench(cfg, args):
    params, windows = _eval_inputs(cfg, args)
    monitor = None
    if not args.no_monitor:
        try:
            monitor = ResourceMonitor(cfg["monitor"]["period"])
        except MonitoringUnavailable as exc:
            logger.warning("%s; reporting wall-clock time only", exc)
    if monitor:
        monitor.start()
    try:
        def workload():
            for _ in range(args.repeat - 1):
                predict_scores(params, windows.data)
            return predict_scores(params, windows.data)

        timing, scores = time_run(workload, args.repeat * len(windows))
    finally:
        if monitor:
            monitor.stop()
    threshold = params.config.threshold
    preds = (Prediction(float(p), classify(float(p), threshold), int(i))
             for p, i in zip(scores, windows.origin_index))
    buf = io.StringIO()
    write_ndjson(preds, buf)
    _write_atomic(_out(cfg, BENCH_VERDICTS), buf.getvalue())
    summary = {"cell": params.config.cell_kind, "timing": timing.to_dict(),
               "monitor": monitor.summary() if monitor else None}
    if monitor:
        buf = io.StringIO()
        monitor.write_csv(buf)
        _write_atomic(_out(cfg, RESOURCES_FILE), buf.getvalue())
    _write_atomic(_out(cfg, BENCH_FILE), json.dumps(summary, indent=2) + "\n")
    _emit(summary)
    return 0


def cmd_config(cfg, args):
    sys.stdout.write(defaults_yaml() if args.defaults else cfg.to_yaml())
    return 0


# --- argument parsing --------------------------------------------------------

def _global_flags(parser, suppress):
    d = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=d, help="YAML run configuration")
    parser.add_argument("--seed", type=int, default=d, help="global RNG seed")
    parser.add_argument("--threads", type=int, default=d, help="BLAS thread count")
    parser.add_argument("--out", default=d, help="output directory")
    parser.add_argument("--set", dest="overrides", action="append", default=d,
                        metavar="KEY=VALUE", help="override a config key (repeatable)")
    parser.add_argument("-v", "--verbose", action="count", default=d)


def build_parser():
    parser = argparse.ArgumentParser(prog="edgedetect", description=__doc__.splitlines()[0])
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_):
        p = sub.add_parser(name, help=help_)
        _global_flags(p, suppress=True)
        p.set_defaults(func=func)
        return p

    p = add("synth", cmd_synth, "write a synthetic labeled packet CSV")
    p.add_argument("--n-packets", type=int, default=10000)
    p.add_argument("--attack-fraction", type=float, default=0.5)
    p.add_argument("--spread", type=float, default=2.0)
    p.add_argument("--output", default="-")

    add("preprocess", cmd_preprocess, "fit features, write spec and window archives")

    p = add("train", cmd_train, "train a model on the train window archive")
    p.add_argument("--archive")
    p.add_argument("--model", help="output model path")

    for name, func, help_ in (("eval", cmd_eval, "evaluate a model and write metrics JSON"),
                              ("bench", cmd_bench, "time inference under the resource monitor")):
        p = add(name, func, help_)
        p.add_argument("--model")
        p.add_argument("--archive")
        if name == "eval":
            p.add_argument("--compare", metavar="MODEL",
                           help="second model file for a parameter/size comparison table")
        else:
            p.add_argument("--no-monitor", action="store_true")
            p.add_argument("--repeat", type=int, default=1,
                           help="run the inference workload this many times")

    p = add("detect", cmd_detect, "stream records and emit NDJSON verdicts")
    p.add_argument("--input", default="-", help="CSV path or - for standard input")
    p.add_argument("--output", default="-")
    p.add_argument("--model")

    p = add("config", cmd_config, "print the effective (or default) configuration")
    p.add_argument("--defaults", action="store_true")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose or 0, 2),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = RunConfig.load(args.config, args.overrides or (), seed=args.seed,
                             threads=args.threads, out_dir=args.out)
        with threadpool_limits(limits=cfg["threads"]):
            return args.func(cfg, args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 1
    except (CommandError, ConfigError, DigestMismatchError, ModelFileError, ValueError,
            OSError) as exc:
        print(f"edgedetect {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
