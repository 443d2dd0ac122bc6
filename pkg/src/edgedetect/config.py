"""Run configuration: YAML file, dotted ``key=value`` overrides, validation."""

import copy
from dataclasses import dataclass

import yaml

from edgedetect.features import (
    DEFAULT_CATEGORICAL,
    DEFAULT_SELECTED,
    DEFAULT_T,
    N_CATEGORIES,
    N_SELECTED,
)
from edgedetect.ingest import UNSW_NB15_COLUMNS, Schema
from edgedetect.model import DEFAULT_THRESHOLD, ModelConfig
from edgedetect.training import TrainConfig

DEFAULTS = {
    "seed": 0,
    "threads": 1,
    "out_dir": "out",
    "data": {
        "train_path": None,
        "test_path": None,
        "delimiter": ",",
        "header": True,
        "label_column": "Label",
        "columns": None,
    },
    "features": {
        "selected_columns": list(DEFAULT_SELECTED),
        "categorical_column": DEFAULT_CATEGORICAL,
        "n_categories": N_CATEGORIES,
        "strict_width": True,
        "window_length": DEFAULT_T,
    },
    "model": {
        "cell_kind": "FastGRNN",
        "rnn_layers": 1,
        "hidden_size": 128,
        "dense_size": 128,
        "threshold": DEFAULT_THRESHOLD,
    },
    "train": {
        "epochs": 20,
        "batch_size": 64,
        "learning_rate": 1e-3,
        "lr_decay": 1.0,
        "early_stop_patience": 5,
        "validation_fraction": 0.1,
        "optimizer": "Adam",
        "loss_kind": "BCE",
        "pos_weight": 1.0,
    },
    "monitor": {
        "period": 0.1,
    },
}


class ConfigError(ValueError):
    pass


def _merge(base, override, path=""):
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(value, dict):
                raise ConfigError(f"config key {where!r} must be a mapping")
            _merge(base[key], value, where + ".")
        else:
            base[key] = value


def apply_override(tree, assignment):
    """Apply one ``dotted.key=value`` assignment; the value is parsed as YAML."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = tree
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config section {part!r} in {key!r}")
        node = node[part]
    if parts[-1] not in node or isinstance(node[parts[-1]], dict):
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = yaml.safe_load(raw)


@dataclass
class RunConfig:
    tree: dict

    @classmethod
    def load(cls, path=None, overrides=(), **top_level):
        tree = copy.deepcopy(DEFAULTS)
        if path is not None:
            with open(path) as fh:
                loaded = yaml.safe_load(fh) or {}
            if not isinstance(loaded, dict):
                raise ConfigError(f"{path}: top level must be a mapping")
            _merge(tree, loaded)
        for assignment in overrides:
            apply_override(tree, assignment)
        for key, value in top_level.items():
            if value is not None:
                tree[key] = value
        cfg = cls(tree)
        cfg.validate()
        return cfg

    def __getitem__(self, key):
        return self.tree[key]

    def validate(self):
        t = self.tree
        for key in ("seed", "threads"):
            if not isinstance(t[key], int) or t[key] < 0:
                raise ConfigError(f"{key} must be a non-negative integer")
        if t["threads"] < 1:
            raise ConfigError("threads must be >= 1")
        f = t["features"]
        if not isinstance(f["window_length"], int) or f["window_length"] < 1:
            raise ConfigError("features.window_length must be a positive integer")
        if f["categorical_column"] not in f["selected_columns"]:
            raise ConfigError("features.categorical_column must be one of features.selected_columns")
        if f["strict_width"] and (len(f["selected_columns"]) != N_SELECTED
                                  or f["n_categories"] != N_CATEGORIES):
            raise ConfigError(
                f"features must select {N_SELECTED} columns with {N_CATEGORIES} categories "
                "(set features.strict_width=false to override)"
            )
        if t["monitor"]["period"] <= 0:
            raise ConfigError("monitor.period must be > 0")
        try:
            schema = self.schema()
            for col in f["selected_columns"]:
                schema.index(col)
            self.model_config()
            self.train_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None

    def schema(self):
        d = self.tree["data"]
        return Schema(
            columns=tuple(d["columns"] or UNSW_NB15_COLUMNS),
            label_column=d["label_column"],
            header=bool(d["header"]),
            delimiter=d["delimiter"],
        )

    @property
    def input_size(self):
        f = self.tree["features"]
        return len(f["selected_columns"]) - 1 + f["n_categories"]

    def model_config(self):
        m = self.tree["model"]
        return ModelConfig(m["cell_kind"], m["rnn_layers"], m["hidden_size"], m["dense_size"],
                           self.input_size, float(m["threshold"]))

    def train_config(self):
        return TrainConfig(seed=self.tree["seed"], **self.tree["train"])

    def to_yaml(self):
        return yaml.safe_dump(self.tree, sort_keys=False)


def defaults_yaml():
    return yaml.safe_dump(DEFAULTS, sort_keys=False)
