"""scikit-learn compatible wrappers around the feature pipeline and detector."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from edgedetect.features import (
    DEFAULT_CATEGORICAL,
    DEFAULT_SELECTED,
    DEFAULT_T,
    N_CATEGORIES,
    UnknownCategoryCounter,
    engineer_rows,
    fit_feature_spec,
    n_windows,
)
from edgedetect.ingest import PacketRecord, Schema
from edgedetect.model import DEFAULT_THRESHOLD, ModelConfig, build_model
from edgedetect.training import TrainConfig, predict_scores, train
from edgedetect.validation import as_rows, check_binary_labels, check_windows


class FeatureEngineer(TransformerMixin, BaseEstimator):
    """Selects columns, one-hot encodes the categorical one, min-max scales.

    ``X`` is a list of :class:`PacketRecord` or a 2-D array of raw cells in
    schema order. After ``fit``, ``feature_spec_`` holds the frozen encoding
    and ``unknown_categories_`` counts out-of-vocabulary values seen by
    ``transform``.
    """

    def __init__(self, selected_columns=DEFAULT_SELECTED, categorical_column=DEFAULT_CATEGORICAL,
                 n_categories=N_CATEGORIES, schema=None, strict_width=True):
        self.selected_columns = selected_columns
        self.categorical_column = categorical_column
        self.n_categories = n_categories
        self.schema = schema
        self.strict_width = strict_width

    def fit(self, X, y=None):
        rows = as_rows(X)
        records = [PacketRecord(tuple(r)) for r in rows]
        self.feature_spec_ = fit_feature_spec(
            records, self.selected_columns, self.categorical_column,
            self.schema or Schema(), self.n_categories, self.strict_width,
        )
        self.n_features_out_ = self.feature_spec_.width
        self.unknown_categories_ = UnknownCategoryCounter()
        return self

    def transform(self, X):
        check_is_fitted(self, "feature_spec_")
        return engineer_rows(as_rows(X), self.feature_spec_, self.unknown_categories_)

    @classmethod
    def from_spec(cls, spec):
        est = cls(spec.selected_columns, spec.categorical_column, spec.n_categories,
                  strict_width=False)
        est.feature_spec_ = spec
        est.n_features_out_ = spec.width
        est.unknown_categories_ = UnknownCategoryCounter()
        return est


class SlidingWindows(TransformerMixin, BaseEstimator):
    """Turns an ``(m, features)`` packet matrix into ``(m - T + 1, T, features)``."""

    def __init__(self, window_length=DEFAULT_T):
        self.window_length = window_length

    def fit(self, X, y=None):
        X = np.asarray(X)
        if X.ndim != 2:
            raise ValueError(f"expected an (m, features) matrix, got ndim={X.ndim}")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"expected an (m, features) matrix, got ndim={X.ndim}")
        n_windows(len(X), self.window_length)
        return sliding_window_view(X, (self.window_length, X.shape[1]))[:, 0].copy()

    def window_labels(self, y):
        """Labels aligned with :meth:`transform`: each window's last packet."""
        y = np.asarray(y)
        n_windows(len(y), self.window_length)
        return y[self.window_length - 1:]


class EdgeDetectClassifier(ClassifierMixin, BaseEstimator):
    """Recurrent window classifier (FastRNN, FastGRNN, LSTM or GRU).

    ``predict`` flags a window as attack (1) when its attack probability
    reaches ``threshold``; ``predict_proba`` columns are (normal, attack).
    """

    def __init__(self, cell_kind="FastGRNN", rnn_layers=1, hidden_size=128, dense_size=128,
                 threshold=DEFAULT_THRESHOLD, epochs=20, batch_size=64, learning_rate=1e-3,
                 lr_decay=1.0, optimizer="Adam", early_stop_patience=5,
                 validation_fraction=0.1, pos_weight=1.0, random_state=0):
        self.cell_kind = cell_kind
        self.rnn_layers = rnn_layers
        self.hidden_size = hidden_size
        self.dense_size = dense_size
        self.threshold = threshold
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.optimizer = optimizer
        self.early_stop_patience = early_stop_patience
        self.validation_fraction = validation_fraction
        self.pos_weight = pos_weight
        self.random_state = random_state

    def _model_config(self, n_features):
        return ModelConfig(self.cell_kind, self.rnn_layers, self.hidden_size, self.dense_size,
                           n_features, self.threshold)

    def _train_config(self):
        return TrainConfig(
            epochs=self.epochs, batch_size=self.batch_size, learning_rate=self.learning_rate,
            lr_decay=self.lr_decay, seed=self.random_state,
            early_stop_patience=self.early_stop_patience,
            validation_fraction=self.validation_fraction, optimizer=self.optimizer,
            pos_weight=self.pos_weight,
        )

    def fit(self, X, y):
        X = check_windows(X)
        y = check_binary_labels(y, len(X))
        initial = build_model(self._model_config(X.shape[2]), seed=self.random_state)
        self.model_, self.history_ = train(initial, X, y, self._train_config())
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = X.shape[2]
        self.window_length_ = X.shape[1]
        return self

    @classmethod
    def from_params(cls, params, window_length=None):
        """Wrap an already trained (e.g. loaded) :class:`ModelParams`."""
        c = params.config
        est = cls(c.cell_kind, c.rnn_layers, c.hidden_size, c.dense_size, c.threshold)
        est.model_ = params
        est.history_ = []
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = c.input_size
        est.window_length_ = window_length
        return est

    def decision_function(self, X):
        """Attack probability per window."""
        check_is_fitted(self, "model_")
        X = check_windows(X, self.n_features_in_)
        return predict_scores(self.model_, X)

    def predict_proba(self, X):
        p = self.decision_function(X)
        return np.column_stack([1.0 - p, p])

    def predict(self, X):
        return (self.decision_function(X) >= self.threshold).astype(np.int64)
