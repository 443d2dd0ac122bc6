import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.pipeline import Pipeline

from edgedetect.estimator import EdgeDetectClassifier, FeatureEngineer, SlidingWindows
from edgedetect.ingest import generate_synthetic
from edgedetect.model import predict_proba
from helpers import synthetic_windows


def test_feature_engineer_accepts_records_and_arrays():
    records = generate_synthetic(200, seed=0)
    fe = FeatureEngineer().fit(records)
    a = fe.transform(records)
    b = clone(fe).fit(np.array([r.values for r in records])).transform(
        np.array([r.values for r in records]))
    assert a.shape == (200, 25)
    np.testing.assert_array_equal(a, b)
    assert fe.n_features_out_ == 25


def test_feature_engineer_counts_unknown_states():
    records = generate_synthetic(200, seed=0)
    fe = FeatureEngineer().fit(records[:5])
    fe.transform(records)
    assert fe.unknown_categories_.count > 0


def test_from_spec_matches_fit():
    records = generate_synthetic(100, seed=4)
    fe = FeatureEngineer().fit(records)
    again = FeatureEngineer.from_spec(fe.feature_spec_)
    np.testing.assert_array_equal(again.transform(records), fe.transform(records))


def test_unfitted_errors():
    with pytest.raises(NotFittedError):
        FeatureEngineer().transform(generate_synthetic(3))
    with pytest.raises(NotFittedError):
        EdgeDetectClassifier().predict(np.zeros((1, 5, 25)))


def test_sliding_windows():
    X = np.arange(12.0).reshape(6, 2)
    sw = SlidingWindows(4).fit(X)
    out = sw.transform(X)
    assert out.shape == (3, 4, 2)
    np.testing.assert_array_equal(out[1], X[1:5])
    assert list(sw.window_labels(np.arange(6))) == [3, 4, 5]
    with pytest.raises(ValueError):
        sw.transform(X[:3])


def test_params_and_clone():
    clf = EdgeDetectClassifier(cell_kind="FastRNN", hidden_size=16, random_state=3)
    params = clf.get_params()
    assert params["cell_kind"] == "FastRNN" and params["hidden_size"] == 16
    twin = clone(clf)
    assert twin.get_params() == params
    twin.set_params(threshold=0.6)
    assert twin.threshold == 0.6 and clf.threshold == 0.8


def test_classifier_fit_predict():
    X, y, _, _ = synthetic_windows(1500, T=8, seed=3)
    clf = EdgeDetectClassifier(hidden_size=8, dense_size=8, epochs=6, learning_rate=1e-2)
    clf.fit(X, y)
    proba = clf.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0)
    np.testing.assert_array_equal(clf.predict(X), (proba[:, 1] >= 0.8).astype(int))
    assert clf.score(X, y) >= 0.95
    assert list(clf.classes_) == [0, 1]
    with pytest.raises(ValueError):
        clf.predict(X[:, :, :10])


def test_from_params_wraps_model():
    X, y, _, _ = synthetic_windows(600, T=6, seed=0)
    clf = EdgeDetectClassifier(hidden_size=4, dense_size=4, epochs=1).fit(X, y)
    wrapped = EdgeDetectClassifier.from_params(clf.model_, window_length=6)
    np.testing.assert_array_equal(wrapped.decision_function(X), predict_proba(clf.model_, X))


def test_pipeline_on_packet_matrix():
    records = generate_synthetic(300, seed=6)
    pipe = Pipeline([("features", FeatureEngineer()), ("windows", SlidingWindows(5))])
    out = pipe.fit_transform(records)
    assert out.shape == (296, 5, 25)
    assert np.all((out >= 0) & (out <= 1))


def test_label_validation():
    X = np.zeros((4, 3, 25))
    with pytest.raises(ValueError):
        EdgeDetectClassifier().fit(X, [0, 1, 2, 0])
    with pytest.raises(ValueError):
        EdgeDetectClassifier().fit(X, [0, 1])
    bad = X.copy()
    bad[0, 0, 0] = np.inf
    with pytest.raises(ValueError):
        EdgeDetectClassifier().fit(bad, [0, 1, 1, 0])
