"""Edge-Detect: lightweight recurrent DDoS detection for edge nodes.

Packet records are reduced to 25 engineered features, grouped into stride-1
windows of ``T`` packets and classified by a single-layer FastRNN/FastGRNN
network. Everything runs on numpy with hand-derived gradients.
"""

from edgedetect.estimator import EdgeDetectClassifier, FeatureEngineer, SlidingWindows
from edgedetect.features import (
    FeatureSpec,
    WindowTensor,
    Windows,
    engineer,
    engineer_records,
    fit_feature_spec,
    make_windows,
)
from edgedetect.ingest import PacketRecord, Schema, generate_synthetic, parse_records
from edgedetect.metrics import MetricsReport, auc, kappa
from edgedetect.model import (
    ModelConfig,
    ModelParams,
    Prediction,
    bptt_gradients,
    build_model,
    classify,
    deep_defense_config,
    edge_detect_config,
    forward,
    param_count,
)
from edgedetect.runtime import ResourceMonitor, ResourceSample, StreamDetector, detect_stream, time_run
from edgedetect.serialization import load_model, save_model, serialized_size_bytes
from edgedetect.training import TrainConfig, evaluate, train

__version__ = "0.1.0"

__all__ = [
    "EdgeDetectClassifier", "FeatureEngineer", "FeatureSpec", "MetricsReport", "ModelConfig",
    "ModelParams", "PacketRecord", "Prediction", "ResourceMonitor", "ResourceSample", "Schema",
    "SlidingWindows", "StreamDetector", "TrainConfig", "WindowTensor", "Windows", "auc",
    "bptt_gradients", "build_model", "classify", "deep_defense_config", "detect_stream",
    "edge_detect_config", "engineer", "engineer_records", "evaluate", "fit_feature_spec",
    "forward", "generate_synthetic", "kappa", "load_model", "make_windows", "param_count",
    "parse_records", "save_model", "serialized_size_bytes", "time_run", "train",
]
