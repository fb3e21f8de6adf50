"""Staged-disease classifier: scaling rules, conv blocks, model, training."""

from .blocks import FusedMBConv, MBConv, SqueezeExcite, compound_scale, round_channels, scale_stage_plan
from .model import StageClassifier
from .training import (
    CLASS_ORDER,
    EarlyStopper,
    EpochRecord,
    TrainedClassifier,
    dense_features,
    early_stop_trace,
    load_classifier,
    predict_proba,
    predict_stage,
    save_classifier,
    split_to_tensors,
    train_classifier,
    write_classifier_history_csv,
)
