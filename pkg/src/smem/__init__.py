"""Pool-based active learning for tri-branch multi-modal classifiers.

The library covers the full desk-scale pipeline: probability-vector math,
acquisition scoring (single-modal entropy measures and classic baselines),
a compact multi-modal classifier with self-distillation and exact manual
gradients, synthetic multi-modal data with soft annotator targets, the
staged acquisition protocol, and a sweep CLI with CSV/figure reporting.
"""

from .acquisition import (
    STRATEGIES,
    AcquisitionConfig,
    OutputTriple,
    ScoredSample,
    score_sample,
    select_top_b,
)
from .alloop import ALConfig, Pool, StageRecord, run_experiment
from .dataset import DatasetConfig, Metrics, Sample, SampleMode, evaluate, generate, vqa_accuracy
from .model import ModelConfig, Parameters, TrainConfig, forward, init_model, train
from .probmath import entropy, jsd, kl_div, normalize

__version__ = "0.1.0"

__all__ = [
    "ALConfig",
    "AcquisitionConfig",
    "DatasetConfig",
    "Metrics",
    "ModelConfig",
    "OutputTriple",
    "Parameters",
    "Pool",
    "STRATEGIES",
    "Sample",
    "SampleMode",
    "ScoredSample",
    "StageRecord",
    "TrainConfig",
    "entropy",
    "evaluate",
    "forward",
    "generate",
    "init_model",
    "jsd",
    "kl_div",
    "normalize",
    "run_experiment",
    "score_sample",
    "select_top_b",
    "train",
    "vqa_accuracy",
]
