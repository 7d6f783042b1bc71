"""Synthetic multi-modal dataset with per-modality answerability and soft targets.

Each sample is a (visual, question) feature pair plus ten simulated
annotator votes.  The sample's mode controls which modality carries the
class signal: visual only, question only, both jointly (the class is the
modular sum of two half-labels, so neither modality alone suffices), or
neither.  Class signal is encoded as a class-conditional Gaussian around a
scaled basis vector; off-signal features are plain unit Gaussians.

Targets follow the soft multi-annotator rule target = min(votes / 3, 1),
and evaluation reports the matching soft accuracy alongside plain top-1.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from .model import Parameters, forward_batch

__all__ = [
    "DatasetConfig",
    "EmptySplit",
    "Metrics",
    "Sample",
    "SampleMode",
    "evaluate",
    "generate",
    "load_samples",
    "save_samples",
    "vqa_accuracy",
]

NUM_ANNOTATORS = 10
VOTE_DENOMINATOR = 3.0
CLASS_MEAN_SCALE = 4.0  # separation of class means, in units of feature stddev
NOISY_VOTE_SHARE = 0.6  # expected vote share kept by the true class when scattering


class EmptySplit(ValueError):
    """Evaluation was requested on an empty split."""


class SampleMode(Enum):
    VISUAL_ONLY = "visual_only"
    QUESTION_ONLY = "question_only"
    JOINT = "joint"
    NOISE = "noise"


MODE_ORDER = (
    SampleMode.VISUAL_ONLY,
    SampleMode.QUESTION_ONLY,
    SampleMode.JOINT,
    SampleMode.NOISE,
)


@dataclass
class Sample:
    id: int
    x_v: np.ndarray
    x_q: np.ndarray
    target: np.ndarray
    annotator_counts: np.ndarray
    mode: SampleMode


@dataclass(frozen=True)
class DatasetConfig:
    pool_size: int = 2000
    test_size: int = 500
    num_classes: int = 10
    dim_v: int = 16
    dim_q: int = 16
    mode_fractions: tuple[float, float, float, float] = (0.25, 0.25, 0.40, 0.10)
    label_noise: float = 0.1
    seed: int = 7

    def __post_init__(self):
        if self.pool_size < 1 or self.test_size < 1:
            raise ValueError("sizes >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes >= 2")
        fracs = np.asarray(self.mode_fractions, dtype=np.float64)
        if fracs.size != 4 or np.any(fracs < 0.0):
            raise ValueError("mode_fractions are four non-negative reals")
        if abs(float(fracs.sum()) - 1.0) > 1e-9:
            raise ValueError("mode_fractions sum to 1")
        if not 0.0 <= self.label_noise <= 1.0:
            raise ValueError("label_noise in [0,1]")
        # class means are scaled basis vectors, so both feature spaces must
        # have at least one axis per class
        if self.dim_v < self.num_classes or self.dim_q < self.num_classes:
            raise ValueError("dim_v and dim_q must be >= num_classes")


def _votes(rng: np.random.Generator, label: int, k: int, label_noise: float) -> np.ndarray:
    counts = np.zeros(k, dtype=np.int64)
    if rng.random() >= label_noise:
        counts[label] = NUM_ANNOTATORS
        return counts
    # scatter the ten votes across the true class plus 1-2 distractors
    n_classes = int(rng.integers(2, 4))
    others = rng.choice([c for c in range(k) if c != label], size=n_classes - 1, replace=False)
    weights = np.full(n_classes, (1.0 - NOISY_VOTE_SHARE) / (n_classes - 1))
    weights[0] = NOISY_VOTE_SHARE
    drawn = rng.multinomial(NUM_ANNOTATORS, weights)
    counts[label] = drawn[0]
    for cls, votes in zip(others, drawn[1:]):
        counts[cls] = votes
    return counts


def _make_sample(rng: np.random.Generator, sample_id: int, cfg: DatasetConfig) -> Sample:
    k = cfg.num_classes
    mode = MODE_ORDER[rng.choice(4, p=np.asarray(cfg.mode_fractions, dtype=np.float64))]
    label = int(rng.integers(k))

    x_v = rng.standard_normal(cfg.dim_v)
    x_q = rng.standard_normal(cfg.dim_q)
    if mode is SampleMode.VISUAL_ONLY:
        x_v[label] += CLASS_MEAN_SCALE
    elif mode is SampleMode.QUESTION_ONLY:
        x_q[label] += CLASS_MEAN_SCALE
    elif mode is SampleMode.JOINT:
        half_v = int(rng.integers(k))
        half_q = (label - half_v) % k
        x_v[half_v] += CLASS_MEAN_SCALE
        x_q[half_q] += CLASS_MEAN_SCALE
    # NOISE carries no class signal in either modality

    counts = _votes(rng, label, k, cfg.label_noise)
    target = np.minimum(counts / VOTE_DENOMINATOR, 1.0)
    return Sample(sample_id, x_v, x_q, target, counts, mode)


def generate(cfg: DatasetConfig) -> tuple[list[Sample], list[Sample]]:
    """Generate the (pool, test) splits, deterministic in cfg.seed."""
    rng = np.random.default_rng(cfg.seed)
    pool = [_make_sample(rng, i, cfg) for i in range(cfg.pool_size)]
    test = [_make_sample(rng, cfg.pool_size + i, cfg) for i in range(cfg.test_size)]
    return pool, test


def vqa_accuracy(predicted_class: int, annotator_counts) -> float:
    """Soft accuracy min(votes for the predicted class / 3, 1)."""
    counts = np.asarray(annotator_counts)
    if not 0 <= predicted_class < counts.size:
        raise IndexError(f"predicted class {predicted_class} out of range for {counts.size} classes")
    return min(float(counts[predicted_class]) / VOTE_DENOMINATOR, 1.0)


@dataclass(frozen=True)
class Metrics:
    vqa_accuracy_mean: float
    top1_accuracy: float


def evaluate(params: Parameters, test: Sequence[Sample]) -> Metrics:
    """Mean soft accuracy and top-1 accuracy of the main head on a split.

    The predicted class is the argmax of the main output (lowest index on
    ties); top-1 compares it to the majority-vote class.
    """
    if len(test) == 0:
        raise EmptySplit("evaluation requires a non-empty split")
    x_v = np.stack([s.x_v for s in test])
    x_q = np.stack([s.x_q for s in test])
    _, y_main, _, _ = forward_batch(params, x_v, x_q)
    preds = np.argmax(y_main, axis=1)
    counts = np.stack([s.annotator_counts for s in test])
    soft = np.minimum(counts[np.arange(len(test)), preds] / VOTE_DENOMINATOR, 1.0)
    top1 = preds == np.argmax(counts, axis=1)
    return Metrics(float(soft.mean()), float(top1.mean()))


def save_samples(path, samples: Sequence[Sample]) -> None:
    """Write samples as tab-separated lines.

    Fields: id, mode, comma-joined votes, comma-joined x_v, comma-joined
    x_q.  Floats use repr so a round trip is bit-exact; targets are not
    stored because they are a pure function of the votes.
    """
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write("# tri-modal samples v1\n")
        for s in samples:
            fh.write(
                "\t".join(
                    [
                        str(s.id),
                        s.mode.value,
                        ",".join(str(int(c)) for c in s.annotator_counts),
                        ",".join(repr(float(v)) for v in s.x_v),
                        ",".join(repr(float(v)) for v in s.x_q),
                    ]
                )
                + "\n"
            )


def load_samples(path) -> list[Sample]:
    """Read samples written by :func:`save_samples`."""
    samples = []
    for line in Path(path).read_text(encoding="ascii").splitlines():
        if not line or line.startswith("#"):
            continue
        id_str, mode_str, counts_str, xv_str, xq_str = line.split("\t")
        counts = np.array([int(c) for c in counts_str.split(",")], dtype=np.int64)
        samples.append(
            Sample(
                id=int(id_str),
                x_v=np.array([float(v) for v in xv_str.split(",")]),
                x_q=np.array([float(v) for v in xq_str.split(",")]),
                target=np.minimum(counts / VOTE_DENOMINATOR, 1.0),
                annotator_counts=counts,
                mode=SampleMode(mode_str),
            )
        )
    return samples
