"""Staged active-learning protocol over a labeled/unlabeled pool.

A stage scores every unlabeled sample with the incoming model, labels the
top-b through the simulated oracle, trains on the grown labeled set
(warm-started by default), and evaluates on the held-out test split.  Stage
0 is the initial training on the randomly seeded labeled set, before any
acquisition happens, so stage records satisfy
labeled_count = initial_labeled + stage * budget.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .acquisition import (
    AcquisitionConfig,
    BudgetExceedsPool,
    OutputTriple,
    ScoredSample,
    score_sample,
    select_top_b,
)
from .dataset import DatasetConfig, Metrics, Sample, evaluate, generate
from .model import ModelConfig, Parameters, TrainConfig, forward_batch, init_model, train

__all__ = [
    "ALConfig",
    "AlreadyLabeled",
    "ExperimentState",
    "Pool",
    "StageRecord",
    "UnknownId",
    "init_pool",
    "oracle",
    "run_experiment",
    "run_stage",
]

log = logging.getLogger(__name__)


class UnknownId(KeyError):
    """An id outside the generated pool was requested."""


class AlreadyLabeled(ValueError):
    """An already-labeled id was submitted for annotation."""


@dataclass
class Pool:
    """Disjoint labeled/unlabeled id partitions; together they cover the pool."""

    labeled: list[int]
    unlabeled: list[int]


@dataclass(frozen=True)
class ALConfig:
    initial_labeled: int = 100
    budget_per_stage: int = 100
    num_stages: int = 5
    reinit_per_stage: bool = False
    eval_best_epoch: bool = False
    train: TrainConfig = field(default_factory=TrainConfig)
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    seed: int = 0

    def __post_init__(self):
        if self.initial_labeled < 1:
            raise ValueError("initial_labeled >= 1")
        if self.budget_per_stage < 1:
            raise ValueError("budget_per_stage >= 1")
        if self.num_stages < 0:
            raise ValueError("num_stages >= 0")


@dataclass(frozen=True)
class StageRecord:
    stage: int
    labeled_count: int
    vqa_accuracy: float
    top1_accuracy: float
    train_loss_final: float
    wall_time: float


def init_pool(pool_ids: list[int], cfg: ALConfig) -> Pool:
    """Seeded uniform split of the pool ids into initial labeled + rest."""
    if cfg.initial_labeled > len(pool_ids):
        raise BudgetExceedsPool(
            f"initial_labeled {cfg.initial_labeled} exceeds pool of {len(pool_ids)}"
        )
    rng = np.random.default_rng([cfg.seed, 0])
    chosen = rng.choice(len(pool_ids), size=cfg.initial_labeled, replace=False)
    labeled = sorted(pool_ids[i] for i in chosen)
    labeled_set = set(labeled)
    unlabeled = sorted(i for i in pool_ids if i not in labeled_set)
    return Pool(labeled=labeled, unlabeled=unlabeled)


def oracle(ids: list[int], samples_by_id: dict[int, Sample], pool: Pool) -> list[Sample]:
    """Reveal the stored targets for unlabeled ids (simulated annotation)."""
    labeled = set(pool.labeled)
    revealed = []
    for sample_id in ids:
        if sample_id not in samples_by_id:
            raise UnknownId(sample_id)
        if sample_id in labeled:
            raise AlreadyLabeled(f"sample {sample_id} is already labeled")
        revealed.append(samples_by_id[sample_id])
    return revealed


@dataclass
class ExperimentState:
    al: ALConfig
    model_cfg: ModelConfig
    pool_samples: list[Sample]
    test_samples: list[Sample]
    samples_by_id: dict[int, Sample]
    pool: Pool
    params: Parameters
    stage: int = 0


def _train_and_evaluate(state: ExperimentState, stage: int) -> tuple[Metrics, float]:
    """Train on the current labeled set and return (metrics, final loss).

    With eval_best_epoch the test metrics of the best epoch (by soft
    accuracy) are reported; the parameters themselves always continue from
    the final epoch.
    """
    labeled_samples = [state.samples_by_id[i] for i in state.pool.labeled]
    best: list[Metrics] = []

    def track_best(_epoch: int, params: Parameters) -> None:
        m = evaluate(params, state.test_samples)
        if not best or m.vqa_accuracy_mean > best[0].vqa_accuracy_mean:
            best[:] = [m]

    callback = track_best if state.al.eval_best_epoch else None
    state.params, losses = train(
        state.params,
        labeled_samples,
        state.al.train,
        distill_weight=state.model_cfg.distill_weight,
        seed_key=(state.al.seed, stage),
        epoch_callback=callback,
    )
    metrics = best[0] if state.al.eval_best_epoch else evaluate(state.params, state.test_samples)
    return metrics, losses[-1]


def _score_unlabeled(state: ExperimentState) -> list[ScoredSample]:
    unlabeled = [state.samples_by_id[i] for i in state.pool.unlabeled]
    x_v = np.stack([s.x_v for s in unlabeled])
    x_q = np.stack([s.x_q for s in unlabeled])
    _, y_main, y_v, y_q = forward_batch(state.params, x_v, x_q)
    scored = []
    for row, sample in enumerate(unlabeled):
        triple = OutputTriple(main=y_main[row], visual_only=y_v[row], question_only=y_q[row])
        score = score_sample(
            triple, state.al.acquisition, sample_id=sample.id, seed=state.al.seed
        )
        scored.append(ScoredSample(sample.id, score))
    return scored


def run_stage(state: ExperimentState) -> StageRecord:
    """Run one acquisition stage, mutating the state.

    Scores the unlabeled pool with the incoming model, labels the top-b,
    trains on the grown labeled set, evaluates, and returns the record.
    """
    budget = state.al.budget_per_stage
    if budget > len(state.pool.unlabeled):
        raise BudgetExceedsPool(
            f"budget {budget} exceeds unlabeled pool of {len(state.pool.unlabeled)}"
        )
    stage = state.stage + 1
    started = time.perf_counter()

    selected = select_top_b(_score_unlabeled(state), budget)
    oracle(selected, state.samples_by_id, state.pool)
    selected_set = set(selected)
    state.pool.labeled = sorted(state.pool.labeled + selected)
    state.pool.unlabeled = [i for i in state.pool.unlabeled if i not in selected_set]

    if state.al.reinit_per_stage:
        stage_seed = int(np.random.SeedSequence([state.model_cfg.seed, stage]).generate_state(1)[0])
        state.params = init_model(replace(state.model_cfg, seed=stage_seed))

    metrics, final_loss = _train_and_evaluate(state, stage)
    state.stage = stage
    record = StageRecord(
        stage=stage,
        labeled_count=len(state.pool.labeled),
        vqa_accuracy=metrics.vqa_accuracy_mean,
        top1_accuracy=metrics.top1_accuracy,
        train_loss_final=final_loss,
        wall_time=time.perf_counter() - started,
    )
    log.info(
        "stage %d: labeled=%d vqa=%.4f top1=%.4f loss=%.4f",
        record.stage,
        record.labeled_count,
        record.vqa_accuracy,
        record.top1_accuracy,
        record.train_loss_final,
    )
    return record


def run_experiment(
    al_cfg: ALConfig, dataset_cfg: DatasetConfig, model_cfg: ModelConfig
) -> list[StageRecord]:
    """Full staged protocol: initial training plus num_stages acquisitions."""
    if model_cfg.dim_v != dataset_cfg.dim_v or model_cfg.dim_q != dataset_cfg.dim_q:
        raise ValueError("model feature widths must match the dataset")
    if model_cfg.num_classes != dataset_cfg.num_classes:
        raise ValueError("model num_classes must match the dataset")
    if al_cfg.initial_labeled + al_cfg.num_stages * al_cfg.budget_per_stage > dataset_cfg.pool_size:
        raise BudgetExceedsPool("initial_labeled + num_stages * budget exceeds the pool size")

    pool_samples, test_samples = generate(dataset_cfg)
    state = ExperimentState(
        al=al_cfg,
        model_cfg=model_cfg,
        pool_samples=pool_samples,
        test_samples=test_samples,
        samples_by_id={s.id: s for s in pool_samples},
        pool=init_pool([s.id for s in pool_samples], al_cfg),
        params=init_model(model_cfg),
    )

    started = time.perf_counter()
    metrics, final_loss = _train_and_evaluate(state, stage=0)
    records = [
        StageRecord(
            stage=0,
            labeled_count=len(state.pool.labeled),
            vqa_accuracy=metrics.vqa_accuracy_mean,
            top1_accuracy=metrics.top1_accuracy,
            train_loss_final=final_loss,
            wall_time=time.perf_counter() - started,
        )
    ]
    for _ in range(al_cfg.num_stages):
        records.append(run_stage(state))
    return records
