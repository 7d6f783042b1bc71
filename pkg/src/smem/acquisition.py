"""Sample-scoring strategies for pool-based active learning, plus top-b selection.

Every scorer maps the three raw head outputs of one unlabeled sample to a
scalar where higher means "more worth labeling".  Raw outputs are
sum-normalized before any entropy or divergence is taken.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probmath import entropy, jsd, kl_div, normalize

__all__ = [
    "STRATEGIES",
    "AcquisitionConfig",
    "BudgetExceedsPool",
    "OutputTriple",
    "ScoredSample",
    "score_ad_kld",
    "score_entropy",
    "score_kld",
    "score_least_confident",
    "score_margin",
    "score_mi",
    "score_random",
    "score_sample",
    "score_smem",
    "score_smem_full",
    "select_top_b",
]

# Registry of valid strategy names (external config strings).
STRATEGIES = (
    "random",
    "entropy",
    "margin",
    "least_confident",
    "smem",
    "smem_jsd",
    "smem_full",
    "kld",
    "ad_kld",
    "mi",
)


class BudgetExceedsPool(ValueError):
    """A selection budget larger than the available pool was requested."""


@dataclass(frozen=True)
class OutputTriple:
    """Raw sigmoid outputs of the main, visual-only, and question-only heads."""

    main: np.ndarray
    visual_only: np.ndarray
    question_only: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "main", np.asarray(self.main, dtype=np.float64))
        object.__setattr__(self, "visual_only", np.asarray(self.visual_only, dtype=np.float64))
        object.__setattr__(self, "question_only", np.asarray(self.question_only, dtype=np.float64))
        n = self.main.size
        if self.visual_only.size != n or self.question_only.size != n:
            raise ValueError("all three output vectors must have the same length")


@dataclass(frozen=True)
class AcquisitionConfig:
    """Strategy name and hyper-parameters of the acquisition function.

    ``alpha`` weights question vs. visual terms, ``beta`` the divergence
    term between the single-modal outputs, and ``gamma`` the entropy of the
    main output.  ``kl_smoothing`` switches the KL-based scorers to the
    epsilon-smoothed mode so their scores stay finite.
    """

    strategy: str = "smem_full"
    alpha: float = 0.5
    beta: float = 1.0
    gamma: float = 1.0
    kl_smoothing: bool = False

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(
                f"unknown strategy {self.strategy!r}; valid names: {', '.join(STRATEGIES)}"
            )
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha in [0,1]")
        if self.beta < 0.0:
            raise ValueError("beta >= 0")
        if self.gamma < 0.0:
            raise ValueError("gamma >= 0")


@dataclass(frozen=True)
class ScoredSample:
    sample_id: int
    score: float


def score_entropy(t: OutputTriple) -> float:
    """Entropy of the normalized main output, in [0, ln K]."""
    return entropy(normalize(t.main))


def score_margin(t: OutputTriple) -> float:
    """1 - (p1 - p2) for the two largest normalized main probabilities.

    Higher means a smaller margin between the top two answers, i.e. a less
    decided model.
    """
    p = np.sort(normalize(t.main))
    return float(1.0 - (p[-1] - p[-2]))


def score_least_confident(t: OutputTriple) -> float:
    """1 - max normalized main probability."""
    return float(1.0 - np.max(normalize(t.main)))


def score_smem(t: OutputTriple, cfg: AcquisitionConfig) -> float:
    """Weighted sum of the single-modal entropies.

    alpha * H(question head) + (1 - alpha) * H(visual head); bounded by
    ln K like any entropy.
    """
    h_q = entropy(normalize(t.question_only))
    h_v = entropy(normalize(t.visual_only))
    return cfg.alpha * h_q + (1.0 - cfg.alpha) * h_v


def score_smem_full(t: OutputTriple, cfg: AcquisitionConfig) -> float:
    """Single-modal entropies plus divergence and main-entropy terms.

    score_smem + beta * JSD(visual, question) + gamma * H(main).  Reduces
    exactly to :func:`score_smem` when beta = gamma = 0.
    """
    s = score_smem(t, cfg)
    if cfg.beta != 0.0:
        s += cfg.beta * jsd(normalize(t.visual_only), normalize(t.question_only))
    if cfg.gamma != 0.0:
        s += cfg.gamma * entropy(normalize(t.main))
    return s


def score_kld(t: OutputTriple, cfg: AcquisitionConfig) -> float:
    """alpha * KL(main || question) + (1 - alpha) * KL(main || visual).

    The main output is the reference distribution in both terms.
    """
    p = normalize(t.main)
    kl_q = kl_div(p, normalize(t.question_only), smoothing=cfg.kl_smoothing)
    kl_v = kl_div(p, normalize(t.visual_only), smoothing=cfg.kl_smoothing)
    # `0 * inf` is NaN; an alpha of exactly 0 or 1 drops the other term.
    if cfg.alpha == 0.0:
        return kl_v
    if cfg.alpha == 1.0:
        return kl_q
    return cfg.alpha * kl_q + (1.0 - cfg.alpha) * kl_v


def score_ad_kld(t: OutputTriple, kl_smoothing: bool = False) -> float:
    """Absolute difference |KL(main || question) - KL(main || visual)|.

    Symmetric under swapping the two modalities.  Infinite on one side
    only yields the +inf sentinel; infinite on both sides is treated as a
    tie (score 0) so that ranking stays NaN-free.
    """
    p = normalize(t.main)
    kl_q = kl_div(p, normalize(t.question_only), smoothing=kl_smoothing)
    kl_v = kl_div(p, normalize(t.visual_only), smoothing=kl_smoothing)
    if math.isinf(kl_q) and math.isinf(kl_v):
        return 0.0
    return abs(kl_q - kl_v)


def score_mi(t: OutputTriple, cfg: AcquisitionConfig) -> float:
    """Plug-in mutual-information score.

    alpha * (H(question) - H(main)) + (1 - alpha) * (H(visual) - H(main)).
    May be negative; used for ranking only.
    """
    h_main = entropy(normalize(t.main))
    h_q = entropy(normalize(t.question_only))
    h_v = entropy(normalize(t.visual_only))
    return cfg.alpha * (h_q - h_main) + (1.0 - cfg.alpha) * (h_v - h_main)


def score_random(sample_id: int, seed: int) -> float:
    """Deterministic pseudo-random score in [0, 1) keyed by (seed, sample_id).

    Independent of the model outputs and of the order in which samples are
    scored.
    """
    return float(np.random.default_rng([seed, sample_id]).random())


def score_sample(
    t: OutputTriple,
    cfg: AcquisitionConfig,
    sample_id: int = 0,
    seed: int = 0,
) -> float:
    """Dispatch to the scorer named by ``cfg.strategy``."""
    name = cfg.strategy
    if name == "random":
        return score_random(sample_id, seed)
    if name == "entropy":
        return score_entropy(t)
    if name == "margin":
        return score_margin(t)
    if name == "least_confident":
        return score_least_confident(t)
    if name == "smem":
        return score_smem(t, cfg)
    if name == "smem_jsd":
        return score_smem_full(t, AcquisitionConfig("smem_jsd", cfg.alpha, cfg.beta, 0.0))
    if name == "smem_full":
        return score_smem_full(t, cfg)
    if name == "kld":
        return score_kld(t, cfg)
    if name == "ad_kld":
        return score_ad_kld(t, cfg.kl_smoothing)
    if name == "mi":
        return score_mi(t, cfg)
    raise ValueError(f"unknown strategy {name!r}")  # unreachable after config validation


def select_top_b(scored: list[ScoredSample], b: int) -> list[int]:
    """Ids of the b highest-scoring samples.

    Ties break by ascending sample id; +inf scores sort above every finite
    score.  The result is ordered by descending score, then ascending id.
    """
    if b > len(scored):
        raise BudgetExceedsPool(f"budget {b} exceeds pool of {len(scored)} scored samples")
    if any(math.isnan(s.score) for s in scored):
        raise ValueError("NaN score in selection input")
    ranked = sorted(scored, key=lambda s: (-s.score, s.sample_id))
    return [s.sample_id for s in ranked[:b]]
