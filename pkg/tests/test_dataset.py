"""Tests for synthetic data generation, targets, metrics, and the line format."""

import numpy as np
import pytest

from smem.dataset import (
    DatasetConfig,
    EmptySplit,
    SampleMode,
    evaluate,
    generate,
    load_samples,
    save_samples,
    vqa_accuracy,
)
from smem.model import ModelConfig, Parameters, init_model


def majority_class(sample):
    return int(np.argmax(sample.annotator_counts))


class TestConfigValidation:
    def test_fractions_must_sum_to_one(self):
        with pytest.raises(ValueError, match="sum to 1"):
            DatasetConfig(mode_fractions=(0.5, 0.5, 0.5, 0.0))

    def test_dims_must_cover_classes(self):
        with pytest.raises(ValueError, match="num_classes"):
            DatasetConfig(num_classes=10, dim_v=4, dim_q=16)

    def test_label_noise_range(self):
        with pytest.raises(ValueError, match="label_noise"):
            DatasetConfig(label_noise=1.5)


class TestGeneration:
    def test_deterministic_given_seed(self):
        cfg = DatasetConfig(pool_size=80, test_size=20, num_classes=5, dim_v=8, dim_q=8, seed=5)
        (pool_a, test_a), (pool_b, test_b) = generate(cfg), generate(cfg)
        for sa, sb in zip(pool_a + test_a, pool_b + test_b):
            assert sa.id == sb.id and sa.mode == sb.mode
            np.testing.assert_array_equal(sa.x_v, sb.x_v)
            np.testing.assert_array_equal(sa.x_q, sb.x_q)
            np.testing.assert_array_equal(sa.annotator_counts, sb.annotator_counts)

    def test_distinct_seeds_differ(self):
        cfg_a = DatasetConfig(pool_size=40, test_size=10, num_classes=5, dim_v=8, dim_q=8, seed=5)
        cfg_b = DatasetConfig(pool_size=40, test_size=10, num_classes=5, dim_v=8, dim_q=8, seed=6)
        pool_a, _ = generate(cfg_a)
        pool_b, _ = generate(cfg_b)
        assert any(
            not np.array_equal(a.x_v, b.x_v) for a, b in zip(pool_a, pool_b)
        )

    def test_ids_unique_and_ordered(self):
        cfg = DatasetConfig(pool_size=30, test_size=10, num_classes=4, dim_v=6, dim_q=6, seed=1)
        pool, test = generate(cfg)
        ids = [s.id for s in pool + test]
        assert ids == list(range(40))

    def test_target_law_holds_everywhere(self):
        cfg = DatasetConfig(
            pool_size=300, test_size=100, num_classes=6, dim_v=8, dim_q=8,
            label_noise=0.5, seed=9,
        )
        pool, test = generate(cfg)
        for s in pool + test:
            assert int(s.annotator_counts.sum()) == 10
            np.testing.assert_array_equal(
                s.target, np.minimum(s.annotator_counts / 3.0, 1.0)
            )

    def test_zero_label_noise_gives_one_hot_targets(self):
        cfg = DatasetConfig(
            pool_size=200, test_size=50, num_classes=5, dim_v=8, dim_q=8,
            label_noise=0.0, seed=3,
        )
        pool, test = generate(cfg)
        for s in pool + test:
            assert np.max(s.annotator_counts) == 10
            assert sorted(set(s.target)) in ([0.0, 1.0], [1.0])

    def test_mode_fractions_respected(self):
        cfg = DatasetConfig(
            pool_size=4000, test_size=10, num_classes=4, dim_v=6, dim_q=6,
            mode_fractions=(0.7, 0.1, 0.1, 0.1), seed=2,
        )
        pool, _ = generate(cfg)
        share = np.mean([s.mode is SampleMode.VISUAL_ONLY for s in pool])
        assert abs(share - 0.7) < 0.05


@pytest.fixture(scope="module")
def visual_only_data():
    cfg = DatasetConfig(
        pool_size=1500, test_size=500, num_classes=5, dim_v=8, dim_q=8,
        mode_fractions=(1.0, 0.0, 0.0, 0.0), label_noise=0.0, seed=13,
    )
    return generate(cfg)


class TestModalitySeparation:
    """Linear probes confirm which modality carries the class signal."""

    def probe_accuracy(self, train_x, train_y, test_x, test_y):
        from sklearn.linear_model import LogisticRegression

        probe = LogisticRegression(max_iter=2000)
        probe.fit(train_x, train_y)
        return probe.score(test_x, test_y)

    def test_signal_modality_is_informative(self, visual_only_data):
        pool, test = visual_only_data
        acc = self.probe_accuracy(
            np.stack([s.x_v for s in pool]), [majority_class(s) for s in pool],
            np.stack([s.x_v for s in test]), [majority_class(s) for s in test],
        )
        assert acc >= 0.95

    def test_other_modality_is_chance(self, visual_only_data):
        pool, test = visual_only_data
        acc = self.probe_accuracy(
            np.stack([s.x_q for s in pool]), [majority_class(s) for s in pool],
            np.stack([s.x_q for s in test]), [majority_class(s) for s in test],
        )
        assert acc <= 1.0 / 5 + 0.1

    def test_joint_mode_needs_both_modalities(self):
        cfg = DatasetConfig(
            pool_size=2000, test_size=500, num_classes=4, dim_v=6, dim_q=6,
            mode_fractions=(0.0, 0.0, 1.0, 0.0), label_noise=0.0, seed=14,
        )
        pool, test = generate(cfg)
        for extract in (lambda s: s.x_v, lambda s: s.x_q):
            acc = self.probe_accuracy(
                np.stack([extract(s) for s in pool]), [majority_class(s) for s in pool],
                np.stack([extract(s) for s in test]), [majority_class(s) for s in test],
            )
            assert acc <= 1.0 / 4 + 0.1


class TestVqaAccuracy:
    def test_all_eleven_vote_counts(self):
        for votes in range(11):
            counts = np.zeros(5, dtype=np.int64)
            counts[2] = votes
            counts[0] = 10 - votes
            assert vqa_accuracy(2, counts) == min(votes / 3.0, 1.0)

    def test_extremes(self):
        assert vqa_accuracy(0, [10, 0]) == 1.0
        assert vqa_accuracy(1, [10, 0]) == 0.0

    def test_out_of_range_index(self):
        with pytest.raises(IndexError):
            vqa_accuracy(5, [5, 5])
        with pytest.raises(IndexError):
            vqa_accuracy(-1, [5, 5])


def constant_output_params(cfg: ModelConfig, winner: int) -> Parameters:
    """A model whose main head always argmaxes to ``winner``."""
    params = init_model(cfg)
    for _, layer in params.layers():
        layer.w[:] = 0.0
        layer.b[:] = 0.0
    params.head_main.b[winner] = 5.0
    return params


class TestEvaluate:
    def test_empty_split_rejected(self):
        cfg = ModelConfig(dim_v=6, dim_q=6, hidden=4, num_classes=4)
        with pytest.raises(EmptySplit):
            evaluate(init_model(cfg), [])

    def test_perfect_predictor_on_noiseless_data(self):
        data_cfg = DatasetConfig(
            pool_size=10, test_size=200, num_classes=4, dim_v=6, dim_q=6,
            label_noise=0.0, seed=15,
        )
        _, test = generate(data_cfg)
        # force each sample's predicted class via a per-sample lookup: replace
        # the model by evaluating vqa accuracy directly against majority votes
        correct = [vqa_accuracy(majority_class(s), s.annotator_counts) for s in test]
        assert np.mean(correct) == 1.0

    def test_constant_model_is_near_chance(self):
        k = 5
        data_cfg = DatasetConfig(
            pool_size=10, test_size=800, num_classes=k, dim_v=8, dim_q=8,
            label_noise=0.0, seed=16,
        )
        _, test = generate(data_cfg)
        model_cfg = ModelConfig(dim_v=8, dim_q=8, hidden=4, num_classes=k)
        metrics = evaluate(constant_output_params(model_cfg, winner=2), test)
        sigma = np.sqrt((1 / k) * (1 - 1 / k) / len(test))
        assert abs(metrics.top1_accuracy - 1 / k) <= 3 * sigma

    def test_evaluation_is_pure(self):
        data_cfg = DatasetConfig(
            pool_size=10, test_size=50, num_classes=4, dim_v=6, dim_q=6, seed=17
        )
        _, test = generate(data_cfg)
        params = init_model(ModelConfig(dim_v=6, dim_q=6, hidden=4, num_classes=4, seed=17))
        assert evaluate(params, test) == evaluate(params, test)


class TestLineFormat:
    def test_round_trip_bit_exact(self, tmp_path):
        cfg = DatasetConfig(
            pool_size=60, test_size=20, num_classes=5, dim_v=8, dim_q=8,
            label_noise=0.4, seed=19,
        )
        pool, test = generate(cfg)
        path = tmp_path / "samples.tsv"
        save_samples(path, pool + test)
        loaded = load_samples(path)
        assert len(loaded) == len(pool) + len(test)
        for original, copy in zip(pool + test, loaded):
            assert original.id == copy.id and original.mode == copy.mode
            np.testing.assert_array_equal(original.x_v, copy.x_v)
            np.testing.assert_array_equal(original.x_q, copy.x_q)
            np.testing.assert_array_equal(original.annotator_counts, copy.annotator_counts)
            np.testing.assert_array_equal(original.target, copy.target)
