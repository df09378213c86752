"""Tests for the skip-gram trainer and embedding-space persistence."""

import numpy as np
import pytest

from apimap.corpus import Vocabulary
from apimap.embedding import (
    EmbeddingSpace,
    TrainConfig,
    load_space,
    save_space,
    sgns_step,
    subsample_keep_probs,
    train_skipgram,
)
from apimap.errors import FormatError

from helpers import planted_corpus


class TestTrainConfig:
    def test_defaults_match_reference_settings(self):
        cfg = TrainConfig()
        assert cfg.learning_rate == 0.025
        assert cfg.negatives == 30
        assert cfg.window == 10
        assert cfg.subsample == 1e-4

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"learning_rate": 0.0},
            {"negatives": 0},
            {"window": 0},
            {"subsample": 0.0},
            {"subsample": 1.5},
            {"epochs": 0},
            {"dim": 0},
            {"workers": 0},
        ],
    )
    def test_validation(self, kwargs):
        with pytest.raises(ValueError):
            TrainConfig(**kwargs)


class TestTrainSkipgram:
    def test_empty_corpus_raises(self):
        with pytest.raises(ValueError, match="empty corpus"):
            train_skipgram([], TrainConfig(dim=4))

    def test_single_token_corpus_raises(self):
        with pytest.raises(ValueError, match="no context pairs"):
            train_skipgram([["solo"]], TrainConfig(dim=4))

    def test_shape_and_finiteness(self):
        corpus = [["a", "b", "c"], ["b", "c", "d"]] * 20
        space = train_skipgram(corpus, TrainConfig(dim=8, epochs=1, negatives=2,
                                                   subsample=1.0, rng_seed=0))
        assert space.vectors.shape == (4, 8)
        assert np.all(np.isfinite(space.vectors))

    def test_planted_cooccurrence_beats_unrelated(self, planted_runs):
        # 'p q' always co-occur, 'p r' never do; won in >= 95 of 100 seeded runs
        wins = sum(1 for m in planted_runs["margins"] if m > 0)
        assert wins >= 95

    def test_single_worker_determinism_bit_exact(self, planted_runs):
        assert planted_runs["deterministic"] is True

    def test_multiworker_produces_valid_space(self):
        corpus = planted_corpus(n_lines=300)
        cfg = TrainConfig(dim=8, epochs=1, negatives=2, window=1, subsample=1.0,
                          workers=3, rng_seed=1)
        space = train_skipgram(corpus, cfg)
        assert np.all(np.isfinite(space.vectors))
        assert len(space) == len(space.vocab)


class TestSgnsGradient:
    def test_matches_central_finite_differences(self):
        rng = np.random.default_rng(5)
        eps = 1e-5
        for _ in range(5):
            v = rng.normal(size=10) * 0.5
            u = rng.normal(size=(6, 10)) * 0.5
            labels = np.zeros(6)
            labels[0] = 1.0
            _, grad_v, grad_u = sgns_step(v, u, labels)
            for i in range(10):
                vp, vm = v.copy(), v.copy()
                vp[i] += eps
                vm[i] -= eps
                fd = (sgns_step(vp, u, labels)[0] - sgns_step(vm, u, labels)[0]) / (2 * eps)
                assert abs(fd - grad_v[i]) <= 1e-4 * max(abs(fd), abs(grad_v[i]), 1e-8)
            for r in range(6):
                for c in range(0, 10, 3):
                    up, um = u.copy(), u.copy()
                    up[r, c] += eps
                    um[r, c] -= eps
                    fd = (sgns_step(v, up, labels)[0] - sgns_step(v, um, labels)[0]) / (2 * eps)
                    assert abs(fd - grad_u[r, c]) <= 1e-4 * max(abs(fd), abs(grad_u[r, c]), 1e-8)


class TestSubsampling:
    def test_rare_tokens_always_kept(self):
        # one huge head token, many rare ones inside the keep-probability-1 region
        counts = np.array([1_000_000] + [10] * 50, dtype=float)
        keep = subsample_keep_probs(counts, subsample=1e-4)
        assert keep[0] < 1.0
        assert np.all(keep[1:] == 1.0)

    def test_keep_probability_formula(self):
        counts = np.array([300.0, 100.0, 600.0])
        t = 1e-2
        keep = subsample_keep_probs(counts, t)
        ratio = counts / counts.sum()
        expected = np.minimum(np.sqrt(t / ratio) + t / ratio, 1.0)
        np.testing.assert_allclose(keep, expected)


class TestSpaceIO:
    def test_small_space_header_and_rows(self, tmp_path):
        space = EmbeddingSpace(
            np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]),
            Vocabulary(["alpha", "beta"], [3, 2]),
        )
        path = tmp_path / "space.txt"
        save_space(space, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "2 3"
        assert len(lines) == 3
        assert lines[1].startswith("alpha ")

    def test_roundtrip_random_space(self, tmp_path):
        rng = np.random.default_rng(7)
        space = EmbeddingSpace(
            rng.uniform(-1, 1, size=(100, 50)),
            Vocabulary([f"t{i:03d}" for i in range(100)], range(200, 100, -1)),
        )
        path = tmp_path / "space.txt"
        save_space(space, str(path))
        loaded = load_space(str(path))
        assert np.abs(loaded.vectors - space.vectors).max() < 1e-5
        assert loaded.vocab.tokens == space.vocab.tokens
        assert loaded.vocab.counts == space.vocab.counts

    def test_malformed_header(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("not a header\n")
        with pytest.raises(FormatError, match="malformed header"):
            load_space(str(path))

    def test_row_count_mismatch(self, tmp_path):
        path = tmp_path / "bad.txt"
        rows = "\n".join(f"tok{i} " + " ".join(["0.1"] * 300) for i in range(4))
        path.write_text("5 300\n" + rows + "\n")
        with pytest.raises(FormatError, match="row count mismatch"):
            load_space(str(path))

    def test_dimension_mismatch_in_row(self, tmp_path):
        path = tmp_path / "bad.txt"
        path.write_text("1 3\ntok 0.1 0.2\n")
        with pytest.raises(FormatError, match="dimension mismatch"):
            load_space(str(path))

    def test_missing_sidecar_defaults_counts(self, tmp_path):
        path = tmp_path / "space.txt"
        path.write_text("2 2\na 0.1 0.2\nb 0.3 0.4\n")
        loaded = load_space(str(path))
        assert loaded.vocab.counts == [1, 1]


class TestEmbeddingSpace:
    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            EmbeddingSpace(np.array([[np.inf, 0.0]]), Vocabulary(["a"], [1]))

    def test_rejects_row_mismatch(self):
        with pytest.raises(ValueError):
            EmbeddingSpace(np.zeros((2, 3)), Vocabulary(["a"], [1]))

    def test_unit_vectors_cached_and_normalized(self):
        space = EmbeddingSpace(
            np.array([[3.0, 4.0], [0.0, 0.0]]), Vocabulary(["a", "b"], [2, 1])
        )
        unit = space.unit_vectors
        np.testing.assert_allclose(unit[0], [0.6, 0.8])
        np.testing.assert_allclose(unit[1], [0.0, 0.0])
        assert space.unit_vectors is unit
