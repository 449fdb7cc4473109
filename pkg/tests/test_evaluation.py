import numpy as np
import pytest

from stgnn.evaluation import (
    MetricsReport,
    ScoredPair,
    auc,
    evaluate,
    heuristic_reference,
    mean_average_precision,
    sample_test_negatives,
    score_pair,
)
from stgnn.model import init_params, random_features
from stgnn.significance import initial_significance
from stgnn.temporal_graph import Event, from_events, split_train_test
from stgnn.training import TrainConfig, named_rng
from conftest import random_stream


def brute_force_auc(pairs):
    pos = [p.score for p in pairs if p.label == 1]
    neg = [p.score for p in pairs if p.label == 0]
    total = 0.0
    for a in pos:
        for b in neg:
            total += 1.0 if a > b else (0.5 if a == b else 0.0)
    return total / (len(pos) * len(neg))


def brute_force_ap(pairs):
    ranked = sorted(pairs, key=lambda p: (-p.score, p.u, p.v))
    hits, out = 0, []
    for r, p in enumerate(ranked, start=1):
        if p.label == 1:
            hits += 1
            out.append(hits / r)
    return sum(out) / len(out)


def make_pairs(scores, labels):
    return [ScoredPair(i, i + 1000, float(s), int(l)) for i, (s, l) in enumerate(zip(scores, labels))]


class TestScorePair:
    def test_identical_vectors(self):
        h = np.array([1.0, 1.0])
        assert score_pair(h, h, "Cos") == pytest.approx(1.0)
        assert score_pair(h, h, "Had") == pytest.approx(2.0)
        assert score_pair(h, h, "L2") == 0.0  # zero distance ranks highest

    def test_orthogonal_vectors(self):
        a, b = np.array([1.0, 0.0]), np.array([0.0, 1.0])
        assert score_pair(a, b, "Cos") == 0.0
        assert score_pair(a, b, "Had") == 0.0
        assert score_pair(a, b, "L2") == pytest.approx(-2.0)  # distance 2, negated

    def test_hadamard_zero_vector(self, rng):
        z = np.zeros(4)
        assert score_pair(z, rng.normal(size=4), "Had") == 0.0

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            score_pair(np.ones(2), np.ones(2), "Manhattan")


class TestAuc:
    def test_perfect_separation(self):
        pairs = make_pairs([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert auc(pairs) == 1.0

    def test_hand_case(self):
        pairs = make_pairs([0.9, 0.3, 0.5, 0.1], [1, 1, 0, 0])
        assert auc(pairs) == pytest.approx(0.75)

    def test_all_ties(self):
        pairs = make_pairs([0.5] * 6, [1, 1, 1, 0, 0, 0])
        assert auc(pairs) == pytest.approx(0.5)

    def test_single_class_rejected(self):
        with pytest.raises(ValueError):
            auc(make_pairs([0.1, 0.2], [1, 1]))

    def test_matches_brute_force(self, rng):
        for _ in range(200):
            n = int(rng.integers(2, 60))
            labels = rng.integers(0, 2, size=n)
            if labels.sum() in (0, n):
                continue
            scores = rng.choice([0.1, 0.25, 0.5, 0.75], size=n)  # ties likely
            pairs = make_pairs(scores, labels)
            assert auc(pairs) == pytest.approx(brute_force_auc(pairs), abs=1e-12)

    def test_invariant_to_monotone_transform(self, rng):
        labels = rng.integers(0, 2, size=50)
        labels[0], labels[1] = 0, 1
        scores = rng.normal(size=50)
        pairs = make_pairs(scores, labels)
        transformed = make_pairs(np.exp(3.0 * scores) + 5.0, labels)
        assert auc(pairs) == pytest.approx(auc(transformed), abs=1e-12)

    def test_label_inversion_complements(self, rng):
        scores = rng.permutation(np.arange(40, dtype=float))  # tie-free
        labels = rng.integers(0, 2, size=40)
        labels[:2] = [0, 1]
        pairs = make_pairs(scores, labels)
        inverted = make_pairs(scores, 1 - labels)
        assert auc(pairs) + auc(inverted) == pytest.approx(1.0, abs=1e-12)


class TestMap:
    def test_positives_first(self):
        pairs = make_pairs([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        assert mean_average_precision(pairs) == 1.0

    def test_interleaved(self):
        pairs = make_pairs([0.9, 0.7, 0.5, 0.3], [1, 0, 1, 0])
        assert mean_average_precision(pairs) == pytest.approx((1.0 + 2.0 / 3.0) / 2.0, abs=1e-5)

    def test_positive_last(self):
        pairs = make_pairs([0.9, 0.7, 0.5], [0, 0, 1])
        assert mean_average_precision(pairs) == pytest.approx(1.0 / 3.0)

    def test_no_positive_rejected(self):
        with pytest.raises(ValueError):
            mean_average_precision(make_pairs([0.5], [0]))

    def test_matches_brute_force(self, rng):
        for _ in range(200):
            n = int(rng.integers(1, 60))
            labels = rng.integers(0, 2, size=n)
            if labels.sum() == 0:
                continue
            scores = rng.choice([0.2, 0.4, 0.6], size=n)
            pairs = make_pairs(scores, labels)
            assert mean_average_precision(pairs) == pytest.approx(
                brute_force_ap(pairs), abs=1e-12
            )

    def test_per_node_variant(self):
        pairs = [
            ScoredPair(0, 1, 0.9, 1),
            ScoredPair(0, 2, 0.8, 0),
            ScoredPair(3, 4, 0.7, 1),
        ]
        global_map = mean_average_precision(pairs)
        per_node = mean_average_precision(pairs, per_node=True)
        assert 0.0 < global_map <= 1.0
        assert 0.0 < per_node <= 1.0


class TestHeuristic:
    def test_history_beats_none(self):
        g = from_events([Event(0, 1, 5.0)], num_nodes=4)
        scores = heuristic_reference(g, [(0, 1), (2, 3)], t0=6.0)
        assert scores[0] > scores[1] == 0.0

    def test_equals_initial_significance(self, rng):
        g = random_stream(rng, n_nodes=10, n_events=200)
        t0 = g.t_max * 0.9
        for _ in range(20):
            u, v = rng.choice(10, size=2, replace=False)
            (score,) = heuristic_reference(g, [(int(u), int(v))], t0)
            assert score == initial_significance(g.pair_history(int(u), int(v), t0), t0)


class TestEvaluate:
    def planted_split(self, seed=0):
        rng = np.random.default_rng(seed)
        events = []
        # two communities; in-community chatter, zero cross talk
        for t in np.cumsum(rng.exponential(0.05, size=500)):
            c = int(rng.integers(2))
            base = 0 if c == 0 else 10
            u, v = rng.choice(10, size=2, replace=False)
            events.append(Event(base + int(u), base + int(v), float(t)))
        g = from_events(events, num_nodes=20)
        return split_train_test(g, 0.75)

    def test_structural_report(self):
        split = self.planted_split()
        cfg = TrainConfig(m=4, d0=16, d1=8, d2=8, seed=3)
        feats = random_features(20, 16, named_rng(3, "features"))
        params = init_params(named_rng(3, "params"), 16, 8, 8, 4)
        report = evaluate(split, params, feats, cfg)
        assert report.n_pos == len(split.test_pairs)
        assert report.n_neg == report.n_pos
        assert set(report.per_similarity) == {"Cos", "Had", "L2"}
        for d in report.per_similarity.values():
            assert 0.0 <= d["auc"] <= 1.0
            assert 0.0 <= d["map"] <= 1.0
        assert report.best_auc == max(d["auc"] for d in report.per_similarity.values())
        assert report.best_map == max(d["map"] for d in report.per_similarity.values())

    def test_untrained_model_beats_coin_flip_on_communities(self):
        # random params, but history + community structure alone separate
        split = self.planted_split(seed=1)
        cfg = TrainConfig(m=4, d0=16, d1=8, d2=8, seed=4)
        feats = random_features(20, 16, named_rng(4, "features"))
        params = init_params(named_rng(4, "params"), 16, 8, 8, 4)
        report = evaluate(split, params, feats, cfg)
        assert report.best_auc > 0.5

    def test_deterministic_given_seed(self):
        split = self.planted_split(seed=2)
        cfg = TrainConfig(m=4, d0=16, d1=8, d2=8, seed=5)
        feats = random_features(20, 16, named_rng(5, "features"))
        params = init_params(named_rng(5, "params"), 16, 8, 8, 4)
        r1 = evaluate(split, params, feats, cfg)
        r2 = evaluate(split, params, feats, cfg)
        assert r1.to_dict() == r2.to_dict()

    def test_per_node_map_flag(self):
        split = self.planted_split(seed=3)
        cfg = TrainConfig(m=4, d0=16, d1=8, d2=8, seed=6)
        feats = random_features(20, 16, named_rng(6, "features"))
        params = init_params(named_rng(6, "params"), 16, 8, 8, 4)
        report = evaluate(split, params, feats, cfg, per_node_map=True)
        for d in report.per_similarity.values():
            assert "map_per_node" in d


class TestNegativeSampling:
    def test_never_linked_anywhere(self, rng):
        g = random_stream(rng, n_nodes=30, n_events=300)
        split = split_train_test(g, 0.75)
        negs = sample_test_negatives(split, 50, named_rng(0, "eval-neg"))
        assert len(negs) == 50
        assert len(set(negs)) == 50
        linked = set(split.train.pair_index) | set(split.test_pairs)
        for pair in negs:
            assert pair not in linked

    def test_dense_graph_errors(self):
        # complete 4-node interaction history leaves no never-linked pairs
        events = []
        t = 0.0
        for u in range(4):
            for v in range(u + 1, 4):
                t += 1.0
                events.append(Event(u, v, t))
        events.append(Event(0, 1, t + 1.0))
        g = from_events(events, num_nodes=4)
        split = split_train_test(g, 0.9)
        with pytest.raises(ValueError, match="dense"):
            sample_test_negatives(split, 3, named_rng(0, "x"))
