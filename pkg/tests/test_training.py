import numpy as np
import pytest

from kgunlearn.errors import SamplingError, TrainingError
from kgunlearn.evaluation import RankingConfig, mrr
from kgunlearn.kg import KnowledgeGraph, Triple
from kgunlearn.training import PretrainConfig, pretrain, sample_negative

from conftest import make_planted_graph, make_random_graph


def test_sample_negative_single_candidate():
    graph = KnowledgeGraph(["a", "b"], ["r"], [Triple(0, 0, 1)])
    rng = np.random.default_rng(0)
    for _ in range(40):
        neg = sample_negative(graph, Triple(0, 0, 1), rng)
        if neg.head != 0:
            assert neg == Triple(1, 0, 1)
        else:
            assert neg == Triple(0, 0, 0)


def test_sample_negative_changes_exactly_one_slot():
    graph = make_random_graph(12, 3, 30, seed=1)
    rng = np.random.default_rng(2)
    triple = Triple(3, 1, 7)
    for _ in range(500):
        neg = sample_negative(graph, triple, rng)
        assert neg.relation == triple.relation
        changed = (neg.head != triple.head) + (neg.tail != triple.tail)
        assert changed == 1


def test_sample_negative_slot_frequency():
    graph = make_random_graph(10, 1, 20, seed=3)
    rng = np.random.default_rng(4)
    triple = Triple(0, 0, 1)
    n = 100_000
    head_corruptions = sum(
        sample_negative(graph, triple, rng).head != 0 for _ in range(n))
    sigma = (0.25 * n) ** 0.5
    assert abs(head_corruptions - n / 2) < 3 * sigma


def test_sample_negative_needs_two_entities():
    graph = KnowledgeGraph(["a"], ["r"], [Triple(0, 0, 0)])
    with pytest.raises(SamplingError):
        sample_negative(graph, Triple(0, 0, 0), np.random.default_rng(0))


def test_pretrain_loss_trend():
    graph = make_random_graph(40, 3, 100, seed=5)
    losses = []
    config = PretrainConfig(dim=16, epochs=5, learning_rate=1e-2,
                            batch_size=32, seed=9)
    pretrain(graph, config, on_epoch=lambda _e, loss: losses.append(loss))
    assert len(losses) == 5
    increases = sum(b > a for a, b in zip(losses, losses[1:]))
    assert increases <= 1


def test_pretrain_beats_shuffled_model():
    graph = make_planted_graph(60, 4, dim=16, seed=6)
    config = PretrainConfig(dim=16, epochs=60, learning_rate=1e-2,
                            batch_size=64, seed=10)
    model = pretrain(graph, config)
    eval_config = RankingConfig(filtered=True, filter_source=graph.triples)
    trained = mrr(model, graph.triples, eval_config)

    shuffled = model.copy()
    perm = np.random.default_rng(0).permutation(graph.n_entities)
    shuffled.entities = shuffled.entities[perm]
    baseline = mrr(shuffled, graph.triples, eval_config)
    assert trained >= 20 * baseline


def test_pretrain_deterministic():
    graph = make_random_graph(20, 2, 50, seed=7)
    config = PretrainConfig(dim=8, epochs=3, learning_rate=1e-2,
                            batch_size=16, seed=11)
    a = pretrain(graph, config)
    b = pretrain(graph, config)
    assert a.entities.tobytes() == b.entities.tobytes()
    assert a.relations.tobytes() == b.relations.tobytes()


def test_pretrain_keeps_entity_rows_normalized():
    graph = make_random_graph(20, 2, 50, seed=8)
    config = PretrainConfig(dim=8, epochs=2, learning_rate=1e-2,
                            batch_size=16, seed=12)
    model = pretrain(graph, config)
    norms = np.linalg.norm(model.entities, axis=1)
    assert np.max(np.abs(norms - 1.0)) < 1e-9


def test_pretrain_divergence_raises_with_epoch():
    graph = make_random_graph(15, 2, 30, seed=9)
    config = PretrainConfig(dim=4, epochs=5, learning_rate=1e308,
                            batch_size=8, seed=13)
    with pytest.raises(TrainingError) as err:
        pretrain(graph, config)
    assert err.value.epoch is not None


def test_pretrain_accepts_subset_of_triples():
    graph = make_random_graph(20, 2, 60, seed=10)
    subset = graph.triples.difference(
        type(graph.triples)(list(graph.triples)[:30]))
    config = PretrainConfig(dim=8, epochs=2, learning_rate=1e-2,
                            batch_size=16, seed=14)
    model = pretrain(graph, config, triples=subset)
    assert model.entities.shape == (20, 8)
