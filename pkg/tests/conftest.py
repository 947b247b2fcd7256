import numpy as np
import pytest

from kgunlearn.kg import KnowledgeGraph, Triple
from kgunlearn.model import EmbeddingModel


def make_random_graph(n_entities, n_relations, n_triples, seed,
                      allow_self_loops=False) -> KnowledgeGraph:
    rng = np.random.default_rng(seed)
    seen = set()
    triples = []
    while len(triples) < n_triples:
        h = int(rng.integers(0, n_entities))
        t = int(rng.integers(0, n_entities))
        if h == t and not allow_self_loops:
            continue
        r = int(rng.integers(0, n_relations))
        if (h, r, t) in seen:
            continue
        seen.add((h, r, t))
        triples.append(Triple(h, r, t))
    return KnowledgeGraph([f"e{i}" for i in range(n_entities)],
                          [f"r{i}" for i in range(n_relations)], triples)


def make_planted_graph(n_entities, n_relations, dim, seed):
    """Graph whose triples are consistent with a hidden translational model,
    so a trained model can reach high ranking accuracy."""
    rng = np.random.default_rng(seed)
    entities = rng.normal(size=(n_entities, dim))
    entities /= np.linalg.norm(entities, axis=1, keepdims=True)
    relations = 0.5 * rng.normal(size=(n_relations, dim)) / np.sqrt(dim)
    triples = []
    for r in range(n_relations):
        shifted = entities + relations[r]
        for h in range(n_entities):
            dists = np.linalg.norm(entities - shifted[h], axis=1)
            dists[h] = np.inf
            t = int(np.argmin(dists))
            triples.append(Triple(h, r, t))
    graph = KnowledgeGraph([f"e{i}" for i in range(n_entities)],
                           [f"r{i}" for i in range(n_relations)], triples)
    return graph


def make_random_model(n_entities, n_relations, dim, seed, scale=1.0) -> EmbeddingModel:
    rng = np.random.default_rng(seed)
    return EmbeddingModel(scale * rng.normal(size=(n_entities, dim)),
                          scale * rng.normal(size=(n_relations, dim)))


def numeric_gradient(loss_fn, model, step=1e-5):
    """Central finite differences of a scalar loss over both tables."""
    grads = []
    for table in (model.entities, model.relations):
        grad = np.zeros_like(table)
        it = np.nditer(table, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            original = table[idx]
            table[idx] = original + step
            up = loss_fn(model)
            table[idx] = original - step
            down = loss_fn(model)
            table[idx] = original
            grad[idx] = (up - down) / (2.0 * step)
        grads.append(grad)
    return grads


def max_relative_error(analytic, numeric):
    scale = max(np.max(np.abs(numeric)), 1e-10)
    return float(np.max(np.abs(analytic - numeric)) / scale)


@pytest.fixture
def small_graph():
    return make_random_graph(12, 3, 30, seed=7)
