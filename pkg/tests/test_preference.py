import logging

import numpy as np
import pytest
from scipy import stats

from kgunlearn.errors import ConfigError, DataError, SamplingError
from kgunlearn.kg import KnowledgeGraph, Triple, TripleSet, boundary_entities
from kgunlearn.preference import HEAD_MASKED, TAIL_MASKED, MODE_OUT_BOUNDARY, \
    MODE_UNIFORM, PreferenceSample, SamplerConfig, export_preferences, \
    mask_direction, sample_preferred, transfer_dataset

from conftest import make_random_graph


def test_mask_direction_shapes():
    triple = Triple(3, 1, 7)
    rng = np.random.default_rng(0)
    seen = set()
    for _ in range(64):
        side, query, dispreferred = mask_direction(triple, rng)
        seen.add(side)
        if side == HEAD_MASKED:
            assert query == (1, 7)
            assert dispreferred == 3
        else:
            assert side == TAIL_MASKED
            assert query == (3, 1)
            assert dispreferred == 7
    assert seen == {HEAD_MASKED, TAIL_MASKED}


def test_mask_direction_is_fair_coin():
    triple = Triple(0, 0, 1)
    rng = np.random.default_rng(123)
    n = 100_000
    heads = sum(mask_direction(triple, rng)[0] == HEAD_MASKED for _ in range(n))
    sigma = (0.25 * n) ** 0.5
    assert abs(heads - n / 2) < 3 * sigma


def test_uniform_single_candidate():
    graph = KnowledgeGraph(["a", "b"], ["r"], [Triple(0, 0, 1)])
    config = SamplerConfig(mode=MODE_UNIFORM, seed=0)
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert sample_preferred(graph, (0, 0), 0, config, rng) == 1


def test_uniform_law_chi_square():
    graph = make_random_graph(20, 2, 40, seed=1)
    config = SamplerConfig(mode=MODE_UNIFORM, seed=0)
    rng = np.random.default_rng(99)
    y_l = 5
    n = 100_000
    counts = np.zeros(20, dtype=int)
    for _ in range(n):
        counts[sample_preferred(graph, (0, 0), y_l, config, rng)] += 1
    assert counts[y_l] == 0
    observed = np.delete(counts, y_l)
    _, p_value = stats.chisquare(observed)
    assert p_value > 0.01


def test_out_boundary_never_in_boundary():
    graph = make_random_graph(30, 3, 80, seed=2)
    config = SamplerConfig(mode=MODE_OUT_BOUNDARY, seed=0)
    rng = np.random.default_rng(7)
    y_l = 4
    excluded = boundary_entities(graph, y_l) | {y_l}
    for _ in range(2000):
        assert sample_preferred(graph, (0, 0), y_l, config, rng) not in excluded


def test_out_boundary_hub_falls_back(caplog):
    # entity 0 is adjacent to every other entity
    triples = [Triple(0, 0, i) for i in range(1, 6)]
    graph = KnowledgeGraph([f"e{i}" for i in range(6)], ["r"], triples)
    config = SamplerConfig(mode=MODE_OUT_BOUNDARY, seed=0)
    rng = np.random.default_rng(5)
    with caplog.at_level(logging.WARNING):
        draws = {sample_preferred(graph, (0, 0), 0, config, rng) for _ in range(200)}
    assert "falling back" in caplog.text
    assert draws == {1, 2, 3, 4, 5}  # uniform over everything but the hub


def test_sampler_needs_two_entities():
    graph = KnowledgeGraph(["only"], ["r"], [Triple(0, 0, 0)])
    config = SamplerConfig(mode=MODE_UNIFORM, seed=0)
    with pytest.raises(SamplingError):
        sample_preferred(graph, (0, 0), 0, config, np.random.default_rng(0))


def test_sampler_config_mode_validated():
    with pytest.raises(ConfigError):
        SamplerConfig(mode="nearest")


def test_transfer_one_sample_per_triple():
    graph = make_random_graph(25, 3, 100, seed=3)
    forget = TripleSet(list(graph.triples)[:40])
    samples = transfer_dataset(forget, graph, SamplerConfig(seed=11))
    assert len(samples) == 40


def test_transfer_reassembles_source_triples():
    graph = make_random_graph(25, 3, 100, seed=4)
    forget = TripleSet(list(graph.triples)[:30])
    samples = transfer_dataset(forget, graph, SamplerConfig(seed=12))
    assert [s.source_triple() for s in samples] == list(forget)


def test_transfer_out_boundary_exhaustive_audit():
    graph = make_random_graph(20, 2, 50, seed=5)
    forget = TripleSet(list(graph.triples)[:25])
    samples = transfer_dataset(
        forget, graph, SamplerConfig(mode=MODE_OUT_BOUNDARY, seed=13))
    for s in samples:
        excluded = boundary_entities(graph, s.dispreferred) | {s.dispreferred}
        assert s.preferred not in excluded


def test_transfer_is_deterministic():
    graph = make_random_graph(15, 2, 40, seed=6)
    forget = TripleSet(list(graph.triples)[:10])
    config = SamplerConfig(seed=21)
    assert transfer_dataset(forget, graph, config) == \
        transfer_dataset(forget, graph, config)


def test_transfer_empty_forget_rejected():
    graph = make_random_graph(10, 2, 20, seed=7)
    with pytest.raises(DataError):
        transfer_dataset(TripleSet(), graph, SamplerConfig(seed=0))


def test_sample_requires_distinct_entities():
    with pytest.raises(DataError):
        PreferenceSample(side=HEAD_MASKED, relation=0, kept=1,
                         dispreferred=2, preferred=2)


def test_export_format(tmp_path):
    graph = KnowledgeGraph(["a", "b", "c"], ["likes"], [Triple(0, 0, 1)])
    samples = [PreferenceSample(side=TAIL_MASKED, relation=0, kept=0,
                                dispreferred=1, preferred=2)]
    path = tmp_path / "prefs.tsv"
    export_preferences(samples, graph, path)
    assert path.read_text() == "T\ta\tlikes\tb\tc\n"
