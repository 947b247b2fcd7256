"""Comparison arms: exact re-training, fine-tuning, and negative gradient.

All three share the margin-ranking machinery and produce models
interchangeable with the unlearning trainer's checkpoints.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError
from .kg import KnowledgeGraph, TripleSet
from .model import EmbeddingModel
from .training import PretrainConfig, margin_epochs, pretrain

METHOD_GRAPHDPO = "graphdpo"
METHOD_RETRAIN = "retrain"
METHOD_FINETUNE = "finetune"
METHOD_NEG_GRADIENT = "ng"
METHODS = (METHOD_GRAPHDPO, METHOD_RETRAIN, METHOD_FINETUNE, METHOD_NEG_GRADIENT)


@dataclass
class BaselineConfig:
    """Schedule for the fine-tune and negative-gradient arms."""

    epochs: int = 10
    learning_rate: float = 1e-3
    batch_size: int = 512
    margin: float = 8.0
    negatives_per_positive: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")


def retrain(graph: KnowledgeGraph, remain: TripleSet,
            config: PretrainConfig) -> EmbeddingModel:
    """Train a fresh model on the remaining triples only."""
    if len(remain) == 0:
        raise DataError("remaining set is empty")
    return pretrain(graph, config, triples=remain)


def _continue(model: EmbeddingModel, graph: KnowledgeGraph, triples: TripleSet,
              config: BaselineConfig, ascend: bool) -> EmbeddingModel:
    out = model.copy()
    if config.epochs == 0:
        return out
    rng = np.random.default_rng(config.seed)
    return margin_epochs(
        out, triples.to_array(), graph.n_entities,
        epochs=config.epochs, learning_rate=config.learning_rate,
        batch_size=config.batch_size, margin=config.margin,
        negatives_per_positive=config.negatives_per_positive,
        rng=rng, ascend=ascend, renormalize=True)


def finetune(model: EmbeddingModel, graph: KnowledgeGraph, remain: TripleSet,
             config: BaselineConfig) -> EmbeddingModel:
    """Continue margin-ranking training on the remaining triples."""
    if len(remain) == 0:
        raise DataError("remaining set is empty")
    return _continue(model, graph, remain, config, ascend=False)


def neg_gradient(model: EmbeddingModel, graph: KnowledgeGraph, forget: TripleSet,
                 config: BaselineConfig) -> EmbeddingModel:
    """Gradient ascent on the margin objective restricted to the forget set."""
    if len(forget) == 0:
        raise DataError("forgetting set is empty")
    return _continue(model, graph, forget, config, ascend=True)
