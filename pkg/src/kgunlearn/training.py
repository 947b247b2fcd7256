"""Margin-ranking training for the translational embedding model.

Pretraining minimizes mean(max(0, d(pos) - d(neg) + margin)) with Adam and
analytic gradients; entity rows are renormalized to unit L2 norm after every
update.  The same loop, run from an existing model (optionally with the
gradient sign flipped), backs the fine-tune and negative-gradient baselines.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, SamplingError, TrainingError
from .kg import KnowledgeGraph, Triple, TripleSet
from .losses import corrupt_batch, hinge_loss
from .model import EmbeddingModel, init_model, normalize_entities
from .optim import AdamState, adam_step

logger = logging.getLogger(__name__)


@dataclass
class PretrainConfig:
    dim: int = 200
    margin: float = 8.0
    learning_rate: float = 1e-3
    epochs: int = 100
    batch_size: int = 512
    negatives_per_positive: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.dim <= 0:
            raise ConfigError("dim must be positive")
        if self.margin <= 0:
            raise ConfigError("margin must be positive")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")


def sample_negative(graph: KnowledgeGraph, triple: Triple,
                    rng: np.random.Generator) -> Triple:
    """Corrupt head or tail (fair coin) with a uniform different entity."""
    n = graph.n_entities
    if n < 2:
        raise SamplingError("need at least 2 entities to sample a negative")
    corrupt_head = bool(rng.integers(0, 2))
    original = triple.head if corrupt_head else triple.tail
    draw = int(rng.integers(0, n - 1))
    candidate = draw + 1 if draw >= original else draw
    if corrupt_head:
        return Triple(candidate, triple.relation, triple.tail)
    return Triple(triple.head, triple.relation, candidate)


def margin_epochs(model: EmbeddingModel, triples_arr: np.ndarray, n_entities: int,
                  *, epochs: int, learning_rate: float, batch_size: int,
                  margin: float, negatives_per_positive: int,
                  rng: np.random.Generator, ascend: bool = False,
                  renormalize: bool = True,
                  on_epoch: Optional[Callable[[int, float], None]] = None,
                  ) -> EmbeddingModel:
    """Run margin-ranking epochs in place on a model; returns it.

    ``ascend`` flips the update direction (gradient ascent on the same
    objective).  Raises TrainingError with the epoch index on divergence.
    """
    n = len(triples_arr)
    if n == 0:
        return model
    state = AdamState.for_params([model.entities, model.relations])
    k = negatives_per_positive
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            batch = triples_arr[order[start:start + batch_size]]
            positives = np.repeat(batch, k, axis=0) if k > 1 else batch
            negatives = corrupt_batch(positives, n_entities, rng)
            loss, grads = hinge_loss(model, positives, negatives, margin)
            if not np.isfinite(loss):
                raise TrainingError("non-finite training loss", epoch=epoch)
            if ascend:
                grads.entities = -grads.entities
                grads.relations = -grads.relations
            try:
                adam_step([model.entities, model.relations],
                          [grads.entities, grads.relations], state, learning_rate)
            except TrainingError:
                raise
            except Exception as exc:
                raise TrainingError(str(exc), epoch=epoch) from exc
            if renormalize:
                normalize_entities(model.entities)
            epoch_loss += loss * len(batch)
        epoch_loss /= n
        if not np.isfinite(epoch_loss):
            raise TrainingError("non-finite epoch loss", epoch=epoch)
        if on_epoch is not None:
            on_epoch(epoch, epoch_loss)
    return model


def pretrain(graph: KnowledgeGraph, config: PretrainConfig,
             triples: Optional[TripleSet] = None,
             on_epoch: Optional[Callable[[int, float], None]] = None,
             ) -> EmbeddingModel:
    """Train a fresh model on the graph (or a subset of its triples)."""
    train_set = graph.triples if triples is None else triples
    if len(train_set) == 0:
        raise TrainingError("cannot pretrain on an empty triple set")
    model = init_model(graph, config.dim, config.seed)
    rng = np.random.default_rng(np.random.SeedSequence(config.seed, spawn_key=(1,)))
    return margin_epochs(
        model, train_set.to_array(), graph.n_entities,
        epochs=config.epochs, learning_rate=config.learning_rate,
        batch_size=config.batch_size, margin=config.margin,
        negatives_per_positive=config.negatives_per_positive,
        rng=rng, ascend=False, renormalize=True, on_epoch=on_epoch)
