"""The preference-based unlearning loop.

Each time step snapshots the current model as a frozen reference, converts
the step's forgetting triples into preference pairs (out-of-boundary
sampling by default), and minimizes the weighted sum of the preference loss,
a hinge replay loss over retained boundary triples, and a smooth-L1
distillation loss anchoring boundary neighbors to the reference.
"""

import logging
import math
import time
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, DataError
from .evaluation import EvalReport, RankingConfig, evaluate_step, mrr
from .kg import KnowledgeGraph, TripleSet, boundary, boundary_entities
from .losses import Gradients, LossWeights, corrupt_batch, distill_loss, \
    dpo_loss, hinge_loss, total_loss
from .model import EmbeddingModel
from .optim import AdamState, adam_step
from .preference import MODE_OUT_BOUNDARY, PreferenceSample, SamplerConfig, \
    transfer_dataset
from .splits import UnlearnTimeline

logger = logging.getLogger(__name__)


@dataclass
class UnlearnConfig:
    epochs: int = 50
    batch_size: int = 512
    learning_rate: float = 1e-2
    patience: Optional[int] = 5  # stop after this many epochs without forget-MRR decrease
    sampler_mode: str = MODE_OUT_BOUNDARY
    resample_each_epoch: bool = False
    replay_cap_fraction: float = 0.10
    replay_on_scores: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not 0.0 <= self.replay_cap_fraction <= 1.0:
            raise ConfigError("replay_cap_fraction must be in [0, 1]")


def build_replay_set(graph: KnowledgeGraph, samples: List[PreferenceSample],
                     remain: TripleSet, cap: int,
                     rng: np.random.Generator) -> TripleSet:
    """Retained boundary triples of the step's dis-preferred entities.

    The union of the one-hop boundaries is intersected with the remaining
    set (so nothing scheduled for forgetting is replayed) and uniformly
    subsampled down to the cap.
    """
    seen = set()
    ordered = []
    for s in samples:
        e = s.dispreferred
        if e in seen:
            continue
        seen.add(e)
        ordered.append(e)
    pool = TripleSet(t for e in ordered for t in boundary(graph, e)
                     if t in remain)
    if len(pool) > cap:
        picked = rng.choice(len(pool), size=cap, replace=False)
        picked.sort()
        triples = pool.triples
        pool = TripleSet(triples[i] for i in picked)
    return pool


def build_distill_set(graph: KnowledgeGraph,
                      samples: List[PreferenceSample]) -> np.ndarray:
    """Boundary neighbors of the dis-preferred entities, minus those entities."""
    dispreferred = {s.dispreferred for s in samples}
    neighbors = set()
    for e in dispreferred:
        neighbors |= boundary_entities(graph, e)
    return np.asarray(sorted(neighbors - dispreferred), dtype=np.int64)


@dataclass
class EpochRecord:
    epoch: int
    dpo: float
    replay: float
    distill: float
    total: float
    forget_mrr: Optional[float]
    seconds: float


def unlearn_step(model: EmbeddingModel, graph: KnowledgeGraph,
                 forget: TripleSet, remain: TripleSet, weights: LossWeights,
                 config: UnlearnConfig,
                 eval_config: Optional[RankingConfig] = None,
                 on_epoch: Optional[Callable[[EpochRecord], None]] = None,
                 ) -> EmbeddingModel:
    """One unlearning step; returns a new model, inputs untouched.

    When a patience is set, the loop stops once the forget-set MRR has not
    strictly decreased for that many consecutive epochs (needs eval_config).
    """
    if len(forget) == 0:
        raise DataError("forgetting set is empty")
    reference = model.copy()
    trainee = model.copy()

    seeds = np.random.SeedSequence(config.seed).spawn(3)
    sample_seed = int(seeds[0].generate_state(1)[0])
    replay_rng = np.random.default_rng(seeds[1])
    train_rng = np.random.default_rng(seeds[2])

    sampler = SamplerConfig(mode=config.sampler_mode, seed=sample_seed)
    samples = transfer_dataset(forget, graph, sampler)
    cap = math.floor(config.replay_cap_fraction * len(graph.triples))
    replay_set = build_replay_set(graph, samples, remain, cap, replay_rng)
    distill_ids = build_distill_set(graph, samples)
    replay_arr = replay_set.to_array()

    state = AdamState.for_params([trainee.entities, trainee.relations])
    use_patience = config.patience is not None and config.patience > 0
    if use_patience and eval_config is None:
        raise ConfigError("early stopping needs an eval_config")
    best_forget = math.inf
    stale = 0

    for epoch in range(1, config.epochs + 1):
        tic = time.perf_counter()
        if config.resample_each_epoch and epoch > 1:
            epoch_sampler = replace(sampler, seed=sample_seed + epoch)
            samples = transfer_dataset(forget, graph, epoch_sampler)
            replay_set = build_replay_set(graph, samples, remain, cap, replay_rng)
            distill_ids = build_distill_set(graph, samples)
            replay_arr = replay_set.to_array()
        order = train_rng.permutation(len(samples))
        replay_order = train_rng.permutation(len(replay_arr))
        replay_pos = 0
        sums = np.zeros(3)
        n_batches = 0
        for start in range(0, len(samples), config.batch_size):
            batch = [samples[i] for i in order[start:start + config.batch_size]]
            l_dpo, g_dpo = dpo_loss(trainee, reference, batch, weights.beta)

            if weights.replay > 0 and len(replay_arr):
                take = min(config.batch_size, len(replay_arr))
                if replay_pos + take > len(replay_arr):
                    replay_order = train_rng.permutation(len(replay_arr))
                    replay_pos = 0
                replay_batch = replay_arr[replay_order[replay_pos:replay_pos + take]]
                replay_pos += take
                negatives = corrupt_batch(replay_batch, graph.n_entities, train_rng)
                l_rep, g_rep = hinge_loss(
                    trainee, replay_batch, negatives, weights.replay_margin,
                    on_scores=config.replay_on_scores)
            else:
                l_rep, g_rep = 0.0, None

            if weights.distill > 0 and len(distill_ids):
                l_dis, g_dis = distill_loss(trainee, reference, distill_ids)
            else:
                l_dis, g_dis = 0.0, None

            combined = Gradients.zeros_like(trainee)
            combined.add_scaled(g_dpo, weights.dpo)
            if g_rep is not None:
                combined.add_scaled(g_rep, weights.replay)
            if g_dis is not None:
                combined.add_scaled(g_dis, weights.distill)
            adam_step([trainee.entities, trainee.relations],
                      [combined.entities, combined.relations], state,
                      config.learning_rate)
            sums += (l_dpo, l_rep, l_dis)
            n_batches += 1

        mean_dpo, mean_rep, mean_dis = sums / max(n_batches, 1)
        forget_mrr = None
        if use_patience:
            forget_mrr = mrr(trainee, forget, eval_config)
        if on_epoch is not None:
            on_epoch(EpochRecord(
                epoch=epoch, dpo=mean_dpo, replay=mean_rep, distill=mean_dis,
                total=total_loss(weights, mean_dpo, mean_rep, mean_dis),
                forget_mrr=forget_mrr, seconds=time.perf_counter() - tic))
        if use_patience:
            if forget_mrr < best_forget - 1e-12:
                best_forget = forget_mrr
                stale = 0
            else:
                stale += 1
                if stale >= config.patience:
                    logger.info("early stop at epoch %d (forget MRR stalled)", epoch)
                    break
    return trainee


def run_timeline(model: EmbeddingModel, graph: KnowledgeGraph,
                 timeline: UnlearnTimeline, weights: LossWeights,
                 config: UnlearnConfig, eval_config: RankingConfig,
                 on_epoch: Optional[Callable[[int, EpochRecord], None]] = None,
                 ) -> List[Tuple[EmbeddingModel, EvalReport]]:
    """Run unlearning over every step, carrying the model forward.

    A fresh reference snapshot is taken at the start of every step.  Returns
    one (model snapshot, report) pair per step.
    """
    results = []
    step_seeds = np.random.SeedSequence(config.seed).spawn(timeline.n_steps)
    current = model
    for step in range(1, timeline.n_steps + 1):
        step_config = replace(
            config, seed=int(step_seeds[step - 1].generate_state(1)[0]))
        hook = None
        if on_epoch is not None:
            hook = lambda rec, _s=step: on_epoch(_s, rec)
        current = unlearn_step(
            current, graph, timeline.forget(step), timeline.remain(step),
            weights, step_config, eval_config=eval_config, on_epoch=hook)
        report = evaluate_step(current, timeline, step, eval_config)
        results.append((current.copy(), report))
    return results
