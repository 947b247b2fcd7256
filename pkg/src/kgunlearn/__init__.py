"""Continual unlearning for translational knowledge-graph embeddings.

Pipeline: parse a TSV triple file, build per-step forgetting/remaining
splits, pretrain a TransE-style model, unlearn each step with preference
optimization plus boundary replay and distillation (or a baseline arm), and
evaluate filtered MRR on the accumulated forgetting and remaining sets.
"""

from .baselines import BaselineConfig, finetune, neg_gradient, retrain
from .equivalence import check_out_boundary_equivalence, check_uniform_equivalence, \
    preference_expectation_exact, unlearn_expectation
from .errors import ConfigError, DataError, KgUnlearnError, NumericError, \
    ParseError, SamplingError, TrainingError
from .evaluation import EvalReport, RankingConfig, aggregate, evaluate_step, mrr, rank
from .kg import KnowledgeGraph, Triple, TripleSet, boundary, boundary_entities, \
    load_graph, parse_triples, write_triples
from .losses import Gradients, LossWeights, distill_loss, dpo_loss, replay_loss, \
    total_loss
from .model import EmbeddingModel, distance, init_model, load_checkpoint, \
    save_checkpoint, score
from .optim import AdamState, adam_step
from .preference import PreferenceSample, SamplerConfig, mask_direction, \
    sample_preferred, transfer_dataset
from .splits import BuildConfig, UnlearnTimeline, build_timeline, load_timeline, \
    write_manifest
from .training import PretrainConfig, pretrain, sample_negative
from .unlearn import UnlearnConfig, run_timeline, unlearn_step

__version__ = "0.1.0"
