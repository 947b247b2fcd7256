"""Unlearning loss terms with analytic gradients.

All losses are batch means; gradients are dense tables matching the model so
they can be combined linearly and fed to the optimizer.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import NumericError
from .kg import Triple
from .model import DISTANCE_CLIP, EmbeddingModel, batch_distances, \
    log_scores_from_distances, scores_from_distances
from .preference import PreferenceSample


@dataclass
class LossWeights:
    """Weights of the combined objective plus the replay margin."""

    beta: float = 1.0
    dpo: float = 1.0
    replay: float = 1.0
    distill: float = 1.0
    replay_margin: float = 8.0

    def __post_init__(self):
        for name in ("beta", "dpo", "replay", "distill"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.replay_margin <= 0:
            raise ValueError("replay_margin must be > 0")


class Gradients:
    """Dense gradient tables for the entity and relation embeddings."""

    __slots__ = ("entities", "relations")

    def __init__(self, entities: np.ndarray, relations: np.ndarray):
        self.entities = entities
        self.relations = relations

    @classmethod
    def zeros_like(cls, model: EmbeddingModel) -> "Gradients":
        return cls(np.zeros_like(model.entities), np.zeros_like(model.relations))

    def add_scaled(self, other: "Gradients", scale: float) -> None:
        if scale != 0.0:
            self.entities += scale * other.entities
            self.relations += scale * other.relations


def _triple_arrays(triples) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    arr = np.asarray([(t.head, t.relation, t.tail) for t in triples], dtype=np.int64)
    if arr.size == 0:
        arr = arr.reshape(0, 3)
    return arr[:, 0], arr[:, 1], arr[:, 2]


def _accumulate(model: EmbeddingModel, heads, rels, tails,
                coeffs: np.ndarray, grads: Gradients) -> None:
    """Add coeff * d(distance)/d(embedding) for each triple into the tables."""
    diff = model.entities[heads] + model.relations[rels] - model.entities[tails]
    norms = np.sqrt(np.einsum("ij,ij->i", diff, diff))
    rows = (coeffs / np.maximum(norms, 1e-300))[:, None] * diff
    heads = np.ascontiguousarray(heads, dtype=np.int64)
    rels = np.ascontiguousarray(rels, dtype=np.int64)
    tails = np.ascontiguousarray(tails, dtype=np.int64)
    kernels.scatter_add_rows(grads.entities, heads, rows)
    kernels.scatter_add_rows(grads.relations, rels, rows)
    kernels.scatter_add_rows(grads.entities, tails, np.ascontiguousarray(-rows))


def preference_batch_arrays(samples: Sequence[PreferenceSample]):
    """Index arrays for the dis-preferred and preferred triples of a batch."""
    src = _triple_arrays([s.source_triple() for s in samples])
    pref = _triple_arrays([s.preferred_triple() for s in samples])
    return src, pref


def dpo_loss_value(score_w: float, score_w_ref: float, score_l: float,
                   score_l_ref: float, beta: float) -> float:
    """The preference loss for one sample given raw score values.

    -log sigmoid(beta * [log(score_w/score_w_ref) - log(score_l/score_l_ref)]).
    """
    for value in (score_w, score_w_ref, score_l, score_l_ref):
        if not 0.0 < value < 1.0:
            raise NumericError(f"scores must lie strictly in (0, 1), got {value}")
    inner = beta * (np.log(score_w / score_w_ref) - np.log(score_l / score_l_ref))
    return float(np.logaddexp(0.0, -inner))


def dpo_loss(model: EmbeddingModel, reference: EmbeddingModel,
             samples: Sequence[PreferenceSample], beta: float,
             ) -> Tuple[float, Gradients]:
    """Preference loss against a frozen reference model.

    Per sample: -log sigmoid(beta * [log f(x,y_w)/f_ref(x,y_w)
    - log f(x,y_l)/f_ref(x,y_l)]), averaged over the batch.  Gradients are
    taken with respect to the trainee only.
    """
    (src_h, src_r, src_t), (pref_h, pref_r, pref_t) = preference_batch_arrays(samples)
    d_l = batch_distances(model, src_h, src_r, src_t)
    d_w = batch_distances(model, pref_h, pref_r, pref_t)
    d_l_ref = batch_distances(reference, src_h, src_r, src_t)
    d_w_ref = batch_distances(reference, pref_h, pref_r, pref_t)

    inner = beta * (
        (log_scores_from_distances(d_w) - log_scores_from_distances(d_w_ref))
        - (log_scores_from_distances(d_l) - log_scores_from_distances(d_l_ref)))
    if not np.all(np.isfinite(inner)):
        raise NumericError("non-finite log score ratio in preference loss")
    loss = float(np.mean(np.logaddexp(0.0, -inner)))

    grads = Gradients.zeros_like(model)
    n = len(samples)
    outer = expit(-inner) / n
    coeff_w = outer * beta * expit(np.minimum(d_w, DISTANCE_CLIP)) * (d_w < DISTANCE_CLIP)
    coeff_l = -outer * beta * expit(np.minimum(d_l, DISTANCE_CLIP)) * (d_l < DISTANCE_CLIP)
    _accumulate(model, pref_h, pref_r, pref_t, coeff_w, grads)
    _accumulate(model, src_h, src_r, src_t, coeff_l, grads)
    return loss, grads


def hinge_loss(model: EmbeddingModel, positives: np.ndarray, negatives: np.ndarray,
               margin: float, on_scores: bool = False) -> Tuple[float, Gradients]:
    """Margin hinge between positive triples and their corruptions.

    Default form compares raw distances, max(0, d_pos - d_neg + margin);
    ``on_scores`` switches to the sigmoid-score form
    max(0, f_pos - f_neg + margin).
    """
    grads = Gradients.zeros_like(model)
    if len(positives) == 0:
        return 0.0, grads
    ph, pr, pt = positives[:, 0], positives[:, 1], positives[:, 2]
    nh, nr, nt = negatives[:, 0], negatives[:, 1], negatives[:, 2]
    d_pos = batch_distances(model, ph, pr, pt)
    d_neg = batch_distances(model, nh, nr, nt)
    n = len(positives)
    if on_scores:
        f_pos = scores_from_distances(d_pos)
        f_neg = scores_from_distances(d_neg)
        slack = f_pos - f_neg + margin
        active = slack > 0
        loss = float(np.mean(np.where(active, slack, 0.0)))
        # df/dd = -f(1-f) inside the clip, 0 beyond it
        coeff_pos = np.where(active & (d_pos < DISTANCE_CLIP),
                             -f_pos * (1.0 - f_pos), 0.0) / n
        coeff_neg = np.where(active & (d_neg < DISTANCE_CLIP),
                             f_neg * (1.0 - f_neg), 0.0) / n
    else:
        slack = d_pos - d_neg + margin
        active = slack > 0
        loss = float(np.mean(np.where(active, slack, 0.0)))
        coeff_pos = active.astype(np.float64) / n
        coeff_neg = -coeff_pos
    _accumulate(model, ph, pr, pt, coeff_pos, grads)
    _accumulate(model, nh, nr, nt, coeff_neg, grads)
    return loss, grads


def replay_loss(model: EmbeddingModel, replay: Sequence[Triple], margin: float,
                rng: np.random.Generator, n_entities: int,
                on_scores: bool = False) -> Tuple[float, Gradients]:
    """Hinge over replay triples with one fresh corruption per positive."""
    if len(replay) == 0:
        return 0.0, Gradients.zeros_like(model)
    if hasattr(replay, "to_array"):
        positives = replay.to_array()
    else:
        h, r, t = _triple_arrays(replay)
        positives = np.stack([h, r, t], axis=1)
    negatives = corrupt_batch(positives, n_entities, rng)
    return hinge_loss(model, positives, negatives, margin, on_scores=on_scores)


def corrupt_batch(triples: np.ndarray, n_entities: int,
                  rng: np.random.Generator) -> np.ndarray:
    """Replace head or tail (fair coin) with a uniform different entity."""
    if n_entities < 2:
        raise NumericError("cannot corrupt triples with fewer than 2 entities")
    m = len(triples)
    corrupt_head = rng.integers(0, 2, size=m).astype(bool)
    original = np.where(corrupt_head, triples[:, 0], triples[:, 2])
    draws = rng.integers(0, n_entities - 1, size=m)
    candidates = draws + (draws >= original)
    out = triples.copy()
    out[corrupt_head, 0] = candidates[corrupt_head]
    out[~corrupt_head, 2] = candidates[~corrupt_head]
    return out


def distill_loss(model: EmbeddingModel, reference: EmbeddingModel,
                 entity_ids: np.ndarray) -> Tuple[float, Gradients]:
    """Smooth-L1 anchoring of selected entity rows to the reference rows.

    Per entity the loss is the mean over dimensions of 0.5*x^2 for |x| <= 1
    and |x| - 0.5 otherwise; the total is the mean over entities.
    """
    grads = Gradients.zeros_like(model)
    entity_ids = np.asarray(entity_ids, dtype=np.int64)
    if entity_ids.size == 0:
        return 0.0, grads
    diff = model.entities[entity_ids] - reference.entities[entity_ids]
    absd = np.abs(diff)
    quad = absd <= 1.0
    elem = np.where(quad, 0.5 * diff * diff, absd - 0.5)
    loss = float(np.mean(np.mean(elem, axis=1)))
    scale = 1.0 / (diff.shape[1] * diff.shape[0])
    rows = np.where(quad, diff, np.sign(diff)) * scale
    kernels.scatter_add_rows(grads.entities, entity_ids,
                             np.ascontiguousarray(rows))
    return loss, grads


def total_loss(weights: LossWeights, l_dpo: float, l_replay: float,
               l_distill: float) -> float:
    return weights.dpo * l_dpo + weights.replay * l_replay + weights.distill * l_distill
