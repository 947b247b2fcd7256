"""Link-prediction ranking and the forget/retain metrics.

A query masks the head or tail of a triple and ranks the true entity against
all entities; filtered mode drops candidates that form other known triples.
Ties get the average rank: 1 + #strictly-better + #ties / 2.

Per step the report carries MRR over the accumulated forgetting set (m_f),
MRR over the remaining set (m_r), and their aggregates
m_avg = (m_r + (1 - m_f)) / 2 and m_f1 = harmonic mean of m_r and (1 - m_f).
"""

import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Tuple

import numpy as np

from . import kernels
from .errors import ConfigError, DataError
from .kg import Triple, TripleSet
from .model import EmbeddingModel, candidate_distances

CSV_HEADER = "step,m_f,m_r,m_avg,m_f1,n_forget,n_remain,seconds"


class FilterIndex:
    """Lookup of known completions per query, built from a triple set."""

    def __init__(self, triples: Iterable[Triple]):
        heads: Dict[Tuple[int, int], list] = {}
        tails: Dict[Tuple[int, int], list] = {}
        for t in triples:
            heads.setdefault((t.relation, t.tail), []).append(t.head)
            tails.setdefault((t.head, t.relation), []).append(t.tail)
        self._heads = {k: np.asarray(v, dtype=np.int64) for k, v in heads.items()}
        self._tails = {k: np.asarray(v, dtype=np.int64) for k, v in tails.items()}
        self._empty = np.empty(0, dtype=np.int64)

    def known_heads(self, relation: int, tail: int) -> np.ndarray:
        return self._heads.get((relation, tail), self._empty)

    def known_tails(self, head: int, relation: int) -> np.ndarray:
        return self._tails.get((head, relation), self._empty)


@dataclass
class RankingConfig:
    """Evaluation protocol: filtered against a fixed triple set, or raw."""

    filtered: bool = True
    filter_source: Optional[TripleSet] = None
    _index: Optional[FilterIndex] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.filtered and self.filter_source is None:
            raise ConfigError("filtered ranking requires a filter_source")

    def index(self) -> Optional[FilterIndex]:
        if not self.filtered:
            return None
        if self._index is None:
            self._index = FilterIndex(self.filter_source)
        return self._index


def rank(model: EmbeddingModel, triple: Triple, direction: str,
         config: RankingConfig) -> float:
    """Average-tie rank of the true entity in the masked slot, >= 1."""
    dists = candidate_distances(model, triple, direction)
    removed = np.zeros(model.n_entities, dtype=np.uint8)
    index = config.index()
    if index is not None:
        if direction == "head":
            known = index.known_heads(triple.relation, triple.tail)
            true_idx = triple.head
        else:
            known = index.known_tails(triple.head, triple.relation)
            true_idx = triple.tail
        removed[known] = 1
    else:
        true_idx = triple.head if direction == "head" else triple.tail
    better, ties = kernels.rank_counts(dists, true_idx, removed)
    return 1.0 + better + 0.5 * ties


def mrr(model: EmbeddingModel, triples: TripleSet, config: RankingConfig) -> float:
    """Mean over triples of the mean head/tail reciprocal rank."""
    if len(triples) == 0:
        raise DataError("cannot compute MRR over an empty triple set")
    total = 0.0
    for t in triples:
        rr = 1.0 / rank(model, t, "head", config) + 1.0 / rank(model, t, "tail", config)
        total += 0.5 * rr
    return total / len(triples)


def aggregate(m_f: float, m_r: float) -> Tuple[float, float]:
    """(average, harmonic) combination of retention m_r and forgetting 1-m_f."""
    kept = 1.0 - m_f
    avg = (m_r + kept) / 2.0
    denom = m_r + kept
    f1 = 0.0 if denom == 0.0 else 2.0 * m_r * kept / denom
    return avg, f1


@dataclass
class EvalReport:
    step: int
    m_f: float
    m_r: float
    m_avg: float
    m_f1: float
    n_forget: int
    n_remain: int
    seconds: float

    def csv_row(self) -> str:
        return (f"{self.step},{self.m_f:.6f},{self.m_r:.6f},{self.m_avg:.6f},"
                f"{self.m_f1:.6f},{self.n_forget},{self.n_remain},{self.seconds:.3f}")

    def as_dict(self) -> dict:
        return {
            "step": self.step, "m_f": self.m_f, "m_r": self.m_r,
            "m_avg": self.m_avg, "m_f1": self.m_f1,
            "n_forget": self.n_forget, "n_remain": self.n_remain,
            "seconds": self.seconds,
        }


def evaluate_step(model: EmbeddingModel, timeline, step: int,
                  config: RankingConfig) -> EvalReport:
    """Evaluate a model at a time step of a timeline.

    m_f is the MRR over the union of all forget sets up to the step; m_r is
    the MRR over the step's remaining set.
    """
    start = time.perf_counter()
    forget_union = timeline.accumulated_forget(step)
    remain = timeline.remain(step)
    m_f = mrr(model, forget_union, config)
    m_r = mrr(model, remain, config)
    m_avg, m_f1 = aggregate(m_f, m_r)
    return EvalReport(step=step, m_f=m_f, m_r=m_r, m_avg=m_avg, m_f1=m_f1,
                      n_forget=len(forget_union), n_remain=len(remain),
                      seconds=time.perf_counter() - start)
