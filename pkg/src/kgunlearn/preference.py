"""Turn forgetting triples into preference pairs.

Each forgetting triple is masked on one side (fair coin): the masked entity
becomes the dis-preferred completion of the remaining query, and a preferred
alternative is drawn either uniformly over all other entities or outside the
dis-preferred entity's one-hop boundary.
"""

import logging
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .errors import ConfigError, DataError, SamplingError
from .kg import KnowledgeGraph, Triple, TripleSet, boundary_entities

logger = logging.getLogger(__name__)

TAIL_MASKED = 0
HEAD_MASKED = 1

MODE_UNIFORM = "uniform"
MODE_OUT_BOUNDARY = "out_boundary"
_MODES = (MODE_UNIFORM, MODE_OUT_BOUNDARY)


@dataclass(frozen=True)
class PreferenceSample:
    """One preference pair: query, dis-preferred entity, preferred entity."""

    side: int  # HEAD_MASKED or TAIL_MASKED
    relation: int
    kept: int  # the unmasked entity of the query
    dispreferred: int
    preferred: int

    def __post_init__(self):
        if self.preferred == self.dispreferred:
            raise DataError("preferred entity equals dis-preferred entity")

    @property
    def query(self) -> Tuple[int, int]:
        """(relation, kept entity); slot order depends on the masked side."""
        return (self.relation, self.kept)

    def source_triple(self) -> Triple:
        if self.side == HEAD_MASKED:
            return Triple(self.dispreferred, self.relation, self.kept)
        return Triple(self.kept, self.relation, self.dispreferred)

    def preferred_triple(self) -> Triple:
        if self.side == HEAD_MASKED:
            return Triple(self.preferred, self.relation, self.kept)
        return Triple(self.kept, self.relation, self.preferred)


@dataclass
class SamplerConfig:
    mode: str = MODE_OUT_BOUNDARY
    seed: int = 0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ConfigError(f"sampler mode must be one of {_MODES}, got {self.mode!r}")


def mask_direction(triple: Triple, rng: np.random.Generator) -> Tuple[int, Tuple[int, int], int]:
    """Fair-coin masking: returns (side, query, dis-preferred entity)."""
    side = HEAD_MASKED if rng.integers(0, 2) else TAIL_MASKED
    if side == HEAD_MASKED:
        return side, (triple.relation, triple.tail), triple.head
    return side, (triple.head, triple.relation), triple.tail


def _draw_excluding(n: int, excluded: int, rng: np.random.Generator) -> int:
    """Uniform over range(n) minus one value, with a single draw."""
    value = int(rng.integers(0, n - 1))
    return value + 1 if value >= excluded else value


def sample_preferred(graph: KnowledgeGraph, x: Tuple[int, int], dispreferred: int,
                     config: SamplerConfig, rng: np.random.Generator,
                     boundary_cache: Optional[Dict[int, FrozenSet[int]]] = None) -> int:
    """Draw the preferred entity for a query.

    Uniform mode draws over all entities except the dis-preferred one.
    Out-boundary mode additionally excludes the dis-preferred entity's
    boundary entities, falling back to uniform when nothing is left.
    """
    n = graph.n_entities
    if n < 2:
        raise SamplingError("need at least 2 entities to sample a preferred entity")
    if config.mode == MODE_OUT_BOUNDARY:
        if boundary_cache is not None and dispreferred in boundary_cache:
            excluded = boundary_cache[dispreferred]
        else:
            excluded = boundary_entities(graph, dispreferred) | {dispreferred}
            if boundary_cache is not None:
                boundary_cache[dispreferred] = excluded
        if len(excluded) < n:
            while True:
                candidate = int(rng.integers(0, n))
                if candidate not in excluded:
                    return candidate
        logger.warning(
            "entity %d is adjacent to every entity; falling back to uniform sampling",
            dispreferred)
    return _draw_excluding(n, dispreferred, rng)


def transfer_dataset(forget: TripleSet, graph: KnowledgeGraph,
                     config: SamplerConfig) -> List[PreferenceSample]:
    """One preference sample per forgetting triple, drawn once (static set)."""
    if len(forget) == 0:
        raise DataError("forgetting set is empty")
    rng = np.random.default_rng(config.seed)
    cache: Dict[int, FrozenSet[int]] = {}
    samples = []
    for triple in forget:
        side, query, dispreferred = mask_direction(triple, rng)
        kept = triple.tail if side == HEAD_MASKED else triple.head
        preferred = sample_preferred(graph, query, dispreferred, config, rng, cache)
        samples.append(PreferenceSample(
            side=side, relation=triple.relation, kept=kept,
            dispreferred=dispreferred, preferred=preferred))
    return samples


def export_preferences(samples: List[PreferenceSample], graph: KnowledgeGraph, path) -> None:
    """TSV export: side (H/T), source head, relation, tail, preferred entity."""
    ent = graph.entity_names
    rel = graph.relation_names
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            src = s.source_triple()
            flag = "H" if s.side == HEAD_MASKED else "T"
            fh.write(f"{flag}\t{ent[src.head]}\t{rel[src.relation]}\t"
                     f"{ent[src.tail]}\t{ent[s.preferred]}\n")
