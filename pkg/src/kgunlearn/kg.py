"""Immutable dictionary-encoded triple store with a one-hop adjacency index.

Triples are (head, relation, tail) over dense integer ids assigned by first
occurrence in the input.  The adjacency index answers boundary queries:
all triples incident to an entity, and the entities they touch.
"""

import logging
from typing import IO, Iterable, Iterator, NamedTuple, Union

import numpy as np

from .errors import DataError, ParseError

logger = logging.getLogger(__name__)


class Triple(NamedTuple):
    head: int
    relation: int
    tail: int


class TripleSet:
    """Duplicate-free ordered sequence of triples.

    Iteration order is the insertion order of first occurrences, so two sets
    built from the same sequence iterate identically.
    """

    __slots__ = ("triples", "_members", "_array")

    def __init__(self, triples: Iterable[Triple] = ()):
        seen = set()
        ordered = []
        for t in triples:
            if t not in seen:
                seen.add(t)
                ordered.append(t)
        self.triples: tuple = tuple(ordered)
        self._members: frozenset = frozenset(seen)
        self._array = None

    def __len__(self) -> int:
        return len(self.triples)

    def __iter__(self) -> Iterator[Triple]:
        return iter(self.triples)

    def __contains__(self, triple) -> bool:
        return triple in self._members

    def __eq__(self, other) -> bool:
        if not isinstance(other, TripleSet):
            return NotImplemented
        return self._members == other._members

    def __hash__(self):
        return hash(self._members)

    def __repr__(self) -> str:
        return f"TripleSet({len(self.triples)} triples)"

    def as_set(self) -> frozenset:
        return self._members

    def to_array(self) -> np.ndarray:
        """(N, 3) int64 array in iteration order (cached)."""
        if self._array is None:
            arr = np.fromiter(
                (v for t in self.triples for v in t), dtype=np.int64,
                count=3 * len(self.triples),
            )
            self._array = arr.reshape(-1, 3)
        return self._array

    def difference(self, other: "TripleSet") -> "TripleSet":
        members = other._members
        return TripleSet(t for t in self.triples if t not in members)


class KnowledgeGraph:
    """Entity/relation dictionaries, triple set, and adjacency index."""

    def __init__(self, entity_names: Iterable[str], relation_names: Iterable[str],
                 triples: Iterable[Triple]):
        self.entity_names = tuple(entity_names)
        self.relation_names = tuple(relation_names)
        if not self.entity_names:
            raise DataError("graph has no entities")
        self.triples = triples if isinstance(triples, TripleSet) else TripleSet(triples)
        n_ent, n_rel = len(self.entity_names), len(self.relation_names)
        adjacency = [[] for _ in range(n_ent)]
        for t in self.triples:
            if not (0 <= t.head < n_ent and 0 <= t.tail < n_ent):
                raise DataError(f"entity id out of range in {t}")
            if not (0 <= t.relation < n_rel):
                raise DataError(f"relation id out of range in {t}")
            adjacency[t.head].append(t)
            if t.tail != t.head:  # self-loops stored once
                adjacency[t.tail].append(t)
        self._adjacency = tuple(tuple(lst) for lst in adjacency)
        self.entity_ids = {name: i for i, name in enumerate(self.entity_names)}
        self.relation_ids = {name: i for i, name in enumerate(self.relation_names)}

    @property
    def n_entities(self) -> int:
        return len(self.entity_names)

    @property
    def n_relations(self) -> int:
        return len(self.relation_names)

    def __repr__(self) -> str:
        return (f"KnowledgeGraph(|E|={self.n_entities}, |R|={self.n_relations}, "
                f"|T|={len(self.triples)})")

    def _check_entity(self, entity: int) -> None:
        if not 0 <= entity < self.n_entities:
            raise DataError(f"invalid entity id {entity}")

    def adjacency(self, entity: int) -> tuple:
        self._check_entity(entity)
        return self._adjacency[entity]


def boundary(graph: KnowledgeGraph, entity: int) -> TripleSet:
    """All triples with the given entity as head or tail."""
    return TripleSet(graph.adjacency(entity))


def boundary_entities(graph: KnowledgeGraph, entity: int) -> frozenset:
    """Endpoints of the boundary triples of an entity.

    Contains the entity itself whenever its boundary is non-empty.
    """
    out = set()
    for t in graph.adjacency(entity):
        out.add(t.head)
        out.add(t.tail)
    return frozenset(out)


def parse_triples(source: Union[IO, Iterable[str]]) -> KnowledgeGraph:
    """Build a graph from TSV lines ``head<TAB>relation<TAB>tail``.

    Ids are assigned by first occurrence; duplicate lines collapse to one
    triple (count logged).  Raises ParseError on malformed lines and
    DataError on empty input.
    """
    entity_ids: dict = {}
    relation_ids: dict = {}
    entity_names: list = []
    relation_names: list = []
    triples: list = []
    seen: set = set()
    duplicates = 0

    def intern_entity(name: str) -> int:
        eid = entity_ids.get(name)
        if eid is None:
            eid = len(entity_names)
            entity_ids[name] = eid
            entity_names.append(name)
        return eid

    for lineno, raw in enumerate(source, start=1):
        line = raw.rstrip("\n")
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ParseError(
                f"expected 3 tab-separated fields, got {len(fields)}", lineno)
        h_name, r_name, t_name = fields
        h = intern_entity(h_name)
        rid = relation_ids.get(r_name)
        if rid is None:
            rid = len(relation_names)
            relation_ids[r_name] = rid
            relation_names.append(r_name)
        t = intern_entity(t_name)
        triple = Triple(h, rid, t)
        if triple in seen:
            duplicates += 1
            continue
        seen.add(triple)
        triples.append(triple)

    if not triples:
        raise DataError("empty input: no triples parsed")
    if duplicates:
        logger.info("collapsed %d duplicate input lines", duplicates)
    return KnowledgeGraph(entity_names, relation_names, triples)


def load_graph(path) -> KnowledgeGraph:
    with open(path, "r", encoding="utf-8", newline="\n") as fh:
        return parse_triples(fh)


def write_triples(triples: Iterable[Triple], graph: KnowledgeGraph, path) -> None:
    """Serialize triples to TSV using the graph's dictionaries."""
    ent = graph.entity_names
    rel = graph.relation_names
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in triples:
            fh.write(f"{ent[t.head]}\t{rel[t.relation]}\t{ent[t.tail]}\n")
