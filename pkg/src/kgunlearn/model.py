"""Translational embedding model: tables, scoring, and checkpoint I/O.

A triple (h, r, t) scores sigmoid(−‖h + r − t‖₂), strictly inside (0, 1).
Distances are clipped at DISTANCE_CLIP before the sigmoid so log-scores stay
finite without affecting the ordering of realistic distances.
"""

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from . import kernels
from .errors import ConfigError, DataError
from .kg import KnowledgeGraph, Triple

DISTANCE_CLIP = 50.0

CHECKPOINT_MAGIC = b"KGEU"
CHECKPOINT_VERSION = 1


@dataclass
class EmbeddingModel:
    entities: np.ndarray  # (|E|, d) float64
    relations: np.ndarray  # (|R|, d) float64

    @property
    def dim(self) -> int:
        return self.entities.shape[1]

    @property
    def n_entities(self) -> int:
        return self.entities.shape[0]

    @property
    def n_relations(self) -> int:
        return self.relations.shape[0]

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.entities.copy(), self.relations.copy())


def init_model(graph: KnowledgeGraph, dim: int, seed: int) -> EmbeddingModel:
    """Uniform init in [−6/√d, 6/√d]; entity rows rescaled to unit L2 norm."""
    if dim <= 0:
        raise ConfigError(f"embedding dimension must be positive, got {dim}")
    rng = np.random.default_rng(seed)
    bound = 6.0 / np.sqrt(dim)
    entities = rng.uniform(-bound, bound, size=(graph.n_entities, dim))
    relations = rng.uniform(-bound, bound, size=(max(graph.n_relations, 0), dim))
    normalize_entities(entities)
    return EmbeddingModel(entities, relations)


def normalize_entities(entities: np.ndarray) -> None:
    """Rescale every entity row to unit L2 norm in place."""
    norms = np.sqrt(np.einsum("ij,ij->i", entities, entities))
    np.maximum(norms, 1e-300, out=norms)
    entities /= norms[:, None]


def distance(model: EmbeddingModel, triple: Triple) -> float:
    """‖h + r − t‖₂ (unclipped)."""
    diff = (model.entities[triple.head] + model.relations[triple.relation]
            - model.entities[triple.tail])
    return float(np.sqrt(diff @ diff))


def score(model: EmbeddingModel, triple: Triple) -> float:
    """sigmoid(−distance), strictly in (0, 1)."""
    return float(expit(-min(distance(model, triple), DISTANCE_CLIP)))


def batch_distances(model: EmbeddingModel, heads, rels, tails) -> np.ndarray:
    heads = np.ascontiguousarray(heads, dtype=np.int64)
    rels = np.ascontiguousarray(rels, dtype=np.int64)
    tails = np.ascontiguousarray(tails, dtype=np.int64)
    return kernels.pair_distances(model.entities, model.relations, heads, rels, tails)


def scores_from_distances(dists: np.ndarray) -> np.ndarray:
    return expit(-np.minimum(dists, DISTANCE_CLIP))


def log_scores_from_distances(dists: np.ndarray) -> np.ndarray:
    """log sigmoid(−d) computed stably: −log(1 + e^d)."""
    return -np.logaddexp(0.0, np.minimum(dists, DISTANCE_CLIP))


def candidate_distances(model: EmbeddingModel, triple: Triple, direction: str) -> np.ndarray:
    """Distances of all entities substituted into one slot of a triple.

    direction "head": d(c) = ‖c + r − t‖; direction "tail": d(c) = ‖h + r − c‖.
    """
    if direction == "head":
        query = model.relations[triple.relation] - model.entities[triple.tail]
    elif direction == "tail":
        query = -(model.entities[triple.head] + model.relations[triple.relation])
    else:
        raise ConfigError(f"unknown direction {direction!r}")
    return kernels.all_entity_distances(model.entities, np.ascontiguousarray(query))


def save_checkpoint(model: EmbeddingModel, path) -> None:
    """Bit-exact binary format: magic, version, d, |E|, |R| (u32 LE), then the
    entity and relation tables row-major as little-endian float64."""
    header = CHECKPOINT_MAGIC + struct.pack(
        "<IIII", CHECKPOINT_VERSION, model.dim, model.n_entities, model.n_relations)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(model.entities, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(model.relations, dtype="<f8").tobytes())


def load_checkpoint(path) -> EmbeddingModel:
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != CHECKPOINT_MAGIC:
        raise DataError(f"{path}: not a checkpoint (bad magic)")
    version, dim, n_ent, n_rel = struct.unpack_from("<IIII", blob, 4)
    if version != CHECKPOINT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint version {version}")
    offset = 4 + 16
    expected = offset + 8 * dim * (n_ent + n_rel)
    if len(blob) != expected:
        raise DataError(f"{path}: truncated checkpoint "
                        f"({len(blob)} bytes, expected {expected})")
    entities = np.frombuffer(blob, dtype="<f8", count=n_ent * dim, offset=offset)
    offset += 8 * n_ent * dim
    relations = np.frombuffer(blob, dtype="<f8", count=n_rel * dim, offset=offset)
    return EmbeddingModel(
        entities.reshape(n_ent, dim).astype(np.float64),
        relations.reshape(n_rel, dim).astype(np.float64),
    )
