"""Controlled construction of per-step forgetting/remaining splits.

At every step the candidates (triples never forgotten so far) are divided
into those touching an entity of the forgetting history and the rest; the
step quota is drawn proportionally from the two pools without replacement.

Quota modes:
  * "constant" (default): every step forgets floor(rate * |T|) triples, the
    quota split between the pools proportionally to their sizes.
  * "per_candidate": each pool contributes floor(rate * pool size), so the
    step quota shrinks as the candidate pool shrinks.
"""

import json
import math
import os
from dataclasses import dataclass
from typing import Dict, List, Tuple

import numpy as np

from .errors import ConfigError, DataError
from .kg import KnowledgeGraph, Triple, TripleSet, load_graph

QUOTA_CONSTANT = "constant"
QUOTA_PER_CANDIDATE = "per_candidate"

MANIFEST_NAME = "manifest.json"


@dataclass
class BuildConfig:
    rate: float
    steps: int
    seed: int = 0
    quota_mode: str = QUOTA_CONSTANT

    def __post_init__(self):
        if not 0.0 < self.rate < 1.0:
            raise ConfigError(f"rate must be in (0, 1), got {self.rate}")
        if self.steps < 1:
            raise ConfigError(f"steps must be >= 1, got {self.steps}")
        if self.rate * self.steps > 1.0 + 1e-12:
            raise ConfigError(
                f"rate * steps = {self.rate * self.steps:.4f} exceeds 1; "
                "the cumulative forgetting would exceed the graph")
        if self.quota_mode not in (QUOTA_CONSTANT, QUOTA_PER_CANDIDATE):
            raise ConfigError(f"unknown quota mode {self.quota_mode!r}")


def _floor_quota(rate: float, count: int) -> int:
    """floor(rate * count), snapping to integers the product should hit
    exactly (0.3 * 10 is 2.9999... in binary floating point)."""
    value = rate * count
    nearest = round(value)
    if abs(value - nearest) < 1e-6:
        return int(nearest)
    return math.floor(value)


class UnlearnTimeline:
    """Per-step forgetting and remaining splits over a source graph.

    Steps are 1-based.  Forget sets are pairwise disjoint and remain(i) is
    the source triples minus all forget sets up to i.
    """

    def __init__(self, graph: KnowledgeGraph, config: BuildConfig,
                 forget_indices: List[np.ndarray]):
        self.graph = graph
        self.config = config
        self._forget_indices = [np.asarray(ix, dtype=np.int64) for ix in forget_indices]
        self._forget_cache: Dict[int, TripleSet] = {}
        self._remain_cache: Dict[int, TripleSet] = {}

    @property
    def n_steps(self) -> int:
        return len(self._forget_indices)

    def _check_step(self, step: int) -> None:
        if not 1 <= step <= self.n_steps:
            raise DataError(f"step {step} outside 1..{self.n_steps}")

    def forget_count(self, step: int) -> int:
        self._check_step(step)
        return len(self._forget_indices[step - 1])

    def remain_count(self, step: int) -> int:
        self._check_step(step)
        total = len(self.graph.triples)
        return total - sum(len(self._forget_indices[j]) for j in range(step))

    def _rows(self, indices: np.ndarray) -> TripleSet:
        arr = self.graph.triples.to_array()
        return TripleSet(Triple(int(h), int(r), int(t)) for h, r, t in arr[indices])

    def forget(self, step: int) -> TripleSet:
        self._check_step(step)
        if step not in self._forget_cache:
            self._forget_cache[step] = self._rows(self._forget_indices[step - 1])
        return self._forget_cache[step]

    def remain(self, step: int) -> TripleSet:
        self._check_step(step)
        if step not in self._remain_cache:
            gone = np.zeros(len(self.graph.triples), dtype=bool)
            for j in range(step):
                gone[self._forget_indices[j]] = True
            self._remain_cache[step] = self._rows(np.flatnonzero(~gone))
        return self._remain_cache[step]

    def accumulated_forget(self, step: int) -> TripleSet:
        """Union of the forget sets of steps 1..step."""
        self._check_step(step)
        idx = np.concatenate([self._forget_indices[j] for j in range(step)])
        return self._rows(idx)


def build_timeline(graph: KnowledgeGraph, config: BuildConfig) -> UnlearnTimeline:
    arr = graph.triples.to_array()
    n_total = len(arr)
    if n_total == 0:
        raise DataError("graph has no triples")
    rng = np.random.default_rng(config.seed)
    forgotten = np.zeros(n_total, dtype=bool)
    hist_entities = np.zeros(graph.n_entities, dtype=bool)
    constant_quota = _floor_quota(config.rate, n_total)
    forget_indices: List[np.ndarray] = []

    for _ in range(config.steps):
        candidates = np.flatnonzero(~forgotten)
        connected = hist_entities[arr[candidates, 0]] | hist_entities[arr[candidates, 2]]
        conn_idx = candidates[connected]
        unconn_idx = candidates[~connected]
        if config.quota_mode == QUOTA_CONSTANT:
            quota = constant_quota
            if quota > len(candidates):
                raise DataError(
                    f"step quota {quota} exceeds {len(candidates)} candidates")
            n_conn = (quota * len(conn_idx)) // len(candidates) if quota else 0
            n_unconn = quota - n_conn
        else:
            n_conn = _floor_quota(config.rate, len(conn_idx))
            n_unconn = _floor_quota(config.rate, len(unconn_idx))
        if n_conn > len(conn_idx) or n_unconn > len(unconn_idx):
            raise DataError("step quota exceeds the candidate pools")
        picked_conn = rng.choice(len(conn_idx), size=n_conn, replace=False)
        picked_unconn = rng.choice(len(unconn_idx), size=n_unconn, replace=False)
        chosen = np.concatenate([conn_idx[picked_conn], unconn_idx[picked_unconn]])
        chosen.sort()
        forgotten[chosen] = True
        hist_entities[arr[chosen, 0]] = True
        hist_entities[arr[chosen, 2]] = True
        forget_indices.append(chosen)

    return UnlearnTimeline(graph, config, forget_indices)


def _write_rows(graph: KnowledgeGraph, rows: np.ndarray, path: str) -> None:
    ent = graph.entity_names
    rel = graph.relation_names
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.writelines(f"{ent[h]}\t{rel[r]}\t{ent[t]}\n" for h, r, t in rows)


def write_manifest(timeline: UnlearnTimeline, directory) -> str:
    """Write step TSV files plus a JSON manifest; returns the manifest path.

    Manifest fields: rate, steps, seed, quota_mode, n_entities, n_relations,
    n_triples, and per step {step, n_forget, n_remain, forget_file,
    remain_file}.
    """
    os.makedirs(directory, exist_ok=True)
    graph = timeline.graph
    arr = graph.triples.to_array()
    gone = np.zeros(len(arr), dtype=bool)
    step_stats = []
    for step in range(1, timeline.n_steps + 1):
        idx = timeline._forget_indices[step - 1]
        gone[idx] = True
        forget_file = f"step_{step}_forget.tsv"
        remain_file = f"step_{step}_remain.tsv"
        _write_rows(graph, arr[idx], os.path.join(directory, forget_file))
        _write_rows(graph, arr[np.flatnonzero(~gone)],
                    os.path.join(directory, remain_file))
        step_stats.append({
            "step": step,
            "n_forget": int(len(idx)),
            "n_remain": int(len(arr) - np.count_nonzero(gone)),
            "forget_file": forget_file,
            "remain_file": remain_file,
        })
    manifest = {
        "rate": timeline.config.rate,
        "steps": timeline.config.steps,
        "seed": timeline.config.seed,
        "quota_mode": timeline.config.quota_mode,
        "n_entities": graph.n_entities,
        "n_relations": graph.n_relations,
        "n_triples": len(arr),
        "step_stats": step_stats,
    }
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def load_timeline(directory, graph: KnowledgeGraph) -> UnlearnTimeline:
    """Rebuild a timeline from a manifest directory against a parsed graph."""
    manifest_path = os.path.join(directory, MANIFEST_NAME)
    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except FileNotFoundError as exc:
        raise DataError(f"no manifest at {manifest_path}") from exc
    if manifest["n_triples"] != len(graph.triples):
        raise DataError(
            f"manifest triple count {manifest['n_triples']} does not match "
            f"graph ({len(graph.triples)})")
    position = {t: i for i, t in enumerate(graph.triples)}
    forget_indices = []
    for stats in manifest["step_stats"]:
        path = os.path.join(directory, stats["forget_file"])
        indices = []
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.rstrip("\n")
                if not line:
                    continue
                fields = line.split("\t")
                if len(fields) != 3:
                    raise DataError(f"{path}:{lineno}: malformed triple line")
                try:
                    triple = Triple(graph.entity_ids[fields[0]],
                                    graph.relation_ids[fields[1]],
                                    graph.entity_ids[fields[2]])
                    indices.append(position[triple])
                except KeyError as exc:
                    raise DataError(
                        f"{path}:{lineno}: triple not present in graph") from exc
        if len(indices) != stats["n_forget"]:
            raise DataError(f"{path}: {len(indices)} triples, manifest says "
                            f"{stats['n_forget']}")
        forget_indices.append(np.asarray(indices, dtype=np.int64))
    config = BuildConfig(rate=manifest["rate"], steps=manifest["steps"],
                         seed=manifest["seed"], quota_mode=manifest["quota_mode"])
    return UnlearnTimeline(graph, config, forget_indices)


def build_from_file(data_path, config: BuildConfig) -> Tuple[KnowledgeGraph, UnlearnTimeline]:
    graph = load_graph(data_path)
    return graph, build_timeline(graph, config)
