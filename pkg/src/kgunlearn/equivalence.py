"""Exact enumeration checks of the unlearning/preference objective link.

With uniform preferred sampling, the expected preference gap over a masked
forgetting set is an exact affine function of the mean forgetting score:
E_pref = scale * E_unlearn - offset, with scale = |E|/(|E|-1) and offset the
mean full-candidate score mass divided by |E|-1.  With out-of-boundary
sampling the same affine shape holds per sample with the exact candidate
counts; replacing them by |E|-1 leaves a gap that vanishes as the entity set
grows with boundary sizes fixed.  Everything here is computed by brute-force
candidate enumeration on small instances.
"""

from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from .errors import DataError
from .kg import KnowledgeGraph, Triple, TripleSet, boundary_entities
from .model import EmbeddingModel, batch_distances, candidate_distances, \
    init_model, scores_from_distances
from .preference import HEAD_MASKED, TAIL_MASKED, mask_direction


@dataclass(frozen=True)
class MaskedQuery:
    """A fixed masking of a forgetting triple: query plus dis-preferred entity."""

    side: int
    relation: int
    kept: int
    dispreferred: int

    def source_triple(self) -> Triple:
        if self.side == HEAD_MASKED:
            return Triple(self.dispreferred, self.relation, self.kept)
        return Triple(self.kept, self.relation, self.dispreferred)


@dataclass
class EquivalenceCheck:
    e_unlearn: float
    e_pref: float
    scale: float
    offset: float
    residual: float
    bounds_ok: bool


@dataclass
class OutBoundaryCheck:
    e_unlearn: float
    e_pref_exact: float
    exact_residual: float
    scale: float
    offset_approx: float
    approx_gap: float
    bounds_ok: bool


def mask_queries(forget: TripleSet, seed: int) -> List[MaskedQuery]:
    """Fix one Bernoulli masking per forgetting triple."""
    rng = np.random.default_rng(seed)
    queries = []
    for t in forget:
        side, _, dispreferred = mask_direction(t, rng)
        kept = t.tail if side == HEAD_MASKED else t.head
        queries.append(MaskedQuery(side=side, relation=t.relation, kept=kept,
                                   dispreferred=dispreferred))
    return queries


def candidate_scores(model: EmbeddingModel, query: MaskedQuery) -> np.ndarray:
    """Score of every entity substituted into the masked slot."""
    direction = "head" if query.side == HEAD_MASKED else "tail"
    probe = query.source_triple()
    return scores_from_distances(candidate_distances(model, probe, direction))


def unlearn_expectation(model: EmbeddingModel, forget: TripleSet) -> float:
    """Mean score over the forgetting triples."""
    if len(forget) == 0:
        raise DataError("forgetting set is empty")
    arr = forget.to_array()
    dists = batch_distances(model, arr[:, 0], arr[:, 1], arr[:, 2])
    return float(np.mean(scores_from_distances(dists)))


def _source_expectation(model: EmbeddingModel, queries: Sequence[MaskedQuery]) -> float:
    arr = np.asarray([tuple(q.source_triple()) for q in queries], dtype=np.int64)
    dists = batch_distances(model, arr[:, 0], arr[:, 1], arr[:, 2])
    return float(np.mean(scores_from_distances(dists)))


def _excluded(graph: KnowledgeGraph, dispreferred: int) -> np.ndarray:
    out = boundary_entities(graph, dispreferred) | {dispreferred}
    return np.asarray(sorted(out), dtype=np.int64)


def preference_expectation_exact(model: EmbeddingModel, graph: KnowledgeGraph,
                                 queries: Sequence[MaskedQuery],
                                 mode: str) -> float:
    """E[f(x, y_l) - f(x, y_w)] with the sampling replaced by enumeration."""
    if not queries:
        raise DataError("no masked queries")
    n = model.n_entities
    total = 0.0
    for q in queries:
        row = candidate_scores(model, q)
        f_l = row[q.dispreferred]
        if mode == "uniform":
            n_cand = n - 1
            mass = row.sum() - f_l
        else:
            excluded = _excluded(graph, q.dispreferred)
            n_cand = n - len(excluded)
            mass = row.sum() - row[excluded].sum()
        if n_cand <= 0:
            raise DataError(
                f"no legal preferred candidates for entity {q.dispreferred}")
        total += f_l - mass / n_cand
    return total / len(queries)


def check_uniform_equivalence(model: EmbeddingModel, graph: KnowledgeGraph,
                              queries: Sequence[MaskedQuery]) -> EquivalenceCheck:
    """Exact affine identity under uniform preferred sampling."""
    n = model.n_entities
    e_u = _source_expectation(model, queries)
    e_p = preference_expectation_exact(model, graph, queries, "uniform")
    mass = np.mean([candidate_scores(model, q).sum() for q in queries])
    scale = n / (n - 1)
    offset = mass / (n - 1)
    residual = abs(e_p - (scale * e_u - offset))
    bounds_ok = 0.0 < offset < scale
    return EquivalenceCheck(e_unlearn=e_u, e_pref=e_p, scale=scale,
                            offset=float(offset), residual=float(residual),
                            bounds_ok=bool(bounds_ok))


def check_out_boundary_equivalence(model: EmbeddingModel, graph: KnowledgeGraph,
                                   queries: Sequence[MaskedQuery]) -> OutBoundaryCheck:
    """Out-of-boundary sampling: exact per-sample identity plus the
    |E|-1-denominator approximation gap."""
    n = model.n_entities
    e_u = _source_expectation(model, queries)
    e_p_exact = preference_expectation_exact(model, graph, queries, "out_boundary")

    # Per-sample exact affine form: with n_i legal candidates,
    # term_i = ((n_i + 1)/n_i) * f(x, y_l) - (mass_i - boundary_mass_i)/n_i,
    # where boundary_mass_i excludes y_l itself.
    affine_total = 0.0
    mass_sum = 0.0
    for q in queries:
        row = candidate_scores(model, q)
        f_l = row[q.dispreferred]
        excluded = _excluded(graph, q.dispreferred)
        n_cand = n - len(excluded)
        if n_cand <= 0:
            raise DataError(
                f"no legal preferred candidates for entity {q.dispreferred}")
        boundary_mass = row[excluded].sum() - f_l
        mass = row.sum()
        affine_total += ((n_cand + 1) / n_cand) * f_l - (mass - boundary_mass) / n_cand
        mass_sum += mass
    affine = affine_total / len(queries)
    exact_residual = abs(e_p_exact - affine)

    scale = n / (n - 1)
    offset_approx = (mass_sum / len(queries)) / (n - 1)
    approx_gap = abs(e_p_exact - (scale * e_u - offset_approx))
    bounds_ok = 0.0 < offset_approx < scale
    return OutBoundaryCheck(e_unlearn=e_u, e_pref_exact=e_p_exact,
                            exact_residual=float(exact_residual), scale=scale,
                            offset_approx=float(offset_approx),
                            approx_gap=float(approx_gap), bounds_ok=bool(bounds_ok))


def random_instance(n_entities: int, n_relations: int, n_triples: int,
                    n_forget: int, dim: int, seed: int,
                    ) -> Tuple[KnowledgeGraph, EmbeddingModel, List[MaskedQuery]]:
    """Seeded toy graph, random model, and fixed maskings for the checks."""
    rng = np.random.default_rng(seed)
    seen = set()
    triples = []
    while len(triples) < n_triples:
        h = int(rng.integers(0, n_entities))
        t = int(rng.integers(0, n_entities))
        if h == t:
            continue
        r = int(rng.integers(0, n_relations))
        key = (h, r, t)
        if key in seen:
            continue
        seen.add(key)
        triples.append(Triple(h, r, t))
    graph = KnowledgeGraph(
        [f"e{i}" for i in range(n_entities)],
        [f"r{i}" for i in range(n_relations)], triples)
    model = init_model(graph, dim, seed)
    pick = rng.choice(n_triples, size=min(n_forget, n_triples), replace=False)
    pick.sort()
    forget = TripleSet(triples[i] for i in pick)
    queries = mask_queries(forget, seed + 1)
    return graph, model, queries


def fixed_boundary_instance(n_entities: int, boundary_size: int, n_forget: int,
                            dim: int, seed: int,
                            ) -> Tuple[KnowledgeGraph, EmbeddingModel, List[MaskedQuery]]:
    """Instance where every dis-preferred entity has the same boundary size.

    Forget triple i is (base, 0, base+1) with base = i * (boundary_size + 1);
    the tail is always masked, and filler edges give it exactly
    ``boundary_size`` boundary entities (itself included).
    """
    if boundary_size < 2:
        raise DataError("boundary_size must be >= 2 (both triple endpoints count)")
    block = boundary_size + 1
    if n_forget * block > n_entities:
        raise DataError("not enough entities for the requested blocks")
    triples = []
    queries = []
    for i in range(n_forget):
        base = i * block
        y_l = base + 1
        triples.append(Triple(base, 0, y_l))
        for j in range(boundary_size - 2):
            triples.append(Triple(y_l, 0, base + 2 + j))
        queries.append(MaskedQuery(side=TAIL_MASKED, relation=0, kept=base,
                                   dispreferred=y_l))
    graph = KnowledgeGraph(
        [f"e{i}" for i in range(n_entities)], ["r0"], triples)
    model = init_model(graph, dim, seed)
    return graph, model, queries


def approximation_gap_sweep(entity_counts: Sequence[int], boundary_size: int,
                            n_forget: int, dim: int, seed: int) -> List[dict]:
    """Approximation gap of the |E|-1 denominator at growing entity counts."""
    out = []
    for n in entity_counts:
        graph, model, queries = fixed_boundary_instance(
            n, boundary_size, n_forget, dim, seed)
        check = check_out_boundary_equivalence(model, graph, queries)
        out.append({"n_entities": n, "boundary_size": boundary_size,
                    "approx_gap": check.approx_gap,
                    "exact_residual": check.exact_residual})
    return out
