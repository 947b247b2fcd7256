"""Pure-numpy implementations of the hot kernels (used when the compiled
extension is unavailable)."""

import numpy as np


def all_entity_distances(entities, query):
    """‖e_i + q‖₂ for every entity row e_i."""
    diff = entities + query
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def pair_distances(entities, relations, heads, rels, tails):
    """‖h + r − t‖₂ for a batch of triples given as index arrays."""
    diff = entities[heads] + relations[rels] - entities[tails]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def rank_counts(distances, true_idx, removed):
    """Count candidates strictly closer than, and tied with, the true entity."""
    keep = removed == 0
    keep[true_idx] = False
    ref = distances[true_idx]
    better = int(np.count_nonzero(keep & (distances < ref)))
    ties = int(np.count_nonzero(keep & (distances == ref)))
    return better, ties


def scatter_add_rows(table, idx, rows):
    """table[idx[k]] += rows[k], accumulating duplicates in order."""
    np.add.at(table, idx, rows)
