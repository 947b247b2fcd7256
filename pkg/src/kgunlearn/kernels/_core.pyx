# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: candidate scoring, rank counting, gradient scatter."""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def all_entity_distances(double[:, ::1] entities, double[::1] query):
    """‖e_i + q‖₂ for every entity row e_i."""
    cdef Py_ssize_t n = entities.shape[0]
    cdef Py_ssize_t dim = entities.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j
    cdef double acc, v
    for i in range(n):
        acc = 0.0
        for j in range(dim):
            v = entities[i, j] + query[j]
            acc += v * v
        ov[i] = sqrt(acc)
    return out


def pair_distances(double[:, ::1] entities, double[:, ::1] relations,
                   long[::1] heads, long[::1] rels, long[::1] tails):
    """‖h + r − t‖₂ for a batch of triples given as index arrays."""
    cdef Py_ssize_t n = heads.shape[0]
    cdef Py_ssize_t dim = entities.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef Py_ssize_t i, j, h, r, t
    cdef double acc, v
    for i in range(n):
        h = heads[i]
        r = rels[i]
        t = tails[i]
        acc = 0.0
        for j in range(dim):
            v = entities[h, j] + relations[r, j] - entities[t, j]
            acc += v * v
        ov[i] = sqrt(acc)
    return out


def rank_counts(double[::1] distances, Py_ssize_t true_idx,
                cnp.uint8_t[::1] removed):
    """Count candidates strictly closer than, and tied with, the true entity.

    ``removed[i] != 0`` drops candidate i from both counts; the true entity
    itself never counts.  Smaller distance ranks better.
    """
    cdef Py_ssize_t n = distances.shape[0]
    cdef double ref = distances[true_idx]
    cdef Py_ssize_t better = 0, ties = 0
    cdef Py_ssize_t i
    for i in range(n):
        if i == true_idx or removed[i]:
            continue
        if distances[i] < ref:
            better += 1
        elif distances[i] == ref:
            ties += 1
    return better, ties


def scatter_add_rows(double[:, ::1] table, long[::1] idx, double[:, ::1] rows):
    """table[idx[k]] += rows[k], accumulating duplicates in order."""
    cdef Py_ssize_t n = idx.shape[0]
    cdef Py_ssize_t dim = table.shape[1]
    cdef Py_ssize_t k, j, r
    for k in range(n):
        r = idx[k]
        for j in range(dim):
            table[r, j] += rows[k, j]
