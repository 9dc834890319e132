"""Numba-JIT batch kernels (default path when numba imports).

Contracts match :mod:`treeood.backends.numpy_backend` exactly; loops are
written out per sample and compiled with ``cache=True`` so the JIT cost is
paid once per environment.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from . import codes

_EPS = 1e-12


@njit(cache=True)
def _conditionals_kernel(flat_probs, flat_logits,
                         slot_offsets, child_cols, depth_logit_totals,
                         node_depth_index, model_id, root_internal, root_scores):
    ns = flat_probs.shape[0]
    total_slots = slot_offsets[-1]
    cond = np.empty((ns, total_slots))
    n_degenerate = 0
    n_internal = slot_offsets.shape[0] - 1
    use_root = root_internal >= 0 and root_scores.shape[0] == ns

    for s in range(ns):
        for i in range(n_internal):
            a = slot_offsets[i]
            b = slot_offsets[i + 1]
            nch = b - 1 - a
            total = 0.0
            for k in range(a, b - 1):
                v = flat_probs[s, child_cols[k]]
                cond[s, k] = v
                total += v

            if use_root and i == root_internal:
                score = root_scores[s]
                n_degenerate += _renorm_row(cond, s, a, b, score, total)
                continue

            if model_id == codes.COMPPROB:
                ood = 1.0 - total
                if ood < 0.0:
                    ood = 0.0
                elif ood > 1.0:
                    ood = 1.0
                cond[s, b - 1] = ood
            elif model_id == codes.COMPLOGITS:
                child_logit_sum = 0.0
                mx = -1.0e308
                for k in range(a, b - 1):
                    lv = flat_logits[s, child_cols[k]]
                    cond[s, k] = lv
                    child_logit_sum += lv
                    if lv > mx:
                        mx = lv
                outside = depth_logit_totals[s, node_depth_index[i]] - child_logit_sum
                if outside > mx:
                    mx = outside
                z = 0.0
                for k in range(a, b - 1):
                    e = math.exp(cond[s, k] - mx)
                    cond[s, k] = e
                    z += e
                e = math.exp(outside - mx)
                cond[s, b - 1] = e
                z += e
                for k in range(a, b):
                    cond[s, k] /= z
            else:
                if model_id == codes.MAXPROB:
                    mxp = 0.0
                    for k in range(a, b - 1):
                        if cond[s, k] > mxp:
                            mxp = cond[s, k]
                    score = 1.0 - mxp
                else:  # ENTROPY or ENTCOMPPROB
                    if total < _EPS:
                        ent = math.log(nch)
                    else:
                        ent = 0.0
                        for k in range(a, b - 1):
                            t = cond[s, k] / total
                            if t > 0.0:
                                ent -= t * math.log(t)
                    score = ent
                    if model_id == codes.ENTCOMPPROB:
                        comp = 1.0 - total
                        if comp < 0.0:
                            comp = 0.0
                        elif comp > 1.0:
                            comp = 1.0
                        score = ent + comp
                n_degenerate += _renorm_row(cond, s, a, b, score, total)
    return cond, n_degenerate


@njit(cache=True, inline="always")
def _renorm_row(cond, s, a, b, score, total):
    denom = score + total
    if denom < _EPS:
        u = 1.0 / (b - a)
        for k in range(a, b):
            cond[s, k] = u
        return 1
    for k in range(a, b - 1):
        cond[s, k] /= denom
    cond[s, b - 1] = score / denom
    return 0


@njit(cache=True)
def _leaf_masses_kernel(cond, path_slots, path_offsets):
    ns = cond.shape[0]
    n_leaves = path_offsets.shape[0] - 1
    masses = np.empty((ns, n_leaves))
    for s in range(ns):
        for g in range(n_leaves):
            m = 1.0
            for k in range(path_offsets[g], path_offsets[g + 1]):
                m *= cond[s, path_slots[k]]
            masses[s, g] = m
    return masses


@njit(cache=True)
def _minexp_kernel(masses, target_dist, node_depths):
    ns = masses.shape[0]
    n_leaves = masses.shape[1]
    n_nodes = target_dist.shape[1]
    best_idx = np.empty(ns, dtype=np.int64)
    best_exp = np.empty(ns)
    for s in range(ns):
        expected = np.zeros(n_nodes)
        for g in range(n_leaves):
            m = masses[s, g]
            if m != 0.0:
                for c in range(n_nodes):
                    expected[c] += m * target_dist[g, c]
        bi = 0
        be = expected[0]
        bd = node_depths[0]
        for c in range(1, n_nodes):
            e = expected[c]
            if e < be or (e == be and node_depths[c] > bd):
                bi = c
                be = e
                bd = node_depths[c]
        best_idx[s] = bi
        best_exp[s] = be
    return best_idx, best_exp


def compute_conditionals(flat_probs, flat_logits,
                         slot_offsets, child_cols, depth_logit_totals,
                         node_depth_index, model_id, root_internal, root_scores):
    return _conditionals_kernel(flat_probs, flat_logits,
                                slot_offsets, child_cols, depth_logit_totals,
                                node_depth_index, model_id, root_internal, root_scores)


def compute_leaf_masses(cond, path_slots, path_offsets):
    return _leaf_masses_kernel(cond, path_slots, path_offsets)


def minexp_decisions(masses, target_dist, node_depths):
    return _minexp_kernel(masses, target_dist, node_depths)
