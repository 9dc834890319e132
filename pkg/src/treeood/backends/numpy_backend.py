"""Pure-numpy batch kernels (fallback path, no JIT).

Same contracts as :mod:`treeood.backends.numba_backend`; vectorized over
samples with a python loop over tree nodes, which keeps it reasonable for
batches where sample count >> node count.
"""

from __future__ import annotations

import numpy as np

from . import codes

_EPS = 1e-12


def compute_conditionals(flat_probs, flat_logits,
                         slot_offsets, child_cols, depth_logit_totals,
                         node_depth_index, model_id, root_internal, root_scores):
    """Conditional entries for every internal node of every sample.

    Returns ``(cond, n_degenerate)`` where ``cond`` has one column per slot
    (children of each internal node followed by its ood slot) and
    ``n_degenerate`` counts (sample, node) pairs whose renormalization
    denominator underflowed and fell back to uniform.
    """
    ns = flat_probs.shape[0]
    total_slots = int(slot_offsets[-1])
    cond = np.empty((ns, total_slots))
    n_degenerate = 0
    n_internal = len(slot_offsets) - 1
    use_root = root_internal >= 0 and root_scores.shape[0] == ns

    for i in range(n_internal):
        a, b = int(slot_offsets[i]), int(slot_offsets[i + 1])
        cols = child_cols[a:b - 1]
        child = flat_probs[:, cols]
        nch = b - 1 - a
        total = child.sum(axis=1)

        if use_root and i == root_internal:
            s = root_scores
            n_degenerate += _renorm_into(cond, a, b, child, s, total)
            continue

        if model_id == codes.COMPPROB:
            cond[:, a:b - 1] = child
            cond[:, b - 1] = np.clip(1.0 - total, 0.0, 1.0)
        elif model_id == codes.COMPLOGITS:
            lchild = flat_logits[:, cols]
            outside = depth_logit_totals[:, node_depth_index[i]] - lchild.sum(axis=1)
            stacked = np.concatenate([lchild, outside[:, None]], axis=1)
            stacked -= stacked.max(axis=1, keepdims=True)
            np.exp(stacked, out=stacked)
            stacked /= stacked.sum(axis=1, keepdims=True)
            cond[:, a:b] = stacked
        else:
            if model_id in (codes.ENTROPY, codes.ENTCOMPPROB):
                safe_total = np.where(total < _EPS, 1.0, total)
                tilde = child / safe_total[:, None]
                ent = np.where(
                    total < _EPS,
                    np.log(nch),
                    -np.sum(np.where(tilde > 0.0, tilde * np.log(np.where(tilde > 0.0, tilde, 1.0)), 0.0), axis=1),
                )
                if model_id == codes.ENTCOMPPROB:
                    s = ent + np.clip(1.0 - total, 0.0, 1.0)
                else:
                    s = ent
            else:  # MAXPROB
                s = 1.0 - child.max(axis=1)
            n_degenerate += _renorm_into(cond, a, b, child, s, total)
    return cond, n_degenerate


def _renorm_into(cond, a, b, child, s, total):
    denom = s + total
    bad = denom < _EPS
    safe = np.where(bad, 1.0, denom)
    cond[:, a:b - 1] = child / safe[:, None]
    cond[:, b - 1] = s / safe
    if bad.any():
        cond[bad, a:b] = 1.0 / (b - a)
    return int(bad.sum())


def compute_leaf_masses(cond, path_slots, path_offsets):
    """Chain-rule products: one column per augmented-tree leaf."""
    ns = cond.shape[0]
    n_leaves = len(path_offsets) - 1
    masses = np.empty((ns, n_leaves))
    for g in range(n_leaves):
        slots = path_slots[int(path_offsets[g]):int(path_offsets[g + 1])]
        masses[:, g] = cond[:, slots].prod(axis=1)
    return masses


def minexp_decisions(masses, target_dist, node_depths):
    """Expected-distance-minimizing node per sample.

    ``target_dist[g, c]`` is the edge distance between the mapped target of
    augmented leaf g and candidate node c.  Ties break toward greater depth,
    then smaller candidate position (positions are ascending node ids).
    """
    expected = masses @ target_dist
    best = expected.min(axis=1, keepdims=True)
    n_nodes = expected.shape[1]
    # among exact ties, maximize depth * (n+1) - position
    tie_key = node_depths * (n_nodes + 1) - np.arange(n_nodes)
    masked = np.where(expected == best, tie_key[None, :], -1)
    best_idx = masked.argmax(axis=1)
    rows = np.arange(expected.shape[0])
    return best_idx.astype(np.int64), expected[rows, best_idx]
