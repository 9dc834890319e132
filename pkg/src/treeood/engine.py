"""Batched inference pipeline over flattened tree arrays.

The per-sample functions in :mod:`treeood.conditionals` and
:mod:`treeood.inference` are the readable reference path; this module runs
the same math over whole sample batches through the kernel backends
(numba-JIT by default, pure numpy via ``TREEOOD_BACKEND=numpy``).  Tests pin
the two paths against each other.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import backends
from .backends import codes
from .conditionals import (
    ConditionalTable,
    LOGIT_MODELS,
    ProbabilityStack,
    ScoreModel,
)
from .errors import DegenerateDenominator, MissingDepth, MissingLogits, UnknownNode
from .hierarchy import (
    AugmentedHierarchy,
    DepthClassIndex,
    Hierarchy,
    NodeId,
    augment,
)
from .inference import DecisionRule, Prediction

_MODEL_CODE = {
    ScoreModel.COMPPROB: codes.COMPPROB,
    ScoreModel.ENTROPY: codes.ENTROPY,
    ScoreModel.MAXPROB: codes.MAXPROB,
    ScoreModel.ENTCOMPPROB: codes.ENTCOMPPROB,
    ScoreModel.COMPLOGITS: codes.COMPLOGITS,
}


@dataclass(frozen=True)
class StackBatch:
    """Per-depth probability (and optional logit) matrices for many samples.

    ``probs[d-1]`` has one row per sample over the depth-d class columns of
    the index, rows aligned with ``sample_ids``.
    """

    sample_ids: tuple[str, ...]
    probs: tuple[np.ndarray, ...]
    logits: Optional[tuple[np.ndarray, ...]] = None

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    def stack_for(self, row: int) -> ProbabilityStack:
        """Single-sample view (used by the reference path and tests)."""
        return ProbabilityStack(
            probs=tuple(p[row] for p in self.probs),
            logits=None if self.logits is None else tuple(l[row] for l in self.logits),
        )

    @staticmethod
    def from_stacks(sample_ids: Sequence[str],
                    stacks: Sequence[ProbabilityStack]) -> "StackBatch":
        depths = stacks[0].max_depth
        probs = tuple(np.stack([s.probs[d] for s in stacks]) for d in range(depths))
        logits = None
        if all(s.logits is not None for s in stacks):
            logits = tuple(np.stack([s.logits[d] for s in stacks]) for d in range(depths))
        return StackBatch(sample_ids=tuple(sample_ids), probs=probs, logits=logits)


class FlatTree:
    """Flattened arrays for one (hierarchy, class index) pair.

    Layout: per-depth probability matrices concatenate column-wise into one
    flat matrix; each internal node owns a contiguous slot range (children in
    ascending id order, ood slot last); each augmented-tree leaf stores the
    slot indices along its root path.
    """

    def __init__(self, h: Hierarchy, index: DepthClassIndex):
        self.hierarchy = h
        self.index = index
        self.augmented: AugmentedHierarchy = augment(h)
        D = index.max_depth

        self.depth_col_offset = np.zeros(D + 1, dtype=np.int64)
        for d in range(1, D + 1):
            self.depth_col_offset[d] = self.depth_col_offset[d - 1] + index.n_classes(d)
        self.total_cols = int(self.depth_col_offset[D])

        internal = h.internal_nodes
        self.internal_nodes = internal
        self.internal_pos = {c: i for i, c in enumerate(internal)}
        slot_offsets = [0]
        child_cols: list[int] = []
        node_depth_index = []
        root_internal = -1
        slot_of: dict[tuple[NodeId, NodeId], int] = {}
        for i, c in enumerate(internal):
            if c == h.root:
                root_internal = i
            d = h.depth(c) + 1
            if d > D:
                raise MissingDepth(f"internal node {c} needs a depth-{d} classifier")
            base = slot_offsets[-1]
            for j, ch in enumerate(h.children(c)):
                child_cols.append(int(self.depth_col_offset[d - 1]) + index.col(d, ch))
                slot_of[(c, ch)] = base + j
            child_cols.append(-1)  # ood slot carries no input column
            slot_of[(c, -1)] = base + len(h.children(c))
            node_depth_index.append(d - 1)
            slot_offsets.append(base + len(h.children(c)) + 1)
        self.slot_offsets = np.array(slot_offsets, dtype=np.int64)
        self.child_cols = np.array(child_cols, dtype=np.int64)
        self.node_depth_index = np.array(node_depth_index, dtype=np.int64)
        self.root_internal = root_internal

        g = self.augmented
        path_offsets = [0]
        path_slots: list[int] = []
        target_node_idx = []
        for leaf in g.leaves:
            path = g.path_from_root(leaf)
            for parent, child in zip(path[:-1], path[1:]):
                key = (parent, -1) if g.is_ood(child) else (parent, child)
                path_slots.append(slot_of[key])
            path_offsets.append(len(path_slots))
            target_node_idx.append(h.index_of(g.to_base(leaf)))
        self.path_slots = np.array(path_slots, dtype=np.int64)
        self.path_offsets = np.array(path_offsets, dtype=np.int64)
        self.gleaf_target_idx = np.array(target_node_idx, dtype=np.int64)

        self.node_depths = np.array([h.depth(v) for v in h.node_ids], dtype=np.int64)
        # dist from each augmented leaf's mapped target to every candidate node
        self.target_dist = h.distance_matrix()[self.gleaf_target_idx, :].astype(np.float64)

    def flat_probs(self, batch: StackBatch) -> np.ndarray:
        D = self.index.max_depth
        if len(batch.probs) != D:
            raise MissingDepth(f"batch has {len(batch.probs)} depths, need {D}")
        return np.concatenate([np.asarray(batch.probs[d], dtype=np.float64)
                               for d in range(D)], axis=1)

    def flat_logits(self, batch: StackBatch) -> np.ndarray:
        if batch.logits is None:
            raise MissingLogits("score model needs logits but the batch has none")
        return np.concatenate([np.asarray(batch.logits[d], dtype=np.float64)
                               for d in range(len(batch.logits))], axis=1)


def _deepest_entropy(batch: StackBatch) -> np.ndarray:
    deep = np.asarray(batch.probs[-1], dtype=np.float64)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(deep > 0.0, deep * np.log(np.where(deep > 0.0, deep, 1.0)), 0.0)
    return -terms.sum(axis=1)


def conditionals_batch(flat: FlatTree, batch: StackBatch, model: ScoreModel,
                       root_ood: bool = False) -> np.ndarray:
    """Slot-aligned conditional entries for every sample (backend kernel)."""
    flat_probs = flat.flat_probs(batch)
    ns = flat_probs.shape[0]
    if model in LOGIT_MODELS:
        flat_logits = flat.flat_logits(batch)
        totals = np.stack(
            [flat_logits[:, int(flat.depth_col_offset[d]):int(flat.depth_col_offset[d + 1])].sum(axis=1)
             for d in range(flat.index.max_depth)], axis=1)
    else:
        flat_logits = np.zeros((0, 0))
        totals = np.zeros((0, 0))
    root_scores = _deepest_entropy(batch) if root_ood else np.zeros(0)
    root_internal = flat.root_internal if root_ood else -1
    cond, n_degenerate = backends.compute_conditionals(
        flat_probs, flat_logits, flat.slot_offsets, flat.child_cols,
        totals, flat.node_depth_index, _MODEL_CODE[model], root_internal, root_scores)
    if n_degenerate:
        warnings.warn(
            f"{n_degenerate} degenerate conditional denominator(s); used uniform",
            DegenerateDenominator)
    return cond


def leaf_masses_batch(flat: FlatTree, cond: np.ndarray) -> np.ndarray:
    """Predictive distribution over augmented-tree leaves for every sample."""
    return backends.compute_leaf_masses(cond, flat.path_slots, flat.path_offsets)


def tables_from_cond(flat: FlatTree, cond: np.ndarray) -> list[ConditionalTable]:
    """Re-window the flat conditional matrix into per-sample tables."""
    spans = [(c, int(flat.slot_offsets[i]), int(flat.slot_offsets[i + 1]))
             for i, c in enumerate(flat.internal_nodes)]
    out = []
    for row in cond:
        out.append(ConditionalTable(entries={c: row[a:b] for c, a, b in spans}))
    return out


@dataclass(frozen=True)
class BatchResult:
    sample_ids: tuple[str, ...]
    predictions: tuple[Prediction, ...]
    leaf_masses: Optional[np.ndarray] = None
    conditionals: Optional[np.ndarray] = None

    def as_mapping(self) -> dict[str, NodeId]:
        return {sid: p.node for sid, p in zip(self.sample_ids, self.predictions)}


def infer_batch(flat: FlatTree, batch: StackBatch, model: ScoreModel,
                rule: DecisionRule, root_ood: bool = False,
                true_labels: Optional[Sequence[NodeId]] = None,
                keep_conditionals: bool = False) -> BatchResult:
    """Run the full pipeline for one decision rule over a batch.

    ``leaf`` and ``oracle`` rules read the stack matrices directly and skip
    the conditional/factorization stages; ``oracle`` needs ``true_labels``.
    """
    h = flat.hierarchy
    index = flat.index
    g = flat.augmented

    if rule is DecisionRule.LEAF_MODEL:
        deep = np.asarray(batch.probs[-1])
        idx = deep.argmax(axis=1)
        classes = index.classes(index.max_depth)
        preds = tuple(
            Prediction(node=classes[int(i)], rule=rule, prob_mass=float(deep[r, int(i)]))
            for r, i in enumerate(idx))
        return BatchResult(sample_ids=batch.sample_ids, predictions=preds)

    if rule is DecisionRule.DEPTH_ORACLE:
        if true_labels is None:
            raise ValueError("the depth-oracle rule needs true labels")
        preds = []
        for r, label in enumerate(true_labels):
            if label not in h:
                raise UnknownNode(f"label {label} is not in the hierarchy")
            d = index.max_depth if h.is_leaf(label) else h.depth(label)
            if d < 1:
                raise MissingDepth("no classifier exists for depth 0 (root-labeled sample)")
            vec = np.asarray(batch.probs[d - 1][r])
            i = int(vec.argmax())
            preds.append(Prediction(node=index.classes(d)[i], rule=rule,
                                    prob_mass=float(vec[i])))
        return BatchResult(sample_ids=batch.sample_ids, predictions=tuple(preds))

    cond = conditionals_batch(flat, batch, model, root_ood=root_ood)
    masses = leaf_masses_batch(flat, cond)

    if rule is DecisionRule.ARGMAX:
        idx = masses.argmax(axis=1)  # first max = smallest augmented-leaf id
        preds = tuple(
            Prediction(node=g.to_base(g.leaves[int(i)]), rule=rule,
                       prob_mass=float(masses[r, int(i)]))
            for r, i in enumerate(idx))
    elif rule is DecisionRule.MIN_EXPECTED_DIST:
        best_idx, best_exp = backends.minexp_decisions(
            masses, flat.target_dist, flat.node_depths)
        # mass of the chosen node: leaf probability, or subtree mass for
        # internal nodes (sum over augmented leaves mapping under it)
        node_mass = _node_masses(flat, masses)
        preds = tuple(
            Prediction(node=h.node_ids[int(i)], rule=rule,
                       expected_dist=float(e), prob_mass=float(node_mass[r, int(i)]))
            for r, (i, e) in enumerate(zip(best_idx, best_exp)))
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unhandled rule {rule}")

    return BatchResult(
        sample_ids=batch.sample_ids, predictions=preds,
        leaf_masses=masses if keep_conditionals else None,
        conditionals=cond if keep_conditionals else None)


def _node_masses(flat: FlatTree, masses: np.ndarray) -> np.ndarray:
    """Mass of every base node per sample: sum over augmented leaves whose
    path passes through the node (its own ood leaf included)."""
    h = flat.hierarchy
    g = flat.augmented
    agg = np.zeros((masses.shape[1], len(h.node_ids)))
    for gi, leaf in enumerate(g.leaves):
        host = g.to_base(leaf)
        for anc in h.ancestors(host):
            agg[gi, h.index_of(anc)] = 1.0
    return masses @ agg


def marginalized_batch(flat: FlatTree, batch: StackBatch, d: int) -> list[NodeId]:
    """Argmax over depth-d classes of descendant-summed deepest-vector mass."""
    h = flat.hierarchy
    index = flat.index
    if not 1 <= d <= index.max_depth:
        raise MissingDepth(f"depth {d} outside 1..{index.max_depth}")
    deep = np.asarray(batch.probs[-1], dtype=np.float64)
    classes = index.classes(d)
    agg = np.zeros((deep.shape[1], len(classes)))
    for j, c in enumerate(classes):
        for leaf in h.descendant_leaves(c):
            agg[index.col(index.max_depth, leaf), j] = 1.0
    margins = deep @ agg
    picks = margins.argmax(axis=1)
    return [classes[int(i)] for i in picks]
