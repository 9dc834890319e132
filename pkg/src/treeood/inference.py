"""Predictive distributions over the augmented tree and decision rules.

The chain-rule factorization turns per-node conditionals into a distribution
over the leaves of the augmented tree (known classes + ood nodes).  Final
predictions come from one of four rules:

* ``minexp``: node of the base hierarchy minimizing the expected edge
  distance under the predictive distribution (the headline rule).
* ``argmax``: most probable augmented-tree leaf, ood(c) mapped back to c.
* ``leaf``: argmax of the deepest probability vector (every sample gets a
  leaf; a deliberate baseline).
* ``oracle``: argmax of the probability vector at the ground-truth depth
  (upper bound; requires the true label).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .conditionals import ConditionalTable, ProbabilityStack
from .errors import MissingConditional, MissingDepth, UnknownNode
from .hierarchy import AugmentedHierarchy, DepthClassIndex, Hierarchy, NodeId


class DecisionRule(enum.Enum):
    MIN_EXPECTED_DIST = "minexp"
    ARGMAX = "argmax"
    LEAF_MODEL = "leaf"
    DEPTH_ORACLE = "oracle"

    @staticmethod
    def parse(text: str) -> "DecisionRule":
        try:
            return DecisionRule(text.lower())
        except ValueError:
            valid = ", ".join(r.value for r in DecisionRule)
            raise ValueError(f"unknown rule {text!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class PredictiveDistribution:
    """Probability per augmented-tree leaf, in ``tree.leaves`` order."""

    tree: AugmentedHierarchy
    leaf_probs: np.ndarray

    def prob_of(self, leaf: NodeId) -> float:
        return float(self.leaf_probs[self.tree.leaves.index(leaf)])

    def internal_mass(self, c: NodeId) -> float:
        """Mass of internal node c = sum over its descendant augmented leaves
        (equal to the path product of conditionals up to c)."""
        base = self.tree.base
        total = 0.0
        for leaf, p in zip(self.tree.leaves, self.leaf_probs):
            host = self.tree.to_base(leaf)
            if c in base.ancestors(host):
                total += float(p)
        return total

    def node_mass(self, node: NodeId) -> float:
        """Mass of any base node: leaf probability for leaves (plus the node's
        own ood child mass never applies to leaves), subtree mass otherwise."""
        base = self.tree.base
        if base.is_leaf(node):
            return self.prob_of(node)
        return self.internal_mass(node)


def predictive_distribution(g: AugmentedHierarchy,
                            table: ConditionalTable) -> PredictiveDistribution:
    """Chain-rule product of conditionals along every root-to-leaf path.

    The root factor is excluded (its probability is 1); each remaining edge
    parent -> child contributes the child's entry in the parent's conditional.
    """
    base = g.base
    child_pos = {
        c: {ch: i for i, ch in enumerate(base.children(c))}
        for c in base.internal_nodes
    }
    for c in base.internal_nodes:
        if c not in table.entries:
            raise MissingConditional(f"no conditional for internal node {c}")

    probs = np.empty(len(g.leaves))
    for i, leaf in enumerate(g.leaves):
        path = g.path_from_root(leaf)
        mass = 1.0
        for parent, child in zip(path[:-1], path[1:]):
            entry = table.at(parent)  # ood entry sits last by construction
            mass *= float(entry[-1] if g.is_ood(child) else entry[child_pos[parent][child]])
        probs[i] = mass
    return PredictiveDistribution(tree=g, leaf_probs=probs)


@dataclass(frozen=True)
class Prediction:
    node: NodeId
    rule: DecisionRule
    expected_dist: Optional[float] = None
    prob_mass: Optional[float] = None


def _tie_key(h: Hierarchy, node: NodeId) -> tuple[int, int]:
    # prefer deeper candidates, then smaller ids
    return (-h.depth(node), node)


def predict_min_expected_dist(h: Hierarchy, p: PredictiveDistribution) -> Prediction:
    """Node of h minimizing the expected edge distance to the predicted leaf.

    Candidates are all nodes of h: leaves stand for themselves, internal
    nodes stand for their ood children.  Targets are the augmented-tree
    leaves with ood(c) mapped to c inside the distance.  Ties break toward
    deeper candidates, then smaller node ids.

    Per-candidate expectations use compensated summation, so the result is
    the correctly-rounded float and any exhaustive enumeration computing the
    same products reproduces the node and tie behavior exactly.
    """
    dist = h.distance_matrix()
    target_idx = np.array([h.index_of(p.tree.to_base(leaf)) for leaf in p.tree.leaves],
                          dtype=np.intp)
    probs = [float(q) for q in p.leaf_probs]

    best = None
    for i, node in enumerate(h.node_ids):
        row = dist[i, target_idx]
        e = math.fsum(float(d) * q for d, q in zip(row, probs))
        key = (e, *_tie_key(h, node))
        if best is None or key < best[0]:
            best = (key, node, e)
    _, node, e = best
    return Prediction(node=node, rule=DecisionRule.MIN_EXPECTED_DIST,
                      expected_dist=e, prob_mass=p.node_mass(node))


def predict_argmax(g: AugmentedHierarchy, p: PredictiveDistribution) -> Prediction:
    """Most probable augmented-tree leaf, ood(c) reported as c.

    Ties break toward the smaller augmented-leaf id; ood ids sit above all
    base ids, so known classes win ties against ood entries.
    """
    i = int(np.argmax(p.leaf_probs))  # first occurrence = smallest leaf id
    leaf = p.tree.leaves[i]
    return Prediction(node=p.tree.to_base(leaf), rule=DecisionRule.ARGMAX,
                      prob_mass=float(p.leaf_probs[i]))


def predict_leaf_model(h: Hierarchy, index: DepthClassIndex,
                       stack: ProbabilityStack) -> Prediction:
    """Argmax of the deepest probability vector; always a leaf of h."""
    vec = stack.probs_at(index.max_depth)
    i = int(np.argmax(vec))
    return Prediction(node=index.classes(index.max_depth)[i],
                      rule=DecisionRule.LEAF_MODEL, prob_mass=float(vec[i]))


def predict_depth_oracle(h: Hierarchy, index: DepthClassIndex,
                         stack: ProbabilityStack, true_label: NodeId) -> Prediction:
    """Argmax of the probability vector at the true label's depth.

    Leaf labels use the deepest vector; internal labels use their own depth.
    A root label has no depth-0 classifier and is rejected.
    """
    if true_label not in h:
        raise UnknownNode(f"label {true_label} is not in the hierarchy")
    d = index.max_depth if h.is_leaf(true_label) else h.depth(true_label)
    if d < 1:
        raise MissingDepth("no classifier exists for depth 0 (root-labeled sample)")
    vec = stack.probs_at(d)
    i = int(np.argmax(vec))
    return Prediction(node=index.classes(d)[i], rule=DecisionRule.DEPTH_ORACLE,
                      prob_mass=float(vec[i]))


def marginalized_prediction(h: Hierarchy, index: DepthClassIndex,
                            stack: ProbabilityStack, d: int) -> NodeId:
    """Argmax over depth-d classes of summed descendant-leaf mass from the
    deepest vector (the marginalized baseline for ood depth accuracy)."""
    if not 1 <= d <= index.max_depth:
        raise MissingDepth(f"depth {d} outside 1..{index.max_depth}")
    deep = stack.probs_at(index.max_depth)
    classes = index.classes(d)
    margins = np.zeros(len(classes))
    for j, c in enumerate(classes):
        for leaf in h.descendant_leaves(c):
            margins[j] += deep[index.col(index.max_depth, leaf)]
    return classes[int(np.argmax(margins))]
