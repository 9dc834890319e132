"""Per-node conditional distributions from multi-depth probability stacks.

For each internal node c the engine needs a distribution over the children of
c plus a synthetic ood entry.  Five models turn the depth-(depth(c)+1)
probability vector into that distribution:

* ``compprob``: children keep their raw probabilities; ood gets the
  complement mass of everything outside the children.
* ``entropy``: ood score is the entropy of the renormalized child
  distribution; the whole vector is renormalized.
* ``maxprob``: ood score is one minus the maximum child probability.
* ``entcompprob``: entropy + complement, renormalized (the headline model).
* ``complogits``: softmax over child logits plus one extra logit equal to
  the arithmetic sum of all outside-class logits.

All logarithms are natural; 0*log(0) is taken as 0.
"""

from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DegenerateDenominator,
    MissingDepth,
    MissingLogits,
    RowSumViolation,
)
from .hierarchy import DepthClassIndex, Hierarchy, NodeId

#: Denominator below this is treated as degenerate (uniform fallback).
DENOM_EPS = 1e-12


class ScoreModel(enum.Enum):
    COMPPROB = "compprob"
    ENTROPY = "entropy"
    MAXPROB = "maxprob"
    ENTCOMPPROB = "entcompprob"
    COMPLOGITS = "complogits"

    @staticmethod
    def parse(text: str) -> "ScoreModel":
        try:
            return ScoreModel(text.lower())
        except ValueError:
            valid = ", ".join(m.value for m in ScoreModel)
            raise ValueError(f"unknown score model {text!r} (expected one of: {valid})") from None


#: Models requiring logits in the stack.
LOGIT_MODELS = frozenset({ScoreModel.COMPLOGITS})

#: Models whose ood score feeds the renormalization equations.
RENORM_MODELS = frozenset({ScoreModel.ENTROPY, ScoreModel.MAXPROB, ScoreModel.ENTCOMPPROB})


@dataclass(frozen=True)
class ProbabilityStack:
    """One sample's per-depth probability vectors (and optional logits).

    ``probs[d-1]`` is the vector over the depth-d class list of the
    DepthClassIndex.  Logits, when present, must reproduce the probabilities
    under softmax.
    """

    probs: tuple[np.ndarray, ...]
    logits: Optional[tuple[np.ndarray, ...]] = None

    @property
    def max_depth(self) -> int:
        return len(self.probs)

    def probs_at(self, d: int) -> np.ndarray:
        if not 1 <= d <= len(self.probs):
            raise MissingDepth(f"no probability vector for depth {d}")
        return self.probs[d - 1]

    def logits_at(self, d: int) -> np.ndarray:
        if self.logits is None:
            raise MissingLogits("stack carries no logits")
        if not 1 <= d <= len(self.logits):
            raise MissingDepth(f"no logit vector for depth {d}")
        return self.logits[d - 1]

    def validate(self, index: DepthClassIndex, atol: float = 1e-6) -> None:
        """Check simplex and softmax-consistency invariants against an index."""
        if len(self.probs) != index.max_depth:
            raise MissingDepth(
                f"stack has {len(self.probs)} depths, hierarchy needs {index.max_depth}")
        for d in range(1, index.max_depth + 1):
            p = self.probs[d - 1]
            if p.shape != (index.n_classes(d),):
                raise MissingDepth(
                    f"depth {d}: expected {index.n_classes(d)} classes, got {p.shape}")
            if abs(float(p.sum()) - 1.0) > atol:
                raise RowSumViolation(
                    f"depth {d}: probabilities sum to {float(p.sum())}, expected 1")
            if float(p.min()) < -1e-12:
                raise ValueError(f"depth {d}: negative probability {p.min()}")
            if self.logits is not None:
                soft = _softmax(self.logits[d - 1])
                if not np.allclose(soft, p, atol=atol):
                    raise ValueError(f"depth {d}: softmax(logits) does not match probabilities")


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _entropy(p: np.ndarray) -> float:
    mask = p > 0.0
    return float(-(p[mask] * np.log(p[mask])).sum())


def _child_probs(h: Hierarchy, index: DepthClassIndex, c: NodeId,
                 stack: ProbabilityStack) -> tuple[np.ndarray, np.ndarray]:
    d = h.depth(c) + 1
    if d > index.max_depth:
        raise MissingDepth(f"node {c} needs a depth-{d} classifier, max depth is {index.max_depth}")
    vec = stack.probs_at(d)
    cols = np.array([index.col(d, ch) for ch in h.children(c)], dtype=np.intp)
    return vec, cols


def comp_prob_score(h: Hierarchy, index: DepthClassIndex, c: NodeId,
                    stack: ProbabilityStack) -> float:
    """Probability mass outside the children of c, clamped to [0, 1]."""
    vec, cols = _child_probs(h, index, c, stack)
    return float(min(1.0, max(0.0, 1.0 - vec[cols].sum())))


def entropy_score(h: Hierarchy, index: DepthClassIndex, c: NodeId,
                  stack: ProbabilityStack) -> float:
    """Entropy (nats) of the renormalized child distribution.

    Zero total child mass leaves the renormalized distribution undefined; the
    maximal-uncertainty value log(#children) is returned instead, since no
    child receiving mass is the strongest possible ood evidence.
    """
    vec, cols = _child_probs(h, index, c, stack)
    child = vec[cols]
    total = float(child.sum())
    if total < DENOM_EPS:
        return float(np.log(len(cols)))
    return _entropy(child / total)


def maxprob_score(h: Hierarchy, index: DepthClassIndex, c: NodeId,
                  stack: ProbabilityStack) -> float:
    """One minus the maximum child probability."""
    vec, cols = _child_probs(h, index, c, stack)
    return float(1.0 - vec[cols].max())


def entcompprob_score(h: Hierarchy, index: DepthClassIndex, c: NodeId,
                      stack: ProbabilityStack) -> float:
    """Entropy score plus complement-probability score."""
    return entropy_score(h, index, c, stack) + comp_prob_score(h, index, c, stack)


def root_ood_score(stack: ProbabilityStack) -> float:
    """Entropy (nats) of the deepest probability vector.

    Standard binary ood baseline used to attach an ood entry to the root
    conditional for out-of-hierarchy detection.
    """
    return _entropy(stack.probs_at(stack.max_depth))


def conditional_for(h: Hierarchy, index: DepthClassIndex, c: NodeId,
                    stack: ProbabilityStack, model: ScoreModel,
                    root_ood: bool = False) -> np.ndarray:
    """Distribution over children(c) + ood(c) as a vector (ood entry last).

    With ``root_ood`` set and c the root, the ood entry comes from the
    deepest-vector entropy pushed through the renormalization equations,
    overriding the model's own treatment of the root.
    """
    vec, cols = _child_probs(h, index, c, stack)
    child = vec[cols].astype(np.float64)

    if root_ood and c == h.root:
        s = root_ood_score(stack)
        return _renormalize(child, s, c)

    if model is ScoreModel.COMPPROB:
        ood = min(1.0, max(0.0, 1.0 - float(child.sum())))
        return np.concatenate([child, [ood]])

    if model is ScoreModel.COMPLOGITS:
        lvec = stack.logits_at(h.depth(c) + 1)
        outside = float(lvec.sum() - lvec[cols].sum())
        return _softmax(np.concatenate([lvec[cols], [outside]]))

    if model is ScoreModel.ENTROPY:
        s = entropy_score(h, index, c, stack)
    elif model is ScoreModel.MAXPROB:
        s = maxprob_score(h, index, c, stack)
    elif model is ScoreModel.ENTCOMPPROB:
        s = entcompprob_score(h, index, c, stack)
    else:  # pragma: no cover - enum is exhaustive
        raise ValueError(f"unhandled model {model}")
    return _renormalize(child, s, c)


def _renormalize(child: np.ndarray, s: float, c: NodeId) -> np.ndarray:
    denom = s + float(child.sum())
    if denom < DENOM_EPS:
        warnings.warn(
            f"degenerate conditional denominator at node {c}; using uniform",
            DegenerateDenominator)
        k = len(child) + 1
        return np.full(k, 1.0 / k)
    return np.concatenate([child, [s]]) / denom


@dataclass(frozen=True)
class ConditionalTable:
    """Conditional distributions for every internal node of one sample.

    ``entries[c]`` is the vector over children(c) + ood(c), ood last, in the
    ascending child-id order of the hierarchy.
    """

    entries: dict[NodeId, np.ndarray]

    def at(self, c: NodeId) -> np.ndarray:
        return self.entries[c]


def build_conditional_table(h: Hierarchy, index: DepthClassIndex,
                            stack: ProbabilityStack, model: ScoreModel,
                            root_ood: bool = False) -> ConditionalTable:
    """Conditional distributions at all internal nodes for one sample."""
    entries = {
        c: conditional_for(h, index, c, stack, model, root_ood=root_ood)
        for c in h.internal_nodes
    }
    return ConditionalTable(entries=entries)
