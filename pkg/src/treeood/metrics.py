"""Evaluation: balanced hierarchical distances, balanced accuracies,
node-local conditional quality, and LCA error decomposition.

Balanced metrics weight every class equally regardless of sample count, which
matters because held-out classes land at wildly different tree depths with
wildly different sample counts.
"""

from __future__ import annotations

import enum
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

import numpy as np

from .conditionals import ConditionalTable
from .errors import EmptyClassSet, NoOodSamplesAtNode
from .hierarchy import Hierarchy, LabeledDataset, NodeId


def bmhd(h: Hierarchy, predictions: Mapping[str, NodeId],
         labels: Sequence[tuple[str, NodeId]],
         class_set: Optional[set[NodeId]] = None) -> float:
    """Balanced mean hierarchical distance (edges).

    Per-class mean distances between prediction and ground truth, averaged
    uniformly over classes.  Classes without samples are excluded; an empty
    effective class set is an error.
    """
    per_class: dict[NodeId, list[int]] = defaultdict(list)
    for sample_id, label in labels:
        if class_set is not None and label not in class_set:
            continue
        per_class[label].append(h.dist(predictions[sample_id], label))
    if not per_class:
        raise EmptyClassSet("no class in the class set has samples")
    class_means = [math.fsum(ds) / len(ds) for _, ds in sorted(per_class.items())]
    return math.fsum(class_means) / len(class_means)


def balanced_accuracy(predictions: Mapping[str, NodeId],
                      labels: Sequence[tuple[str, NodeId]],
                      class_set: Optional[set[NodeId]] = None) -> float:
    """Mean per-class exact-node-match rate, in percent."""
    per_class: dict[NodeId, list[bool]] = defaultdict(list)
    for sample_id, label in labels:
        if class_set is not None and label not in class_set:
            continue
        per_class[label].append(predictions[sample_id] == label)
    if not per_class:
        raise EmptyClassSet("no class in the class set has samples")
    rates = [sum(hits) / len(hits) for _, hits in sorted(per_class.items())]
    return 100.0 * math.fsum(rates) / len(rates)


class LcaKind(enum.Enum):
    EXACT = "exact"
    PURE_OVER = "pure_over"
    PURE_UNDER = "pure_under"
    MIXED = "mixed"


@dataclass(frozen=True)
class LcaDecomposition:
    overpred_dist: int
    underpred_dist: int
    kind: LcaKind


def lca_decompose(h: Hierarchy, prediction: NodeId, label: NodeId) -> LcaDecomposition:
    """Split the prediction error into over- and underprediction distances.

    over = dist(lca, prediction), under = dist(lca, label); the two always
    sum to dist(prediction, label).  Pure overprediction = prediction is a
    strict descendant of the label; pure underprediction = strict ancestor.
    """
    lca = h.lca(prediction, label)
    over = h.dist(lca, prediction)
    under = h.dist(lca, label)
    if over == 0 and under == 0:
        kind = LcaKind.EXACT
    elif under == 0:
        kind = LcaKind.PURE_OVER
    elif over == 0:
        kind = LcaKind.PURE_UNDER
    else:
        kind = LcaKind.MIXED
    return LcaDecomposition(overpred_dist=over, underpred_dist=under, kind=kind)


@dataclass(frozen=True)
class NodeLocalMetrics:
    """Binary ood detection quality of one node's conditional (ood positive)."""

    f1: float
    fpr: float
    tpr: float
    purity: float
    dirty_f1: float

    def as_dict(self) -> dict[str, float]:
        return {"f1": self.f1, "fpr": self.fpr, "tpr": self.tpr,
                "purity": self.purity, "dirty_f1": self.dirty_f1}


def _f1(tp: int, fp: int, fn: int) -> float:
    # no positives anywhere -> perfect by convention; predicted-none-but-some
    # or predicted-some-but-none -> 0
    if tp == 0:
        return 1.0 if fp == 0 and fn == 0 else 0.0
    return 2.0 * tp / (2.0 * tp + fp + fn)


def node_local_metrics(h: Hierarchy, c: NodeId,
                       conditionals: Sequence[np.ndarray],
                       labels: Sequence[NodeId]) -> NodeLocalMetrics:
    """Evaluate the conditional at internal node c as a binary ood detector.

    The evaluation set pairs ood samples whose ground truth is exactly c
    (positives) with id samples descending from c (negatives).  A sample is
    predicted ood iff the ood entry is >= every child entry (ood wins exact
    ties).  Purity counts, among all predicted-id samples, those whose argmax
    child is the correct child; dirty F1 relabels id samples with a wrong
    argmax child as ood ground truth before recomputing F1.
    """
    children = h.children(c)
    if not children:
        raise ValueError(f"node {c} is a leaf")
    if not any(label == c for label in labels):
        raise NoOodSamplesAtNode(f"no ood samples with ground truth {c}")

    tp = fp = tn = fn = 0
    dirty_tp = dirty_fp = dirty_fn = 0
    predicted_id = 0
    predicted_id_correct = 0
    for vec, label in zip(conditionals, labels):
        child_probs = np.asarray(vec[:-1])
        pred_ood = float(vec[-1]) >= float(child_probs.max())
        arg_child = children[int(np.argmax(child_probs))]
        is_ood = label == c
        if is_ood:
            tp += pred_ood
            fn += not pred_ood
            dirty_tp += pred_ood
            dirty_fn += not pred_ood
        else:
            correct_child = _child_toward(h, c, label)
            child_wrong = arg_child != correct_child
            fp += pred_ood
            tn += not pred_ood
            if child_wrong:  # relabeled as ood for the dirty score
                dirty_tp += pred_ood
                dirty_fn += not pred_ood
            else:
                dirty_fp += pred_ood
            if not pred_ood:
                predicted_id += 1
                predicted_id_correct += not child_wrong
    fpr = fp / (fp + tn) if (fp + tn) else 0.0
    tpr = tp / (tp + fn)
    purity = predicted_id_correct / predicted_id if predicted_id else 1.0
    return NodeLocalMetrics(
        f1=_f1(tp, fp, fn), fpr=fpr, tpr=tpr, purity=purity,
        dirty_f1=_f1(dirty_tp, dirty_fp, dirty_fn))


def _child_toward(h: Hierarchy, c: NodeId, descendant: NodeId) -> NodeId:
    """The child of c on the path toward one of c's proper descendants."""
    path = h.ancestors(descendant)
    i = path.index(c)
    return path[i - 1]


@dataclass
class EvalReport:
    """Every evaluation quantity for one predictor run."""

    bacc_id: Optional[float]
    bacc_ood: Optional[float]
    mix_bacc: Optional[float]
    bmhd_id: Optional[float]
    bmhd_ood: Optional[float]
    mix_bmhd: Optional[float]
    per_class_mean_dist: dict[NodeId, float]
    lca_histogram: dict[tuple[int, int], int]
    lca_histogram_id: dict[tuple[int, int], int]
    lca_histogram_ood: dict[tuple[int, int], int]
    lca_kind_counts: dict[str, int]
    n_id_test: int
    n_ood_test: int
    node_local_mean: Optional[dict[str, float]] = None
    node_local_per_node: Optional[dict[NodeId, dict[str, float]]] = None

    def to_dict(self) -> dict:
        def hist(hm: dict[tuple[int, int], int]) -> list[list[int]]:
            return [[o, u, n] for (o, u), n in sorted(hm.items())]

        return {
            "bacc_id": self.bacc_id,
            "bacc_ood": self.bacc_ood,
            "mix_bacc": self.mix_bacc,
            "bmhd_id": self.bmhd_id,
            "bmhd_ood": self.bmhd_ood,
            "mix_bmhd": self.mix_bmhd,
            "per_class_mean_dist": {str(k): v for k, v in sorted(self.per_class_mean_dist.items())},
            "lca_histogram": hist(self.lca_histogram),
            "lca_histogram_id": hist(self.lca_histogram_id),
            "lca_histogram_ood": hist(self.lca_histogram_ood),
            "lca_kind_counts": dict(sorted(self.lca_kind_counts.items())),
            "n_id_test": self.n_id_test,
            "n_ood_test": self.n_ood_test,
            "node_local_mean": self.node_local_mean,
            "node_local_per_node": (
                None if self.node_local_per_node is None
                else {str(k): v for k, v in sorted(self.node_local_per_node.items())}),
        }

    @staticmethod
    def from_dict(doc: dict) -> "EvalReport":
        def hist(rows: list[list[int]]) -> dict[tuple[int, int], int]:
            return {(int(o), int(u)): int(n) for o, u, n in rows}

        return EvalReport(
            bacc_id=doc["bacc_id"], bacc_ood=doc["bacc_ood"], mix_bacc=doc["mix_bacc"],
            bmhd_id=doc["bmhd_id"], bmhd_ood=doc["bmhd_ood"], mix_bmhd=doc["mix_bmhd"],
            per_class_mean_dist={int(k): float(v)
                                 for k, v in doc["per_class_mean_dist"].items()},
            lca_histogram=hist(doc["lca_histogram"]),
            lca_histogram_id=hist(doc["lca_histogram_id"]),
            lca_histogram_ood=hist(doc["lca_histogram_ood"]),
            lca_kind_counts={str(k): int(v) for k, v in doc["lca_kind_counts"].items()},
            n_id_test=int(doc["n_id_test"]),
            n_ood_test=int(doc["n_ood_test"]),
            node_local_mean=doc.get("node_local_mean"),
            node_local_per_node=(
                None if doc.get("node_local_per_node") is None
                else {int(k): v for k, v in doc["node_local_per_node"].items()}),
        )


def evaluate(h: Hierarchy, predictions: Mapping[str, NodeId],
             dataset: LabeledDataset,
             conditional_tables: Optional[Mapping[str, ConditionalTable]] = None,
             ) -> EvalReport:
    """Fill a complete EvalReport from test-partition predictions.

    ID metrics run over leaf-labeled id_test samples, ood metrics over
    internal-node-labeled ood_test samples.  Node-local conditional metrics
    need per-sample conditional tables and are skipped when absent.
    """
    id_pairs = [(s.sample_id, s.label) for s in dataset.partition_samples("id_test")]
    ood_pairs = [(s.sample_id, s.label) for s in dataset.partition_samples("ood_test")]

    bacc_id = balanced_accuracy(predictions, id_pairs) if id_pairs else None
    bacc_ood = balanced_accuracy(predictions, ood_pairs) if ood_pairs else None
    bmhd_id = bmhd(h, predictions, id_pairs) if id_pairs else None
    bmhd_ood = bmhd(h, predictions, ood_pairs) if ood_pairs else None
    mix_bacc = (0.5 * (bacc_id + bacc_ood)
                if bacc_id is not None and bacc_ood is not None else None)
    mix_bmhd = (0.5 * (bmhd_id + bmhd_ood)
                if bmhd_id is not None and bmhd_ood is not None else None)

    per_class: dict[NodeId, list[int]] = defaultdict(list)
    hist_all: Counter = Counter()
    hist_id: Counter = Counter()
    hist_ood: Counter = Counter()
    kinds: Counter = Counter()
    for pairs, hist_part in ((id_pairs, hist_id), (ood_pairs, hist_ood)):
        for sample_id, label in pairs:
            pred = predictions[sample_id]
            per_class[label].append(h.dist(pred, label))
            dec = lca_decompose(h, pred, label)
            key = (dec.overpred_dist, dec.underpred_dist)
            hist_all[key] += 1
            hist_part[key] += 1
            kinds[dec.kind.value] += 1

    node_local_mean = None
    node_local_per_node = None
    if conditional_tables is not None:
        node_local_per_node = {}
        ood_by_node: dict[NodeId, list[str]] = defaultdict(list)
        for sample_id, label in ood_pairs:
            ood_by_node[label].append(sample_id)
        for c in h.internal_nodes:
            if c not in ood_by_node:
                continue  # no ood data at this node: skipped
            ids = list(ood_by_node[c])
            labels = [c] * len(ids)
            c_leaves = set(h.descendant_leaves(c))
            for sample_id, label in id_pairs:
                if label in c_leaves:
                    ids.append(sample_id)
                    labels.append(label)
            vecs = [conditional_tables[s].at(c) for s in ids]
            node_local_per_node[c] = node_local_metrics(h, c, vecs, labels).as_dict()
        if node_local_per_node:
            keys = ("f1", "fpr", "tpr", "purity", "dirty_f1")
            node_local_mean = {
                k: math.fsum(m[k] for m in node_local_per_node.values())
                / len(node_local_per_node)
                for k in keys
            }

    return EvalReport(
        bacc_id=bacc_id, bacc_ood=bacc_ood, mix_bacc=mix_bacc,
        bmhd_id=bmhd_id, bmhd_ood=bmhd_ood, mix_bmhd=mix_bmhd,
        per_class_mean_dist={c: math.fsum(ds) / len(ds) for c, ds in per_class.items()},
        lca_histogram=dict(hist_all),
        lca_histogram_id=dict(hist_id),
        lca_histogram_ood=dict(hist_ood),
        lca_kind_counts=dict(kinds),
        n_id_test=len(id_pairs),
        n_ood_test=len(ood_pairs),
        node_local_mean=node_local_mean,
        node_local_per_node=node_local_per_node,
    )
