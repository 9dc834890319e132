"""Desk-scale synthetic stand-in for trained multi-depth networks.

Generates hierarchical Gaussian data whose geometry follows the tree
(sibling centroids stay close because child displacements shrink with depth),
then fits one Gaussian generative classifier per depth on remapped labels.
This surrogate reproduces the phenomenon the engine relies on (high-level
classifiers generalize to held-out sibling classes) in well under a second
per run.  It is a surrogate for experimentation, not a reproduction of any
particular trained model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .conditionals import ProbabilityStack, ScoreModel
from .engine import FlatTree, StackBatch, infer_batch, marginalized_batch, tables_from_cond
from .errors import ConfigInvalid, DimensionMismatch, EmptyClass
from .hierarchy import (
    Hierarchy,
    LabeledDataset,
    NodeId,
    Sample,
    SplitSpec,
    build_hierarchy,
    depth_class_index,
    split_id_ood,
)
from .inference import DecisionRule
from .metrics import EvalReport, evaluate


@dataclass(frozen=True)
class SyntheticConfig:
    """Generator knobs; defaults give non-trivial ood confusion in ~1s runs."""

    depth: int = 3
    branching: int = 4
    hierarchy: Optional[Hierarchy] = None  # overrides depth/branching
    feature_dim: int = 16
    centroid_scale: float = 4.0
    depth_decay: float = 0.7
    noise_sigma: float = 1.0
    train_per_leaf: int = 40
    test_per_leaf: int = 10
    ood_fraction: Optional[float] = 0.1875
    ood_roots: Optional[frozenset[NodeId]] = None  # overrides ood_fraction
    seed: int = 0

    def validated(self) -> "SyntheticConfig":
        if self.hierarchy is None:
            if self.depth < 2:
                raise ConfigInvalid(f"depth must be >= 2, got {self.depth}")
            if self.branching < 2:
                raise ConfigInvalid(f"branching must be >= 2, got {self.branching}")
        if self.noise_sigma <= 0:
            raise ConfigInvalid(f"noise_sigma must be > 0, got {self.noise_sigma}")
        if not 0 < self.depth_decay <= 1:
            raise ConfigInvalid(f"depth_decay must be in (0, 1], got {self.depth_decay}")
        if self.feature_dim < 1:
            raise ConfigInvalid(f"feature_dim must be >= 1, got {self.feature_dim}")
        if self.train_per_leaf < 1 or self.test_per_leaf < 1:
            raise ConfigInvalid("samples per leaf must be >= 1")
        if self.ood_roots is None:
            if self.ood_fraction is None or not 0 < self.ood_fraction < 1:
                raise ConfigInvalid("need ood_roots or ood_fraction in (0, 1)")
        return self

    @staticmethod
    def from_dict(doc: dict) -> "SyntheticConfig":
        known = {f for f in SyntheticConfig.__dataclass_fields__}
        extra = set(doc) - known
        if extra:
            raise ConfigInvalid(f"unknown config keys: {sorted(extra)}")
        doc = dict(doc)
        if "ood_roots" in doc and doc["ood_roots"] is not None:
            doc["ood_roots"] = frozenset(int(r) for r in doc["ood_roots"])
        return SyntheticConfig(**doc).validated()


def perfect_tree(depth: int, branching: int) -> Hierarchy:
    """Complete ``branching``-ary tree of the given depth, ids in BFS order."""
    nodes = [(0, "n0", None)]
    frontier = [0]
    next_id = 1
    for _ in range(depth):
        new_frontier = []
        for parent in frontier:
            for _ in range(branching):
                nodes.append((next_id, f"n{next_id}", parent))
                new_frontier.append(next_id)
                next_id += 1
        frontier = new_frontier
    return build_hierarchy(nodes)


@dataclass(frozen=True)
class FeatureTable:
    sample_ids: tuple[str, ...]
    features: np.ndarray  # [n_samples, feature_dim], rows align with sample_ids
    _row: dict = field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "_row",
                           {sid: i for i, sid in enumerate(self.sample_ids)})

    def rows_for(self, sample_ids: Sequence[str]) -> np.ndarray:
        return self.features[[self._row[s] for s in sample_ids]]


def _unit_vector(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def generate(cfg: SyntheticConfig) -> tuple[Hierarchy, LabeledDataset, FeatureTable]:
    """Hierarchical Gaussian data with an ID/OOD split already applied.

    Child centroids sit at parent + scale * decay^(child_depth - 1) * random
    unit vector; leaf samples are isotropic Gaussians around leaf centroids.
    Held-out leaves contribute only test samples, labeled by their closest
    surviving ancestor.  Identical seeds give bitwise-identical outputs.
    """
    cfg = cfg.validated()
    full = cfg.hierarchy or perfect_tree(cfg.depth, cfg.branching)
    ss = np.random.SeedSequence(cfg.seed)
    centroid_rng, split_rng, noise_rng = (np.random.default_rng(s) for s in ss.spawn(3))

    centroids = {full.root: np.zeros(cfg.feature_dim)}
    order = sorted(full.node_ids, key=full.depth)
    for node in order:
        if node == full.root:
            continue
        step = cfg.centroid_scale * cfg.depth_decay ** (full.depth(node) - 1)
        centroids[node] = (centroids[full.parent(node)]
                           + step * _unit_vector(centroid_rng, cfg.feature_dim))

    if cfg.ood_roots is not None:
        spec = SplitSpec.of(cfg.ood_roots)
    else:
        n_ood = max(1, round(cfg.ood_fraction * len(full.leaves)))
        if n_ood >= len(full.leaves):
            raise ConfigInvalid("ood_fraction removes every leaf")
        picks = split_rng.choice(len(full.leaves), size=n_ood, replace=False)
        spec = SplitSpec.of(full.leaves[i] for i in sorted(picks))
    id_h, ood_map = split_id_ood(full, spec)

    samples: list[Sample] = []
    ids: list[str] = []
    rows: list[np.ndarray] = []
    for leaf in full.leaves:  # fixed draw order keeps runs reproducible
        mu = centroids[leaf]
        train = mu + cfg.noise_sigma * noise_rng.standard_normal(
            (cfg.train_per_leaf, cfg.feature_dim))
        test = mu + cfg.noise_sigma * noise_rng.standard_normal(
            (cfg.test_per_leaf, cfg.feature_dim))
        held_out = leaf in ood_map
        if not held_out:
            for i, x in enumerate(train):
                sid = f"{leaf:05d}-tr-{i:04d}"
                samples.append(Sample(sid, leaf, "id_train"))
                ids.append(sid)
                rows.append(x)
        for i, x in enumerate(test):
            sid = f"{leaf:05d}-te-{i:04d}"
            if held_out:
                samples.append(Sample(sid, ood_map[leaf], "ood_test"))
            else:
                samples.append(Sample(sid, leaf, "id_test"))
            ids.append(sid)
            rows.append(x)

    dataset = LabeledDataset(samples=tuple(samples))
    dataset.validate_against(id_h)
    return id_h, dataset, FeatureTable(sample_ids=tuple(ids), features=np.array(rows))


@dataclass(frozen=True)
class MultiDepthClassifier:
    """One Gaussian generative classifier per depth (shared isotropic
    variance, equal priors): logits are -||x - mu_c||^2 / (2 sigma_d^2)."""

    feature_dim: int
    centroids: tuple[np.ndarray, ...]  # [m_d, feature_dim] per depth
    sigma2: tuple[float, ...]          # per depth


def fit(h: Hierarchy, index, dataset: LabeledDataset,
        features: FeatureTable) -> MultiDepthClassifier:
    """Per-depth class means over remapped training labels plus a shared
    per-coordinate variance."""
    train = dataset.partition_samples("id_train")
    if not train:
        raise EmptyClass("no training samples")
    X = features.rows_for([s.sample_id for s in train])
    dim = X.shape[1]
    centroids = []
    sigma2 = []
    for d in range(1, index.max_depth + 1):
        classes = index.classes(d)
        col = {c: i for i, c in enumerate(classes)}
        mapped = np.array([col[h.remap_label(s.label, d)] for s in train])
        mu = np.zeros((len(classes), dim))
        for j, c in enumerate(classes):
            mask = mapped == j
            if not mask.any():
                raise EmptyClass(f"depth-{d} class {c} has no training samples")
            mu[j] = X[mask].mean(axis=0)
        resid = X - mu[mapped]
        var = float((resid ** 2).mean())  # per-coordinate variance
        centroids.append(mu)
        sigma2.append(max(var, 1e-12))
    return MultiDepthClassifier(feature_dim=dim, centroids=tuple(centroids),
                                sigma2=tuple(sigma2))


def _stack_matrices(clf: MultiDepthClassifier,
                    X: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    if X.ndim != 2 or X.shape[1] != clf.feature_dim:
        raise DimensionMismatch(
            f"expected [*, {clf.feature_dim}] features, got {X.shape}")
    probs, logits = [], []
    for mu, s2 in zip(clf.centroids, clf.sigma2):
        sq = ((X[:, None, :] - mu[None, :, :]) ** 2).sum(axis=2)
        lg = -sq / (2.0 * s2)
        z = lg - lg.max(axis=1, keepdims=True)
        e = np.exp(z)
        probs.append(e / e.sum(axis=1, keepdims=True))
        logits.append(lg)
    return probs, logits


def predict_stack(clf: MultiDepthClassifier, x: np.ndarray) -> ProbabilityStack:
    """Posterior stack (with logits) for a single feature vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise DimensionMismatch(f"expected a flat feature vector, got {x.shape}")
    probs, logits = _stack_matrices(clf, x[None, :])
    return ProbabilityStack(probs=tuple(p[0] for p in probs),
                            logits=tuple(l[0] for l in logits))


def predict_batch(clf: MultiDepthClassifier, sample_ids: Sequence[str],
                  X: np.ndarray) -> StackBatch:
    probs, logits = _stack_matrices(clf, np.asarray(X, dtype=np.float64))
    return StackBatch(sample_ids=tuple(sample_ids), probs=tuple(probs),
                      logits=tuple(logits))


@dataclass(frozen=True)
class ExperimentSetup:
    """Everything downstream of generation: reusable across decision rules."""

    config: SyntheticConfig
    hierarchy: Hierarchy
    index: object
    flat: FlatTree
    dataset: LabeledDataset
    features: FeatureTable
    classifier: MultiDepthClassifier
    test_batch: StackBatch
    test_labels: tuple[NodeId, ...]


def prepare(cfg: SyntheticConfig) -> ExperimentSetup:
    h, dataset, features = generate(cfg)
    index = depth_class_index(h)
    clf = fit(h, index, dataset, features)
    test = [s for s in dataset.samples if s.partition != "id_train"]
    test.sort(key=lambda s: s.sample_id)
    batch = predict_batch(clf, [s.sample_id for s in test],
                          features.rows_for([s.sample_id for s in test]))
    return ExperimentSetup(
        config=cfg, hierarchy=h, index=index, flat=FlatTree(h, index),
        dataset=dataset, features=features, classifier=clf,
        test_batch=batch, test_labels=tuple(s.label for s in test))


def run_on(setup: ExperimentSetup, model: ScoreModel, rule: DecisionRule,
           root_ood: bool = False) -> EvalReport:
    """Inference + evaluation for one (score model, decision rule) pair."""
    result = infer_batch(setup.flat, setup.test_batch, model, rule,
                         root_ood=root_ood, true_labels=setup.test_labels,
                         keep_conditionals=True)
    predictions = result.as_mapping()
    tables = None
    if result.conditionals is not None:
        per_sample = tables_from_cond(setup.flat, result.conditionals)
        tables = dict(zip(setup.test_batch.sample_ids, per_sample))
    return evaluate(setup.hierarchy, predictions, setup.dataset,
                    conditional_tables=tables)


def run_experiment(cfg: SyntheticConfig, model: ScoreModel, rule: DecisionRule,
                   root_ood: bool = False) -> EvalReport:
    """generate -> split -> fit -> stacks -> conditionals -> decision -> report."""
    return run_on(prepare(cfg), model, rule, root_ood=root_ood)


def ood_depth_accuracy(setup: ExperimentSetup) -> tuple[float, float]:
    """Accuracy on ood test samples at their ground-truth depths.

    Returns (multi_depth, marginalized): argmax of the depth-d vector vs
    argmax of descendant-leaf-summed deepest-vector mass, pooled over all
    ood samples whose label depth is in 1..D-1.
    """
    h, index, batch = setup.hierarchy, setup.index, setup.test_batch
    partition = {s.sample_id: s.partition for s in setup.dataset.samples}
    by_depth: dict[int, list[int]] = {}
    for row, (sid, label) in enumerate(zip(batch.sample_ids, setup.test_labels)):
        if partition[sid] != "ood_test":
            continue
        d = h.depth(label)
        if 1 <= d <= index.max_depth - 1:
            by_depth.setdefault(d, []).append(row)
    multi_hits = margin_hits = total = 0
    for d, rows in sorted(by_depth.items()):
        classes = index.classes(d)
        vecs = np.asarray(batch.probs[d - 1])[rows]
        multi_preds = [classes[int(i)] for i in vecs.argmax(axis=1)]
        margin_all = marginalized_batch(setup.flat, batch, d)
        for r, mp in zip(rows, multi_preds):
            label = setup.test_labels[r]
            multi_hits += mp == label
            margin_hits += margin_all[r] == label
            total += 1
    if total == 0:
        raise EmptyClass("no ood samples at depths 1..D-1")
    return multi_hits / total, margin_hits / total
