"""Class-hierarchy data model and structural algorithms.

A :class:`Hierarchy` is a directed rooted tree over integer node ids whose
leaves are the known (in-distribution) classes.  All queries are pure and the
object is treated as immutable after construction, so instances can be shared
freely across threads.

The :class:`AugmentedHierarchy` adds one synthetic out-of-distribution child
per internal node; its leaves are the union of known leaf classes and the
synthetic ood nodes.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Optional

import numpy as np

from .errors import (
    CycleDetected,
    DanglingParent,
    DuplicateId,
    EmptyIdTree,
    InvalidSpec,
    MultipleRoots,
    NotALeaf,
    UnknownNode,
)

NodeId = int

#: Raw node record accepted by :func:`build_hierarchy`.
RawNode = tuple[NodeId, str, Optional[NodeId]]


class Hierarchy:
    """Validated rooted tree with depth / ancestor / distance queries.

    Use :func:`build_hierarchy` to construct; the constructor assumes
    pre-validated inputs.
    """

    def __init__(self, names: Mapping[NodeId, str], parents: Mapping[NodeId, Optional[NodeId]]):
        self._names = dict(names)
        self._parents = dict(parents)
        self.node_ids: tuple[NodeId, ...] = tuple(sorted(self._names))
        children: dict[NodeId, list[NodeId]] = {n: [] for n in self.node_ids}
        root = None
        for n in self.node_ids:
            p = self._parents[n]
            if p is None:
                root = n
            else:
                children[p].append(n)
        assert root is not None
        self.root: NodeId = root
        self._children = {n: tuple(sorted(cs)) for n, cs in children.items()}

        depths: dict[NodeId, int] = {root: 0}
        stack = [root]
        while stack:
            node = stack.pop()
            for child in self._children[node]:
                depths[child] = depths[node] + 1
                stack.append(child)
        self._depths = depths
        self.leaves: tuple[NodeId, ...] = tuple(n for n in self.node_ids if not self._children[n])
        self.internal_nodes: tuple[NodeId, ...] = tuple(n for n in self.node_ids if self._children[n])
        self.max_depth: int = max(depths.values())
        self._index = {n: i for i, n in enumerate(self.node_ids)}
        self._dist_matrix: np.ndarray | None = None

    # -- basic queries -----------------------------------------------------

    def __len__(self) -> int:
        return len(self.node_ids)

    def __contains__(self, node: NodeId) -> bool:
        return node in self._names

    def _check(self, node: NodeId) -> None:
        if node not in self._names:
            raise UnknownNode(f"node {node} is not in the hierarchy")

    def name(self, node: NodeId) -> str:
        self._check(node)
        return self._names[node]

    def parent(self, node: NodeId) -> Optional[NodeId]:
        self._check(node)
        return self._parents[node]

    def children(self, node: NodeId) -> tuple[NodeId, ...]:
        self._check(node)
        return self._children[node]

    def depth(self, node: NodeId) -> int:
        self._check(node)
        return self._depths[node]

    def is_leaf(self, node: NodeId) -> bool:
        self._check(node)
        return not self._children[node]

    def index_of(self, node: NodeId) -> int:
        """Position of ``node`` in the ascending ``node_ids`` ordering."""
        self._check(node)
        return self._index[node]

    def ancestors(self, node: NodeId) -> tuple[NodeId, ...]:
        """Path from ``node`` up to the root, inclusive on both ends."""
        self._check(node)
        path = [node]
        while (p := self._parents[path[-1]]) is not None:
            path.append(p)
        return tuple(path)

    def descendant_leaves(self, node: NodeId) -> tuple[NodeId, ...]:
        """All leaves in the subtree of ``node`` (``node`` itself if a leaf)."""
        self._check(node)
        out = []
        stack = [node]
        while stack:
            cur = stack.pop()
            cs = self._children[cur]
            if not cs:
                out.append(cur)
            else:
                stack.extend(cs)
        return tuple(sorted(out))

    # -- structural algorithms ----------------------------------------------

    def lca(self, a: NodeId, b: NodeId) -> NodeId:
        """Deepest node having both ``a`` and ``b`` as descendants.

        A node counts as its own descendant, so ``lca(a, a) == a`` and
        ``lca(a, anc) == anc`` for any ancestor of ``a``.
        """
        self._check(a)
        self._check(b)
        seen = set(self.ancestors(a))
        node = b
        while node not in seen:
            node = self._parents[node]  # root is in `seen`, loop terminates
        return node

    def dist(self, a: NodeId, b: NodeId) -> int:
        """Edge count of the shortest path between two nodes in the
        undirected tree: depth(a) + depth(b) - 2 * depth(lca(a, b))."""
        lca = self.lca(a, b)
        return self._depths[a] + self._depths[b] - 2 * self._depths[lca]

    def ancestor_at_depth(self, node: NodeId, d: int) -> NodeId:
        """Ancestor of ``node`` at depth ``d``, or ``node`` itself when it is
        no deeper than ``d``."""
        self._check(node)
        cur = node
        while self._depths[cur] > d:
            cur = self._parents[cur]
        return cur

    def remap_label(self, y: NodeId, d: int) -> NodeId:
        """Ancestor of leaf ``y`` at depth ``d``, or ``y`` itself when the
        leaf is no deeper than ``d`` (shallow leaves stay themselves)."""
        if not self.is_leaf(y):
            raise NotALeaf(f"node {y} is not a leaf")
        if d < 1:
            raise ValueError(f"depth must be >= 1, got {d}")
        return self.ancestor_at_depth(y, d)

    def distance_matrix(self) -> np.ndarray:
        """Pairwise edge distances over ``node_ids`` order, cached.

        Built once per hierarchy; used by the expected-distance decision rule
        which is quadratic in node count per sample.
        """
        if self._dist_matrix is None:
            n = len(self.node_ids)
            depths = np.array([self._depths[v] for v in self.node_ids], dtype=np.int64)
            lca_depth = np.empty((n, n), dtype=np.int64)
            anc_sets = [set(self.ancestors(v)) for v in self.node_ids]
            for i, v in enumerate(self.node_ids):
                path = self.ancestors(v)
                for j in range(i, n):
                    if v in anc_sets[j]:
                        lca_depth[i, j] = lca_depth[j, i] = depths[i]
                        continue
                    for node in path[1:]:
                        if node in anc_sets[j]:
                            lca_depth[i, j] = lca_depth[j, i] = self._depths[node]
                            break
            self._dist_matrix = depths[:, None] + depths[None, :] - 2 * lca_depth
        return self._dist_matrix

    def __repr__(self) -> str:
        return (f"Hierarchy(nodes={len(self.node_ids)}, leaves={len(self.leaves)}, "
                f"max_depth={self.max_depth})")


def build_hierarchy(nodes: Iterable[RawNode]) -> Hierarchy:
    """Validate a raw ``(id, name, parent)`` list and build a Hierarchy.

    Raises:
        DuplicateId: a node id appears more than once.
        DanglingParent: a parent reference points outside the node set.
        MultipleRoots: more than one node has no parent.
        CycleDetected: no root exists or some nodes are unreachable from it.
    """
    records = list(nodes)
    if not records:
        raise ValueError("node list is empty")
    names: dict[NodeId, str] = {}
    parents: dict[NodeId, Optional[NodeId]] = {}
    dupes = []
    for node_id, name, parent in records:
        node_id = int(node_id)
        if node_id < 0:
            raise ValueError(f"node ids must be non-negative, got {node_id}")
        if node_id in names:
            dupes.append(node_id)
        names[node_id] = str(name)
        parents[node_id] = None if parent is None else int(parent)
    if dupes:
        raise DuplicateId(f"duplicate node ids: {sorted(set(dupes))}")

    dangling = sorted(n for n, p in parents.items() if p is not None and p not in names)
    if dangling:
        raise DanglingParent(
            f"nodes {dangling} reference parents outside the node set: "
            f"{sorted({parents[n] for n in dangling})}")

    roots = sorted(n for n, p in parents.items() if p is None)
    if len(roots) > 1:
        raise MultipleRoots(f"multiple parentless nodes: {roots}")
    if not roots:
        raise CycleDetected("no parentless node exists; parent links must contain a cycle")

    reached = {roots[0]}
    children: dict[NodeId, list[NodeId]] = {n: [] for n in names}
    for n, p in parents.items():
        if p is not None:
            children[p].append(n)
    stack = [roots[0]]
    while stack:
        node = stack.pop()
        for child in children[node]:
            if child not in reached:
                reached.add(child)
                stack.append(child)
    unreached = sorted(set(names) - reached)
    if unreached:
        raise CycleDetected(f"nodes not reachable from root {roots[0]}: {unreached}")

    return Hierarchy(names, parents)


@dataclass(frozen=True)
class AugmentedHierarchy:
    """Base hierarchy plus one synthetic ood child per internal node.

    ``ood_children`` maps each internal node c to its ood(c) node id; ids are
    allocated as ``base_max_id + 1 + rank`` with internal nodes ranked in
    ascending id order, so augmentation is deterministic.
    """

    base: Hierarchy
    ood_children: Mapping[NodeId, NodeId]
    ood_parent: Mapping[NodeId, NodeId] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "ood_parent", {o: c for c, o in self.ood_children.items()})

    @property
    def leaves(self) -> tuple[NodeId, ...]:
        """Leaves of the augmented tree: known classes then ood nodes."""
        return self.base.leaves + tuple(sorted(self.ood_children.values()))

    def is_ood(self, node: NodeId) -> bool:
        return node in self.ood_parent

    def to_base(self, node: NodeId) -> NodeId:
        """Map ood(c) to c; base nodes map to themselves."""
        return self.ood_parent.get(node, node)

    def path_from_root(self, leaf: NodeId) -> tuple[NodeId, ...]:
        """Root-to-leaf path in the augmented tree (root included)."""
        if leaf in self.ood_parent:
            host = self.ood_parent[leaf]
            return tuple(reversed(self.base.ancestors(host))) + (leaf,)
        return tuple(reversed(self.base.ancestors(leaf)))


def augment(h: Hierarchy) -> AugmentedHierarchy:
    """Append one ood child to every internal node of ``h``.

    Base distances and ids are untouched; a tree with no internal nodes
    (single node) gains no ood children.
    """
    base_max = max(h.node_ids)
    ood = {c: base_max + 1 + rank for rank, c in enumerate(h.internal_nodes)}
    return AugmentedHierarchy(base=h, ood_children=ood)


class DepthClassIndex:
    """Per-depth ordered class lists: the image of the label-remap function
    over the leaves, for every depth 1..D.

    A leaf shallower than d maps to itself, so shallow leaves appear in every
    deeper class list; the depth-D list is exactly the leaf set.
    """

    def __init__(self, h: Hierarchy):
        if h.max_depth < 1:
            raise ValueError("hierarchy must have depth >= 1")
        self.hierarchy = h
        self.max_depth = h.max_depth
        self._classes: dict[int, tuple[NodeId, ...]] = {}
        self._cols: dict[int, dict[NodeId, int]] = {}
        for d in range(1, h.max_depth + 1):
            image = sorted({h.remap_label(y, d) for y in h.leaves})
            self._classes[d] = tuple(image)
            self._cols[d] = {node: i for i, node in enumerate(image)}

    def classes(self, d: int) -> tuple[NodeId, ...]:
        if d not in self._classes:
            raise ValueError(f"depth {d} outside 1..{self.max_depth}")
        return self._classes[d]

    def col(self, d: int, node: NodeId) -> int:
        """Column index of ``node`` in the depth-d class ordering."""
        try:
            return self._cols[d][node]
        except KeyError:
            raise UnknownNode(f"node {node} is not a depth-{d} class") from None

    def n_classes(self, d: int) -> int:
        return len(self.classes(d))


def depth_class_index(h: Hierarchy) -> DepthClassIndex:
    """Build the per-depth class index for ``h`` (requires depth >= 1)."""
    return DepthClassIndex(h)


@dataclass(frozen=True)
class SplitSpec:
    """Selected subtree roots to hold out as out-of-distribution."""

    ood_roots: frozenset[NodeId]

    @staticmethod
    def of(roots: Iterable[NodeId]) -> "SplitSpec":
        return SplitSpec(ood_roots=frozenset(int(r) for r in roots))


def split_id_ood(full: Hierarchy, spec: SplitSpec) -> tuple[Hierarchy, dict[NodeId, NodeId]]:
    """Carve an ID hierarchy out of ``full`` by removing OOD subtrees.

    Steps: (1) remove every ood root with its whole subtree; an internal
    node left without any surviving leaf descendant goes too, since a class
    with no trainable leaf classes cannot stay in the ID tree; (2) prune:
    repeatedly splice out any non-root node with exactly one child, attaching
    the child to the grandparent (a single-child root stays, having no
    grandparent); (3) map every removed original leaf to its closest ancestor
    surviving in the pruned tree.

    Returns the pruned ID hierarchy and the removed-leaf -> surviving-node
    label map used to relabel OOD evaluation data.
    """
    roots = sorted(spec.ood_roots)
    for r in roots:
        if r not in full:
            raise InvalidSpec(f"ood root {r} is not a node of the hierarchy")
    if full.root in spec.ood_roots:
        raise InvalidSpec("the hierarchy root cannot be an ood root")
    for r in roots:
        above = set(full.ancestors(r)[1:])
        overlap = above & spec.ood_roots
        if overlap:
            raise InvalidSpec(f"ood root {r} is a descendant of ood root(s) {sorted(overlap)}")

    removed_leaves = set()
    for r in roots:
        removed_leaves.update(full.descendant_leaves(r))
    surviving_leaves = [y for y in full.leaves if y not in removed_leaves]
    if not surviving_leaves:
        raise EmptyIdTree("the split removes every leaf of the hierarchy")

    kept = set()
    for y in surviving_leaves:
        kept.update(full.ancestors(y))

    # single-child pruning on the kept node set (root exempt); splicing a
    # node out never changes its parent's child count, so the initial
    # single-child list is exhaustive, but we re-check before each splice
    parent = {n: full.parent(n) for n in kept}
    children: dict[NodeId, set[NodeId]] = {n: set() for n in kept}
    for n in kept:
        p = parent[n]
        if p is not None:
            children[p].add(n)
    queue = sorted(n for n in kept if n != full.root and len(children[n]) == 1)
    while queue:
        n = queue.pop()
        if n == full.root or n not in kept or len(children[n]) != 1:
            continue
        (only_child,) = children[n]
        p = parent[n]
        parent[only_child] = p
        if p is not None:
            children[p].discard(n)
            children[p].add(only_child)
        kept.discard(n)
        del parent[n], children[n]

    id_h = build_hierarchy((n, full.name(n), parent[n]) for n in sorted(kept))

    ood_label_map: dict[NodeId, NodeId] = {}
    for y in sorted(removed_leaves):
        for anc in full.ancestors(y):
            if anc in kept:
                ood_label_map[y] = anc
                break
    return id_h, ood_label_map


# -- labeled datasets --------------------------------------------------------

PARTITIONS = ("id_train", "id_test", "ood_test")


@dataclass(frozen=True)
class Sample:
    sample_id: str
    label: NodeId
    partition: str


@dataclass(frozen=True)
class LabeledDataset:
    """Sample ids with hierarchy labels and train/test partitions.

    id_* labels must be leaves of the ID hierarchy; ood_test labels are
    internal nodes (possibly the root).
    """

    samples: tuple[Sample, ...]

    def validate_against(self, h: Hierarchy) -> None:
        for s in self.samples:
            if s.partition not in PARTITIONS:
                raise ValueError(f"sample {s.sample_id!r}: unknown partition {s.partition!r}")
            if s.label not in h:
                raise UnknownNode(f"sample {s.sample_id!r}: label {s.label} not in hierarchy")
            if s.partition in ("id_train", "id_test") and not h.is_leaf(s.label):
                raise NotALeaf(f"sample {s.sample_id!r}: id label {s.label} is not a leaf")
            if s.partition == "ood_test" and h.is_leaf(s.label):
                raise ValueError(
                    f"sample {s.sample_id!r}: ood label {s.label} must be an internal node")

    def partition_samples(self, partition: str) -> tuple[Sample, ...]:
        return tuple(s for s in self.samples if s.partition == partition)
