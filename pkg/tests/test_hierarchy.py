"""Tree model: construction, queries, remapping, splitting, augmentation."""

import numpy as np
import pytest

from treeood import SplitSpec, augment, build_hierarchy, depth_class_index, split_id_ood
from treeood.errors import (
    CycleDetected,
    DanglingParent,
    DuplicateId,
    EmptyIdTree,
    InvalidSpec,
    MultipleRoots,
    NotALeaf,
    UnknownNode,
)

from conftest import A, B, R, a1, a2, a3, b1, b2, random_tree


# -- independent oracles ------------------------------------------------------

def bfs_dist(h, start, goal):
    """Shortest-path edge count in the undirected tree, by plain BFS."""
    adj = {n: set() for n in h.node_ids}
    for n in h.node_ids:
        p = h.parent(n)
        if p is not None:
            adj[n].add(p)
            adj[p].add(n)
    frontier, seen, steps = {start}, {start}, 0
    while True:
        if goal in frontier:
            return steps
        frontier = {m for n in frontier for m in adj[n] if m not in seen}
        seen |= frontier
        steps += 1


def lca_by_ancestor_sets(h, x, y):
    """Deepest member of the intersection of the two ancestor-or-self sets."""
    common = set(h.ancestors(x)) & set(h.ancestors(y))
    return max(common, key=h.depth)


class TestBuild:
    def test_t1(self, t1):
        assert t1.max_depth == 2
        assert t1.leaves == (a1, a2, a3, b1, b2)
        assert t1.internal_nodes == (R, A, B)
        assert t1.root == R
        assert t1.children(A) == (a1, a2, a3)

    def test_single_node(self):
        h = build_hierarchy([(0, "R", None)])
        assert h.max_depth == 0
        assert h.leaves == (0,)
        assert h.internal_nodes == ()

    def test_two_roots(self):
        with pytest.raises(MultipleRoots, match=r"\[0, 1\]"):
            build_hierarchy([(0, "x", None), (1, "y", None)])

    def test_duplicate_id(self):
        with pytest.raises(DuplicateId, match=r"\[1\]"):
            build_hierarchy([(0, "R", None), (1, "x", 0), (1, "y", 0)])

    def test_dangling_parent(self):
        with pytest.raises(DanglingParent, match="99"):
            build_hierarchy([(0, "R", None), (1, "x", 99)])

    def test_cycle_no_root(self):
        with pytest.raises(CycleDetected):
            build_hierarchy([(0, "x", 1), (1, "y", 0)])

    def test_cycle_unreachable(self):
        with pytest.raises(CycleDetected, match=r"\[1, 2\]"):
            build_hierarchy([(0, "R", None), (1, "x", 2), (2, "y", 1)])

    def test_empty(self):
        with pytest.raises(ValueError):
            build_hierarchy([])


class TestDistLca:
    def test_siblings(self, t1):
        assert t1.dist(a1, a2) == 2

    def test_identity(self, t1):
        assert t1.dist(a1, a1) == 0

    def test_across_root(self, t1):
        assert t1.dist(a1, B) == 3  # a1 - A - R - B

    def test_lca_examples(self, t1):
        assert t1.lca(a1, b2) == R
        assert t1.lca(a1, A) == A
        assert t1.lca(a1, a1) == a1

    def test_unknown_node(self, t1):
        with pytest.raises(UnknownNode):
            t1.dist(a1, 42)
        with pytest.raises(UnknownNode):
            t1.lca(42, a1)

    def test_lca_matches_ancestor_set_oracle_on_random_trees(self):
        rng = np.random.default_rng(7)
        for _ in range(5):
            h = random_tree(rng, 200)
            nodes = h.node_ids
            for _ in range(300):
                x, y = rng.choice(nodes, size=2)
                assert h.lca(int(x), int(y)) == lca_by_ancestor_sets(h, int(x), int(y))

    def test_dist_is_a_metric_exhaustively(self):
        rng = np.random.default_rng(11)
        h = random_tree(rng, 30)
        nodes = h.node_ids
        d = {(x, y): h.dist(x, y) for x in nodes for y in nodes}
        for x in nodes:
            assert d[x, x] == 0
            for y in nodes:
                assert d[x, y] == d[y, x]
                for z in nodes:
                    assert d[x, z] <= d[x, y] + d[y, z]

    def test_dist_matches_bfs_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(4):
            h = random_tree(rng, 50)
            for _ in range(100):
                x, y = rng.choice(h.node_ids, size=2)
                assert h.dist(int(x), int(y)) == bfs_dist(h, int(x), int(y))

    def test_distance_matrix_consistent(self, t1):
        m = t1.distance_matrix()
        for x in t1.node_ids:
            for y in t1.node_ids:
                assert m[t1.index_of(x), t1.index_of(y)] == t1.dist(x, y)


class TestRemapLabel:
    def test_to_depth_one(self, t1):
        assert t1.remap_label(a1, 1) == A

    def test_shallower_than_requested(self, t1):
        assert t1.remap_label(a1, 5) == a1

    def test_full_depth_is_identity(self, t1):
        for y in t1.leaves:
            assert t1.remap_label(y, t1.max_depth) == y

    def test_internal_node_rejected(self, t1):
        with pytest.raises(NotALeaf):
            t1.remap_label(A, 1)

    def test_composition_law_exhaustive(self):
        # ancestor_at_depth extends the remap to internal intermediates,
        # which makes the composition law testable for d < depth(y)
        rng = np.random.default_rng(17)
        for _ in range(5):
            h = random_tree(rng, 40)
            for y in h.leaves:
                for d in range(1, h.max_depth + 2):
                    mid = h.ancestor_at_depth(y, d)
                    for dp in range(1, h.max_depth + 2):
                        lhs = h.ancestor_at_depth(mid, dp)
                        rhs = h.ancestor_at_depth(y, min(d, dp))
                        assert lhs == rhs
                        if h.is_leaf(mid):
                            assert h.remap_label(mid, dp) == h.remap_label(y, min(d, dp))


class TestSplit:
    def test_remove_one_leaf(self, t1):
        id_h, ood_map = split_id_ood(t1, SplitSpec.of([a3]))
        assert set(id_h.node_ids) == {R, A, B, a1, a2, b1, b2}
        assert ood_map == {a3: A}
        assert id_h.children(A) == (a1, a2)

    def test_prune_single_child(self, t1):
        id_h, ood_map = split_id_ood(t1, SplitSpec.of([a2, a3]))
        # A is left with only a1, gets spliced out; a1 attaches to R
        assert set(id_h.node_ids) == {R, B, a1, b1, b2}
        assert id_h.parent(a1) == R
        assert ood_map == {a2: R, a3: R}

    def test_remove_internal_subtree(self, t1):
        id_h, ood_map = split_id_ood(t1, SplitSpec.of([B]))
        assert set(id_h.node_ids) == {R, A, a1, a2, a3}
        assert ood_map == {b1: R, b2: R}

    def test_childless_internal_cascades(self, t1):
        # removing every leaf of B must take B itself out too
        id_h, ood_map = split_id_ood(t1, SplitSpec.of([b1, b2]))
        assert B not in id_h
        assert ood_map == {b1: R, b2: R}

    def test_single_child_root_kept(self, t1):
        id_h, _ = split_id_ood(t1, SplitSpec.of([b1, b2]))
        assert id_h.root == R
        assert id_h.children(R) == (A,)

    def test_invalid_specs(self, t1):
        with pytest.raises(InvalidSpec):
            split_id_ood(t1, SplitSpec.of([R]))
        with pytest.raises(InvalidSpec):
            split_id_ood(t1, SplitSpec.of([A, a1]))
        with pytest.raises(InvalidSpec):
            split_id_ood(t1, SplitSpec.of([99]))

    def test_empty_id_tree(self, t1):
        with pytest.raises(EmptyIdTree):
            split_id_ood(t1, SplitSpec.of([A, B]))

    def test_no_single_child_nodes_after_split(self):
        rng = np.random.default_rng(23)
        for _ in range(20):
            h = random_tree(rng, 60)
            k = int(rng.integers(1, max(2, len(h.leaves) // 3)))
            roots = rng.choice(h.leaves, size=min(k, len(h.leaves) - 1), replace=False)
            try:
                id_h, ood_map = split_id_ood(h, SplitSpec.of(int(r) for r in roots))
            except EmptyIdTree:
                continue
            for n in id_h.node_ids:
                if n != id_h.root:
                    assert len(id_h.children(n)) != 1
            # every mapped label is a node of the ID tree
            for mapped in ood_map.values():
                assert mapped in id_h


class TestAugment:
    def test_t1_counts(self, t1):
        g = augment(t1)
        assert set(g.ood_children) == {R, A, B}
        assert len(g.leaves) == 5 + 3
        # deterministic id allocation above the base ids
        assert g.ood_children == {R: 8, A: 9, B: 10}

    def test_single_node_tree(self):
        g = augment(build_hierarchy([(0, "R", None)]))
        assert g.ood_children == {}
        assert g.leaves == (0,)

    def test_base_unchanged(self, t1):
        g = augment(t1)
        assert g.base.dist(a1, b2) == 4
        assert g.base.node_ids == t1.node_ids

    def test_adds_one_leaf_per_internal_node(self):
        rng = np.random.default_rng(29)
        for _ in range(10):
            h = random_tree(rng, 50)
            g = augment(h)
            assert len(g.leaves) == len(h.leaves) + len(h.internal_nodes)
            assert set(g.ood_children.values()).isdisjoint(h.node_ids)

    def test_ood_paths(self, t1):
        g = augment(t1)
        assert g.path_from_root(g.ood_children[A]) == (R, A, g.ood_children[A])
        assert g.path_from_root(g.ood_children[R]) == (R, g.ood_children[R])
        assert g.to_base(g.ood_children[B]) == B
        assert g.to_base(a1) == a1


class TestDepthClassIndex:
    def test_t1(self, t1_index):
        assert t1_index.classes(1) == (A, B)
        assert t1_index.classes(2) == (a1, a2, a3, b1, b2)

    def test_shallow_leaf_in_deeper_lists(self):
        h = build_hierarchy([(0, "R", None), (1, "x", 0), (2, "Y", 0),
                             (3, "y1", 2), (4, "y2", 2)])
        index = depth_class_index(h)
        assert index.classes(1) == (1, 2)
        assert index.classes(2) == (1, 3, 4)  # shallow leaf appears again

    def test_deepest_list_is_leaf_set(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            h = random_tree(rng, 40)
            index = depth_class_index(h)
            assert index.classes(index.max_depth) == h.leaves

    def test_depth_zero_tree_rejected(self):
        with pytest.raises(ValueError):
            depth_class_index(build_hierarchy([(0, "R", None)]))


class TestBundledAircraftData:
    @pytest.fixture
    def split_tree(self):
        import json
        from pathlib import Path
        data = Path(__file__).resolve().parent.parent / "src" / "treeood" / "data"
        doc = json.loads((data / "fgvc_aircraft_hierarchy.json").read_text())
        full = build_hierarchy((n["id"], n["name"], n["parent"]) for n in doc["nodes"])
        spec = json.loads((data / "fgvc_aircraft_ood_split.json").read_text())
        return full, split_id_ood(full, SplitSpec.of(spec["ood_roots"]))

    def test_full_tree_shape(self, split_tree):
        full, _ = split_tree
        assert len(full.leaves) == 100      # variants
        assert len(full.internal_nodes) == 101  # root + 30 + 70
        assert full.max_depth == 3

    def test_split_counts(self, split_tree):
        _, (id_h, ood_map) = split_tree
        assert len(id_h.leaves) == 80
        assert len(ood_map) == 20
        assert len(id_h.internal_nodes) == 28
        assert id_h.max_depth == 3

    def test_classes_per_depth(self, split_tree):
        _, (id_h, _) = split_tree
        index = depth_class_index(id_h)
        assert [index.n_classes(d) for d in (1, 2, 3)] == [30, 63, 80]

    def test_held_out_map_depths_vary(self, split_tree):
        full, (id_h, ood_map) = split_tree
        depths = {id_h.depth(v) for v in ood_map.values()}
        assert depths == {1, 2}  # manufacturer- and family-level classes
