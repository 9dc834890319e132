"""Shared fixtures: the worked-example tree T1 and random instance generators."""

import numpy as np
import pytest

from treeood import ProbabilityStack, build_hierarchy, depth_class_index

# R=0; A=1, B=2 under R; a1=3, a2=4, a3=5 under A; b1=6, b2=7 under B
T1_NODES = [
    (0, "R", None),
    (1, "A", 0),
    (2, "B", 0),
    (3, "a1", 1),
    (4, "a2", 1),
    (5, "a3", 1),
    (6, "b1", 2),
    (7, "b2", 2),
]

R, A, B, a1, a2, a3, b1, b2 = range(8)

# worked-example stack: depth-1 over (A, B), depth-2 over (a1, a2, a3, b1, b2)
T1_D1 = np.array([0.7, 0.3])
T1_D2 = np.array([0.5, 0.2, 0.0, 0.2, 0.1])

# separate logits example (its softmax does NOT match T1_D2, so it travels in
# its own consistent stack)
T1_D2_LOGITS = np.array([2.0, 1.0, -30.0, 0.5, 0.0])


@pytest.fixture
def t1():
    return build_hierarchy(T1_NODES)


@pytest.fixture
def t1_index(t1):
    return depth_class_index(t1)


@pytest.fixture
def t1_stack():
    return ProbabilityStack(probs=(T1_D1.copy(), T1_D2.copy()))


def softmax(z):
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(z - z.max())
    return e / e.sum()


@pytest.fixture
def t1_logit_stack():
    """Stack whose probabilities are consistent with the example logits."""
    d1_logits = np.log(T1_D1)
    return ProbabilityStack(
        probs=(softmax(d1_logits), softmax(T1_D2_LOGITS)),
        logits=(d1_logits, T1_D2_LOGITS.copy()),
    )


def random_tree(rng, n_nodes, max_depth=None):
    """Random recursive tree on ids 0..n-1; optional depth cap."""
    parents = [None]
    depths = [0]
    for i in range(1, n_nodes):
        if max_depth is None:
            p = int(rng.integers(0, i))
        else:
            eligible = [j for j in range(i) if depths[j] < max_depth]
            p = int(eligible[rng.integers(0, len(eligible))])
        parents.append(p)
        depths.append(depths[p] + 1)
    return build_hierarchy((i, f"n{i}", parents[i]) for i in range(n_nodes))


def random_stack(index, rng, with_logits=True):
    """Valid random stack: strictly positive rows, logits = log(probs)."""
    probs, logits = [], []
    for d in range(1, index.max_depth + 1):
        row = rng.random(index.n_classes(d)) + 1e-3
        row /= row.sum()
        probs.append(row)
        logits.append(np.log(row))
    return ProbabilityStack(
        probs=tuple(probs),
        logits=tuple(logits) if with_logits else None,
    )
