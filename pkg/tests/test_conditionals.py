"""Score models and conditional distributions.

Frozen expected values were produced by an independent 50-digit mpmath
script; the same arithmetic is re-derived inline where cheap.
"""

import math

import numpy as np
import pytest

from treeood import (
    ProbabilityStack,
    ScoreModel,
    build_conditional_table,
    build_hierarchy,
    comp_prob_score,
    conditional_for,
    depth_class_index,
    entcompprob_score,
    entropy_score,
    maxprob_score,
    root_ood_score,
)
from treeood.errors import DegenerateDenominator, MissingDepth, MissingLogits

from conftest import A, R, random_stack, random_tree

# mpmath (dps=50) reference values for the worked example
ENTROPY_A = 0.59826958858525723484          # entropy of (5/7, 2/7, 0)
ENTCOMP_COND_A = (0.31283833689320571618,   # (0.5, 0.2, 0, s) / (s + 0.7)
                  0.12513533475728228647,
                  0.0,
                  0.56202632834951199735)
COMPLOGITS_COND_A = (0.62853171921175744525,  # softmax(2, 1, -30, 0.5)
                     0.23122389762214722672,
                     7.959829744954472503e-15,
                     0.1402443831660873682)
ROOT_ENTROPY = 1.220607264553017373         # entropy of (0.5,0.2,0,0.2,0.1)
UNIF_ENTCOMP_3_OF_5 = 1.4986122886681096914  # log 3 + (1 - 3/5)


class TestScores:
    def test_comp_prob_at_A(self, t1, t1_index, t1_stack):
        assert comp_prob_score(t1, t1_index, A, t1_stack) == pytest.approx(0.3, abs=1e-12)

    def test_comp_prob_at_root_is_zero(self, t1, t1_index, t1_stack):
        # depth-1 classes are exactly the root's children
        assert comp_prob_score(t1, t1_index, R, t1_stack) == 0.0

    def test_comp_prob_single_child_all_mass(self):
        h = build_hierarchy([(0, "R", None), (1, "c", 0), (2, "x", 1), (3, "y", 0)])
        index = depth_class_index(h)
        stack = ProbabilityStack(probs=(np.array([1.0, 0.0]), np.array([1.0, 0.0])))
        assert comp_prob_score(h, index, 1, stack) == 0.0

    def test_entropy_at_A(self, t1, t1_index, t1_stack):
        assert entropy_score(t1, t1_index, A, t1_stack) == pytest.approx(ENTROPY_A, abs=1e-12)

    def test_entropy_uniform_children(self, t1, t1_index):
        stack = ProbabilityStack(probs=(
            np.array([0.5, 0.5]),
            np.array([0.2, 0.2, 0.2, 0.2, 0.2]),
        ))
        assert entropy_score(t1, t1_index, A, stack) == pytest.approx(math.log(3), abs=1e-12)

    def test_entropy_one_hot_child(self, t1, t1_index):
        stack = ProbabilityStack(probs=(
            np.array([1.0, 0.0]),
            np.array([1.0, 0.0, 0.0, 0.0, 0.0]),
        ))
        assert entropy_score(t1, t1_index, A, stack) == 0.0

    def test_entropy_zero_child_mass_is_maximal(self, t1, t1_index):
        stack = ProbabilityStack(probs=(
            np.array([0.0, 1.0]),
            np.array([0.0, 0.0, 0.0, 0.5, 0.5]),
        ))
        assert entropy_score(t1, t1_index, A, stack) == pytest.approx(math.log(3))

    def test_entropy_rescaling_invariance(self, t1, t1_index):
        rng = np.random.default_rng(3)
        base = rng.random(5)
        for scale in (1.0, 0.25, 3.0):
            vec = base.copy()
            vec[:3] *= scale
            vec /= vec.sum()
            stack = ProbabilityStack(probs=(np.array([vec[:3].sum(), vec[3:].sum()]), vec))
            if scale == 1.0:
                ref = entropy_score(t1, t1_index, A, stack)
            else:
                assert entropy_score(t1, t1_index, A, stack) == pytest.approx(ref, abs=1e-12)

    def test_maxprob_at_A(self, t1, t1_index, t1_stack):
        assert maxprob_score(t1, t1_index, A, t1_stack) == pytest.approx(0.5, abs=1e-12)

    def test_maxprob_extremes(self, t1, t1_index):
        one_hot = ProbabilityStack(probs=(
            np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0, 0.0])))
        zeros = ProbabilityStack(probs=(
            np.array([0.0, 1.0]), np.array([0.0, 0.0, 0.0, 0.5, 0.5])))
        assert maxprob_score(t1, t1_index, A, one_hot) == 0.0
        assert maxprob_score(t1, t1_index, A, zeros) == 1.0

    def test_entcompprob_at_A(self, t1, t1_index, t1_stack):
        assert entcompprob_score(t1, t1_index, A, t1_stack) == pytest.approx(
            ENTROPY_A + 0.3, abs=1e-12)

    def test_entcompprob_uniform_closed_form(self, t1, t1_index):
        # uniform depth-2 vector, k=3 children out of m=5: log k + (1 - k/m)
        stack = ProbabilityStack(probs=(
            np.array([0.6, 0.4]), np.full(5, 0.2)))
        assert entcompprob_score(t1, t1_index, A, stack) == pytest.approx(
            UNIF_ENTCOMP_3_OF_5, abs=1e-12)

    def test_missing_depth(self, t1, t1_index):
        short = ProbabilityStack(probs=(np.array([0.7, 0.3]),))
        with pytest.raises(MissingDepth):
            comp_prob_score(t1, t1_index, A, short)

    def test_root_ood_score(self, t1_stack):
        assert root_ood_score(t1_stack) == pytest.approx(ROOT_ENTROPY, abs=1e-12)

    def test_root_ood_score_one_hot_and_uniform(self):
        one_hot = ProbabilityStack(probs=(np.array([1.0, 0.0, 0.0, 0.0, 0.0]),))
        uniform = ProbabilityStack(probs=(np.full(7, 1 / 7),))
        assert root_ood_score(one_hot) == 0.0
        assert root_ood_score(uniform) == pytest.approx(math.log(7), abs=1e-12)


class TestConditionalFor:
    def test_compprob_at_A(self, t1, t1_index, t1_stack):
        cond = conditional_for(t1, t1_index, A, t1_stack, ScoreModel.COMPPROB)
        np.testing.assert_allclose(cond, [0.5, 0.2, 0.0, 0.3], atol=1e-12)

    def test_entcompprob_at_A(self, t1, t1_index, t1_stack):
        cond = conditional_for(t1, t1_index, A, t1_stack, ScoreModel.ENTCOMPPROB)
        np.testing.assert_allclose(cond, ENTCOMP_COND_A, atol=1e-12)

    def test_complogits_at_A(self, t1, t1_index, t1_logit_stack):
        cond = conditional_for(t1, t1_index, A, t1_logit_stack, ScoreModel.COMPLOGITS)
        np.testing.assert_allclose(cond, COMPLOGITS_COND_A, atol=1e-12)

    def test_complogits_requires_logits(self, t1, t1_index, t1_stack):
        with pytest.raises(MissingLogits):
            conditional_for(t1, t1_index, A, t1_stack, ScoreModel.COMPLOGITS)

    def test_degenerate_denominator_goes_uniform(self, t1, t1_index):
        # entropy model at a single-child node with all mass on that child:
        # s = log 1 = 0 with child renormalized; trigger instead via zero
        # child mass and zero score at a one-child node
        h = build_hierarchy([(0, "R", None), (1, "c", 0), (2, "x", 1), (3, "y", 0)])
        index = depth_class_index(h)
        stack = ProbabilityStack(probs=(np.array([0.0, 1.0]), np.array([0.0, 1.0])))
        with pytest.warns(DegenerateDenominator):
            cond = conditional_for(h, index, 1, stack, ScoreModel.ENTROPY)
        np.testing.assert_allclose(cond, [0.5, 0.5])

    def test_one_hot_child_forces_id(self, t1, t1_index):
        stack = ProbabilityStack(probs=(
            np.array([1.0, 0.0]), np.array([1.0, 0.0, 0.0, 0.0, 0.0])))
        for model in (ScoreModel.COMPPROB, ScoreModel.ENTROPY,
                      ScoreModel.MAXPROB, ScoreModel.ENTCOMPPROB):
            cond = conditional_for(t1, t1_index, A, stack, model)
            assert cond[-1] == pytest.approx(0.0, abs=1e-12)
            assert cond[0] == pytest.approx(1.0, abs=1e-12)

    def test_root_ood_override(self, t1, t1_index, t1_stack):
        cond = conditional_for(t1, t1_index, R, t1_stack, ScoreModel.COMPPROB,
                               root_ood=True)
        s = ROOT_ENTROPY
        np.testing.assert_allclose(
            cond, [0.7 / (s + 1), 0.3 / (s + 1), s / (s + 1)], atol=1e-12)

    def test_without_root_flag_compprob_root_ood_is_zero(self, t1, t1_index, t1_stack):
        cond = conditional_for(t1, t1_index, R, t1_stack, ScoreModel.COMPPROB)
        assert cond[-1] == 0.0

    def test_complogits_root_outside_sum_is_empty(self, t1, t1_index, t1_logit_stack):
        # no depth-1 class sits outside the root's children, so the literal
        # outside-logit sum is 0.0 and the root ood entry gets weight exp(0)
        cond = conditional_for(t1, t1_index, R, t1_logit_stack, ScoreModel.COMPLOGITS)
        l1 = t1_logit_stack.logits_at(1)
        z = np.exp(np.concatenate([l1, [0.0]]))
        np.testing.assert_allclose(cond, z / z.sum(), atol=1e-12)
        assert cond[-1] > 0.0

    def test_single_child_root_tree(self):
        # a root with one child forces a one-class depth-1 vector; every
        # model must still emit a valid two-slot conditional at the root
        h = build_hierarchy([(0, "R", None), (1, "A", 0), (2, "x", 1), (3, "y", 1)])
        index = depth_class_index(h)
        stack = ProbabilityStack(
            probs=(np.array([1.0]), np.array([0.6, 0.4])),
            logits=(np.array([0.0]), np.log(np.array([0.6, 0.4]))))
        for model in ScoreModel:
            cond = conditional_for(h, index, 0, stack, model)
            assert cond.shape == (2,)
            assert cond.min() >= 0.0
            assert abs(cond.sum() - 1.0) < 1e-9
        # the probability-based models see zero uncertainty at the root
        for model in (ScoreModel.COMPPROB, ScoreModel.MAXPROB):
            cond = conditional_for(h, index, 0, stack, model)
            np.testing.assert_allclose(cond, [1.0, 0.0], atol=1e-12)

    def test_all_models_sum_to_one(self):
        rng = np.random.default_rng(41)
        for _ in range(30):
            h = random_tree(rng, int(rng.integers(3, 60)))
            if h.max_depth < 1:
                continue
            index = depth_class_index(h)
            stack = random_stack(index, rng)
            for model in ScoreModel:
                for root_ood in (False, True):
                    table = build_conditional_table(h, index, stack, model,
                                                    root_ood=root_ood)
                    for c, cond in table.entries.items():
                        assert cond.min() >= 0.0
                        assert abs(cond.sum() - 1.0) < 1e-9, (model, c)

    def test_compprob_partition_identity(self):
        # complement + child mass is exactly the depth-d simplex mass
        rng = np.random.default_rng(43)
        for _ in range(20):
            h = random_tree(rng, int(rng.integers(3, 50)))
            if h.max_depth < 1:
                continue
            index = depth_class_index(h)
            stack = random_stack(index, rng, with_logits=False)
            for c in h.internal_nodes:
                d = h.depth(c) + 1
                child_mass = sum(stack.probs_at(d)[index.col(d, ch)]
                                 for ch in h.children(c))
                score = comp_prob_score(h, index, c, stack)
                # pre-clamp identity; rows are normalized so mass <= 1
                assert score + child_mass == pytest.approx(1.0, abs=1e-9)


class TestStackValidation:
    def test_good_stack(self, t1_index, t1_stack):
        t1_stack.validate(t1_index)

    def test_bad_row_sum(self, t1_index):
        from treeood.errors import RowSumViolation
        stack = ProbabilityStack(probs=(
            np.array([0.7, 0.2]), np.array([0.5, 0.2, 0.0, 0.2, 0.1])))
        with pytest.raises(RowSumViolation):
            stack.validate(t1_index)

    def test_inconsistent_logits(self, t1_index):
        stack = ProbabilityStack(
            probs=(np.array([0.7, 0.3]), np.array([0.5, 0.2, 0.0, 0.2, 0.1])),
            logits=(np.array([0.0, 0.0]), np.array([5.0, 0.0, 0.0, 0.0, 0.0])))
        with pytest.raises(ValueError):
            stack.validate(t1_index)

    def test_wrong_depth_count(self, t1_index):
        stack = ProbabilityStack(probs=(np.array([0.7, 0.3]),))
        with pytest.raises(MissingDepth):
            stack.validate(t1_index)
