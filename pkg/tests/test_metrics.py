import numpy as np
import pytest

from UmAuc.Exceptions import InvalidParameterError
from UmAuc.Metrics.Auc import ScoredSample, UndefinedAucError, auc_exact, auc_of_samples, label_aucs, macro_auc
from UmAuc.Metrics.Risk import (
    SQUARE, ZERO_ONE, EmptyBagError, SurrogateLoss, empirical_label_risk, empirical_pn_risk,
    empirical_u2_risk, empirical_um_risk)
from UmAuc.Reduction import build_plan

## Counts every (positive, negative) pair, with half credit for ties.
def brute_force_auc(scores, labels) -> float:
    positives = scores[labels == 1]
    negatives = scores[labels == -1]
    differences = positives[:, None] - negatives[None, :]
    return float((np.sum(differences > 0) + 0.5 * np.sum(differences == 0)) / differences.size)

def brute_force_pairwise_risk(upper_scores, lower_scores, loss) -> float:
    total = 0.0
    for upper_score in upper_scores:
        for lower_score in lower_scores:
            total += float(loss(upper_score - lower_score))
    return total / (len(upper_scores) * len(lower_scores))

## \return Scores and +1/-1 labels with both classes present.
def random_scored_set(rng, size: int, with_ties: bool = False):
    scores = rng.standard_normal(size)
    if with_ties:
        scores = np.round(scores, 1)
    labels = rng.choice([1, -1], size = size)
    labels[0], labels[1] = 1, -1
    return scores, labels

## AUC.
def test_perfect_ranking():
    assert auc_of_samples([ScoredSample(0.9, 1), ScoredSample(0.1, -1)]) == 1.0
    assert auc_exact([0.1, 0.9], [1, -1]) == 0.0

def test_all_ties_give_one_half():
    rng = np.random.default_rng(0)
    labels = rng.choice([1, -1], size = 30)
    labels[:2] = [1, -1]
    assert auc_exact(np.full(30, 0.25), labels) == 0.5

def test_auc_matches_the_pair_count():
    rng = np.random.default_rng(1)
    scores, labels = random_scored_set(rng, 50)
    assert abs(auc_exact(scores, labels) - brute_force_auc(scores, labels)) <= 1e-12

def test_auc_matches_the_pair_count_on_many_sets():
    rng = np.random.default_rng(2)
    for index in range(1000):
        size = int(rng.integers(2, 201))
        scores, labels = random_scored_set(rng, size, with_ties = (index % 2 == 0))
        assert abs(auc_exact(scores, labels) - brute_force_auc(scores, labels)) <= 1e-12

def test_auc_is_invariant_under_increasing_maps():
    rng = np.random.default_rng(3)
    scores, labels = random_scored_set(rng, 80, with_ties = True)
    assert auc_exact(np.exp(scores), labels) == auc_exact(scores, labels)
    assert auc_exact(3.0 * scores - 7.0, labels) == auc_exact(scores, labels)

def test_auc_rejects_bad_input():
    with pytest.raises(UndefinedAucError):
        auc_exact([0.1, 0.2, 0.3], [1, 1, 1])
    with pytest.raises(InvalidParameterError):
        auc_exact([0.1, 0.2], [1, 0])
    with pytest.raises(InvalidParameterError):
        auc_exact([0.1, np.nan], [1, -1])
    with pytest.raises(InvalidParameterError):
        auc_exact([0.1, 0.2, 0.3], [1, -1])
    with pytest.raises(InvalidParameterError):
        ScoredSample(np.inf, 1)
    with pytest.raises(InvalidParameterError):
        ScoredSample(0.5, 0)

## PN AND U^2 RISKS.
def test_pn_risk_examples():
    assert empirical_pn_risk([2.0, 3.0, -1.0], [1, 1, -1], ZERO_ONE) == 0.0
    # Pairs (1, 0) and (0, 0): (1 - 1 + 0)^2 and (1 - 0 + 0)^2.
    assert empirical_pn_risk([1.0, 0.0, 0.0], [1, 1, -1], SQUARE) == pytest.approx(0.5, abs = 1e-15)
    with pytest.raises(UndefinedAucError):
        empirical_pn_risk([1.0, 2.0], [-1, -1], SQUARE)

def test_zero_one_risk_complements_the_auc():
    rng = np.random.default_rng(4)
    for _ in range(20):
        scores, labels = random_scored_set(rng, 40)
        assert abs(empirical_pn_risk(scores, labels, ZERO_ONE) + auc_exact(scores, labels) - 1.0) <= 1e-12

def test_zero_one_loss_gives_ties_full_credit():
    # The risk follows l01(z) = [z < 0], while the metric gives ties half credit.
    assert empirical_pn_risk([0.5, 0.5], [1, -1], ZERO_ONE) == 0.0
    assert auc_exact([0.5, 0.5], [1, -1]) == 0.5

def test_surrogate_losses():
    assert ZERO_ONE(-0.1) == 1.0
    assert ZERO_ONE(0.0) == 0.0
    assert SQUARE(0.25) == 0.5625
    assert SurrogateLoss(SurrogateLoss.Kind.MARGIN_SQUARE, margin = 2.0)(0.5) == 2.25
    with pytest.raises(InvalidParameterError):
        SurrogateLoss(SurrogateLoss.Kind.MARGIN_SQUARE, margin = 0.0)
    # Every surrogate bounds the zero-one loss from above.
    z = np.linspace(-3.0, 3.0, 121)
    assert np.all(SQUARE(z) >= ZERO_ONE(z))

def test_u2_risk_examples():
    assert empirical_u2_risk(np.ones(5), np.zeros(4), ZERO_ONE) == 0.0
    assert empirical_u2_risk([0.3], [0.7], SQUARE) == pytest.approx(1.96, abs = 1e-12)
    with pytest.raises(EmptyBagError):
        empirical_u2_risk([], [0.7], SQUARE)

def test_u2_risk_matches_the_double_loop():
    rng = np.random.default_rng(5)
    upper_scores, lower_scores = rng.standard_normal(30), rng.standard_normal(30)
    for loss in (SQUARE, ZERO_ONE):
        assert abs(empirical_u2_risk(upper_scores, lower_scores, loss) - brute_force_pairwise_risk(upper_scores, lower_scores, loss)) <= 1e-12

## U^m RISK.
def test_two_bag_um_risk_is_the_u2_risk():
    rng = np.random.default_rng(6)
    bag_scores = [rng.standard_normal(12), rng.standard_normal(9)]
    weights = np.array([[0.0, 1.0], [0.0, 0.0]])
    assert empirical_um_risk(bag_scores, weights, SQUARE) == pytest.approx(empirical_u2_risk(*bag_scores, SQUARE), abs = 1e-15)

def test_um_risk_with_reduction_weights_is_the_mean_label_risk():
    rng = np.random.default_rng(7)
    sizes = [15, 15, 15]
    bag_scores = [rng.standard_normal(size) for size in sizes]
    scores = np.concatenate(bag_scores)
    bag_ids = np.repeat([1, 2, 3], sizes)
    weights = build_plan(sizes).pair_weights
    label_risks = [empirical_label_risk(scores, bag_ids, k, SQUARE) for k in (1, 2)]
    assert abs(empirical_um_risk(bag_scores, weights, SQUARE) - np.mean(label_risks)) <= 1e-12

def test_constant_scores_have_no_zero_one_risk():
    bag_scores = [np.full(4, 0.3), np.full(5, 0.3), np.full(6, 0.3)]
    assert empirical_um_risk(bag_scores, build_plan([4, 5, 6]).pair_weights, ZERO_ONE) == 0.0

def test_um_risk_is_linear_in_the_weights():
    rng = np.random.default_rng(8)
    bag_scores = [rng.standard_normal(size) for size in (5, 6, 7, 8)]
    first = np.triu(rng.uniform(size = (4, 4)), k = 1)
    second = np.triu(rng.uniform(size = (4, 4)), k = 1)
    combined = empirical_um_risk(bag_scores, 2.0 * first + 3.0 * second, SQUARE)
    separate = 2.0 * empirical_um_risk(bag_scores, first, SQUARE) + 3.0 * empirical_um_risk(bag_scores, second, SQUARE)
    assert combined == pytest.approx(separate, rel = 1e-12)

def test_um_risk_rejects_bad_weights():
    bag_scores = [np.zeros(2), np.ones(2)]
    with pytest.raises(InvalidParameterError):
        empirical_um_risk(bag_scores, np.array([[0.0, -1.0], [0.0, 0.0]]), SQUARE)
    with pytest.raises(InvalidParameterError):
        empirical_um_risk(bag_scores, np.zeros((2, 2)), SQUARE)
    with pytest.raises(InvalidParameterError):
        empirical_um_risk(bag_scores, np.ones((3, 3)), SQUARE)

## MACRO AUC.
def test_two_bag_macro_auc_is_the_head_auc():
    rng = np.random.default_rng(9)
    scores = rng.standard_normal(20)
    bag_ids = np.repeat([1, 2], 10)
    assert macro_auc(scores[:, None], bag_ids) == auc_exact(scores, np.where(bag_ids == 1, 1, -1))

def test_perfect_heads_give_a_macro_auc_of_one():
    bag_ids = np.repeat([1, 2, 3], 4)
    head_scores = np.stack([(bag_ids <= k).astype(float) for k in (1, 2)], axis = 1)
    assert macro_auc(head_scores, bag_ids) == 1.0

def test_macro_auc_is_the_mean_of_the_head_aucs():
    rng = np.random.default_rng(10)
    bag_ids = np.repeat([1, 2, 3, 4], [5, 8, 6, 7])
    head_scores = rng.standard_normal((len(bag_ids), 3))
    expected = [brute_force_auc(head_scores[:, k - 1], np.where(bag_ids <= k, 1, -1)) for k in (1, 2, 3)]
    assert np.allclose(label_aucs(head_scores, bag_ids), expected, rtol = 0.0, atol = 1e-12)
    assert abs(macro_auc(head_scores, bag_ids) - np.mean(expected)) <= 1e-12
