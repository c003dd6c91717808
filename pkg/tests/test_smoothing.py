"""Announced-jump smoothing of the additive drift: hand oracles + limit checks.

Threshold note: a drop qualifies when it is <= -1/i, so the chain with a
single -1/2 drop needs i >= 2 to trigger the smoothing.
"""

import random
from fractions import Fraction

import pytest

from follmer_lab.corpus import random_case, unary_chain
from follmer_lab.decompositions import doob_meyer, left_limit_smoothing
from follmer_lab.trees import FilteredTree, AdaptedProcess


def test_no_qualifying_jumps_is_identity():
    chain, z = unary_chain([1, 1, Fraction(1, 2)])
    add = doob_meyer(chain, z)
    for lag in (1, 2, 3):
        sm = left_limit_smoothing(chain, z, i=1, lag=lag)  # threshold -1: no jumps
        assert sm.jump_times == {"n2": []}
        assert sm.martingale is not None and sm.drift_adapted is not None
        for n in chain.iter_nodes():
            assert sm.martingale[n] == add.martingale[n]
            t = chain.depth[n]
            assert sm.drift_path["n2"][t] == add.drift.value_on(chain, n)
        assert sm.limit_report.ok


def test_halving_chain_hand_values():
    # Z = (1, 1, 1/2): drift (0, 0, -1/2); the -1/2 drop at t=2 qualifies at i=2
    chain, z = unary_chain([1, 1, Fraction(1, 2)])
    sm = left_limit_smoothing(chain, z, i=2, lag=1)
    assert sm.jump_times == {"n2": [2]}
    # hand evaluation of the two displayed sums with announce time 1:
    # smoothed martingale stays at 1; smoothed drift is -1/2 from time 1 on
    assert sm.martingale_path["n2"] == [1, 1, 1]
    assert sm.drift_path["n2"] == [0, Fraction(-1, 2), Fraction(-1, 2)]
    # at rho = 2 the reached value is M_2 + D^{s}_{1} = 1 - 1/2 = 1/2 = Z_2
    assert sm.martingale_path["n2"][2] + sm.drift_path["n2"][1] == Fraction(1, 2)
    # at rho = 1 the reached value is M_1 + D^{s}_{0} = 1 + 0 = 1
    assert sm.martingale_path["n2"][1] + sm.drift_path["n2"][0] == 1
    assert sm.limit_report.ok
    assert sm.limit_report.stuck == 0
    assert sm.limit_report.equal == sm.limit_report.positions


def test_lag_one_reaches_target_on_random_trees():
    rng = random.Random(31)
    for _ in range(60):
        tree, z = random_case(rng, max_depth=3, max_branching=2)
        for i in (1, 2, 3):
            sm = left_limit_smoothing(tree, z, i=i, lag=1)
            assert sm.limit_report.ok, sm.limit_report.mismatches
            # every non-stuck position is exact at lag 1
            assert (
                sm.limit_report.equal
                >= sm.limit_report.positions - sm.limit_report.stuck
            )
            # lag 1 is adapted: folding must succeed
            assert sm.martingale is not None
            assert sm.drift_adapted is not None


def test_smoothed_pair_sums_to_conditional_patch():
    # M^s + D^s equals Z outside announce windows and, inside a window,
    # the conditional expectation of Z at the announced jump time.
    chain, z = unary_chain([1, Fraction(3, 4), Fraction(1, 4), Fraction(1, 4)])
    sm = left_limit_smoothing(chain, z, i=2, lag=1)  # jump at t=2, announced at 1
    sums = [
        sm.martingale_path["n3"][t] + sm.drift_path["n3"][t] for t in range(4)
    ]
    assert sums[0] == z["n0"]  # before the announce: Z itself
    assert sums[1] == Fraction(1, 4)  # inside the window: E[Z at the jump | F_1]
    assert sums[2] == z["n2"]  # from the jump on: Z again
    assert sums[3] == z["n3"]


def test_consecutive_jumps_are_reported_stuck():
    # drops of -1/2 at t=1 and t=2: the second announce clamps onto the jump
    chain, z = unary_chain([1, Fraction(1, 2), Fraction(1, 8)])
    sm = left_limit_smoothing(chain, z, i=4, lag=1)
    assert sm.jump_times == {"n2": [1, 2]}
    assert sm.limit_report.stuck > 0
    assert sm.limit_report.ok  # stuck positions are excluded from the guarantee


def test_larger_lag_converges_down_to_limit():
    # lag larger than the distance to the previous jump clamps to it; the
    # reached value equals the target once the lag window collapses
    chain, z = unary_chain([1, 1, 1, Fraction(1, 2)])
    values = {}
    for lag in (3, 2, 1):
        sm = left_limit_smoothing(chain, z, i=2, lag=lag)
        values[lag] = (
            sm.martingale_path["n3"][3] + sm.drift_path["n3"][2],
            sm.martingale_path["n3"][2] + sm.drift_path["n3"][1],
        )
        assert sm.limit_report.ok
    # at the jump time rho=3 every lag reaches Z_3 (announce < jump in all cases)
    assert values[1][0] == values[2][0] == values[3][0] == Fraction(1, 2)


def test_branching_tree_with_random_jump_paths():
    # jumps qualifying on one branch only; exactness at lag 1 across the tree
    tree = FilteredTree(
        2,
        [
            {"id": "r", "parent": None},
            {"id": "a", "parent": "r", "prob": "1/2"},
            {"id": "b", "parent": "r", "prob": "1/2"},
            {"id": "aa", "parent": "a", "prob": "1/1"},
            {"id": "ba", "parent": "b", "prob": "1/2"},
            {"id": "bb", "parent": "b", "prob": "1/2"},
        ],
    )
    z = AdaptedProcess(
        {
            "r": Fraction(1),
            "a": Fraction(3, 2),
            "b": Fraction(1, 2),
            "aa": Fraction(3, 4),  # halving drop on the a-branch
            "ba": Fraction(3, 4),
            "bb": Fraction(1, 4),
        }
    )
    sm = left_limit_smoothing(tree, z, i=2, lag=1)
    assert sm.limit_report.ok, sm.limit_report.mismatches
    assert sm.martingale is not None  # adapted at lag 1


def test_invalid_threshold_rejected():
    chain, z = unary_chain([1, 1])
    with pytest.raises(ValueError):
        left_limit_smoothing(chain, z, i=0)
    with pytest.raises(ValueError):
        left_limit_smoothing(chain, z, i=2, lag=0)
