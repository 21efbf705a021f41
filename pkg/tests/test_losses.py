import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gazefit import losses as L
from gazefit.vergence import GazeRay, VergenceSolution, solve_vergence, vergence


def sol(k_l, k_r):
    z = np.zeros(3)
    return VergenceSolution(z, z, z, 0.0, k_l, k_r, 0.0)


def test_norm_pow_examples():
    assert L.norm_pow(np.array([3.0, 4.0]), 2, 2) == 25.0
    assert L.norm_pow(np.array([0.5]), 1, 4) == 0.0625
    for q in (1, 2):
        for p in (1, 2, 4):
            assert L.norm_pow(np.zeros(3), q, p) == 0.0
    with pytest.raises(ValueError):
        L.norm_pow(np.ones(2), 3, 1)


def test_origin_examples():
    gt = np.array([[0.0, 0.0, 1.0], [0.06, 0.0, 1.0]])
    assert L.loss_origin(gt[0], gt[1], gt) == 0.0
    off = np.array([0.2, -0.3, 0.0])
    assert L.loss_origin(gt[0] + off, gt[1] - off, gt) == pytest.approx(1.0)
    assert L.loss_origin(gt[0] + off, gt[1] - off, gt, power=4) == pytest.approx(0.125)
    # single-point form compares the midpoint
    assert L.loss_origin(gt[0] + off, gt[1] + off, gt.mean(axis=0)) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        L.loss_origin(gt[0], gt[1], np.zeros(2))


def test_landmark_examples():
    gt = np.random.default_rng(0).uniform(0, 600, size=(31, 2))
    assert L.loss_landmark(gt, gt) == 0.0
    assert L.loss_landmark(gt + [1.0, 0.0], gt) == pytest.approx(31.0)
    one = gt.copy()
    one[4] += [3.0, 4.0]
    assert L.loss_landmark(one, gt) == pytest.approx(25.0)
    with pytest.raises(ValueError):
        L.loss_landmark(gt[:30], gt)


def test_target_examples():
    t = np.array([0.1, 0.2, 1.0])
    assert L.loss_target(t, t) == 0.0
    assert L.loss_target(t + [1, 1, 0], t) == pytest.approx(2.0)
    assert L.loss_target(t + [1, 0, 0], t, power=4) == pytest.approx(1.0)


def test_skew_examples():
    s2 = np.sqrt(0.5)
    meet = solve_vergence(GazeRay(np.array([-1.0, 0, 0]), np.array([s2, 0, s2])), GazeRay(np.array([1.0, 0, 0]), np.array([-s2, 0, s2])))
    assert L.loss_skew(meet) == pytest.approx(0.0, abs=1e-30)
    skew = solve_vergence(GazeRay(np.array([-1.0, 0, 0]), np.array([0, 0, 1.0])), GazeRay(np.array([1.0, 0, 0]), np.array([0, s2, s2])))
    assert L.loss_skew(skew) == pytest.approx(4.0)
    par = vergence(GazeRay(np.array([-1.0, 0, 0]), np.array([0, 0, 1.0])), GazeRay(np.array([1.0, 0, 0]), np.array([0, 0, 1.0])))
    assert L.loss_skew(par) == pytest.approx(4.0)


def test_gaze_examples():
    gt = np.array([0.1, -0.2, 0.05, 0.3])
    assert L.loss_gaze(gt, gt) == 0.0
    assert L.loss_gaze(gt + 0.1, gt) == pytest.approx(0.4)
    one = gt.copy()
    one[2] += 0.2
    assert L.loss_gaze(one, gt, power=4) == pytest.approx(0.0016)


def test_reg_examples():
    assert L.loss_reg(np.zeros(3), np.zeros(2)) == 0.0
    assert L.loss_reg(np.array([1.0, 2.0]), np.zeros(0)) == pytest.approx(5.0)
    z_s, z_a = np.array([0.3, -1.0]), np.array([2.0])
    assert L.loss_reg(3 * z_s, 3 * z_a) == pytest.approx(9 * L.loss_reg(z_s, z_a))


def test_penalty_behind_examples():
    assert L.penalty_behind(sol(1.0, 1.0)) == 0.0
    assert L.penalty_behind(sol(-0.5, 2.0)) == pytest.approx(0.25)
    assert L.penalty_behind(sol(0.0, 0.0)) == 0.0


def test_combine_examples():
    vec = L.LossVector(0, 1, 2, 3, 4, 5, 6, active=L.COMPONENTS)
    assert L.combine(vec, L.LossWeights(pix=0, lm=0, o=0, t=1, skew=0, g=0, reg=0)) == 3.0
    assert L.combine(vec, L.LossWeights(pix=0, lm=0, o=0, t=0, skew=0, g=0, reg=0)) == 0.0
    assert L.combine(vec, L.LossWeights()) == 21.0


def test_inactive_components_ignored():
    vec = L.LossVector(0, 1, 2, 3, 4, 5, 6, active=("lm", "reg"))
    assert L.combine(vec, L.LossWeights()) == 7.0


def test_group_weights_multiply():
    vec = L.LossVector(0, 1, 2, 3, 4, 5, 6, active=L.COMPONENTS)
    w = L.LossWeights(group_weights={"g1": 2.0, "g2": 0.0, "g3": 0.5})
    assert L.combine(vec, w) == pytest.approx(2 * (1 + 6) + 0.5 * (2 + 3 + 4))


def test_weight_validation():
    with pytest.raises(ValueError):
        L.LossWeights(lm=-1.0)
    with pytest.raises(ValueError):
        L.LossWeights(pix=1.0)
    with pytest.raises(ValueError):
        L.LossWeights(group_weights={"g4": 1.0})
    with pytest.raises(ValueError):
        L.LossWeights.from_dict({"bogus": 1.0})


def test_weights_roundtrip():
    w = L.LossWeights(lm=0.3, t=2.5, group_weights={"g2": 0.1})
    assert L.LossWeights.from_dict(w.to_dict()) == w


weights = st.lists(st.floats(0, 10), min_size=6, max_size=6)


@settings(max_examples=100, deadline=None)
@given(weights, weights, st.floats(0, 3), st.floats(0, 3))
def test_combine_linear_in_weights(w1, w2, a, b):
    vec = L.LossVector(0, 1.5, 0.2, 3.0, 0.04, 5.0, 0.6)
    names = L.COMPONENTS[1:]
    W1, W2 = dict(zip(names, w1)), dict(zip(names, w2))
    mix = L.LossWeights(**{n: a * W1[n] + b * W2[n] for n in names})
    expected = a * L.combine(vec, L.LossWeights(**W1)) + b * L.combine(vec, L.LossWeights(**W2))
    assert L.combine(vec, mix) == pytest.approx(expected, rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=3, max_size=3).map(np.array))
def test_nonnegative_and_zero_at_truth(x):
    t = np.array([0.1, 0.2, 0.3])
    for p in (1, 4):
        assert L.loss_target(t + x, t, power=p) >= 0
        assert L.loss_target(t, t, power=p) == 0
