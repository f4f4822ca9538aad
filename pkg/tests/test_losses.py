"""Loss values against hand evaluations of their definitions."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from tinyrecurse import losses
from tinyrecurse.tape import Tensor, backward

from helpers import central_difference, grad_check_floor, max_rel_err


class TestStablemax:
    def test_uniform_two_way(self):
        # s([0,0]) = [1,1], p0 = 0.5 -> ln 2
        logits = Tensor(np.array([[[0.0, 0.0]]]))
        loss = losses.stablemax_cross_entropy(logits, np.array([[0]]))
        assert math.isclose(float(loss.data), math.log(2.0), rel_tol=1e-12)

    def test_scalar_evaluation(self):
        # s([1,-1]) = [2, 0.5], p0 = 0.8 -> -ln 0.8 = 0.22314...
        logits = Tensor(np.array([[[1.0, -1.0]]]))
        loss = losses.stablemax_cross_entropy(logits, np.array([[0]]))
        assert math.isclose(float(loss.data), 0.22314355131420976, rel_tol=1e-12)

    def test_mask_excludes_positions(self):
        logits_a = np.array([[[1.0, -1.0], [5.0, 5.0]]])
        logits_b = np.array([[[1.0, -1.0], [-3.0, 9.0]]])
        mask = np.array([[False, True]])  # second position ignored
        ta = np.array([[0, 0]])
        la = losses.stablemax_cross_entropy(Tensor(logits_a), ta, ignore_mask=mask)
        lb = losses.stablemax_cross_entropy(Tensor(logits_b), ta, ignore_mask=mask)
        assert float(la.data) == float(lb.data)

    def test_all_masked_raises(self):
        logits = Tensor(np.zeros((1, 2, 3)))
        with pytest.raises(ValueError):
            losses.stablemax_cross_entropy(logits, np.zeros((1, 2), dtype=int), ignore_mask=np.ones((1, 2), dtype=bool))

    def test_target_out_of_vocab_raises(self):
        with pytest.raises(ValueError):
            losses.stablemax_cross_entropy(Tensor(np.zeros((1, 1, 3))), np.array([[3]]))

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((2, 5, 4))
        targets = rng.integers(0, 4, size=(2, 5))
        mask = rng.random((2, 5)) < 0.3
        mask[0, 0] = False  # keep at least one position
        t = Tensor(data, requires_grad=True)
        loss = losses.stablemax_cross_entropy(t, targets, ignore_mask=mask)
        backward(loss)
        fd = central_difference(
            lambda: float(losses.stablemax_cross_entropy(Tensor(data), targets, ignore_mask=mask).data),
            [data],
        )
        assert max_rel_err(t.grad, fd[0], grad_check_floor(fd)) < 1e-4

    @given(arrays(np.float64, (3, 7), elements=st.floats(-30, 30)))
    @settings(max_examples=60, deadline=None)
    def test_probabilities_form_a_simplex(self, logits):
        p = losses.stablemax_probs(logits)
        assert np.all(p > 0)
        assert np.all(np.abs(p.sum(axis=-1) - 1.0) < 1e-9)

    def test_loss_nonnegative(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            logits = Tensor(rng.standard_normal((2, 3, 5)) * 10)
            targets = rng.integers(0, 5, size=(2, 3))
            assert float(losses.stablemax_cross_entropy(logits, targets).data) >= 0.0


class TestTrmHaltLoss:
    def test_zero_logit_match_target(self):
        # BCE at p=0.5 -> ln 2
        q = Tensor(np.zeros((1, 1)))
        y = np.array([[1, 2, 3]])
        loss = losses.trm_halt_loss(q, y, y.copy())
        assert math.isclose(float(loss.data), math.log(2.0), rel_tol=1e-12)

    def test_saturated_correct_goes_to_zero(self):
        q = Tensor(np.full((1, 1), 50.0))
        y = np.array([[1, 2]])
        assert float(losses.trm_halt_loss(q, y, y.copy()).data) < 1e-20

    def test_one_wrong_cell_is_not_a_match(self):
        y_true = np.arange(81).reshape(1, 81) % 5
        y_hat = y_true.copy()
        y_hat[0, 40] = (y_hat[0, 40] + 1) % 5
        assert not losses.exact_match_rows(y_hat, y_true)[0]
        # saturated halt logit now incurs a large penalty
        q = Tensor(np.full((1, 1), 50.0))
        assert float(losses.trm_halt_loss(q, y_hat, y_true).data) > 10

    def test_grad_matches_finite_differences(self):
        rng = np.random.default_rng(2)
        qdata = rng.standard_normal((4, 1))
        y_hat = rng.integers(0, 3, (4, 6))
        y_true = y_hat.copy()
        y_true[2] = (y_true[2] + 1) % 3
        q = Tensor(qdata, requires_grad=True)
        backward(losses.trm_halt_loss(q, y_hat, y_true))
        fd = central_difference(
            lambda: float(losses.trm_halt_loss(Tensor(qdata), y_hat, y_true).data), [qdata]
        )
        assert max_rel_err(q.grad, fd[0], grad_check_floor(fd)) < 1e-4


class TestHrmActLosses:
    def test_last_step_continue_target_is_half(self):
        # sigmoid(next_q0 = 0) = 0.5; with q1 = 0 the continue BCE is ln 2
        q = Tensor(np.zeros((1, 2)))
        y = np.array([[1]])
        wrong = np.array([[0]])
        next_q = np.zeros((1, 2))
        loss = losses.hrm_act_losses(q, y, wrong, next_q, last_step=True)
        # halt term: 0.5*BCE(0, 0) = 0.5*ln2 ; continue term: 0.5*BCE(0, 0.5) = 0.5*ln2
        assert math.isclose(float(loss.data), math.log(2.0), rel_tol=1e-12)

    def test_saturated_terms_vanish(self):
        y = np.array([[3, 1]])
        q = Tensor(np.array([[60.0, 60.0]]))
        next_q = np.array([[60.0, -60.0]])  # continue target sigmoid(60) ~ 1
        loss = losses.hrm_act_losses(q, y, y.copy(), next_q, last_step=False)
        assert float(loss.data) < 1e-12

    def test_bootstrap_uses_max_when_not_last(self):
        q = Tensor(np.array([[0.0, 1.0]]))
        y = np.array([[1]])
        next_q = np.array([[-4.0, 2.0]])
        not_last = losses.hrm_act_losses(q, y, y.copy(), next_q, last_step=False)
        last = losses.hrm_act_losses(q, y, y.copy(), next_q, last_step=True)

        def sig(u):
            return 1.0 / (1.0 + math.exp(-u))

        def bce(logit, t):
            return max(logit, 0) - logit * t + math.log1p(math.exp(-abs(logit)))

        # halt term identical; continue targets are sigmoid(max(nq)) vs sigmoid(nq0)
        expect_not_last = 0.5 * bce(0.0, 1.0) + 0.5 * bce(1.0, sig(2.0))
        expect_last = 0.5 * bce(0.0, 1.0) + 0.5 * bce(1.0, sig(-4.0))
        assert math.isclose(float(not_last.data), expect_not_last, rel_tol=1e-12)
        assert math.isclose(float(last.data), expect_last, rel_tol=1e-12)

    def test_no_gradient_flows_into_next_q(self):
        # next_q is a plain array: only q can receive gradient
        q = Tensor(np.random.default_rng(0).standard_normal((3, 2)), requires_grad=True)
        y = np.ones((3, 4), dtype=int)
        next_q = np.random.default_rng(1).standard_normal((3, 2))
        loss = losses.hrm_act_losses(q, y, y.copy(), next_q, last_step=np.array([True, False, False]))
        backward(loss)
        assert q.grad is not None and q.grad.shape == (3, 2)


class TestHaltingDecision:
    def test_trm_threshold(self):
        sig = np.array([[0.1], [-0.1], [0.0]])
        assert losses.halting_decision(sig, "trm").tolist() == [True, False, False]

    def test_hrm_compare(self):
        sig = np.array([[0.2, 0.3], [0.3, 0.2]])
        assert losses.halting_decision(sig, "hrm").tolist() == [False, True]

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            losses.halting_decision(np.zeros((1, 1)), "other")
