"""Objective functions against hand-computed and loop-oracle values."""

from __future__ import annotations

import math

import pytest
import torch

from relaug_trainer.losses import binary_cross_entropy_logits, infonce_loss, l1_loss


def vec(*xs):
    return torch.tensor(xs, dtype=torch.float64)


class TestInfoNce:
    def test_orthogonal_negative_hand_value(self):
        loss = infonce_loss(vec(1, 0), vec(1, 0), vec(0, 1).reshape(1, 2), tau=1.0)
        assert abs(float(loss) - math.log(1 + math.exp(-1))) < 1e-9

    def test_negatives_identical_to_positive(self):
        for n in (1, 3, 7):
            negatives = vec(1, 0).repeat(n, 1)
            loss = infonce_loss(vec(1, 0), vec(1, 0), negatives, tau=0.37)
            assert abs(float(loss) - math.log(n + 1)) < 1e-9

    def test_huge_temperature_flattens(self):
        loss = infonce_loss(vec(1, 0), vec(1, 0), vec(-1, 0).reshape(1, 2), tau=1e9)
        assert abs(float(loss) - math.log(2)) < 1e-6

    def test_scale_invariance_of_cosine(self):
        a = infonce_loss(vec(2, 0), vec(5, 0), 3 * vec(0, 1).reshape(1, 2), tau=1.0)
        b = infonce_loss(vec(1, 0), vec(1, 0), vec(0, 1).reshape(1, 2), tau=1.0)
        assert torch.allclose(a, b)

    def test_zero_norm_rejected(self):
        with pytest.raises(ValueError):
            infonce_loss(vec(0, 0), vec(1, 0), vec(0, 1).reshape(1, 2), tau=1.0)
        with pytest.raises(ValueError):
            infonce_loss(vec(1, 0), vec(1, 0), vec(0, 0).reshape(1, 2), tau=1.0)

    def test_negative_order_invariant(self):
        g = torch.Generator().manual_seed(3)
        negatives = torch.randn(6, 4, generator=g, dtype=torch.float64)
        a, p = vec(1, 0, 0, 0), vec(0.9, 0.1, 0, 0)
        base = infonce_loss(a, p, negatives, tau=0.5)
        flipped = infonce_loss(a, p, negatives.flip(0), tau=0.5)
        assert abs(float(base) - float(flipped)) < 1e-12

    def test_strictly_decreasing_in_alignment(self):
        negatives = torch.randn(4, 3, generator=torch.Generator().manual_seed(1),
                                dtype=torch.float64)
        anchor = vec(1, 0, 0)
        previous = None
        for t in (0.0, 0.3, 0.7, 1.0):
            # rotate the positive toward the anchor as t grows
            positive = vec(math.cos(1.0 - t), math.sin(1.0 - t), 0.0)
            loss = float(infonce_loss(anchor, positive, negatives, tau=0.5))
            if previous is not None:
                assert loss < previous
            previous = loss

    def test_validation(self):
        with pytest.raises(ValueError):
            infonce_loss(vec(1, 0), vec(1, 0), vec(0, 1).reshape(1, 2), tau=0.0)
        with pytest.raises(ValueError):
            infonce_loss(vec(1, 0), vec(1, 0), torch.zeros(0, 2), tau=1.0)


class TestTaskLosses:
    def test_bce_zero_logits_is_ln2(self):
        for labels in ([0.0, 1.0], [1.0, 1.0, 0.0], [0.0]):
            y = torch.tensor(labels, dtype=torch.float64)
            loss = binary_cross_entropy_logits(torch.zeros_like(y), y)
            assert abs(float(loss) - math.log(2)) < 1e-12

    def test_bce_matches_loop_oracle(self):
        g = torch.Generator().manual_seed(11)
        logits = torch.randn(40, generator=g, dtype=torch.float64) * 3
        targets = (torch.rand(40, generator=g, dtype=torch.float64) > 0.5).double()
        total = 0.0
        for x, y in zip(logits.tolist(), targets.tolist()):
            sig = 1.0 / (1.0 + math.exp(-x))
            total += -(y * math.log(sig) + (1 - y) * math.log(1 - sig))
        want = total / len(logits)
        got = float(binary_cross_entropy_logits(logits, targets))
        assert abs(got - want) < 1e-7

    def test_l1_identity_is_zero(self):
        x = torch.tensor([1.5, -2.0, 0.0])
        assert float(l1_loss(x, x)) == 0.0

    def test_l1_matches_loop_oracle(self):
        g = torch.Generator().manual_seed(12)
        pred = torch.randn(25, generator=g, dtype=torch.float64)
        target = torch.randn(25, generator=g, dtype=torch.float64)
        want = sum(abs(a - b) for a, b in zip(pred.tolist(), target.tolist())) / 25
        assert abs(float(l1_loss(pred, target)) - want) < 1e-7
