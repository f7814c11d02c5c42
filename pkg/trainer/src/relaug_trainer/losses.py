"""Training objectives: contrastive alignment and the two task losses."""

from __future__ import annotations

import torch


def _unit(x: torch.Tensor, what: str) -> torch.Tensor:
    norm = x.norm(dim=-1, keepdim=True)
    if bool((norm == 0).any()):
        raise ValueError(f"{what} contains a zero-norm vector; cosine is undefined")
    return x / norm


def infonce_loss(
    anchor: torch.Tensor,      # (d,)
    positive: torch.Tensor,    # (d,)
    negatives: torch.Tensor,   # (N, d), N >= 1
    tau: float,
) -> torch.Tensor:
    """-log( exp(cos(a, p)/tau) / sum over the positive and N negatives ).

    The denominator includes the positive itself, so with all similarities
    equal the loss is exactly log(N + 1).
    """
    if negatives.ndim != 2 or negatives.shape[0] < 1:
        raise ValueError("need at least one negative sample")
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    a = _unit(anchor, "anchor")
    p = _unit(positive, "positive")
    n = _unit(negatives, "negatives")
    pos_sim = (a * p).sum() / tau
    neg_sim = (n @ a) / tau
    logits = torch.cat([pos_sim.reshape(1), neg_sim])
    return torch.logsumexp(logits, dim=0) - pos_sim


def binary_cross_entropy_logits(logits: torch.Tensor, targets: torch.Tensor) -> torch.Tensor:
    """Mean sigmoid cross-entropy, numerically stable in the logit domain."""
    return (logits.clamp_min(0) - logits * targets + torch.log1p(torch.exp(-logits.abs()))).mean()


def l1_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean absolute error."""
    return (pred - target).abs().mean()
