"""
Loss terms of the detector and their weighted combination.

The total loss is ``λ_rpn·L_rpn + λ_r·L_r + λ_bb·L_bb + λ_mask·L_mask``; all weights
default to 1.
"""

import numpy as np

EPS = 1e-12


def combine_losses(l_rpn: float, l_r: float, l_bb: float, l_mask: float,
                   lambda_rpn: float = 1.0, lambda_r: float = 1.0,
                   lambda_bb: float = 1.0, lambda_mask: float = 1.0) -> float:
    terms = (l_rpn, l_r, l_bb, l_mask, lambda_rpn, lambda_r, lambda_bb, lambda_mask)
    if any(t < 0 for t in terms):
        raise ValueError("losses and weights must be non-negative")
    return lambda_rpn * l_rpn + lambda_r * l_r + lambda_bb * l_bb + lambda_mask * l_mask


def cross_entropy(probs, targets) -> float:
    """Mean categorical cross entropy of (n, k) probabilities against integer targets"""
    probs = np.atleast_2d(np.asarray(probs, dtype=np.float64))
    targets = np.asarray(targets, dtype=np.int64).reshape(-1)
    picked = probs[np.arange(len(targets)), targets]
    return float(-np.log(np.clip(picked, EPS, 1.0)).mean())


def smooth_l1(pred, target, beta: float = 1.0) -> float:
    """Smooth L1 summed over box coordinates, averaged over boxes"""
    diff = np.abs(np.asarray(pred, dtype=np.float64) - np.asarray(target, dtype=np.float64))
    loss = np.where(diff < beta, 0.5 * diff ** 2 / beta, diff - 0.5 * beta)
    return float(np.atleast_2d(loss).sum(axis=-1).mean())


def binary_cross_entropy(probs, targets) -> float:
    """Mean per-pixel binary cross entropy of mask probabilities"""
    p = np.clip(np.asarray(probs, dtype=np.float64), EPS, 1.0 - EPS)
    t = np.asarray(targets, dtype=np.float64)
    return float(-(t * np.log(p) + (1.0 - t) * np.log(1.0 - p)).mean())
