"""Loss functions for the observe and discriminate training stages.

The rotation loss averages cross-entropy over the four rotated copies of
one image; the seen/unseen loss is plain 2-way cross-entropy, with class
balance coming from equal-sized seen and unseen sets.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError
from . import tensor as T
from .tensor import Tensor

SEEN_CLASS = 0
UNSEEN_CLASS = 1

# Four-way rotation targets by quarter turn; in binary mode {0, 90} form
# one class and {180, 270} the other.
FOUR_WAY_TARGETS = (0, 1, 2, 3)
BINARY_TARGETS = (0, 0, 1, 1)

PRETEXT_MODES = ("four_way", "binary")


def one_hot(indices, num_classes) -> np.ndarray:
    eye = np.eye(num_classes)
    return eye[np.asarray(indices, dtype=int)]


def softmax_cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Batch-mean cross-entropy of log-sum-exp-stabilized softmax logits.

    targets is a probability matrix the same shape as logits (rows sum
    to 1); one-hot rows are the common case.
    """
    z = logits.data
    targets = np.asarray(targets, dtype=np.float64)
    if z.ndim != 2:
        raise ValueError(f"logits must be 2-d, got shape {z.shape}")
    if targets.shape != z.shape:
        raise ValueError(f"targets shape {targets.shape} != logits shape {z.shape}")
    if not np.isfinite(z).all():
        raise ValueError("non-finite logits")
    if not np.allclose(targets.sum(axis=1), 1.0, atol=1e-9):
        raise ValueError("target rows must sum to 1")
    n = z.shape[0]
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    expz = np.exp(shifted)
    sumexp = expz.sum(axis=1, keepdims=True)
    log_probs = shifted - np.log(sumexp)
    loss = -(targets * log_probs).sum(axis=1).mean()

    def backward():
        softmax = expz / sumexp
        T._accumulate(logits, out.grad * (softmax - targets) / n)

    out = T._node(np.asarray(loss), (logits,), backward)
    return out


def rotation_targets(mode: str) -> tuple:
    if mode not in PRETEXT_MODES:
        raise ConfigError(f"unknown pretext mode {mode!r}, expected one of {PRETEXT_MODES}")
    return FOUR_WAY_TARGETS if mode == "four_way" else BINARY_TARGETS


def rotated_batch(image) -> np.ndarray:
    """Stack of the four quarter-turn rotations of one image, NCHW."""
    from ..data import rotate_pixels

    return np.stack([rotate_pixels(image.pixels, k) for k in range(4)])


def rotation_loss(machine, image, mode="four_way") -> Tensor:
    """Mean cross-entropy over the four rotated copies of an image."""
    targets = rotation_targets(mode)
    classes = 4 if mode == "four_way" else 2
    if machine.head_width != classes:
        raise ConfigError(
            f"{mode} rotation loss needs a {classes}-way head, machine has {machine.head_width}"
        )
    logits = machine.forward(Tensor(rotated_batch(image)))
    return softmax_cross_entropy(logits, one_hot(targets, classes))


def seen_loss(machine, image, label: str) -> Tensor:
    """2-way cross-entropy of one image against its seen/unseen label."""
    if machine.head_width != 2:
        raise ConfigError(f"seen/unseen loss needs a 2-way head, machine has {machine.head_width}")
    if label == "seen":
        cls = SEEN_CLASS
    elif label == "unseen":
        cls = UNSEEN_CLASS
    else:
        raise ValueError(f"label must be 'seen' or 'unseen', got {label!r}")
    logits = machine.forward(Tensor(image.pixels[None]))
    return softmax_cross_entropy(logits, one_hot([cls], 2))


def mse_loss(predictions: Tensor, targets: np.ndarray) -> Tensor:
    """Mean squared error against constant targets."""
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.data.shape != targets.shape:
        raise ValueError(
            f"prediction shape {predictions.data.shape} != target shape {targets.shape}"
        )
    diff = T.sub(predictions, Tensor(targets))
    return T.mean(T.mul(diff, diff))
