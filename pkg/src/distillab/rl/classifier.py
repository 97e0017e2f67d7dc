"""Success classifier that supplies the learner's reward signal."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from distillab.nets import AdamState, DenseNet, optimize_step
from distillab.seeding import derive_rng


class ClassifierError(ValueError):
    pass


@dataclass
class RewardClassifier:
    net: DenseNet
    threshold: float = 0.5

    def logits(self, observations: np.ndarray) -> np.ndarray:
        out = self.net.forward(np.asarray(observations, dtype=np.float32))
        return out[..., 0]

    def predict_proba(self, observations: np.ndarray) -> np.ndarray:
        return _sigmoid(self.logits(observations))

    def predict(self, observations: np.ndarray) -> np.ndarray:
        return (self.predict_proba(observations) > self.threshold).astype(np.float32)

    def reward(self, observation: np.ndarray) -> float:
        """Sparse reward for a single observation."""
        return float(self.predict_proba(observation[None])[0] > self.threshold)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def train_reward_classifier(
    positives: np.ndarray,
    negatives: np.ndarray,
    hidden=(64, 64),
    epochs: int = 200,
    batch_size: int = 256,
    learning_rate: float = 1e-3,
    holdout_fraction: float = 0.2,
    seed: int = 0,
):
    """Fit a binary success classifier on labeled observations.

    Returns (classifier, report) where the report carries the held-out
    accuracy per class. Class imbalance is handled by weighting the rarer
    class up in the loss rather than by discarding data.
    """
    positives = np.asarray(positives, dtype=np.float32)
    negatives = np.asarray(negatives, dtype=np.float32)
    if positives.ndim != 2 or negatives.ndim != 2:
        raise ClassifierError("positives and negatives must be 2-D (count, features)")
    if len(positives) == 0 or len(negatives) == 0:
        raise ClassifierError(
            "training needs both classes; got "
            f"{len(positives)} positives and {len(negatives)} negatives"
        )
    if positives.shape[1] != negatives.shape[1]:
        raise ClassifierError("positives and negatives disagree on feature width")
    if _sets_identical(positives, negatives):
        warnings.warn(
            "positive and negative sets are identical; the classifier cannot "
            "separate them",
            stacklevel=2,
        )

    rng = derive_rng(seed, "classifier")
    x = np.concatenate([positives, negatives])
    y = np.concatenate([np.ones(len(positives)), np.zeros(len(negatives))]).astype(np.float64)
    perm = rng.permutation(len(x))
    x, y = x[perm], y[perm]
    n_hold = max(1, int(round(holdout_fraction * len(x))))
    if n_hold >= len(x):
        raise ClassifierError("not enough examples to carve out a holdout split")
    x_hold, y_hold = x[:n_hold], y[:n_hold]
    x_tr, y_tr = x[n_hold:], y[n_hold:]
    if y_tr.min() == y_tr.max():
        raise ClassifierError("holdout split left the training set single-class")

    n_pos = float(y_tr.sum())
    n_neg = float(len(y_tr) - n_pos)
    w_pos = len(y_tr) / (2.0 * n_pos)
    w_neg = len(y_tr) / (2.0 * n_neg)

    net = DenseNet.create((x.shape[1], *hidden, 1), activations="relu", rng=rng)
    opt = AdamState.for_params(net.params(), learning_rate=learning_rate)
    for _ in range(epochs):
        order = rng.permutation(len(x_tr))
        for start in range(0, len(x_tr), batch_size):
            idx = order[start : start + batch_size]
            xb, yb = x_tr[idx], y_tr[idx]
            logits = net.forward(xb)[:, 0].astype(np.float64)
            p = _sigmoid(logits)
            w = np.where(yb == 1.0, w_pos, w_neg)
            grad = (w * (p - yb) / len(yb)).astype(np.float32)
            tape = net.backward(grad[:, None])
            optimize_step(net, tape, opt)

    clf = RewardClassifier(net=net)
    pred_hold = clf.predict(x_hold)
    report = {
        "holdout_accuracy": float(np.mean(pred_hold == y_hold)),
        "holdout_size": int(n_hold),
        "train_size": int(len(x_tr)),
        "positives": int(len(positives)),
        "negatives": int(len(negatives)),
    }
    for label, name in ((1.0, "holdout_accuracy_positive"), (0.0, "holdout_accuracy_negative")):
        mask = y_hold == label
        report[name] = float(np.mean(pred_hold[mask] == label)) if mask.any() else None
    return clf, report


def classifier_data_from_episodes(episodes):
    """Split episode observations into success and non-success examples.

    The terminal observation of each successful episode is a positive; every
    other frame (including the full descent right up to the success state)
    is a negative, which is what keeps the decision boundary tight.
    """
    positives, negatives = [], []
    for ep in episodes:
        if ep.success:
            positives.append(ep.observations[-1])
            negatives.extend(ep.observations[:-1])
        else:
            negatives.extend(ep.observations)
    if not positives:
        raise ClassifierError("no successful episodes to take positives from")
    return np.stack(positives), np.stack(negatives)


def _sets_identical(a: np.ndarray, b: np.ndarray) -> bool:
    if a.shape != b.shape:
        return False
    a_sorted = a[np.lexsort(a.T[::-1])]
    b_sorted = b[np.lexsort(b.T[::-1])]
    return bool(np.array_equal(a_sorted, b_sorted))
