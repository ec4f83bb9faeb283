"""Attribute-classification protocol: train a small multi-label classifier on
one (possibly anonymized) training set, report per-attribute accuracy on an
untouched real test set, aggregated over the inner/outer face-region
partition.

The classifier is pluggable. At desk scale a one-hidden-layer MLP trained
with the focal loss is plenty (the protocol, not the architecture, is what
matters); at real scale a compact conv net can be substituted through the
same fit/predict interface. A closed-form ridge probe is provided both as a
decodability oracle and as the desk-scale pseudo-labeling classifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BackendError, LabelError, ValidationError
from ..types import AttributeSpec
from .focal import focal_loss, focal_loss_logit_grad


@dataclass
class ClassifierConfig:
    hidden: int = 64
    epochs: int = 400
    learning_rate: float = 0.01
    focal_gamma: float = 2.0
    focal_alpha: float = 0.5
    weight_decay: float = 1e-4
    seed: int = 0


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class MlpAttributeClassifier:
    """One-hidden-layer multi-label classifier trained full-batch with Adam
    on the focal loss. Deterministic given (data, config)."""

    def __init__(self, config: ClassifierConfig | None = None):
        self.config = config or ClassifierConfig()
        self._params = None
        self._mean = None
        self._scale = None

    def _standardize(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=np.float64) - self._mean) / self._scale

    def fit(self, features: np.ndarray, labels: np.ndarray) -> "MlpAttributeClassifier":
        cfg = self.config
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(labels, dtype=np.float64)
        if x.ndim != 2 or y.ndim != 2 or x.shape[0] != y.shape[0]:
            raise ValidationError(
                f"classifier expects (n, d) features and (n, k) labels, got "
                f"{x.shape} and {y.shape}"
            )
        # Standardize on train statistics; raw pixels carry a large DC offset
        # that otherwise dominates early training.
        self._mean = x.mean(axis=0)
        self._scale = x.std(axis=0) + 1e-8
        x = self._standardize(x)
        n, d = x.shape
        k = y.shape[1]
        rng = np.random.Generator(np.random.PCG64(cfg.seed))
        w1 = rng.standard_normal((d, cfg.hidden)) / np.sqrt(d)
        b1 = np.zeros(cfg.hidden)
        w2 = rng.standard_normal((cfg.hidden, k)) / np.sqrt(cfg.hidden)
        b2 = np.zeros(k)
        params = [w1, b1, w2, b2]
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        beta1, beta2, eps = 0.9, 0.999, 1e-8

        for t in range(1, cfg.epochs + 1):
            h_pre = x @ w1 + b1
            h = np.tanh(h_pre)
            logits = h @ w2 + b2
            probs = _sigmoid(logits)
            g_logits = focal_loss_logit_grad(probs, y, cfg.focal_gamma, cfg.focal_alpha)
            g_w2 = h.T @ g_logits + cfg.weight_decay * w2
            g_b2 = g_logits.sum(axis=0)
            g_h = g_logits @ w2.T
            g_pre = g_h * (1.0 - h * h)
            g_w1 = x.T @ g_pre + cfg.weight_decay * w1
            g_b1 = g_pre.sum(axis=0)
            grads = [g_w1, g_b1, g_w2, g_b2]
            for i, (p, g) in enumerate(zip(params, grads)):
                m[i] = beta1 * m[i] + (1 - beta1) * g
                v[i] = beta2 * v[i] + (1 - beta2) * g * g
                m_hat = m[i] / (1 - beta1 ** t)
                v_hat = v[i] / (1 - beta2 ** t)
                params[i] = p - cfg.learning_rate * m_hat / (np.sqrt(v_hat) + eps)
            w1, b1, w2, b2 = params
        self._params = params
        return self

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        if self._params is None:
            raise ValidationError("classifier used before fit()")
        w1, b1, w2, b2 = self._params
        h = np.tanh(self._standardize(features) @ w1 + b1)
        return _sigmoid(h @ w2 + b2)

    def training_loss(self, features, labels) -> float:
        return focal_loss(self.predict_proba(features), np.asarray(labels, float),
                          self.config.focal_gamma, self.config.focal_alpha)


class RidgeProbeClassifier:
    """Closed-form linear probe: ridge regression onto +/-1 targets.

    Serves two roles: the independent decodability oracle for the synthetic
    testbed, and the desk-scale pretrained classifier behind pseudo-labeling.
    """

    def __init__(self, ridge: float = 1e-6):
        self.ridge = ridge
        self._w = None
        self._b = None

    def fit(self, features: np.ndarray, labels: np.ndarray) -> "RidgeProbeClassifier":
        """Regress +/-1 label targets on features."""
        return self.fit_scores(features, np.asarray(labels, dtype=np.float64) * 2.0 - 1.0)

    def fit_scores(self, features: np.ndarray, scores: np.ndarray) -> "RidgeProbeClassifier":
        """Regress continuous decision scores (distillation targets) whose
        sign is the label; exact recovery when scores are linear in
        features and the sample spans them."""
        x = np.asarray(features, dtype=np.float64)
        y = np.asarray(scores, dtype=np.float64)
        mean = x.mean(axis=0)
        y_mean = y.mean(axis=0)
        xc = x - mean
        gram = xc.T @ xc + self.ridge * np.eye(x.shape[1])
        self._w = np.linalg.solve(gram, xc.T @ (y - y_mean))
        self._b = y_mean - mean @ self._w
        return self

    def predict_proba(self, features: np.ndarray) -> np.ndarray:
        if self._w is None:
            raise ValidationError("probe used before fit()")
        score = np.asarray(features, dtype=np.float64) @ self._w + self._b
        return 1.0 / (1.0 + np.exp(-np.clip(score, -30, 30)))


def labels_matrix(items_labels: list[dict[str, int]], spec: AttributeSpec) -> np.ndarray:
    """Stack per-item label dicts into an (n, k) matrix in spec order."""
    rows = []
    for i, labels in enumerate(items_labels):
        if labels is None:
            raise LabelError(f"item {i} has no labels")
        missing = [n for n in spec.names if n not in labels]
        if missing:
            raise LabelError(f"item {i} lacks labels for: {missing[:5]}")
        rows.append([int(labels[n]) for n in spec.names])
    return np.asarray(rows, dtype=np.float64)


@dataclass
class AttributeAccuracy:
    inner: float
    outer: float
    combined: float
    per_attribute: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "inner": self.inner,
            "outer": self.outer,
            "combined": self.combined,
            "per_attribute": dict(sorted(self.per_attribute.items())),
        }


def aggregate_accuracy(per_attribute: dict[str, float], spec: AttributeSpec) -> AttributeAccuracy:
    """Combined accuracy is the plain mean over all attributes, equal to the
    count-weighted aggregation of the inner/outer means."""
    inner = [per_attribute[n] for n in spec.inner_names]
    outer = [per_attribute[n] for n in spec.outer_names]
    return AttributeAccuracy(
        inner=float(np.mean(inner)) if inner else 0.0,
        outer=float(np.mean(outer)) if outer else 0.0,
        combined=float(np.mean([per_attribute[n] for n in spec.names])),
        per_attribute=dict(per_attribute),
    )


def attribute_protocol(
    train_features: np.ndarray,
    train_labels: list[dict[str, int]],
    test_features: np.ndarray,
    test_labels: list[dict[str, int]],
    spec: AttributeSpec,
    classifier=None,
) -> AttributeAccuracy:
    """Train on the (anonymized) training set, score on the untouched test
    set, and aggregate per-attribute accuracies over the region partition."""
    y_train = labels_matrix(train_labels, spec)
    y_test = labels_matrix(test_labels, spec)
    clf = classifier if classifier is not None else MlpAttributeClassifier()
    clf.fit(train_features, y_train)
    pred = (clf.predict_proba(test_features) >= 0.5).astype(np.float64)
    per_attr = {
        name: float((pred[:, j] == y_test[:, j]).mean())
        for j, name in enumerate(spec.names)
    }
    return aggregate_accuracy(per_attr, spec)


def pseudo_label(
    features: np.ndarray,
    classifier,
    spec: AttributeSpec,
    threshold: float = 0.5,
) -> list[dict[str, int]]:
    """Thresholded multi-label predictions in manifest label format.

    ``classifier`` is a fitted adapter exposing ``predict_proba``; a missing
    adapter is a backend wiring error, not a data error.
    """
    if classifier is None:
        raise BackendError("no pretrained attribute classifier adapter available")
    probs = np.asarray(classifier.predict_proba(features), dtype=np.float64)
    if probs.ndim != 2 or probs.shape[1] != len(spec.names):
        raise ValidationError(
            f"classifier returned shape {probs.shape}, expected (n, {len(spec.names)})"
        )
    out = []
    for row in probs:
        out.append({name: int(row[j] >= threshold) for j, name in enumerate(spec.names)})
    return out
