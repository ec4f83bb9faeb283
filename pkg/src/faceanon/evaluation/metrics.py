"""Privacy and image-quality metrics: detection rate, re-identification rate,
and the Fréchet distance between Gaussian feature fits.

The re-identification protocol is closed-set top-1 gallery matching: an
anonymized image counts as re-identified iff the real gallery embedding most
cosine-similar to its own embedding belongs to its source image. Both rates
are order-independent: inputs are sorted by id before any reduction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import (
    EmptyInput,
    FeatureShapeMismatch,
    InsufficientData,
    ManifestMismatch,
    ValidationError,
)


def detection_rate(detections) -> float:
    """Fraction of detections with ``found`` true."""
    detections = list(detections)
    if not detections:
        raise EmptyInput("detection rate over an empty image set")
    return sum(1 for d in detections if d.found) / len(detections)


def detection_rate_images(images, detector) -> float:
    images = list(images)
    if not images:
        raise EmptyInput("detection rate over an empty image set")
    return detection_rate([detector(img) for img in images])


def reid_rate(anonymized: dict[str, np.ndarray], gallery: dict[str, np.ndarray]) -> float:
    """Top-1 cosine re-identification of anonymized embeddings against the
    real gallery. Requires a bijection between anonymized ids and gallery ids.
    """
    if not anonymized or not gallery:
        raise EmptyInput("re-identification over an empty set")
    if set(anonymized) != set(gallery):
        missing = set(anonymized) ^ set(gallery)
        raise ManifestMismatch(
            f"anonymized/gallery ids do not correspond one-to-one; offending ids "
            f"(up to 5): {sorted(missing)[:5]}"
        )
    ids = sorted(gallery)
    g = np.stack([gallery[i] for i in ids]).astype(np.float64)
    g = g / np.linalg.norm(g, axis=1, keepdims=True)
    hits = 0
    for k, i in enumerate(ids):
        a = np.asarray(anonymized[i], dtype=np.float64)
        a = a / np.linalg.norm(a)
        sims = g @ a
        if int(np.argmax(sims)) == k:
            hits += 1
    return hits / len(ids)


@dataclass
class GaussianMoments:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64)
        self.covariance = np.asarray(self.covariance, dtype=np.float64)
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise ValidationError(
                f"covariance shape {self.covariance.shape} does not match mean dim {d}"
            )
        asym = np.abs(self.covariance - self.covariance.T).max() if d else 0.0
        if asym > 1e-8:
            raise ValidationError(f"covariance asymmetry {asym} above 1e-8")
        if d and np.linalg.eigvalsh(self.covariance).min() < -1e-8:
            raise ValidationError("covariance has eigenvalues below -1e-8")


def gaussian_moments(features: np.ndarray) -> GaussianMoments:
    """Sample mean and unbiased covariance of an (n, d) feature matrix."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] < 1:
        raise ValidationError(f"expected (n, d) features, got shape {features.shape}")
    if features.shape[0] < 2:
        raise InsufficientData("need at least 2 samples for covariance")
    mean = features.mean(axis=0)
    centered = features - mean
    cov = centered.T @ centered / (features.shape[0] - 1)
    cov = (cov + cov.T) / 2.0
    return GaussianMoments(mean=mean, covariance=cov)


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(a: GaussianMoments, b: GaussianMoments) -> float:
    """``|mu_a - mu_b|^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2})``.

    The cross term is evaluated through the symmetrized product
    ``sqrt(S_a) S_b sqrt(S_a)`` whose eigendecomposition is real; negative
    eigenvalues from round-off are clipped at zero, which also pins
    ``frechet_distance(a, a)`` to 0 and keeps the result non-negative.
    """
    if a.mean.shape != b.mean.shape:
        raise FeatureShapeMismatch(
            f"moment dimensions differ: {a.mean.shape} vs {b.mean.shape}"
        )
    mean_term = float(np.sum((a.mean - b.mean) ** 2))
    root_a = _psd_sqrt(a.covariance)
    inner = root_a @ b.covariance @ root_a
    vals = np.linalg.eigvalsh((inner + inner.T) / 2.0)
    trace_cross = float(np.sqrt(np.clip(vals, 0.0, None)).sum())
    dist = mean_term + float(np.trace(a.covariance) + np.trace(b.covariance)) \
        - 2.0 * trace_cross
    return max(dist, 0.0)
