"""Privacy and utility evaluation: detection/re-ID rates, Fréchet distance,
focal loss, and the train-on-anonymized attribute-classification protocol."""

from .classifier import (
    AttributeAccuracy,
    ClassifierConfig,
    MlpAttributeClassifier,
    RidgeProbeClassifier,
    aggregate_accuracy,
    attribute_protocol,
    labels_matrix,
    pseudo_label,
)
from .focal import focal_loss, focal_loss_logit_grad
from .metrics import (
    GaussianMoments,
    detection_rate,
    detection_rate_images,
    frechet_distance,
    gaussian_moments,
    reid_rate,
)

__all__ = [
    "AttributeAccuracy",
    "ClassifierConfig",
    "MlpAttributeClassifier",
    "RidgeProbeClassifier",
    "aggregate_accuracy",
    "attribute_protocol",
    "labels_matrix",
    "pseudo_label",
    "focal_loss",
    "focal_loss_logit_grad",
    "GaussianMoments",
    "detection_rate",
    "detection_rate_images",
    "frechet_distance",
    "gaussian_moments",
    "reid_rate",
]
