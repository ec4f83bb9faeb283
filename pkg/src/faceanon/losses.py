"""Identity and attribute-preservation losses.

The identity loss drives the cosine similarity between the identity
embeddings of the anonymized and the real image toward a target margin m:
``|cos(e_A, e_R) - m|``. m = 0 forces orthogonal identities, m = 1 identical
ones. The attribute loss is the L1 distance between the patch-token semantic
features of the two images; ``sum`` accumulates the raw L1 norm, ``mean``
divides by the feature count so the loss weight is scale-free.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .backends.base import Backend
from .errors import FeatureShapeMismatch, ValidationError
from .types import HyperParams, SemanticFeatures


@dataclass
class LossStep:
    step: int
    l_id: float
    l_att: float
    total: float
    cos_sim: float

    def to_dict(self) -> dict:
        return {
            "step": self.step,
            "l_id": self.l_id,
            "l_att": self.l_att,
            "total": self.total,
            "cos_sim": self.cos_sim,
        }


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < 1e-12 or nb < 1e-12:
        raise ValidationError("cosine similarity of a zero vector is undefined")
    return float(np.dot(a, b) / (na * nb))


def identity_loss_from_embeddings(e_a: np.ndarray, e_r: np.ndarray, margin: float):
    if not 0.0 <= margin <= 1.0:
        raise ValidationError(f"margin must lie in [0, 1], got {margin}")
    cos = cosine_similarity(e_a, e_r)
    return abs(cos - margin), cos


def identity_loss(x_a: np.ndarray, x_r: np.ndarray, margin: float,
                  backend: Backend) -> tuple[float, float]:
    """Returns (loss, cos_sim) for a pair of images."""
    return identity_loss_from_embeddings(
        backend.embed_identity(x_a), backend.embed_identity(x_r), margin
    )


def attribute_loss_from_features(f_a: SemanticFeatures, f_r: SemanticFeatures,
                                 normalization: str = "mean") -> float:
    if f_a.patches.shape != f_r.patches.shape:
        raise FeatureShapeMismatch(
            f"patch grids differ: {f_a.patches.shape} vs {f_r.patches.shape}"
        )
    if normalization not in ("mean", "sum"):
        raise ValidationError("att normalization must be 'mean' or 'sum'")
    diff = np.abs(f_a.patches - f_r.patches)
    total = float(diff.sum())
    if normalization == "mean":
        return total / diff.size
    return total


def attribute_loss(x_a: np.ndarray, x_r: np.ndarray, backend: Backend,
                   normalization: str = "mean") -> float:
    return attribute_loss_from_features(
        backend.embed_semantic(x_a), backend.embed_semantic(x_r), normalization
    )


def total_loss(x_a: np.ndarray, x_r: np.ndarray, hp: HyperParams,
               backend: Backend, step: int = 0) -> LossStep:
    l_id, cos = identity_loss(x_a, x_r, hp.margin, backend)
    l_att = attribute_loss(x_a, x_r, backend, hp.att_normalization)
    return LossStep(
        step=step,
        l_id=l_id,
        l_att=l_att,
        total=hp.weight_id * l_id + hp.weight_att * l_att,
        cos_sim=cos,
    )
