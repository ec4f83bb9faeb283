"""Per-image latent optimization.

Each job minimizes ``w_id * |cos(e_A, e_R) - m| + w_att * L1(patches)`` over
the trainable rows of a spliced code with Adam; the frozen rows are never
touched, so they stay bit-identical to the real image's inversion. Gradients
are chained through the backend's vector-Jacobian products, which keeps this
module agnostic of the backend internals.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .backends.base import Backend
from .errors import DivergenceError, ValidationError
from .losses import LossStep, attribute_loss_from_features, identity_loss_from_embeddings
from .pairing import RealRecord
from .types import HyperParams, SplicedCode


@dataclass
class AnonymizedRecord:
    real_id: str
    code: SplicedCode            # optimized spliced code
    image: np.ndarray            # rendered anonymized image
    trajectory: list[LossStep]
    labels: dict[str, int] | None = None
    split: str = "train"


class Adam:
    """Standard first-order adaptive optimizer (momentum + per-coordinate
    scaling), no schedule."""

    def __init__(self, shape, learning_rate: float, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.lr = learning_rate
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return params - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def _loss_and_grad(trainable, spliced: SplicedCode, x_r_embedding, x_r_features,
                   hp: HyperParams, backend: Backend, step: int):
    """Forward losses plus the analytic gradient w.r.t. the trainable block."""
    code = spliced.with_trainable(trainable).assembled()
    x_a = backend.generate(code)

    e_a = backend.embed_identity(x_a)
    l_id, cos = identity_loss_from_embeddings(e_a, x_r_embedding, hp.margin)

    f_a = backend.embed_semantic(x_a)
    l_att = attribute_loss_from_features(f_a, x_r_features, hp.att_normalization)

    record = LossStep(step=step, l_id=l_id, l_att=l_att,
                      total=hp.weight_id * l_id + hp.weight_att * l_att,
                      cos_sim=cos)

    # d|cos - m|/d e_a, with e_r constant and e_a unit-norm by contract.
    sign_id = np.sign(cos - hp.margin)
    g_emb = hp.weight_id * sign_id * np.asarray(x_r_embedding, dtype=np.float64)

    g_patches = np.sign(f_a.patches - x_r_features.patches)
    if hp.att_normalization == "mean":
        g_patches = g_patches / g_patches.size
    g_patches = hp.weight_att * g_patches

    g_image = backend.embed_identity_vjp(x_a, g_emb)
    g_image = g_image + backend.embed_semantic_vjp(x_a, None, g_patches)
    g_code = backend.generate_vjp(code, g_image, rows=spliced.layer_split, image=x_a)
    lo, hi = spliced.layer_split
    return record, g_code[lo:hi]


def trainable_gradient(trainable, spliced: SplicedCode, x_r: np.ndarray,
                       hp: HyperParams, backend: Backend) -> np.ndarray:
    """Analytic gradient of the total loss w.r.t. the trainable block;
    exposed for gradient-correctness checks."""
    _, grad = _loss_and_grad(
        trainable, spliced,
        backend.embed_identity(x_r), backend.embed_semantic(x_r),
        hp, backend, step=0,
    )
    return grad


def evaluate_total_loss(trainable, spliced: SplicedCode, x_r: np.ndarray,
                        hp: HyperParams, backend: Backend) -> float:
    """Loss value alone; the probe target for finite-difference checks."""
    record, _ = _loss_and_grad(
        trainable, spliced,
        backend.embed_identity(x_r), backend.embed_semantic(x_r),
        hp, backend, step=0,
    )
    return record.total


def optimize_latent(
    real: RealRecord,
    spliced: SplicedCode,
    backend: Backend,
    hp: HyperParams,
    x_r: np.ndarray | None = None,
) -> AnonymizedRecord:
    """Run the per-image optimization job.

    ``x_r`` is the real target image; when omitted it is rendered from the
    real record's inverted code. Deterministic given (inputs, hp); the
    trajectory records every step. Non-finite losses abort the item with
    :class:`DivergenceError` rather than clamping.
    """
    if spliced.real_id != real.real_id:
        raise ValidationError(
            f"spliced code provenance {spliced.real_id!r} does not match record "
            f"{real.real_id!r}"
        )
    if x_r is None:
        x_r = backend.generate(real.code)

    e_r = backend.embed_identity(x_r)
    f_r = backend.embed_semantic(x_r)

    trainable = np.asarray(spliced.trainable, dtype=np.float64).copy()
    optimizer = Adam(trainable.shape, hp.learning_rate)
    trajectory: list[LossStep] = []

    for step in range(hp.total_steps):
        record, grad = _loss_and_grad(trainable, spliced, e_r, f_r, hp, backend, step)
        trajectory.append(record)
        if not np.isfinite(record.total):
            raise DivergenceError(
                f"non-finite loss at step {step} for {real.real_id}",
                trajectory=trajectory,
            )
        trainable = optimizer.step(trainable, grad)

    final = spliced.with_trainable(trainable.astype(np.float32))
    if hp.total_steps > 0:
        record, _ = _loss_and_grad(
            np.asarray(final.trainable, dtype=np.float64), spliced, e_r, f_r, hp,
            backend, step=hp.total_steps,
        )
        trajectory.append(record)

    image = backend.generate(final.assembled())
    return AnonymizedRecord(
        real_id=real.real_id,
        code=final,
        image=image,
        trajectory=trajectory,
        labels=dict(real.labels) if real.labels is not None else None,
        split=real.split,
    )
