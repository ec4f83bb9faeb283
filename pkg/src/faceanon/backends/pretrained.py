"""Adapter backend wrapping externally supplied pre-trained models.

The pipeline never trains the generator, inverter, encoders or detector; at
real scale they are heavyweight third-party networks. This adapter accepts
them as plain callables (typically closures over torch modules) together
with a content fingerprint and a preprocessing note, and enforces the
boundary contracts the rest of the pipeline relies on:

* images cross the boundary as HxWx3 float arrays in [0, 1]; each adapter
  performs its own model-specific normalization and resizing internally and
  must document that chain in ``preprocess`` (input resolution and alignment
  are a per-adapter choice, not something this library fixes),
* codes are finite 18x512 float32 arrays,
* identity embeddings are re-normalized on output,
* inversion refuses images in which the detector finds no face.

Gradient support is optional per adapter: supply ``*_vjp`` callables (for a
torch module, a closure running ``torch.autograd.grad``) to enable latent
optimization through the adapter.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import BackendError, InversionRejected, ValidationError
from ..types import (
    EMBED_DIM,
    Detection,
    SemanticFeatures,
    validate_image,
    validate_latent_code,
)
from .base import Backend


@dataclass
class ModelAdapter:
    """One wrapped network: forward callable, optional VJP, provenance."""

    forward: callable
    fingerprint: str
    vjp: callable | None = None
    preprocess: str = ""          # human-readable resize/normalization note
    weights_path: str | None = None


class PretrainedBackend(Backend):
    """Bundle of five :class:`ModelAdapter` instances.

    The constructor only records the adapters; shapes are validated on first
    use so a mis-wired model surfaces as :class:`BackendError` rather than a
    deep numpy failure.
    """

    backend_kind = "pretrained"

    def __init__(
        self,
        generator: ModelAdapter,
        inverter: ModelAdapter,
        identity_encoder: ModelAdapter,
        semantic_encoder: ModelAdapter,
        face_detector: ModelAdapter,
        latent_sampler: callable | None = None,
        patch_grid_side: int = 14,
    ):
        self.generator = generator
        self.inverter = inverter
        self.identity_encoder = identity_encoder
        self.semantic_encoder = semantic_encoder
        self.face_detector = face_detector
        self._latent_sampler = latent_sampler
        self.patch_grid_side = patch_grid_side
        for name in ("generator", "inverter", "identity_encoder",
                     "semantic_encoder", "face_detector"):
            adapter = getattr(self, name)
            if adapter is None or adapter.forward is None:
                raise BackendError(f"adapter '{name}' did not resolve")

    def sample_latents(self, n: int, seed: int) -> list[np.ndarray]:
        if n < 0:
            raise ValidationError("sample count must be >= 0")
        if self._latent_sampler is None:
            raise BackendError("no latent sampler wired for this adapter bundle")
        codes = [validate_latent_code(c).astype(np.float32)
                 for c in self._latent_sampler(n, seed)]
        if len(codes) != n:
            raise BackendError(f"latent sampler returned {len(codes)} codes for n={n}")
        return codes

    def generate(self, code: np.ndarray) -> np.ndarray:
        code = validate_latent_code(code)
        image = np.asarray(self.generator.forward(code), dtype=np.float64)
        if image.ndim != 3 or image.shape[2] != 3:
            raise BackendError(f"generator returned shape {image.shape}, expected HxWx3")
        return validate_image(np.clip(image, 0.0, 1.0), "generated image")

    def generate_vjp(self, code, grad_image, rows=None, image=None) -> np.ndarray:
        if self.generator.vjp is None:
            raise BackendError("generator adapter provides no gradient path")
        return np.asarray(self.generator.vjp(validate_latent_code(code), grad_image),
                          dtype=np.float64)

    def invert(self, image: np.ndarray) -> np.ndarray:
        image = validate_image(image)
        if not self.detect_face(image).found:
            raise InversionRejected("no valid face detected in inversion input")
        code = np.asarray(self.inverter.forward(image))
        try:
            return validate_latent_code(code, "inverted code").astype(np.float32)
        except ValidationError as exc:
            raise BackendError(f"inverter adapter weight/shape mismatch: {exc}") from exc

    def embed_identity(self, image: np.ndarray) -> np.ndarray:
        image = validate_image(image)
        vec = np.asarray(self.identity_encoder.forward(image), dtype=np.float64)
        if vec.shape != (EMBED_DIM,):
            raise BackendError(f"identity encoder returned shape {vec.shape}")
        norm = np.linalg.norm(vec)
        if not np.isfinite(norm) or norm < 1e-12:
            raise BackendError("identity encoder returned a degenerate embedding")
        return vec / norm

    def embed_identity_vjp(self, image, grad_embedding) -> np.ndarray:
        if self.identity_encoder.vjp is None:
            raise BackendError("identity encoder adapter provides no gradient path")
        return np.asarray(self.identity_encoder.vjp(validate_image(image), grad_embedding),
                          dtype=np.float64)

    def embed_semantic(self, image: np.ndarray) -> SemanticFeatures:
        image = validate_image(image)
        out = self.semantic_encoder.forward(image)
        try:
            cls, patches = out
        except (TypeError, ValueError) as exc:
            raise BackendError("semantic encoder must return (cls, patches)") from exc
        return SemanticFeatures(cls=cls, patches=patches,
                                patch_grid_side=self.patch_grid_side)

    def embed_semantic_vjp(self, image, grad_cls, grad_patches) -> np.ndarray:
        if self.semantic_encoder.vjp is None:
            raise BackendError("semantic encoder adapter provides no gradient path")
        return np.asarray(
            self.semantic_encoder.vjp(validate_image(image), grad_cls, grad_patches),
            dtype=np.float64,
        )

    def detect_face(self, image: np.ndarray) -> Detection:
        image = validate_image(image)
        out = self.face_detector.forward(image)
        if isinstance(out, Detection):
            return out
        try:
            found, box, confidence = out
        except (TypeError, ValueError) as exc:
            raise BackendError(
                "detector must return a Detection or (found, box, confidence)"
            ) from exc
        return Detection(found=bool(found), box=box, confidence=float(confidence))

    def fingerprints(self) -> dict[str, str]:
        return {
            "generator": self.generator.fingerprint,
            "inverter": self.inverter.fingerprint,
            "identity_encoder": self.identity_encoder.fingerprint,
            "semantic_encoder": self.semantic_encoder.fingerprint,
            "face_detector": self.face_detector.fingerprint,
        }

    def construction_params(self) -> dict:
        return {
            "kind": "pretrained",
            "weights": {
                name: getattr(self, name).weights_path
                for name in ("generator", "inverter", "identity_encoder",
                             "semantic_encoder", "face_detector")
            },
        }
