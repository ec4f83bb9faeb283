"""Backend interface over the five pre-trained networks the pipeline consumes.

A backend bundles a generator, an inverter, an identity encoder, a semantic
encoder and a face detector behind one uniform, side-effect-free API. All
operations are pure functions of (inputs, weights, seed); nothing mutates
backend state after construction, so a bundle may be shared across workers
or cheaply re-instantiated from the same construction parameters.

Gradient contract: ``generate``, ``embed_identity`` and ``embed_semantic``
expose vector-Jacobian products (``*_vjp``) so the latent optimizer can chain
gradients without knowing anything about the backend internals.
"""

from __future__ import annotations

from abc import ABC, abstractmethod

import numpy as np

from ..types import Detection, SemanticFeatures


class Backend(ABC):
    """Uniform interface; see module docstring for the gradient contract."""

    #: "synthetic" or "pretrained"; used only at construction/reporting time.
    backend_kind: str = "unknown"

    # -- sampling / generation -------------------------------------------------

    @abstractmethod
    def sample_latents(self, n: int, seed: int) -> list[np.ndarray]:
        """Draw ``n`` W+ codes from the generator's prior, deterministically."""

    @abstractmethod
    def generate(self, code: np.ndarray) -> np.ndarray:
        """Render an HxWx3 image in [0, 1] from an 18x512 code."""

    @abstractmethod
    def generate_vjp(self, code, grad_image, rows=None, image=None) -> np.ndarray:
        """Pull an image-space gradient back to an 18x512 code gradient.

        ``rows=(lo, hi)`` is an optional hint that the caller consumes only
        those code rows, and ``image`` an optional pre-rendered
        ``generate(code)``; backends may exploit either to skip dead work
        and must return the same values whether or not they do.
        """

    # -- inversion ---------------------------------------------------------------

    @abstractmethod
    def invert(self, image: np.ndarray) -> np.ndarray:
        """Project an image to a code whose rendering approximates it."""

    # -- encoders ---------------------------------------------------------------

    @abstractmethod
    def embed_identity(self, image: np.ndarray) -> np.ndarray:
        """Unit-norm 512-d identity embedding."""

    @abstractmethod
    def embed_identity_vjp(self, image: np.ndarray, grad_embedding: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def embed_semantic(self, image: np.ndarray) -> SemanticFeatures:
        """Class token plus patch-token grid."""

    @abstractmethod
    def embed_semantic_vjp(
        self,
        image: np.ndarray,
        grad_cls: np.ndarray | None,
        grad_patches: np.ndarray | None,
    ) -> np.ndarray:
        pass

    # -- detection ---------------------------------------------------------------

    @abstractmethod
    def detect_face(self, image: np.ndarray) -> Detection:
        pass

    # -- reproducibility ----------------------------------------------------------

    @abstractmethod
    def fingerprints(self) -> dict[str, str]:
        """Content hash per wrapped model; stable across runs for equal weights."""

    @abstractmethod
    def construction_params(self) -> dict:
        """Parameters sufficient to re-instantiate an identical backend in a
        worker process (weight paths or synthetic parameters)."""


def bundle_metadata(backend: Backend) -> dict:
    """Reproducibility block embedded in every output manifest."""
    return {
        "backend_kind": backend.backend_kind,
        "model_fingerprints": backend.fingerprints(),
    }
