"""Fully analytic synthetic backend for desk-scale verification.

The five networks are replaced by exactly solvable linear maps arranged so
that every pipeline-level claim becomes checkable against a closed-form
oracle:

* generator: a full-row-rank affine map from the flattened 18x512 code to a
  small HxWx3 image, clamped to [0, 1]. The map is block-structured: the
  central "face" square of the image depends only on the trainable rows
  [3, 8) and the surrounding pixels depend only on the frozen rows. Inversion
  is the exact pseudo-inverse, so rendering an inverted in-range image
  reproduces it to machine precision.
* identity encoder: a row-orthonormal 512-row projection applied to the
  pseudo-inverted face-region content; composed with the generator it
  responds only to rows [3, 8).
* semantic encoder: class-token and patch-token projections dominated by the
  frozen-row content, with a tunable coupling ``eps_couple`` to the
  identity rows. The coupling path is gain-calibrated so a code perturbation
  in the trainable rows moves patch features at most ``eps_couple`` times as
  much as an equal-norm perturbation in the frozen rows.
* face detector: mean brightness of the face region against a threshold,
  which makes detection rates exactly computable.

Everything is drawn once from a seeded PCG64 stream; the backend is a pure
function of its construction parameters.
"""

from __future__ import annotations

import hashlib
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from ..errors import ValidationError
from ..types import (
    EMBED_DIM,
    LATENT_COLS,
    LATENT_ROWS,
    DEFAULT_LAYER_SPLIT,
    Detection,
    SemanticFeatures,
    validate_image,
    validate_latent_code,
)
from ..util import derive_seed, hash_arrays
from .base import Backend

PIXEL_STD = 0.08          # pre-clamp pixel std for prior-sampled codes
PIXEL_BIAS = 0.5
COUPLE_HEADROOM = 0.5     # coupling-path gain = eps * headroom * dominant gain


def _wide_pinv(mat: np.ndarray) -> np.ndarray:
    """Pseudo-inverse of a full-row-rank wide matrix via normal equations.

    Exact for the random blocks used here (aspect ratio >= 10 keeps M M^T
    well-conditioned) and an order of magnitude cheaper than an SVD.
    """
    return np.linalg.solve(mat @ mat.T, mat).T


class _ProductMemo:
    """Memoize ``mat @ x`` for inputs that repeat across calls.

    Latent optimization re-renders the same frozen rows at every step; caching
    the frozen-block products cuts the per-step cost several-fold without
    changing any value (cache hits return the identical array).
    """

    def __init__(self, mat: np.ndarray, max_entries: int = 8):
        self.mat = mat
        self._cache: OrderedDict[bytes, np.ndarray] = OrderedDict()
        self._max = max_entries

    def __call__(self, x: np.ndarray) -> np.ndarray:
        key = hashlib.blake2b(x.tobytes(), digest_size=16).digest()
        hit = self._cache.get(key)
        if hit is None:
            hit = self.mat @ x
            self._cache[key] = hit
            if len(self._cache) > self._max:
                self._cache.popitem(last=False)
        return hit


@dataclass(frozen=True)
class SyntheticConfig:
    """Complete specification of the synthetic world."""

    seed: int = 7
    eps_couple: float = 0.05
    image_side: int = 12
    detection_threshold: float | None = None   # default: 0.25 * sqrt(#face pixels)
    patch_grid_side: int = 4
    layer_split: tuple[int, int] = DEFAULT_LAYER_SPLIT

    def resolved_threshold(self, n_face_pixels: int) -> float:
        if self.detection_threshold is not None:
            return float(self.detection_threshold)
        return 0.25 * float(np.sqrt(n_face_pixels))

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "eps_couple": self.eps_couple,
            "image_side": self.image_side,
            "detection_threshold": self.detection_threshold,
            "patch_grid_side": self.patch_grid_side,
            "layer_split": list(self.layer_split),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticConfig":
        d = dict(d)
        if "layer_split" in d:
            d["layer_split"] = tuple(d["layer_split"])
        return cls(**d)


class SyntheticBackend(Backend):
    backend_kind = "synthetic"

    def __init__(self, config: SyntheticConfig | None = None, **kwargs):
        if config is None:
            config = SyntheticConfig(**kwargs)
        elif kwargs:
            raise ValidationError("pass either a SyntheticConfig or keyword fields, not both")
        if config.image_side < 8:
            raise ValidationError("synthetic image side must be >= 8")
        if config.eps_couple < 0:
            raise ValidationError("eps_couple must be >= 0")
        if config.patch_grid_side < 1:
            raise ValidationError("patch_grid_side must be >= 1")
        self.config = config

        side = config.image_side
        lo, hi = config.layer_split
        self.layer_split = (lo, hi)
        self.n_trainable = (hi - lo) * LATENT_COLS
        self.n_frozen = (LATENT_ROWS - (hi - lo)) * LATENT_COLS

        # Face region = central half-side square; it carries the identity
        # content, the surround carries the attribute content.
        mask = np.zeros((side, side, 3), dtype=bool)
        a, b = side // 4, side - side // 4
        mask[a:b, a:b, :] = True
        self._face_mask = mask
        self._face_idx = np.flatnonzero(mask.ravel())
        self._rest_idx = np.flatnonzero(~mask.ravel())
        self.n_face = self._face_idx.size
        self.n_rest = self._rest_idx.size
        self.image_shape = (side, side, 3)

        # Domain-separated stream: weight draws must never replay a stream a
        # caller might seed for its own sampling.
        rng = np.random.Generator(np.random.PCG64(derive_seed(config.seed, "synthetic-weights")))

        # Generator blocks (face <- trainable rows, surround <- frozen rows).
        self._gen_face = rng.standard_normal((self.n_face, self.n_trainable)) * (
            PIXEL_STD / np.sqrt(self.n_trainable)
        )
        self._gen_rest = rng.standard_normal((self.n_rest, self.n_frozen)) * (
            PIXEL_STD / np.sqrt(self.n_frozen)
        )
        self._gen_face_pinv = _wide_pinv(self._gen_face)
        self._gen_rest_pinv = _wide_pinv(self._gen_rest)
        self._gen_rest_memo = _ProductMemo(self._gen_rest)

        # Identity encoder: row-orthonormal 512-row projection of the
        # pseudo-inverted face content.
        q, _ = np.linalg.qr(rng.standard_normal((self.n_trainable, EMBED_DIM)))
        self._id_proj = q.T @ self._gen_face_pinv          # (512, n_face)

        # Semantic encoder: dominant read of the surround plus an
        # eps_couple-scaled read of the face region.
        p = config.patch_grid_side ** 2
        d_patch = p * EMBED_DIM
        w_pa = rng.standard_normal((d_patch, self.n_rest)) / np.sqrt(self.n_rest)
        w_pb = rng.standard_normal((d_patch, self.n_face)) / np.sqrt(self.n_face)
        c_a = rng.standard_normal((EMBED_DIM, self.n_rest)) / np.sqrt(self.n_rest)
        c_b = rng.standard_normal((EMBED_DIM, self.n_face)) / np.sqrt(self.n_face)
        self._sem_patch_a = self._calibrate(w_pa, self._gen_rest, self.n_frozen, 1.0)
        self._sem_patch_b = self._calibrate(
            w_pb, self._gen_face, self.n_trainable, COUPLE_HEADROOM
        )
        self._sem_cls_a = self._calibrate(c_a, self._gen_rest, self.n_frozen, 1.0)
        self._sem_cls_b = self._calibrate(
            c_b, self._gen_face, self.n_trainable, COUPLE_HEADROOM
        )
        self._sem_patch_a_memo = _ProductMemo(self._sem_patch_a)
        self._sem_cls_a_memo = _ProductMemo(self._sem_cls_a)
        self.patch_grid_side = config.patch_grid_side

        self._detect_threshold = config.resolved_threshold(self.n_face)

        self._fingerprints = {
            "generator": hash_arrays(self._gen_face, self._gen_rest),
            "inverter": hash_arrays(self._gen_face_pinv, self._gen_rest_pinv),
            "identity_encoder": hash_arrays(self._id_proj),
            "semantic_encoder": hash_arrays(
                self._sem_patch_a, self._sem_patch_b, self._sem_cls_a, self._sem_cls_b
            ),
            "face_detector": hash_arrays(
                np.array([self._detect_threshold, float(self.n_face)])
            ),
        }

    @staticmethod
    def _calibrate(weights, gen_block, n_code, target_gain):
        """Rescale so a unit code perturbation moves the feature by
        ``target_gain`` in the root-mean-square sense."""
        gram_w = weights.T @ weights
        gram_g = gen_block @ gen_block.T
        mean_sq_gain = float(np.sum(gram_w * gram_g)) / n_code
        return weights * (target_gain / np.sqrt(mean_sq_gain))

    # -- code/image bookkeeping ---------------------------------------------------

    def _split_code(self, code: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.layer_split
        trainable = code[lo:hi].ravel()
        frozen = np.concatenate([code[:lo].ravel(), code[hi:].ravel()])
        return trainable, frozen

    def _join_code(self, trainable: np.ndarray, frozen: np.ndarray) -> np.ndarray:
        lo, hi = self.layer_split
        code = np.empty((LATENT_ROWS, LATENT_COLS))
        code[lo:hi] = trainable.reshape(hi - lo, LATENT_COLS)
        code[:lo] = frozen[: lo * LATENT_COLS].reshape(lo, LATENT_COLS)
        code[hi:] = frozen[lo * LATENT_COLS:].reshape(LATENT_ROWS - hi, LATENT_COLS)
        return code

    def _face_pixels(self, image: np.ndarray) -> np.ndarray:
        return np.asarray(image, dtype=np.float64).ravel()[self._face_idx]

    def _rest_pixels(self, image: np.ndarray) -> np.ndarray:
        return np.asarray(image, dtype=np.float64).ravel()[self._rest_idx]

    # -- Backend API ----------------------------------------------------------------

    def sample_latents(self, n: int, seed: int) -> list[np.ndarray]:
        if n < 0:
            raise ValidationError("sample count must be >= 0")
        rng = np.random.Generator(np.random.PCG64(derive_seed(seed, "synthetic-sample")))
        codes = []
        for _ in range(n):
            z = rng.standard_normal(LATENT_COLS)
            # Mapping stage is the identity here; the broadcast to all 18 rows
            # mirrors a mapping network feeding every synthesis layer.
            codes.append(np.tile(z, (LATENT_ROWS, 1)).astype(np.float32))
        return codes

    def _preclamp(self, code: np.ndarray) -> np.ndarray:
        trainable, frozen = self._split_code(np.asarray(code, dtype=np.float64))
        flat = np.empty(self.n_face + self.n_rest)
        flat[self._face_idx] = self._gen_face @ trainable + PIXEL_BIAS
        flat[self._rest_idx] = self._gen_rest_memo(frozen) + PIXEL_BIAS
        return flat

    def generate(self, code: np.ndarray) -> np.ndarray:
        code = validate_latent_code(code)
        flat = np.clip(self._preclamp(code), 0.0, 1.0)
        return flat.reshape(self.image_shape)

    def generate_vjp(self, code, grad_image, rows=None, image=None) -> np.ndarray:
        code = validate_latent_code(code)
        if image is not None:
            # Rendered image supplied by the caller: clamp is active exactly
            # where the pixel sits on the range boundary.
            flat = np.asarray(image, dtype=np.float64).ravel()
            mask = (flat > 0.0) & (flat < 1.0)
        else:
            flat = self._preclamp(code)
            mask = (flat > 0.0) & (flat < 1.0)
        g = np.asarray(grad_image, dtype=np.float64).ravel() * mask
        g_trainable = self._gen_face.T @ g[self._face_idx]
        if rows is not None and tuple(rows) == self.layer_split:
            # Caller consumes only the trainable rows; skip the frozen path.
            g_frozen = np.zeros(self.n_frozen)
        else:
            g_frozen = self._gen_rest.T @ g[self._rest_idx]
        return self._join_code(g_trainable, g_frozen)

    def invert(self, image: np.ndarray) -> np.ndarray:
        image = validate_image(image)
        u = self._gen_face_pinv @ (self._face_pixels(image) - PIXEL_BIAS)
        v = self._gen_rest_pinv @ (self._rest_pixels(image) - PIXEL_BIAS)
        return self._join_code(u, v).astype(np.float32)

    def _identity_raw(self, image: np.ndarray) -> np.ndarray:
        return self._id_proj @ (self._face_pixels(image) - PIXEL_BIAS)

    def embed_identity(self, image: np.ndarray) -> np.ndarray:
        image = validate_image(image)
        raw = self._identity_raw(image)
        norm = np.linalg.norm(raw)
        if norm < 1e-12:
            # Singular point (exactly bias-valued face region): fixed unit vector.
            out = np.zeros(EMBED_DIM)
            out[0] = 1.0
            return out
        return raw / norm

    def embed_identity_vjp(self, image: np.ndarray, grad_embedding: np.ndarray) -> np.ndarray:
        image = validate_image(image)
        raw = self._identity_raw(image)
        norm = np.linalg.norm(raw)
        if norm < 1e-12:
            return np.zeros(self.image_shape)
        e = raw / norm
        g = np.asarray(grad_embedding, dtype=np.float64)
        g_raw = (g - e * (e @ g)) / norm
        out = np.zeros(self.n_face + self.n_rest)
        out[self._face_idx] = self._id_proj.T @ g_raw
        return out.reshape(self.image_shape)

    def embed_semantic(self, image: np.ndarray) -> SemanticFeatures:
        image = validate_image(image)
        rest = self._rest_pixels(image) - PIXEL_BIAS
        face = self._face_pixels(image) - PIXEL_BIAS
        eps = self.config.eps_couple
        cls = self._sem_cls_a_memo(rest) + eps * (self._sem_cls_b @ face)
        patches = self._sem_patch_a_memo(rest) + eps * (self._sem_patch_b @ face)
        return SemanticFeatures(
            cls=cls,
            patches=patches.reshape(self.patch_grid_side ** 2, EMBED_DIM),
            patch_grid_side=self.patch_grid_side,
        )

    def embed_semantic_vjp(self, image, grad_cls, grad_patches) -> np.ndarray:
        image = validate_image(image)
        eps = self.config.eps_couple
        g_rest = np.zeros(self.n_rest)
        g_face = np.zeros(self.n_face)
        if grad_cls is not None:
            g = np.asarray(grad_cls, dtype=np.float64)
            g_rest += self._sem_cls_a.T @ g
            g_face += eps * (self._sem_cls_b.T @ g)
        if grad_patches is not None:
            g = np.asarray(grad_patches, dtype=np.float64).ravel()
            g_rest += self._sem_patch_a.T @ g
            g_face += eps * (self._sem_patch_b.T @ g)
        out = np.zeros(self.n_face + self.n_rest)
        out[self._face_idx] = g_face
        out[self._rest_idx] = g_rest
        return out.reshape(self.image_shape)

    def detect_face(self, image: np.ndarray) -> Detection:
        image = validate_image(image)
        score = float(self._face_pixels(image).sum() / np.sqrt(self.n_face))
        found = score > self._detect_threshold
        side = self.config.image_side
        a, b = side // 4, side - side // 4
        box = (a, a, b, b) if found else None
        confidence = float(np.clip(score / (2.0 * self._detect_threshold), 0.0, 1.0))
        return Detection(found=found, box=box, confidence=confidence)

    def detection_score(self, image: np.ndarray) -> float:
        """Raw detection projection; exposed so tests can bound it directly."""
        return float(self._face_pixels(validate_image(image)).sum() / np.sqrt(self.n_face))

    @property
    def face_indices(self) -> np.ndarray:
        """Flat pixel indices of the face region (identity content)."""
        return self._face_idx

    @property
    def rest_indices(self) -> np.ndarray:
        """Flat pixel indices of the surround (attribute content)."""
        return self._rest_idx

    @property
    def detection_threshold(self) -> float:
        return self._detect_threshold

    def fingerprints(self) -> dict[str, str]:
        return dict(self._fingerprints)

    def construction_params(self) -> dict:
        return {"kind": "synthetic", "synthetic": self.config.to_dict()}
