"""Synthetic world: labeled desk-scale datasets rendered by the synthetic
backend.

Ground-truth attributes are linear functionals of the centered pixels, so
they are exactly decodable from images by a linear probe. Outer-region
attributes read only the surround (which anonymization freezes); inner-region
attributes mix in a small share of the face region, so anonymizing at a low
margin perturbs them slightly. That share (``inner_id_share``) is the knob
that makes the privacy/utility trade-off measurable at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends.base import Backend, bundle_metadata
from .errors import ValidationError
from .imageio import save_image
from .manifests import ManifestItem, save_manifest
from .types import AttributeSpec
from .util import atomic_write_json, derive_seed, rng_for


@dataclass
class AttributeWorld:
    """Deterministic labeling functionals tied to one synthetic backend.

    All attribute margins live in a shared low-rank pixel basis
    (``rest_rank`` directions in the surround plus ``face_rank`` in the face
    region), mirroring how real facial attributes are a handful of semantic
    factors; this keeps them learnable from a few hundred samples.
    """

    n_inner: int = 23
    n_outer: int = 17
    inner_id_share: float = 0.12
    rest_rank: int = 12
    face_rank: int = 6
    seed: int = 0
    _spec: AttributeSpec = field(init=False, repr=False, default=None)
    _w_rest: np.ndarray = field(init=False, repr=False, default=None)
    _w_face: np.ndarray = field(init=False, repr=False, default=None)

    def params(self) -> dict:
        return {
            "n_inner": self.n_inner,
            "n_outer": self.n_outer,
            "inner_id_share": self.inner_id_share,
            "rest_rank": self.rest_rank,
            "face_rank": self.face_rank,
            "seed": self.seed,
        }

    @classmethod
    def from_params(cls, params: dict) -> "AttributeWorld":
        return cls(**params)

    @property
    def spec(self) -> AttributeSpec:
        if self._spec is None:
            names = [f"inner_{i:02d}" for i in range(self.n_inner)] + [
                f"outer_{i:02d}" for i in range(self.n_outer)
            ]
            region = {n: ("inner" if n.startswith("inner") else "outer") for n in names}
            self._spec = AttributeSpec(names=names, region=region)
        return self._spec

    def _ensure_functionals(self, backend) -> None:
        if self._w_rest is not None:
            return
        if self.inner_id_share < 0 or self.inner_id_share >= 1:
            raise ValidationError("inner_id_share must lie in [0, 1)")
        n_rest, n_face = backend.n_rest, backend.n_face
        k = self.n_inner + self.n_outer
        rng = rng_for(self.seed, "attribute-world")
        basis_rest, _ = np.linalg.qr(rng.standard_normal((n_rest, self.rest_rank)))
        basis_face, _ = np.linalg.qr(rng.standard_normal((n_face, self.face_rank)))
        w_rest = rng.standard_normal((k, self.rest_rank)) @ basis_rest.T
        w_face = rng.standard_normal((k, self.face_rank)) @ basis_face.T
        w_face[self.n_inner:] = 0.0    # outer attributes ignore the face region

        # Calibrate component scales on a probe sample so each margin is a
        # unit-variance score with the configured face-region share.
        probe_codes = backend.sample_latents(256, derive_seed(self.seed, "world-probe"))
        rest = np.stack([backend.generate(c).ravel()[backend.rest_indices] for c in probe_codes])
        face = np.stack([backend.generate(c).ravel()[backend.face_indices] for c in probe_codes])
        s_rest = (rest - 0.5) @ w_rest.T
        s_face = (face - 0.5) @ w_face.T
        std_rest = s_rest.std(axis=0)
        std_face = s_face.std(axis=0)
        q = self.inner_id_share
        w_rest *= (np.sqrt(1.0 - q) / std_rest)[:, None]
        shares = np.where(np.arange(k) < self.n_inner, np.sqrt(q), 0.0)
        safe = np.where(std_face > 0, std_face, 1.0)
        w_face *= (shares / safe)[:, None]
        self._w_rest, self._w_face = w_rest, w_face

    def margins(self, backend, image: np.ndarray) -> np.ndarray:
        self._ensure_functionals(backend)
        flat = np.asarray(image, dtype=np.float64).ravel()
        rest = flat[backend.rest_indices] - 0.5
        face = flat[backend.face_indices] - 0.5
        return self._w_rest @ rest + self._w_face @ face

    def labels(self, backend, image: np.ndarray) -> dict[str, int]:
        m = self.margins(backend, image)
        return {name: int(m[j] > 0) for j, name in enumerate(self.spec.names)}


def make_synthetic_dataset(
    backend: Backend,
    n: int,
    seed: int,
    out_dir: Path | str,
    world: AttributeWorld | None = None,
    test_fraction: float = 0.2,
) -> tuple[Path, AttributeWorld]:
    """Render ``n`` labeled images and write PNGs plus a manifest.

    Splits are assigned by a seeded permutation; the attribute spec and
    world parameters are written as a sidecar next to the manifest so later
    stages can rebuild the labeling functionals.
    """
    if n < 1:
        raise ValidationError("dataset size must be >= 1")
    out_dir = Path(out_dir)
    (out_dir / "images").mkdir(parents=True, exist_ok=True)
    world = world or AttributeWorld(seed=derive_seed(seed, "world"))

    n_test = int(round(n * test_fraction))
    perm = rng_for(seed, "split").permutation(n)
    test_ids = set(perm[:n_test].tolist())

    items = []
    for i in range(n):
        code = backend.sample_latents(1, derive_seed(seed, "dataset", i))[0]
        image = backend.generate(code)
        item_id = f"img_{i:05d}"
        path = out_dir / "images" / f"{item_id}.png"
        save_image(path, image)
        items.append(
            ManifestItem(
                id=item_id,
                path=str(path),
                split="test" if i in test_ids else "train",
                labels=world.labels(backend, image),
            )
        )
    manifest_path = out_dir / "manifest.jsonl"
    save_manifest(manifest_path, items)
    atomic_write_json(
        out_dir / "manifest.attributes.json",
        {
            "spec": world.spec.to_dict(),
            "world": world.params(),
            "backend": bundle_metadata(backend),
        },
    )
    return manifest_path, world


def fit_world_probe(backend: Backend, world: AttributeWorld, n: int = 1024,
                    seed: int = 1234):
    """Fit the closed-form linear probe; the desk-scale stand-in for a
    pretrained attribute classifier.

    The probe distills the world's continuous decision scores (margins are
    exactly linear in pixels, so a spanning sample recovers them to machine
    precision), playing the role of a classifier trained to convergence on
    abundant labeled data."""
    from .evaluation.classifier import RidgeProbeClassifier

    images, scores = [], []
    for i in range(n):
        code = backend.sample_latents(1, derive_seed(seed, "probe-fit", i))[0]
        img = backend.generate(code)
        images.append(img.ravel())
        scores.append(world.margins(backend, img))
    return RidgeProbeClassifier().fit_scores(np.stack(images), np.stack(scores))
