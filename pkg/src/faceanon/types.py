"""Domain types and boundary validators.

Latent codes and images travel as plain numpy arrays; the validators here
enforce the shape/range/finiteness contracts at module boundaries. Structured
records (spliced codes, detections, semantic features) are dataclasses.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

LATENT_ROWS = 18
LATENT_COLS = 512
EMBED_DIM = 512

# Default W+ row partition: rows [0, 3) and [8, 18) are frozen, rows [3, 8)
# are the trainable identity-bearing block.
DEFAULT_LAYER_SPLIT = (3, 8)


def validate_latent_code(code: np.ndarray, name: str = "latent code") -> np.ndarray:
    code = np.asarray(code)
    if code.shape != (LATENT_ROWS, LATENT_COLS):
        raise ValidationError(
            f"{name}: expected shape {(LATENT_ROWS, LATENT_COLS)}, got {code.shape}"
        )
    if not np.all(np.isfinite(code)):
        raise ValidationError(f"{name}: contains non-finite values")
    return code


def validate_image(image: np.ndarray, name: str = "image") -> np.ndarray:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise ValidationError(f"{name}: expected HxWx3 array, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise ValidationError(f"{name}: contains non-finite values")
    if image.min() < -1e-6 or image.max() > 1 + 1e-6:
        raise ValidationError(f"{name}: values outside canonical range [0, 1]")
    return image


def validate_unit_vector(vec: np.ndarray, tol: float = 1e-5) -> np.ndarray:
    vec = np.asarray(vec)
    if vec.shape != (EMBED_DIM,):
        raise ValidationError(f"identity embedding: expected ({EMBED_DIM},), got {vec.shape}")
    if not np.all(np.isfinite(vec)):
        raise ValidationError("identity embedding: contains non-finite values")
    norm = float(np.linalg.norm(vec))
    if abs(norm - 1.0) > tol:
        raise ValidationError(f"identity embedding: norm {norm} not within {tol} of 1")
    return vec


@dataclass
class SemanticFeatures:
    """Class-token vector plus the patch-token grid of the semantic encoder."""

    cls: np.ndarray          # (512,)
    patches: np.ndarray      # (P, 512) with P = patch_grid_side ** 2
    patch_grid_side: int

    def __post_init__(self):
        self.cls = np.asarray(self.cls, dtype=np.float64)
        self.patches = np.asarray(self.patches, dtype=np.float64)
        if self.cls.shape != (EMBED_DIM,):
            raise ValidationError(f"semantic cls: expected ({EMBED_DIM},), got {self.cls.shape}")
        p = self.patch_grid_side ** 2
        if self.patches.shape != (p, EMBED_DIM):
            raise ValidationError(
                f"semantic patches: expected ({p}, {EMBED_DIM}), got {self.patches.shape}"
            )
        if not (np.all(np.isfinite(self.cls)) and np.all(np.isfinite(self.patches))):
            raise ValidationError("semantic features: contain non-finite values")


@dataclass
class Detection:
    found: bool
    box: tuple[int, int, int, int] | None = None   # (x0, y0, x1, y1)
    confidence: float = 0.0


@dataclass
class SplicedCode:
    """A W+ code split into frozen rows (from the real inversion) and a
    trainable block (seeded from the fake neighbor)."""

    frozen_low: np.ndarray    # rows [0, lo)
    trainable: np.ndarray     # rows [lo, hi)
    frozen_high: np.ndarray   # rows [hi, 18)
    real_id: str
    fake_id: str
    layer_split: tuple[int, int] = DEFAULT_LAYER_SPLIT

    def __post_init__(self):
        lo, hi = self.layer_split
        if not (0 < lo < hi < LATENT_ROWS):
            raise ValidationError(f"layer split {self.layer_split} out of range")
        for arr, rows, name in (
            (self.frozen_low, lo, "frozen_low"),
            (self.trainable, hi - lo, "trainable"),
            (self.frozen_high, LATENT_ROWS - hi, "frozen_high"),
        ):
            arr = np.asarray(arr)
            if arr.shape != (rows, LATENT_COLS):
                raise ValidationError(f"spliced {name}: expected ({rows}, {LATENT_COLS}), got {arr.shape}")
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"spliced {name}: contains non-finite values")

    def assembled(self) -> np.ndarray:
        """Reconstruct the full 18x512 code (lossless by construction)."""
        return np.concatenate([self.frozen_low, self.trainable, self.frozen_high], axis=0)

    def with_trainable(self, block: np.ndarray) -> "SplicedCode":
        return SplicedCode(
            frozen_low=self.frozen_low,
            trainable=np.asarray(block),
            frozen_high=self.frozen_high,
            real_id=self.real_id,
            fake_id=self.fake_id,
            layer_split=self.layer_split,
        )


@dataclass
class HyperParams:
    """Latent-optimization settings. ``steps_per_epoch = 0`` is permitted as a
    no-op schedule for tests."""

    margin: float = 0.0
    weight_id: float = 1.0
    weight_att: float = 1.0
    epochs: int = 50
    steps_per_epoch: int = 1
    learning_rate: float = 0.01
    att_normalization: str = "mean"   # "mean" or "sum"
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.margin <= 1.0:
            raise ValidationError(f"margin must lie in [0, 1], got {self.margin}")
        if self.weight_id < 0 or self.weight_att < 0:
            raise ValidationError("loss weights must be non-negative")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if self.steps_per_epoch < 0:
            raise ValidationError("steps_per_epoch must be >= 0")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.att_normalization not in ("mean", "sum"):
            raise ValidationError("att_normalization must be 'mean' or 'sum'")

    @property
    def total_steps(self) -> int:
        return self.epochs * self.steps_per_epoch


@dataclass
class AttributeSpec:
    """Attribute names partitioned into inner- and outer-face regions."""

    names: list[str]
    region: dict[str, str]    # name -> "inner" | "outer"

    def __post_init__(self):
        if sorted(self.names) != sorted(self.region):
            raise ValidationError("attribute regions must partition the name list")
        bad = {r for r in self.region.values() if r not in ("inner", "outer")}
        if bad:
            raise ValidationError(f"unknown attribute regions: {sorted(bad)}")

    @property
    def inner_names(self) -> list[str]:
        return [n for n in self.names if self.region[n] == "inner"]

    @property
    def outer_names(self) -> list[str]:
        return [n for n in self.names if self.region[n] == "outer"]

    def to_dict(self) -> dict:
        return {"names": list(self.names), "region": dict(self.region)}

    @classmethod
    def from_dict(cls, d: dict) -> "AttributeSpec":
        return cls(names=list(d["names"]), region=dict(d["region"]))


# The standard 40-attribute face benchmark partition; the 17 peripheral
# attributes (hair, headwear, jewelry, face outline) form the outer region.
CELEBA_OUTER = [
    "Bald", "Bangs", "Black_Hair", "Blond_Hair", "Brown_Hair", "Double_Chin",
    "Gray_Hair", "Receding_Hairline", "Sideburns", "Straight_Hair", "Wavy_Hair",
    "Wearing_Earrings", "Wearing_Hat", "Wearing_Necklace", "Wearing_Necktie",
    "Oval_Face", "Chubby",
]
CELEBA_INNER = [
    "5_o_Clock_Shadow", "Arched_Eyebrows", "Attractive", "Bags_Under_Eyes",
    "Big_Lips", "Big_Nose", "Blurry", "Bushy_Eyebrows", "Eyeglasses", "Goatee",
    "Heavy_Makeup", "High_Cheekbones", "Male", "Mouth_Slightly_Open", "Mustache",
    "Narrow_Eyes", "No_Beard", "Pale_Skin", "Pointy_Nose", "Rosy_Cheeks",
    "Smiling", "Wearing_Lipstick", "Young",
]


def celeba_attribute_spec() -> AttributeSpec:
    names = sorted(CELEBA_INNER + CELEBA_OUTER)
    region = {n: "inner" for n in CELEBA_INNER}
    region.update({n: "outer" for n in CELEBA_OUTER})
    return AttributeSpec(names=names, region=region)
