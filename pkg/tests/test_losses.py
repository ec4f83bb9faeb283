"""Identity / attribute / combined loss semantics."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from faceanon.errors import FeatureShapeMismatch
from faceanon.losses import (
    attribute_loss_from_features,
    identity_loss,
    identity_loss_from_embeddings,
    total_loss,
)
from faceanon.types import HyperParams, SemanticFeatures


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def test_identity_loss_identical_inputs_margin_one(backend, sample_image):
    loss, cos = identity_loss(sample_image, sample_image, 1.0, backend)
    assert cos == pytest.approx(1.0, abs=1e-9)
    assert loss == pytest.approx(0.0, abs=1e-9)


def test_identity_loss_orthogonal_margin_zero():
    e1 = np.zeros(512)
    e1[0] = 1.0
    e2 = np.zeros(512)
    e2[1] = 1.0
    loss, cos = identity_loss_from_embeddings(e1, e2, 0.0)
    assert cos == 0.0 and loss == 0.0


def test_identity_loss_direct_arithmetic():
    # cos 0.5 against margin 0.9 -> loss 0.4
    e1 = unit([1.0, 0.0] + [0.0] * 510)
    e2 = unit([0.5, np.sqrt(0.75)] + [0.0] * 510)
    loss, cos = identity_loss_from_embeddings(e1, e2, 0.9)
    assert cos == pytest.approx(0.5, abs=1e-12)
    assert loss == pytest.approx(0.4, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**31),
    margin=st.floats(0.0, 1.0, allow_nan=False),
)
def test_identity_loss_zero_set_property(seed, margin):
    # |cos - m| vanishes exactly when cos equals m: construct an embedding
    # pair with cosine exactly equal to the margin.
    rng = np.random.default_rng(seed)
    e1 = unit(rng.standard_normal(512))
    other = rng.standard_normal(512)
    other -= (other @ e1) * e1
    e2 = margin * e1 + np.sqrt(max(0.0, 1 - margin ** 2)) * unit(other)
    loss, cos = identity_loss_from_embeddings(e1, e2, margin)
    assert cos == pytest.approx(margin, abs=1e-9)
    assert loss == pytest.approx(0.0, abs=1e-9)
    # and it is strictly positive anywhere else
    off = min(1.0, margin + 0.25) if margin < 0.5 else margin - 0.25
    loss_off, _ = identity_loss_from_embeddings(e1, e2, off)
    assert loss_off > 0.0


def _features(values, grid=14):
    values = np.asarray(values, dtype=np.float64)
    return SemanticFeatures(cls=np.zeros(512), patches=values, patch_grid_side=grid)


def test_attribute_loss_identical_is_zero(backend, sample_image):
    f = backend.embed_semantic(sample_image)
    assert attribute_loss_from_features(f, f, "sum") == 0.0
    assert attribute_loss_from_features(f, f, "mean") == 0.0


def test_attribute_loss_constant_offset_arithmetic():
    # 196 patches of 512 features offset by 0.1 everywhere.
    base = np.zeros((196, 512))
    shifted = base + 0.1
    f_r, f_a = _features(base), _features(shifted)
    assert attribute_loss_from_features(f_a, f_r, "sum") == pytest.approx(10035.2, rel=1e-12)
    assert attribute_loss_from_features(f_a, f_r, "mean") == pytest.approx(0.1, rel=1e-12)


def test_attribute_loss_matches_scalar_loop_oracle():
    rng = np.random.default_rng(3)
    a = rng.standard_normal((16, 512))
    b = rng.standard_normal((16, 512))
    oracle = 0.0
    for i in range(16):
        for j in range(512):
            oracle += abs(a[i, j] - b[i, j])
    got = attribute_loss_from_features(_features(a, 4), _features(b, 4), "sum")
    assert got == pytest.approx(oracle, rel=1e-12)


def test_attribute_loss_shape_mismatch():
    with pytest.raises(FeatureShapeMismatch):
        attribute_loss_from_features(_features(np.zeros((16, 512)), 4),
                                     _features(np.zeros((196, 512)), 14))


def test_total_loss_degenerate_weights(backend, sample_code):
    other = backend.generate(backend.sample_latents(1, seed=9)[0])
    image = backend.generate(sample_code)

    hp_id = HyperParams(margin=0.3, weight_id=1.0, weight_att=0.0)
    rec = total_loss(image, other, hp_id, backend)
    assert rec.total == pytest.approx(rec.l_id, abs=1e-12)

    hp_att = HyperParams(margin=0.3, weight_id=0.0, weight_att=1.0)
    rec = total_loss(image, other, hp_att, backend)
    assert rec.total == pytest.approx(rec.l_att, abs=1e-12)


def test_total_loss_arithmetic():
    # l_id 0.4 and l_att 0.2 under weights (1, 0.5) -> 0.5
    assert 1.0 * 0.4 + 0.5 * 0.2 == pytest.approx(0.5)


def test_loss_record_invariants(backend, sample_code):
    other = backend.generate(backend.sample_latents(1, seed=10)[0])
    image = backend.generate(sample_code)
    hp = HyperParams(margin=0.25, weight_id=1.3, weight_att=0.7)
    rec = total_loss(image, other, hp, backend)
    assert rec.l_id == pytest.approx(abs(rec.cos_sim - hp.margin), abs=1e-6)
    assert rec.l_att >= 0.0
    assert rec.total == pytest.approx(
        hp.weight_id * rec.l_id + hp.weight_att * rec.l_att, abs=1e-6
    )
    assert -1.0 <= rec.cos_sim <= 1.0
