"""Synthetic backend contracts: sampling statistics, determinism, exact
inversion, encoder subspace structure, detection, and gradient consistency."""

import numpy as np
import pytest

from faceanon.backends import SyntheticBackend, SyntheticConfig
from faceanon.errors import ValidationError
from faceanon.util import derive_seed


def test_sample_latents_empty(backend):
    assert backend.sample_latents(0, seed=7) == []


def test_sample_latents_deterministic(backend):
    a = backend.sample_latents(5, seed=7)
    b = backend.sample_latents(5, seed=7)
    for x, y in zip(a, b):
        assert x.dtype == np.float32
        assert np.array_equal(x, y)


def test_sample_latents_broadcast_rows(backend):
    code = backend.sample_latents(1, seed=3)[0]
    for row in range(1, 18):
        assert np.array_equal(code[0], code[row])


def test_sample_latents_gaussian_moments(backend):
    # Monte-Carlo check of the declared N(0, I) base sampler.
    codes = backend.sample_latents(10000, seed=1)
    z = np.stack([c[0] for c in codes]).astype(np.float64)
    assert np.abs(z.mean(axis=0)).max() < 0.05
    assert np.abs(z.std(axis=0) - 1.0).max() < 0.05


def test_generate_deterministic(backend, sample_code, sample_image):
    again = backend.generate(sample_code)
    assert np.array_equal(again, sample_image)


def test_generate_zero_code_is_bias(backend):
    img = backend.generate(np.zeros((18, 512), dtype=np.float32))
    assert np.allclose(img, 0.5)


def test_generate_rejects_nonfinite(backend, sample_code):
    bad = np.array(sample_code, dtype=np.float64)
    bad[3, 10] = np.nan
    with pytest.raises(ValidationError):
        backend.generate(bad)


def test_generate_rejects_bad_shape(backend):
    with pytest.raises(ValidationError):
        backend.generate(np.zeros((17, 512)))


def test_generate_jacobian_matches_finite_differences(backend, sample_code):
    # Analytic linear map (via one-hot VJPs) vs central differences on 20
    # random (pixel, coordinate) probes.
    rng = np.random.default_rng(5)
    code = np.array(sample_code, dtype=np.float64)
    h = 1e-6
    for _ in range(20):
        pix = tuple(rng.integers(s) for s in backend.image_shape)
        row, col = int(rng.integers(18)), int(rng.integers(512))
        one_hot = np.zeros(backend.image_shape)
        one_hot[pix] = 1.0
        analytic = backend.generate_vjp(code, one_hot)[row, col]
        cp, cm = code.copy(), code.copy()
        cp[row, col] += h
        cm[row, col] -= h
        fd = (backend.generate(cp)[pix] - backend.generate(cm)[pix]) / (2 * h)
        assert abs(fd - analytic) <= 1e-5 * max(abs(analytic), 1e-3)


def test_invert_roundtrip_exact(backend, sample_code, sample_image):
    recon = backend.generate(backend.invert(sample_image))
    assert np.abs(recon - sample_image).max() < 1e-5


def test_invert_injective_on_generated_images(backend):
    # Oracle: an independent least-squares pseudo-inverse must give distinct
    # codes for distinct images; the backend must agree with it.
    import scipy.linalg

    codes = backend.sample_latents(100, seed=9)
    images = [backend.generate(c) for c in codes]
    inverted = [backend.invert(img) for img in images]
    for i in range(0, 100, 2):
        a, b = inverted[i], inverted[i + 1]
        assert not np.array_equal(a, b)
    # independent pseudo-inverse oracle on a few items
    for img, inv in zip(images[:5], inverted[:5]):
        face = img.ravel()[backend.face_indices] - 0.5
        u_oracle, *_ = scipy.linalg.lstsq(backend._gen_face, face)
        assert np.allclose(inv[3:8].ravel().astype(np.float64), u_oracle, atol=1e-4)


def test_invert_returns_float32_code_shape(backend, sample_image):
    code = backend.invert(sample_image)
    assert code.shape == (18, 512)
    assert code.dtype == np.float32
    assert np.all(np.isfinite(code))


def test_identity_embedding_unit_norm(backend):
    rng = np.random.default_rng(2)
    for _ in range(20):
        img = np.clip(rng.normal(0.5, 0.1, size=backend.image_shape), 0, 1)
        emb = backend.embed_identity(img)
        assert abs(np.linalg.norm(emb) - 1.0) < 1e-5


def test_identity_invariant_to_frozen_rows(backend):
    rng = np.random.default_rng(3)
    base = np.array(backend.sample_latents(1, seed=1)[0], dtype=np.float64)
    for _ in range(100):
        other = base.copy()
        other[0:3] += rng.standard_normal((3, 512))
        other[8:18] += rng.standard_normal((10, 512))
        e1 = backend.embed_identity(backend.generate(base))
        e2 = backend.embed_identity(backend.generate(other))
        assert np.abs(e1 - e2).max() < 1e-6


def test_identity_responds_to_trainable_rows(backend):
    rng = np.random.default_rng(4)
    base = np.array(backend.sample_latents(1, seed=2)[0], dtype=np.float64)
    e1 = backend.embed_identity(backend.generate(base))
    for _ in range(100):
        pert = rng.standard_normal((5, 512))
        pert *= 10.0 / np.linalg.norm(pert)
        other = base.copy()
        other[3:8] += pert
        e2 = backend.embed_identity(backend.generate(other))
        assert float(e1 @ e2) < 0.99


def test_semantic_patch_shape(backend, sample_image):
    feats = backend.embed_semantic(sample_image)
    assert feats.patches.shape == (backend.patch_grid_side ** 2, 512)
    assert feats.cls.shape == (512,)


def test_semantic_invariant_to_trainable_rows_at_zero_coupling(backend_eps0):
    rng = np.random.default_rng(6)
    base = np.array(backend_eps0.sample_latents(1, seed=3)[0], dtype=np.float64)
    f1 = backend_eps0.embed_semantic(backend_eps0.generate(base))
    for _ in range(20):
        other = base.copy()
        other[3:8] += rng.standard_normal((5, 512))
        f2 = backend_eps0.embed_semantic(backend_eps0.generate(other))
        assert np.array_equal(f1.patches, f2.patches)
        assert np.array_equal(f1.cls, f2.cls)


def test_semantic_coupling_ratio_bounded(backend):
    # Patch response to a unit perturbation in the trainable rows stays below
    # eps_couple times the response to an equal-norm frozen-row perturbation.
    rng = np.random.default_rng(7)
    eps = backend.config.eps_couple
    for i in range(50):
        base = np.array(backend.sample_latents(1, seed=100 + i)[0], dtype=np.float64)
        f0 = backend.embed_semantic(backend.generate(base)).patches
        p_id = rng.standard_normal((5, 512))
        p_id /= np.linalg.norm(p_id)
        p_fr = rng.standard_normal((10, 512))
        p_fr /= np.linalg.norm(p_fr)
        c_id, c_fr = base.copy(), base.copy()
        c_id[3:8] += p_id
        c_fr[8:18] += p_fr
        r_id = np.linalg.norm(backend.embed_semantic(backend.generate(c_id)).patches - f0)
        r_fr = np.linalg.norm(backend.embed_semantic(backend.generate(c_fr)).patches - f0)
        assert r_id <= eps * max(r_fr, 1.0)
        assert r_id / r_fr <= eps


def test_detect_face_on_generated_images(backend):
    # Minimize the detection score over 10k prior samples: the generator's
    # range must clear the threshold everywhere.
    scores = []
    for i in range(10000):
        code = backend.sample_latents(1, seed=derive_seed(0, "det", i))[0]
        scores.append(backend.detection_score(backend.generate(code)))
    assert min(scores) > backend.detection_threshold


def test_detect_face_zeros_image(backend):
    det = backend.detect_face(np.zeros(backend.image_shape))
    assert det.found is False
    assert det.box is None


def test_detect_face_deterministic(backend, sample_image):
    d1 = backend.detect_face(sample_image)
    d2 = backend.detect_face(sample_image)
    assert (d1.found, d1.box, d1.confidence) == (d2.found, d2.box, d2.confidence)


def test_backend_determinism_across_instances(backend, sample_code):
    other = SyntheticBackend(SyntheticConfig(seed=7))
    assert backend.fingerprints() == other.fingerprints()
    assert np.array_equal(backend.generate(sample_code), other.generate(sample_code))


def test_fingerprints_differ_across_seeds():
    a = SyntheticBackend(SyntheticConfig(seed=7, image_side=8))
    b = SyntheticBackend(SyntheticConfig(seed=8, image_side=8))
    assert a.fingerprints() != b.fingerprints()


def test_vjp_consistency_embed_identity(backend, sample_image):
    # <J^T g, v> must equal <g, J v> with J v from finite differences.
    rng = np.random.default_rng(8)
    g = rng.standard_normal(512)
    back = backend.embed_identity_vjp(sample_image, g)
    h = 1e-6
    for _ in range(10):
        v = rng.standard_normal(backend.image_shape)
        xp = np.clip(sample_image + h * v, 0, 1)
        xm = np.clip(sample_image - h * v, 0, 1)
        jv = (backend.embed_identity(xp) - backend.embed_identity(xm)) / (2 * h)
        lhs = float((back * v).sum())
        rhs = float(g @ jv)
        assert abs(lhs - rhs) < 1e-4 * max(abs(rhs), 1e-6)


def test_vjp_consistency_embed_semantic(backend, sample_image):
    rng = np.random.default_rng(9)
    p = backend.patch_grid_side ** 2
    g_cls = rng.standard_normal(512)
    g_patches = rng.standard_normal((p, 512))
    back = backend.embed_semantic_vjp(sample_image, g_cls, g_patches)
    h = 1e-6
    for _ in range(10):
        v = rng.standard_normal(backend.image_shape)
        fp = backend.embed_semantic(np.clip(sample_image + h * v, 0, 1))
        fm = backend.embed_semantic(np.clip(sample_image - h * v, 0, 1))
        rhs = float(g_cls @ (fp.cls - fm.cls) + (g_patches * (fp.patches - fm.patches)).sum()) / (2 * h)
        lhs = float((back * v).sum())
        assert abs(lhs - rhs) < 1e-4 * max(abs(rhs), 1e-6)
