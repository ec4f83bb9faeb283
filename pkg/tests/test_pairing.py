"""Pool construction, dataset inversion, nearest-neighbor pairing (against a
brute-force oracle), and latent splicing."""

import numpy as np
import pytest

from faceanon.errors import EmptyPool, PoolTooSmall, SkipLimitExceeded, ValidationError
from faceanon.manifests import ManifestItem, PairEntry
from faceanon.pairing import (
    FakePool,
    PoolEntry,
    RealRecord,
    build_pool,
    invert_dataset,
    pair_nearest,
    splice_init,
)


def _fake_pool(features, seed=0):
    entries = [
        PoolEntry(fake_id=f"fake_{i:06d}", code=np.zeros((18, 512), dtype=np.float32),
                  cls_feature=np.asarray(f, dtype=np.float64))
        for i, f in enumerate(features)
    ]
    return FakePool(entries=entries, seed=seed)


def _reals(features):
    return [
        RealRecord(real_id=f"img_{i:05d}", path="", code=np.zeros((18, 512), np.float32),
                   cls_feature=np.asarray(f, dtype=np.float64))
        for i, f in enumerate(features)
    ]


def pair_oracle(reals, pool):
    """Exhaustive double loop keeping the first strict minimum."""
    out = []
    for r in sorted(reals, key=lambda x: x.real_id):
        best_j, best_d2 = None, None
        for j, entry in enumerate(pool.entries):
            d2 = float(np.sum((r.cls_feature - entry.cls_feature) ** 2))
            if best_d2 is None or d2 < best_d2:
                best_j, best_d2 = j, d2
        out.append(PairEntry(real_id=r.real_id, fake_id=pool.entries[best_j].fake_id,
                             distance=float(np.sqrt(best_d2))))
    return out


# -- build_pool ----------------------------------------------------------------

def test_build_pool_too_small(backend):
    with pytest.raises(PoolTooSmall):
        build_pool(backend, size=10, seed=1, n_real=10)


def test_build_pool_deterministic(backend):
    a = build_pool(backend, size=12, seed=5, n_real=4)
    b = build_pool(backend, size=12, seed=5, n_real=4)
    assert a.fingerprint() == b.fingerprint()
    c = build_pool(backend, size=12, seed=6, n_real=4)
    assert a.fingerprint() != c.fingerprint()


def test_build_pool_features_recomputable(backend):
    # Full recomputation oracle: stored cls features must equal
    # embed_semantic(generate(code)).cls from scratch.
    pool = build_pool(backend, size=20, seed=5, n_real=4)
    for entry in pool.entries:
        fresh = backend.embed_semantic(backend.generate(entry.code)).cls
        assert np.array_equal(fresh, entry.cls_feature)


def test_build_pool_order_independent(backend):
    forward = build_pool(backend, size=10, seed=5, n_real=4)
    reversed_map = lambda fn, xs: [fn(x) for x in reversed(list(xs))]  # noqa: E731
    backward = build_pool(backend, size=10, seed=5, n_real=4, mapper=reversed_map)
    assert forward.fingerprint() == backward.fingerprint()


# -- invert_dataset -------------------------------------------------------------

def test_invert_dataset_empty(backend):
    records, skips = invert_dataset(backend, [])
    assert records == [] and skips == []


def test_invert_dataset_records_match_oracle(backend, tmp_path):
    # Independent least-squares pseudo-inverse oracle for the inverted codes,
    # applied to the decoded files exactly as the pipeline reads them.
    import scipy.linalg

    from faceanon.imageio import load_image, save_image

    items = []
    for i in range(5):
        code = backend.sample_latents(1, seed=50 + i)[0]
        path = tmp_path / f"i{i}.png"
        save_image(path, backend.generate(code))
        items.append(ManifestItem(id=f"img_{i:05d}", path=str(path)))
    records, skips = invert_dataset(backend, items)
    assert not skips
    for rec, item in zip(records, items):
        img = load_image(item.path)
        face = img.ravel()[backend.face_indices] - 0.5
        u_oracle, *_ = scipy.linalg.lstsq(backend._gen_face, face)
        assert np.allclose(rec.code[3:8].ravel().astype(np.float64), u_oracle, atol=1e-5)
        # cls features belong to the original image, not its reconstruction
        assert np.array_equal(rec.cls_feature, backend.embed_semantic(img).cls)
        recon_cls = backend.embed_semantic(backend.generate(rec.code)).cls
        assert not np.array_equal(rec.cls_feature, recon_cls)


def test_invert_dataset_skip_policy(backend, tmp_path):
    from faceanon.imageio import save_image

    items = []
    for i in range(9):
        code = backend.sample_latents(1, seed=70 + i)[0]
        path = tmp_path / f"ok{i}.png"
        save_image(path, backend.generate(code))
        items.append(ManifestItem(id=f"ok_{i}", path=str(path)))
    corrupt = tmp_path / "broken.png"
    corrupt.write_bytes(b"not a png")
    items.append(ManifestItem(id="zz_broken", path=str(corrupt)))

    records, skips = invert_dataset(backend, items, skip_limit=0.2)
    assert len(records) == 9
    assert len(skips) == 1 and skips[0].real_id == "zz_broken"

    with pytest.raises(SkipLimitExceeded):
        invert_dataset(backend, items, skip_limit=0.01)


# -- pair_nearest ----------------------------------------------------------------

def test_pair_zero_distance_selected():
    rng = np.random.default_rng(1)
    pool_feats = rng.standard_normal((10, 512))
    reals = _reals([pool_feats[4]])
    pairs = pair_nearest(reals, _fake_pool(pool_feats))
    assert pairs[0].fake_id == "fake_000004"
    assert pairs[0].distance == 0.0


def test_pair_singleton_pool():
    rng = np.random.default_rng(2)
    reals = _reals(rng.standard_normal((7, 512)))
    pairs = pair_nearest(reals, _fake_pool([rng.standard_normal(512)]))
    assert all(p.fake_id == "fake_000000" for p in pairs)


def test_pair_matches_bruteforce_oracle():
    rng = np.random.default_rng(3)
    reals = _reals(rng.standard_normal((50, 512)))
    pool = _fake_pool(rng.standard_normal((200, 512)))
    got = pair_nearest(reals, pool)
    expect = pair_oracle(reals, pool)
    assert [(p.real_id, p.fake_id, p.distance) for p in got] == [
        (p.real_id, p.fake_id, p.distance) for p in expect
    ]


def test_pair_tie_break_smallest_fake_id():
    rng = np.random.default_rng(4)
    shared = rng.standard_normal(512)
    feats = [rng.standard_normal(512), shared, rng.standard_normal(512), shared]
    reals = _reals([shared])
    pairs = pair_nearest(reals, _fake_pool(feats))
    assert pairs[0].fake_id == "fake_000001"   # first of the two exact ties


def test_pair_optimality_property():
    rng = np.random.default_rng(5)
    reals = _reals(rng.standard_normal((20, 512)))
    pool = _fake_pool(rng.standard_normal((60, 512)))
    by_id = {e.fake_id: e for e in pool.entries}
    for p in pair_nearest(reals, pool):
        r = next(x for x in reals if x.real_id == p.real_id)
        chosen = float(np.sqrt(np.sum((r.cls_feature - by_id[p.fake_id].cls_feature) ** 2)))
        assert abs(chosen - p.distance) < 1e-9
        for e in pool.entries:
            d = float(np.sqrt(np.sum((r.cls_feature - e.cls_feature) ** 2)))
            assert d >= p.distance - 1e-12


def test_pair_distance_recheckable():
    rng = np.random.default_rng(6)
    reals = _reals(rng.standard_normal((10, 512)))
    pool = _fake_pool(rng.standard_normal((30, 512)))
    by_id = {e.fake_id: e for e in pool.entries}
    for p in pair_nearest(reals, pool):
        r = next(x for x in reals if x.real_id == p.real_id)
        recomputed = float(np.linalg.norm(r.cls_feature - by_id[p.fake_id].cls_feature))
        assert abs(recomputed - p.distance) < 1e-6


def test_pair_empty_pool_rejected():
    reals = _reals(np.zeros((1, 512)))
    with pytest.raises(EmptyPool):
        pair_nearest(reals, FakePool(entries=[], seed=0))


def test_pair_unique_mode_one_to_one():
    rng = np.random.default_rng(7)
    reals = _reals(rng.standard_normal((15, 512)))
    pool = _fake_pool(rng.standard_normal((40, 512)))
    pairs = pair_nearest(reals, pool, unique=True)
    fakes = [p.fake_id for p in pairs]
    assert len(set(fakes)) == len(fakes)
    # greedy global-minimum assignment: the smallest overall distance keeps
    # its preferred neighbor
    plain = pair_nearest(reals, pool)
    best = min(plain, key=lambda p: p.distance)
    chosen = {p.real_id: p for p in pairs}
    assert chosen[best.real_id].fake_id == best.fake_id


def test_pair_approx_validated_against_exact():
    rng = np.random.default_rng(8)
    # Clustered features: random projection to 128 dims keeps recall@1 high.
    centers = rng.standard_normal((40, 512)) * 10
    reals = _reals(centers + 0.01 * rng.standard_normal((40, 512)))
    pool = _fake_pool(np.repeat(centers, 3, axis=0) + 0.05 * rng.standard_normal((120, 512)))
    exact = pair_nearest(reals, pool)
    approx = pair_nearest(reals, pool, approx_dims=128)
    assert [p.fake_id for p in approx] == [p.fake_id for p in exact]


def test_pair_approx_falls_back_when_recall_poor():
    rng = np.random.default_rng(9)
    reals = _reals(rng.standard_normal((40, 512)))
    pool = _fake_pool(rng.standard_normal((400, 512)))
    exact = pair_nearest(reals, pool)
    # 1-dim projection cannot reach recall 0.99 on diffuse data: must fall back
    approx = pair_nearest(reals, pool, approx_dims=1)
    assert [p.fake_id for p in approx] == [p.fake_id for p in exact]


# -- splice_init -------------------------------------------------------------------

def _record_with_code(code):
    return RealRecord(real_id="img_00000", path="", code=code,
                      cls_feature=np.zeros(512))


def test_splice_self_identity(backend):
    code = backend.sample_latents(1, seed=11)[0]
    rec = _record_with_code(code)
    assert np.array_equal(splice_init(rec, code).assembled(), code)


def test_splice_row_membership(backend):
    r_code = backend.sample_latents(1, seed=12)[0]
    f_code = backend.sample_latents(1, seed=13)[0]
    spliced = splice_init(_record_with_code(r_code), f_code, "fake_000000")
    assembled = spliced.assembled()
    assert np.array_equal(assembled[3:8], f_code[3:8])
    assert np.array_equal(assembled[0:3], r_code[0:3])
    assert np.array_equal(assembled[8:18], r_code[8:18])


def test_splice_elementwise_diff_oracle():
    rng = np.random.default_rng(10)
    for _ in range(20):
        r_code = rng.standard_normal((18, 512)).astype(np.float32)
        f_code = rng.standard_normal((18, 512)).astype(np.float32)
        assembled = splice_init(_record_with_code(r_code), f_code).assembled()
        diff_r = assembled != r_code
        diff_f = assembled != f_code
        assert diff_r[3:8].all() and not diff_r[0:3].any() and not diff_r[8:18].any()
        assert not diff_f[3:8].any() and diff_f[0:3].all() and diff_f[8:18].all()


def test_splice_custom_layer_split(backend):
    r_code = backend.sample_latents(1, seed=14)[0]
    f_code = backend.sample_latents(1, seed=15)[0]
    spliced = splice_init(_record_with_code(r_code), f_code, layer_split=(2, 10))
    assembled = spliced.assembled()
    assert spliced.trainable.shape == (8, 512)
    assert np.array_equal(assembled[2:10], f_code[2:10])
    assert np.array_equal(assembled[0:2], r_code[0:2])
    assert np.array_equal(assembled[10:18], r_code[10:18])


def test_splice_rejects_bad_codes():
    with pytest.raises(ValidationError):
        splice_init(_record_with_code(np.zeros((18, 512), np.float32)),
                    np.zeros((17, 512)))
