"""Fake-pool construction, dataset inversion, nearest-neighbor pairing, and
latent splicing.

The fake pool must be strictly larger than the real set. Each real image is
paired with the fake pool entry whose semantic class-token feature is closest
in Euclidean distance (ties broken by smallest fake_id), and the trainable
block of the spliced code is initialized from that neighbor while the frozen
rows are copied verbatim from the real image's inversion.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends.base import Backend
from .errors import EmptyPool, PoolTooSmall, SkipLimitExceeded, ValidationError
from .manifests import ManifestItem, PairEntry
from .types import EMBED_DIM, LATENT_COLS, SplicedCode, validate_latent_code
from .util import derive_seed, hash_arrays


@dataclass
class PoolEntry:
    fake_id: str
    code: np.ndarray           # (18, 512) float32
    cls_feature: np.ndarray    # (512,) float64


@dataclass
class FakePool:
    entries: list[PoolEntry]
    seed: int

    def __post_init__(self):
        ids = [e.fake_id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValidationError("fake pool contains duplicate ids")
        self.entries = sorted(self.entries, key=lambda e: e.fake_id)

    @property
    def size(self) -> int:
        return len(self.entries)

    def fingerprint(self) -> str:
        import hashlib

        h = hashlib.sha256()
        h.update("\x1f".join(e.fake_id for e in self.entries).encode())
        h.update(hash_arrays(*(e.code for e in self.entries),
                             *(e.cls_feature for e in self.entries)).encode())
        return h.hexdigest()

    def feature_matrix(self) -> np.ndarray:
        return np.stack([e.cls_feature for e in self.entries])


@dataclass
class RealRecord:
    real_id: str
    path: str
    code: np.ndarray           # inverted (18, 512) float32
    cls_feature: np.ndarray    # (512,) float64, from the ORIGINAL image
    split: str = "train"
    labels: dict[str, int] | None = None


@dataclass
class SkipEntry:
    real_id: str
    path: str
    reason: str


def pool_entry_id(index: int) -> str:
    return f"fake_{index:06d}"


def make_pool_entry(backend: Backend, pool_seed: int, index: int) -> PoolEntry:
    """Single pool item; per-item seed keeps this order-independent."""
    code = backend.sample_latents(1, derive_seed(pool_seed, "pool", index))[0]
    feats = backend.embed_semantic(backend.generate(code))
    return PoolEntry(fake_id=pool_entry_id(index), code=code, cls_feature=feats.cls)


def build_pool(
    backend: Backend,
    size: int,
    seed: int,
    *,
    n_real: int,
    mapper=map,
) -> FakePool:
    """Generate the fake pool. ``size`` must strictly exceed ``n_real``.

    ``mapper`` lets the pipeline substitute a parallel map; entries depend
    only on (seed, index) so any execution order yields the same pool.
    """
    if size <= n_real:
        raise PoolTooSmall(
            f"pool size {size} must strictly exceed the real-record count {n_real}"
        )
    entries = list(mapper(lambda i: make_pool_entry(backend, seed, i), range(size)))
    return FakePool(entries=entries, seed=seed)


def invert_item(backend: Backend, item: ManifestItem, image: np.ndarray) -> RealRecord:
    code = backend.invert(image)
    feats = backend.embed_semantic(image)   # features of the original, not its reconstruction
    return RealRecord(
        real_id=item.id,
        path=item.path,
        code=code,
        cls_feature=feats.cls,
        split=item.split,
        labels=item.labels,
    )


def invert_dataset(
    backend: Backend,
    items: list[ManifestItem],
    *,
    skip_limit: float = 0.01,
    image_loader=None,
    mapper=map,
) -> tuple[list[RealRecord], list[SkipEntry]]:
    """Invert every manifest row; unreadable or rejected items are recorded
    as skips, and the run fails only if the skip fraction exceeds
    ``skip_limit``."""
    from .imageio import load_image

    loader = image_loader or load_image

    def job(item: ManifestItem):
        try:
            return invert_item(backend, item, loader(item.path))
        except Exception as exc:   # per-item isolation; skip policy decides below
            return SkipEntry(real_id=item.id, path=item.path,
                             reason=f"{type(exc).__name__}: {exc}")

    results = list(mapper(job, items))
    records = [r for r in results if isinstance(r, RealRecord)]
    skips = [r for r in results if isinstance(r, SkipEntry)]
    if items and len(skips) / len(items) > skip_limit:
        raise SkipLimitExceeded(
            f"skipped {len(skips)}/{len(items)} items, above limit {skip_limit}"
        )
    return records, skips


def _pairwise_sq_distances(query: np.ndarray, pool_feats: np.ndarray) -> np.ndarray:
    # One row at a time, as an explicit difference with a plain axis sum:
    # bit-identical to the per-pair formula regardless of chunking or
    # worker count, so tie-breaks match an exhaustive scan exactly.
    diffs = pool_feats - query
    return (diffs * diffs).sum(axis=1)


def pair_nearest(
    reals: list[RealRecord],
    pool: FakePool,
    *,
    unique: bool = False,
    approx_dims: int | None = None,
    approx_validation_sample: int = 32,
    approx_min_recall: float = 0.99,
) -> list[PairEntry]:
    """Pair each real record with its Euclidean-nearest pool entry in
    class-token space.

    Ties break to the smallest fake_id; two reals may share a neighbor
    unless ``unique`` enables greedy one-to-one assignment by ascending
    distance. ``approx_dims`` turns on a random-projection accelerator that
    is validated against exact search on a sample at startup and silently
    falls back to exact mode if recall@1 drops below ``approx_min_recall``.
    """
    if not reals:
        raise ValidationError("pair_nearest requires at least one real record")
    if pool.size == 0:
        raise EmptyPool("cannot pair against an empty pool")

    reals = sorted(reals, key=lambda r: r.real_id)
    pool_feats = pool.feature_matrix()
    queries = np.stack([r.cls_feature for r in reals])

    if unique:
        return _pair_unique(reals, pool, queries, pool_feats)

    if approx_dims is not None and 0 < approx_dims < EMBED_DIM:
        idx = _pair_approx(queries, pool_feats, approx_dims,
                           approx_validation_sample, approx_min_recall)
        if idx is not None:
            return _entries_from_indices(reals, pool, queries, pool_feats, idx)

    idx = np.array([int(np.argmin(_pairwise_sq_distances(q, pool_feats)))
                    for q in queries])
    return _entries_from_indices(reals, pool, queries, pool_feats, idx)


def _entries_from_indices(reals, pool, queries, pool_feats, indices):
    out = []
    for r, q, j in zip(reals, queries, indices):
        dist = float(np.sqrt(np.sum((q - pool_feats[j]) ** 2)))
        out.append(PairEntry(real_id=r.real_id, fake_id=pool.entries[j].fake_id,
                             distance=dist))
    return out


def _pair_approx(queries, pool_feats, dims, sample, min_recall):
    """Random-projection candidate search; returns indices or None to
    signal fallback to exact mode."""
    rng = np.random.Generator(np.random.PCG64(derive_seed(0, "approx-proj", dims)))
    proj = rng.standard_normal((pool_feats.shape[1], dims)) / np.sqrt(dims)
    pool_p = pool_feats @ proj
    queries_p = queries @ proj
    idx = np.array([int(np.argmin(_pairwise_sq_distances(q, pool_p)))
                    for q in queries_p])
    n_check = min(sample, len(queries))
    exact = np.array([int(np.argmin(_pairwise_sq_distances(q, pool_feats)))
                      for q in queries[:n_check]])
    recall = float(np.mean(idx[:n_check] == exact))
    if recall < min_recall:
        return None
    return idx


def _pair_unique(reals, pool, queries, pool_feats):
    if pool.size < len(reals):
        raise EmptyPool(
            f"unique assignment needs pool size >= {len(reals)}, got {pool.size}"
        )
    d2 = np.stack([_pairwise_sq_distances(q, pool_feats) for q in queries])
    assigned: dict[int, int] = {}
    used = np.zeros(pool.size, dtype=bool)
    remaining = set(range(len(reals)))
    while remaining:
        best = None
        for i in sorted(remaining):
            row = np.where(used, np.inf, d2[i])
            j = int(np.argmin(row))
            cand = (row[j], reals[i].real_id, pool.entries[j].fake_id, i, j)
            if best is None or cand < best:
                best = cand
        _, _, _, i, j = best
        assigned[i] = j
        used[j] = True
        remaining.discard(i)
    idx = np.array([assigned[i] for i in range(len(reals))])
    return _entries_from_indices(reals, pool, queries, pool_feats, idx)


def splice_init(
    real: RealRecord,
    fake_code: np.ndarray,
    fake_id: str = "",
    layer_split: tuple[int, int] = (3, 8),
) -> SplicedCode:
    """Frozen rows from the real inversion, trainable block from the fake
    neighbor. Reassembly is lossless: the frozen rows are the real code's
    own arrays."""
    real_code = validate_latent_code(real.code, "real inverted code")
    fake_code = validate_latent_code(fake_code, "fake code")
    lo, hi = layer_split
    return SplicedCode(
        frozen_low=real_code[:lo].copy(),
        trainable=fake_code[lo:hi].copy(),
        frozen_high=real_code[hi:].copy(),
        real_id=real.real_id,
        fake_id=fake_id,
        layer_split=(lo, hi),
    )
