"""JSON-lines dataset manifests.

An image manifest row is ``{"id", "path", "split", "labels"}`` with ``split``
in {train, test} and ``labels`` an optional attribute->0/1 map. Pair
manifests are ``{"real_id", "fake_id", "distance"}`` with a sidecar metadata
document carrying the pool fingerprint and config hash.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ValidationError
from .util import canonical_json, read_jsonl, write_jsonl


@dataclass
class ManifestItem:
    id: str
    path: str
    split: str = "train"
    labels: dict[str, int] | None = None

    def to_dict(self) -> dict:
        d = {"id": self.id, "path": self.path, "split": self.split}
        if self.labels is not None:
            d["labels"] = {k: int(v) for k, v in sorted(self.labels.items())}
        return d


def load_manifest(path: Path | str) -> list[ManifestItem]:
    items = []
    seen = set()
    for i, row in enumerate(read_jsonl(path)):
        if "id" not in row or "path" not in row:
            raise ValidationError(f"manifest row {i}: missing 'id' or 'path'")
        split = row.get("split", "train")
        if split not in ("train", "test"):
            raise ValidationError(f"manifest row {i}: split must be train|test, got {split!r}")
        if row["id"] in seen:
            raise ValidationError(f"manifest: duplicate id {row['id']!r}")
        seen.add(row["id"])
        labels = row.get("labels")
        if labels is not None:
            labels = {str(k): int(v) for k, v in labels.items()}
            bad = {k: v for k, v in labels.items() if v not in (0, 1)}
            if bad:
                raise ValidationError(f"manifest row {i}: non-binary labels {bad}")
        items.append(ManifestItem(id=str(row["id"]), path=str(row["path"]),
                                  split=split, labels=labels))
    return items


def save_manifest(path: Path | str, items: list[ManifestItem]) -> None:
    write_jsonl(path, [it.to_dict() for it in sorted(items, key=lambda x: x.id)])


@dataclass
class PairEntry:
    real_id: str
    fake_id: str
    distance: float


def save_pairs(path: Path | str, pairs: list[PairEntry]) -> None:
    write_jsonl(
        path,
        [
            {"real_id": p.real_id, "fake_id": p.fake_id, "distance": float(p.distance)}
            for p in sorted(pairs, key=lambda p: p.real_id)
        ],
    )


def load_pairs(path: Path | str) -> list[PairEntry]:
    return [PairEntry(real_id=r["real_id"], fake_id=r["fake_id"],
                      distance=float(r["distance"]))
            for r in read_jsonl(path)]
