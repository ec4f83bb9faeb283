"""Staged run orchestration: pool -> invert -> pair -> anonymize -> evaluate,
plus the margin-ablation runner.

Every stage writes per-item artifacts atomically (temp file + rename), then a
merged manifest sorted by id, then a metadata document, and finally updates
the run ledger. Per-item randomness derives from (global seed, item id), so
worker count, scheduling and resume never change results; killing a stage
mid-run leaves valid per-item artifacts that a resumed run reuses verbatim.

The ledger records, per stage, the fingerprints of everything consumed and
produced. A stage may start only when its upstream stages are complete;
re-running a complete stage with unchanged inputs is a no-op, and changed
inputs under a complete stage raise :class:`StaleArtifactError`.
"""

from __future__ import annotations

import dataclasses
import shutil
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .backends import build_backend
from .backends.base import Backend, bundle_metadata
from .config import RunConfig
from .errors import (
    DependencyError,
    InsufficientMargins,
    LabelError,
    ManifestMismatch,
    SkipLimitExceeded,
    StaleArtifactError,
    ValidationError,
)
from .evaluation.classifier import (
    AttributeAccuracy,
    ClassifierConfig,
    MlpAttributeClassifier,
    attribute_protocol,
)
from .evaluation.metrics import (
    detection_rate,
    frechet_distance,
    gaussian_moments,
    reid_rate,
)
from .imageio import load_image, save_image
from .latent_store import load_code, save_code
from .manifests import ManifestItem, PairEntry, load_manifest, load_pairs, save_manifest, save_pairs
from .optimize import optimize_latent
from .pairing import (
    FakePool,
    PoolEntry,
    RealRecord,
    SkipEntry,
    invert_item,
    make_pool_entry,
    pair_nearest,
    pool_entry_id,
    splice_init,
)
from .types import AttributeSpec, celeba_attribute_spec
from .util import (
    atomic_write_json,
    canonical_json,
    derive_seed,
    file_fingerprint,
    read_json,
    read_jsonl,
    rng_for,
    stable_hash,
    write_jsonl,
)

STAGES = ("pool", "invert", "pair", "anonymize", "evaluate")
STAGE_DEPS = {
    "pool": (),
    "invert": (),
    "pair": ("pool", "invert"),
    "anonymize": ("pool", "invert", "pair"),
    "evaluate": ("invert", "anonymize"),
    "ablate": ("pool", "invert", "pair"),
}
# Config sections that feed each stage; part of its input fingerprint.
STAGE_CONFIG_KEYS = {
    "pool": ("seed", "backend", "pool"),
    "invert": ("seed", "backend", "skip_limit"),
    "pair": ("pairing",),
    "anonymize": ("seed", "backend", "optimizer", "skip_limit"),
    "evaluate": ("seed", "backend", "evaluation"),
    "ablate": ("seed", "backend", "optimizer", "evaluation", "ablation", "skip_limit"),
}


class AbortInjected(RuntimeError):
    """Test hook standing in for a hard kill mid-stage."""


# ---------------------------------------------------------------------------
# worker jobs (module-level: picklable for the process pool)
# ---------------------------------------------------------------------------


def _pool_job(payload: dict) -> str:
    backend = build_backend(payload["backend_params"])
    entry = make_pool_entry(backend, payload["pool_seed"], payload["index"])
    out = Path(payload["stage_dir"])
    save_code(out / "codes" / f"{entry.fake_id}.falc", entry.code)
    atomic_write_json(
        out / "items" / f"{entry.fake_id}.json",
        {"fake_id": entry.fake_id, "cls": entry.cls_feature.tolist()},
    )
    return entry.fake_id


def _invert_job(payload: dict) -> str:
    backend = build_backend(payload["backend_params"])
    item = ManifestItem(**payload["item"])
    out = Path(payload["stage_dir"])
    try:
        record = invert_item(backend, item, load_image(item.path))
    except Exception as exc:
        atomic_write_json(
            out / "items" / f"{item.id}.json",
            {"real_id": item.id, "path": item.path, "skip": True,
             "reason": f"{type(exc).__name__}: {exc}"},
        )
        return item.id
    save_code(out / "codes" / f"{item.id}.falc", record.code)
    atomic_write_json(
        out / "items" / f"{item.id}.json",
        {
            "real_id": record.real_id,
            "path": record.path,
            "split": record.split,
            "labels": record.labels,
            "cls": record.cls_feature.tolist(),
        },
    )
    return item.id


def _anonymize_job(payload: dict) -> str:
    backend = build_backend(payload["backend_params"])
    out = Path(payload["stage_dir"])
    real = RealRecord(
        real_id=payload["real_id"],
        path=payload["real_path"],
        code=load_code(payload["real_code_path"]),
        cls_feature=np.asarray(payload["cls"], dtype=np.float64),
        split=payload["split"],
        labels=payload["labels"],
    )
    fake_code = load_code(payload["fake_code_path"])
    hp_kwargs = dict(payload["hp"])
    hp_kwargs["seed"] = derive_seed(hp_kwargs["seed"], "anonymize", real.real_id)
    from .types import HyperParams

    hp = HyperParams(**hp_kwargs)
    spliced = splice_init(real, fake_code, payload["fake_id"],
                          layer_split=tuple(payload["layer_split"]))
    x_r = load_image(real.path)
    result = optimize_latent(real, spliced, backend, hp, x_r=x_r)

    image_path = out / "images" / f"{real.real_id}.png"
    save_image(image_path, result.image)
    save_code(out / "codes" / f"{real.real_id}.falc", result.code.assembled())
    write_jsonl(out / "trajectories" / f"{real.real_id}.jsonl",
                [r.to_dict() for r in result.trajectory])
    atomic_write_json(
        out / "items" / f"{real.real_id}.json",
        {
            "real_id": real.real_id,
            "fake_id": payload["fake_id"],
            "path": str(image_path),
            "split": real.split,
            "labels": real.labels,
            "final_loss": result.trajectory[-1].to_dict() if result.trajectory else None,
            "config_hash": payload["config_hash"],
        },
    )
    return real.real_id


# ---------------------------------------------------------------------------
# engine
# ---------------------------------------------------------------------------


class Pipeline:
    def __init__(self, config: RunConfig, backend: Backend | None = None):
        self.config = config
        self.root = Path(config.output_root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._backend = backend

    # -- backend -----------------------------------------------------------------

    @property
    def backend(self) -> Backend:
        if self._backend is None:
            self._backend = build_backend(self.config.backend_params())
        return self._backend

    def _backend_params(self) -> dict:
        return self.backend.construction_params()

    def _parallelizable(self) -> bool:
        return self.config.workers > 1 and self.backend.backend_kind == "synthetic"

    # -- ledger ------------------------------------------------------------------

    @property
    def ledger_path(self) -> Path:
        return self.root / "ledger.json"

    def _load_ledger(self) -> dict:
        if self.ledger_path.exists():
            return read_json(self.ledger_path)
        return {"config_hash": self.config.config_hash, "stages": {}}

    def _save_ledger(self, ledger: dict) -> None:
        atomic_write_json(self.ledger_path, ledger)

    def stage_status(self, stage: str) -> str:
        return self._load_ledger()["stages"].get(stage, {}).get("status", "pending")

    def _stage_dir(self, stage: str) -> Path:
        return self.root / {"pool": "pool", "invert": "inverted", "pair": "pairs",
                            "anonymize": "anonymized", "evaluate": "evaluation",
                            "ablate": "ablation"}[stage]

    def _stage_outputs(self, stage: str) -> dict[str, Path]:
        d = self._stage_dir(stage)
        return {
            "pool": {"pool/pool.jsonl": d / "pool.jsonl"},
            "invert": {"inverted/records.jsonl": d / "records.jsonl"},
            "pair": {"pairs/pairs.jsonl": d / "pairs.jsonl"},
            "anonymize": {"anonymized/manifest.jsonl": d / "manifest.jsonl"},
            "evaluate": {"evaluation/report.json": d / "report.json"},
            "ablate": {"ablation/ablation.json": d / "ablation.json"},
        }[stage]

    def _current_inputs(self, stage: str, ledger: dict) -> dict:
        cfg_slice = {k: self.config.data[k] for k in STAGE_CONFIG_KEYS[stage]}
        inputs = {
            "config": stable_hash(cfg_slice),
            "backend": stable_hash(self.backend.fingerprints()),
            "input_manifest": file_fingerprint(self.config.manifest_path),
        }
        for dep in STAGE_DEPS[stage]:
            recorded = ledger["stages"].get(dep, {}).get("outputs", {})
            for rel, fp in recorded.items():
                path = self.root / rel
                current = file_fingerprint(path) if path.exists() else "<missing>"
                if current != fp:
                    raise StaleArtifactError(
                        f"artifact {rel} no longer matches the fingerprint recorded "
                        f"by stage '{dep}'"
                    )
                inputs[rel] = fp
        return inputs

    # -- parallel map ------------------------------------------------------------

    def _map_items(self, job, payloads, pending_ids, done_ids, abort_after=None):
        """Run ``job`` over payloads whose id is pending; completed ids are
        skipped (resume). Returns nothing; jobs persist their own artifacts."""
        todo = [p for p, pid in zip(payloads, pending_ids) if pid not in done_ids]
        completed = len(done_ids)
        if self._parallelizable() and abort_after is None:
            with ProcessPoolExecutor(max_workers=self.config.workers) as pool:
                for _ in pool.map(job, todo, chunksize=8):
                    pass
            return
        for payload in todo:
            if abort_after is not None and completed >= abort_after:
                raise AbortInjected(f"injected abort after {completed} items")
            job(payload)
            completed += 1

    # -- stage lifecycle -----------------------------------------------------------

    def run_stage(self, stage: str, resume: bool = False, abort_after: int | None = None) -> dict:
        if stage not in STAGE_DEPS:
            raise ValidationError(f"unknown stage {stage!r}; valid: {list(STAGE_DEPS)}")
        ledger = self._load_ledger()
        for dep in STAGE_DEPS[stage]:
            if ledger["stages"].get(dep, {}).get("status") != "complete":
                raise DependencyError(
                    f"stage '{stage}' requires completed stage '{dep}' "
                    f"(status: {ledger['stages'].get(dep, {}).get('status', 'pending')})"
                )
        inputs = self._current_inputs(stage, ledger)

        entry = ledger["stages"].get(stage)
        if entry and entry.get("status") == "complete":
            if entry.get("inputs") == inputs:
                return entry   # no-op: timestamps preserved
            raise StaleArtifactError(
                f"stage '{stage}' is complete but its inputs changed; "
                f"clean {self._stage_dir(stage)} to recompute"
            )

        stage_dir = self._stage_dir(stage)
        stamp_path = stage_dir / "stage_inputs.json"
        if stage_dir.exists():
            stamp = read_json(stamp_path) if stamp_path.exists() else None
            if stamp != inputs:
                if resume:
                    raise StaleArtifactError(
                        f"cannot resume stage '{stage}': partial artifacts were "
                        f"produced under different inputs"
                    )
                shutil.rmtree(stage_dir)
            elif not resume:
                shutil.rmtree(stage_dir)
        stage_dir.mkdir(parents=True, exist_ok=True)
        atomic_write_json(stamp_path, inputs)

        ledger["stages"][stage] = {
            "status": "running",
            "started_at": time.strftime("%Y-%m-%dT%H:%M:%S"),
            "inputs": inputs,
        }
        self._save_ledger(ledger)

        try:
            runner = getattr(self, f"_run_{stage}")
            runner(stage_dir, abort_after=abort_after)
        except AbortInjected:
            # Simulated hard kill: leave the ledger as-is ("running"), exactly
            # like a crashed process would.
            raise
        except Exception:
            ledger = self._load_ledger()
            ledger["stages"][stage]["status"] = "failed"
            self._save_ledger(ledger)
            raise

        outputs = {
            rel: file_fingerprint(path)
            for rel, path in self._stage_outputs(stage).items()
        }
        ledger = self._load_ledger()
        entry = ledger["stages"][stage]
        entry["status"] = "complete"
        entry["finished_at"] = time.strftime("%Y-%m-%dT%H:%M:%S")
        entry["outputs"] = outputs
        self._save_ledger(ledger)
        return entry

    def run_all(self, resume: bool = False) -> None:
        for stage in STAGES:
            self.run_stage(stage, resume=resume)

    # -- stage bodies ----------------------------------------------------------------

    def _manifest_items(self) -> list[ManifestItem]:
        return load_manifest(self.config.manifest_path)

    def _done_ids(self, stage_dir: Path) -> set[str]:
        items_dir = stage_dir / "items"
        if not items_dir.exists():
            return set()
        return {p.stem for p in items_dir.glob("*.json")}

    def _pool_size(self, n_real: int) -> int:
        size = self.config["pool"]["size"]
        return size if size is not None else 2 * n_real

    def _pool_seed(self) -> int:
        seed = self.config["pool"]["seed"]
        return seed if seed is not None else derive_seed(self.config.seed, "pool-stage")

    def _run_pool(self, stage_dir: Path, abort_after=None) -> None:
        n_real = len(self._manifest_items())
        size = self._pool_size(n_real)
        if size <= n_real:
            from .errors import PoolTooSmall

            raise PoolTooSmall(
                f"pool size {size} must strictly exceed the real-record count {n_real}"
            )
        (stage_dir / "codes").mkdir(exist_ok=True)
        (stage_dir / "items").mkdir(exist_ok=True)
        pool_seed = self._pool_seed()
        params = self._backend_params()
        ids = [pool_entry_id(i) for i in range(size)]
        payloads = [
            {"backend_params": params, "pool_seed": pool_seed, "index": i,
             "stage_dir": str(stage_dir)}
            for i in range(size)
        ]
        self._map_items(_pool_job, payloads, ids, self._done_ids(stage_dir), abort_after)

        rows = [read_json(stage_dir / "items" / f"{fid}.json") for fid in sorted(ids)]
        write_jsonl(stage_dir / "pool.jsonl", rows)
        pool = self.load_pool()
        atomic_write_json(
            stage_dir / "meta.json",
            {
                "config_hash": self.config.config_hash,
                "seed": pool_seed,
                "size": size,
                "pool_fingerprint": pool.fingerprint(),
                **bundle_metadata(self.backend),
            },
        )

    def _run_invert(self, stage_dir: Path, abort_after=None) -> None:
        items = self._manifest_items()
        (stage_dir / "codes").mkdir(exist_ok=True)
        (stage_dir / "items").mkdir(exist_ok=True)
        params = self._backend_params()
        payloads = [
            {"backend_params": params, "item": it.to_dict(), "stage_dir": str(stage_dir)}
            for it in items
        ]
        self._map_items(_invert_job, payloads, [it.id for it in items],
                        self._done_ids(stage_dir), abort_after)

        rows = [read_json(stage_dir / "items" / f"{it.id}.json") for it in sorted(items, key=lambda x: x.id)]
        records = [r for r in rows if not r.get("skip")]
        skips = [r for r in rows if r.get("skip")]
        if items and len(skips) / len(items) > self.config["skip_limit"]:
            raise SkipLimitExceeded(
                f"skipped {len(skips)}/{len(items)} items, above limit "
                f"{self.config['skip_limit']}"
            )
        write_jsonl(stage_dir / "records.jsonl", records)
        write_jsonl(stage_dir / "skips.jsonl", skips)
        atomic_write_json(
            stage_dir / "meta.json",
            {
                "config_hash": self.config.config_hash,
                "count": len(records),
                "skips": len(skips),
                **bundle_metadata(self.backend),
            },
        )

    def load_pool(self) -> FakePool:
        stage_dir = self._stage_dir("pool")
        entries = [
            PoolEntry(
                fake_id=row["fake_id"],
                code=load_code(stage_dir / "codes" / f"{row['fake_id']}.falc"),
                cls_feature=np.asarray(row["cls"], dtype=np.float64),
            )
            for row in read_jsonl(stage_dir / "pool.jsonl")
        ]
        return FakePool(entries=entries, seed=self._pool_seed())

    def load_records(self) -> list[RealRecord]:
        stage_dir = self._stage_dir("invert")
        return [
            RealRecord(
                real_id=row["real_id"],
                path=row["path"],
                code=load_code(stage_dir / "codes" / f"{row['real_id']}.falc"),
                cls_feature=np.asarray(row["cls"], dtype=np.float64),
                split=row["split"],
                labels=row["labels"],
            )
            for row in read_jsonl(stage_dir / "records.jsonl")
        ]

    def _run_pair(self, stage_dir: Path, abort_after=None) -> None:
        pool = self.load_pool()
        records = self.load_records()
        pairs = pair_nearest(
            records,
            pool,
            unique=self.config["pairing"]["unique"],
            approx_dims=self.config["pairing"]["approx_dims"],
        )
        save_pairs(stage_dir / "pairs.jsonl", pairs)
        atomic_write_json(
            stage_dir / "meta.json",
            {
                "config_hash": self.config.config_hash,
                "pool_fingerprint": pool.fingerprint(),
                "feature_space": "semantic-cls",
                "count": len(pairs),
                **bundle_metadata(self.backend),
            },
        )

    def _run_anonymize(self, stage_dir: Path, abort_after=None,
                       margin: float | None = None) -> None:
        records = {r.real_id: r for r in self.load_records()}
        pairs = load_pairs(self._stage_dir("pair") / "pairs.jsonl")
        pool_dir = self._stage_dir("pool")
        invert_dir = self._stage_dir("invert")
        for sub in ("codes", "images", "trajectories", "items"):
            (stage_dir / sub).mkdir(exist_ok=True)
        hp = self.config.hyperparams(margin=margin)
        params = self._backend_params()
        lo_hi = self.backend.layer_split if hasattr(self.backend, "layer_split") else (3, 8)
        payloads = []
        for pair in sorted(pairs, key=lambda p: p.real_id):
            rec = records[pair.real_id]
            payloads.append({
                "backend_params": params,
                "real_id": rec.real_id,
                "real_path": rec.path,
                "real_code_path": str(invert_dir / "codes" / f"{rec.real_id}.falc"),
                "cls": rec.cls_feature.tolist(),
                "split": rec.split,
                "labels": rec.labels,
                "fake_id": pair.fake_id,
                "fake_code_path": str(pool_dir / "codes" / f"{pair.fake_id}.falc"),
                "hp": dataclasses.asdict(hp),
                "layer_split": list(lo_hi),
                "config_hash": self.config.config_hash,
                "stage_dir": str(stage_dir),
            })
        self._map_items(_anonymize_job, payloads, [p["real_id"] for p in payloads],
                        self._done_ids(stage_dir), abort_after)

        items = []
        for pair in sorted(pairs, key=lambda p: p.real_id):
            row = read_json(stage_dir / "items" / f"{pair.real_id}.json")
            items.append(ManifestItem(id=row["real_id"], path=row["path"],
                                      split=row["split"], labels=row["labels"]))
        save_manifest(stage_dir / "manifest.jsonl", items)
        atomic_write_json(
            stage_dir / "meta.json",
            {
                "config_hash": self.config.config_hash,
                "margin": hp.margin,
                "count": len(items),
                **bundle_metadata(self.backend),
            },
        )

    # -- evaluation -------------------------------------------------------------------

    def _attribute_spec(self) -> AttributeSpec | None:
        setting = self.config["evaluation"]["attributes"]
        if setting == "celeba":
            return celeba_attribute_spec()
        if setting == "auto":
            sidecar = Path(self.config.manifest_path).with_name("manifest.attributes.json")
            if sidecar.exists():
                return AttributeSpec.from_dict(read_json(sidecar)["spec"])
            return None
        path = Path(setting)
        if not path.exists():
            raise LabelError(f"attribute spec file not found: {setting}")
        doc = read_json(path)
        return AttributeSpec.from_dict(doc.get("spec", doc))

    def _split_ids(self, items: list[ManifestItem]) -> tuple[set[str], set[str]]:
        policy = self.config["evaluation"]["split"]
        if policy == "manifest":
            train = {it.id for it in items if it.split == "train"}
            test = {it.id for it in items if it.split == "test"}
        else:
            ids = sorted(it.id for it in items)
            perm = rng_for(self.config.seed, "eval-split").permutation(len(ids))
            n_test = int(round(len(ids) * self.config["evaluation"]["test_fraction"]))
            test = {ids[i] for i in perm[:n_test]}
            train = set(ids) - test
        return train, test

    def _run_evaluate(self, stage_dir: Path, abort_after=None,
                      anonymized_dir: Path | None = None) -> None:
        report = evaluate_run(
            backend=self.backend,
            config=self.config,
            real_items=self._manifest_items(),
            records_rows=read_jsonl(self._stage_dir("invert") / "records.jsonl"),
            anonymized_items=load_manifest(
                (anonymized_dir or self._stage_dir("anonymize")) / "manifest.jsonl"
            ),
            attribute_spec=self._attribute_spec(),
            split_ids=self._split_ids,
        )
        report["dataset_fingerprints"] = {
            "input_manifest": file_fingerprint(self.config.manifest_path),
            "anonymized_manifest": file_fingerprint(
                (anonymized_dir or self._stage_dir("anonymize")) / "manifest.jsonl"
            ),
        }
        atomic_write_json(stage_dir / "report.json", report)

    # -- ablation -------------------------------------------------------------------

    def _run_ablate(self, stage_dir: Path, abort_after=None) -> None:
        margins = sorted(set(float(m) for m in self.config["ablation"]["margins"]))
        if len(margins) < 2:
            raise InsufficientMargins(
                f"margin ablation needs at least 2 margins, got {margins}"
            )
        rows = []
        for margin in margins:
            sub = stage_dir / f"m_{margin:.2f}"
            anon_dir = sub / "anonymized"
            eval_dir = sub / "evaluation"
            anon_dir.mkdir(parents=True, exist_ok=True)
            eval_dir.mkdir(parents=True, exist_ok=True)
            self._run_anonymize(anon_dir, margin=margin)
            self._run_evaluate(eval_dir, anonymized_dir=anon_dir)
            report = read_json(eval_dir / "report.json")
            rows.append({
                "m": margin,
                "fid": report["fid"],
                "detection_rate": report["detection_rate"],
                "reid_rate": report["reid_rate"],
                "attribute_accuracy": report["attribute_accuracy"],
            })
        atomic_write_json(stage_dir / "ablation.json", {
            "config_hash": self.config.config_hash,
            "margins": margins,
            "rows": rows,
        })
        _write_ablation_csv(stage_dir / "ablation.csv", rows)


def _write_ablation_csv(path: Path, rows: list[dict]) -> None:
    import csv
    import io

    buf = io.StringIO()
    reid_tags = sorted(rows[0]["reid_rate"]) if rows else []
    cols = ["m", "fid", "detection_rate"] + [f"reid_{t}" for t in reid_tags] + [
        "acc_inner", "acc_outer", "acc_combined"]
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        acc = row["attribute_accuracy"] or {}
        writer.writerow(
            [repr(float(row["m"])), repr(float(row["fid"])),
             repr(float(row["detection_rate"]))]
            + [repr(float(row["reid_rate"][t])) for t in reid_tags]
            + [repr(float(acc.get(k, float("nan")))) for k in ("inner", "outer", "combined")]
        )
    from .util import atomic_write_text

    atomic_write_text(path, buf.getvalue())


def evaluate_run(
    backend: Backend,
    config: RunConfig,
    real_items: list[ManifestItem],
    records_rows: list[dict],
    anonymized_items: list[ManifestItem],
    attribute_spec: AttributeSpec | None,
    split_ids,
    extra_identity_encoders: dict | None = None,
) -> dict:
    """Compute the metric set over an anonymized dataset. Returns the report
    as a plain dict (fractions in [0, 1]; fid >= 0)."""
    metrics = config["evaluation"]["metrics"]
    real_by_id = {it.id: it for it in real_items}
    anon_by_id = {it.id: it for it in anonymized_items}
    unknown = sorted(set(anon_by_id) - set(real_by_id))
    if unknown:
        raise ManifestMismatch(
            f"anonymized ids missing from the input manifest: {unknown[:5]}"
        )
    ids = sorted(anon_by_id)

    anon_images = {i: load_image(anon_by_id[i].path) for i in ids}
    report: dict = {
        "config_hash": config.config_hash,
        "seed": config.seed,
        "counts": {"real": len(real_items), "anonymized": len(ids)},
        "backend": bundle_metadata(backend),
        "fid": None,
        "detection_rate": None,
        "reid_rate": {},
        "attribute_accuracy": None,
    }

    if "detection" in metrics:
        report["detection_rate"] = detection_rate(
            [backend.detect_face(img) for img in anon_images.values()]
        )

    if "reid" in metrics:
        encoders = {backend.backend_kind: backend.embed_identity}
        encoders.update(extra_identity_encoders or {})
        for tag, encoder in sorted(encoders.items()):
            gallery = {i: encoder(load_image(real_by_id[i].path)) for i in ids}
            probes = {i: encoder(anon_images[i]) for i in ids}
            report["reid_rate"][tag] = reid_rate(probes, gallery)

    if "fid" in metrics:
        real_feats = np.stack([
            np.asarray(row["cls"], dtype=np.float64) for row in records_rows
        ])
        anon_feats = np.stack([
            backend.embed_semantic(anon_images[i]).cls for i in ids
        ])
        report["fid"] = frechet_distance(
            gaussian_moments(anon_feats), gaussian_moments(real_feats)
        )

    if "attributes" in metrics:
        if attribute_spec is None:
            report["attribute_accuracy"] = None
            report["attribute_note"] = (
                "no attribute spec available (set evaluation.attributes)"
            )
        else:
            train_ids, test_ids = split_ids(real_items)
            train = [anon_by_id[i] for i in sorted(set(ids) & train_ids)]
            test = [real_by_id[i] for i in sorted(test_ids & set(real_by_id))]
            if not train or not test:
                raise ValidationError("attribute protocol needs non-empty train and test splits")
            x_train = np.stack([anon_images[it.id].ravel() for it in train])
            y_train = [it.labels for it in train]
            x_test = np.stack([load_image(it.path).ravel() for it in test])
            y_test = [it.labels for it in test]
            cc = config["evaluation"]["classifier"]
            clf = MlpAttributeClassifier(ClassifierConfig(
                hidden=cc["hidden"], epochs=cc["epochs"],
                learning_rate=cc["learning_rate"], focal_gamma=cc["focal_gamma"],
                focal_alpha=cc["focal_alpha"], weight_decay=cc["weight_decay"],
                seed=cc["seed"],
            ))
            acc = attribute_protocol(x_train, y_train, x_test, y_test,
                                     attribute_spec, classifier=clf)
            report["attribute_accuracy"] = acc.to_dict()

    return report
