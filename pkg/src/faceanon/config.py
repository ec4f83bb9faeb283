"""Run configuration: YAML schema, validation, defaults, stable hashing.

``validate_config`` resolves a config file against the schema, applying
defaults and reporting every violation at once (unknown keys, range errors,
missing files) instead of stopping at the first. The config hash is computed
over the canonical JSON form of the fully resolved config, so semantically
identical files hash identically regardless of key order.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import yaml

from .errors import ConfigError
from .types import HyperParams
from .util import stable_hash

_MISSING = object()


@dataclass(frozen=True)
class Field:
    default: object = _MISSING       # _MISSING means required
    kind: str = "any"                # int, float, number, str, bool, list, path
    choices: tuple = ()
    low: float | None = None
    high: float | None = None
    nullable: bool = False


# Schema: nested dicts of Field. A section missing from the file resolves to
# its defaults; every leaf default below is part of the documented contract.
SCHEMA = {
    "seed": Field(default=0, kind="int"),
    "workers": Field(default=1, kind="int", low=1),
    "skip_limit": Field(default=0.01, kind="number", low=0.0, high=1.0),
    "backend": {
        "kind": Field(default="synthetic", kind="str", choices=("synthetic", "pretrained")),
        "synthetic": {
            "seed": Field(default=7, kind="int"),
            "eps_couple": Field(default=0.05, kind="number", low=0.0),
            "image_side": Field(default=12, kind="int", low=8),
            "detection_threshold": Field(default=None, kind="number", nullable=True),
            "patch_grid_side": Field(default=4, kind="int", low=1),
        },
        "weights": {
            "generator": Field(default=None, kind="path", nullable=True),
            "inverter": Field(default=None, kind="path", nullable=True),
            "identity_encoder": Field(default=None, kind="path", nullable=True),
            "semantic_encoder": Field(default=None, kind="path", nullable=True),
            "face_detector": Field(default=None, kind="path", nullable=True),
        },
    },
    "pool": {
        "size": Field(default=None, kind="int", low=1, nullable=True),  # default 2*|manifest|
        "seed": Field(default=None, kind="int", nullable=True),
    },
    "pairing": {
        "unique": Field(default=False, kind="bool"),
        "approx_dims": Field(default=None, kind="int", low=1, nullable=True),
    },
    "optimizer": {
        "margin": Field(default=0.0, kind="number", low=0.0, high=1.0),
        "weight_id": Field(default=1.0, kind="number", low=0.0),
        "weight_att": Field(default=1.0, kind="number", low=0.0),
        "epochs": Field(default=50, kind="int", low=1),
        "steps_per_epoch": Field(default=1, kind="int", low=0),
        "learning_rate": Field(default=0.01, kind="number"),
        "att_normalization": Field(default="mean", kind="str", choices=("mean", "sum")),
    },
    "evaluation": {
        "metrics": Field(default=["fid", "detection", "reid", "attributes"], kind="list"),
        "attributes": Field(default="auto", kind="str"),
        "split": Field(default="manifest", kind="str", choices=("manifest", "random")),
        "test_fraction": Field(default=0.2, kind="number", low=0.0, high=1.0),
        "classifier": {
            "hidden": Field(default=64, kind="int", low=1),
            "epochs": Field(default=400, kind="int", low=1),
            "learning_rate": Field(default=0.01, kind="number"),
            "focal_gamma": Field(default=2.0, kind="number", low=0.0),
            "focal_alpha": Field(default=0.5, kind="number", low=0.0, high=1.0),
            "weight_decay": Field(default=1e-4, kind="number", low=0.0),
            "seed": Field(default=0, kind="int"),
        },
    },
    "ablation": {
        "margins": Field(default=[0.0, 0.9], kind="list"),
    },
    "io": {
        "manifest": Field(kind="path"),            # required
        "output_root": Field(kind="str"),          # required; created on demand
    },
}

_VALID_METRICS = ("fid", "detection", "reid", "attributes")


def _check_leaf(path: str, field: Field, value, errors: list):
    if value is None:
        if field.nullable or field.default is None:
            return None
        errors.append(f"{path}: must not be null")
        return None
    if field.kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            errors.append(f"{path}: expected an integer, got {value!r}")
            return None
    elif field.kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            errors.append(f"{path}: expected a number, got {value!r}")
            return None
        value = float(value)
    elif field.kind == "bool":
        if not isinstance(value, bool):
            errors.append(f"{path}: expected a boolean, got {value!r}")
            return None
    elif field.kind in ("str", "path"):
        if not isinstance(value, str):
            errors.append(f"{path}: expected a string, got {value!r}")
            return None
    elif field.kind == "list":
        if not isinstance(value, list):
            errors.append(f"{path}: expected a list, got {value!r}")
            return None
    if field.choices and value not in field.choices:
        errors.append(f"{path}: must be one of {list(field.choices)}, got {value!r}")
        return None
    if field.low is not None and isinstance(value, (int, float)) and value < field.low:
        errors.append(f"{path}: must be >= {field.low}, got {value}")
        return None
    if field.high is not None and isinstance(value, (int, float)) and value > field.high:
        errors.append(f"{path}: must be <= {field.high}, got {value}")
        return None
    if field.kind == "path":
        if not Path(value).exists():
            errors.append(f"{path}: file not found: {value}")
    return value


def _resolve(schema: dict, data: dict, prefix: str, errors: list) -> dict:
    out = {}
    unknown = set(data) - set(schema)
    for key in sorted(unknown):
        errors.append(f"{prefix}{key}: unknown key")
    for key, spec in schema.items():
        path = f"{prefix}{key}"
        if isinstance(spec, dict):
            sub = data.get(key, {})
            if sub is None:
                sub = {}
            if not isinstance(sub, dict):
                errors.append(f"{path}: expected a mapping")
                sub = {}
            out[key] = _resolve(spec, sub, path + ".", errors)
        else:
            if key in data:
                out[key] = _check_leaf(path, spec, data[key], errors)
            elif spec.default is _MISSING:
                errors.append(f"{path}: required key missing")
                out[key] = None
            else:
                out[key] = spec.default
    return out


@dataclass
class RunConfig:
    """Fully resolved configuration plus its stable hash."""

    data: dict
    config_hash: str
    source_path: str | None = None

    def __getitem__(self, key):
        return self.data[key]

    @property
    def seed(self) -> int:
        return self.data["seed"]

    @property
    def workers(self) -> int:
        return self.data["workers"]

    @property
    def manifest_path(self) -> str:
        return self.data["io"]["manifest"]

    @property
    def output_root(self) -> str:
        return self.data["io"]["output_root"]

    def backend_params(self) -> dict:
        b = self.data["backend"]
        if b["kind"] == "synthetic":
            return {"kind": "synthetic", "synthetic": dict(b["synthetic"])}
        return {"kind": "pretrained", "weights": dict(b["weights"])}

    def hyperparams(self, margin: float | None = None) -> HyperParams:
        opt = self.data["optimizer"]
        return HyperParams(
            margin=opt["margin"] if margin is None else margin,
            weight_id=opt["weight_id"],
            weight_att=opt["weight_att"],
            epochs=opt["epochs"],
            steps_per_epoch=opt["steps_per_epoch"],
            learning_rate=opt["learning_rate"],
            att_normalization=opt["att_normalization"],
            seed=self.data["seed"],
        )

    def with_overrides(self, **overrides) -> "RunConfig":
        """New resolved config with top-level or dotted-key overrides."""
        data = _deep_copy(self.data)
        for key, value in overrides.items():
            node = data
            *parents, leaf = key.split(".")
            for p in parents:
                node = node[p]
            node[leaf] = value
        return resolve_config(data)


def _deep_copy(d):
    if isinstance(d, dict):
        return {k: _deep_copy(v) for k, v in d.items()}
    if isinstance(d, list):
        return [_deep_copy(v) for v in d]
    return d


def _semantic_checks(resolved: dict, errors: list) -> None:
    lr = resolved["optimizer"]["learning_rate"]
    if isinstance(lr, (int, float)) and lr is not None and lr <= 0:
        errors.append("optimizer.learning_rate: must be > 0")
    clr = resolved["evaluation"]["classifier"]["learning_rate"]
    if isinstance(clr, (int, float)) and clr is not None and clr <= 0:
        errors.append("evaluation.classifier.learning_rate: must be > 0")
    metrics = resolved["evaluation"]["metrics"] or []
    for m in metrics:
        if m not in _VALID_METRICS:
            errors.append(
                f"evaluation.metrics: unknown metric {m!r}, valid: {list(_VALID_METRICS)}"
            )
    margins = resolved["ablation"]["margins"] or []
    for m in margins:
        if isinstance(m, bool) or not isinstance(m, (int, float)) or not 0.0 <= m <= 1.0:
            errors.append(f"ablation.margins: each margin must be a number in [0, 1], got {m!r}")
    if resolved["backend"]["kind"] == "pretrained":
        weights = resolved["backend"]["weights"]
        missing = [k for k, v in weights.items() if not v]
        if missing:
            errors.append(
                f"backend.weights: pretrained backend requires weight paths for {missing}"
            )


def resolve_config(data: dict, source_path: str | None = None) -> RunConfig:
    errors: list[str] = []
    if not isinstance(data, dict):
        raise ConfigError(["config root must be a mapping"])
    resolved = _resolve(SCHEMA, data, "", errors)
    if not errors:
        _semantic_checks(resolved, errors)
    if errors:
        raise ConfigError(errors)
    return RunConfig(data=resolved, config_hash=stable_hash(resolved),
                     source_path=source_path)


def validate_config(path: Path | str) -> RunConfig:
    """Load and fully validate a YAML config file."""
    path = Path(path)
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except FileNotFoundError:
        raise ConfigError([f"config file not found: {path}"])
    except yaml.YAMLError as exc:
        raise ConfigError([f"config is not valid YAML: {exc}"])
    if data is None:
        data = {}
    return resolve_config(data, source_path=str(path))
