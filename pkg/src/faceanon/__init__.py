"""Face dataset anonymization by optimizing spliced latent codes of a
pre-trained generator, under a margin-based identity loss and a deep-feature
attribute-preservation loss, with a privacy/utility evaluation harness."""

from .backends import (
    Backend,
    ModelAdapter,
    PretrainedBackend,
    SyntheticBackend,
    SyntheticConfig,
    build_backend,
)
from .config import RunConfig, resolve_config, validate_config
from .losses import attribute_loss, identity_loss, total_loss
from .optimize import AnonymizedRecord, optimize_latent
from .pairing import (
    FakePool,
    PoolEntry,
    RealRecord,
    build_pool,
    invert_dataset,
    pair_nearest,
    splice_init,
)
from .pipeline import Pipeline, evaluate_run
from .testbed import AttributeWorld, fit_world_probe, make_synthetic_dataset
from .types import AttributeSpec, HyperParams, SplicedCode, celeba_attribute_spec

__version__ = "0.1.0"

__all__ = [
    "Backend",
    "ModelAdapter",
    "PretrainedBackend",
    "SyntheticBackend",
    "SyntheticConfig",
    "build_backend",
    "RunConfig",
    "resolve_config",
    "validate_config",
    "attribute_loss",
    "identity_loss",
    "total_loss",
    "AnonymizedRecord",
    "optimize_latent",
    "FakePool",
    "PoolEntry",
    "RealRecord",
    "build_pool",
    "invert_dataset",
    "pair_nearest",
    "splice_init",
    "Pipeline",
    "evaluate_run",
    "AttributeWorld",
    "fit_world_probe",
    "make_synthetic_dataset",
    "AttributeSpec",
    "HyperParams",
    "SplicedCode",
    "celeba_attribute_spec",
    "__version__",
]
