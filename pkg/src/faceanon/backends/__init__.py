"""Model backends: the synthetic analytic testbed and the pretrained adapter."""

from .base import Backend, bundle_metadata
from .pretrained import ModelAdapter, PretrainedBackend
from .synthetic import SyntheticBackend, SyntheticConfig

__all__ = [
    "Backend",
    "bundle_metadata",
    "ModelAdapter",
    "PretrainedBackend",
    "SyntheticBackend",
    "SyntheticConfig",
]


_BACKEND_CACHE: dict[str, Backend] = {}


def build_backend(params: dict) -> Backend:
    """Construct a backend from its ``construction_params`` dict.

    Used by worker processes to cheaply re-instantiate a bundle from the
    same parameters instead of pickling weight matrices. Bundles are
    read-only after construction, so instances are memoized per process.
    """
    from ..util import canonical_json

    key = canonical_json(params)
    if key in _BACKEND_CACHE:
        return _BACKEND_CACHE[key]
    backend = _construct_backend(params)
    _BACKEND_CACHE[key] = backend
    return backend


def _construct_backend(params: dict) -> Backend:
    kind = params.get("kind")
    if kind == "synthetic":
        return SyntheticBackend(SyntheticConfig.from_dict(params.get("synthetic", {})))
    if kind == "pretrained":
        from ..errors import BackendError

        raise BackendError(
            "pretrained bundles cannot be rebuilt from paths alone; "
            "construct PretrainedBackend with its adapters and pass it directly"
        )
    from ..errors import ValidationError

    raise ValidationError(f"unknown backend kind: {kind!r}")
