"""Network architecture: the full pattern learning/recognition circuit."""

from .builder import BuildResult, LayerHandles, TupleWindow, build
from .config import PatternNetConfig, config_digest
from .resources import ResourceReport, count_resources, manifest

__all__ = [
    "BuildResult",
    "LayerHandles",
    "PatternNetConfig",
    "ResourceReport",
    "TupleWindow",
    "build",
    "config_digest",
    "count_resources",
    "manifest",
]
