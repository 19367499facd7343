"""Stand-off linguistic annotation: GMT pivot format, anchoring, registry, layer operations."""

from .anchoring import Extent, LayerSet, NodeRef, PrimaryDoc, project_to_primary, resolve, validate_anchors
from .errors import AnnotationError, Diagnostic
from .gmt import GmtDialect, canonicalize, parse, parse_file, serialize
from .model import (
    AltGroup,
    AnnotationDocument,
    Feature,
    Pointer,
    Relation,
    Span,
    StructNode,
    TargetList,
    make_landmark,
    new_document,
)
from .registry import DataCategory, Registry, ValueSpace, seed_registry, validate

__version__ = "0.1.0"
