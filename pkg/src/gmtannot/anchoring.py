"""Resolution of seg anchors across a lattice of stand-off documents.

Three anchoring styles are handled uniformly:

* span anchoring: a seg with start/end offsets (characters or time units)
  addressing a primary document directly;
* landmark anchoring: pointers to ``landmark`` nodes, which in turn carry a
  span;
* object anchoring: pointers to structural nodes of another annotation
  document, followed transitively down to primary data.

Pointer lookup
--------------
A pointer with a document part only looks in that document.  Otherwise the
search scope is the owner's declared targets (``LayerSet.links`` or the
document's ``primary_refs``); with nothing declared, every other document
in the set.  Within the scope, explicit node ids win over node aliases,
which win over primary marks.  A pointer is never resolved to a node alias
equal to the alias of the node carrying it; such a pointer is a parallel
reference to the same object, not a reference to a lower level.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .errors import (
    AnnotationError,
    CyclicAnchor,
    Diagnostic,
    InvalidArgument,
    NotTextual,
    OutOfRange,
    UnitMismatch,
    UnknownDocument,
    UnresolvedReference,
)
from .model import (
    CHAR,
    LANDMARK,
    TIME,
    UNITS,
    AnnotationDocument,
    Pointer,
    Seg,
    Span,
    StructNode,
    TargetList,
    landmark_problems,
    make_landmark,
)

__all__ = [
    "Extent",
    "LayerSet",
    "NodeRef",
    "PrimaryDoc",
    "make_landmark",
    "project_to_primary",
    "resolve",
    "resolve_pointer",
    "validate_anchors",
]


@dataclass(frozen=True, order=True)
class Extent:
    doc_id: str
    starts_at: int
    ends_at: int
    unit: str = CHAR

    def __post_init__(self):
        if self.starts_at > self.ends_at:
            raise InvalidArgument(f"inverted extent {self.starts_at}..{self.ends_at}")


@dataclass
class PrimaryDoc:
    doc_id: str
    length: int
    content: Optional[str] = None
    marks: dict[str, tuple[int, int]] = field(default_factory=dict)
    unit: str = CHAR

    def __post_init__(self):
        if self.unit not in UNITS:
            raise InvalidArgument(f"unknown unit {self.unit!r}")
        if self.length < 0:
            raise InvalidArgument("negative document length")
        for name, (start, end) in self.marks.items():
            if not 0 <= start <= end <= self.length:
                raise OutOfRange(f"mark {name!r} [{start},{end}) outside [0,{self.length}]")

    @classmethod
    def from_text(cls, doc_id: str, text: str, marks: Optional[dict] = None) -> PrimaryDoc:
        return cls(doc_id, len(text), text, dict(marks or {}), CHAR)

    @classmethod
    def timed(cls, doc_id: str, length: int, marks: Optional[dict] = None) -> PrimaryDoc:
        return cls(doc_id, length, None, dict(marks or {}), TIME)

    def extent(self, mark: str) -> Extent:
        start, end = self.marks[mark]
        return Extent(self.doc_id, start, end, self.unit)

    def text_of(self, extent: Extent) -> str:
        if self.unit != CHAR or self.content is None:
            raise NotTextual(f"document {self.doc_id!r} is not a text")
        return self.content[extent.starts_at:extent.ends_at]


@dataclass(frozen=True, eq=False)
class NodeRef:
    """A node together with the document that owns it."""

    doc: AnnotationDocument
    node: StructNode

    def __eq__(self, other):
        return isinstance(other, NodeRef) and self.doc is other.doc and self.node is other.node

    def __hash__(self):
        return hash((id(self.doc), id(self.node)))

    def __repr__(self):
        return f"NodeRef({self.doc.doc_id}:{self.node.label})"


ResolvedAnchor = Union[NodeRef, Extent]


@dataclass
class LayerSet:
    primary_docs: dict[str, PrimaryDoc] = field(default_factory=dict)
    annotation_docs: dict[str, AnnotationDocument] = field(default_factory=dict)
    links: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        clash = set(self.primary_docs) & set(self.annotation_docs)
        if clash:
            raise InvalidArgument(f"document ids used twice: {sorted(clash)}")

    def __contains__(self, doc_id: str) -> bool:
        return doc_id in self.primary_docs or doc_id in self.annotation_docs

    def doc_ids(self) -> list[str]:
        return list(self.annotation_docs) + list(self.primary_docs)

    def add_primary(self, doc: PrimaryDoc) -> PrimaryDoc:
        if doc.doc_id in self:
            raise InvalidArgument(f"document id {doc.doc_id!r} already in the layer set")
        self.primary_docs[doc.doc_id] = doc
        return doc

    def add_annotation(self, doc: AnnotationDocument, targets: Optional[Iterable[str]] = None) -> AnnotationDocument:
        if doc.doc_id in self:
            raise InvalidArgument(f"document id {doc.doc_id!r} already in the layer set")
        self.annotation_docs[doc.doc_id] = doc
        if targets is not None:
            self.links[doc.doc_id] = tuple(targets)
        return doc

    def targets_of(self, doc: AnnotationDocument) -> list[str]:
        if doc.doc_id in self.links:
            return list(self.links[doc.doc_id])
        return list(doc.primary_refs)

    def ref(self, doc_id: str, node_id: str) -> NodeRef:
        doc = self.annotation_docs[doc_id]
        return NodeRef(doc, doc.find_node(node_id))

    def find(self, node_id: str) -> NodeRef:
        """Locate a node by id (or alias) across all annotation documents.

        A bare document id designates that document's root.
        """
        if node_id in self.annotation_docs:
            doc = self.annotation_docs[node_id]
            return NodeRef(doc, doc.root)
        for tier in (False, True):
            for doc in self.annotation_docs.values():
                node = doc.lookup(node_id, aliases=tier)
                if node is not None:
                    return NodeRef(doc, node)
        raise UnresolvedReference(node_id)


def _owner(owner: Union[str, AnnotationDocument], layers: LayerSet) -> AnnotationDocument:
    if isinstance(owner, AnnotationDocument):
        return owner
    try:
        return layers.annotation_docs[owner]
    except KeyError:
        raise UnknownDocument(f"no annotation document {owner!r}") from None


def _scope(ptr: Pointer, owner: AnnotationDocument, layers: LayerSet) -> list[str]:
    if ptr.doc_ref:
        scope = [ptr.doc_ref]
    else:
        scope = layers.targets_of(owner) or [d for d in layers.doc_ids() if d != owner.doc_id]
    for d in scope:
        if d not in layers and d != owner.doc_id:
            raise UnknownDocument(f"pointer {ptr} refers to unknown document {d!r}")
    return scope


def _candidates(ptr, owner, layers, carrier, within_owner):
    """Explicit-id, alias and mark hits for ``ptr``, each in scope order.

    A bare pointer may also name an explicit id in its own document; aliases
    there only count for relations (``within_owner``), since a seg resolving
    to a sibling alias of itself would be a parallel-layer loop.
    """
    docs = []
    if not ptr.doc_ref:
        docs.append(owner)
    for d in _scope(ptr, owner, layers):
        if d == owner.doc_id:
            docs.append(owner)
        elif d in layers.annotation_docs:
            docs.append(layers.annotation_docs[d])
        else:
            docs.append(layers.primary_docs[d])

    explicit, aliased, marks = [], [], []
    skip_alias = carrier is not None and carrier.alias == ptr.fragment
    in_scope = {id(d) for d in docs[1:]} if not ptr.doc_ref else {id(d) for d in docs}
    seen = set()
    for doc in docs:
        if id(doc) in seen:
            continue
        seen.add(id(doc))
        if isinstance(doc, AnnotationDocument):
            node = doc.lookup(ptr.fragment, aliases=False)
            if node is not None and node is not carrier:
                explicit.append(NodeRef(doc, node))
                continue
            aliases_ok = id(doc) in in_scope or (doc is owner and within_owner)
            if aliases_ok and not skip_alias:
                node = doc.lookup(ptr.fragment)
                if node is not None and node is not carrier:
                    aliased.append(NodeRef(doc, node))
        elif ptr.fragment in doc.marks:
            marks.append(doc.extent(ptr.fragment))
    return explicit, aliased, marks


def resolve_pointer(
    ptr: Pointer,
    owner: Union[str, AnnotationDocument],
    layers: LayerSet,
    *,
    carrier: Optional[StructNode] = None,
    within_owner: bool = False,
    notes: Optional[list[str]] = None,
) -> ResolvedAnchor:
    """Resolve one pointer; ambiguities are appended to ``notes``."""
    owner = _owner(owner, layers)
    explicit, aliased, marks = _candidates(ptr, owner, layers, carrier, within_owner)
    if explicit and marks and notes is not None:
        notes.append(f"{ptr} names both a node and a primary mark")
    for tier in (explicit, aliased, marks):
        if tier:
            if len(tier) > 1 and notes is not None:
                notes.append(f"{ptr} matches {len(tier)} objects")
            return tier[0]
    raise UnresolvedReference(ptr.fragment, f"pointer {ptr} does not resolve")


def _span_extent(span: Span, owner: AnnotationDocument, layers: LayerSet) -> Extent:
    declared = [d for d in layers.targets_of(owner) if d in layers.primary_docs]
    if declared:
        target = layers.primary_docs[declared[0]]
    elif len(layers.primary_docs) == 1:
        target = next(iter(layers.primary_docs.values()))
    elif not layers.primary_docs:
        raise UnknownDocument(f"span in {owner.doc_id!r} has no primary document to address")
    else:
        raise UnknownDocument(f"span in {owner.doc_id!r} is ambiguous: no declared primary target")
    if span.unit != target.unit:
        raise UnitMismatch(f"{span.unit} span against {target.unit} document {target.doc_id!r}")
    if span.ends_at > target.length:
        raise OutOfRange(f"span {span.starts_at}..{span.ends_at} beyond length {target.length} of {target.doc_id!r}")
    return Extent(target.doc_id, span.starts_at, span.ends_at, span.unit)


def resolve(
    seg: Seg,
    owner: Union[str, AnnotationDocument],
    layers: LayerSet,
    *,
    carrier: Optional[StructNode] = None,
) -> list[ResolvedAnchor]:
    owner = _owner(owner, layers)
    if isinstance(seg, Span):
        return [_span_extent(seg, owner, layers)]
    return [resolve_pointer(p, owner, layers, carrier=carrier) for p in seg.pointers]


def _project(ref: NodeRef, layers: LayerSet, stack: list[NodeRef]) -> list[Extent]:
    if ref in stack:
        cycle = stack[stack.index(ref):]
        names = " -> ".join(f"{r.doc.doc_id}:{r.node.label}" for r in cycle + [ref])
        raise CyclicAnchor(f"cyclic anchoring {names}", members=tuple(cycle))
    stack.append(ref)
    node = ref.node
    out: list[Extent] = []
    if node.seg is not None:
        for anchor in resolve(node.seg, ref.doc, layers, carrier=node):
            if isinstance(anchor, Extent):
                out.append(anchor)
            else:
                out.extend(_project(anchor, layers, stack))
    else:
        for child in node.nested():
            out.extend(_project(NodeRef(ref.doc, child), layers, stack))
    stack.pop()
    return out


def project_to_primary(ref: NodeRef, layers: LayerSet) -> list[Extent]:
    """Primary extents reached from ``ref``, sorted and without duplicates."""
    return sorted(set(_project(ref, layers, [])))


def _check_pointer(ptr, doc, layers, node, out, *, relation=False):
    notes: list[str] = []
    carrier = None if relation else node
    try:
        resolve_pointer(ptr, doc, layers, carrier=carrier, within_owner=relation, notes=notes)
    except AnnotationError as exc:
        out.append(Diagnostic("error", exc.code, f"{node.label}: {exc.message}", doc.doc_id, *(node.pos or (0, 0))))
    for note in notes:
        out.append(Diagnostic("warning", "ambiguous-reference", f"{node.label}: {note}", doc.doc_id, *(node.pos or (0, 0))))


def validate_anchors(layers: LayerSet) -> list[Diagnostic]:
    out: list[Diagnostic] = []
    for pdoc in layers.primary_docs.values():
        for name, (start, end) in pdoc.marks.items():
            if not 0 <= start <= end <= pdoc.length:
                out.append(Diagnostic("error", "out-of-range", f"mark {name!r} outside document", pdoc.doc_id))

    cycles_seen: set[frozenset] = set()
    for doc in layers.annotation_docs.values():
        for node in doc.root.walk():
            at = node.pos or (0, 0)
            if node.node_type == LANDMARK:
                for p in landmark_problems(node):
                    out.append(Diagnostic("error", "landmark-misuse", f"{node.label}: {p}", doc.doc_id, *at))
            if isinstance(node.seg, Span):
                try:
                    _span_extent(node.seg, doc, layers)
                except AnnotationError as exc:
                    out.append(Diagnostic("error", exc.code, f"{node.label}: {exc.message}", doc.doc_id, *at))
            elif isinstance(node.seg, TargetList):
                for ptr in node.seg.pointers:
                    _check_pointer(ptr, doc, layers, node, out)
            for rel in node.relations:
                for ptr in ([rel.source] if rel.source else []) + list(rel.targets):
                    _check_pointer(ptr, doc, layers, node, out, relation=True)
            if node.seg is None:
                continue
            try:
                _project(NodeRef(doc, node), layers, [])
            except CyclicAnchor as exc:
                key = frozenset(exc.members)
                if key not in cycles_seen:
                    cycles_seen.add(key)
                    out.append(Diagnostic("error", exc.code, exc.message, doc.doc_id, *at))
            except AnnotationError:
                pass  # reported where the broken link itself lives
    return out
