"""In-memory annotation model.

A document is a tree of typed structural nodes.  Information lives in
features attached to nodes; mutually exclusive readings live in
alternative groups; explicit links between nodes are relations; a node is
tied to the data it annotates through a seg, which is either a list of
pointers or an offset/time span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional, Sequence, Union

from .errors import (
    Diagnostic,
    DuplicateIdentifier,
    InvalidArgument,
    NotFound,
    error,
    warning,
)

CHAR = "char"
TIME = "time"
UNITS = (CHAR, TIME)

LANDMARK = "landmark"
AGGREGATION = "aggregation"
CONFIDENCE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class Pointer:
    """``[doc]#fragment`` or a bare ``fragment``.

    ``hashed`` remembers the surface form only; it takes no part in equality.
    """

    fragment: str
    doc_ref: Optional[str] = None
    hashed: bool = field(default=True, compare=False)

    def __post_init__(self):
        if not self.fragment:
            raise InvalidArgument("pointer fragment is empty")
        if "#" in self.fragment or any(c.isspace() for c in self.fragment):
            raise InvalidArgument(f"bad pointer fragment {self.fragment!r}")
        if self.doc_ref is not None and (
            not self.doc_ref or "#" in self.doc_ref or any(c.isspace() for c in self.doc_ref)
        ):
            raise InvalidArgument(f"bad document reference {self.doc_ref!r}")

    @classmethod
    def parse(cls, text: str) -> Pointer:
        text = text.strip()
        if "#" in text:
            doc, _, frag = text.partition("#")
            return cls(frag, doc or None, True)
        return cls(text, None, False)

    def render(self, style: Optional[str] = None) -> str:
        hashed = self.hashed if style is None else style != "bare"
        if hashed or self.doc_ref:
            return f"{self.doc_ref or ''}#{self.fragment}"
        return self.fragment

    def __str__(self):
        return self.render()


@dataclass(frozen=True)
class Span:
    starts_at: int
    ends_at: int
    unit: str = CHAR

    def __post_init__(self):
        if self.unit not in UNITS:
            raise InvalidArgument(f"unknown unit {self.unit!r}")
        if self.starts_at < 0 or self.ends_at < 0:
            raise InvalidArgument("span offsets must be non-negative")
        if self.starts_at > self.ends_at:
            raise InvalidArgument(f"inverted span {self.starts_at}..{self.ends_at}")


@dataclass(frozen=True)
class TargetList:
    pointers: tuple[Pointer, ...]

    def __post_init__(self):
        object.__setattr__(self, "pointers", tuple(self.pointers))
        if not self.pointers:
            raise InvalidArgument("target list needs at least one pointer")

    @classmethod
    def of(cls, *refs: Union[str, Pointer]) -> TargetList:
        return cls(tuple(r if isinstance(r, Pointer) else Pointer.parse(r) for r in refs))


Seg = Union[TargetList, Span]


@dataclass
class Feature:
    category: str
    value: str = ""
    children: list[Feature] = field(default_factory=list)
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.category:
            raise InvalidArgument("feature category is empty")
        if not self.value and not self.children:
            raise InvalidArgument(f"feature {self.category!r} has neither value nor children")


@dataclass
class AltGroup:
    features: list[Feature] = field(default_factory=list)
    children: list[StructNode] = field(default_factory=list)
    confidence: Optional[float] = None

    def __post_init__(self):
        if not self.features and not self.children:
            raise InvalidArgument("alternative group is empty")
        if self.confidence is not None:
            c = float(self.confidence)
            if math.isnan(c) or not 0.0 <= c <= 1.0:
                raise InvalidArgument(f"confidence {self.confidence!r} outside [0,1]")
            self.confidence = c


@dataclass
class Relation:
    rel_type: str
    targets: list[Pointer]
    source: Optional[Pointer] = None  # None means the owning node
    directed: bool = True

    def __post_init__(self):
        if not self.rel_type:
            raise InvalidArgument("relation type is empty")
        if not self.targets:
            raise InvalidArgument("relation needs at least one target")


@dataclass
class StructNode:
    node_type: str
    id: Optional[str] = None
    features: list[Feature] = field(default_factory=list)
    alternatives: list[AltGroup] = field(default_factory=list)
    relations: list[Relation] = field(default_factory=list)
    seg: Optional[Seg] = None
    children: list[StructNode] = field(default_factory=list)
    pos: Optional[tuple[int, int]] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if not self.node_type:
            raise InvalidArgument("node type is empty")

    def set_feature(self, category: str, value: str) -> Feature:
        feat = Feature(category, value)
        self.features.append(feat)
        return feat

    def add_alternatives(self, groups: Sequence[AltGroup]) -> None:
        if not groups:
            raise InvalidArgument("no alternative groups given")
        for g in groups:
            if not isinstance(g, AltGroup):
                raise InvalidArgument(f"not an alternative group: {g!r}")
            # re-run the invariant checks; the group may have been mutated
            AltGroup.__post_init__(g)
        self.alternatives.extend(groups)

    def get(self, category: str) -> Optional[str]:
        for f in self.features:
            if f.category == category:
                return f.value
        return None

    def values(self, category: str) -> list[str]:
        return [f.value for f in self.features if f.category == category]

    @property
    def alias(self) -> Optional[str]:
        """Fragment of the single pointer this node is anchored on, if any.

        An id-less node anchored on exactly one target stands for the same
        data object as that target and can be addressed by its fragment.
        """
        if isinstance(self.seg, TargetList) and len(self.seg.pointers) == 1:
            return self.seg.pointers[0].fragment
        return None

    @property
    def label(self) -> str:
        if self.id:
            return self.id
        if self.alias:
            return f"@{self.alias}"
        if self.pos:
            return f"{self.node_type}@{self.pos[0]}:{self.pos[1]}"
        return self.node_type

    def nested(self) -> Iterator[StructNode]:
        """Direct structural descendants: alternative-group children, then children."""
        for g in self.alternatives:
            yield from g.children
        yield from self.children

    def walk(self, order: str = "pre") -> Iterator[StructNode]:
        if order not in ("pre", "post"):
            raise InvalidArgument(f"unknown traversal order {order!r}")
        stack: list[tuple[StructNode, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if order == "post" and expanded:
                yield node
                continue
            if order == "pre":
                yield node
            else:
                stack.append((node, True))
            stack.extend((c, False) for c in reversed(list(node.nested())))


def make_landmark(starts_at: int, ends_at: int, unit: str = CHAR, id: Optional[str] = None) -> StructNode:
    if starts_at > ends_at:
        raise InvalidArgument(f"inverted landmark span {starts_at}..{ends_at}")
    return StructNode(LANDMARK, id=id, seg=Span(starts_at, ends_at, unit))


def aggregation(targets: Sequence[Union[str, Pointer]]) -> Relation:
    """An undirected relation grouping ``targets`` into one unit."""
    ptrs = [t if isinstance(t, Pointer) else Pointer.parse(t) for t in targets]
    return Relation(AGGREGATION, ptrs, directed=False)


@dataclass
class AnnotationDocument:
    doc_id: str
    level: str
    root: StructNode
    primary_refs: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.doc_id:
            raise InvalidArgument("document id is empty")
        if not self.level:
            raise InvalidArgument("annotation level is empty")

    def iterate(self, order: str = "pre") -> list[StructNode]:
        return list(self.root.walk(order))

    def __iter__(self) -> Iterator[StructNode]:
        return self.root.walk("pre")

    def node_ids(self) -> list[str]:
        return [n.id for n in self.root.walk() if n.id]

    def _contains(self, node: StructNode) -> bool:
        return any(n is node for n in self.root.walk())

    def add_child(self, parent: StructNode, node_type: str, id: Optional[str] = None) -> StructNode:
        if not self._contains(parent):
            raise NotFound("parent node is not part of this document")
        if id is not None:
            if not id:
                raise InvalidArgument("node id is empty")
            if id in self.node_ids():
                raise DuplicateIdentifier(f"node id {id!r} already in use")
        child = StructNode(node_type, id=id)
        parent.children.append(child)
        return child

    def find_node(self, id: str) -> StructNode:
        """Node with explicit ``id``; failing that, the unique node aliased ``id``."""
        found = self.lookup(id)
        if found is None:
            raise NotFound(f"no node {id!r} in document {self.doc_id!r}")
        return found

    def lookup(self, id: str, *, aliases: bool = True) -> Optional[StructNode]:
        by_alias = []
        for n in self.root.walk():
            if n.id == id:
                return n
            if aliases and n.id is None and n.alias == id:
                by_alias.append(n)
        return by_alias[0] if len(by_alias) == 1 else None

    def parent_map(self) -> dict[int, StructNode]:
        parents: dict[int, StructNode] = {}
        for n in self.root.walk():
            for c in n.nested():
                parents[id(c)] = n
        return parents

    def assign_ids(self, prefix: str = "n") -> list[StructNode]:
        """Give every id-less node a fresh id (pre-order, skipping taken ids)."""
        taken = set(self.node_ids())
        k = 0
        assigned = []
        for n in self.root.walk():
            if n.id:
                continue
            k += 1
            while f"{prefix}{k}" in taken:
                k += 1
            n.id = f"{prefix}{k}"
            taken.add(n.id)
            assigned.append(n)
        return assigned


def new_document(doc_id: str, level: str, root_type: str) -> AnnotationDocument:
    if not doc_id or not level or not root_type:
        raise InvalidArgument("doc_id, level and root_type must be non-empty")
    return AnnotationDocument(doc_id, level, StructNode(root_type))


def _at(node) -> tuple[int, int]:
    return node.pos or (0, 0)


def landmark_problems(node: StructNode) -> list[str]:
    problems = []
    if not isinstance(node.seg, Span):
        problems.append("landmark must carry a span seg")
    if node.features or node.alternatives:
        problems.append("landmark must not carry features")
    if node.children:
        problems.append("landmark must not have children")
    return problems


def _check_feature(f: Feature, out: list[Diagnostic]) -> None:
    if not f.category:
        out.append(error("empty-category", "feature with empty category", *_at(f)))
    if not f.value and not f.children:
        out.append(error("empty-feature", f"feature {f.category!r} is empty", *_at(f)))
    for c in f.children:
        _check_feature(c, out)


def check_document(doc: AnnotationDocument) -> list[Diagnostic]:
    """Structural invariants of a document (not category semantics)."""
    out: list[Diagnostic] = []
    seen: set[int] = set()
    ids: dict[str, StructNode] = {}
    stack = [doc.root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            out.append(error("not-a-tree", f"node {node.label} is reachable twice", *_at(node)))
            continue
        seen.add(id(node))
        if not node.node_type:
            out.append(error("empty-type", "node with empty type", *_at(node)))
        if node.id:
            if node.id in ids:
                out.append(error("duplicate-identifier", f"node id {node.id!r} used twice", *_at(node)))
            ids[node.id] = node
        if node.node_type == LANDMARK:
            for p in landmark_problems(node):
                out.append(error("landmark-misuse", f"{node.label}: {p}", *_at(node)))
        for f in node.features:
            _check_feature(f, out)
        total = 0.0
        for g in node.alternatives:
            if not g.features and not g.children:
                out.append(error("empty-alternative", f"{node.label}: empty alternative group", *_at(node)))
            if g.confidence is not None:
                if not 0.0 <= g.confidence <= 1.0:
                    out.append(error("confidence-range", f"{node.label}: confidence {g.confidence} outside [0,1]", *_at(node)))
                total += g.confidence
            for f in g.features:
                _check_feature(f, out)
        if total > 1.0 + CONFIDENCE_TOLERANCE:
            out.append(warning("confidence-sum", f"{node.label}: alternative confidences sum to {total:g}", *_at(node)))
        for r in node.relations:
            if not r.targets:
                out.append(error("empty-relation", f"{node.label}: relation without targets", *_at(node)))
        stack.extend(reversed(list(node.nested())))
    return out
