"""Reading and writing the GMT pivot format.

Element mapping::

    <struct type= id=>         StructNode
    <feat type=>text</feat>    Feature (nestable)
    <seg target=|targets=/>    TargetList
    <seg startsAt= endsAt=/>   Span (also startPosition/endPosition, optional unit=)
    <alt>...</alt>             AltGroup; a numeric <feat type="confidence"> is lifted
    <rel type= source= targets= directed=/>   Relation

The root struct may carry ``doc``, ``level`` and ``primary`` attributes
holding the document id, annotation level and anchored documents.

Lenient parsing repairs three defects found in hand-written listings:
``<seg>`` start tags that are never closed, end tags that close nothing,
and several top-level structs (wrapped into one ``root`` struct).  Every
repair is reported.
"""

from __future__ import annotations

import bisect
import copy
import re
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Union
from xml.parsers import expat
from xml.sax.saxutils import escape

from .errors import (
    ConflictingAnchor,
    Diagnostic,
    InvalidArgument,
    ParseError,
    SerializationRefused,
    UnknownElement,
)
from .model import (
    CHAR,
    TIME,
    AltGroup,
    AnnotationDocument,
    Feature,
    Pointer,
    Relation,
    Span,
    StructNode,
    TargetList,
    check_document,
)

SUFFIX = ".gmt.xml"
WRAPPER_TYPE = "root"

SPAN_STYLES = {
    "startsAt-endsAt": ("startsAt", "endsAt"),
    "startPosition-endPosition": ("startPosition", "endPosition"),
}
POINTER_STYLES = (None, "hash-prefixed", "bare")
_UNIT_NAMES = {"char": CHAR, "character-offset": CHAR, "time": TIME, "time-unit": TIME}


@dataclass(frozen=True)
class GmtDialect:
    span_attr_style: str = "startsAt-endsAt"
    # None writes each pointer in the form it was read or built with
    pointer_style: Optional[str] = None
    strict: bool = False
    default_unit: str = CHAR

    def __post_init__(self):
        if self.span_attr_style not in SPAN_STYLES:
            raise InvalidArgument(f"unknown span attribute style {self.span_attr_style!r}")
        if self.pointer_style not in POINTER_STYLES:
            raise InvalidArgument(f"unknown pointer style {self.pointer_style!r}")
        if self.default_unit not in (CHAR, TIME):
            raise InvalidArgument(f"unknown unit {self.default_unit!r}")


LENIENT = GmtDialect()
STRICT = GmtDialect(strict=True)
CANONICAL = GmtDialect(pointer_style="hash-prefixed")


# -- raw tree ---------------------------------------------------------------

class _El:
    __slots__ = ("tag", "attrs", "line", "col", "items")

    def __init__(self, tag, attrs, line, col):
        self.tag = tag
        self.attrs = attrs
        self.line = line
        self.col = col
        self.items: list = []


_DECL_ENCODING = re.compile(rb"""^\s*<\?xml[^>]*?encoding\s*=\s*["']([A-Za-z0-9._-]+)["']""")


def _decode(data: bytes) -> str:
    if data.startswith(b"\xef\xbb\xbf"):
        return data[3:].decode("utf-8")
    if data.startswith((b"\xff\xfe", b"\xfe\xff")):
        return data.decode("utf-16")
    m = _DECL_ENCODING.match(data)
    try:
        return data.decode(m.group(1).decode("ascii") if m else "utf-8")
    except (LookupError, UnicodeDecodeError) as exc:
        raise ParseError(f"cannot decode input: {exc}", line=1, col=1) from None


def _build_tree(data: Union[bytes, str]) -> _El:
    parser = expat.ParserCreate("UTF-8" if isinstance(data, str) else None)
    parser.buffer_text = True
    parser.ordered_attributes = True
    roots: list[_El] = []
    stack: list[_El] = []

    def start(tag, attrs):
        pairs = dict(zip(attrs[::2], attrs[1::2]))
        el = _El(tag, pairs, parser.CurrentLineNumber, parser.CurrentColumnNumber + 1)
        (stack[-1].items if stack else roots).append(el)
        stack.append(el)

    def end(tag):
        stack.pop()

    def chars(text):
        if stack:
            stack[-1].items.append(text)

    parser.StartElementHandler = start
    parser.EndElementHandler = end
    parser.CharacterDataHandler = chars
    try:
        parser.Parse(data, True)
    except expat.ExpatError as exc:
        raise ParseError(expat.errors.messages[exc.code], line=exc.lineno, col=exc.offset + 1) from None
    return roots[0]


_TOKEN = re.compile(
    r"<!--.*?-->|<\?.*?\?>|<!\[CDATA\[.*?\]\]>|<!DOCTYPE[^>]*>"
    r"|<(/?)([A-Za-z_][\w.\-:]*)((?:[^>\"']|\"[^\"]*\"|'[^']*')*)>",
    re.S,
)


def _repair(text: str, diagnostics: list[Diagnostic]) -> Optional[str]:
    """Return repaired markup, or None when nothing needed fixing."""
    line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def at(offset):
        line = bisect.bisect_right(line_starts, offset)
        return line, offset - line_starts[line - 1] + 1

    def note(code, message, offset):
        diagnostics.append(Diagnostic("warning", code, message, "-", *at(offset)))

    out: list[str] = []
    stack: list[str] = []
    first_top = None
    first_offset = 0
    tops = 0
    changed = False
    pos = 0
    for m in _TOKEN.finditer(text):
        out.append(text[pos:m.start()])
        pos = m.end()
        token = m.group(0)
        name = m.group(2)
        if name is None:
            out.append(token)
            continue
        closing = m.group(1) == "/"
        empty = m.group(3).rstrip().endswith("/")
        if closing:
            if name == "seg":
                changed = True  # its start tag was already made empty
            elif stack and stack[-1] == name:
                stack.pop()
                out.append(token)
            elif name in stack:
                while stack[-1] != name:
                    note("unclosed-element", f"<{stack[-1]}> closed implicitly by </{name}>", m.start())
                    out.append(f"</{stack.pop()}>")
                stack.pop()
                out.append(token)
                changed = True
            else:
                note("stray-end-tag", f"</{name}> closes nothing; dropped", m.start())
                changed = True
            continue
        if not stack:
            tops += 1
            if first_top is None:
                first_top = len(out)
                first_offset = m.start()
        if name == "seg" and not empty:
            note("unclosed-seg", "<seg> start tag treated as an empty element", m.start())
            out.append(token[:-1] + "/>")
            changed = True
        else:
            out.append(token)
            if not empty:
                stack.append(name)
    out.append(text[pos:])
    while stack:
        note("unclosed-element", f"<{stack[-1]}> never closed", len(text))
        out.append(f"</{stack.pop()}>")
        changed = True
    if tops > 1:
        note("multiple-roots", f"{tops} top-level elements wrapped in a {WRAPPER_TYPE!r} struct", first_offset)
        out.insert(first_top, f'<struct type="{WRAPPER_TYPE}">')
        out.append("</struct>")
        changed = True
    return "".join(out) if changed else None


# -- tree -> model ------------------------------------------------------------

class _Reader:
    def __init__(self, dialect: GmtDialect, diagnostics: list[Diagnostic]):
        self.dialect = dialect
        self.diagnostics = diagnostics

    def problem(self, code, message, el, exc=ParseError):
        """Raise in strict mode, record a warning otherwise."""
        if self.dialect.strict:
            err = exc(message, line=el.line, col=el.col)
            err.code = code
            raise err
        self.diagnostics.append(Diagnostic("warning", code, message, "-", el.line, el.col))

    def fail(self, code, message, el, exc=ParseError):
        err = exc(message, line=el.line, col=el.col)
        err.code = code
        raise err

    def leftovers(self, el, attrs):
        for name in attrs:
            self.problem("unknown-attribute", f"<{el.tag}> has unknown attribute {name!r}", el)

    def stray_text(self, el):
        for item in el.items:
            if isinstance(item, str) and item.strip():
                self.problem("stray-text", f"text {item.strip()[:20]!r} inside <{el.tag}>", el)

    def type_of(self, el, attrs):
        value = attrs.pop("type", None)
        if not value:
            self.problem("missing-type", f"<{el.tag}> without type attribute", el)
            return "unknown"
        return value

    def pointer(self, text, el):
        try:
            return Pointer.parse(text)
        except InvalidArgument as exc:
            self.fail("bad-pointer", str(exc), el)

    def struct(self, el, root=False):
        attrs = dict(el.attrs)
        node = StructNode(self.type_of(el, attrs), id=attrs.pop("id", None) or None, pos=(el.line, el.col))
        meta = {}
        if root:
            for key in ("doc", "level", "primary"):
                if key in attrs:
                    meta[key] = attrs.pop(key)
        self.leftovers(el, attrs)
        self.stray_text(el)
        for item in el.items:
            if isinstance(item, str):
                continue
            if item.tag == "feat":
                feat = self.feat(item)
                if feat is not None:
                    node.features.append(feat)
            elif item.tag == "seg":
                seg = self.seg(item)
                if seg is None:
                    continue
                if node.seg is not None:
                    self.problem("duplicate-seg", "second <seg> in one struct ignored", item)
                else:
                    node.seg = seg
            elif item.tag == "alt":
                group = self.alt(item)
                if group is not None:
                    node.alternatives.append(group)
            elif item.tag == "rel":
                rel = self.rel(item)
                if rel is not None:
                    node.relations.append(rel)
            elif item.tag == "struct":
                node.children.append(self.struct(item))
            else:
                self.problem("unknown-element", f"unknown element <{item.tag}> skipped", item, UnknownElement)
        return (node, meta) if root else node

    def feat(self, el):
        attrs = dict(el.attrs)
        category = self.type_of(el, attrs)
        self.leftovers(el, attrs)
        texts, children = [], []
        for item in el.items:
            if isinstance(item, str):
                texts.append(item)
            elif item.tag == "feat":
                child = self.feat(item)
                if child is not None:
                    children.append(child)
            else:
                self.problem("unknown-element", f"unknown element <{item.tag}> inside <feat>", item, UnknownElement)
        text = "".join(texts)
        # between nested feats, text is layout unless it carries characters
        value = text.strip() if children else text
        if not value and not children:
            self.problem("empty-feature", f"feature {category!r} has no value; skipped", el)
            return None
        return Feature(category, value, children, pos=(el.line, el.col))

    def alt(self, el):
        self.leftovers(el, el.attrs)
        self.stray_text(el)
        feats, children = [], []
        for item in el.items:
            if isinstance(item, str):
                continue
            if item.tag == "feat":
                f = self.feat(item)
                if f is not None:
                    feats.append(f)
            elif item.tag == "struct":
                children.append(self.struct(item))
            else:
                self.problem("unknown-element", f"unknown element <{item.tag}> inside <alt>", item, UnknownElement)
        confidence = None
        for i, f in enumerate(feats):
            if f.category == "confidence" and not f.children:
                c = _as_confidence(f.value)
                if c is not None:
                    confidence = c
                    del feats[i]
                break
        if not feats and not children:
            self.problem("empty-alternative", "empty <alt> skipped", el)
            return None
        return AltGroup(feats, children, confidence)

    def seg(self, el):
        attrs = dict(el.attrs)
        if any(not isinstance(i, str) or i.strip() for i in el.items):
            self.problem("seg-content", "<seg> must be empty; content ignored", el)
        target = attrs.pop("target", None)
        targets = attrs.pop("targets", None)
        unit = attrs.pop("unit", None)
        bounds = []
        for a, b in SPAN_STYLES.values():
            bounds.append((attrs.pop(a, None), attrs.pop(b, None)))
        self.leftovers(el, attrs)
        start = _merge_bound(bounds[0][0], bounds[1][0], el, self)
        end = _merge_bound(bounds[0][1], bounds[1][1], el, self)
        has_span = start is not None or end is not None
        has_ptr = target is not None or targets is not None
        if has_span and has_ptr:
            self.fail("conflicting-anchor", "<seg> has both pointers and a span", el, ConflictingAnchor)
        if target is not None and targets is not None:
            self.fail("conflicting-anchor", "<seg> has both target and targets", el, ConflictingAnchor)
        if has_ptr:
            refs = (target if target is not None else targets).split()
            if not refs:
                self.fail("empty-target", "<seg> target list is empty", el)
            if target is not None and len(refs) > 1:
                self.problem("multiple-target", "target= holds several pointers; use targets=", el)
            return TargetList(tuple(self.pointer(r, el) for r in refs))
        if has_span:
            if start is None or end is None:
                self.fail("incomplete-span", "<seg> span needs both a start and an end", el)
            if unit is not None and unit not in _UNIT_NAMES:
                self.fail("bad-unit", f"unknown unit {unit!r}", el)
            try:
                return Span(int(start), int(end), _UNIT_NAMES[unit] if unit else self.dialect.default_unit)
            except ValueError as exc:
                self.fail("bad-span", f"bad span {start!r}..{end!r}: {exc}", el)
        self.problem("empty-seg", "<seg> without anchor skipped", el)
        return None

    def rel(self, el):
        attrs = dict(el.attrs)
        rel_type = self.type_of(el, attrs)
        source = attrs.pop("source", None)
        targets = attrs.pop("targets", attrs.pop("target", None))
        directed = attrs.pop("directed", "true").strip().lower()
        self.leftovers(el, attrs)
        self.stray_text(el)
        if directed not in ("true", "false"):
            self.fail("bad-attribute", f"directed={directed!r} is not true/false", el)
        refs = (targets or "").split()
        if not refs:
            self.problem("empty-relation", "<rel> without targets skipped", el)
            return None
        return Relation(
            rel_type,
            [self.pointer(r, el) for r in refs],
            self.pointer(source, el) if source else None,
            directed == "true",
        )


def _merge_bound(a, b, el, reader):
    if a is not None and b is not None and a.strip() != b.strip():
        reader.fail("conflicting-anchor", "span given twice with different values", el, ConflictingAnchor)
    return a if a is not None else b


def _as_confidence(text: str) -> Optional[float]:
    try:
        value = float(text)
    except ValueError:
        return None
    return value if 0.0 <= value <= 1.0 else None


def doc_id_from_name(name: Optional[str]) -> str:
    if not name:
        return "doc"
    base = Path(name).name
    for suffix in (SUFFIX, ".xml", ".gmt"):
        if base.endswith(suffix) and len(base) > len(suffix):
            return base[: -len(suffix)]
    return base


def parse(
    data: Union[bytes, str],
    dialect: GmtDialect = LENIENT,
    *,
    name: Optional[str] = None,
    diagnostics: Optional[list[Diagnostic]] = None,
) -> AnnotationDocument:
    """Parse GMT markup.  Warnings are appended to ``diagnostics``."""
    local: list[Diagnostic] = []
    if dialect.strict:
        tree = _build_tree(data)
    else:
        text = _decode(data) if isinstance(data, bytes) else data
        fixed = _repair(text, local)
        tree = _build_tree(fixed if fixed is not None else data)
    if tree.tag != "struct":
        raise ParseError(f"root element is <{tree.tag}>, expected <struct>", line=tree.line, col=tree.col)
    reader = _Reader(dialect, local)
    try:
        root, meta = reader.struct(tree, root=True)
    except InvalidArgument as exc:
        raise ParseError(str(exc), line=tree.line, col=tree.col) from None
    if diagnostics is not None:
        diagnostics.extend(d.with_file(name or "-") for d in local)
    return AnnotationDocument(
        meta.get("doc") or doc_id_from_name(name),
        meta.get("level") or root.node_type,
        root,
        meta.get("primary", "").split(),
    )


def parse_file(path, dialect: GmtDialect = LENIENT, diagnostics: Optional[list[Diagnostic]] = None) -> AnnotationDocument:
    path = Path(path)
    return parse(path.read_bytes(), dialect, name=str(path), diagnostics=diagnostics)


# -- model -> markup -----------------------------------------------------------

_TEXT_ENTITIES = {"\r": "&#13;"}
_ATTR_ENTITIES = {'"': "&quot;", "\n": "&#10;", "\r": "&#13;", "\t": "&#9;"}


def _attr(name: str, value: str) -> str:
    return f' {name}="{escape(value, _ATTR_ENTITIES)}"'


def _format_number(value: float) -> str:
    return repr(float(value))


def _feat_inline(f: Feature) -> str:
    inner = escape(f.value, _TEXT_ENTITIES) + "".join(_feat_inline(c) for c in f.children)
    return f'<feat{_attr("type", f.category)}>{inner}</feat>'


def _write_feat(f: Feature, depth: int, out: list[str]) -> None:
    ind = "  " * depth
    if f.children and not f.value:
        out.append(f'{ind}<feat{_attr("type", f.category)}>')
        for c in f.children:
            _write_feat(c, depth + 1, out)
        out.append(f"{ind}</feat>")
    else:
        # a value mixed with nested feats is written without layout whitespace
        out.append(ind + _feat_inline(f))


def _seg_markup(seg, dialect: GmtDialect) -> str:
    if isinstance(seg, Span):
        a, b = SPAN_STYLES[dialect.span_attr_style]
        attrs = _attr(a, str(seg.starts_at)) + _attr(b, str(seg.ends_at))
        if seg.unit != CHAR or dialect.default_unit != CHAR:
            attrs += _attr("unit", seg.unit)
        return f"<seg{attrs}/>"
    refs = [p.render(dialect.pointer_style) for p in seg.pointers]
    key = "target" if len(refs) == 1 else "targets"
    return f'<seg{_attr(key, " ".join(refs))}/>'


def _write_struct(node: StructNode, depth: int, out: list[str], dialect: GmtDialect, extra: str = "") -> None:
    ind = "  " * depth
    head = f'{ind}<struct{_attr("type", node.node_type)}'
    if node.id:
        head += _attr("id", node.id)
    head += extra
    body: list[str] = []
    inner = "  " * (depth + 1)
    for f in node.features:
        _write_feat(f, depth + 1, body)
    if node.seg is not None:
        body.append(inner + _seg_markup(node.seg, dialect))
    for g in node.alternatives:
        body.append(f"{inner}<alt>")
        for f in g.features:
            _write_feat(f, depth + 2, body)
        if g.confidence is not None:
            body.append(f'{inner}  <feat type="confidence">{_format_number(g.confidence)}</feat>')
        for c in g.children:
            _write_struct(c, depth + 2, body, dialect)
        body.append(f"{inner}</alt>")
    for r in node.relations:
        attrs = _attr("type", r.rel_type)
        if r.source is not None:
            attrs += _attr("source", r.source.render(dialect.pointer_style))
        attrs += _attr("targets", " ".join(p.render(dialect.pointer_style) for p in r.targets))
        if not r.directed:
            attrs += _attr("directed", "false")
        body.append(f"{inner}<rel{attrs}/>")
    for c in node.children:
        _write_struct(c, depth + 1, body, dialect)
    if body:
        out.append(head + ">")
        out.extend(body)
        out.append(f"{ind}</struct>")
    else:
        out.append(head + "/>")


def serialize(doc: AnnotationDocument, dialect: GmtDialect = LENIENT) -> bytes:
    errors = [d for d in check_document(doc) if d.is_error]
    if errors:
        raise SerializationRefused("; ".join(d.message for d in errors))
    extra = _attr("doc", doc.doc_id)
    if doc.level != doc.root.node_type:
        extra += _attr("level", doc.level)
    if doc.primary_refs:
        extra += _attr("primary", " ".join(doc.primary_refs))
    out = ['<?xml version="1.0" encoding="UTF-8"?>']
    _write_struct(doc.root, 0, out, dialect, extra)
    return ("\n".join(out) + "\n").encode("utf-8")


def write_file(doc: AnnotationDocument, path, dialect: GmtDialect = LENIENT) -> None:
    Path(path).write_bytes(serialize(doc, dialect))


# -- canonical form -------------------------------------------------------------

def _feature_key(f: Feature):
    return (f.category, f.value, tuple(_feature_key(c) for c in f.children))


def _canon_features(feats: list[Feature]) -> list[Feature]:
    out = []
    for f in feats:
        value = f.value.strip()
        if not value and not f.children:
            value = f.value  # trimming must not destroy a whitespace-only leaf
        out.append(Feature(f.category, value, _canon_features(f.children), pos=f.pos))
    return sorted(out, key=_feature_key)


def _canon_pointer(p: Pointer) -> Pointer:
    return Pointer(p.fragment, p.doc_ref, True)


def _canon_node(node: StructNode) -> StructNode:
    seg = node.seg
    if isinstance(seg, TargetList):
        seg = TargetList(tuple(_canon_pointer(p) for p in seg.pointers))
    return StructNode(
        node.node_type,
        id=node.id,
        features=_canon_features(node.features),
        alternatives=[
            AltGroup(_canon_features(g.features), [_canon_node(c) for c in g.children], g.confidence)
            for g in node.alternatives
        ],
        relations=[
            replace(
                r,
                targets=[_canon_pointer(p) for p in r.targets],
                source=_canon_pointer(r.source) if r.source else None,
            )
            for r in node.relations
        ],
        seg=seg,
        children=[_canon_node(c) for c in node.children],
        pos=node.pos,
    )


def canonicalize(doc: AnnotationDocument) -> AnnotationDocument:
    """Sorted features, trimmed values, hash-prefixed pointers.  Idempotent."""
    return AnnotationDocument(doc.doc_id, doc.level, _canon_node(doc.root), list(doc.primary_refs))


def canonical_bytes(doc: AnnotationDocument) -> bytes:
    return serialize(canonicalize(doc), CANONICAL)


def structurally_equal(a: AnnotationDocument, b: AnnotationDocument) -> bool:
    return a == b


def without_confidence(node: StructNode) -> StructNode:
    """Copy of ``node`` with every alternative confidence removed."""
    node = copy.deepcopy(node)
    for n in node.walk():
        for g in n.alternatives:
            g.confidence = None
    return node


__all__ = [
    "CANONICAL",
    "LENIENT",
    "STRICT",
    "SUFFIX",
    "GmtDialect",
    "canonical_bytes",
    "canonicalize",
    "doc_id_from_name",
    "parse",
    "parse_file",
    "serialize",
    "structurally_equal",
    "without_confidence",
    "write_file",
]
