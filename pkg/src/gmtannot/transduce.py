"""Conversion between tab-separated tagger output and GMT documents.

Tabular lines hold ``token [TAB lemma [TAB pos [TAB k=v;k=v]]]``; a blank
line ends a sentence.  Import never tokenizes: the given tokens are
aligned left to right against the primary text by exact matching.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional, Sequence, Union

from .anchoring import Extent, LayerSet, NodeRef, PrimaryDoc, project_to_primary
from .errors import AlignmentError, AmbiguityError, FormatError, InvalidArgument, UnresolvedReference
from .model import AltGroup, AnnotationDocument, Feature, Pointer, StructNode, TargetList

MSANNOT = "MSAnnot"
W_LEVEL = "W-level"
POLICIES = ("leaves", "parent")
HIGHEST_CONFIDENCE = "highest-confidence"
JOIN = "+"


@dataclass(frozen=True)
class TabularRecord:
    token: str
    lemma: Optional[str] = None
    pos: Optional[str] = None
    morph: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if not self.token:
            raise InvalidArgument("record token is empty")
        object.__setattr__(self, "morph", tuple(tuple(p) for p in self.morph))

    @classmethod
    def from_line(cls, line: str, index: int = 0) -> TabularRecord:
        fields = line.rstrip("\r\n").split("\t")
        if len(fields) > 4:
            raise FormatError(f"record {index}: {len(fields)} fields, at most 4 allowed")
        fields += [""] * (4 - len(fields))
        token, lemma, pos, morph = fields
        if not token:
            raise FormatError(f"record {index}: empty token")
        pairs = []
        for item in morph.split(";") if morph else []:
            key, sep, value = item.partition("=")
            if not sep or not key.strip() or not value:
                raise FormatError(f"record {index}: malformed morph field {morph!r}")
            pairs.append((key.strip(), value))
        return cls(token, lemma or None, pos or None, tuple(pairs))

    def to_line(self) -> str:
        for text in (self.token, self.lemma or "", self.pos or "", *(k + v for k, v in self.morph)):
            if "\t" in text or "\n" in text:
                raise FormatError(f"tab or newline inside a field of {self.token!r}")
        for k, v in self.morph:
            if ";" in k + v or "=" in k:
                raise FormatError(f"morph pair {k}={v} cannot be written")
        morph = ";".join(f"{k}={v}" for k, v in self.morph)
        return "\t".join([self.token, self.lemma or "", self.pos or "", morph]).rstrip("\t")


def read_tabular(lines: Iterable[str]) -> list[list[TabularRecord]]:
    """Split lines into sentences of records."""
    sentences: list[list[TabularRecord]] = [[]]
    index = 0
    for line in lines:
        if not line.strip():
            if sentences[-1]:
                sentences.append([])
            continue
        index += 1
        sentences[-1].append(TabularRecord.from_line(line, index))
    if not sentences[-1] and len(sentences) > 1:
        sentences.pop()
    return sentences


def format_tabular(sentences: Sequence[Sequence[TabularRecord]]) -> str:
    return "\n".join("".join(r.to_line() + "\n" for r in s) for s in sentences)


def _w_node(record: TabularRecord, mark: str) -> StructNode:
    node = StructNode(W_LEVEL)
    if record.lemma is not None:
        node.features.append(Feature("lemma", record.lemma))
    if record.pos is not None:
        node.features.append(Feature("pos", record.pos))
    for key, value in record.morph:
        node.features.append(Feature(key, value))
    node.seg = TargetList((Pointer(mark, None, True),))
    return node


def import_tabular(
    lines: Iterable[Union[str, TabularRecord]],
    text: Optional[str] = None,
    *,
    doc_id: str = "msa",
    primary_id: str = "text",
) -> LayerSet:
    """Primary text with marks w1..wN plus one MSAnnot document per sentence."""
    items = list(lines)
    if items and all(isinstance(x, TabularRecord) for x in items):
        sentences = [items]
    else:
        sentences = read_tabular(x.to_line() if isinstance(x, TabularRecord) else x for x in items)
    records = [r for s in sentences for r in s]
    if text is None:
        text = " ".join(r.token for r in records)

    marks: dict[str, tuple[int, int]] = {}
    cursor = 0
    for i, r in enumerate(records, 1):
        start = text.find(r.token, cursor)
        if start < 0:
            raise AlignmentError(i, f"record {i} ({r.token!r}) not found after offset {cursor}")
        cursor = start + len(r.token)
        marks[f"w{i}"] = (start, cursor)

    layers = LayerSet()
    layers.add_primary(PrimaryDoc.from_text(primary_id, text, marks))
    k = 0
    for n, sentence in enumerate(sentences, 1):
        root = StructNode(MSANNOT)
        for r in sentence:
            k += 1
            root.children.append(_w_node(r, f"w{k}"))
        name = doc_id if len(sentences) == 1 else f"{doc_id}-{n}"
        layers.add_annotation(AnnotationDocument(name, MSANNOT, root, [primary_id]))
    return layers


# -- export ---------------------------------------------------------------------

def argmax_confidence(confidences: Sequence[float]) -> int:
    """Index of the highest confidence; the earliest wins ties."""
    if not confidences:
        raise InvalidArgument("no confidences")
    best = 0
    for i, c in enumerate(confidences):
        if c > confidences[best]:
            best = i
    return best


def select_alternative(node: StructNode, disambiguate: Optional[str]) -> Optional[AltGroup]:
    if not node.alternatives:
        return None
    if disambiguate != HIGHEST_CONFIDENCE:
        raise AmbiguityError(f"{node.label} has {len(node.alternatives)} alternatives")
    confidences = [g.confidence for g in node.alternatives]
    if any(c is None for c in confidences):
        raise AmbiguityError(f"{node.label}: an alternative lacks a confidence")
    return node.alternatives[argmax_confidence(confidences)]


class _Exporter:
    def __init__(self, layers: LayerSet, doc: AnnotationDocument, flatten: str, disambiguate: Optional[str]):
        if flatten not in POLICIES:
            raise InvalidArgument(f"unknown compound policy {flatten!r}")
        self.layers = layers
        self.doc = doc
        self.flatten = flatten
        self.disambiguate = disambiguate
        self.rows: list[tuple[Extent, int, TabularRecord]] = []

    def effective(self, node):
        group = select_alternative(node, self.disambiguate)
        if group is None:
            return node.features, node.children
        return node.features + group.features, node.children + group.children

    def project(self, node) -> tuple[Extent, ...]:
        return tuple(project_to_primary(NodeRef(self.doc, node), self.layers))

    def surface(self, extents) -> str:
        texts = [self.layers.primary_docs[e.doc_id].text_of(e) for e in extents]
        return " ".join(texts)

    def add(self, extents, record):
        self.rows.append((extents[0], len(self.rows), record))

    def emit(self, node: StructNode, inherited=None):
        feats, children = self.effective(node)
        if children:
            if node.seg is not None:
                own = self.project(node)
                parts = [self.project(c) for c in children]
                if own and all(not p or p == own for p in parts):
                    self.fused(node, feats, children, own)
                    return
            lemma, pos, _ = _split(feats)
            if self.flatten == "parent" and lemma is not None:
                inherited = (lemma, pos)
            for c in children:
                self.emit(c, inherited)
            return
        if node.seg is None:
            if feats:
                raise UnresolvedReference(node.label, f"{node.label} carries features but no anchor")
            return
        extents = self.project(node)
        if not extents:
            raise UnresolvedReference(node.label, f"{node.label} has no primary extent")
        lemma, pos, morph = _split(feats)
        if inherited is not None:
            lemma = inherited[0]
            pos = inherited[1] if inherited[1] is not None else pos
        self.add(extents, TabularRecord(self.surface(extents), lemma, pos, morph))

    def fused(self, node, feats, children, extents):
        lemmas, tags = [], []
        _, _, morph = _split(feats)
        for c in children:
            c_feats, _ = self.effective(c)
            lemma, pos, c_morph = _split(c_feats)
            lemmas.append(lemma or "")
            tags.append(pos or "")
            morph += c_morph
        lemma = JOIN.join(lemmas) if any(lemmas) else None
        pos = JOIN.join(tags) if any(tags) else None
        self.add(extents, TabularRecord(self.surface(extents), lemma, pos, morph))


def _split(feats: Sequence[Feature]):
    lemma = pos = None
    morph: tuple[tuple[str, str], ...] = ()
    for f in feats:
        value = f.value.strip()
        if f.category == "lemma" and lemma is None:
            lemma = value
        elif f.category == "pos" and pos is None:
            pos = value
        elif value:
            morph += ((f.category, value),)
    return lemma, pos, morph


def export_tabular(
    layers: LayerSet,
    doc: Union[str, AnnotationDocument],
    flatten: str = "leaves",
    disambiguate: Optional[str] = None,
) -> list[TabularRecord]:
    """One record per surface token, in primary order.

    ``flatten`` decides what compounds emit on their tokens: ``leaves``
    keeps each token's own lemma, ``parent`` repeats the compound's lemma.
    Fused tokens emit one record with child lemmas and tags joined by "+".
    """
    if isinstance(doc, str):
        doc = layers.annotation_docs[doc]
    exporter = _Exporter(layers, doc, flatten, disambiguate)
    exporter.emit(doc.root)
    exporter.rows.sort(key=lambda row: (row[0].doc_id, row[0].starts_at, row[1]))
    return [record for _, _, record in exporter.rows]


def format_marks(primary: PrimaryDoc) -> str:
    return "".join(f"{name}\t{start}\t{end}\n" for name, (start, end) in primary.marks.items())


def parse_marks(text: str) -> dict[str, tuple[int, int]]:
    marks = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(f"mark table line {lineno}: expected id<TAB>start<TAB>end", line=lineno)
        try:
            marks[parts[0]] = (int(parts[1]), int(parts[2]))
        except ValueError:
            raise FormatError(f"mark table line {lineno}: offsets must be integers", line=lineno) from None
    return marks
