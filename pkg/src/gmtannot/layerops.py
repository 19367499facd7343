"""Merging, diffing and surface-text queries across annotation layers.

Two nodes from different layers are parallel when they project onto the
same set of primary extents.  Merge and diff pair nodes on that key; nodes
sharing a key are paired in document order.  The roots of the two inputs
are always merged with each other, being the containers of each layer.
"""

from __future__ import annotations

import copy
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .anchoring import Extent, LayerSet, NodeRef, project_to_primary, resolve
from .errors import IncompatibleLayers, InvalidArgument, NotTextual
from .model import CHAR, AltGroup, AnnotationDocument, Feature, StructNode

UNION, PREFER_A, AS_ALTERNATIVES = "union", "prefer-a", "as-alternatives"
POLICIES = (UNION, PREFER_A, AS_ALTERNATIVES)


def _key(doc, node, layers) -> tuple[Extent, ...]:
    return tuple(project_to_primary(NodeRef(doc, node), layers))


def _primaries(doc, layers) -> set[str]:
    return {e.doc_id for e in _key(doc, doc.root, layers)}


def _check_compatible(a, b, layers):
    pa, pb = _primaries(a, layers), _primaries(b, layers)
    if pa and pb and pa != pb:
        raise IncompatibleLayers(f"{a.doc_id!r} anchors into {sorted(pa)}, {b.doc_id!r} into {sorted(pb)}")


# -- merge ------------------------------------------------------------------------

def _dedupe(items):
    out = []
    for x in items:
        if x not in out:
            out.append(x)
    return out


def _combine(na: StructNode, nb: StructNode, policy: str) -> StructNode:
    node = copy.deepcopy(na)
    fb = copy.deepcopy(nb.features)
    if policy == UNION:
        node.features = _dedupe(node.features + fb)
    elif policy == PREFER_A:
        have = {f.category for f in node.features}
        node.features += [f for f in fb if f.category not in have]
    elif not _same_features(node.features, fb):
        shared = [f for f in node.features if f in fb]
        only_a = [f for f in node.features if f not in shared]
        only_b = [f for f in fb if f not in shared]
        node.features = shared
        groups = []
        if only_a:
            groups.append(AltGroup(only_a))
        if only_b:
            groups.append(AltGroup(only_b))
        node.alternatives = groups + node.alternatives
    node.alternatives = _dedupe(node.alternatives + copy.deepcopy(nb.alternatives))
    node.relations = _dedupe(node.relations + copy.deepcopy(nb.relations))
    if node.seg is None:
        node.seg = copy.deepcopy(nb.seg)
    return node


def _same_features(fa: list[Feature], fb: list[Feature]) -> bool:
    return sorted(map(repr, fa)) == sorted(map(repr, fb))


def _pair(a_nodes, b_nodes, a_keys, b_keys):
    """Pairs (i, j) of positions with equal keys, matched in order."""
    pending = defaultdict(list)
    for j, k in enumerate(b_keys):
        pending[k].append(j)
    pairs = {}
    for i, k in enumerate(a_keys):
        if pending[k]:
            pairs[i] = pending[k].pop(0)
    return pairs


class _Merger:
    def __init__(self, a, b, layers, policy):
        self.a, self.b, self.layers, self.policy = a, b, layers, policy
        self.taken = set(a.node_ids())

    def nodes(self, na: StructNode, nb: StructNode) -> StructNode:
        node = _combine(na, nb, self.policy)
        node.children = self.lists(na.children, nb.children)
        return node

    def lists(self, a_nodes, b_nodes):
        if a_nodes == b_nodes:
            return copy.deepcopy(a_nodes)
        a_keys = [_key(self.a, n, self.layers) for n in a_nodes]
        b_keys = [_key(self.b, n, self.layers) for n in b_nodes]
        pairs = _pair(a_nodes, b_nodes, a_keys, b_keys)
        out = []
        for i, n in enumerate(a_nodes):
            out.append((a_keys[i], self.nodes(n, b_nodes[pairs[i]]) if i in pairs else copy.deepcopy(n)))
        used = set(pairs.values())
        for j, n in enumerate(b_nodes):
            if j in used:
                continue
            extra = self.fresh(copy.deepcopy(n))
            pos = len(out)
            if b_keys[j]:
                for k, (key, _) in enumerate(out):
                    if key and key[0] > b_keys[j][0]:
                        pos = k
                        break
            out.insert(pos, (b_keys[j], extra))
        return [n for _, n in out]

    def fresh(self, node: StructNode) -> StructNode:
        """Rename ids of an imported subtree that clash with the a-side."""
        k = 0
        for n in node.walk():
            if n.id and n.id in self.taken:
                while f"{self.b.doc_id}.n{k}" in self.taken:
                    k += 1
                n.id = f"{self.b.doc_id}.n{k}"
            if n.id:
                self.taken.add(n.id)
        return node


def merge(a: AnnotationDocument, b: AnnotationDocument, layers: LayerSet, policy: str = UNION) -> AnnotationDocument:
    if policy not in POLICIES:
        raise InvalidArgument(f"unknown merge policy {policy!r}")
    _check_compatible(a, b, layers)
    root = _Merger(a, b, layers, policy).nodes(a.root, b.root)
    refs = _dedupe(list(a.primary_refs) + list(b.primary_refs))
    return AnnotationDocument(a.doc_id, a.level, root, refs)


# -- diff -------------------------------------------------------------------------

@dataclass
class Conflict:
    node_a: str
    node_b: str
    category: str
    value_a: str
    value_b: str


@dataclass
class DiffReport:
    only_in_a: list[str] = field(default_factory=list)
    only_in_b: list[str] = field(default_factory=list)
    equal: list[tuple[str, str]] = field(default_factory=list)
    conflicts: list[tuple[str, str, list[Conflict]]] = field(default_factory=list)

    @property
    def matches(self) -> int:
        return len(self.equal) + len(self.conflicts)

    @property
    def conflict_count(self) -> int:
        return sum(len(c) for _, _, c in self.conflicts)

    @property
    def agreement(self) -> float:
        return len(self.equal) / self.matches if self.matches else 1.0

    def to_lines(self) -> list[str]:
        lines = [
            f"# matches={self.matches}\tequal={len(self.equal)}\tconflicting={len(self.conflicts)}"
            f"\tconflicts={self.conflict_count}\tonly-a={len(self.only_in_a)}\tonly-b={len(self.only_in_b)}"
            f"\tagreement={self.agreement:.6f}"
        ]
        for n in self.only_in_a:
            lines.append(f"only-a\t{n}\t\t\t\t")
        for n in self.only_in_b:
            lines.append(f"only-b\t\t{n}\t\t\t")
        for na, nb in self.equal:
            lines.append(f"equal\t{na}\t{nb}\t\t\t")
        for _, _, cs in self.conflicts:
            for c in cs:
                lines.append(f"conflict\t{c.node_a}\t{c.node_b}\t{c.category}\t{_flat(c.value_a)}\t{_flat(c.value_b)}")
        return lines

    def format(self) -> str:
        return "\n".join(self.to_lines()) + "\n"


def _flat(text: str) -> str:
    return " ".join(text.split())


def _informative(node: StructNode, key) -> bool:
    return bool(key or node.features or node.alternatives or node.relations)


def _labels(doc: AnnotationDocument) -> dict[int, str]:
    """Stable node labels: id if present, else a child-index path."""
    out = {}

    def visit(node, path):
        out[id(node)] = node.id or path
        for i, c in enumerate(node.nested(), 1):
            visit(c, f"{path}/{i}")

    visit(doc.root, doc.doc_id)
    return out


def _feature_table(feats) -> dict[str, list[str]]:
    table = defaultdict(list)
    for f in feats:
        table[f.category].append(f.value.strip() if not f.children else repr(f))
    return {k: sorted(v) for k, v in table.items()}


def _alt_signature(node: StructNode, strict: bool):
    if strict:
        return [(sorted(map(repr, g.features)), g.confidence, repr(g.children)) for g in node.alternatives]
    return sorted({(tuple(sorted(map(repr, g.features))), repr(g.children)) for g in node.alternatives})


def _compare(na, nb, la, lb, strict) -> list[Conflict]:
    ta, tb = _feature_table(na.features), _feature_table(nb.features)
    out = []
    for cat in list(ta) + [c for c in tb if c not in ta]:
        va, vb = ta.get(cat, []), tb.get(cat, [])
        if va != vb:
            out.append(Conflict(la, lb, cat, "|".join(va), "|".join(vb)))
    if _alt_signature(na, strict) != _alt_signature(nb, strict):
        out.append(Conflict(la, lb, "(alternatives)", str(len(na.alternatives)), str(len(nb.alternatives))))
    return out


def diff(a: AnnotationDocument, b: AnnotationDocument, layers: LayerSet, *, strict: bool = False) -> DiffReport:
    _check_compatible(a, b, layers)
    a_nodes = [n for n in a.root.walk()]
    b_nodes = [n for n in b.root.walk()]
    a_keys = [_key(a, n, layers) for n in a_nodes]
    b_keys = [_key(b, n, layers) for n in b_nodes]
    a_idx = [i for i, n in enumerate(a_nodes) if _informative(n, a_keys[i])]
    b_idx = [j for j, n in enumerate(b_nodes) if _informative(n, b_keys[j])]
    pairs = _pair([a_nodes[i] for i in a_idx], [b_nodes[j] for j in b_idx], [a_keys[i] for i in a_idx], [b_keys[j] for j in b_idx])
    la, lb = _labels(a), _labels(b)
    report = DiffReport()
    matched_b = set()
    for pi, i in enumerate(a_idx):
        na = a_nodes[i]
        if pi not in pairs:
            report.only_in_a.append(la[id(na)])
            continue
        j = b_idx[pairs[pi]]
        matched_b.add(j)
        nb = b_nodes[j]
        conflicts = _compare(na, nb, la[id(na)], lb[id(nb)], strict)
        if conflicts:
            report.conflicts.append((la[id(na)], lb[id(nb)], conflicts))
        else:
            report.equal.append((la[id(na)], lb[id(nb)]))
    report.only_in_b = [lb[id(b_nodes[j])] for j in b_idx if j not in matched_b]
    return report


# -- surface text -----------------------------------------------------------------

@dataclass
class CoveredText:
    text: str
    extents: list[Extent]
    # nodes rendered by their lemma because they own no separate stretch of text
    lemma_fallbacks: list[str] = field(default_factory=list)


class _Surface:
    def __init__(self, layers: LayerSet):
        self.layers = layers
        self.parents: dict[int, dict[int, StructNode]] = {}
        self.pieces: list[tuple[tuple, int, str, Optional[Extent]]] = []
        self.fallbacks: list[str] = []

    def parent(self, ref: NodeRef) -> Optional[StructNode]:
        table = self.parents.get(id(ref.doc))
        if table is None:
            table = self.parents[id(ref.doc)] = ref.doc.parent_map()
        return table.get(id(ref.node))

    def fused_part(self, ref: NodeRef, extents) -> Optional[list[Extent]]:
        """The parent's extents when ``ref`` is one of several parts of a single token."""
        parent = self.parent(ref)
        if parent is None or len(list(parent.nested())) < 2:
            return None
        outer = project_to_primary(NodeRef(ref.doc, parent), self.layers)
        if outer and (not extents or extents == outer):
            return outer
        return None

    def add(self, extent: Extent, text: str):
        self.pieces.append(((extent.doc_id, extent.starts_at, extent.ends_at), len(self.pieces), text, extent))

    def visit(self, ref: NodeRef):
        node = ref.node
        extents = project_to_primary(ref, self.layers)
        lemma = node.get("lemma")
        outer = self.fused_part(ref, extents)
        if outer is not None and lemma:
            self.fallbacks.append(f"{ref.doc.doc_id}:{node.label}")
            self.pieces.append(((outer[0].doc_id, outer[0].starts_at, outer[0].ends_at), len(self.pieces), lemma.strip(), None))
            return
        if node.seg is not None:
            for anchor in resolve(node.seg, ref.doc, self.layers, carrier=node):
                if isinstance(anchor, Extent):
                    self.extent(anchor)
                else:
                    self.visit(anchor)
        else:
            for child in node.nested():
                self.visit(NodeRef(ref.doc, child))

    def extent(self, e: Extent):
        if e.unit != CHAR:
            raise NotTextual(f"extent {e.starts_at}..{e.ends_at} is measured in {e.unit} units")
        self.add(e, self.layers.primary_docs[e.doc_id].text_of(e))

    def render(self) -> str:
        pieces = sorted(self.pieces)
        out = []
        prev_end = prev_doc = None
        seen = set()
        for key, _, text, extent in pieces:
            if extent is not None:
                if key in seen:
                    continue
                seen.add(key)
            if out:
                contiguous = extent is not None and prev_end is not None and key[1] == prev_end and key[0] == prev_doc
                out.append(text if contiguous else " " + text)
            else:
                out.append(text)
            prev_end = key[2] if extent is not None else None
            prev_doc = key[0]
        return "".join(out)


def covered(ref: NodeRef, layers: LayerSet) -> CoveredText:
    s = _Surface(layers)
    s.visit(ref)
    return CoveredText(s.render(), project_to_primary(ref, layers), s.fallbacks)


def covered_text(ref: NodeRef, layers: LayerSet) -> str:
    """Primary text under ``ref``; gaps between extents become one space."""
    return covered(ref, layers).text
