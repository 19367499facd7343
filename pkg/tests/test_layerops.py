import copy

import pytest

from conftest import layers_for, load_listing
from gmtannot import gmt, layerops
from gmtannot.anchoring import LayerSet, NodeRef, PrimaryDoc
from gmtannot.errors import IncompatibleLayers, InvalidArgument, NotTextual
from gmtannot.model import AnnotationDocument, Feature, StructNode, TargetList


def _reading(listing, k, doc_id):
    root = copy.deepcopy(listing.root)
    root.features = root.alternatives[k].features
    root.alternatives = []
    return AnnotationDocument(doc_id, listing.level, root)


@pytest.fixture
def bouche():
    listing = load_listing("bouche_alternatives")
    layers = layers_for("bouche_alternatives")
    a = layers.add_annotation(_reading(listing, 0, "a"))
    b = layers.add_annotation(_reading(listing, 1, "b"))
    return listing, layers, a, b


def test_merge_as_alternatives_rebuilds_listing(bouche):
    listing, layers, a, b = bouche
    merged = layerops.merge(a, b, layers, "as-alternatives")
    assert merged.root == gmt.without_confidence(listing.root)


def test_merge_policies(bouche):
    _, layers, a, b = bouche
    union = layerops.merge(a, b, layers, "union").root
    assert [f.category for f in union.features] == ["lemma", "pos", "tense", "lemma", "pos"]
    prefer = layerops.merge(a, b, layers, "prefer-a").root
    assert prefer.features == a.root.features
    with pytest.raises(InvalidArgument):
        layerops.merge(a, b, layers, "vote")


def test_merge_with_itself_is_identity(paul_layers, paul):
    for policy in layerops.POLICIES:
        assert layerops.merge(paul, paul, paul_layers, policy).root == paul.root


def test_merge_inserts_unmatched_nodes_in_text_order(paul_layers, paul):
    partial = copy.deepcopy(paul)
    del partial.root.children[1:3]
    other = copy.deepcopy(paul)
    del other.root.children[0]
    other.doc_id = "other"
    merged = layerops.merge(partial, other, paul_layers)
    assert [c.alias for c in merged.root.children] == ["w1", "w2", "w3", "w4"]


def test_merge_renames_clashing_ids(paul_layers):
    a = AnnotationDocument("a", "r", StructNode("r", children=[StructNode("W", id="x", seg=TargetList.of("#w1"))]))
    b = AnnotationDocument("b", "r", StructNode("r", children=[StructNode("W", id="x", seg=TargetList.of("#w2"))]))
    merged = layerops.merge(a, b, paul_layers)
    assert [c.id for c in merged.root.children] == ["x", "b.n0"]


def test_incompatible_layers():
    layers = LayerSet()
    layers.add_primary(PrimaryDoc.from_text("t1", "ab", {"w1": (0, 1)}))
    layers.add_primary(PrimaryDoc.from_text("t2", "cd", {"w1": (0, 1)}))
    a = AnnotationDocument("a", "W", StructNode("W", seg=TargetList.of("t1#w1")))
    b = AnnotationDocument("b", "W", StructNode("W", seg=TargetList.of("t2#w1")))
    with pytest.raises(IncompatibleLayers):
        layerops.merge(a, b, layers)
    with pytest.raises(IncompatibleLayers):
        layerops.diff(a, b, layers)


def test_diff_identical(paul_layers, paul):
    report = layerops.diff(paul, paul, paul_layers)
    assert report.conflict_count == 0 and report.agreement == 1.0 and report.matches == 5


def test_diff_two_readings(bouche):
    _, layers, a, b = bouche
    report = layerops.diff(a, b, layers)
    assert report.matches == 1
    assert [c.category for _, _, cs in report.conflicts for c in cs] == ["lemma", "pos", "tense"]
    assert report.agreement == 0.0
    lines = report.to_lines()
    assert lines[0].startswith("# matches=1")
    assert lines[-1] == "conflict\ta\tb\ttense\tpresent\t"


def test_diff_against_empty(paul_layers, paul):
    empty = AnnotationDocument("e", "MSAnnot", StructNode("MSAnnot"))
    report = layerops.diff(paul, empty, paul_layers)
    assert len(report.only_in_a) == len(paul.iterate())
    assert report.only_in_b == [] and report.matches == 0


def test_diff_alternatives_are_unordered():
    listing = load_listing("bouche_alternatives")
    layers = layers_for("bouche_alternatives")
    swapped = copy.deepcopy(listing)
    swapped.doc_id = "swapped"
    swapped.root.alternatives.reverse()
    assert layerops.diff(listing, swapped, layers).conflict_count == 0
    strict = layerops.diff(listing, swapped, layers, strict=True)
    assert [c.category for _, _, cs in strict.conflicts for c in cs] == ["(alternatives)"]


def test_covered_text(queue, paul_layers, paul):
    assert layerops.covered_text(queue.find("queue_du_chat_syntax"), queue) == "le chat"
    assert layerops.covered_text(NodeRef(paul, paul.root.children[0]), paul_layers) == "Paul"
    assert layerops.covered_text(NodeRef(paul, paul.root), paul_layers) == "Paul aime les croissants"
    bare = AnnotationDocument("b", "x", StructNode("x"))
    assert layerops.covered_text(NodeRef(bare, bare.root), paul_layers) == ""


def test_covered_text_of_fused_token(queue):
    assert layerops.covered_text(queue.find("w3"), queue) == "du"
    assert layerops.covered_text(queue.find("w3.1"), queue) == "de"


def test_covered_text_needs_text():
    layers = layers_for("phonetic")
    doc = next(iter(layers.annotation_docs.values()))
    with pytest.raises(NotTextual):
        layerops.covered_text(NodeRef(doc, doc.root), layers)


def test_merged_features_deduplicated(paul_layers, paul):
    other = copy.deepcopy(paul)
    other.doc_id = "other"
    other.root.children[0].features.append(Feature("gender", "mas"))
    merged = layerops.merge(paul, other, paul_layers)
    assert [f.category for f in merged.root.children[0].features] == ["lemma", "pos", "gender"]
