import pytest

from conftest import dialect_for, listing_bytes, load_listing
from gmtannot import gmt
from gmtannot.errors import ConflictingAnchor, ParseError, SerializationRefused, UnknownElement
from gmtannot.model import CHAR, TIME, AnnotationDocument, Feature, Pointer, Span, StructNode, TargetList, make_landmark, new_document


def test_paul_listing_contents(paul):
    assert paul.root.node_type == "MSAnnot"
    assert [[(f.category, f.value) for f in w.features] for w in paul.root.children] == [
        [("lemma", "Paul"), ("pos", "PNOUN")],
        [("lemma", "aimer"), ("pos", "VERB"), ("tense", "present"), ("person", "3")],
        [("lemma", "le"), ("pos", "DET"), ("number", "plural")],
        [("lemma", "croissant"), ("pos", "NOUN"), ("number", "plural")],
    ]
    assert [w.seg for w in paul.root.children] == [TargetList.of(f"#w{i}") for i in range(1, 5)]


def test_bouche_listing_lifts_confidences():
    root = load_listing("bouche_alternatives").root
    assert root.seg == TargetList.of("#w1")
    assert [g.confidence for g in root.alternatives] == [0.4, 0.6]
    assert all(f.category != "confidence" for g in root.alternatives for f in g.features)


def test_phonetic_inline():
    text = '<struct type="phonetic"><seg startsAt="2300" endsAt="3200"/><feat type="phone">iy</feat></struct>'
    root = gmt.parse(text).root
    assert root.seg == Span(2300, 3200, CHAR)
    assert root.features == [Feature("phone", "iy")]
    timed = gmt.parse(text, gmt.GmtDialect(default_unit=TIME)).root
    assert timed.seg == Span(2300, 3200, TIME)


def test_alternate_span_attribute_names():
    doc = gmt.parse('<struct type="p"><seg startPosition="1" endPosition="4" unit="time"/></struct>')
    assert doc.root.seg == Span(1, 4, TIME)
    out = gmt.serialize(doc, gmt.GmtDialect(span_attr_style="startPosition-endPosition"))
    assert b'startPosition="1"' in out and gmt.parse(out) == doc


def test_every_listing_round_trips(listing_name):
    doc = load_listing(listing_name)
    dialect = dialect_for(listing_name)
    assert gmt.parse(gmt.serialize(doc, dialect), dialect) == doc


def test_morpho_listing_repairs_are_reported():
    notes = []
    doc = gmt.parse(listing_bytes("queue_du_chat_morpho"), diagnostics=notes, name="m.gmt.xml")
    codes = [d.code for d in notes]
    assert codes.count("unclosed-seg") == 4
    assert "stray-end-tag" in codes and "multiple-roots" in codes
    assert all(d.severity == "warning" and d.file == "m.gmt.xml" for d in notes)
    assert doc.root.node_type == gmt.WRAPPER_TYPE and len(doc.root.children) == 2
    assert doc.doc_id == "m"


def test_strict_mode_rejects_repairs():
    with pytest.raises(ParseError) as exc:
        gmt.parse(listing_bytes("queue_du_chat_morpho"), gmt.STRICT)
    assert (exc.value.line, exc.value.col) == (8, 9)
    with pytest.raises(ParseError):
        gmt.parse(listing_bytes("queue_du_chat_syntax"), gmt.STRICT)


def test_missing_type_is_lenient_warning():
    notes = []
    doc = gmt.parse(listing_bytes("queue_du_chat_syntax"), diagnostics=notes)
    assert [d.code for d in notes] == ["missing-type"]
    assert doc.root.node_type == "unknown"
    assert doc.root.seg == TargetList((Pointer("w3.2", None, False), Pointer("w4", None, False)))


def test_malformed_markup_positions():
    with pytest.raises(ParseError) as exc:
        gmt.parse(b'<struct type="a">\n  <feat type="x">v</feat\n</struct>', gmt.STRICT)
    assert exc.value.line == 3
    with pytest.raises(ParseError):
        gmt.parse(b"<feat type='x'>v</feat>")


def test_unknown_element():
    text = '<struct type="a"><blob/></struct>'
    with pytest.raises(UnknownElement):
        gmt.parse(text, gmt.STRICT)
    notes = []
    assert gmt.parse(text, diagnostics=notes).root == StructNode("a")
    assert [d.code for d in notes] == ["unknown-element"]


@pytest.mark.parametrize(
    "seg",
    ['<seg target="#w1" startsAt="0" endsAt="1"/>', '<seg target="#w1" targets="w2"/>', '<seg startsAt="0" endsAt="1" startPosition="2" endPosition="1"/>'],
)
def test_conflicting_anchor(seg):
    with pytest.raises(ConflictingAnchor):
        gmt.parse(f'<struct type="a">{seg}</struct>')


def test_root_metadata_round_trips():
    doc = AnnotationDocument("syn", "syntactic", StructNode("NP"), ["text", "morpho"])
    out = gmt.serialize(doc)
    assert b'doc="syn"' in out and b'level="syntactic"' in out and b'primary="text morpho"' in out
    assert gmt.parse(out) == doc


def test_empty_document_serializes_to_one_element():
    out = gmt.serialize(new_document("e", "MSAnnot", "MSAnnot")).decode()
    assert out.splitlines()[1] == '<struct type="MSAnnot" doc="e"/>'


def test_landmark_serialization():
    doc = AnnotationDocument("lm", "landmark", make_landmark(2300, 3200, TIME, "lm1"))
    lines = gmt.serialize(doc).decode().splitlines()
    assert lines[1].startswith('<struct type="landmark" id="lm1"')
    assert lines[2].strip() == '<seg startsAt="2300" endsAt="3200" unit="time"/>'


def test_serialize_refuses_invalid_documents():
    bad = StructNode("landmark", features=[Feature("pos", "N")])
    with pytest.raises(SerializationRefused):
        gmt.serialize(AnnotationDocument("d", "x", bad))


def test_escaping():
    doc = AnnotationDocument("d", "W", StructNode("W", features=[Feature("lemma", 'a<b & "c"')]))
    assert gmt.parse(gmt.serialize(doc)) == doc


def test_pointer_style():
    doc = gmt.parse('<struct type="NP"><seg targets="w3.2 w4"/></struct>')
    assert b'targets="w3.2 w4"' in gmt.serialize(doc)
    assert b'targets="#w3.2 #w4"' in gmt.serialize(doc, gmt.CANONICAL)
    assert b'targets="w3.2 w4"' in gmt.serialize(gmt.canonicalize(doc), gmt.GmtDialect(pointer_style="bare"))


def test_canonical_bytes_ignore_layout_and_feature_order():
    a = listing_bytes("du_fusion")
    b = (
        b"<?xml version='1.0'?>\n<struct type='W-level'><struct type='W-level'><feat type='pos'>PREP</feat>"
        b"<feat type='lemma'>de</feat></struct>\n\n<seg target='#w1'/>"
        b"<struct type='W-level'>  <feat type='lemma'> le </feat><feat type='pos'>DET</feat></struct></struct>"
    )
    assert gmt.canonical_bytes(gmt.parse(a, name="du_fusion.gmt.xml")) == gmt.canonical_bytes(gmt.parse(b, name="du_fusion.gmt.xml"))


def test_canonicalize_trims_and_is_idempotent():
    doc = AnnotationDocument("d", "W", StructNode("W", features=[Feature("lemma", " aimer "), Feature("x", "  ")]))
    canon = gmt.canonicalize(doc)
    assert [f.value for f in canon.root.features] == ["aimer", "  "]
    assert gmt.canonicalize(canon) == canon


def test_nested_features_round_trip():
    feat = Feature("morph", "", [Feature("gender", "mas"), Feature("number", "sg")])
    doc = AnnotationDocument("d", "W", StructNode("W", features=[feat]))
    out = gmt.serialize(doc)
    assert gmt.parse(out) == doc


def test_out_of_range_confidence_stays_a_feature():
    doc = gmt.parse(
        '<struct type="W"><alt><feat type="pos">A</feat><feat type="confidence">1.5</feat></alt>'
        '<alt><feat type="pos">B</feat></alt></struct>'
    )
    g = doc.root.alternatives[0]
    assert g.confidence is None and g.features[-1] == Feature("confidence", "1.5")


def test_without_confidence():
    root = load_listing("bouche_alternatives").root
    stripped = gmt.without_confidence(root)
    assert [g.confidence for g in stripped.alternatives] == [None, None]
    assert [g.confidence for g in root.alternatives] == [0.4, 0.6]


def test_doc_id_from_name():
    assert gmt.doc_id_from_name("dir/x.gmt.xml") == "x"
    assert gmt.doc_id_from_name("x.xml") == "x"
    assert gmt.doc_id_from_name(None) == "doc"


def test_file_helpers(tmp_path, paul):
    path = tmp_path / "p.gmt.xml"
    gmt.write_file(paul, path)
    assert gmt.parse_file(path) == paul


def test_attribute_order_is_irrelevant():
    a = gmt.parse('<struct type="W" id="n1"><seg startsAt="1" endsAt="2"/></struct>')
    b = gmt.parse('<struct id="n1" type="W"><seg endsAt="2" startsAt="1"/></struct>')
    assert gmt.canonical_bytes(a) == gmt.canonical_bytes(b)


def test_encoding_declaration_respected():
    data = '<?xml version="1.0" encoding="ISO-8859-1"?><struct type="W"><feat type="lemma">été</feat></struct>'.encode("latin-1")
    assert gmt.parse(data).root.get("lemma") == "été"
