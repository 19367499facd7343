import subprocess
import sys

import pytest

from conftest import DATA, PAUL_TABULAR, PAUL_TEXT, QUEUE_MARKS, QUEUE_TEXT, load_listing
from gmtannot import gmt
from gmtannot.cli import main
from gmtannot.anchoring import PrimaryDoc
from gmtannot.transduce import format_marks

PAUL_MARKS_TEXT = "w1\t0\t4\nw2\t5\t9\nw3\t10\t13\nw4\t14\t24\n"


def listing(name):
    return str(DATA / f"{name}.gmt.xml")


@pytest.fixture
def paul_text(tmp_path):
    path = tmp_path / "paul.txt"
    path.write_text(PAUL_TEXT, encoding="utf-8")
    (tmp_path / "paul.txt.marks").write_text(PAUL_MARKS_TEXT, encoding="utf-8")
    return str(path)


@pytest.fixture
def queue_text(tmp_path):
    path = tmp_path / "queue.txt"
    path.write_text(QUEUE_TEXT, encoding="utf-8")
    (tmp_path / "queue.txt.marks").write_text(format_marks(PrimaryDoc.from_text("q", QUEUE_TEXT, QUEUE_MARKS)), encoding="utf-8")
    return str(path)


def test_validate_listings(capsys):
    names = ["paul_aime", "bouche_alternatives", "queue_du_chat_morpho", "queue_du_chat_syntax"]
    assert main(["validate", *map(listing, names)]) == 0
    err = capsys.readouterr().err
    assert all(line.startswith("warning:") for line in err.splitlines())


def test_validate_bad_confidence(tmp_path, capsys):
    path = tmp_path / "bad.gmt.xml"
    path.write_text('<struct type="W"><feat type="confidence">1.5</feat></struct>', encoding="utf-8")
    assert main(["validate", str(path)]) == 1
    lines = capsys.readouterr().err.splitlines()
    assert len(lines) == 1
    assert lines[0].startswith(f"error:{path}:1:") and ":numeric-out-of-range:" in lines[0]


def test_validate_missing_file(tmp_path, capsys):
    assert main(["validate", str(tmp_path / "none.gmt.xml")]) == 2
    assert ":io-error:" in capsys.readouterr().err


def test_validate_parse_error(tmp_path, capsys):
    path = tmp_path / "broken.gmt.xml"
    path.write_text('<struct type="W">\n<feat type="x">v</struct>', encoding="utf-8")
    assert main(["validate", "--strict", str(path)]) == 1
    assert f"error:{path}:2:" in capsys.readouterr().err


def test_validate_strict_rejects_repairs(capsys):
    assert main(["validate", "--strict", listing("queue_du_chat_morpho")]) == 1


def test_validate_with_registry(tmp_path, capsys):
    reg = tmp_path / "closed.dcr"
    reg.write_text("pos | closed:VERB\n", encoding="utf-8")
    assert main(["validate", "--registry", str(reg), listing("paul_aime")]) == 1
    err = capsys.readouterr().err
    assert err.count(":closed-value:") == 3 and err.count(":unknown-category:") > 0


def test_validate_anchors_with_primary(tmp_path, queue_text, capsys):
    pair = [listing("queue_du_chat_morpho"), listing("queue_du_chat_syntax")]
    assert main(["validate", "--primary", queue_text, *pair]) == 0
    marks = tmp_path / "queue.txt.marks"
    marks.write_text("".join(l + "\n" for l in marks.read_text().splitlines() if not l.startswith("w4\t")))
    assert main(["validate", "--primary", queue_text, *pair]) == 1
    err = capsys.readouterr().err
    assert err.count(":unresolved-reference:") == 1


def test_resolve_np(queue_text, capsys):
    code = main(
        ["resolve", "--primary", queue_text, "--node", "queue_du_chat_syntax", listing("queue_du_chat_morpho"), listing("queue_du_chat_syntax")]
    )
    assert code == 0
    out = capsys.readouterr().out.splitlines()
    assert "covered\tle chat" in out
    assert "extent\tqueue.txt\t9\t11\tchar" in out and "extent\tqueue.txt\t12\t16\tchar" in out


def test_resolve_unknown_node(queue_text, capsys):
    assert main(["resolve", "--primary", queue_text, "--node", "nope", listing("queue_du_chat_syntax")]) == 1


def test_diff_same_file(paul_text, capsys):
    assert main(["diff", "--primary", paul_text, listing("paul_aime"), listing("paul_aime")]) == 0
    assert "agreement=1.000000" in capsys.readouterr().out


def test_merge_bouche_readings(tmp_path, capsys):
    text = tmp_path / "b.txt"
    text.write_text("bouche", encoding="utf-8")
    (tmp_path / "b.txt.marks").write_text("w1\t0\t6\n", encoding="utf-8")
    a = tmp_path / "a.gmt.xml"
    a.write_text('<struct type="W-level"><seg target="#w1"/><feat type="lemma">boucher</feat><feat type="pos">VERB</feat><feat type="tense">present</feat></struct>')
    b = tmp_path / "b.gmt.xml"
    b.write_text('<struct type="W-level"><seg target="#w1"/><feat type="lemma">bouche</feat><feat type="pos">NOUN</feat></struct>')
    out = tmp_path / "m.gmt.xml"
    assert main(["merge", "--as-alternatives", "--primary", str(text), str(a), str(b), "--out", str(out)]) == 0
    merged = gmt.parse_file(out)
    assert merged.root == gmt.without_confidence(load_listing("bouche_alternatives").root)


def test_merge_incompatible(tmp_path, paul_text, capsys):
    other = tmp_path / "o.txt"
    other.write_text("xyz", encoding="utf-8")
    (tmp_path / "o.txt.marks").write_text("v1\t0\t1\n", encoding="utf-8")
    doc = tmp_path / "o.gmt.xml"
    doc.write_text('<struct type="W"><seg target="o.txt#v1"/></struct>')
    code = main(["merge", "--primary", paul_text, "--primary", str(other), listing("paul_aime"), str(doc)])
    assert code == 1
    assert ":incompatible-layers:" in capsys.readouterr().err


def test_convert_tabular_to_gmt(tmp_path):
    tsv = tmp_path / "paul.tsv"
    tsv.write_text("\n".join(PAUL_TABULAR) + "\n", encoding="utf-8")
    out = tmp_path / "paul.gmt.xml"
    assert main(["convert", str(tsv), "--from", "tabular", "--to", "gmt", "--out", str(out)]) == 0
    doc = gmt.parse_file(out)
    assert gmt.canonicalize(doc).root == gmt.canonicalize(load_listing("paul_aime")).root
    assert (tmp_path / "paul.txt").read_text(encoding="utf-8") == PAUL_TEXT
    assert (tmp_path / "paul.txt.marks").read_text(encoding="utf-8") == PAUL_MARKS_TEXT
    assert doc.primary_refs == ["paul.txt"]


def test_convert_round_trip_fixpoint(tmp_path, paul_text):
    tsv = tmp_path / "out.tsv"
    assert main(["convert", listing("paul_aime"), "--from", "gmt", "--to", "tabular", "--primary", paul_text, "--out", str(tsv)]) == 0
    assert tsv.read_text(encoding="utf-8").splitlines() == PAUL_TABULAR
    back = tmp_path / "back.gmt.xml"
    assert main(["convert", str(tsv), "--from", "tabular", "--to", "gmt", "--primary", paul_text, "--out", str(back)]) == 0
    assert gmt.canonicalize(gmt.parse_file(back)).root == gmt.canonicalize(load_listing("paul_aime")).root


def test_convert_same_format_canonicalizes(tmp_path):
    out = tmp_path / "c.gmt.xml"
    assert main(["convert", listing("du_fusion"), "--from", "gmt", "--to", "gmt", "--out", str(out)]) == 0
    assert out.read_bytes() == gmt.canonical_bytes(load_listing("du_fusion"))
    again = tmp_path / "c2.gmt.xml"
    assert main(["convert", str(out), "--from", "gmt", "--to", "gmt", "--out", str(again)]) == 0
    # the document id travels in the root attribute, so the output is a fixpoint
    assert again.read_bytes() == out.read_bytes()


def test_convert_alignment_error(tmp_path, paul_text, capsys):
    tsv = tmp_path / "x.tsv"
    tsv.write_text("chat\n", encoding="utf-8")
    assert main(["convert", str(tsv), "--from", "tabular", "--to", "gmt", "--primary", paul_text, "--out", str(tmp_path / "x.gmt.xml")]) == 1
    assert ":alignment-error:" in capsys.readouterr().err
    assert not (tmp_path / "x.gmt.xml").exists()


def test_convert_needs_primary_for_export(capsys):
    assert main(["convert", listing("paul_aime"), "--from", "gmt", "--to", "tabular"]) == 2


def test_usage_errors(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2
    assert main(["diff", listing("paul_aime")]) == 2


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "gmtannot", "validate", listing("paul_aime")], capture_output=True, text=True, check=False
    )
    assert proc.returncode == 0 and proc.stderr == ""
