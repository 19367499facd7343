from pathlib import Path

import pytest

from gmtannot import gmt
from gmtannot.anchoring import LayerSet, PrimaryDoc
from gmtannot.model import TIME

DATA = Path(__file__).parent / "data"

LISTINGS = (
    "paul_aime",
    "du_fusion",
    "pomme_de_terre",
    "bouche_alternatives",
    "phonetic",
    "landmark",
    "queue_du_chat_morpho",
    "queue_du_chat_syntax",
)
TIMED = {"phonetic", "landmark"}

PAUL_TEXT = "Paul aime les croissants"
PAUL_MARKS = {"w1": (0, 4), "w2": (5, 9), "w3": (10, 13), "w4": (14, 24)}
PAUL_TABULAR = [
    "Paul\tPaul\tPNOUN",
    "aime\taimer\tVERB\ttense=present;person=3",
    "les\tle\tDET\tnumber=plural",
    "croissants\tcroissant\tNOUN\tnumber=plural",
]

QUEUE_TEXT = "la queue du chat"
QUEUE_MARKS = {
    "w1": (0, 2),
    "w2": (3, 8),
    "w3": (9, 11),
    "w3.1": (9, 11),
    "w3.2": (9, 11),
    "w4": (12, 16),
}

# primary text and marks each listing anchors into
PRIMARIES = {
    "paul_aime": (PAUL_TEXT, PAUL_MARKS),
    "du_fusion": ("du", {"w1": (0, 2)}),
    "pomme_de_terre": ("pomme de terre", {"w1": (0, 5), "w2": (6, 8), "w3": (9, 14)}),
    "bouche_alternatives": ("bouche", {"w1": (0, 6)}),
}


def listing_bytes(name: str) -> bytes:
    return (DATA / f"{name}.gmt.xml").read_bytes()


def dialect_for(name: str) -> gmt.GmtDialect:
    return gmt.GmtDialect(default_unit=TIME) if name in TIMED else gmt.LENIENT


def load_listing(name: str, diagnostics=None):
    return gmt.parse(listing_bytes(name), dialect_for(name), name=f"{name}.gmt.xml", diagnostics=diagnostics)


def layers_for(name: str) -> LayerSet:
    """A LayerSet holding one listing and the primary data it points into."""
    layers = LayerSet()
    if name in TIMED:
        layers.add_primary(PrimaryDoc.timed("speech", 5000))
        layers.add_annotation(load_listing(name))
    elif name.startswith("queue_du_chat"):
        return queue_layers()
    else:
        text, marks = PRIMARIES[name]
        layers.add_primary(PrimaryDoc.from_text("text", text, marks))
        layers.add_annotation(load_listing(name))
    return layers


def queue_layers() -> LayerSet:
    layers = LayerSet()
    layers.add_primary(PrimaryDoc.from_text("text", QUEUE_TEXT, QUEUE_MARKS))
    layers.add_annotation(load_listing("queue_du_chat_morpho"))
    layers.add_annotation(load_listing("queue_du_chat_syntax"))
    return layers


@pytest.fixture
def paul():
    return load_listing("paul_aime")


@pytest.fixture
def paul_layers():
    return layers_for("paul_aime")


@pytest.fixture
def queue():
    return queue_layers()


@pytest.fixture(params=LISTINGS)
def listing_name(request):
    return request.param
