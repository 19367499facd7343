"""Data category registry: category definitions, validation, name mapping.

Registry file, one category per line::

    name | value_space | applicable_levels | repeatable | parent | gloss

``value_space`` is ``open``, ``closed:v1;v2;...``, ``numeric:min..max`` or
``pointer``; ``applicable_levels`` is ``*`` or a comma-separated list of
node types; ``#`` starts a comment.  Mapping files hold
``scheme | local | reference`` lines.
"""

from __future__ import annotations

import copy
import math
from collections import Counter
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Optional

from .errors import Diagnostic, FormatError, InvalidArgument, InvalidCategory, NotFound
from .model import AltGroup, AnnotationDocument, Feature, Pointer, StructNode

OPEN, CLOSED, NUMERIC, POINTER = "open", "closed", "numeric", "pointer"


@dataclass(frozen=True)
class ValueSpace:
    kind: str = OPEN
    values: tuple[str, ...] = ()
    minimum: Optional[float] = None
    maximum: Optional[float] = None

    def __post_init__(self):
        if self.kind not in (OPEN, CLOSED, NUMERIC, POINTER):
            raise InvalidCategory(f"unknown value space {self.kind!r}")
        if self.kind == CLOSED:
            if not self.values:
                raise InvalidCategory("closed value space without values")
            if len(set(self.values)) != len(self.values):
                raise InvalidCategory(f"duplicate values in closed list {self.values}")
        if self.kind == NUMERIC:
            if self.minimum is None or self.maximum is None:
                raise InvalidCategory("numeric value space needs min and max")
            if self.minimum > self.maximum:
                raise InvalidCategory(f"numeric range {self.minimum}..{self.maximum} is inverted")

    @classmethod
    def closed(cls, values: Iterable[str]) -> ValueSpace:
        return cls(CLOSED, tuple(values))

    @classmethod
    def numeric(cls, minimum: float, maximum: float) -> ValueSpace:
        return cls(NUMERIC, (), float(minimum), float(maximum))

    @classmethod
    def parse(cls, text: str) -> ValueSpace:
        kind, _, rest = text.strip().partition(":")
        if kind == CLOSED:
            return cls.closed(v.strip() for v in rest.split(";") if v.strip())
        if kind == NUMERIC:
            lo, sep, hi = rest.partition("..")
            if not sep:
                raise InvalidCategory(f"numeric range {rest!r} is not min..max")
            try:
                return cls.numeric(float(lo), float(hi))
            except ValueError:
                raise InvalidCategory(f"numeric range {rest!r} is not min..max") from None
        if rest:
            raise InvalidCategory(f"value space {text!r} takes no parameters")
        return cls(kind)

    def render(self) -> str:
        if self.kind == CLOSED:
            return "closed:" + ";".join(self.values)
        if self.kind == NUMERIC:
            return f"numeric:{self.minimum:g}..{self.maximum:g}"
        return self.kind

    def check(self, value: str) -> Optional[tuple[str, str]]:
        """(code, message) when ``value`` is not admissible."""
        if self.kind == CLOSED and value.strip() not in self.values:
            return "closed-value", f"{value!r} not in {{{', '.join(self.values)}}}"
        if self.kind == NUMERIC:
            try:
                number = float(value)
            except ValueError:
                return "not-numeric", f"{value!r} is not a number"
            if math.isnan(number) or not self.minimum <= number <= self.maximum:
                return "numeric-out-of-range", f"{value} outside [{self.minimum:g},{self.maximum:g}]"
        if self.kind == POINTER:
            try:
                Pointer.parse(value)
            except InvalidArgument:
                return "bad-pointer-value", f"{value!r} is not a pointer"
        return None


@dataclass(frozen=True)
class DataCategory:
    name: str
    value_space: ValueSpace = ValueSpace()
    applicable_levels: tuple[str, ...] = ()
    repeatable: bool = True
    parent: Optional[str] = None  # stored, not enforced
    gloss: str = ""

    def __post_init__(self):
        if not self.name or "|" in self.name:
            raise InvalidCategory(f"bad category name {self.name!r}")
        object.__setattr__(self, "applicable_levels", tuple(self.applicable_levels))
        # re-validate: the value space may have been built by hand
        ValueSpace.__post_init__(self.value_space)

    def applies_to(self, node_type: str) -> bool:
        return not self.applicable_levels or node_type in self.applicable_levels


@dataclass(frozen=True)
class Registry:
    categories: Mapping[str, DataCategory] = field(default_factory=dict)
    mappings: Mapping[tuple[str, str], str] = field(default_factory=dict)
    diagnostics: tuple[Diagnostic, ...] = field(default=(), compare=False)

    def __post_init__(self):
        for (scheme, local), ref in self.mappings.items():
            if ref not in self.categories:
                raise InvalidCategory(f"mapping {scheme}:{local} -> {ref!r} targets an undefined category")

    def __contains__(self, name: str) -> bool:
        return name in self.categories

    def lookup(self, name: str) -> DataCategory:
        try:
            return self.categories[name]
        except KeyError:
            raise NotFound(f"no data category {name!r}") from None

    def define(self, cat: DataCategory) -> Registry:
        """New registry with ``cat`` added or replaced."""
        if not isinstance(cat, DataCategory):
            raise InvalidCategory(f"not a data category: {cat!r}")
        DataCategory.__post_init__(cat)
        notes = self.diagnostics
        if cat.name in self.categories:
            notes = notes + (Diagnostic("warning", "redefinition", f"category {cat.name!r} redefined"),)
        return Registry({**self.categories, cat.name: cat}, dict(self.mappings), notes)

    def with_mapping(self, scheme: str, local: str, reference: str) -> Registry:
        mappings = {**self.mappings, (scheme, local): reference}
        return Registry(dict(self.categories), mappings, self.diagnostics)

    def scheme_mapping(self, scheme: str) -> dict[str, str]:
        return {local: ref for (s, local), ref in self.mappings.items() if s == scheme}


def define(reg: Registry, cat: DataCategory) -> Registry:
    return reg.define(cat)


# -- file format ----------------------------------------------------------------

def _records(text: str, width: int):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f.strip() for f in line.split("|", width - 1)]
        yield lineno, fields + [""] * (width - len(fields))


def _flag(text: str, lineno: int) -> bool:
    value = text.lower() or "yes"
    if value in ("yes", "true", "1"):
        return True
    if value in ("no", "false", "0"):
        return False
    raise FormatError(f"line {lineno}: repeatable must be yes/no, got {text!r}", line=lineno)


def parse_registry(text: str, base: Optional[Registry] = None) -> Registry:
    reg = base or Registry()
    for lineno, (name, space, levels, repeatable, parent, gloss) in _records(text, 6):
        levels = () if levels in ("", "*") else tuple(x.strip() for x in levels.split(",") if x.strip())
        try:
            cat = DataCategory(
                name,
                ValueSpace.parse(space or OPEN),
                levels,
                _flag(repeatable, lineno),
                parent or None,
                gloss,
            )
        except InvalidCategory as exc:
            raise InvalidCategory(f"line {lineno}: {exc.message}", line=lineno) from None
        reg = reg.define(cat)
    return reg


def parse_mappings(text: str, reg: Registry) -> Registry:
    for lineno, (scheme, local, ref) in _records(text, 3):
        if not scheme or not local or not ref:
            raise FormatError(f"line {lineno}: mapping needs scheme | local | reference", line=lineno)
        try:
            reg = reg.with_mapping(scheme, local, ref)
        except InvalidCategory as exc:
            raise InvalidCategory(f"line {lineno}: {exc.message}", line=lineno) from None
    return reg


def format_registry(reg: Registry) -> str:
    lines = ["# name | value_space | applicable_levels | repeatable | parent | gloss"]
    for cat in reg.categories.values():
        levels = ",".join(cat.applicable_levels) or "*"
        lines.append(
            " | ".join(
                [cat.name, cat.value_space.render(), levels, "yes" if cat.repeatable else "no", cat.parent or "", cat.gloss]
            ).rstrip()
        )
    return "\n".join(lines) + "\n"


def format_mappings(reg: Registry) -> str:
    return "".join(f"{s} | {local} | {ref}\n" for (s, local), ref in reg.mappings.items())


def read_registry(path, mappings_path=None) -> Registry:
    reg = parse_registry(Path(path).read_text(encoding="utf-8"))
    if mappings_path is not None:
        reg = parse_mappings(Path(mappings_path).read_text(encoding="utf-8"), reg)
    return reg


def data_file(name: str) -> str:
    return (resources.files("gmtannot") / "data" / name).read_text(encoding="utf-8")


def seed_registry() -> Registry:
    return parse_registry(data_file("seed.dcr"))


# -- validation -----------------------------------------------------------------

class _Validator:
    def __init__(self, doc: AnnotationDocument, reg: Registry):
        self.doc = doc
        self.reg = reg
        self.out: list[Diagnostic] = []

    def emit(self, severity, code, message, where):
        line, col = getattr(where, "pos", None) or (0, 0)
        self.out.append(Diagnostic(severity, code, message, self.doc.doc_id, line, col))

    def value(self, category: str, value: str, level: str, where):
        cat = self.reg.categories.get(category)
        if cat is None:
            self.emit("warning", "unknown-category", f"category {category!r} is not registered", where)
            return
        if not cat.applies_to(level):
            self.emit("warning", "inapplicable-level", f"{category!r} is not defined for {level!r} nodes", where)
        problem = cat.value_space.check(value)
        if problem:
            code, message = problem
            self.emit("error", code, f"{category}: {message}", where)

    def features(self, feats: list[Feature], level: str, where, extra: Counter = None):
        counts = Counter(extra or ())
        for f in feats:
            counts[f.category] += 1
            if f.value or not f.children:
                self.value(f.category, f.value, level, f if f.pos else where)
            elif f.category not in self.reg.categories:
                self.emit("warning", "unknown-category", f"category {f.category!r} is not registered", f if f.pos else where)
            self.features(f.children, level, f if f.pos else where)
        for name, n in counts.items():
            cat = self.reg.categories.get(name)
            if n > 1 and cat is not None and not cat.repeatable:
                self.emit("error", "repeated-category", f"{name!r} occurs {n} times but is not repeatable", where)

    def node(self, node: StructNode):
        self.features(node.features, node.node_type, node)
        if 0 < len(node.alternatives) < 2:
            self.emit("warning", "single-alternative", f"{node.label}: only one alternative", node)
        for g in node.alternatives:
            self.group(g, node)

    def group(self, g: AltGroup, node: StructNode):
        extra = Counter()
        if g.confidence is not None:
            extra["confidence"] += 1
            if "confidence" in self.reg.categories:
                self.value("confidence", repr(g.confidence), node.node_type, node)
        self.features(g.features, node.node_type, node, extra)


def validate(document: AnnotationDocument, reg: Registry) -> list[Diagnostic]:
    v = _Validator(document, reg)
    for node in document.root.walk():
        v.node(node)
    return v.out


# -- name mapping ---------------------------------------------------------------

def _rename(feats: list[Feature], table: Mapping[str, str], unmapped: set[str]) -> None:
    for f in feats:
        if f.category in table:
            f.category = table[f.category]
        else:
            unmapped.add(f.category)
        _rename(f.children, table, unmapped)


def map_names(document: AnnotationDocument, reg: Registry, scheme: str) -> tuple[AnnotationDocument, list[str]]:
    """Rewrite scheme-local category names to reference names.

    Returns the rewritten copy and the sorted names that had no mapping.
    """
    table = reg.scheme_mapping(scheme)
    doc = copy.deepcopy(document)
    unmapped: set[str] = set()
    for node in doc.root.walk():
        _rename(node.features, table, unmapped)
        for g in node.alternatives:
            _rename(g.features, table, unmapped)
    return doc, sorted(unmapped)


__all__ = [
    "DataCategory",
    "Registry",
    "ValueSpace",
    "define",
    "format_mappings",
    "format_registry",
    "map_names",
    "parse_mappings",
    "parse_registry",
    "read_registry",
    "seed_registry",
    "validate",
]
