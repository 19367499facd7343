"""``gmtannot`` command line.

Exit status: 0 success, 1 data error, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional

from . import gmt, layerops, registry, transduce
from .anchoring import LayerSet, PrimaryDoc, project_to_primary, validate_anchors
from .errors import AnnotationError, Diagnostic, NotTextual
from .model import check_document

OK, DATA_ERROR, USAGE_ERROR = 0, 1, 2
MARKS_SUFFIX = ".marks"


class _Abort(Exception):
    def __init__(self, status: int, message: str = ""):
        super().__init__(message)
        self.status = status


def _emit(diags, stream=None):
    stream = stream or sys.stderr
    for d in diags:
        print(d.format(), file=stream)


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        _emit([Diagnostic("error", "io-error", exc.strerror or str(exc), str(path))])
        raise _Abort(USAGE_ERROR) from None


def _read_text(path) -> str:
    try:
        return _read_bytes(path).decode("utf-8")
    except UnicodeDecodeError as exc:
        _emit([Diagnostic("error", "io-error", f"not UTF-8: {exc}", str(path))])
        raise _Abort(USAGE_ERROR) from None


def write_atomic(path, data: bytes) -> None:
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _output(path: Optional[str], data: bytes) -> None:
    if path is None or path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        try:
            write_atomic(path, data)
        except OSError as exc:
            _emit([Diagnostic("error", "io-error", exc.strerror or str(exc), str(path))])
            raise _Abort(USAGE_ERROR) from None


def load_primary(path) -> PrimaryDoc:
    """A plain UTF-8 text plus its optional ``.marks`` side table."""
    path = Path(path)
    text = _read_text(path)
    sidecar = path.with_name(path.name + MARKS_SUFFIX)
    marks = transduce.parse_marks(_read_text(sidecar)) if sidecar.exists() else {}
    return PrimaryDoc.from_text(path.name, text, marks)


def _dialect(args) -> gmt.GmtDialect:
    return gmt.STRICT if getattr(args, "strict", False) else gmt.LENIENT


def _parse(path, args, diags: list[Diagnostic]):
    return gmt.parse(_read_bytes(path), _dialect(args), name=str(path), diagnostics=diags)


def _layers(args, docs=()) -> LayerSet:
    layers = LayerSet()
    for p in args.primary or []:
        try:
            layers.add_primary(load_primary(p))
        except AnnotationError as exc:
            _emit([exc.to_diagnostic(str(p))])
            raise _Abort(DATA_ERROR) from None
    for doc in docs:
        if doc.doc_id not in layers:
            layers.add_annotation(doc)
    return layers


def _registry(args) -> registry.Registry:
    if not args.registry:
        return registry.seed_registry()
    return registry.read_registry(args.registry, args.mappings)


# -- commands ---------------------------------------------------------------------

def cmd_validate(args) -> int:
    reg = _registry(args)
    diags: list[Diagnostic] = []
    docs, files = [], {}
    status = OK
    for path in args.paths:
        local: list[Diagnostic] = []
        try:
            doc = _parse(path, args, local)
        except AnnotationError as exc:
            diags.extend(local)
            diags.append(exc.to_diagnostic(str(path)))
            continue
        files[doc.doc_id] = str(path)
        docs.append(doc)
        local += [d.with_file(str(path)) for d in check_document(doc)]
        local += [d.with_file(str(path)) for d in registry.validate(doc, reg)]
        diags.extend(local)
    if args.primary:
        layers = _layers(args, docs)
        diags += [d.with_file(files.get(d.file, d.file)) for d in validate_anchors(layers)]
    unique = list(dict.fromkeys(diags))
    _emit(unique)
    if any(d.is_error for d in unique):
        status = DATA_ERROR
    return status


def _write_gmt_outputs(layers: LayerSet, out: Path, primary_name: str) -> None:
    docs = list(layers.annotation_docs.values())
    for k, doc in enumerate(docs, 1):
        target = out if len(docs) == 1 else out.with_name(f"{gmt.doc_id_from_name(out.name)}-{k}{gmt.SUFFIX}")
        doc.doc_id = gmt.doc_id_from_name(target.name)
        doc.primary_refs = [primary_name]
        write_atomic(target, gmt.canonical_bytes(doc))


def cmd_convert(args) -> int:
    src, dst = args.from_fmt, args.to_fmt
    if src == "tabular":
        lines = _read_text(args.input).splitlines()
        if dst == "tabular":
            _output(args.out, transduce.format_tabular(transduce.read_tabular(lines)).encode("utf-8"))
            return OK
        if not args.out:
            raise _Abort(USAGE_ERROR, "tabular to gmt conversion needs --out")
        out = Path(args.out)
        text = _read_text(args.primary[0]) if args.primary else None
        primary_path = out.with_name(gmt.doc_id_from_name(out.name) + ".txt")
        layers = transduce.import_tabular(lines, text, doc_id=gmt.doc_id_from_name(out.name), primary_id=primary_path.name)
        primary = layers.primary_docs[primary_path.name]
        write_atomic(primary_path, primary.content.encode("utf-8"))
        write_atomic(primary_path.with_name(primary_path.name + MARKS_SUFFIX), transduce.format_marks(primary).encode("utf-8"))
        _write_gmt_outputs(layers, out, primary_path.name)
        return OK

    diags: list[Diagnostic] = []
    doc = _parse(args.input, args, diags)
    _emit(diags)
    if dst == "gmt":
        _output(args.out, gmt.canonical_bytes(doc))
        return OK
    if not args.primary:
        raise _Abort(USAGE_ERROR, "gmt to tabular conversion needs --primary")
    layers = _layers(args, [doc])
    records = transduce.export_tabular(layers, doc, args.flatten, args.disambiguate)
    _output(args.out, transduce.format_tabular([records]).encode("utf-8"))
    return OK


def _need_primary(args) -> None:
    if not args.primary:
        raise _Abort(USAGE_ERROR, f"{args.command} needs --primary")


def _pair_inputs(args):
    _need_primary(args)
    if len(args.inputs) != 2:
        raise _Abort(USAGE_ERROR, "exactly two input documents are needed")
    diags: list[Diagnostic] = []
    a = _parse(args.inputs[0], args, diags)
    b = _parse(args.inputs[1], args, diags)
    _emit(diags)
    return a, b, _layers(args, [a, b])


def cmd_merge(args) -> int:
    a, b, layers = _pair_inputs(args)
    merged = layerops.merge(a, b, layers, args.policy)
    _output(args.out, gmt.serialize(merged))
    return OK


def cmd_diff(args) -> int:
    a, b, layers = _pair_inputs(args)
    report = layerops.diff(a, b, layers, strict=args.strict)
    _output(args.out, report.format().encode("utf-8"))
    return OK


def cmd_resolve(args) -> int:
    _need_primary(args)
    diags: list[Diagnostic] = []
    docs = [_parse(p, args, diags) for p in args.inputs]
    _emit(diags)
    layers = _layers(args, docs)
    ref = layers.find(args.node)
    lines = [f"# node\t{ref.doc.doc_id}\t{ref.node.label}"]
    for e in project_to_primary(ref, layers):
        lines.append(f"extent\t{e.doc_id}\t{e.starts_at}\t{e.ends_at}\t{e.unit}")
    try:
        cover = layerops.covered(ref, layers)
    except NotTextual:
        cover = None
    if cover is not None:
        lines.append(f"covered\t{cover.text}")
        lines += [f"lemma-fallback\t{name}" for name in cover.lemma_fallbacks]
    _output(args.out, ("\n".join(lines) + "\n").encode("utf-8"))
    return OK


# -- entry point ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmtannot", description="Stand-off annotation toolkit for the GMT pivot format.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, strict_help="reject anything lenient parsing would repair"):
        p.add_argument("--primary", action="append", metavar="PATH", help="primary text (with optional PATH.marks)")
        p.add_argument("--strict", action="store_true", help=strict_help)
        p.add_argument("--out", metavar="PATH")

    p = sub.add_parser("validate", help="parse, check categories and anchors")
    p.add_argument("paths", nargs="+")
    p.add_argument("--registry", metavar="PATH")
    p.add_argument("--mappings", metavar="PATH")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("convert", help="convert between tabular and gmt")
    p.add_argument("input")
    p.add_argument("--from", dest="from_fmt", choices=("tabular", "gmt"), required=True)
    p.add_argument("--to", dest="to_fmt", choices=("tabular", "gmt"), required=True)
    p.add_argument("--flatten", choices=transduce.POLICIES, default="leaves")
    p.add_argument("--disambiguate", choices=(transduce.HIGHEST_CONFIDENCE,))
    common(p)
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("merge", help="merge two parallel layers")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--policy", choices=layerops.POLICIES, default=layerops.UNION)
    p.add_argument(
        "--as-alternatives", dest="policy", action="store_const", const=layerops.AS_ALTERNATIVES,
        help="shorthand for --policy as-alternatives",
    )
    common(p)
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("diff", help="compare two parallel layers")
    p.add_argument("inputs", nargs="+")
    common(p, "compare alternatives positionally")
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("resolve", help="project a node to primary data")
    p.add_argument("inputs", nargs="+")
    p.add_argument("--node", required=True, metavar="ID")
    common(p)
    p.set_defaults(func=cmd_resolve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "registry", None) is None and getattr(args, "mappings", None):
        parser.error("--mappings needs --registry")
    try:
        return args.func(args)
    except _Abort as exc:
        if str(exc):
            print(f"gmtannot: {exc}", file=sys.stderr)
        return exc.status
    except AnnotationError as exc:
        _emit([exc.to_diagnostic()])
        return DATA_ERROR
    except OSError as exc:
        _emit([Diagnostic("error", "io-error", exc.strerror or str(exc), getattr(exc, "filename", None) or "-")])
        return USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
