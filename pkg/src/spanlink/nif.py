"""Minimal NIF 2.0 document exchange over a restricted Turtle subset.

Only the terms the annotation protocol actually exchanges are interpreted:
``nif:Context``, ``nif:isString``, ``nif:beginIndex``, ``nif:endIndex``, and
``itsrdf:taIdentRef``. All other well-formed triples are parsed and ignored;
anything outside the supported Turtle grammar is rejected with a parse error.
Begin/end indices count Unicode code points into the context string.
"""

from __future__ import annotations

import urllib.parse
from dataclasses import dataclass

from .core import SpanAnnotation
from .errors import NifParseError, NifProtocolError

NIF = "http://persistence.uni-leipzig.org/nlp2rdf/ontologies/nif-core#"
ITSRDF = "http://www.w3.org/2005/11/its/rdf#"
XSD = "http://www.w3.org/2001/XMLSchema#"
RDF_TYPE = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type"

DEFAULT_KB_PREFIX = "https://en.wikipedia.org/wiki/"


@dataclass(frozen=True)
class NifPhrase:
    begin: int
    end: int
    ta_ident_ref: str | None = None


@dataclass(frozen=True)
class NifDocument:
    context_uri: str
    text: str
    phrases: tuple[NifPhrase, ...] = ()


# ---------------------------------------------------------------------------
# Turtle lexing/parsing (restricted subset)
# ---------------------------------------------------------------------------

_PNAME_CHARS = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789_-.:%")
_ESCAPES = {"t": "\t", "b": "\b", "n": "\n", "r": "\r", "f": "\f", '"': '"', "'": "'", "\\": "\\"}


class _Lexer:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0
        self.n = len(text)

    def error(self, message: str):
        line = self.text.count("\n", 0, self.pos) + 1
        raise NifParseError(f"line {line}: {message}")

    def _skip_space(self):
        while self.pos < self.n:
            ch = self.text[self.pos]
            if ch.isspace():
                self.pos += 1
            elif ch == "#":
                while self.pos < self.n and self.text[self.pos] != "\n":
                    self.pos += 1
            else:
                return

    def tokens(self):
        while True:
            self._skip_space()
            if self.pos >= self.n:
                return
            ch = self.text[self.pos]
            if ch == "<":
                yield ("iri", self._read_iri())
            elif ch in "\"'":
                yield ("string", self._read_string(ch))
            elif ch in ";,.[]()":
                self.pos += 1
                yield ("punct", ch)
            elif self.text.startswith("^^", self.pos):
                self.pos += 2
                yield ("dtype_marker", "^^")
            elif ch == "@":
                yield self._read_at_word()
            elif ch.isdigit() or (ch in "+-" and self._peek_digit()):
                yield ("number", self._read_number())
            elif ch in _PNAME_CHARS:
                yield self._read_pname()
            else:
                self.error(f"unexpected character {ch!r}")

    def _peek_digit(self) -> bool:
        return self.pos + 1 < self.n and self.text[self.pos + 1].isdigit()

    def _read_iri(self) -> str:
        end = self.text.find(">", self.pos + 1)
        if end == -1:
            self.error("unterminated IRI")
        value = self.text[self.pos + 1 : end]
        self.pos = end + 1
        return value

    def _read_string(self, quote: str) -> str:
        long_form = self.text.startswith(quote * 3, self.pos)
        terminator = quote * 3 if long_form else quote
        self.pos += len(terminator)
        out = []
        while True:
            if self.pos >= self.n:
                self.error("unterminated string literal")
            if self.text.startswith(terminator, self.pos):
                self.pos += len(terminator)
                return "".join(out)
            ch = self.text[self.pos]
            if ch == "\\":
                self.pos += 1
                if self.pos >= self.n:
                    self.error("dangling escape")
                esc = self.text[self.pos]
                if esc in _ESCAPES:
                    out.append(_ESCAPES[esc])
                    self.pos += 1
                elif esc in "uU":
                    width = 4 if esc == "u" else 8
                    hexdigits = self.text[self.pos + 1 : self.pos + 1 + width]
                    if len(hexdigits) != width:
                        self.error("truncated unicode escape")
                    try:
                        out.append(chr(int(hexdigits, 16)))
                    except ValueError:
                        self.error(f"bad unicode escape \\{esc}{hexdigits}")
                    self.pos += 1 + width
                else:
                    self.error(f"unknown escape \\{esc}")
            elif ch == "\n" and not long_form:
                self.error("newline in short string literal")
            else:
                out.append(ch)
                self.pos += 1

    def _read_at_word(self):
        start = self.pos + 1
        end = start
        while end < self.n and (self.text[end].isalpha() or self.text[end] == "-"):
            end += 1
        word = self.text[start:end]
        self.pos = end
        if word == "prefix":
            return ("prefix_directive", word)
        if word == "base":
            return ("base_directive", word)
        if word:
            return ("langtag", word)
        self.error("bare @")

    def _read_number(self) -> str:
        start = self.pos
        if self.text[self.pos] in "+-":
            self.pos += 1
        while self.pos < self.n and self.text[self.pos].isdigit():
            self.pos += 1
        if (
            self.pos < self.n
            and self.text[self.pos] == "."
            and self.pos + 1 < self.n
            and self.text[self.pos + 1].isdigit()
        ):
            self.pos += 1
            while self.pos < self.n and self.text[self.pos].isdigit():
                self.pos += 1
        return self.text[start : self.pos]

    def _read_pname(self):
        start = self.pos
        while self.pos < self.n and self.text[self.pos] in _PNAME_CHARS:
            self.pos += 1
        value = self.text[start : self.pos]
        # A trailing dot terminates the statement, not the local name.
        while value.endswith("."):
            value = value[:-1]
            self.pos -= 1
        if not value:
            self.error("empty name")
        if value == "a":
            return ("a", value)
        if value in ("true", "false"):
            return ("boolean", value)
        return ("pname", value)


_Literal = tuple[str, str | None]  # (lexical value, datatype IRI or None)


def _parse_turtle(body: str) -> list[tuple[str, str, object]]:
    """Parse into (subject, predicate, object) triples.

    Objects are either ("iri", value) or ("lit", (value, datatype)).
    Blank nodes and collections are outside the supported subset.
    """
    lexer = _Lexer(body)
    tokens = list(lexer.tokens())
    prefixes: dict[str, str] = {}
    triples: list[tuple[str, str, object]] = []
    i = 0

    def expand(kind, value, where):
        if kind == "iri":
            return value
        if kind == "pname":
            head, sep, local = value.partition(":")
            if not sep:
                raise NifParseError(f"{where}: expected an IRI or prefixed name, got {value!r}")
            if head not in prefixes:
                raise NifParseError(f"{where}: unknown prefix {head!r}")
            return prefixes[head] + local
        raise NifParseError(f"{where}: expected an IRI or prefixed name, got {kind}")

    def at(idx):
        if idx >= len(tokens):
            raise NifParseError("unexpected end of input")
        return tokens[idx]

    while i < len(tokens):
        kind, value = tokens[i]
        if kind == "prefix_directive":
            pk, pv = at(i + 1)
            ik, iv = at(i + 2)
            dk, dv = at(i + 3)
            if pk != "pname" or not pv.endswith(":") or ik != "iri" or (dk, dv) != ("punct", "."):
                raise NifParseError("malformed @prefix directive")
            prefixes[pv[:-1]] = iv
            i += 4
            continue
        if kind == "base_directive":
            ik, _ = at(i + 1)
            dk, dv = at(i + 2)
            if ik != "iri" or (dk, dv) != ("punct", "."):
                raise NifParseError("malformed @base directive")
            i += 3
            continue

        subject = expand(kind, value, "subject")
        i += 1
        while True:
            pk, pv = at(i)
            predicate = RDF_TYPE if pk == "a" else expand(pk, pv, "predicate")
            i += 1
            while True:
                ok, ov = at(i)
                if ok in ("iri", "pname", "a"):
                    obj = ("iri", expand(ok, ov, "object"))
                    i += 1
                elif ok == "string":
                    i += 1
                    datatype = None
                    if i < len(tokens) and tokens[i][0] == "dtype_marker":
                        dk, dv = at(i + 1)
                        datatype = expand(dk, dv, "datatype")
                        i += 2
                    elif i < len(tokens) and tokens[i][0] == "langtag":
                        i += 1
                    obj = ("lit", (ov, datatype))
                elif ok == "number":
                    obj = ("lit", (ov, XSD + "integer"))
                    i += 1
                elif ok == "boolean":
                    obj = ("lit", (ov, XSD + "boolean"))
                    i += 1
                else:
                    raise NifParseError(f"expected an object, got {ok} {ov!r}")
                triples.append((subject, predicate, obj))
                pk2, pv2 = at(i)
                if (pk2, pv2) == ("punct", ","):
                    i += 1
                    continue
                break
            pk2, pv2 = at(i)
            if (pk2, pv2) == ("punct", ";"):
                i += 1
                # Tolerate a terminating `; .`
                if at(i) == ("punct", "."):
                    i += 1
                    break
                continue
            if (pk2, pv2) == ("punct", "."):
                i += 1
                break
            raise NifParseError(f"expected ';', ',' or '.', got {pv2!r}")
    return triples


# ---------------------------------------------------------------------------
# NIF interpretation
# ---------------------------------------------------------------------------


def _lit_int(obj, what: str) -> int:
    if obj[0] != "lit":
        raise NifProtocolError(f"{what} must be a literal")
    try:
        return int(obj[1][0])
    except ValueError:
        raise NifProtocolError(f"{what} is not an integer: {obj[1][0]!r}") from None


def parse_nif(body: str) -> NifDocument:
    """Extract the context text and any phrases from a Turtle request body."""
    triples = _parse_turtle(body)
    by_subject: dict[str, dict[str, list]] = {}
    for s, p, o in triples:
        by_subject.setdefault(s, {}).setdefault(p, []).append(o)

    context_uri = None
    for subject, preds in by_subject.items():
        if NIF + "isString" in preds:
            if context_uri is not None:
                raise NifProtocolError("multiple context resources")
            context_uri = subject
    if context_uri is None:
        raise NifProtocolError("missing nif:isString context")
    is_string = by_subject[context_uri][NIF + "isString"][0]
    if is_string[0] != "lit":
        raise NifProtocolError("nif:isString must be a literal")
    text = is_string[1][0]

    phrases = []
    for subject, preds in by_subject.items():
        if subject == context_uri:
            continue
        if NIF + "beginIndex" not in preds or NIF + "endIndex" not in preds:
            continue
        begin = _lit_int(preds[NIF + "beginIndex"][0], "nif:beginIndex")
        end = _lit_int(preds[NIF + "endIndex"][0], "nif:endIndex")
        if not (0 <= begin < end <= len(text)):
            raise NifProtocolError(f"phrase [{begin}, {end}) outside context of length {len(text)}")
        ref = None
        if ITSRDF + "taIdentRef" in preds:
            obj = preds[ITSRDF + "taIdentRef"][0]
            ref = obj[1] if obj[0] == "iri" else obj[1][0]
        phrases.append(NifPhrase(begin, end, ref))
    phrases.sort(key=lambda p: (p.begin, p.end, p.ta_ident_ref or ""))
    return NifDocument(context_uri=context_uri, text=text, phrases=tuple(phrases))


def _escape_literal(value: str) -> str:
    return (
        value.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\r", "\\r")
        .replace("\t", "\\t")
    )


def entity_uri(entity: str, kb_prefix: str = DEFAULT_KB_PREFIX) -> str:
    """Knowledge-base URI for an entity identifier.

    Spaces become underscores (the identifier convention of the target KB);
    characters unsafe in an IRI are percent-encoded, underscores preserved.
    """
    return kb_prefix + urllib.parse.quote(entity.replace(" ", "_"), safe="_-.~()',:/!*")


def emit_nif(
    document: NifDocument,
    annotations: list[SpanAnnotation] | None = None,
    kb_prefix: str = DEFAULT_KB_PREFIX,
) -> str:
    """Serialize a context and its phrases deterministically.

    With ``annotations`` given, phrases are generated from them (entity URIs
    formed by prefixing); otherwise the document's own phrases are written.
    """
    text = document.text
    if annotations is not None:
        phrases = []
        for a in sorted(annotations, key=lambda s: (s.start, s.end)):
            if a.end > len(text):
                raise NifProtocolError(f"annotation [{a.start}, {a.end}) outside context")
            phrases.append(NifPhrase(a.start, a.end, entity_uri(a.entity, kb_prefix)))
    else:
        phrases = sorted(document.phrases, key=lambda p: (p.begin, p.end))

    base = document.context_uri.split("#")[0]
    out = [
        "@prefix nif: <" + NIF + "> .",
        "@prefix itsrdf: <" + ITSRDF + "> .",
        "@prefix xsd: <" + XSD + "> .",
        "",
        f"<{document.context_uri}> a nif:Context ;",
        f'    nif:beginIndex "0"^^xsd:nonNegativeInteger ;',
        f'    nif:endIndex "{len(text)}"^^xsd:nonNegativeInteger ;',
        f'    nif:isString "{_escape_literal(text)}" .',
    ]
    for p in phrases:
        uri = f"{base}#char={p.begin},{p.end}"
        if uri == document.context_uri:
            uri = f"{base}#phrase={p.begin},{p.end}"
        out.append("")
        out.append(f"<{uri}> a nif:Phrase ;")
        out.append(f"    nif:referenceContext <{document.context_uri}> ;")
        out.append(f'    nif:anchorOf "{_escape_literal(text[p.begin:p.end])}" ;')
        out.append(f'    nif:beginIndex "{p.begin}"^^xsd:nonNegativeInteger ;')
        out.append(f'    nif:endIndex "{p.end}"^^xsd:nonNegativeInteger' + (" ;" if p.ta_ident_ref else " ."))
        if p.ta_ident_ref:
            out.append(f"    itsrdf:taIdentRef <{p.ta_ident_ref}> .")
    return "\n".join(out) + "\n"
