"""Search-string language: parser, AST, and evaluation over references.

Grammar (full EBNF in docs/formats.md):

    query   = or ;
    or      = and , { OR , and } ;
    and     = not , { AND , not } ;
    not     = NOT , not | atom ;
    atom    = "(" , or , ")" | phrase | word ;
    phrase  = '"' , word , { word } , '"' ;
    word    = pattern with optional leading and/or trailing "*" ;

Operators are case-insensitive; precedence NOT > AND > OR; bare adjacency
(two atoms without an operator) is a syntax error, so multi-word groups must
be quoted phrases. Matching is over folded tokens (maximal runs of
letters/digits/hyphens, case-folded, diacritics stripped); `k-mean*` is one
pattern and matches the single token "k-means". Wildcards: `x` exact token,
`x*` prefix, `*x` suffix, `*x*` substring.
"""

from __future__ import annotations

from dataclasses import dataclass

from bibmap import kernel
from bibmap.errors import QuerySyntaxError
from bibmap.records import Corpus, Reference
from bibmap.textnorm import fold

# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class Pattern:
    """One wildcard pattern: folded needle plus match mode."""

    needle: str
    mode: int  # kernel.EXACT / PREFIX / SUFFIX / INFIX

    @classmethod
    def from_raw(cls, raw: str, position: int = 0) -> "Pattern":
        leading = raw.startswith("*")
        trailing = raw.endswith("*") and len(raw) > 1
        core = raw[1 if leading else 0: len(raw) - 1 if trailing else len(raw)]
        if not core:
            raise QuerySyntaxError(f"wildcard {raw!r} has no characters to match", position)
        if "*" in core:
            raise QuerySyntaxError(
                f"{raw!r}: * is only supported at the start or end of a word", position
            )
        if leading and trailing:
            mode = kernel.INFIX
        elif leading:
            mode = kernel.SUFFIX
        elif trailing:
            mode = kernel.PREFIX
        else:
            mode = kernel.EXACT
        return cls(needle=fold(core), mode=mode)

    @property
    def raw(self) -> str:
        star_front = self.mode in (kernel.SUFFIX, kernel.INFIX)
        star_back = self.mode in (kernel.PREFIX, kernel.INFIX)
        return f"{'*' if star_front else ''}{self.needle}{'*' if star_back else ''}"


@dataclass(frozen=True)
class Term:
    pattern: Pattern


@dataclass(frozen=True)
class Phrase:
    patterns: tuple[Pattern, ...]

    def __post_init__(self):
        if not self.patterns:
            raise ValueError("phrase requires at least one pattern")


@dataclass(frozen=True)
class And:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("AND requires at least two children")


@dataclass(frozen=True)
class Or:
    children: tuple

    def __post_init__(self):
        if len(self.children) < 2:
            raise ValueError("OR requires at least two children")


@dataclass(frozen=True)
class Not:
    child: object


QueryAst = Term | Phrase | And | Or | Not


@dataclass(frozen=True)
class FieldMask:
    """Which metadata fields a query runs over; at least one must be on."""

    title: bool = True
    abstract: bool = True
    keywords: bool = True

    def __post_init__(self):
        if not (self.title or self.abstract or self.keywords):
            raise ValueError("field mask must enable at least one field")

    @classmethod
    def from_names(cls, names) -> "FieldMask":
        names = {n.strip().lower() for n in names if n.strip()}
        unknown = names - {"title", "abstract", "keywords"}
        if unknown:
            raise ValueError(f"unknown mask fields: {sorted(unknown)}")
        return cls(title="title" in names, abstract="abstract" in names,
                   keywords="keywords" in names)

    def names(self) -> list[str]:
        out = []
        if self.title:
            out.append("title")
        if self.abstract:
            out.append("abstract")
        if self.keywords:
            out.append("keywords")
        return out


ALL_FIELDS = FieldMask()

# ---------------------------------------------------------------------------
# Lexer / parser

_LPAREN, _RPAREN, _WORD, _PHRASE, _AND, _OR, _NOT, _EOF = range(8)
_KEYWORDS = {"and": _AND, "or": _OR, "not": _NOT}


def _word_char(ch: str) -> bool:
    return ch.isalnum() or ch in "-*"


def _lex(text: str) -> list[tuple[int, object, int]]:
    tokens: list[tuple[int, object, int]] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch == "(":
            tokens.append((_LPAREN, "(", i))
            i += 1
        elif ch == ")":
            tokens.append((_RPAREN, ")", i))
            i += 1
        elif ch == '"':
            end = text.find('"', i + 1)
            if end == -1:
                raise QuerySyntaxError("unterminated phrase quote", n)
            words = text[i + 1: end].split()
            if not words:
                raise QuerySyntaxError("empty phrase", i)
            tokens.append((_PHRASE, words, i))
            i = end + 1
        elif _word_char(ch):
            start = i
            while i < n and _word_char(text[i]):
                i += 1
            word = text[start:i]
            kind = _KEYWORDS.get(word.casefold(), _WORD)
            tokens.append((kind, word, start))
        else:
            raise QuerySyntaxError(f"unexpected character {ch!r}", i)
    tokens.append((_EOF, None, n))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _lex(text)
        self.pos = 0

    def peek(self) -> tuple[int, object, int]:
        return self.tokens[self.pos]

    def take(self) -> tuple[int, object, int]:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def parse(self) -> QueryAst:
        node = self.parse_or()
        kind, value, pos = self.peek()
        if kind == _RPAREN:
            raise QuerySyntaxError("unbalanced closing parenthesis", pos)
        if kind != _EOF:
            raise QuerySyntaxError(
                f"expected AND/OR before {value!r} (operators are explicit)", pos
            )
        return node

    def parse_or(self) -> QueryAst:
        children = [self.parse_and()]
        while self.peek()[0] == _OR:
            self.take()
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self) -> QueryAst:
        children = [self.parse_not()]
        while self.peek()[0] == _AND:
            self.take()
            children.append(self.parse_not())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_not(self) -> QueryAst:
        if self.peek()[0] == _NOT:
            self.take()
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self) -> QueryAst:
        kind, value, pos = self.take()
        if kind == _LPAREN:
            if self.peek()[0] == _RPAREN:
                raise QuerySyntaxError("empty parentheses", self.peek()[2])
            node = self.parse_or()
            closing, _, cpos = self.take()
            if closing != _RPAREN:
                raise QuerySyntaxError("unbalanced parenthesis: expected )", cpos)
            return node
        if kind == _PHRASE:
            return Phrase(tuple(Pattern.from_raw(w, pos) for w in value))
        if kind == _WORD:
            return Term(Pattern.from_raw(value, pos))
        what = "end of input" if kind == _EOF else repr(value)
        raise QuerySyntaxError(f"expected a term, phrase, or ( but found {what}", pos)


def parse_query(text: str) -> QueryAst:
    """Parse a search string; raises QuerySyntaxError with a position."""
    if not text or not text.strip():
        raise QuerySyntaxError("empty query", 0)
    return _Parser(text).parse()


def format_query(node: QueryAst) -> str:
    """Render an AST back to parseable query text (parens kept explicit)."""
    if isinstance(node, Term):
        return node.pattern.raw
    if isinstance(node, Phrase):
        return '"' + " ".join(p.raw for p in node.patterns) + '"'
    if isinstance(node, Not):
        return f"NOT {_wrap(node.child)}"
    op = " AND " if isinstance(node, And) else " OR "
    return op.join(_wrap(c) for c in node.children)


def _wrap(node: QueryAst) -> str:
    if isinstance(node, (And, Or)):
        return f"({format_query(node)})"
    return format_query(node)


# ---------------------------------------------------------------------------
# Evaluation


def _sequences(ref: Reference, mask: FieldMask) -> list[list[str]]:
    """Token sequences the query sees: one per masked flat field, one per
    keyword string (phrases never span keyword boundaries)."""
    seqs = []
    if mask.title:
        seqs.append(kernel.tokenize(fold(ref.title)))
    if mask.abstract and ref.abstract:
        seqs.append(kernel.tokenize(fold(ref.abstract)))
    if mask.keywords:
        for kw in ref.keywords:
            seqs.append(kernel.tokenize(fold(kw)))
    return seqs


def _eval(node: QueryAst, seqs: list[list[str]]) -> bool:
    if isinstance(node, Term):
        p = node.pattern
        return any(kernel.seq_has_term(s, p.mode, p.needle) for s in seqs)
    if isinstance(node, Phrase):
        modes = [p.mode for p in node.patterns]
        needles = [p.needle for p in node.patterns]
        return any(kernel.seq_has_phrase(s, modes, needles) for s in seqs)
    if isinstance(node, And):
        return all(_eval(c, seqs) for c in node.children)
    if isinstance(node, Or):
        return any(_eval(c, seqs) for c in node.children)
    if isinstance(node, Not):
        return not _eval(node.child, seqs)
    raise TypeError(f"not a query node: {node!r}")


def match_reference(ref: Reference, ast: QueryAst, mask: FieldMask = ALL_FIELDS) -> bool:
    """True when the reference's masked fields satisfy the query."""
    return _eval(ast, _sequences(ref, mask))


def run_query(corpus: Corpus, ast: QueryAst,
              mask: FieldMask = ALL_FIELDS) -> tuple[list[str], int]:
    """Evaluate over a corpus; match ids in corpus order plus their count."""
    ids = [ref.id for ref in corpus.references if match_reference(ref, ast, mask)]
    return ids, len(ids)
