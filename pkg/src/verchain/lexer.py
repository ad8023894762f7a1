"""Comment- and string-aware Solidity tokenizer and method-span extraction.

This is deliberately not a parser: comments and string literals are isolated
first, the rest is split into tokens, and method bodies are found by brace
matching.  That is enough for line and token based metrics and holds up
across compiler versions.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

KEYWORDS = frozenset("""
    pragma import as from using is contract interface library abstract function modifier constructor
    fallback receive event emit struct enum mapping error returns return if else for while do break
    continue try catch new delete public private internal external view pure payable constant
    immutable override virtual memory storage calldata indexed anonymous assembly unchecked type
    address bool string bytes byte int uint fixed ufixed var
    wei gwei szabo finney ether seconds minutes hours days weeks years throw
""".split())

_SIZED_TYPE = re.compile(r"^(u?int(8|16|24|32|40|48|56|64|72|80|88|96|104|112|120|128|136|144|152|160|168|176|"
                         r"184|192|200|208|216|224|232|240|248|256)|bytes([1-9]|[12][0-9]|3[0-2]))$")

# longest first
OPERATORS = sorted("""
    >>>= <<= >>= >>> ** ++ -- << >> && || == != <= >= += -= *= /= %= |= &= ^= => -> :=
    + - * / % = < > ! ~ & | ^ ? : .
""".split(), key=len, reverse=True)
PUNCTUATION = frozenset(";,(){}[]")
GROUPING = frozenset(";{}(),")
DECISION_WORDS = frozenset({"if", "while", "for", "do", "catch"})
METHOD_KEYWORDS = ("function", "modifier", "constructor", "fallback", "receive")

_IDENT = re.compile(r"[A-Za-z_$][A-Za-z0-9_$]*")
_NUMBER = re.compile(
    r"0[xX][0-9a-fA-F_]+|(?:\d[\d_]*(?:\.\d[\d_]*)?|\.\d[\d_]*)(?:[eE]-?\d[\d_]*)?"
)


class LexError(Exception):
    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


class UnterminatedComment(LexError):
    pass


class UnterminatedString(LexError):
    pass


class BraceImbalance(Exception):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # identifier | keyword | operator | literal | punctuation
    text: str
    line: int
    offset: int = 0


@dataclass(frozen=True)
class Comment:
    text: str
    start_line: int
    end_line: int
    style: str  # line | block
    offset: int = 0


@dataclass
class TokenStream:
    tokens: list[Token] = field(default_factory=list)
    comments: list[Comment] = field(default_factory=list)
    diagnostics: list[LexError] = field(default_factory=list)

    def texts(self) -> list[str]:
        return [t.text for t in self.tokens]


@dataclass
class MethodSpan:
    name: str
    kind: str
    start_line: int
    end_line: int
    body_tokens: TokenStream
    start_offset: int = 0
    end_offset: int = 0


def _is_keyword(word: str) -> bool:
    return word in KEYWORDS or bool(_SIZED_TYPE.match(word))


def _scan_string(source: str, start: int, line: int) -> tuple[int, int, bool]:
    """Return (end index exclusive, newlines crossed, terminated)."""
    quote = source[start]
    i = start + 1
    newlines = 0
    while i < len(source):
        ch = source[i]
        if ch == "\\":
            if i + 1 < len(source) and source[i + 1] == "\n":
                newlines += 1
            i += 2
            continue
        if ch == quote:
            return i + 1, newlines, True
        if ch == "\n":
            # a raw newline cannot appear inside a Solidity string
            return i, newlines, False
        i += 1
    return i, newlines, False


def tokenize(source: str) -> TokenStream:
    """Split Solidity source into code tokens and comments.

    Unterminated comments and strings are recorded in ``diagnostics`` and the
    scan carries on to the end of the input.
    """
    stream = TokenStream()
    tokens, comments = stream.tokens, stream.comments
    i, line, n = 0, 1, len(source)
    pragma_pending = 0  # 2: expect pragma name, 1: expect pragma value

    while i < n:
        ch = source[i]
        if ch == "\n":
            line += 1
            i += 1
            continue
        if ch.isspace():
            i += 1
            continue
        if source.startswith("//", i):
            end = source.find("\n", i)
            end = n if end == -1 else end
            comments.append(Comment(source[i:end], line, line, "line", i))
            i = end
            continue
        if source.startswith("/*", i):
            end = source.find("*/", i + 2)
            if end == -1:
                stream.diagnostics.append(UnterminatedComment("unterminated block comment", line))
                end = n
            else:
                end += 2
            text = source[i:end]
            comments.append(Comment(text, line, line + text.count("\n"), "block", i))
            line += text.count("\n")
            i = end
            continue

        if pragma_pending == 1:
            end = source.find(";", i)
            stop = n if end == -1 else end
            value = source[i:stop].rstrip()
            if value:
                tokens.append(Token("literal", " ".join(value.split()), line, i))
            line += source[i:stop].count("\n")
            i = stop
            pragma_pending = 0
            continue

        if ch in "\"'":
            end, crossed, ok = _scan_string(source, i, line)
            if not ok:
                stream.diagnostics.append(UnterminatedString("unterminated string literal", line))
            tokens.append(Token("literal", source[i:end], line, i))
            line += crossed
            i = end
            continue

        match = _IDENT.match(source, i)
        if match:
            word = match.group()
            end = match.end()
            if word in ("hex", "unicode") and end < n and source[end] in "\"'":
                str_end, crossed, ok = _scan_string(source, end, line)
                if not ok:
                    stream.diagnostics.append(UnterminatedString("unterminated string literal", line))
                tokens.append(Token("literal", source[i:str_end], line, i))
                line += crossed
                i = str_end
                continue
            if word in ("true", "false"):
                kind = "literal"
            elif _is_keyword(word):
                kind = "keyword"
            else:
                kind = "identifier"
            tokens.append(Token(kind, word, line, i))
            if word == "pragma":
                pragma_pending = 2
            elif pragma_pending == 2:
                pragma_pending = 1
            i = end
            continue
        pragma_pending = 0

        match = _NUMBER.match(source, i)
        if match and match.end() > i:
            tokens.append(Token("literal", match.group(), line, i))
            i = match.end()
            continue
        if ch in PUNCTUATION:
            tokens.append(Token("punctuation", ch, line, i))
            i += 1
            continue
        for op in OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token("operator", op, line, i))
                i += len(op)
                break
        else:
            # stray character (e.g. non-ASCII outside strings): keep it as an operator token
            tokens.append(Token("operator", ch, line, i))
            i += 1
    return stream


def render(stream: TokenStream) -> str:
    """Re-emit tokens on their original lines, separated by single spaces."""
    lines: list[str] = []
    current: list[str] = []
    line_no = 1
    for tok in stream.tokens:
        while line_no < tok.line:
            lines.append(" ".join(current))
            current = []
            line_no += 1
        current.append(tok.text)
    lines.append(" ".join(current))
    return "\n".join(lines)


def normalized_code(tokens: list[Token]) -> str:
    """Comment-free, whitespace-collapsed code text."""
    return " ".join(t.text for t in tokens)


def _method_header(tokens: list[Token], i: int) -> tuple[str, str] | None:
    """(kind, name) if tokens[i] opens a method declaration."""
    word = tokens[i].text
    nxt = tokens[i + 1] if i + 1 < len(tokens) else None
    if tokens[i].kind not in ("keyword",) or word not in METHOD_KEYWORDS or nxt is None:
        return None
    if word == "function":
        if nxt.kind == "identifier" or (nxt.kind == "keyword" and nxt.text in ("fallback", "receive")):
            return "function", nxt.text
        if nxt.text == "(":
            return "fallback", "fallback"  # pre-0.6 unnamed fallback
        return None
    if word == "modifier":
        return ("modifier", nxt.text) if nxt.kind == "identifier" else None
    if nxt.text != "(":
        return None
    return word, word


def extract_methods(stream: TokenStream) -> list[MethodSpan]:
    """Find function/modifier/constructor/fallback/receive spans by brace matching.

    A declaration terminated by ``;`` (interfaces, abstract functions) gives
    a span with no body tokens.  Raises :class:`BraceImbalance` when a body's
    braces never close.
    """
    tokens = stream.tokens
    spans: list[MethodSpan] = []
    paren = 0
    i = 0
    while i < len(tokens):
        tok = tokens[i]
        if tok.text == "(":
            paren += 1
        elif tok.text == ")":
            paren = max(paren - 1, 0)
        header = _method_header(tokens, i) if paren == 0 else None
        if header is None:
            i += 1
            continue
        kind, name = header
        j = i + 1
        depth = 0
        while j < len(tokens) and not (depth == 0 and tokens[j].text in ("{", ";")):
            if tokens[j].text == "(":
                depth += 1
            elif tokens[j].text == ")":
                depth -= 1
            j += 1
        if j == len(tokens):
            raise BraceImbalance(f"declaration of {name!r} at line {tok.line} never ends")
        if tokens[j].text == ";":
            end_tok = tokens[j]
            body: list[Token] = []
            end = j
        else:
            depth = 0
            k = j
            while k < len(tokens):
                if tokens[k].text == "{":
                    depth += 1
                elif tokens[k].text == "}":
                    depth -= 1
                    if depth == 0:
                        break
                k += 1
            if k == len(tokens):
                raise BraceImbalance(f"body of {name!r} opened at line {tokens[j].line} never closes")
            end_tok = tokens[k]
            body = tokens[j + 1:k]
            end = k
        body_comments = [c for c in stream.comments if tok.offset <= c.offset <= end_tok.offset]
        spans.append(MethodSpan(
            name=name, kind=kind, start_line=tok.line, end_line=end_tok.line,
            body_tokens=TokenStream(body, body_comments),
            start_offset=tok.offset, end_offset=end_tok.offset + len(end_tok.text),
        ))
        i = end + 1
    return spans
