"""Tokenizer for the mini-C subset.

Produces a flat token stream with 1-based line/column positions. Comments
(// and /* */) are discarded. See docs/grammar.md for the accepted language.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import IllegalCharacter, ParseError, UnterminatedString

KEYWORDS = frozenset(
    {
        "int", "char", "long", "short", "unsigned", "signed", "void",
        "float", "double", "struct", "union", "enum", "const", "static",
        "if", "else", "while", "for", "return", "goto", "sizeof",
        "break", "continue", "do", "switch", "case", "default",
    }
)

# declaration-leading keywords (type specifiers and storage classes)
TYPE_KEYWORDS = frozenset(
    {
        "int", "char", "long", "short", "unsigned", "signed", "void",
        "float", "double", "struct", "union", "enum", "const", "static",
    }
)

# longest match first
_OPERATORS = [
    "<<=", ">>=",
    "->", "++", "--", "<<", ">>", "<=", ">=", "==", "!=", "&&", "||",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=",
    "+", "-", "*", "/", "%", "<", ">", "=", "!", "&", "|", "^", "~", ".",
]

_PUNCT = "(){}[];,:"


@dataclass(frozen=True)
class Token:
    kind: str  # id | kw | int | str | char | punct | op
    text: str
    line: int
    col: int

    def __repr__(self):
        return f"Token({self.kind},{self.text!r},{self.line}:{self.col})"


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def advance(count: int):
        nonlocal i, line, col
        for _ in range(count):
            if source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = source[i]
        if c in " \t\r\n":
            advance(1)
            continue
        if source.startswith("//", i):
            while i < n and source[i] != "\n":
                advance(1)
            continue
        if source.startswith("/*", i):
            start_line, start_col = line, col
            advance(2)
            while i < n and not source.startswith("*/", i):
                advance(1)
            if i >= n:
                raise ParseError("unterminated block comment", start_line, start_col)
            advance(2)
            continue
        if c.isalpha() or c == "_":
            start = i
            start_line, start_col = line, col
            while i < n and (source[i].isalnum() or source[i] == "_"):
                advance(1)
            text = source[start:i]
            kind = "kw" if text in KEYWORDS else "id"
            tokens.append(Token(kind, text, start_line, start_col))
            continue
        if c.isdigit():
            start = i
            start_line, start_col = line, col
            if source.startswith(("0x", "0X"), i):
                advance(2)
                while i < n and (source[i].isdigit() or source[i] in "abcdefABCDEF"):
                    advance(1)
            else:
                while i < n and source[i].isdigit():
                    advance(1)
            while i < n and source[i] in "uUlL":  # integer suffixes
                advance(1)
            tokens.append(Token("int", source[start:i], start_line, start_col))
            continue
        if c == '"':
            start = i
            start_line, start_col = line, col
            advance(1)
            while i < n and source[i] != '"':
                if source[i] == "\n":
                    raise UnterminatedString(start_line, start_col)
                if source[i] == "\\" and i + 1 < n:
                    advance(2)
                else:
                    advance(1)
            if i >= n:
                raise UnterminatedString(start_line, start_col)
            advance(1)
            tokens.append(Token("str", source[start:i], start_line, start_col))
            continue
        if c == "'":
            start = i
            start_line, start_col = line, col
            advance(1)
            while i < n and source[i] != "'":
                if source[i] == "\n":
                    raise UnterminatedString(start_line, start_col)
                if source[i] == "\\" and i + 1 < n:
                    advance(2)
                else:
                    advance(1)
            if i >= n:
                raise UnterminatedString(start_line, start_col)
            advance(1)
            tokens.append(Token("char", source[start:i], start_line, start_col))
            continue
        if c in _PUNCT:
            tokens.append(Token("punct", c, line, col))
            advance(1)
            continue
        matched = False
        for op in _OPERATORS:
            if source.startswith(op, i):
                tokens.append(Token("op", op, line, col))
                advance(len(op))
                matched = True
                break
        if matched:
            continue
        raise IllegalCharacter(c, line, col)
    return tokens
