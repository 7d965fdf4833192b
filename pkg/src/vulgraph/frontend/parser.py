"""Recursive-descent parser for the mini-C subset.

parse_method turns one function definition into a MethodAst: a flat,
index-ordered list of statement nodes plus the structured body tree the CFG
builder walks. Statement kinds:

    decl assign call if-pred while-pred for-pred return goto label block-enter

Conditions of if/while/for become *-pred nodes whose ast is the condition
expression. A for header is desugared: the init clause precedes the pred and
the step clause becomes the last statement of the loop body.

def/use extraction is performed here, per statement, with the shallow alias
model: a field access base->f (or base.f) defines/uses the base identifier
plus the composite name "base.f"; a call f(a, &b) uses every argument
identifier and additionally defines any &-passed argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..errors import EmptyMethod, ParseError
from .lexer import TYPE_KEYWORDS, Token, tokenize
from .render import render_statement

ASSIGN_OPS = frozenset({"=", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "<<=", ">>="})

_BINARY_LEVELS = [
    ["||"],
    ["&&"],
    ["|"],
    ["^"],
    ["&"],
    ["==", "!="],
    ["<", "<=", ">", ">="],
    ["<<", ">>"],
    ["+", "-"],
    ["*", "/", "%"],
]

_UNARY_OPS = frozenset({"+", "-", "!", "~", "*", "&", "++", "--"})


@dataclass
class StmtNode:
    """One PDG-level statement."""

    index: int
    kind: str
    text: str
    defs: tuple[str, ...]
    uses: tuple[str, ...]
    ast: list
    line: int


# structured body items, used only for CFG construction
@dataclass
class Leaf:
    stmt: StmtNode


@dataclass
class IfItem:
    pred: StmtNode
    then: list
    orelse: list


@dataclass
class WhileItem:
    pred: StmtNode
    body: list


@dataclass
class ForItem:
    init: StmtNode | None
    pred: StmtNode
    step: StmtNode | None
    body: list


@dataclass
class BlockItem:
    marker: StmtNode
    body: list


@dataclass
class MethodAst:
    name: str
    params: list[tuple[str, str]]  # (type text, name)
    stmts: list[StmtNode]
    body: list = field(repr=False, default_factory=list)
    decl_types: dict[str, str] = field(default_factory=dict)
    labels: dict[str, int] = field(default_factory=dict)
    goto_targets: dict[int, int] = field(default_factory=dict)  # goto stmt -> label stmt


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # --- token plumbing -------------------------------------------------

    def peek(self, ahead: int = 0) -> Token | None:
        i = self.pos + ahead
        return self.tokens[i] if i < len(self.tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self.tokens[-1] if self.tokens else Token("punct", "", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.col)
        self.pos += 1
        return tok

    def at(self, kind: str, text: str | None = None, ahead: int = 0) -> bool:
        tok = self.peek(ahead)
        return tok is not None and tok.kind == kind and (text is None or tok.text == text)

    def expect(self, kind: str, text: str | None = None) -> Token:
        tok = self.peek()
        if tok is None or tok.kind != kind or (text is not None and tok.text != text):
            want = text if text is not None else kind
            got = tok.text if tok else "end of input"
            line, col = (tok.line, tok.col) if tok else (0, 0)
            raise ParseError(f"expected {want!r}, found {got!r}", line, col)
        return self.next()

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        line, col = (tok.line, tok.col) if tok else (0, 0)
        return ParseError(message, line, col)

    # --- types and declarators ------------------------------------------

    def at_type(self) -> bool:
        tok = self.peek()
        if tok is None:
            return False
        if tok.kind == "kw" and tok.text in TYPE_KEYWORDS:
            return True
        # identifier-typed declaration heuristic: IDENT IDENT / IDENT '*' IDENT
        if tok.kind == "id":
            nxt = self.peek(1)
            if nxt is not None and nxt.kind == "id":
                return True
            if nxt is not None and nxt.kind == "op" and nxt.text == "*":
                after = self.peek(2)
                if after is not None and after.kind in ("id",) and not self.at("punct", "(", 3):
                    # IDENT * IDENT not followed by '(' reads as a declaration
                    return True
        return False

    def parse_type_words(self) -> str:
        words = []
        while True:
            tok = self.peek()
            if tok is None:
                break
            if tok.kind == "kw" and tok.text in TYPE_KEYWORDS:
                self.next()
                words.append(tok.text)
                if tok.text in ("struct", "union", "enum"):
                    words.append(self.expect("id").text)
                continue
            if tok.kind == "id" and not words:
                self.next()
                words.append(tok.text)
                continue
            break
        if not words:
            raise self.error("expected type specifier")
        return " ".join(words)

    def parse_declarator(self) -> tuple[list, str]:
        """Return (declarator ast, declared name)."""
        stars = 0
        while self.at("op", "*"):
            self.next()
            stars += 1
        name_tok = self.expect("id")
        node: list = [f"id:{name_tok.text}", []]
        while self.at("punct", "["):
            self.next()
            if self.at("punct", "]"):
                self.next()
                node = ["arr", [node]]
            else:
                size = self.parse_expr()
                self.expect("punct", "]")
                node = ["arr", [node, size]]
        for _ in range(stars):
            node = ["ptr", [node]]
        return node, name_tok.text

    # --- expressions ------------------------------------------------------

    def parse_expr(self, level: int = 0) -> list:
        if level >= len(_BINARY_LEVELS):
            return self.parse_unary()
        node = self.parse_expr(level + 1)
        ops = _BINARY_LEVELS[level]
        while self.at("op") and self.peek().text in ops:
            op = self.next().text
            rhs = self.parse_expr(level + 1)
            node = [f"bin:{op}", [node, rhs]]
        return node

    def parse_unary(self) -> list:
        tok = self.peek()
        if tok is not None and tok.kind == "op" and tok.text in _UNARY_OPS:
            self.next()
            return [f"un:{tok.text}", [self.parse_unary()]]
        if tok is not None and tok.kind == "kw" and tok.text == "sizeof":
            self.next()
            self.expect("punct", "(")
            if self.at_type() or (self.at("kw") and self.peek().text in TYPE_KEYWORDS):
                inner: list = [f"type:{self.parse_type_words()}", []]
                while self.at("op", "*"):
                    self.next()
                    inner[0] += " *"
            else:
                inner = self.parse_expr()
            self.expect("punct", ")")
            return ["un:sizeof", [inner]]
        return self.parse_postfix(self.parse_primary())

    def parse_primary(self) -> list:
        tok = self.next()
        if tok.kind == "id":
            return [f"id:{tok.text}", []]
        if tok.kind == "int":
            return [f"int:{tok.text}", []]
        if tok.kind == "str":
            return [f"str:{tok.text}", []]
        if tok.kind == "char":
            return [f"char:{tok.text}", []]
        if tok.kind == "punct" and tok.text == "(":
            node = self.parse_expr()
            self.expect("punct", ")")
            return node
        raise ParseError(f"unexpected token {tok.text!r} in expression", tok.line, tok.col)

    def parse_postfix(self, node: list) -> list:
        while True:
            if self.at("punct", "("):
                if not node[0].startswith("id:"):
                    raise self.error("only simple names can be called")
                self.next()
                args = []
                if not self.at("punct", ")"):
                    args.append(self.parse_expr())
                    while self.at("punct", ","):
                        self.next()
                        args.append(self.parse_expr())
                self.expect("punct", ")")
                node = [f"call:{node[0][3:]}", args]
            elif self.at("punct", "["):
                self.next()
                sub = self.parse_expr()
                self.expect("punct", "]")
                node = ["index", [node, sub]]
            elif self.at("op", "->"):
                self.next()
                fld = self.expect("id").text
                node = [f"arrow:{fld}", [node]]
            elif self.at("op", "."):
                self.next()
                fld = self.expect("id").text
                node = [f"dot:{fld}", [node]]
            elif self.at("op", "++") or self.at("op", "--"):
                op = self.next().text
                node = [f"post:{op}", [node]]
            else:
                return node

    # --- statements -------------------------------------------------------

    def make_stmt(self, kind: str, ast: list, line: int) -> StmtNode:
        defs, uses = analyze_def_use(kind, ast)
        text = render_statement(kind, ast, abstract=False)
        return StmtNode(-1, kind, text, defs, uses, ast, line)

    def parse_block_body(self, method: "_MethodBuilder") -> list:
        self.expect("punct", "{")
        items: list = []
        while not self.at("punct", "}"):
            if self.peek() is None:
                raise self.error("unterminated block")
            items.extend(self.parse_statement(method))
        self.expect("punct", "}")
        return items

    def parse_body_or_single(self, method: "_MethodBuilder") -> list:
        if self.at("punct", "{"):
            return self.parse_block_body(method)
        return self.parse_statement(method)

    def parse_statement(self, method: "_MethodBuilder") -> list:
        tok = self.peek()
        if tok is None:
            raise self.error("unexpected end of input")
        if tok.kind == "punct" and tok.text == ";":
            self.next()
            return []
        if tok.kind == "punct" and tok.text == "{":
            marker = self.make_stmt("block-enter", ["block", []], tok.line)
            body = self.parse_block_body(method)
            return [BlockItem(marker, body)]
        if tok.kind == "kw":
            if tok.text == "if":
                return [self.parse_if(method)]
            if tok.text == "while":
                return [self.parse_while(method)]
            if tok.text == "for":
                return [self.parse_for(method)]
            if tok.text == "return":
                self.next()
                if self.at("punct", ";"):
                    self.next()
                    return [Leaf(self.make_stmt("return", ["return", []], tok.line))]
                expr = self.parse_expr()
                self.expect("punct", ";")
                return [Leaf(self.make_stmt("return", ["return", [expr]], tok.line))]
            if tok.text == "goto":
                self.next()
                target = self.expect("id").text
                self.expect("punct", ";")
                stmt = self.make_stmt("goto", [f"goto:{target}", []], tok.line)
                method.gotos.append((stmt, target, tok.line, tok.col))
                return [Leaf(stmt)]
            if tok.text in ("break", "continue", "do", "switch", "case", "default", "else"):
                raise ParseError(f"unsupported construct {tok.text!r}", tok.line, tok.col)
        # label: IDENT ':'
        if tok.kind == "id" and self.at("punct", ":", 1):
            self.next()
            self.next()
            stmt = self.make_stmt("label", [f"label:{tok.text}", []], tok.line)
            if tok.text in method.labels:
                raise ParseError(f"duplicate label {tok.text!r}", tok.line, tok.col)
            method.labels[tok.text] = stmt
            return [Leaf(stmt)]
        if self.at_type():
            return [Leaf(s) for s in self.parse_declaration(method)]
        return [Leaf(self.parse_expr_statement())]

    def parse_declaration(self, method: "_MethodBuilder") -> list[StmtNode]:
        tok = self.peek()
        type_text = self.parse_type_words()
        stmts = []
        while True:
            dtor, name = self.parse_declarator()
            children = [[f"type:{type_text}", []], dtor]
            if self.at("op", "="):
                self.next()
                children.append(self.parse_expr())
            stmts.append(self.make_stmt("decl", ["decl", children], tok.line))
            method.decl_types.setdefault(name, type_text)
            if self.at("punct", ","):
                self.next()
                continue
            break
        self.expect("punct", ";")
        return stmts

    def parse_expr_statement(self) -> StmtNode:
        tok = self.peek()
        expr = self.parse_unary_lvalue_or_expr()
        if self.at("op") and self.peek().text in ASSIGN_OPS:
            op = self.next().text
            rhs = self.parse_expr()
            self.expect("punct", ";")
            return self.make_stmt("assign", [f"assign:{op}", [expr, rhs]], tok.line)
        self.expect("punct", ";")
        if expr[0].startswith("call:"):
            return self.make_stmt("call", expr, tok.line)
        if expr[0].startswith("post:") or (
            expr[0].startswith("un:") and expr[0][3:] in ("++", "--")
        ):
            return self.make_stmt("assign", expr, tok.line)
        raise ParseError(
            "expression statement must be an assignment, call, or increment",
            tok.line,
            tok.col,
        )

    def parse_unary_lvalue_or_expr(self) -> list:
        # an expression statement can start with * or ++/-- (lvalue forms)
        return self.parse_expr()

    def parse_if(self, method: "_MethodBuilder") -> IfItem:
        tok = self.expect("kw", "if")
        self.expect("punct", "(")
        cond = self.parse_expr()
        self.expect("punct", ")")
        pred = self.make_stmt("if-pred", cond, tok.line)
        then = self.parse_body_or_single(method)
        orelse: list = []
        if self.at("kw", "else"):
            self.next()
            orelse = self.parse_body_or_single(method)
        return IfItem(pred, then, orelse)

    def parse_while(self, method: "_MethodBuilder") -> WhileItem:
        tok = self.expect("kw", "while")
        self.expect("punct", "(")
        cond = self.parse_expr()
        self.expect("punct", ")")
        pred = self.make_stmt("while-pred", cond, tok.line)
        body = self.parse_body_or_single(method)
        return WhileItem(pred, body)

    def parse_for(self, method: "_MethodBuilder") -> ForItem:
        tok = self.expect("kw", "for")
        self.expect("punct", "(")
        init: StmtNode | None = None
        if not self.at("punct", ";"):
            if self.at_type():
                decls = self.parse_declaration(method)  # consumes ';'
                if len(decls) != 1:
                    raise ParseError("for-init must declare one variable", tok.line, tok.col)
                init = decls[0]
            else:
                init = self.parse_simple_for_clause()
                self.expect("punct", ";")
        else:
            self.next()
        if self.at("punct", ";"):
            cond: list = ["int:1", []]
            self.next()
        else:
            cond = self.parse_expr()
            self.expect("punct", ";")
        pred = self.make_stmt("for-pred", cond, tok.line)
        step: StmtNode | None = None
        if not self.at("punct", ")"):
            step = self.parse_simple_for_clause()
        self.expect("punct", ")")
        body = self.parse_body_or_single(method)
        return ForItem(init, pred, step, body)

    def parse_simple_for_clause(self) -> StmtNode:
        tok = self.peek()
        expr = self.parse_expr()
        if self.at("op") and self.peek().text in ASSIGN_OPS:
            op = self.next().text
            rhs = self.parse_expr()
            return self.make_stmt("assign", [f"assign:{op}", [expr, rhs]], tok.line)
        if expr[0].startswith("call:"):
            return self.make_stmt("call", expr, tok.line)
        if expr[0].startswith("post:") or (
            expr[0].startswith("un:") and expr[0][3:] in ("++", "--")
        ):
            return self.make_stmt("assign", expr, tok.line)
        raise ParseError("for clause must be an assignment, call, or increment", tok.line, tok.col)


class _MethodBuilder:
    def __init__(self):
        self.labels: dict[str, StmtNode] = {}
        self.gotos: list[tuple[StmtNode, str, int, int]] = []
        self.decl_types: dict[str, str] = {}


# --- def/use extraction ----------------------------------------------------


def _field_prefixes(ast) -> list[str] | None:
    """For a pure id/field chain, the dotted prefixes: a->b.c -> [a, a.b, a.b.c]."""
    label, children = ast[0], ast[1]
    if label.startswith("id:"):
        return [label[3:]]
    if label.startswith("arrow:") or label.startswith("dot:"):
        base = _field_prefixes(children[0])
        if base is None:
            return None
        return base + [base[-1] + "." + label.split(":", 1)[1]]
    return None


def _walk_use(ast, defs: set, uses: set) -> None:
    label, children = ast[0], ast[1]
    prefixes = _field_prefixes(ast)
    if prefixes is not None:
        uses.update(prefixes)
        return
    if label.startswith("call:"):
        for arg in children:
            if arg[0] == "un:&":
                target = _field_prefixes(arg[1][0])
                if target is not None:
                    defs.update(target)
                    uses.update(target)
                    continue
            _walk_use(arg, defs, uses)
        return
    if label.startswith("post:") or (label.startswith("un:") and label[3:] in ("++", "--")):
        target = _field_prefixes(children[0])
        if target is not None:
            defs.update(target)
            uses.update(target)
            return
    if label == "index":
        _walk_use(children[0], defs, uses)
        _walk_use(children[1], defs, uses)
        return
    for child in children:
        if child and isinstance(child[0], str):
            _walk_use(child, defs, uses)


def _walk_def(ast, defs: set, uses: set) -> None:
    label, children = ast[0], ast[1]
    prefixes = _field_prefixes(ast)
    if prefixes is not None:
        defs.update(prefixes)
        uses.update(prefixes[:-1])  # reading the base chain locates the slot
        return
    if label == "index":
        base = _field_prefixes(children[0])
        if base is not None:
            defs.update(base)
            uses.update(base)
        else:
            _walk_use(children[0], defs, uses)
        _walk_use(children[1], defs, uses)
        return
    if label == "un:*":
        base = _field_prefixes(children[0])
        if base is not None:
            defs.update(base)
            uses.update(base)
        else:
            _walk_use(children[0], defs, uses)
        return
    _walk_use(ast, defs, uses)


def _declared_name(dtor) -> str:
    label, children = dtor[0], dtor[1]
    if label.startswith("id:"):
        return label[3:]
    return _declared_name(children[0])


def analyze_def_use(kind: str, ast) -> tuple[tuple[str, ...], tuple[str, ...]]:
    defs: set = set()
    uses: set = set()
    if kind == "decl":
        children = ast[1]
        defs.add(_declared_name(children[1]))
        # array size expressions are uses
        node = children[1]
        while node[0] in ("arr", "ptr"):
            if node[0] == "arr" and len(node[1]) > 1:
                _walk_use(node[1][1], defs, uses)
            node = node[1][0]
        if len(children) > 2:
            _walk_use(children[2], defs, uses)
    elif kind == "assign":
        if ast[0].startswith("assign:"):
            op = ast[0][7:]
            _walk_def(ast[1][0], defs, uses)
            if op != "=":  # compound assignment reads the left side
                _walk_use(ast[1][0], defs, uses)
            _walk_use(ast[1][1], defs, uses)
        else:  # inc/dec statement
            _walk_use(ast, defs, uses)
    elif kind in ("call", "if-pred", "while-pred", "for-pred"):
        _walk_use(ast, defs, uses)
    elif kind == "return":
        if ast[1]:
            _walk_use(ast[1][0], defs, uses)
    # goto / label / block-enter define and use nothing
    return tuple(sorted(defs)), tuple(sorted(uses))


# --- flattening and entry points --------------------------------------------


def _flatten(items: list, out: list[StmtNode]) -> None:
    for item in items:
        if isinstance(item, Leaf):
            out.append(item.stmt)
        elif isinstance(item, IfItem):
            out.append(item.pred)
            _flatten(item.then, out)
            _flatten(item.orelse, out)
        elif isinstance(item, WhileItem):
            out.append(item.pred)
            _flatten(item.body, out)
        elif isinstance(item, ForItem):
            if item.init is not None:
                out.append(item.init)
            out.append(item.pred)
            _flatten(item.body, out)
            if item.step is not None:
                out.append(item.step)
        elif isinstance(item, BlockItem):
            out.append(item.marker)
            _flatten(item.body, out)
        else:  # pragma: no cover
            raise TypeError(f"unknown body item {item!r}")


def parse_source(source: str) -> list[MethodAst]:
    """Parse every function definition in a source string."""
    parser = _Parser(tokenize(source))
    methods = []
    while parser.peek() is not None:
        methods.append(_parse_one(parser))
    return methods


def parse_method(source: str) -> MethodAst:
    """Parse source containing exactly one function definition."""
    methods = parse_source(source)
    if not methods:
        raise EmptyMethod("no function definition found")
    if len(methods) > 1:
        raise ParseError("expected a single function definition", 1, 1)
    return methods[0]


def _parse_one(parser: _Parser) -> MethodAst:
    ret_type = parser.parse_type_words()
    while parser.at("op", "*"):
        parser.next()
        ret_type += " *"
    name = parser.expect("id").text
    parser.expect("punct", "(")
    builder = _MethodBuilder()
    params: list[tuple[str, str]] = []
    if not parser.at("punct", ")"):
        if parser.at("kw", "void") and parser.at("punct", ")", 1):
            parser.next()
        else:
            while True:
                ptype = parser.parse_type_words()
                stars = 0
                while parser.at("op", "*"):
                    parser.next()
                    stars += 1
                pname = parser.expect("id").text
                while parser.at("punct", "["):
                    parser.next()
                    if not parser.at("punct", "]"):
                        parser.parse_expr()
                    parser.expect("punct", "]")
                full_type = ptype + (" " + "*" * stars if stars else "")
                params.append((full_type, pname))
                builder.decl_types.setdefault(pname, full_type)
                if parser.at("punct", ","):
                    parser.next()
                    continue
                break
    parser.expect("punct", ")")
    body = parser.parse_block_body(builder)

    stmts: list[StmtNode] = []
    _flatten(body, stmts)
    if not stmts:
        raise EmptyMethod(f"method {name!r} has no statements")
    for i, stmt in enumerate(stmts):
        stmt.index = i

    goto_targets: dict[int, int] = {}
    for stmt, target, line, col in builder.gotos:
        if target not in builder.labels:
            raise ParseError(f"undefined label {target!r}", line, col)
        goto_targets[stmt.index] = builder.labels[target].index

    return MethodAst(
        name=name,
        params=params,
        stmts=stmts,
        body=body,
        decl_types=dict(sorted(builder.decl_types.items())),
        labels={k: v.index for k, v in sorted(builder.labels.items())},
        goto_targets=goto_targets,
    )
