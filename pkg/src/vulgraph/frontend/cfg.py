"""Control-flow graph construction.

Nodes are statement indices 0..n-1 plus synthetic ENTRY (= n) and EXIT
(= n+1). Edges carry a tag: seq, true, false, or jump (goto and return).
After structural construction two repairs enforce the graph contract: any
statement unreachable from ENTRY (dead code after return/goto) gains a
synthetic seq edge from ENTRY, and any statement that cannot reach EXIT
(non-terminating cycles) gains a synthetic seq edge to EXIT.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .parser import BlockItem, ForItem, IfItem, Leaf, MethodAst, WhileItem


@dataclass
class Cfg:
    n_stmts: int
    edges: list[tuple[int, int, str]]
    entry: int = field(init=False)
    exit: int = field(init=False)

    def __post_init__(self):
        self.entry = self.n_stmts
        self.exit = self.n_stmts + 1

    @property
    def nodes(self) -> list[int]:
        return list(range(self.n_stmts)) + [self.entry, self.exit]

    def successors(self) -> dict[int, list[int]]:
        succ: dict[int, list[int]] = {v: [] for v in self.nodes}
        for src, dst, _ in self.edges:
            if dst not in succ[src]:
                succ[src].append(dst)
        return succ

    def predecessors(self) -> dict[int, list[int]]:
        pred: dict[int, list[int]] = {v: [] for v in self.nodes}
        for src, dst, _ in self.edges:
            if src not in pred[dst]:
                pred[dst].append(src)
        return pred


def _reachable_from(succ: dict[int, list[int]], start: int) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        for w in succ[v]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def build_cfg(method: MethodAst) -> Cfg:
    n = len(method.stmts)
    entry, exit_ = n, n + 1
    edges: list[tuple[int, int, str]] = []
    seen_edges: set[tuple[int, int, str]] = set()

    def add(src: int, dst: int, tag: str) -> None:
        e = (src, dst, tag)
        if e not in seen_edges:
            seen_edges.add(e)
            edges.append(e)

    def connect(frontier: list[tuple[int, str]], target: int) -> None:
        for src, tag in frontier:
            add(src, target, tag)

    def walk(items: list, frontier: list[tuple[int, str]]) -> list[tuple[int, str]]:
        for item in items:
            frontier = walk_item(item, frontier)
        return frontier

    def walk_item(item, frontier: list[tuple[int, str]]) -> list[tuple[int, str]]:
        if isinstance(item, Leaf):
            s = item.stmt.index
            connect(frontier, s)
            if item.stmt.kind == "return":
                add(s, exit_, "jump")
                return []
            if item.stmt.kind == "goto":
                add(s, method.goto_targets[s], "jump")
                return []
            return [(s, "seq")]
        if isinstance(item, IfItem):
            p = item.pred.index
            connect(frontier, p)
            then_out = walk(item.then, [(p, "true")])
            else_out = walk(item.orelse, [(p, "false")]) if item.orelse else [(p, "false")]
            return then_out + else_out
        if isinstance(item, WhileItem):
            p = item.pred.index
            connect(frontier, p)
            body_out = walk(item.body, [(p, "true")])
            connect(body_out, p)
            return [(p, "false")]
        if isinstance(item, ForItem):
            if item.init is not None:
                connect(frontier, item.init.index)
                frontier = [(item.init.index, "seq")]
            p = item.pred.index
            connect(frontier, p)
            body_out = walk(item.body, [(p, "true")])
            if item.step is not None:
                connect(body_out, item.step.index)
                add(item.step.index, p, "seq")
            else:
                connect(body_out, p)
            return [(p, "false")]
        if isinstance(item, BlockItem):
            m = item.marker.index
            connect(frontier, m)
            return walk(item.body, [(m, "seq")])
        raise TypeError(f"unknown body item {item!r}")  # pragma: no cover

    tail = walk(method.body, [(entry, "seq")])
    connect(tail, exit_)

    cfg = Cfg(n, edges)

    # repair: EXIT reachable from every statement
    for node in range(n):
        succ = cfg.successors()
        if exit_ not in _reachable_from(succ, node):
            add(node, exit_, "seq")
            cfg = Cfg(n, edges)
    # repair: every statement reachable from ENTRY
    for node in range(n):
        succ = cfg.successors()
        if node not in _reachable_from(succ, entry):
            add(entry, node, "seq")
            cfg = Cfg(n, edges)
    return cfg
