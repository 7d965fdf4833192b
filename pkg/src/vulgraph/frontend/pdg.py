"""Program dependence graph assembly and serialization.

A Pdg is the per-method unit every later stage consumes: statement nodes
(with kind, canonical text, defs/uses, AST) plus data and control dependence
edges. Edge order is canonical: sorted by (src, dst, kind, var). ENTRY
control edges are dropped; only predicate statements act as control sources.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from ..util import dump_json
from .cfg import build_cfg
from .deps import control_dependences, data_dependences
from .parser import MethodAst, StmtNode, parse_method

PRED_KINDS = frozenset({"if-pred", "while-pred", "for-pred"})


@dataclass(frozen=True)
class PdgEdge:
    src: int
    dst: int
    kind: str  # "data" | "control"
    var: str | None = None

    def sort_key(self):
        return (self.src, self.dst, self.kind, self.var or "")


@dataclass
class Pdg:
    method: str
    nodes: list[StmtNode]
    edges: list[PdgEdge]
    # variable -> declared type, including parameters when built from source;
    # not serialized (decl statements carry enough to rebuild the rest)
    decl_types: dict = field(default_factory=dict)

    def neighbors(self, index: int, kind: str | None = None) -> list[int]:
        """Statements connected to `index` by an edge of `kind`, either
        direction, sorted ascending, deduplicated."""
        out: set[int] = set()
        for e in self.edges:
            if kind is not None and e.kind != kind:
                continue
            if e.src == index:
                out.add(e.dst)
            elif e.dst == index:
                out.add(e.src)
        out.discard(index)
        return sorted(out)


def build_pdg(method: MethodAst) -> Pdg:
    cfg = build_cfg(method)
    edges: set[PdgEdge] = set()
    for p, s in control_dependences(cfg):
        if p == cfg.entry:
            continue
        if method.stmts[p].kind not in PRED_KINDS:
            # only possible via synthetic repair edges on degenerate programs
            continue
        if p != s:
            edges.add(PdgEdge(p, s, "control", None))
    for d, u, v in data_dependences(cfg, method.stmts):
        if d != u:
            edges.add(PdgEdge(d, u, "data", v))
    return Pdg(
        method.name,
        list(method.stmts),
        sorted(edges, key=PdgEdge.sort_key),
        decl_types=dict(method.decl_types),
    )


def pdg_from_source(source: str) -> Pdg:
    return build_pdg(parse_method(source))


def pdg_to_dict(pdg: Pdg) -> dict:
    return {
        "method": pdg.method,
        "nodes": [
            {
                "index": s.index,
                "kind": s.kind,
                "text": s.text,
                "defs": list(s.defs),
                "uses": list(s.uses),
                "ast": s.ast,
            }
            for s in pdg.nodes
        ],
        "edges": [
            {"src": e.src, "dst": e.dst, "kind": e.kind, "var": e.var} for e in pdg.edges
        ],
    }


def pdg_to_json(pdg: Pdg) -> str:
    return dump_json(pdg_to_dict(pdg), indent=2)


def pdg_from_dict(data: dict) -> Pdg:
    nodes = [
        StmtNode(
            index=n["index"],
            kind=n["kind"],
            text=n["text"],
            defs=tuple(n["defs"]),
            uses=tuple(n["uses"]),
            ast=n["ast"],
            line=n.get("line", -1),
        )
        for n in sorted(data["nodes"], key=lambda n: n["index"])
    ]
    edges = sorted(
        (PdgEdge(e["src"], e["dst"], e["kind"], e.get("var")) for e in data["edges"]),
        key=PdgEdge.sort_key,
    )
    pdg = Pdg(data["method"], nodes, edges)
    pdg.decl_types = recover_decl_types(nodes)
    return pdg


def recover_decl_types(nodes: list[StmtNode]) -> dict[str, str]:
    """Variable static types readable off decl statements. Methods imported
    as bare PDGs lose parameter types; those variables fall back to UNK."""
    types: dict[str, str] = {}
    for node in nodes:
        if node.kind != "decl":
            continue
        type_text = node.ast[1][0][0][5:]
        dtor = node.ast[1][1]
        while not dtor[0].startswith("id:"):
            dtor = dtor[1][0]
        types.setdefault(dtor[0][3:], type_text)
    return types


def pdg_to_dot(pdg: Pdg) -> str:
    def esc(text: str) -> str:
        return text.replace("\\", "\\\\").replace('"', '\\"')

    lines = [f'digraph "{esc(pdg.method)}" {{', "  node [shape=box];"]
    for s in pdg.nodes:
        lines.append(f'  n{s.index} [label="{s.index}: {esc(s.text)}"];')
    for e in pdg.edges:
        if e.kind == "data":
            lines.append(f'  n{e.src} -> n{e.dst} [label="{esc(e.var or "")}"];')
        else:
            lines.append(f"  n{e.src} -> n{e.dst} [style=dashed];")
    lines.append("}")
    return "\n".join(lines) + "\n"
