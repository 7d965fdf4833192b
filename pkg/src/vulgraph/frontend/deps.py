"""Dependence analyses over the CFG.

Control dependence uses the post-dominator criterion: (p, s) holds iff s
post-dominates some successor of p but does not post-dominate p itself. A
virtual ENTRY->EXIT edge is added during the computation so statements that
always execute become dependent on ENTRY (the PDG later drops those edges).

Data dependence uses reaching definitions: (d, u, v) holds iff the definition
of v at d reaches the use of v at u along some CFG path with no intervening
redefinition. Definition sites are tracked as big-int bitsets. Self-loops
(a definition feeding the same statement around a cycle) are excluded to
match the dependence-graph contract.
"""

from __future__ import annotations

from .cfg import Cfg
from .parser import StmtNode


def postdominators(cfg: Cfg, virtual_entry_exit: bool = False) -> dict[int, frozenset[int]]:
    """Post-dominator sets per node; every node post-dominates itself."""
    succ = cfg.successors()
    if virtual_entry_exit and cfg.exit not in succ[cfg.entry]:
        succ = {k: list(v) for k, v in succ.items()}
        succ[cfg.entry].append(cfg.exit)
    nodes = cfg.nodes
    universe = set(nodes)
    pdom: dict[int, set[int]] = {v: set(universe) for v in nodes}
    pdom[cfg.exit] = {cfg.exit}
    changed = True
    while changed:
        changed = False
        for v in nodes:
            if v == cfg.exit:
                continue
            if succ[v]:
                new = set(universe)
                for s in succ[v]:
                    new &= pdom[s]
            else:  # unreachable-to-exit nodes are repaired upstream; be safe
                new = set()
            new.add(v)
            if new != pdom[v]:
                pdom[v] = new
                changed = True
    return {v: frozenset(s) for v, s in pdom.items()}


def control_dependences(cfg: Cfg) -> list[tuple[int, int]]:
    """Sorted (p, s) pairs; p may be cfg.entry."""
    succ = cfg.successors()
    succ = {k: list(v) for k, v in succ.items()}
    if cfg.exit not in succ[cfg.entry]:
        succ[cfg.entry].append(cfg.exit)
    pdom = postdominators(cfg, virtual_entry_exit=True)
    deps: set[tuple[int, int]] = set()
    for p in cfg.nodes:
        if p == cfg.exit or len(succ[p]) < 2:
            continue
        for u in succ[p]:
            for s in pdom[u]:
                if s == p or s == cfg.exit:
                    continue
                if s not in pdom[p]:
                    deps.add((p, s))
    return sorted(deps)


def reaching_definitions(
    cfg: Cfg, stmts: list[StmtNode]
) -> tuple[list[tuple[int, str]], dict[int, int]]:
    """Definition sites and the reaching-in bitset per statement.

    Returns (def_sites, in_sets) where def_sites[i] = (stmt_index, var) and
    in_sets maps each statement to a big-int whose bit i means def_sites[i]
    reaches the top of the statement.
    """
    def_sites: list[tuple[int, str]] = []
    for s in stmts:
        for v in s.defs:
            def_sites.append((s.index, v))
    site_bit = {site: i for i, site in enumerate(def_sites)}
    var_sites: dict[str, int] = {}
    for (idx, v), i in site_bit.items():
        var_sites[v] = var_sites.get(v, 0) | (1 << i)

    gen = {s.index: 0 for s in stmts}
    kill = {s.index: 0 for s in stmts}
    for s in stmts:
        for v in s.defs:
            gen[s.index] |= 1 << site_bit[(s.index, v)]
            kill[s.index] |= var_sites[v]

    preds = cfg.predecessors()
    in_sets = {s.index: 0 for s in stmts}
    out_sets = {v: 0 for v in cfg.nodes}
    changed = True
    while changed:
        changed = False
        for s in stmts:
            i = s.index
            new_in = 0
            for p in preds[i]:
                new_in |= out_sets[p]
            new_out = gen[i] | (new_in & ~kill[i])
            if new_in != in_sets[i] or new_out != out_sets[i]:
                in_sets[i] = new_in
                out_sets[i] = new_out
                changed = True
    return def_sites, in_sets


def data_dependences(cfg: Cfg, stmts: list[StmtNode]) -> list[tuple[int, int, str]]:
    """Sorted (def_stmt, use_stmt, var) triples, self-loops excluded."""
    def_sites, in_sets = reaching_definitions(cfg, stmts)
    by_var: dict[str, list[tuple[int, int]]] = {}
    for bit, (d, v) in enumerate(def_sites):
        by_var.setdefault(v, []).append((bit, d))
    deps: set[tuple[int, int, str]] = set()
    for s in stmts:
        reached = in_sets[s.index]
        for v in s.uses:
            for bit, d in by_var.get(v, ()):
                if d != s.index and (reached >> bit) & 1:
                    deps.add((d, s.index, v))
    return sorted(deps)
