"""Static information-flow analysis over storyboards.

The analysis builds the direct `influences` relation between qualified
identifiers, takes its reflexive-transitive closure, classifies untrusted
sources and sinks against the builtin catalog, collects declassified
(`safe`) edges, and reports integrity/confidentiality violations with a
deterministic witness path for each.

Guards never contribute control edges: all transition constraints are assumed
satisfiable, so only data positions induce flows.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

from .model import (
    OPERATION,
    AppModel,
    BAnd,
    BNot,
    BOp,
    BOr,
    Diagnostic,
    Literal,
    OperationUse,
    ParamRef,
    ProxyScreen,
    QualifiedId,
    Severity,
    SourceSpan,
    Trust,
    WidgetRef,
    builtin_cap,
    iter_operation_uses,
    qualify,
)

Edge = tuple[QualifiedId, QualifiedId]


@dataclass(frozen=True)
class InfluenceGraph:
    nodes: frozenset[QualifiedId]
    edges: frozenset[Edge]
    edge_origin: dict[Edge, Optional[SourceSpan]] = field(default_factory=dict)

    def out_edges(self, n: QualifiedId) -> list[Edge]:
        return sorted((e for e in self.edges if e[0] == n), key=lambda e: str(e[1]))

    def in_edges(self, n: QualifiedId) -> list[Edge]:
        return sorted((e for e in self.edges if e[1] == n), key=lambda e: str(e[0]))


@dataclass(frozen=True)
class ClosureRelation:
    pairs: frozenset[Edge]

    def __contains__(self, pair: Edge) -> bool:
        return pair in self.pairs


@dataclass(frozen=True)
class TrustMap:
    untrusted_sources: frozenset[QualifiedId]
    untrusted_sinks: frozenset[QualifiedId]
    untrusted_reachable: frozenset[QualifiedId]


@dataclass(frozen=True)
class SafeSet:
    edges: frozenset[Edge]


class FlowKind(Enum):
    INTEGRITY = "integrity"
    CONFIDENTIALITY = "confidentiality"


@dataclass(frozen=True)
class FlowViolation:
    kind: FlowKind
    source: QualifiedId
    sink: QualifiedId
    witness: tuple[QualifiedId, ...]


# ---------------------------------------------------------------------------
# Node roles


class Role(Enum):
    PARAM = "param"
    WIDGET = "widget"
    OP = "op"
    PROXY_PARAM = "proxy-param"


def node_roles(model: AppModel) -> dict[QualifiedId, Role]:
    roles: dict[QualifiedId, Role] = {}
    for s in model.screens:
        for p in s.all_params:
            roles[qualify(p, s.name)] = Role.PARAM
        for w in s.widgets:
            roles[qualify(w.id, s.name)] = Role.WIDGET
    for p in model.proxies:
        for pn in p.uri.params:
            roles[qualify(pn, p.name)] = Role.PROXY_PARAM
    for _, op in iter_operation_uses(model):
        roles[qualify(op.name, OPERATION)] = Role.OP
    return roles


def _value_node(v, owner: str) -> Optional[QualifiedId]:
    """The graph node a value reference denotes, or None for literals."""
    if isinstance(v, (ParamRef, WidgetRef)):
        return qualify(v.name, owner)
    if isinstance(v, OperationUse):
        return qualify(v.name, OPERATION)
    return None


# ---------------------------------------------------------------------------
# Step 1: direct influences


def build_influences(model: AppModel) -> InfluenceGraph:
    edges: set[Edge] = set()
    origin: dict[Edge, Optional[SourceSpan]] = {}

    def add(src: Optional[QualifiedId], dst: QualifiedId, span):
        if src is None:
            return  # literals induce no flow
        e = (src, dst)
        edges.add(e)
        origin.setdefault(e, span)

    def op_edges(op: OperationUse, owner: str):
        f = qualify(op.name, OPERATION)
        for a in op.args:
            add(_value_node(a.value, owner), f, op.span)
            if isinstance(a.value, OperationUse):
                op_edges(a.value, owner)

    def value_edges(v, owner: str, target: QualifiedId, span):
        add(_value_node(v, owner), target, span)
        if isinstance(v, OperationUse):
            op_edges(v, owner)

    def bool_edges(b, owner: str):
        if isinstance(b, BOp):
            op_edges(b.op, owner)
        elif isinstance(b, (BAnd, BOr)):
            bool_edges(b.left, owner)
            bool_edges(b.right, owner)
        elif isinstance(b, BNot):
            bool_edges(b.inner, owner)

    for s in model.screens:
        for w in s.widgets:
            value_edges(w.value, s.name, qualify(w.id, s.name), w.span)
        for t in s.transitions:
            if t.guard is not None:
                bool_edges(t.guard, s.name)
            for b in t.bindings:
                value_edges(b.value, s.name, qualify(b.target, t.dest), b.span or t.span)

    return InfluenceGraph(frozenset(node_roles(model)), frozenset(edges), origin)


# ---------------------------------------------------------------------------
# Step 2: reflexive-transitive closure (Warshall; the test oracle recomputes
# reachability by independent per-source search)


def closure(graph: InfluenceGraph) -> ClosureRelation:
    nodes = sorted(graph.nodes)
    reach: dict[QualifiedId, set[QualifiedId]] = {n: {n} for n in nodes}
    for a, b in graph.edges:
        reach.setdefault(a, {a}).add(b)
        reach.setdefault(b, {b})
    for k in reach:
        for a in reach:
            if k in reach[a]:
                reach[a] |= reach[k]
    return ClosureRelation(frozenset((a, b) for a, bs in reach.items() for b in bs))


def oracle_flows(model: AppModel) -> set[Edge]:
    """All-pairs reachability by naive per-source breadth-first search.

    Intentionally independent of closure(); used as its test oracle."""
    graph = build_influences(model)
    succ: dict[QualifiedId, list[QualifiedId]] = {}
    for a, b in graph.edges:
        succ.setdefault(a, []).append(b)
    out: set[Edge] = set()
    for src in graph.nodes:
        frontier = [src]
        seen = {src}
        while frontier:
            nxt = []
            for n in frontier:
                for m in succ.get(n, ()):
                    if m not in seen:
                        seen.add(m)
                        nxt.append(m)
            frontier = nxt
        for dst in seen:
            if dst != src:
                out.add((src, dst))
    return out


# ---------------------------------------------------------------------------
# Step 3: endpoint classification


def _op_source_untrusted(model: AppModel, op: OperationUse) -> bool:
    cap = builtin_cap(op.capability)
    if cap is not None:
        return cap.source_trust is Trust.UNTRUSTED
    if op.capability is not None:
        rn, _ = op.capability
        return model.resource(rn) is None  # foreign resource: untrusted both ways
    return False


def _op_sink_untrusted(model: AppModel, op: OperationUse) -> bool:
    cap = builtin_cap(op.capability)
    if cap is not None:
        return cap.sink_trust is Trust.UNTRUSTED
    if op.capability is not None:
        rn, _ = op.capability
        return model.resource(rn) is None
    return False


def classify_endpoints(model: AppModel) -> TrustMap:
    sources: set[QualifiedId] = set()
    sinks: set[QualifiedId] = set()

    for s in model.screens:
        for p in s.uri_params:
            sources.add(qualify(p, s.name))

    for _, op in iter_operation_uses(model):
        f = qualify(op.name, OPERATION)
        if _op_source_untrusted(model, op):
            sources.add(f)
        if _op_sink_untrusted(model, op):
            sinks.add(f)

    for p in model.proxies:
        if p.app_id is None and not p.safe:
            for pn in p.uri.params:
                sinks.add(qualify(pn, p.name))

    graph = build_influences(model)
    cl = closure(graph)
    reachable = {b for a, b in cl.pairs if a in sources}
    return TrustMap(frozenset(sources), frozenset(sinks), frozenset(reachable | sources))


# ---------------------------------------------------------------------------
# Step 4: declassified edges


def collect_safe(model: AppModel, graph: InfluenceGraph) -> tuple[SafeSet, list[Diagnostic]]:
    safe: set[Edge] = set()
    warnings: list[Diagnostic] = []

    def unused(what: str, span):
        warnings.append(
            Diagnostic(Severity.WARNING, "IF003", f"safe mark on {what} declassifies no flow", span)
        )

    def arg_safe_edges(op: OperationUse, owner: str):
        f = qualify(op.name, OPERATION)
        for a in op.args:
            if a.safe:
                src = _value_node(a.value, owner)
                if src is None:
                    unused(f"literal argument of operation '{op.name}'", op.span)
                else:
                    safe.add((src, f))
            if isinstance(a.value, OperationUse):
                arg_safe_edges(a.value, owner)

    def walk_value(v, owner: str):
        if isinstance(v, OperationUse):
            arg_safe_edges(v, owner)

    def walk_bool(b, owner: str):
        if isinstance(b, BOp):
            arg_safe_edges(b.op, owner)
        elif isinstance(b, (BAnd, BOr)):
            walk_bool(b.left, owner)
            walk_bool(b.right, owner)
        elif isinstance(b, BNot):
            walk_bool(b.inner, owner)

    for s in model.screens:
        for w in s.widgets:
            walk_value(w.value, s.name)
            if w.safe:
                wq = qualify(w.id, s.name)
                touched = False
                src = _value_node(w.value, s.name)
                if src is not None and (src, wq) in graph.edges:
                    safe.add((src, wq))
                    touched = True
                for e in graph.out_edges(wq):
                    safe.add(e)
                    touched = True
                if not touched:
                    unused(f"widget '{w.id}'", w.span)
        for t in s.transitions:
            if t.guard is not None:
                walk_bool(t.guard, s.name)
            for b in t.bindings:
                walk_value(b.value, s.name)
                if b.safe:
                    src = _value_node(b.value, s.name)
                    if src is None:
                        unused(f"binding of parameter '{b.target}'", b.span or t.span)
                    else:
                        safe.add((src, qualify(b.target, t.dest)))

    for p in model.proxies:
        if p.safe or p.app_id is not None:
            touched = False
            for pn in p.uri.params:
                for e in graph.in_edges(qualify(pn, p.name)):
                    safe.add(e)
                    touched = True
            if p.safe and not touched:
                unused(f"proxy '{p.name}'", p.span)

    return SafeSet(frozenset(safe)), warnings


# ---------------------------------------------------------------------------
# Step 5: violations


def _least_paths(start: QualifiedId, succ: dict[QualifiedId, list[QualifiedId]]):
    """Lexicographically least (by length, then node names) path from start to
    every reachable node, over the unsafe edge set.  Dijkstra with a composite
    key: extending a path only ever increases the key."""
    best: dict[QualifiedId, tuple[QualifiedId, ...]] = {}
    heap = [((1, (str(start),)), (start,))]
    while heap:
        (_, _), path = heapq.heappop(heap)
        node = path[-1]
        if node in best:
            continue
        best[node] = path
        for m in succ.get(node, ()):
            if m not in best:
                p2 = path + (m,)
                heapq.heappush(heap, ((len(p2), tuple(str(n) for n in p2)), p2))
    return best


def analyze(model: AppModel) -> list[FlowViolation]:
    graph = build_influences(model)
    trust = classify_endpoints(model)
    safe, _ = collect_safe(model, graph)
    roles = node_roles(model)

    unsafe = graph.edges - safe.edges
    succ: dict[QualifiedId, list[QualifiedId]] = {}
    for a, b in sorted(unsafe, key=lambda e: (str(e[0]), str(e[1]))):
        succ.setdefault(a, []).append(b)

    paths = {s: _least_paths(s, succ) for s in trust.untrusted_sources}

    found: dict[tuple[FlowKind, QualifiedId, QualifiedId], tuple[QualifiedId, ...]] = {}

    # Integrity: a widget or operation consumes, along an unsafe direct edge,
    # a value attributable to an untrusted source.
    for u, k in sorted(unsafe, key=lambda e: (str(e[1]), str(e[0]))):
        if roles.get(k) not in (Role.WIDGET, Role.OP):
            continue
        if roles.get(u) is Role.PARAM and u in trust.untrusted_reachable:
            pass
        elif roles.get(u) is Role.OP and u in trust.untrusted_sources:
            pass
        else:
            continue
        for s in sorted(trust.untrusted_sources):
            w = paths[s].get(k)
            if w is None or len(w) < 2:
                continue
            key = (FlowKind.INTEGRITY, s, k)
            if key not in found or (len(w), tuple(map(str, w))) < (len(found[key]), tuple(map(str, found[key]))):
                found[key] = w

    # Confidentiality: any value flowing unsafely into an untrusted sink.
    all_paths = {n: _least_paths(n, succ) for n in graph.nodes}
    for k in sorted(trust.untrusted_sinks):
        for s in sorted(graph.nodes):
            if s == k:
                continue
            w = all_paths[s].get(k)
            if w is not None and len(w) >= 2:
                found[(FlowKind.CONFIDENTIALITY, s, k)] = w

    return [
        FlowViolation(kind, s, k, found[(kind, s, k)])
        for kind, s, k in sorted(found, key=lambda t: (t[0].value, str(t[1]), str(t[2])))
    ]


def flow_diagnostics(model: AppModel) -> list[Diagnostic]:
    """Violations and unused-safe warnings rendered as diagnostics."""
    graph = build_influences(model)
    _, warnings = collect_safe(model, graph)
    out: list[Diagnostic] = []
    for v in analyze(model):
        code = "IF001" if v.kind is FlowKind.INTEGRITY else "IF002"
        last_edge = (v.witness[-2], v.witness[-1])
        span = graph.edge_origin.get(last_edge)
        what = "untrusted value reaches" if v.kind is FlowKind.INTEGRITY else "value leaks to untrusted sink"
        out.append(
            Diagnostic(
                Severity.ERROR,
                code,
                f"{what} '{v.sink}' from '{v.source}'",
                span,
                witness=v.witness,
            )
        )
    out.extend(warnings)
    return out
