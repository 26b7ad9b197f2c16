"""Structural algorithms on the model's graphs.

Covers maximal-clique enumeration, acyclicity of hypergraphs (Graham
reduction and running-intersection orderings), fill-in search that makes
the neighbor graph chordal while keeping the total clique state space
small, and a generalized d-separation test that remains valid when the
directed network contains cycles.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .model import BeliefNetwork, Model, NeighborGraph, neighbor_graph


@dataclass(frozen=True)
class Hypergraph:
    vertices: tuple[str, ...]
    hyperedges: tuple[frozenset[str], ...]

    def __post_init__(self):
        vs = set(self.vertices)
        for e in self.hyperedges:
            if not e:
                raise ValueError("empty hyperedge")
            if not e <= vs:
                raise ValueError(f"hyperedge {sorted(e)} not within vertices")


@dataclass(frozen=True)
class RipOrder:
    """Ordering of hyperedges where each set's overlap with all earlier
    ones fits inside a single earlier set (its anchor)."""

    order: tuple[frozenset[str], ...]
    anchors: tuple[int | None, ...]  # anchors[0] is None; anchors[i] < i

    def separator(self, i: int) -> frozenset[str]:
        earlier: set[str] = set()
        for s in self.order[:i]:
            earlier |= s
        return frozenset(self.order[i] & earlier)


@dataclass(frozen=True)
class Decomposition:
    fill_in: frozenset[frozenset[str]]
    cliques: tuple[frozenset[str], ...]
    rip: RipOrder
    cost: int  # sum over cliques of 2^|clique|


@dataclass(frozen=True)
class AnnealOptions:
    seed: int = 0
    initial_temperature: float | None = None  # None: set from random probes
    cooling: float = 0.95
    moves_per_temperature: int = 50
    restarts: int = 3

    def __post_init__(self):
        if self.initial_temperature is not None and not self.initial_temperature > 0:
            raise ValueError("initial temperature must be positive")
        if not 0.0 < self.cooling < 1.0:
            raise ValueError("cooling factor must be in (0, 1)")
        if self.moves_per_temperature < 1 or self.restarts < 1:
            raise ValueError("moves and restarts must be at least 1")


def _edge_key(e: frozenset[str]) -> tuple[str, ...]:
    return tuple(sorted(e))


def clique_cost(cliques: Iterable[frozenset[str]]) -> int:
    return sum(1 << len(c) for c in cliques)


def maximal_cliques(g: NeighborGraph) -> list[frozenset[str]]:
    """All inclusion-maximal complete subgraphs, sorted lexicographically.

    Bron-Kerbosch with pivoting; isolated vertices appear as singleton
    cliques.
    """
    adj = g.adjacency()
    found: list[frozenset[str]] = []

    def expand(r: set[str], p: set[str], x: set[str]) -> None:
        if not p and not x:
            found.append(frozenset(r))
            return
        pivot = max(sorted(p | x), key=lambda u: len(adj[u] & p))
        for v in sorted(p - adj[pivot]):
            expand(r | {v}, p & adj[v], x & adj[v])
            p.remove(v)
            x.add(v)

    expand(set(), set(g.nodes), set())
    return sorted(found, key=_edge_key)


def graham_acyclic(h: Hypergraph) -> bool:
    """True iff alternately deleting vertices that occur in exactly one
    hyperedge and hyperedges contained in another empties the
    hypergraph."""
    edges = [set(e) for e in h.hyperedges]
    changed = True
    while changed and edges:
        changed = False
        counts: dict[str, int] = {}
        for e in edges:
            for v in e:
                counts[v] = counts.get(v, 0) + 1
        for e in edges:
            lone = {v for v in e if counts[v] == 1}
            if lone:
                e -= lone
                changed = True
        kept: list[set[str]] = []
        for i, e in enumerate(edges):
            # drop empty edges and edges contained in another (one survivor
            # among exact duplicates)
            absorbed = not e or any(
                j != i and (e < edges[j] or (e == edges[j] and j < i))
                for j in range(len(edges))
            )
            if absorbed:
                changed = True
            else:
                kept.append(e)
        edges = kept
    return not edges


def rip_order(h: Hypergraph) -> RipOrder | None:
    """An ordering with the running-intersection property, or None.

    Searched by breadth-first extension over subsets of hyperedges: a set
    may be appended when its overlap with the union of the chosen ones
    lies inside a single chosen set.  Existence coincides with Graham
    reducibility.
    """
    edges = list(h.hyperedges)
    n = len(edges)
    if n == 0:
        return RipOrder((), ())
    unions: dict[int, frozenset[str]] = {0: frozenset()}
    parent: dict[int, tuple[int, int, int | None]] = {}  # state -> (prev, edge, anchor)
    frontier = [0]
    full = (1 << n) - 1
    seen = {0}
    while frontier:
        nxt = []
        for state in frontier:
            if state == full:
                break
            union = unions[state]
            for i in range(n):
                bit = 1 << i
                if state & bit or (state | bit) in seen:
                    continue
                inter = edges[i] & union
                anchor = None
                if state == 0:
                    ok = True
                else:
                    ok = False
                    for j in range(n):
                        if state & (1 << j) and inter <= edges[j]:
                            anchor, ok = j, True
                            break
                if ok:
                    new = state | bit
                    seen.add(new)
                    unions[new] = union | edges[i]
                    parent[new] = (state, i, anchor)
                    nxt.append(new)
        if full in seen:
            break
        frontier = nxt
    if full not in seen:
        return None
    chain: list[tuple[int, int | None]] = []
    state = full
    while state:
        prev, i, anchor = parent[state]
        chain.append((i, anchor))
        state = prev
    chain.reverse()
    index_of = {edge_i: pos for pos, (edge_i, _) in enumerate(chain)}
    order = tuple(edges[i] for i, _ in chain)
    anchors = tuple(None if a is None else index_of[a] for _, a in chain)
    return RipOrder(order, anchors)


def _is_complete(adj: dict[str, set[str]], vs: Iterable[str]) -> bool:
    vs = list(vs)
    return all(v in adj[u] for u, v in itertools.combinations(vs, 2))


def is_chordal(adj: dict[str, set[str]]) -> bool:
    """Simplicial-elimination test."""
    work = {v: set(ns) for v, ns in adj.items()}
    while work:
        for v in sorted(work):
            if _is_complete(work, work[v]):
                for u in work[v]:
                    work[u].discard(v)
                del work[v]
                break
        else:
            return False
    return True


def chordless_cycles(adj: dict[str, set[str]]) -> list[tuple[str, ...]]:
    """All chordless cycles of length >= 4, each reported once."""
    cycles = []
    vertices = sorted(adj)
    for s in vertices:
        # grow chordless paths from s through vertices > s
        stack: list[list[str]] = [[s, u] for u in sorted(adj[s]) if u > s]
        while stack:
            path = stack.pop()
            last = path[-1]
            for w in sorted(adj[last]):
                if w <= s or w in path:
                    continue
                # chordless: w may touch only the path tip (and s at closure)
                touches = adj[w].intersection(path[:-1])
                if touches - {s}:
                    continue
                if s in adj[w] and len(path) >= 3:
                    if path[1] < w:  # canonical direction
                        cycles.append(tuple(path + [w]))
                    continue
                stack.append(path + [w])
    return cycles


def _decomposition_from_fill(g: NeighborGraph, fill: Iterable[frozenset[str]]) -> Decomposition:
    fill = frozenset(fill)
    filled = NeighborGraph(g.nodes, frozenset(g.edges | fill))
    cliques = tuple(maximal_cliques(filled))
    rip = rip_order(Hypergraph(g.nodes, cliques))
    if rip is None:
        raise ValueError("fill-in did not produce an acyclic clique cover")
    return Decomposition(fill, cliques, rip, clique_cost(cliques))


def fill_in_greedy(g: NeighborGraph) -> Decomposition:
    """Minimum-fill elimination (ties by vertex name); chordal inputs get
    an empty fill."""
    adj = g.adjacency()
    work = {v: set(ns) for v, ns in adj.items()}
    fill: set[frozenset[str]] = set()

    def fill_needed(v: str) -> int:
        ns = sorted(work[v])
        return sum(1 for u, w in itertools.combinations(ns, 2) if w not in work[u])

    while work:
        v = min(sorted(work), key=fill_needed)
        ns = sorted(work[v])
        for u, w in itertools.combinations(ns, 2):
            if w not in work[u]:
                work[u].add(w)
                work[w].add(u)
                fill.add(frozenset({u, w}))
        for u in work[v]:
            work[u].discard(v)
        del work[v]
    return _decomposition_from_fill(g, fill)


def _candidate_edges(g: NeighborGraph) -> list[frozenset[str]]:
    return sorted(
        (frozenset({u, v}) for u, v in itertools.combinations(sorted(g.nodes), 2)
         if frozenset({u, v}) not in g.edges),
        key=_edge_key)


def _fill_state_cost(g: NeighborGraph, fill: set[frozenset[str]]) -> tuple[int, bool]:
    """Objective for annealing: clique cost, plus a penalty for each
    chordless cycle (its vertex set priced as one clique)."""
    filled = NeighborGraph(g.nodes, frozenset(g.edges | fill))
    adj = filled.adjacency()
    cost = clique_cost(maximal_cliques(filled))
    chordal = is_chordal(adj)
    if not chordal:
        cost += sum(1 << len(cyc) for cyc in chordless_cycles(adj))
    return cost, chordal


def fill_in_anneal(g: NeighborGraph, opts: AnnealOptions | None = None) -> Decomposition:
    """Simulated-annealing search over fill-edge subsets.

    Moves toggle one candidate edge; non-chordal states are admitted but
    penalized.  The search starts from the greedy solution and keeps the
    best chordal state seen, so the result never costs more than greedy.
    Deterministic for a fixed seed.
    """
    opts = opts or AnnealOptions()
    greedy = fill_in_greedy(g)
    candidates = _candidate_edges(g)
    best_fill = set(greedy.fill_in)
    best_key = (greedy.cost, len(best_fill), tuple(sorted(map(_edge_key, best_fill))))
    if not candidates:
        return greedy
    master = np.random.SeedSequence(opts.seed)
    for child in master.spawn(opts.restarts):
        rng = np.random.default_rng(child)
        state = set(greedy.fill_in)
        cur_cost, _ = _fill_state_cost(g, state)
        if opts.initial_temperature is None:
            probes = []
            for _ in range(20):
                probe = {e for e in candidates if rng.random() < 0.5}
                probes.append(_fill_state_cost(g, probe)[0])
            t = float(max(probes) - min(probes)) or 1.0
        else:
            t = opts.initial_temperature
        t_floor = max(t * 1e-3, 1e-6)
        while t > t_floor:
            for _ in range(opts.moves_per_temperature):
                e = candidates[rng.integers(len(candidates))]
                state.symmetric_difference_update([e])
                new_cost, chordal = _fill_state_cost(g, state)
                if new_cost <= cur_cost or rng.random() < math.exp((cur_cost - new_cost) / t):
                    cur_cost = new_cost
                    if chordal:
                        key = (new_cost, len(state), tuple(sorted(map(_edge_key, state))))
                        if key < best_key:
                            best_key = key
                            best_fill = set(state)
                else:
                    state.symmetric_difference_update([e])  # reject
            t *= opts.cooling
    return _decomposition_from_fill(g, best_fill)


def descendants(net: BeliefNetwork, x: str) -> frozenset[str]:
    """All variables reachable from x along directed paths of length >= 1;
    includes x itself only when x lies on a directed cycle."""
    if x not in net.nodes:
        raise ValueError(f"unknown variable {x!r}")
    out: set[str] = set()
    frontier = list(net.children(x))
    while frontier:
        v = frontier.pop()
        if v in out:
            continue
        out.add(v)
        frontier.extend(net.children(v))
    return frozenset(out)


def d_separated(net: BeliefNetwork, x: str, y: str, se: Iterable[str] = ()) -> bool:
    """Generalized d-separation, valid on graphs with directed cycles.

    Paths are simple undirected node sequences; where both arc directions
    exist between consecutive nodes, each choice counts as a distinct
    path.  A path is blocked when some pair of successive links is
    blocked: head-to-tail or tail-to-tail at z needs z in the separating
    set, head-to-head at z needs z and all its descendants outside it.
    Single-link paths have no link pair and are never blocked.
    """
    se = frozenset(se)
    if x == y:
        raise ValueError("x and y must differ")
    if x in se or y in se:
        raise ValueError("x and y must not be in the separating set")
    for v in (x, y, *se):
        if v not in net.nodes:
            raise ValueError(f"unknown variable {v!r}")

    und: dict[str, set[str]] = {v: set() for v in net.nodes}
    for u, v in net.edges:
        und[u].add(v)
        und[v].add(u)
    desc_hits = {v: bool(({v} | descendants(net, v)) & se) for v in net.nodes}

    def directions(u: str, v: str) -> list[bool]:
        # True: arrow u -> v (head at v); one entry per existing arc
        out = []
        if (u, v) in net.edges:
            out.append(True)
        if (v, u) in net.edges:
            out.append(False)
        return out

    def link_path_unblocked(nodes: list[str]) -> bool:
        options = [directions(nodes[i], nodes[i + 1]) for i in range(len(nodes) - 1)]
        for combo in itertools.product(*options):
            blocked = False
            for i in range(1, len(nodes) - 1):
                into_z = combo[i - 1]          # previous link points into z
                out_of_z = combo[i]            # next link points away from z
                z = nodes[i]
                if into_z and not out_of_z:    # head-to-head at z
                    if not desc_hits[z]:
                        blocked = True
                        break
                else:                          # head-to-tail or tail-to-tail
                    if z in se:
                        blocked = True
                        break
            if not blocked:
                return True
        return False

    stack: list[list[str]] = [[x]]
    while stack:
        path = stack.pop()
        last = path[-1]
        for w in sorted(und[last]):
            if w in path:
                continue
            if w == y:
                if link_path_unblocked(path + [w]):
                    return False
            else:
                stack.append(path + [w])
    return True


def decompose(model: Model, method: str = "greedy",
              opts: AnnealOptions | None = None) -> Decomposition:
    """Neighbor graph, fill-in, clique cover, and running-intersection
    order for a model, via the chosen fill-in search."""
    if not model.variables:
        raise ValueError("model has no variables")
    g = neighbor_graph(model)
    if method == "greedy":
        d = fill_in_greedy(g)
    elif method == "anneal":
        d = fill_in_anneal(g, opts)
    else:
        raise ValueError(f"unknown fill-in method {method!r}")
    for c in model.constraints:
        if not any(c.scope <= cl for cl in d.cliques):
            raise ValueError(
                f"constraint {c} fits in no clique of the decomposition; "
                "see the marginal scope-rule warnings")
    return d


@dataclass(frozen=True)
class GraphText:
    """Parsed graph/hypergraph description."""

    nodes: tuple[str, ...]
    edges: frozenset[frozenset[str]]
    arcs: frozenset[tuple[str, str]]
    hedges: tuple[frozenset[str], ...]

    def as_neighbor_graph(self) -> NeighborGraph:
        return NeighborGraph(self.nodes, self.edges)

    def as_belief_network(self) -> BeliefNetwork:
        return BeliefNetwork(self.nodes, self.arcs)

    def as_hypergraph(self) -> Hypergraph:
        return Hypergraph(self.nodes, self.hedges)


def parse_graph_text(text: str) -> GraphText:
    """Line format: `nodes A B C`, `edge A B`, `arc A B`, `hedge A C D`;
    '#' starts a comment."""
    nodes: list[str] = []
    edges: set[frozenset[str]] = set()
    arcs: set[tuple[str, str]] = set()
    hedges: list[frozenset[str]] = []
    for i, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kind, args = parts[0], parts[1:]
        if kind == "nodes":
            nodes.extend(args)
        elif kind == "edge":
            if len(args) != 2:
                raise ValueError(f"line {i}: 'edge' takes two nodes")
            edges.add(frozenset(args))
        elif kind == "arc":
            if len(args) != 2:
                raise ValueError(f"line {i}: 'arc' takes two nodes")
            arcs.add((args[0], args[1]))
        elif kind == "hedge":
            if not args:
                raise ValueError(f"line {i}: 'hedge' needs at least one node")
            hedges.append(frozenset(args))
        else:
            raise ValueError(f"line {i}: unknown directive {kind!r}")
    known = set(nodes)
    mentioned = set().union(*edges, *hedges) if (edges or hedges) else set()
    mentioned |= {v for arc in arcs for v in arc}
    missing = mentioned - known
    if missing:
        raise ValueError(f"nodes used but not declared: {sorted(missing)}")
    return GraphText(tuple(nodes), frozenset(edges), frozenset(arcs), tuple(hedges))


def format_decomposition(d: Decomposition) -> str:
    lines = []
    fill = sorted(map(_edge_key, d.fill_in))
    lines.append("fill-in: " + (", ".join("(%s,%s)" % e for e in fill) if fill else "none"))
    lines.append("cliques: " + "; ".join("{" + ",".join(sorted(c)) + "}" for c in d.cliques))
    rip_bits = []
    for i, s in enumerate(d.rip.order):
        a = d.rip.anchors[i]
        label = "{" + ",".join(sorted(s)) + "}"
        rip_bits.append(label if a is None else f"{label}<-{a}")
    lines.append("rip order: " + " ".join(rip_bits))
    lines.append(f"cost: {d.cost}")
    return "\n".join(lines) + "\n"
