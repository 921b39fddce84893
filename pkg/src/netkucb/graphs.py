"""Communication graphs, graph powers, and the partitions the policies need.

Exact minimum clique covers and maximum independent sets are NP-hard; both
partitioning routines here are the deterministic greedy heuristics whose
outputs the policies consume.  The structural validity of their outputs
(disjoint cliques covering all vertices, independent respectively maximal
sets) is what correctness rests on, not optimality.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np


class Graph:
    """Undirected, connected, simple graph over vertex ids 0..V-1."""

    def __init__(self, n_vertices: int, edges):
        if n_vertices < 1:
            raise ValueError("graph needs at least one vertex")
        normalized = set()
        for u, v in edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < n_vertices and 0 <= v < n_vertices):
                raise ValueError(f"edge ({u},{v}) outside 0..{n_vertices - 1}")
            normalized.add((min(u, v), max(u, v)))
        self.V = n_vertices
        self.edges = frozenset(normalized)
        self._adj = [set() for _ in range(n_vertices)]
        for u, v in normalized:
            self._adj[u].add(v)
            self._adj[v].add(u)
        if n_vertices > 1 and len(_bfs_component(self._adj, 0)) != n_vertices:
            raise ValueError("graph must be connected")

    def neighbors(self, v: int):
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adj[u]

    def __eq__(self, other):
        return (
            isinstance(other, Graph)
            and self.V == other.V
            and self.edges == other.edges
        )

    def __hash__(self):
        return hash((self.V, self.edges))


def _bfs_component(adj, start):
    seen = {start}
    queue = deque([start])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in seen:
                seen.add(w)
                queue.append(w)
    return seen


def all_pairs_distances(g: Graph) -> np.ndarray:
    """Exact hop distances via one BFS per vertex."""
    D = np.zeros((g.V, g.V), dtype=np.int64)
    for s in range(g.V):
        dist = np.full(g.V, -1, dtype=np.int64)
        dist[s] = 0
        queue = deque([s])
        while queue:
            u = queue.popleft()
            for w in g.neighbors(u):
                if dist[w] < 0:
                    dist[w] = dist[u] + 1
                    queue.append(w)
        D[s] = dist
    return D


def diameter(g: Graph) -> int:
    return int(all_pairs_distances(g).max())


def graph_power(g: Graph, gamma: int) -> Graph:
    """Graph with an edge wherever the hop distance is between 1 and gamma."""
    if gamma < 1:
        raise ValueError("gamma must be >= 1")
    D = all_pairs_distances(g)
    ii, jj = np.nonzero((D >= 1) & (D <= gamma))
    edges = {(int(i), int(j)) for i, j in zip(ii, jj) if i < j}
    return Graph(g.V, edges)


@dataclass(frozen=True)
class CliqueCover:
    """Disjoint cliques of a target graph whose union is every vertex."""

    parts: tuple
    member: tuple  # vertex id -> clique index

    def clique_of(self, v: int) -> int:
        return self.member[v]

    def validate(self, g: Graph):
        seen = set()
        for part in self.parts:
            for v in part:
                if v in seen:
                    raise ValueError(f"vertex {v} covered twice")
                seen.add(v)
            for i, u in enumerate(part):
                for w in part[i + 1:]:
                    if not g.has_edge(u, w):
                        raise ValueError(f"({u},{w}) not an edge: not a clique")
        if seen != set(range(g.V)):
            raise ValueError("cover does not span all vertices")
        for v in range(g.V):
            if v not in self.parts[self.member[v]]:
                raise ValueError("membership map inconsistent with parts")


def greedy_clique_cover(g: Graph) -> CliqueCover:
    """Greedy cover: grow a clique from the lowest uncovered vertex.

    Each step adds the uncovered vertex adjacent to all current members with
    the most uncovered neighbors, ties broken by lowest id.  Deterministic in
    the vertex ordering.
    """
    uncovered = set(range(g.V))
    parts = []
    member = [-1] * g.V
    while uncovered:
        seed = min(uncovered)
        clique = [seed]
        uncovered.discard(seed)
        candidates = g.neighbors(seed) & uncovered
        while candidates:
            best = max(
                candidates,
                key=lambda v: (len(g.neighbors(v) & uncovered), -v),
            )
            clique.append(best)
            uncovered.discard(best)
            candidates = (candidates & g.neighbors(best)) - {best}
        clique.sort()
        for v in clique:
            member[v] = len(parts)
        parts.append(tuple(clique))
    return CliqueCover(parts=tuple(parts), member=tuple(member))


def greedy_max_weight_independent_set(g: Graph, weights) -> frozenset:
    """Greedy maximal independent set by descending weight, ties by lowest id."""
    available = set(range(g.V))
    chosen = set()
    while available:
        v = max(available, key=lambda u: (weights[u], -u))
        chosen.add(v)
        available.discard(v)
        available -= g.neighbors(v)
    return frozenset(chosen)


@dataclass(frozen=True)
class CentralAssignment:
    """Partition into central agents and peripherals that mimic them."""

    centrals: frozenset
    cent: dict  # peripheral -> assigned central
    delay: dict  # peripheral -> hop distance to its central in the base graph

    def validate(self, gpow: Graph):
        for u in self.centrals:
            for w in self.centrals:
                if u < w and gpow.has_edge(u, w):
                    raise ValueError("centrals are not independent in G_gamma")
        for p, c in self.cent.items():
            if not gpow.has_edge(p, c):
                raise ValueError(f"peripheral {p} not adjacent to central {c}")


def assign_peripherals(gpow: Graph, centrals, degrees, distances=None) -> CentralAssignment:
    """Map each non-central vertex to one adjacent central.

    Prefers the central of maximum degree in the power graph, ties broken by
    lowest id.  ``distances`` (base-graph hop counts) populates the delay map
    used for mimicry warm-up; power-graph adjacency alone decides coverage.
    """
    centrals = frozenset(int(v) for v in centrals)
    cent = {}
    delay = {}
    for p in range(gpow.V):
        if p in centrals:
            continue
        adjacent = [c for c in centrals if gpow.has_edge(p, c)]
        if not adjacent:
            raise ValueError(
                f"peripheral {p} has no adjacent central: independent set is "
                "not maximal"
            )
        c = max(adjacent, key=lambda u: (degrees[u], -u))
        cent[p] = c
        delay[p] = int(distances[p, c]) if distances is not None else 1
    return CentralAssignment(centrals=centrals, cent=cent, delay=delay)


def gen_erdos_renyi(V: int, p: float, seed: int, max_retries: int = 1000) -> Graph:
    """Connected Erdos-Renyi sample; resamples with derived seeds until connected."""
    if V < 2:
        raise ValueError("V must be >= 2")
    if not 0 < p <= 1:
        raise ValueError("p must be in (0, 1]")
    for attempt in range(max_retries):
        ss = np.random.SeedSequence(entropy=seed, spawn_key=(attempt,))
        rng = np.random.Generator(np.random.PCG64(ss))
        iu = np.triu_indices(V, k=1)
        mask = rng.random(len(iu[0])) < p
        edges = list(zip(iu[0][mask].tolist(), iu[1][mask].tolist()))
        try:
            return Graph(V, edges)
        except ValueError:
            continue
    raise ValueError(
        f"no connected sample after {max_retries} tries (V={V}, p={p})"
    )


def load_edge_list(text: str, subsample_to: int | None = None) -> Graph:
    """Parse a whitespace edge list ('#' comments allowed) into a Graph.

    Vertices are re-indexed densely in first-appearance order; duplicate and
    self-loop edges are dropped; only the largest connected component is
    kept.  With ``subsample_to``, a breadth-first ball grown from the
    lowest-id vertex (neighbors in ascending id) is retained instead, so the
    result is deterministic and connected.
    """
    index = {}
    edges = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        fields = stripped.split()
        if len(fields) != 2:
            raise ValueError(f"line {lineno}: expected two vertex ids, got {stripped!r}")
        try:
            raw_u, raw_v = int(fields[0]), int(fields[1])
        except ValueError:
            raise ValueError(f"line {lineno}: non-integer vertex id in {stripped!r}") from None
        for raw in (raw_u, raw_v):
            if raw not in index:
                index[raw] = len(index)
        u, v = index[raw_u], index[raw_v]
        if u != v:
            edges.add((min(u, v), max(u, v)))
    if not index:
        raise ValueError("edge list contains no edges")

    n = len(index)
    adj = [set() for _ in range(n)]
    for u, v in edges:
        adj[u].add(v)
        adj[v].add(u)
    remaining = set(range(n))
    components = []
    while remaining:
        comp = _bfs_component(adj, min(remaining))
        components.append(comp)
        remaining -= comp
    keep = max(components, key=lambda c: (len(c), -min(c)))

    if subsample_to is not None:
        if subsample_to < 1:
            raise ValueError("subsample size must be >= 1")
        start = min(keep)
        ball = [start]
        seen = {start}
        queue = deque([start])
        while queue and len(ball) < subsample_to:
            u = queue.popleft()
            for w in sorted(adj[u]):
                if w in seen or w not in keep:
                    continue
                seen.add(w)
                ball.append(w)
                queue.append(w)
                if len(ball) == subsample_to:
                    break
        keep = set(ball)

    relabel = {old: new for new, old in enumerate(sorted(keep))}
    kept_edges = [
        (relabel[u], relabel[v]) for u, v in edges if u in keep and v in keep
    ]
    return Graph(len(keep), kept_edges)
