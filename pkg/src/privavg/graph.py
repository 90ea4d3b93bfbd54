"""Directed graphs with per-node round-robin transmission orders.

Edges are stored as (receiver, sender) pairs: the edge (j, i) lets node j
receive from node i.  Each node additionally carries a fixed priority order
over its out-neighbors, used by the protocol to pick mass-transfer targets
in a round-robin fashion.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

GENERATION_RETRY_BUDGET = 10_000


class GraphGenerationError(RuntimeError):
    """Rejection sampling failed to produce a strongly connected digraph."""


@dataclass(frozen=True, slots=True)
class Digraph:
    """Immutable digraph on nodes 0..n-1.

    out_order[j] lists j's out-neighbors in j's round-robin priority order;
    the position of a neighbor in that tuple is its transmission rank.
    """

    n: int
    edges: frozenset[tuple[int, int]]  # (receiver, sender)
    out_order: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got {self.n}")
        if len(self.out_order) != self.n:
            raise ValueError("out_order must have one entry per node")
        for dst, src in self.edges:
            if dst == src:
                raise ValueError(f"self-loop at node {dst}")
            if not (0 <= dst < self.n and 0 <= src < self.n):
                raise ValueError(f"edge ({dst}, {src}) out of range")
        for j in range(self.n):
            expected = {dst for dst, src in self.edges if src == j}
            order = self.out_order[j]
            if len(order) != len(set(order)) or set(order) != expected:
                raise ValueError(
                    f"out_order[{j}] is not a bijection onto the out-neighbors of {j}"
                )

    @property
    def m(self) -> int:
        return len(self.edges)

    def out_neighbors(self, j: int) -> tuple[int, ...]:
        return self.out_order[j]

    def in_neighbors(self, j: int) -> tuple[int, ...]:
        return tuple(sorted(src for dst, src in self.edges if dst == j))

    def out_degree(self, j: int) -> int:
        return len(self.out_order[j])

    def with_out_order(self, out_order: tuple[tuple[int, ...], ...]) -> "Digraph":
        return Digraph(self.n, self.edges, out_order)


def digraph_from_edges(n: int, edges, out_order=None) -> Digraph:
    """Build a digraph from (receiver, sender) pairs.

    Without an explicit out_order each node gets its out-neighbors in
    ascending id order.
    """
    pairs = [(int(d), int(s)) for d, s in edges]
    edge_set = frozenset(pairs)
    if len(edge_set) != len(pairs):
        raise ValueError("duplicate edge")
    if out_order is None:
        outs: list[list[int]] = [[] for _ in range(n)]
        for dst, src in sorted(edge_set):
            outs[src].append(dst)
        out_order = tuple(tuple(sorted(o)) for o in outs)
    return Digraph(n, edge_set, out_order)


def is_strongly_connected(g: Digraph) -> bool:
    """True iff every ordered node pair is joined by a directed path."""
    return _reaches_all(g, forward=True) and _reaches_all(g, forward=False)


def _reaches_all(g: Digraph, forward: bool) -> bool:
    if forward:
        adj = {j: list(g.out_order[j]) for j in range(g.n)}
    else:
        adj = {j: [] for j in range(g.n)}
        for dst, src in g.edges:
            adj[dst].append(src)
    seen = {0}
    stack = [0]
    while stack:
        u = stack.pop()
        for v in adj[u]:
            if v not in seen:
                seen.add(v)
                stack.append(v)
    return len(seen) == g.n


def max_out_degree(g: Digraph) -> int:
    """Network-wide maximum out-degree."""
    return max(g.out_degree(j) for j in range(g.n))


def generate_random_strongly_connected(
    n: int, p: float, rng: random.Random, max_attempts: int = GENERATION_RETRY_BUDGET
) -> Digraph:
    """Directed G(n, p) rejection-sampled until strongly connected.

    Each ordered pair (i, j), i != j, becomes an edge i -> j independently
    with probability p.  Out-edge orders are shuffled from the same rng, so
    the result is a pure function of (n, p, rng state).
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (0.0 < p <= 1.0):
        raise ValueError("p must be in (0, 1]")
    for _ in range(max_attempts):
        edges = set()
        for i in range(n):  # sender
            for j in range(n):  # receiver
                if i != j and rng.random() < p:
                    edges.add((j, i))
        g = digraph_from_edges(n, edges)
        if is_strongly_connected(g):
            return assign_edge_order(g, rng)
    raise GraphGenerationError(
        f"no strongly connected digraph after {max_attempts} attempts (n={n}, p={p})"
    )


def assign_edge_order(g: Digraph, rng: random.Random) -> Digraph:
    """Shuffle each node's out-neighbor priority order uniformly."""
    orders = []
    for j in range(g.n):
        order = sorted(g.out_order[j])
        rng.shuffle(order)
        orders.append(tuple(order))
    return g.with_out_order(tuple(orders))


# Edge-list text format: first line "n m", then m lines "src dst" where src
# is the sender and dst the receiver (the reverse of the in-memory pairs).

def format_edge_list(g: Digraph) -> str:
    lines = [f"{g.n} {g.m}"]
    for dst, src in sorted(g.edges, key=lambda e: (e[1], e[0])):
        lines.append(f"{src} {dst}")
    return "\n".join(lines) + "\n"


def parse_edge_list(text: str) -> Digraph:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty edge-list file")
    header = lines[0].split()
    if len(header) != 2:
        raise ValueError(f"bad header {lines[0]!r}, expected 'n m'")
    n, m = int(header[0]), int(header[1])
    if len(lines) - 1 != m:
        raise ValueError(f"header announces {m} edges, found {len(lines) - 1}")
    edges = set()
    for ln in lines[1:]:
        parts = ln.split()
        if len(parts) != 2:
            raise ValueError(f"bad edge line {ln!r}")
        src, dst = int(parts[0]), int(parts[1])
        if src == dst:
            raise ValueError(f"self-loop {src} -> {dst}")
        if not (0 <= src < n and 0 <= dst < n):
            raise ValueError(f"edge {src} -> {dst} out of range for n={n}")
        if (dst, src) in edges:
            raise ValueError(f"duplicate edge {src} -> {dst}")
        edges.add((dst, src))
    return digraph_from_edges(n, edges)


def load_edge_list(path) -> Digraph:
    return parse_edge_list(Path(path).read_text(encoding="ascii"))


def save_edge_list(g: Digraph, path) -> None:
    Path(path).write_text(format_edge_list(g), encoding="ascii")
