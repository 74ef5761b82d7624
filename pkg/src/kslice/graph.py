"""Bounded-degree graphs: parsing, components, goodness checks and vertex surgery.

Vertices are ``0..n-1``.  Graphs are immutable; every surgery returns a new
graph together with a ``new -> old`` relabeling tuple so that pins and
functions can be carried across.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

import numpy as np


class GraphFormatError(ValueError):
    """Raised for malformed edge-list documents (carries the 1-based line number)."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class Graph:
    n: int
    adjacency: tuple[tuple[int, ...], ...]
    delta: int

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("vertex count must be non-negative")
        if len(self.adjacency) != self.n:
            raise ValueError("adjacency must list every vertex")
        if self.delta < 1:
            raise ValueError("delta must be a positive integer")
        for v, nbrs in enumerate(self.adjacency):
            if list(nbrs) != sorted(set(nbrs)):
                raise ValueError(f"neighbors of {v} must be sorted and distinct")
            if v in nbrs:
                raise ValueError(f"self-loop at {v}")
            if len(nbrs) > self.delta:
                raise ValueError(f"degree of {v} exceeds delta={self.delta}")
            for w in nbrs:
                if not 0 <= w < self.n:
                    raise ValueError(f"neighbor {w} of {v} out of range")
                if v not in self.adjacency[w]:
                    raise ValueError(f"adjacency not symmetric at ({v}, {w})")

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], delta: int | None = None) -> Graph:
        nbrs: list[set[int]] = [set() for _ in range(n)]
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at {u}")
            nbrs[u].add(v)
            nbrs[v].add(u)
        observed = max((len(s) for s in nbrs), default=0)
        return cls(n, tuple(tuple(sorted(s)) for s in nbrs), delta if delta is not None else max(1, observed))

    @cached_property
    def masks(self) -> tuple[int, ...]:
        """Neighbor bitmask per vertex."""
        return tuple(sum(1 << w for w in nbrs) for nbrs in self.adjacency)

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        return tuple((u, v) for u in range(self.n) for v in self.adjacency[u] if u < v)

    @property
    def max_degree(self) -> int:
        return max((len(a) for a in self.adjacency), default=0)

    def degree(self, v: int) -> int:
        return len(self.adjacency[v])

    def is_independent(self, mask: int) -> bool:
        m = mask
        while m:
            low = m & -m
            v = low.bit_length() - 1
            if self.masks[v] & mask:
                return False
            m ^= low
        return True

    def with_delta(self, delta: int) -> Graph:
        return Graph(self.n, self.adjacency, delta)

    def __repr__(self):
        return f"Graph(n={self.n}, m={len(self.edges)}, delta={self.delta})"


@dataclass(frozen=True)
class ComponentDecomposition:
    components: tuple[tuple[int, ...], ...]
    sizes: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(len(c) for c in self.components))

    def label(self, n: int) -> list[int]:
        """Component index of every vertex."""
        out = [0] * n
        for i, comp in enumerate(self.components):
            for v in comp:
                out[v] = i
        return out


@dataclass(frozen=True)
class GoodnessReport:
    is_good: bool
    max_component_size: int
    component_count: int
    size_cap: float
    count_floor: int


# ---------------------------------------------------------------- parsing


def parse_graph(text: str, delta: int | None = None) -> Graph:
    """Parse an edge-list document: ``"n m"`` then ``m`` lines ``"u v"``.

    Blank lines are ignored.  Errors name the offending (1-based) line.
    """
    lines = [(i + 1, ln.split()) for i, ln in enumerate(text.splitlines())]
    lines = [(i, toks) for i, toks in lines if toks]
    if not lines:
        raise GraphFormatError("empty document", 1)
    lineno, header = lines[0]
    if len(header) != 2:
        raise GraphFormatError("header must be 'n m'", lineno)
    try:
        n, m = int(header[0]), int(header[1])
    except ValueError:
        raise GraphFormatError("header must hold two integers", lineno) from None
    if n < 0 or m < 0:
        raise GraphFormatError("negative count in header", lineno)
    body = lines[1:]
    if len(body) != m:
        where = body[m][0] if len(body) > m else (body[-1][0] + 1 if body else lineno + 1)
        raise GraphFormatError(f"expected {m} edge lines, found {len(body)}", where)
    seen: set[tuple[int, int]] = set()
    edges = []
    for lineno, toks in body:
        if len(toks) != 2:
            raise GraphFormatError("edge line must be 'u v'", lineno)
        try:
            u, v = int(toks[0]), int(toks[1])
        except ValueError:
            raise GraphFormatError("edge endpoints must be integers", lineno) from None
        if not (0 <= u < n and 0 <= v < n):
            raise GraphFormatError(f"vertex out of range in edge ({u}, {v})", lineno)
        if u == v:
            raise GraphFormatError(f"self-loop at vertex {u}", lineno)
        key = (min(u, v), max(u, v))
        if key in seen:
            raise GraphFormatError(f"duplicate edge {key}", lineno)
        seen.add(key)
        edges.append(key)
    g = Graph.from_edges(n, edges)
    if delta is not None:
        if delta < g.max_degree:
            raise GraphFormatError(f"declared delta={delta} below observed max degree {g.max_degree}")
        g = g.with_delta(delta)
    return g


def serialize_graph(g: Graph) -> str:
    """Canonical edge-list form: edges sorted lexicographically, LF endings."""
    out = [f"{g.n} {len(g.edges)}"]
    out.extend(f"{u} {v}" for u, v in sorted(g.edges))
    return "\n".join(out) + "\n"


def read_graph(path, delta: int | None = None) -> Graph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read(), delta)


# ---------------------------------------------------------------- structure


def components(g: Graph) -> ComponentDecomposition:
    seen = [False] * g.n
    comps = []
    for s in range(g.n):
        if seen[s]:
            continue
        seen[s] = True
        stack, comp = [s], []
        while stack:
            v = stack.pop()
            comp.append(v)
            for w in g.adjacency[v]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(w)
        comps.append(tuple(sorted(comp)))
    return ComponentDecomposition(tuple(comps))


def is_delta_good(g: Graph, count_floor_coeff: Fraction | float = Fraction(1, 16)) -> GoodnessReport:
    """Check largest component <= 1000*delta*ln(n) and component count >= ceil(coeff*n/delta)."""
    if g.n < 2:
        raise ValueError("goodness needs n >= 2")
    dec = components(g)
    cap = 1000 * g.delta * math.log(g.n)
    floor = math.ceil(Fraction(count_floor_coeff) * g.n / g.delta)
    biggest = max(dec.sizes)
    good = g.max_degree <= g.delta and biggest <= cap and len(dec.components) >= floor
    return GoodnessReport(good, biggest, len(dec.components), cap, floor)


def induced_subgraph(g: Graph, vertices: Iterable[int], delta: int | None = None) -> tuple[Graph, tuple[int, ...]]:
    """Subgraph on ``vertices`` relabeled in increasing order; returns (graph, new->old)."""
    keep = tuple(sorted(set(vertices)))
    for v in keep:
        if not 0 <= v < g.n:
            raise ValueError(f"vertex {v} out of range")
    index = {v: i for i, v in enumerate(keep)}
    adj = tuple(tuple(index[w] for w in g.adjacency[v] if w in index) for v in keep)
    return Graph(len(keep), adj, g.delta if delta is None else delta), keep


def delete_vertex(g: Graph, u: int) -> tuple[Graph, tuple[int, ...]]:
    """Remove ``u`` (the graph G^{u-bar}); returns (graph, new->old)."""
    if not 0 <= u < g.n:
        raise ValueError(f"vertex {u} out of range")
    return induced_subgraph(g, (v for v in range(g.n) if v != u))


def delete_closed_neighborhood(g: Graph, u: int) -> tuple[Graph, tuple[int, ...]]:
    """Remove ``u`` and all its neighbors (the graph G^u); returns (graph, new->old)."""
    if not 0 <= u < g.n:
        raise ValueError(f"vertex {u} out of range")
    gone = set(g.adjacency[u]) | {u}
    return induced_subgraph(g, (v for v in range(g.n) if v not in gone))


def random_subset_goodness_experiment(
    g: Graph,
    s_set: Iterable[int],
    ell: int,
    trials: int,
    seed: int = 0,
    count_floor_coeff: Fraction | float = Fraction(1, 16),
) -> float:
    """Fraction of uniform supersets W of ``s_set`` with |W| = ell whose induced graph is not delta-good."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    s = sorted(set(s_set))
    sub, _ = induced_subgraph(g, s)
    if any(size > 2 for size in components(sub).sizes):
        raise ValueError("components of g restricted to s_set must have size <= 2")
    if not len(s) <= ell <= g.n:
        raise ValueError("need |s_set| <= ell <= n")
    if ell < 2:
        raise ValueError("ell must be at least 2 for the goodness check")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0]))
    rest = np.array([v for v in range(g.n) if v not in set(s)], dtype=np.int64)
    failures = 0
    for _ in range(trials):
        extra = rng.choice(rest, size=ell - len(s), replace=False) if ell > len(s) else []
        w, _ = induced_subgraph(g, list(s) + [int(x) for x in extra])
        if not is_delta_good(w, count_floor_coeff).is_good:
            failures += 1
    return failures / trials


# ---------------------------------------------------------------- families


def empty_graph(n: int, delta: int = 1) -> Graph:
    return Graph(n, tuple(() for _ in range(n)), delta)


def path_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((i, i + 1) for i in range(n - 1)))


def cycle_graph(n: int) -> Graph:
    if n < 3:
        raise ValueError("cycles need n >= 3")
    return Graph.from_edges(n, [(i, (i + 1) % n) for i in range(n)])


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, ((i, j) for i in range(n) for j in range(i + 1, n)))


def disjoint_union(*graphs: Graph) -> Graph:
    edges, offset = [], 0
    for h in graphs:
        edges.extend((u + offset, v + offset) for u, v in h.edges)
        offset += h.n
    delta = max((h.delta for h in graphs), default=1)
    return Graph.from_edges(offset, edges, delta)


def grid_graph(rows: int, cols: int) -> Graph:
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return Graph.from_edges(rows * cols, edges)


def random_bounded_degree_graph(n: int, delta: int, rng: np.random.Generator, density: float = 1.0) -> Graph:
    """Greedy random graph: visit shuffled pairs, keep an edge while both degrees stay <= delta.

    ``density`` scales the target edge count ``density * delta * n / 2``.
    """
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    order = rng.permutation(len(pairs))
    target = int(density * delta * n / 2)
    deg = [0] * n
    edges = []
    for idx in order:
        if len(edges) >= target:
            break
        u, v = pairs[idx]
        if deg[u] < delta and deg[v] < delta:
            edges.append((u, v))
            deg[u] += 1
            deg[v] += 1
    return Graph.from_edges(n, edges, delta)


def bits(mask: int) -> list[int]:
    """Vertices of a bitmask, ascending."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def to_mask(vertices: Sequence[int] | Iterable[int]) -> int:
    m = 0
    for v in vertices:
        m |= 1 << v
    return m
