"""Regenerate the shipped corpus: edge lists plus exact size-count fixtures."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from kslice.count import size_counts
from kslice.graph import (
    Graph,
    complete_graph,
    cycle_graph,
    disjoint_union,
    empty_graph,
    grid_graph,
    path_graph,
    random_bounded_degree_graph,
    serialize_graph,
)

OUT = Path(__file__).resolve().parents[1] / "src" / "kslice" / "corpus"


def star(leaves: int) -> Graph:
    return Graph.from_edges(leaves + 1, [(0, i) for i in range(1, leaves + 1)])


def petersen() -> Graph:
    edges = [(i, (i + 1) % 5) for i in range(5)] + [(i, i + 5) for i in range(5)]
    edges += [(5 + i, 5 + (i + 2) % 5) for i in range(5)]
    return Graph.from_edges(10, edges)


def graphs() -> dict[str, Graph]:
    rng = np.random.default_rng(20240611)
    return {
        "empty2": empty_graph(2),
        "empty4": empty_graph(4),
        "p3": path_graph(3),
        "k3": complete_graph(3),
        "c5": cycle_graph(5),
        "p6": path_graph(6),
        "c8": cycle_graph(8),
        "two_triangles": disjoint_union(complete_graph(3), complete_graph(3)),
        "triangle_plus_vertex": disjoint_union(complete_graph(3), empty_graph(1)),
        "edge_path_vertex": disjoint_union(path_graph(2), path_graph(3), empty_graph(1)),
        "three_paths": disjoint_union(path_graph(3), path_graph(3), path_graph(3)),
        "c4_c5": disjoint_union(cycle_graph(4), cycle_graph(5)),
        "star4_edge": disjoint_union(star(4), path_graph(2)),
        "grid2x4": grid_graph(2, 4),
        "petersen": petersen(),
        "random_d3_n10": random_bounded_degree_graph(10, 3, rng),
        "random_d4_n12": random_bounded_degree_graph(12, 4, rng),
        "random_sparse_d3_n14": random_bounded_degree_graph(14, 3, rng, density=0.45),
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    fixtures = {}
    for name, g in graphs().items():
        (OUT / f"{name}.txt").write_text(serialize_graph(g), encoding="utf-8")
        fixtures[name] = [str(c) for c in size_counts(g).counts]
    (OUT / "counts.json").write_text(json.dumps(fixtures, indent=1, sort_keys=True) + "\n", encoding="utf-8")


if __name__ == "__main__":
    main()
