"""Uniform sampling of size-k independent sets and exact checks of the chains involved."""

from .count import SizeCountVector, SliceSpace, enumerate_slice, size_counts
from .graph import Graph, parse_graph, read_graph

__all__ = ["Graph", "SizeCountVector", "SliceSpace", "enumerate_slice", "parse_graph", "read_graph", "size_counts"]
__version__ = "0.1.0"
