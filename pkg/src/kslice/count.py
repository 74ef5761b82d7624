"""Exact counting of independent sets by size.

The count vector ``a_0..a_n`` is the coefficient list of the independence
polynomial.  Two independent routes produce it: explicit enumeration (any graph
with at most 30 vertices) and a structured dynamic program for forests and
cycles (any size).  Pinning conditions on vertices being in or out of the set.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import mpmath

from .graph import Graph, bits, components, delete_closed_neighborhood, delete_vertex, induced_subgraph

BRUTE_FORCE_CAP = 30
PRECISION_DIGITS = 50


class CountingError(ValueError):
    pass


@dataclass(frozen=True)
class SizeCountVector:
    """``counts[j]`` = number of independent sets of size j (exact integers)."""

    counts: tuple[int, ...]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, j: int) -> int:
        if 0 <= j < len(self.counts):
            return self.counts[j]
        return 0

    @property
    def total(self) -> int:
        return sum(self.counts)

    @property
    def independence_number(self) -> int:
        return max((j for j, c in enumerate(self.counts) if c), default=-1)

    def to_json(self) -> str:
        return json.dumps([str(c) for c in self.counts])

    @classmethod
    def from_json(cls, text: str) -> SizeCountVector:
        return cls(tuple(int(s) for s in json.loads(text)))


@dataclass(frozen=True)
class PinSet:
    in_pins: frozenset[int] = frozenset()
    out_pins: frozenset[int] = frozenset()

    def __init__(self, in_pins: Iterable[int] = (), out_pins: Iterable[int] = ()):
        object.__setattr__(self, "in_pins", frozenset(in_pins))
        object.__setattr__(self, "out_pins", frozenset(out_pins))
        if self.in_pins & self.out_pins:
            raise ValueError("a vertex cannot be pinned both in and out")

    def validate(self, g: Graph) -> None:
        for v in self.in_pins | self.out_pins:
            if not 0 <= v < g.n:
                raise ValueError(f"pinned vertex {v} out of range")
        for v in self.in_pins:
            if set(g.adjacency[v]) & self.in_pins:
                raise ValueError("in_pins must form an independent set")


NO_PINS = PinSet()


# ---------------------------------------------------------------- polynomial helpers


def _poly_add(p: list[int], q: list[int]) -> list[int]:
    if len(p) < len(q):
        p, q = q, p
    out = list(p)
    for i, c in enumerate(q):
        out[i] += c
    return out


def _poly_mul(p: list[int], q: list[int]) -> list[int]:
    out = [0] * (len(p) + len(q) - 1)
    for i, a in enumerate(p):
        if a:
            for j, b in enumerate(q):
                out[i + j] += a * b
    return out


# ---------------------------------------------------------------- enumeration route


def iter_independent_sets(g: Graph, size: int | None = None):
    """Yield independent sets as bitmasks (each exactly once).

    With ``size`` given, only sets of that size are produced and branches that
    cannot reach it are pruned.
    """
    masks = g.masks
    full = (1 << g.n) - 1
    stack = [(0, full, 0)]
    while stack:
        chosen, avail, k = stack.pop()
        if size is None or k == size:
            yield chosen
            if size is not None:
                continue
        if size is not None and k + bin(avail).count("1") < size:
            continue
        a = avail
        while a:
            low = a & -a
            v = low.bit_length() - 1
            a ^= low
            # only vertices above v stay available: each set is built in increasing order
            rest = avail & ~((low << 1) - 1) & ~masks[v]
            stack.append((chosen | low, rest, k + 1))


def brute_force_counts(g: Graph) -> list[int]:
    if g.n > BRUTE_FORCE_CAP:
        raise CountingError(f"brute force limited to n <= {BRUTE_FORCE_CAP} (got n={g.n})")
    counts = [0] * (g.n + 1)
    for s in iter_independent_sets(g):
        counts[bin(s).count("1")] += 1
    return counts


# ---------------------------------------------------------------- structured route


def _is_tree(g: Graph) -> bool:
    return len(g.edges) == g.n - 1


def _is_cycle(g: Graph) -> bool:
    return g.n >= 3 and all(len(a) == 2 for a in g.adjacency)


def _tree_counts(g: Graph) -> list[int]:
    """Size-indexed in/out DP on a connected tree, rooted at vertex 0."""
    if g.n == 0:
        return [1]
    parent = [-1] * g.n
    order = [0]
    seen = [False] * g.n
    seen[0] = True
    for v in order:
        for w in g.adjacency[v]:
            if not seen[w]:
                seen[w] = True
                parent[w] = v
                order.append(w)
    occupied: list[list[int]] = [[0, 1] for _ in range(g.n)]
    vacant: list[list[int]] = [[1] for _ in range(g.n)]
    for v in reversed(order):
        p = parent[v]
        if p >= 0:
            occupied[p] = _poly_mul(occupied[p], vacant[v])
            vacant[p] = _poly_mul(vacant[p], _poly_add(occupied[v], vacant[v]))
    return _poly_add(occupied[0], vacant[0])


def _structured_component_counts(g: Graph) -> list[int]:
    if _is_tree(g):
        return _tree_counts(g)
    if _is_cycle(g):
        # condition on vertex 0: absent leaves a path, present removes its closed neighborhood
        out, _ = delete_vertex(g, 0)
        inn, _ = delete_closed_neighborhood(g, 0)
        return _poly_add(_forest_counts(out), [0] + _forest_counts(inn))
    raise CountingError("structured DP handles forests and cycles only")


def _forest_counts(g: Graph) -> list[int]:
    total = [1]
    for comp in components(g).components:
        sub, _ = induced_subgraph(g, comp)
        total = _poly_mul(total, _tree_counts(sub))
    return total


def is_structured(g: Graph) -> bool:
    for comp in components(g).components:
        sub, _ = induced_subgraph(g, comp)
        if not (_is_tree(sub) or _is_cycle(sub)):
            return False
    return True


def dp_counts(g: Graph) -> list[int]:
    total = [1]
    for comp in components(g).components:
        sub, _ = induced_subgraph(g, comp)
        total = _poly_mul(total, _structured_component_counts(sub))
    return total


def _auto_counts(g: Graph) -> list[int]:
    total = [1]
    for comp in components(g).components:
        sub, _ = induced_subgraph(g, comp)
        if _is_tree(sub) or _is_cycle(sub):
            part = _structured_component_counts(sub)
        elif sub.n <= BRUTE_FORCE_CAP:
            part = brute_force_counts(sub)
        else:
            raise CountingError(f"component of size {sub.n} is neither a forest/cycle nor brute-forceable")
        total = _poly_mul(total, part)
    return total


def residual_graph(g: Graph, pins: PinSet) -> tuple[Graph, tuple[int, ...]]:
    """Graph left after forcing in_pins in (their neighbors out) and out_pins out."""
    gone = set(pins.in_pins) | set(pins.out_pins)
    for v in pins.in_pins:
        gone.update(g.adjacency[v])
    return induced_subgraph(g, (v for v in range(g.n) if v not in gone))


def size_counts(g: Graph, pins: PinSet = NO_PINS, method: str = "auto") -> SizeCountVector:
    """Exact count vector, optionally conditioned on pins.

    ``method`` is ``"brute"`` (enumeration, n <= 30), ``"dp"`` (forests and
    cycles only) or ``"auto"`` (per-component choice).  With pins, index j
    counts sets of total size j including the in-pinned vertices.
    """
    pins.validate(g)
    h, _ = residual_graph(g, pins)
    if method == "brute":
        raw = brute_force_counts(h)
    elif method == "dp":
        if not is_structured(h):
            raise CountingError("structured DP needs every component to be a tree or a cycle")
        raw = dp_counts(h)
    elif method == "auto":
        raw = _auto_counts(h)
    else:
        raise ValueError(f"unknown method {method!r}")
    shift = len(pins.in_pins)
    out = [0] * (g.n + 1)
    for j, c in enumerate(raw):
        if c:
            out[j + shift] = c
    return SizeCountVector(tuple(out))


# ---------------------------------------------------------------- slices


@dataclass(frozen=True)
class SliceSpace:
    """Independent sets of size exactly k, as bitmasks in increasing order."""

    graph: Graph
    k: int
    states: tuple[int, ...]
    index: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.states)})

    def __len__(self):
        return len(self.states)

    def __iter__(self):
        return iter(self.states)

    def __getitem__(self, i: int) -> int:
        return self.states[i]

    def sets(self) -> list[list[int]]:
        return [bits(s) for s in self.states]


def enumerate_slice(g: Graph, k: int) -> SliceSpace:
    if g.n > BRUTE_FORCE_CAP:
        raise CountingError(f"slice enumeration limited to n <= {BRUTE_FORCE_CAP}")
    if not 0 <= k <= g.n:
        raise ValueError(f"k={k} outside [0, {g.n}]")
    return SliceSpace(g, k, tuple(sorted(iter_independent_sets(g, size=k))))


# ---------------------------------------------------------------- complex evaluation


def eval_Z(counts: SizeCountVector | Sequence[int], z) -> mpmath.mpc:
    """Horner evaluation of sum_j a_j z^j at 50 significant digits."""
    coeffs = counts.counts if isinstance(counts, SizeCountVector) else tuple(counts)
    with mpmath.workdps(PRECISION_DIGITS):
        z = mpmath.mpmathify(z)
        acc = mpmath.mpc(0)
        for c in reversed(coeffs):
            acc = acc * z + c
        return +acc


class VanishingDenominator(ZeroDivisionError):
    def __init__(self, point):
        self.point = point
        super().__init__(f"Z of G minus u vanishes at {point}")


def occupancy_ratio(g: Graph, u: int, lam, t=0) -> mpmath.mpc:
    """R_u = w * Z_{G^u}(w) / Z_{G^{u-bar}}(w) with w = lam * e^t."""
    g_in, _ = delete_closed_neighborhood(g, u)
    g_out, _ = delete_vertex(g, u)
    z_in = size_counts(g_in)
    z_out = size_counts(g_out)
    with mpmath.workdps(PRECISION_DIGITS):
        w = mpmath.mpmathify(lam) * mpmath.exp(mpmath.mpmathify(t))
        den = eval_Z(z_out, w)
        if den == 0:
            raise VanishingDenominator(w)
        return w * eval_Z(z_in, w) / den


@dataclass(frozen=True)
class ZeroProbeConfig:
    """Grid for probing |Z(lam e^t) / Z(lam)| near the positive axis.

    ``probe_radius`` stands in for the unknown zero-free radius; probes
    report, they never certify.
    """

    activity_grid: tuple[float, ...]
    probe_radius: float = 0.05
    angular_samples: int = 64
    contour_radii: tuple[float, ...] = ()
    tolerance: float = 1e-6

    def radii(self) -> tuple[float, ...]:
        return self.contour_radii or (self.probe_radius,)


@dataclass(frozen=True)
class ZeroProbeReport:
    min_modulus: float
    argmin: tuple[float, complex]
    near_zeros: tuple[tuple[float, complex, float], ...]
    points_evaluated: int


def _check_probe(g: Graph, cfg: ZeroProbeConfig) -> None:
    from .hardcore import critical_activity

    if not cfg.activity_grid:
        raise ValueError("activity grid must be non-empty")
    if cfg.probe_radius <= 0:
        raise ValueError("probe_radius must be positive")
    if cfg.angular_samples < 1:
        raise ValueError("angular_samples must be positive")
    limit = float(critical_activity(g.delta)) if g.delta >= 3 else float("inf")
    for lam in cfg.activity_grid:
        if not 0 <= lam < limit:
            raise ValueError(f"activity {lam} outside [0, lambda_c={limit})")


def _contour(cfg: ZeroProbeConfig):
    for r in cfg.radii():
        for s in range(cfg.angular_samples):
            yield r * mpmath.expjpi(2 * mpmath.mpf(s) / cfg.angular_samples)


def zero_free_probe(g: Graph, cfg: ZeroProbeConfig) -> ZeroProbeReport:
    _check_probe(g, cfg)
    counts = size_counts(g)
    best = None
    near = []
    evaluated = 0
    with mpmath.workdps(PRECISION_DIGITS):
        for lam in cfg.activity_grid:
            base = eval_Z(counts, lam)
            for t in _contour(cfg):
                mod = float(abs(eval_Z(counts, lam * mpmath.exp(t)) / base))
                evaluated += 1
                point = (float(lam), complex(t))
                if best is None or mod < best[0]:
                    best = (mod, point)
                if mod < cfg.tolerance:
                    near.append((point[0], point[1], mod))
    return ZeroProbeReport(best[0], best[1], tuple(near), evaluated)


def occupancy_ratio_probe(g: Graph, cfg: ZeroProbeConfig, vertices: Iterable[int] | None = None) -> float:
    """Largest |R_u(lam, t)| over the probe grid and the chosen vertices."""
    _check_probe(g, cfg)
    worst = 0.0
    for u in range(g.n) if vertices is None else vertices:
        g_in, _ = delete_closed_neighborhood(g, u)
        g_out, _ = delete_vertex(g, u)
        z_in, z_out = size_counts(g_in), size_counts(g_out)
        with mpmath.workdps(PRECISION_DIGITS):
            for lam in cfg.activity_grid:
                for t in _contour(cfg):
                    w = lam * mpmath.exp(t)
                    den = eval_Z(z_out, w)
                    if den == 0:
                        raise VanishingDenominator(w)
                    worst = max(worst, float(abs(w * eval_Z(z_in, w) / den)))
    return worst
