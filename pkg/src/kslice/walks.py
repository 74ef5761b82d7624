"""Down-up walks on size-k independent sets, hard-core Glauber dynamics, and samplers.

Three down-up variants share one move ``I -> (I - u) + v``:

* ``metropolis``: u uniform in I, v uniform in V, hold unless the result is in I_k.
* ``hdx``: u uniform in I, then v uniform over every w with (I - u) + w in I_k
  (w = u included, so the walk keeps some laziness).
* ``modified``: u and v uniform in V; move only if they lie in different
  connected components and the result is in I_k.  Moves therefore need u in I.

Exact kernels are assembled with ``Fraction`` entries, then converted to a
sparse float matrix.  Simulation randomness comes from Philox streams keyed by
``(seed, chain_index)``, drawn in fixed-size batches, so a trajectory depends
only on its config.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import sparse

from .count import SliceSpace, enumerate_slice, size_counts
from .graph import Graph, bits, components

VARIANTS = ("metropolis", "hdx", "modified")
DEFAULT_MAX_STATES = 5000
ROW_TOL = 1e-14
BATCH = 4096


class KernelError(ValueError):
    pass


def chain_rng(seed: int, chain_index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed & (2**64 - 1), chain_index])))


# ---------------------------------------------------------------- kernels


@dataclass(frozen=True)
class Kernel:
    """Row-stochastic reversible transition matrix over an enumerated state list."""

    states: tuple
    P: sparse.csr_matrix
    pi: np.ndarray
    variant: str
    exact_rows: tuple | None = None  # per-row {column: Fraction}
    exact_pi: tuple | None = None
    space: SliceSpace | None = None
    index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {s: i for i, s in enumerate(self.states)})

    def __len__(self):
        return len(self.states)

    def dense(self) -> np.ndarray:
        return self.P.toarray()

    @classmethod
    def from_exact(cls, states, rows, pi, variant, space=None) -> Kernel:
        """Build from exact rows (list of {col: Fraction}) and exact stationary law."""
        m = len(states)
        r, c, v = [], [], []
        for i, row in enumerate(rows):
            for j, p in row.items():
                if p:
                    r.append(i)
                    c.append(j)
                    v.append(float(p))
        P = sparse.csr_matrix((v, (r, c)), shape=(m, m))
        kern = cls(tuple(states), P, np.array([float(p) for p in pi]), variant, tuple(rows), tuple(pi), space)
        check_kernel(kern)
        return kern

    @classmethod
    def from_dense(cls, matrix, pi=None, variant: str = "custom", states=None) -> Kernel:
        """Wrap a dense matrix; entries that are Fractions keep an exact copy."""
        rows = [list(r) for r in matrix]
        m = len(rows)
        exact = all(isinstance(x, (Fraction, int)) for r in rows for x in r)
        if pi is None:
            pi = stationary_distribution(np.array([[float(x) for x in r] for r in rows]))
        states = tuple(range(m)) if states is None else tuple(states)
        if exact and all(isinstance(x, (Fraction, int)) for x in pi):
            ex_rows = [{j: Fraction(x) for j, x in enumerate(r) if x} for r in rows]
            return cls.from_exact(states, ex_rows, [Fraction(x) for x in pi], variant)
        P = sparse.csr_matrix(np.array([[float(x) for x in r] for r in rows]))
        kern = cls(states, P, np.asarray(pi, dtype=float), variant)
        check_kernel(kern)
        return kern


def stationary_distribution(P: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eig(P.T)
    i = int(np.argmin(np.abs(w - 1)))
    pi = np.real(v[:, i])
    return pi / pi.sum()


def check_kernel(kern: Kernel, tol: float = ROW_TOL) -> None:
    """Row sums, non-negativity and detailed balance; exact when Fractions are present."""
    if kern.exact_rows is not None:
        for i, row in enumerate(kern.exact_rows):
            if any(p < 0 for p in row.values()):
                raise KernelError(f"negative entry in row {i}")
            if sum(row.values()) != 1:
                raise KernelError(f"row {i} sums to {sum(row.values())}")
        if kern.exact_pi is not None:
            if sum(kern.exact_pi) != 1:
                raise KernelError("stationary law does not sum to 1")
            for i, row in enumerate(kern.exact_rows):
                for j, p in row.items():
                    back = kern.exact_rows[j].get(i, 0)
                    if kern.exact_pi[i] * p != kern.exact_pi[j] * back:
                        raise KernelError(f"detailed balance fails at ({i}, {j})")
    P = kern.P
    sums = np.asarray(P.sum(axis=1)).ravel()
    if np.max(np.abs(sums - 1), initial=0) > tol:
        raise KernelError(f"row sums deviate from 1 by {np.max(np.abs(sums - 1))}")
    if P.nnz and P.data.min() < 0:
        raise KernelError("negative transition probability")
    flow = sparse.diags(kern.pi) @ P
    gap = abs(flow - flow.T)
    if gap.nnz and gap.max() > tol:
        raise KernelError(f"detailed balance violated by {gap.max()}")


def _component_labels(g: Graph) -> list[int]:
    return components(g).label(g.n)


def _down_up_row(g: Graph, x: int, k: int, variant: str, labels) -> dict[int, Fraction]:
    n, masks = g.n, g.masks
    row: dict[int, Fraction] = {}
    for u in bits(x):
        rest = x ^ (1 << u)
        valid = [w for w in range(n) if not (rest >> w) & 1 and not masks[w] & rest]
        if variant == "metropolis":
            weight = Fraction(1, k * n)
        elif variant == "hdx":
            weight = Fraction(1, k * len(valid))
        else:
            weight = Fraction(1, n * n)
        for w in valid:
            if w == u or (variant == "modified" and labels[w] == labels[u]):
                continue
            y = rest | (1 << w)
            row[y] = row.get(y, 0) + weight
    return row


def build_kernel(space: SliceSpace, variant: str, max_states: int = DEFAULT_MAX_STATES) -> Kernel:
    """Exact transition matrix of a down-up variant on an enumerated slice; pi is uniform."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if len(space) == 0:
        raise KernelError("slice is empty")
    if len(space) > max_states:
        raise KernelError(f"slice has {len(space)} states, cap is {max_states}")
    g, k = space.graph, space.k
    labels = _component_labels(g)
    rows = []
    for x in space.states:
        row = {} if k == 0 else _down_up_row(g, x, k, variant, labels)
        exact = {space.index[y]: p for y, p in row.items()}
        exact[space.index[x]] = 1 - sum(row.values())
        rows.append(exact)
    pi = [Fraction(1, len(space))] * len(space)
    return Kernel.from_exact(space.states, rows, pi, variant, space)


# ---------------------------------------------------------------- single steps


def _valid_additions(g: Graph, rest: int) -> list[int]:
    masks = g.masks
    return [w for w in range(g.n) if not (rest >> w) & 1 and not masks[w] & rest]


def step_down_up(g: Graph, I: int, variant: str, rng: np.random.Generator, labels=None) -> int:
    """One step of the chosen down-up variant from the independent set ``I`` (bitmask)."""
    if not g.is_independent(I):
        raise ValueError("state is not an independent set")
    members = bits(I)
    k = len(members)
    if k == 0:
        return I
    if variant == "metropolis":
        u = members[int(rng.integers(k))]
        v = int(rng.integers(g.n))
        return _metropolis_move(g, I, u, v)[0]
    if variant == "hdx":
        u = members[int(rng.integers(k))]
        rest = I ^ (1 << u)
        valid = _valid_additions(g, rest)
        return rest | (1 << valid[int(rng.integers(len(valid)))])
    if variant == "modified":
        labels = _component_labels(g) if labels is None else labels
        u, v = int(rng.integers(g.n)), int(rng.integers(g.n))
        return _modified_move(g, I, u, v, labels)
    raise ValueError(f"unknown variant {variant!r}")


def _metropolis_move(g: Graph, I: int, u: int, v: int) -> tuple[int, bool]:
    """Apply (I - u) + v if it stays in I_k; returns (state, proposal valid)."""
    if v == u:
        return I, True
    rest = I ^ (1 << u)
    if (rest >> v) & 1 or g.masks[v] & rest:
        return I, False
    return rest | (1 << v), True


def _modified_move(g: Graph, I: int, u: int, v: int, labels) -> int:
    if labels[u] == labels[v] or not (I >> u) & 1 or (I >> v) & 1:
        return I
    rest = I ^ (1 << u)
    if g.masks[v] & rest:
        return I
    return rest | (1 << v)


# ---------------------------------------------------------------- simulation


@dataclass(frozen=True)
class ChainConfig:
    variant: str = "metropolis"
    steps: int = 0
    seed: int = 0
    thinning: int = 1
    initial: str = "greedy"  # fixed | greedy | uniform
    initial_state: int | None = None
    chain_index: int = 0
    keep_trajectory: bool = False

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}")
        if self.steps < 0:
            raise ValueError("steps must be non-negative")
        if self.thinning < 1:
            raise ValueError("thinning must be positive")
        if self.initial not in ("fixed", "greedy", "uniform"):
            raise ValueError(f"unknown initial rule {self.initial!r}")


@dataclass
class TrajectorySummary:
    initial: int
    final: int
    visits: Counter
    proposals: int
    accepted: int  # proposals that produced a different state
    valid: int  # proposals whose (I - u) + v lies in I_k
    trajectory: list[int] | None = None


def greedy_initial(g: Graph, k: int) -> int:
    """Add the lowest-index vertex with no chosen neighbor until size k."""
    chosen, blocked, size = 0, 0, 0
    for v in range(g.n):
        if size == k:
            break
        if not (blocked >> v) & 1:
            chosen |= 1 << v
            blocked |= g.masks[v] | (1 << v)
            size += 1
    if size < k:
        raise ValueError(f"greedy construction stalls at size {size} < k={k}")
    return chosen


def initial_state(g: Graph, k: int, cfg: ChainConfig, rng: np.random.Generator) -> int:
    if cfg.initial == "fixed":
        if cfg.initial_state is None:
            raise ValueError("fixed initial rule needs initial_state")
        s = cfg.initial_state
        if not g.is_independent(s) or bin(s).count("1") != k:
            raise ValueError("initial_state is not in I_k(G)")
        return s
    if cfg.initial == "greedy":
        return greedy_initial(g, k)
    space = enumerate_slice(g, k)
    if not len(space):
        raise ValueError(f"no independent set of size {k}")
    return space[int(rng.integers(len(space)))]


def simulate(g: Graph, k: int, cfg: ChainConfig) -> TrajectorySummary:
    """Run one chain; visit counts are taken at t = 0, thinning, 2*thinning, ..."""
    rng = chain_rng(cfg.seed, cfg.chain_index)
    state = initial_state(g, k, cfg, rng)
    start = state
    visits = Counter({state: 1})
    traj = [state] if cfg.keep_trajectory else None
    labels = _component_labels(g)
    masks, n = g.masks, g.n
    proposals = accepted = valid_count = 0
    members = bits(state)
    done = 0
    while done < cfg.steps:
        size = min(BATCH, cfg.steps - done)
        if cfg.variant == "modified":
            us = rng.integers(n, size=size)
        else:
            us = rng.integers(max(k, 1), size=size)
        vs = rng.integers(n, size=size) if cfg.variant != "hdx" else rng.random(size)
        for t in range(size):
            if k:
                proposals += 1
                if cfg.variant == "metropolis":
                    u = members[us[t]]
                    nxt, ok = _metropolis_move(g, state, u, int(vs[t]))
                elif cfg.variant == "hdx":
                    u = members[us[t]]
                    rest = state ^ (1 << u)
                    cand = [w for w in range(n) if not (rest >> w) & 1 and not masks[w] & rest]
                    nxt, ok = rest | (1 << cand[int(vs[t] * len(cand))]), True
                else:
                    nxt = _modified_move(g, state, int(us[t]), int(vs[t]), labels)
                    ok = nxt != state
                valid_count += ok
                if nxt != state:
                    accepted += 1
                    state = nxt
                    members = bits(state)
            step = done + t + 1
            if step % cfg.thinning == 0:
                visits[state] += 1
                if traj is not None:
                    traj.append(state)
        done += size
    return TrajectorySummary(start, state, visits, proposals, accepted, valid_count, traj)


def write_trajectory(path, states: Sequence[int]) -> None:
    """Newline-delimited hexadecimal bitmasks."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in states:
            fh.write(f"{s:x}\n")


@dataclass(frozen=True)
class AcceptanceEstimate:
    rate: float
    stderr: float
    proposals: int
    precondition_met: bool

    def meets_bound(self, bound: float = 1 / 17) -> bool:
        return self.rate >= bound - 3 * self.stderr


def acceptance_rate(g: Graph, k: int, cfg: ChainConfig) -> AcceptanceEstimate:
    """Fraction of metropolis proposals that move the chain, with its standard error.

    The precondition k <= 16n / (17(delta+1)) is reported, not enforced.
    """
    cfg = ChainConfig("metropolis", cfg.steps, cfg.seed, cfg.thinning, cfg.initial, cfg.initial_state, cfg.chain_index)
    out = simulate(g, k, cfg)
    if out.proposals == 0:
        raise ValueError("no proposals observed")
    rate = out.accepted / out.proposals
    stderr = math.sqrt(max(rate * (1 - rate), 1e-300) / out.proposals)
    ok = 17 * (g.delta + 1) * k <= 16 * g.n
    return AcceptanceEstimate(rate, stderr, out.proposals, ok)


def exact_acceptance_rate(kern: Kernel) -> Fraction:
    """Stationary probability that a step moves: sum_x pi(x) (1 - P(x, x))."""
    return sum(p * (1 - row.get(i, 0)) for i, (p, row) in enumerate(zip(kern.exact_pi, kern.exact_rows)))


# ---------------------------------------------------------------- hard-core sampling


def _glauber_run(g: Graph, lam: float, state: int, steps: int, rng: np.random.Generator, check: bool = False) -> int:
    p_occ = lam / (1 + lam)
    masks, n = g.masks, g.n
    done = 0
    while done < steps:
        size = min(BATCH, steps - done)
        vs = rng.integers(n, size=size).tolist()
        coins = (rng.random(size) < p_occ).tolist()
        for v, c in zip(vs, coins):
            bit = 1 << v
            if c and not masks[v] & state:
                state |= bit
            else:
                state &= ~bit
            if check and not g.is_independent(state):
                raise AssertionError("Glauber produced a dependent set")
        done += size
    return state


def glauber_hardcore(g: Graph, lam, steps: int, seed: int = 0, start: int = 0, check: bool = False) -> int:
    """Heat-bath dynamics for the hard-core model; returns the final configuration."""
    if not lam > 0:
        raise ValueError("activity must be positive")
    if g.n == 0 or steps == 0:
        return start
    return _glauber_run(g, float(lam), start, steps, chain_rng(seed), check)


def default_burn_in(n: int) -> int:
    return max(1, math.ceil(10 * n * math.log(max(n, 2))))


class RejectionSampler:
    """Draws mu_lam samples from one Glauber chain (``burn_in`` steps apart) until |I| = k."""

    def __init__(self, g: Graph, lam, k: int, seed: int = 0, burn_in: int | None = None, max_attempts: int = 10**6):
        if not lam > 0:
            raise ValueError("activity must be positive")
        if size_counts(g)[k] == 0:
            raise ValueError(f"slice k={k} is empty")
        self.g, self.lam, self.k = g, float(lam), k
        self.burn_in = default_burn_in(g.n) if burn_in is None else burn_in
        self.max_attempts = max_attempts
        self.rng = chain_rng(seed)
        self.state = 0

    def draw(self) -> tuple[int, int]:
        for attempt in range(1, self.max_attempts + 1):
            self.state = _glauber_run(self.g, self.lam, self.state, self.burn_in, self.rng)
            if bin(self.state).count("1") == self.k:
                return self.state, attempt
        raise RuntimeError(f"no size-{self.k} set after {self.max_attempts} attempts")


def rejection_sample(g: Graph, lam, k: int, seed: int = 0, burn_in: int | None = None,
                     max_attempts: int = 10**6) -> tuple[int, int]:
    return RejectionSampler(g, lam, k, seed, burn_in, max_attempts).draw()


# ---------------------------------------------------------------- coupling


@dataclass(frozen=True)
class CouplingReport:
    profile: np.ndarray  # mean swap distance at t = 0..horizon
    rate: float  # c in exp(-c t / n)
    coupling_times: tuple[int | None, ...]


def _discrepancy_partner(g: Graph, y: int, labels, rng) -> int | None:
    moves = []
    for u in bits(y):
        rest = y ^ (1 << u)
        for v in range(g.n):
            if labels[v] != labels[u] and not (y >> v) & 1 and not g.masks[v] & rest:
                moves.append(rest | (1 << v))
    if not moves:
        return None
    return moves[int(rng.integers(len(moves)))]


def coupling_contraction(g: Graph, k: int, trials: int, horizon: int, seed: int = 0,
                         starts: tuple[int, int] | None = None) -> CouplingReport:
    """Identity coupling of two modified walks driven by the same (a, b) pairs.

    Each trial starts from Y0 uniform on the slice and Y0' one cross-component
    move away (or from ``starts``).  Distance is |Y xor Y'| / 2.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    labels = _component_labels(g)
    rng = chain_rng(seed)
    space = None
    totals = np.zeros(horizon + 1)
    times = []
    for _ in range(trials):
        if starts is not None:
            y, y2 = starts
        else:
            if space is None:
                space = enumerate_slice(g, k)
                if not len(space):
                    raise ValueError(f"no independent set of size {k}")
            order = rng.permutation(len(space))
            y2 = None
            for i in order:
                y = space[int(i)]
                y2 = _discrepancy_partner(g, y, labels, rng)
                if y2 is not None:
                    break
            if y2 is None:
                raise ValueError("no valid initial discrepancy pair")
        met = 0 if y == y2 else None
        totals[0] += bin(y ^ y2).count("1") / 2
        ab = rng.integers(g.n, size=(horizon, 2))
        for t in range(horizon):
            a, b = int(ab[t, 0]), int(ab[t, 1])
            y = _modified_move(g, y, a, b, labels)
            y2 = _modified_move(g, y2, a, b, labels)
            totals[t + 1] += bin(y ^ y2).count("1") / 2
            if met is None and y == y2:
                met = t + 1
        times.append(met)
    profile = totals / trials
    return CouplingReport(profile, _fit_rate(profile, g.n), tuple(times))


def _fit_rate(profile: np.ndarray, n: int) -> float:
    if profile[0] <= 0:
        return 0.0
    t = np.arange(len(profile))
    keep = (t >= 1) & (profile > 0)
    if not keep.any():
        return math.inf if len(profile) > 1 else 0.0
    y = np.log(profile[keep] / profile[0])
    x = t[keep]
    return float(-n * np.dot(x, y) / np.dot(x, x))
