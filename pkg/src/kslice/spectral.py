"""Exact analysis of small reversible chains on slices.

Covers influence matrices, Dirichlet forms, spectral gaps, log-Sobolev
estimates, total-variation profiles, the Poisson equation, the chain induced
on one connected component, and the swap-based decomposition and Stein checks.
Everything here enumerates state spaces, so it is meant for n <= ~14.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy import optimize
from scipy.sparse.csgraph import connected_components

from .count import SliceSpace, enumerate_slice, size_counts
from .graph import Graph, bits, components, induced_subgraph
from .walks import Kernel, KernelError

POISSON_TOL = 1e-10


# ---------------------------------------------------------------- influence


@dataclass(frozen=True)
class InfluenceMatrix:
    exact: tuple  # rows of Fractions; flagged rows are all zero
    flagged: tuple[int, ...]  # vertices whose slice marginal is 0 or 1

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[float(x) for x in row] for row in self.exact], dtype=float).reshape(len(self.exact), -1)

    @property
    def active(self) -> tuple[int, ...]:
        return tuple(i for i in range(len(self.exact)) if i not in self.flagged)


def influence_matrix(g: Graph, k: int) -> InfluenceMatrix:
    """M[i][j] = P[j in I | i in I] - P[j in I | i not in I] under the uniform slice law."""
    space = enumerate_slice(g, k)
    total = len(space)
    if total == 0:
        raise ValueError(f"slice k={k} is empty")
    n = g.n
    single = [0] * n
    pair = [[0] * n for _ in range(n)]
    for s in space:
        members = bits(s)
        for i in members:
            single[i] += 1
            row = pair[i]
            for j in members:
                row[j] += 1
    flagged = tuple(i for i in range(n) if single[i] in (0, total))
    rows = []
    for i in range(n):
        if i in flagged:
            rows.append((Fraction(0),) * n)
            continue
        out_i = total - single[i]
        row = []
        for j in range(n):
            if j == i:
                row.append(Fraction(0))
            else:
                row.append(Fraction(pair[i][j], single[i]) - Fraction(single[j] - pair[i][j], out_i))
        rows.append(tuple(row))
    return InfluenceMatrix(tuple(rows), flagged)


def independence_norms(m: InfluenceMatrix | np.ndarray) -> tuple[float, float]:
    """(largest real eigenvalue, max absolute row sum) over the unflagged block."""
    if isinstance(m, InfluenceMatrix):
        keep = list(m.active)
        a = m.matrix[np.ix_(keep, keep)] if keep else np.zeros((0, 0))
    else:
        a = np.asarray(m, dtype=float)
    if a.size == 0:
        return 0.0, 0.0
    eig = np.linalg.eigvals(a)
    lam_max = float(np.max(eig.real))
    linf = float(np.max(np.abs(a).sum(axis=1)))
    if lam_max > linf + 1e-8:
        raise ArithmeticError(f"eigensolve inconsistent: lambda_max {lam_max} exceeds row norm {linf}")
    return lam_max, linf


# ---------------------------------------------------------------- forms and gaps


def _check_dims(kern: Kernel, *fs) -> list[np.ndarray]:
    out = []
    for f in fs:
        f = np.asarray(f, dtype=float)
        if f.shape != (len(kern),):
            raise ValueError(f"function has shape {f.shape}, kernel has {len(kern)} states")
        out.append(f)
    return out


def dirichlet_form(kern: Kernel, f, g) -> float:
    """(1/2) sum_{x,y} pi(x) P(x,y) (f(x)-f(y)) (g(x)-g(y))."""
    f, g = _check_dims(kern, f, g)
    P = kern.P.tocoo()
    w = kern.pi[P.row] * P.data
    return float(0.5 * np.sum(w * (f[P.row] - f[P.col]) * (g[P.row] - g[P.col])))


def exact_dirichlet_form(kern: Kernel, f: Sequence, g: Sequence) -> Fraction:
    if kern.exact_rows is None:
        raise ValueError("kernel carries no exact entries")
    total = Fraction(0)
    for x, row in enumerate(kern.exact_rows):
        for y, p in row.items():
            total += kern.exact_pi[x] * p * (f[x] - f[y]) * (g[x] - g[y])
    return total / 2


def _symmetrized(kern: Kernel) -> np.ndarray:
    r = np.sqrt(kern.pi)
    S = (kern.P.multiply(r[:, None]).multiply(1 / r[None, :])).toarray()
    return (S + S.T) / 2


def kernel_eigenvalues(kern: Kernel) -> np.ndarray:
    """Eigenvalues of the reversible kernel, descending."""
    return np.linalg.eigvalsh(_symmetrized(kern))[::-1]


def spectral_gap(kern: Kernel) -> float:
    """1 - second largest eigenvalue; a one-state chain has gap 1 by convention."""
    if len(kern) == 1:
        return 1.0
    ev = kernel_eigenvalues(kern)
    return float(min(2.0, max(0.0, 1 - ev[1])))


def entropy(pi: np.ndarray, f: np.ndarray) -> float:
    """Ent_pi(f) = E f log f - E f log E f, computed as sum pi m phi(f/m), phi(r) = r log r - r + 1."""
    f = np.asarray(f, dtype=float)
    if np.any(f < 0):
        raise ValueError("entropy needs a non-negative function")
    m = float(np.dot(pi, f))
    if m <= 0:
        return 0.0
    e = f / m - 1
    small = np.abs(e) < 1e-3
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.where(e > -1, (1 + e) * np.log1p(np.where(e > -1, e, 0)) - e, 1.0)
    series = e**2 / 2 - e**3 / 6 + e**4 / 12 - e**5 / 20 + e**6 / 30
    return float(m * np.dot(pi, np.where(small, series, big)))


@dataclass(frozen=True)
class SpectralReport:
    gap: float
    lsi: float
    certificate: np.ndarray  # f* >= 0 attaining the reported ratio
    trace: tuple[float, ...]  # best ratio after each restart

    def certificate_holds(self, kern: Kernel, slack: float = 1e-9) -> bool:
        root = np.sqrt(self.certificate)
        energy = dirichlet_form(kern, root, root)
        return self.lsi * entropy(kern.pi, self.certificate) <= energy * (1 + slack)


def _lsi_ratio(kern: Kernel, f: np.ndarray) -> float:
    ent = entropy(kern.pi, f)
    if ent <= 0:
        return math.inf
    root = np.sqrt(f)
    return dirichlet_form(kern, root, root) / ent


def lsi_constant(kern: Kernel, restarts: int = 32, seed: int = 0, tol: float = 1e-10,
                 max_states: int = 5000) -> SpectralReport:
    """Estimate inf E(sqrt f, sqrt f) / Ent(f) over non-constant f >= 0.

    f = exp(s) keeps positivity; s is optimised by L-BFGS with an analytic
    gradient.  One start sits on the slowest eigenvector (the ratio there tends
    to gap / 2), the others are random.  The result is an upper bound on the
    true constant, reported with the f that attains it.
    """
    m = len(kern)
    if m > max_states:
        raise KernelError(f"{m} states exceeds cap {max_states}")
    gap = spectral_gap(kern)
    if m == 1:
        raise ValueError("a one-state chain has no non-constant functions")
    pi = kern.pi
    Pc = kern.P.tocsr()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))

    def energy_grad(g):
        Lg = pi * (g - Pc @ g)
        return g * Lg

    def objective(s):
        s = s - s.max()
        f = np.exp(s)
        ent = entropy(pi, f)
        if not ent > 0:
            return 1e6, np.zeros_like(s)
        g = np.exp(s / 2)
        en = dirichlet_form(kern, g, g)
        r = en / ent
        mean = float(np.dot(pi, f))
        with np.errstate(divide="ignore"):
            dent = pi * f * (s - math.log(mean))
        return r, (energy_grad(g) - r * dent) / ent

    starts = []
    S = _symmetrized(kern)
    w, v = np.linalg.eigh(S)
    slow = v[:, -2] / np.sqrt(pi)
    slow /= np.max(np.abs(slow))
    starts.append(np.log1p(1e-4 * slow))
    starts.append(np.log1p(0.5 * slow))
    while len(starts) < restarts:
        scale = rng.choice([0.5, 2.0, 6.0])
        starts.append(rng.normal(0, scale, m))

    best, best_f, trace = math.inf, None, []
    for s0 in starts[:max(restarts, 1)]:
        res = optimize.minimize(objective, s0, jac=True, method="L-BFGS-B",
                                options={"maxiter": 2000, "ftol": tol, "gtol": 1e-12})
        f = np.exp(res.x - res.x.max())
        r = _lsi_ratio(kern, f)
        for cand_f, cand_r in ((f, r), (np.exp(s0 - s0.max()), _lsi_ratio(kern, np.exp(s0 - s0.max())))):
            if cand_r < best:
                best, best_f = cand_r, cand_f
        trace.append(best)
    if not math.isfinite(best):
        raise ArithmeticError("every restart collapsed to a constant function")
    return SpectralReport(gap, float(best), best_f, tuple(trace))


# ---------------------------------------------------------------- mixing


@dataclass(frozen=True)
class MixingProfile:
    tv: np.ndarray  # TV(t), t = 0..horizon (worst start unless one was given)
    tau: int | None  # first t with TV(t) <= eps, None if beyond the horizon
    eps: float


def mixing_profile(kern: Kernel, horizon: int, start: int | None = None, eps: float = 0.25) -> MixingProfile:
    """Exact TV(nu P^t, pi) by repeated products; worst point start when ``start`` is None."""
    if horizon < 0:
        raise ValueError("horizon must be non-negative")
    m = len(kern)
    if start is None:
        dist = np.eye(m)
    else:
        dist = np.zeros((1, m))
        dist[0, start] = 1.0
    PT = kern.P.T.tocsr()
    tv = np.empty(horizon + 1)
    for t in range(horizon + 1):
        tv[t] = 0.5 * np.max(np.abs(dist - kern.pi[None, :]).sum(axis=1))
        if t < horizon:
            dist = (PT @ dist.T).T
    hits = np.nonzero(tv <= eps)[0]
    return MixingProfile(tv, int(hits[0]) if len(hits) else None, eps)


def mixing_time(kern: Kernel, eps: float = 0.25, cap: int = 100000) -> int:
    """Worst-start tau_mix(eps), extending the horizon geometrically."""
    horizon = 64
    while True:
        prof = mixing_profile(kern, horizon, eps=eps)
        if prof.tau is not None:
            return prof.tau
        if horizon >= cap:
            raise ArithmeticError(f"TV above {eps} after {cap} steps")
        horizon *= 4


def tv_envelope(gap: float, pi: np.ndarray, t: int) -> float:
    return (1 - gap) ** t * math.sqrt(1 / float(np.min(pi)))


# ---------------------------------------------------------------- Poisson


def solve_poisson(kern: Kernel, f) -> np.ndarray:
    """h with E_pi h = 0 and (I - P) h = f - E_pi f."""
    (f,) = _check_dims(kern, f)
    m = len(kern)
    pi = kern.pi
    target = f - np.dot(pi, f)
    A = np.eye(m) - kern.P.toarray() + np.outer(np.ones(m), pi)
    try:
        h = np.linalg.solve(A, target)
    except np.linalg.LinAlgError as exc:
        raise KernelError("Poisson system is singular; kernel is not ergodic") from exc
    resid = np.max(np.abs(h - kern.P @ h - target), initial=0)
    if not resid <= POISSON_TOL * max(1.0, np.max(np.abs(f), initial=0)):
        raise KernelError(f"Poisson residual {resid} too large; kernel is not ergodic")
    return h


def is_ergodic(kern: Kernel) -> bool:
    ncomp, _ = connected_components(kern.P, directed=True, connection="strong")
    return ncomp == 1


# ---------------------------------------------------------------- swap operator


def swap(g: Graph, I: int, a: int, b: int, labels) -> int:
    """Exchange the status of a and b if they lie in different components and the result is independent."""
    if labels[a] == labels[b]:
        return I
    ina, inb = (I >> a) & 1, (I >> b) & 1
    if ina == inb:
        return I
    out, new = (a, b) if ina else (b, a)
    rest = I ^ (1 << out)
    if g.masks[new] & rest:
        return I
    return rest | (1 << new)


def swap_kernel(g: Graph, states: Sequence[int], variant: str = "swap") -> Kernel:
    """Uniform pair (a, b) in V x V, apply the swap, hold if the result leaves ``states``.

    The swap is an involution on each pair, so the matrix is symmetric and the
    uniform law on ``states`` is stationary.
    """
    labels = components(g).label(g.n)
    states = tuple(sorted(states))
    index = {s: i for i, s in enumerate(states)}
    n = g.n
    unit = Fraction(1, n * n)
    rows = []
    for x in states:
        row: dict[int, Fraction] = {}
        for a in bits(x):
            for b in range(n):
                y = swap(g, x, a, b, labels)
                if y != x and y in index:
                    row[index[y]] = row.get(index[y], 0) + 2 * unit  # (a, b) and (b, a)
        row[index[x]] = 1 - sum(row.values())
        rows.append(row)
    pi = [Fraction(1, len(states))] * len(states)
    return Kernel.from_exact(states, rows, pi, variant)


# ---------------------------------------------------------------- induced chain


@dataclass(frozen=True)
class InducedChain:
    kernel: Kernel
    component: tuple[int, ...]
    rest: Graph
    rest_labels: tuple[int, ...]  # rest vertex -> original vertex
    rest_counts: tuple[int, ...]
    k: int


def _check_component(g: Graph, component) -> tuple[int, ...]:
    comp = tuple(sorted(set(component)))
    if comp not in [tuple(c) for c in components(g).components]:
        raise ValueError(f"{list(comp)} is not a connected component")
    if len(comp) == g.n:
        raise ValueError("the component is the whole graph; swaps across components are impossible")
    return comp


def _mean_additions(rest: Graph, size: int) -> Fraction:
    """E[M(K)] for K uniform on I_size(rest): vertices outside K that keep K independent when added."""
    space = enumerate_slice(rest, size)
    masks = rest.masks
    total = 0
    for K in space:
        total += sum(1 for w in range(rest.n) if not (K >> w) & 1 and not masks[w] & K)
    return Fraction(total, len(space))


def induced_kernel(g: Graph, component, k: int) -> InducedChain:
    """Projection of the swap dynamics onto one component, with I outside averaged out.

    From I_G, a uniform u in the component and a uniform v in V are swapped.
    Removing u in I_G succeeds for E[M(K)] of the N choices of v, adding a free
    u succeeds for the k - |I_G| occupied v outside.
    """
    comp = _check_component(g, component)
    outside = [v for v in range(g.n) if v not in set(comp)]
    sub, _ = induced_subgraph(g, comp)
    rest, rest_map = induced_subgraph(g, outside)
    rc = size_counts(rest).counts
    a_k = size_counts(g)[k]
    if a_k == 0:
        raise ValueError(f"slice k={k} is empty")

    def rest_count(j):
        return rc[j] if 0 <= j < len(rc) else 0

    local = [s for j in range(sub.n + 1) for s in enumerate_slice(sub, j)]
    lift = {s: sum(1 << comp[i] for i in bits(s)) for s in local}
    states = sorted(lift[s] for s in local if rest_count(k - bin(s).count("1")) >= 1)
    index = {s: i for i, s in enumerate(states)}
    size, N = len(comp), g.n
    masks = g.masks
    comp_mask = sum(1 << v for v in comp)
    mean_add = {}
    rows = []
    for x in states:
        row: dict[int, Fraction] = {}
        occ = bin(x).count("1")
        free = k - occ
        for u in comp:
            if (x >> u) & 1:
                y = x ^ (1 << u)
                if y in index:
                    if free not in mean_add:
                        mean_add[free] = _mean_additions(rest, free)
                    p = Fraction(1, size * N) * mean_add[free]
                    if p:
                        row[index[y]] = row.get(index[y], 0) + p
            elif not masks[u] & x & comp_mask and free >= 1:
                y = x | (1 << u)
                if y in index:
                    row[index[y]] = row.get(index[y], 0) + Fraction(free, size * N)
        row[index[x]] = 1 - sum(row.values())
        rows.append(row)
    pi = [Fraction(rest_count(k - bin(s).count("1")), a_k) for s in states]
    kern = Kernel.from_exact(states, rows, pi, "induced")
    return InducedChain(kern, comp, rest, rest_map, tuple(rc), k)


def slice_marginal(g: Graph, component, k: int) -> dict[int, Fraction]:
    """Law of I restricted to the component under the uniform slice law, by direct enumeration."""
    comp_mask = sum(1 << v for v in component)
    space = enumerate_slice(g, k)
    out: dict[int, Fraction] = {}
    for s in space:
        key = s & comp_mask
        out[key] = out.get(key, 0) + 1
    return {key: Fraction(c, len(space)) for key, c in out.items()}


def additions_identity_holds(chain: InducedChain) -> bool:
    """For I_G and J_G = I_G - v: P(I,J)/P(J,I) = a_{k-|J|}(rest) / a_{k-|I|}(rest), exactly."""
    kern = chain.kernel
    rc = chain.rest_counts
    for i, x in enumerate(kern.states):
        for v in bits(x):
            y = x ^ (1 << v)
            j = kern.index.get(y)
            if j is None:
                continue
            fwd, back = kern.exact_rows[i].get(j, 0), kern.exact_rows[j].get(i, 0)
            kx, ky = chain.k - bin(x).count("1"), chain.k - bin(y).count("1")
            if back == 0 or fwd / back != Fraction(rc[ky], rc[kx]):
                return False
    return True


@dataclass(frozen=True)
class InducedComparison:
    activity: float
    stationary_ratio_max: float  # max over I_G of mu_k(I_G) / mu_lam(I_G)
    stationary_ratio_min: float
    transition_deviation: float  # max |P(I,J)/P(J,I) / lam^(|J|-|I|) - 1|


def induced_vs_hardcore(g: Graph, component, k: int) -> InducedComparison:
    """Compare the induced stationary law with hard-core on the component at density k/N.

    The activity is alpha / (1 - alpha) with alpha = k/N, the value whose
    product measure on isolated vertices has density alpha.
    """
    chain = induced_kernel(g, component, k)
    kern = chain.kernel
    alpha = Fraction(k, g.n)
    if alpha >= 1:
        raise ValueError("density k/N must be below 1")
    lam = alpha / (1 - alpha)
    sub, _ = induced_subgraph(g, chain.component)
    coeffs = size_counts(sub).counts
    z = sum(c * lam**j for j, c in enumerate(coeffs))
    ratios, devs = [], [0.0]
    for i, x in enumerate(kern.states):
        size = bin(x).count("1")
        hc = lam**size / z
        ratios.append(float(kern.exact_pi[i] / hc) if hc else (1.0 if kern.exact_pi[i] else 0.0))
        for j, p in kern.exact_rows[i].items():
            if j == i or not p:
                continue
            y = kern.states[j]
            back = kern.exact_rows[j][i]
            expected = lam ** (bin(y).count("1") - size) if lam else None
            if expected:
                devs.append(abs(float(p / back / expected) - 1))
    return InducedComparison(float(lam), max(ratios), min(ratios), max(devs))


# ---------------------------------------------------------------- decomposition and Stein


@dataclass(frozen=True)
class DecompositionResult:
    lhs: float
    rhs: float
    ratio: float
    unbounded: bool  # lhs > 0 while rhs = 0


def _conditional_states(space: SliceSpace, mask: int, pattern: int) -> list[int]:
    return [s for s in space if s & mask == pattern]


def decomposition_ratio(space: SliceSpace, component, I_G: int, u: int, f) -> DecompositionResult:
    """Compare (sqrt f_G(I_G) - sqrt f_G(I_G - u))^2 with E_v E_{I | I_G} (sqrt f(I) - sqrt f(swap_{u,v} I))^2.

    f_G is the conditional mean of f given the configuration on the component,
    and v is uniform over all vertices.  0/0 is reported as 0.
    """
    g = space.graph
    comp = _check_component(g, component)
    f = np.asarray(f, dtype=float)
    if f.shape != (len(space),) or np.any(f < 0):
        raise ValueError("f must be a non-negative function on the slice")
    comp_mask = sum(1 << v for v in comp)
    if I_G & ~comp_mask or not g.is_independent(I_G):
        raise ValueError("I_G must be an independent set of the component")
    if not (I_G >> u) & 1:
        raise ValueError("u must belong to I_G")
    upper = _conditional_states(space, comp_mask, I_G)
    lower = _conditional_states(space, comp_mask, I_G ^ (1 << u))
    if not upper or not lower:
        raise ValueError("I_G or I_G - u has no extension in the slice")
    root = np.sqrt(f)
    mean_up = float(np.mean([f[space.index[s]] for s in upper]))
    mean_low = float(np.mean([f[space.index[s]] for s in lower]))
    lhs = (math.sqrt(mean_up) - math.sqrt(mean_low)) ** 2
    labels = components(g).label(g.n)
    acc = 0.0
    for s in upper:
        i = space.index[s]
        for v in range(g.n):
            t = swap(g, s, u, v, labels)
            acc += (root[i] - root[space.index[t]]) ** 2
    rhs = float(acc / (len(upper) * g.n))
    if lhs == 0:
        return DecompositionResult(lhs, rhs, 0.0, False)
    if rhs == 0:
        return DecompositionResult(lhs, rhs, math.inf, True)
    return DecompositionResult(lhs, rhs, lhs / rhs, False)


@dataclass(frozen=True)
class SteinCheck:
    lhs: float  # E_nu f
    rhs: float  # E_mu f + E_nu[(P_nu h - h) - (P_mu h - h)]
    poisson_residual: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def stein_difference_check(space: SliceSpace, component, I_G: int, u: int, f) -> SteinCheck:
    """Check E_nu f = E_mu f + E_nu[(P_nu h - h) - (P_mu h - h)] with h solving the Poisson equation of P_mu.

    nu is the slice law given I on the component equals I_G; mu only fixes the
    component minus u.  P_mu and P_nu are swap chains restricted to each support.
    """
    g = space.graph
    comp = _check_component(g, component)
    comp_mask = sum(1 << v for v in comp)
    if not (I_G >> u) & 1 or I_G & ~comp_mask:
        raise ValueError("u must belong to I_G, which must lie in the component")
    f = np.asarray(f, dtype=float)
    if f.shape != (len(space),):
        raise ValueError("f must be a function on the slice")
    nu_states = _conditional_states(space, comp_mask, I_G)
    if not nu_states:
        raise ValueError("conditioning event is empty")
    mu_mask = comp_mask & ~(1 << u)
    mu_states = _conditional_states(space, mu_mask, I_G & mu_mask)
    P_mu = swap_kernel(g, mu_states, "stein-mu")
    P_nu = swap_kernel(g, nu_states, "stein-nu")
    f_mu = np.array([f[space.index[s]] for s in P_mu.states])
    f_nu = np.array([f[space.index[s]] for s in P_nu.states])
    h_mu = solve_poisson(P_mu, f_mu)
    resid = float(np.max(np.abs(f_mu.mean() + h_mu - P_mu.P @ h_mu - f_mu)))
    h_nu = np.array([h_mu[P_mu.index[s]] for s in P_nu.states])
    mu_drift = (P_mu.P @ h_mu - h_mu)
    mu_drift_on_nu = np.array([mu_drift[P_mu.index[s]] for s in P_nu.states])
    nu_drift = P_nu.P @ h_nu - h_nu
    lhs = float(np.dot(P_nu.pi, f_nu))
    rhs = float(np.dot(P_mu.pi, f_mu) + np.dot(P_nu.pi, nu_drift - mu_drift_on_nu))
    return SteinCheck(lhs, rhs, resid)
