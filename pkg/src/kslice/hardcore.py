"""Hard-core model on a graph: thresholds, activities, slice laws, cumulants, Edgeworth.

Quantities are exact (``Fraction``) whenever the activity is rational and
fall back to 50-digit ``mpmath`` floats otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import mpmath

from .count import PRECISION_DIGITS, PinSet, SizeCountVector, size_counts
from .graph import Graph, delete_closed_neighborhood, delete_vertex


def to_mpf(x) -> mpmath.mpf:
    if isinstance(x, Rational):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _is_exact(x) -> bool:
    return isinstance(x, Rational)


# ---------------------------------------------------------------- thresholds


def critical_activity(delta: int) -> Fraction:
    """Tree uniqueness threshold (delta-1)^(delta-1) / (delta-2)^delta."""
    if delta < 3:
        raise ValueError("critical activity is defined for delta >= 3")
    return Fraction((delta - 1) ** (delta - 1), (delta - 2) ** delta)


def critical_density(delta: int) -> Fraction:
    """Occupancy fraction lam_c / (1 + (delta+1) lam_c) of the clique K_{delta+1}."""
    lam = critical_activity(delta)
    return lam / (1 + (delta + 1) * lam)


# ---------------------------------------------------------------- the model


@dataclass(frozen=True)
class HardCoreModel:
    counts: SizeCountVector
    lam: object

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("activity must be positive")

    def size_law(self) -> list:
        """P(|I| = j) for j = 0..n; Fractions for rational activity."""
        return _size_law(self.counts.counts, self.lam)

    def mean(self):
        return sum(j * p for j, p in enumerate(self.size_law()))


def _size_law(coeffs: Sequence[int], lam) -> list:
    if _is_exact(lam):
        lam = Fraction(lam)
        weights = [c * lam**j for j, c in enumerate(coeffs)]
        z = sum(weights)
        return [w / z for w in weights]
    with mpmath.workdps(PRECISION_DIGITS):
        lam = to_mpf(lam)
        weights = [c * lam**j for j, c in enumerate(coeffs)]
        z = mpmath.fsum(weights)
        return [w / z for w in weights]


def _mean(coeffs: Sequence[int], lam):
    with mpmath.workdps(PRECISION_DIGITS):
        num = mpmath.mpf(0)
        den = mpmath.mpf(0)
        p = mpmath.mpf(1)
        for j, c in enumerate(coeffs):
            num += j * c * p
            den += c * p
            p *= lam
        return num / den


def solve_activity(counts: SizeCountVector, k: int, tol: float = 1e-9) -> mpmath.mpf:
    """Activity whose hard-core mean size is k (to within ``tol``), by bisection.

    The upper end of the bracket starts at 1 and doubles until the mean passes k.
    """
    alpha = counts.independence_number
    if k < 1:
        raise ValueError("k must be at least 1")
    if k >= alpha:
        raise ValueError(f"k={k} must be below the independence number {alpha}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    coeffs = counts.counts
    with mpmath.workdps(PRECISION_DIGITS):
        lo, hi = mpmath.mpf("1e-12"), mpmath.mpf(1)
        while _mean(coeffs, hi) < k:
            lo, hi = hi, 2 * hi
        while True:
            mid = (lo + hi) / 2
            m = _mean(coeffs, mid)
            if abs(m - k) <= tol:
                return mid
            if m < k:
                lo = mid
            else:
                hi = mid
            if hi - lo <= mpmath.mpf(10) ** (-PRECISION_DIGITS + 5) * hi:
                return mid


def slice_probability(model: HardCoreModel, k: int):
    """P(|I| = k) = a_k lam^k / Z(lam)."""
    if not 0 <= k < len(model.counts):
        return Fraction(0) if _is_exact(model.lam) else mpmath.mpf(0)
    return model.size_law()[k]


def conditional_slice_probability(g: Graph, lam, k: int, pins: PinSet):
    """P(|I| = k | pins) under the hard-core model on g."""
    return slice_probability(HardCoreModel(size_counts(g, pins), lam), k)


# ---------------------------------------------------------------- cumulants


@dataclass(frozen=True)
class CumulantReport:
    lam: object
    mean: object
    variance: object
    cumulants: tuple  # kappa_1 .. kappa_d
    beta: dict  # j -> kappa_j / (j! sigma^j), j >= 3
    max_order: int

    def kappa(self, j: int):
        return self.cumulants[j - 1]

    @property
    def sigma(self) -> mpmath.mpf:
        with mpmath.workdps(PRECISION_DIGITS):
            return mpmath.sqrt(to_mpf(self.variance))


def cumulants_of_law(law: Sequence, d: int) -> list:
    """kappa_1..kappa_d of a law on 0..len(law)-1 via central moments.

    The moment-to-cumulant recursion runs on central moments, which keeps the
    cancellation small; it is exact when ``law`` holds Fractions.
    """
    mu = sum(j * p for j, p in enumerate(law))
    central = [None, 0 * mu]
    for m in range(2, d + 1):
        central.append(sum((j - mu) ** m * p for j, p in enumerate(law)))
    kap = [None, 0 * mu]
    for m in range(2, d + 1):
        acc = central[m]
        for i in range(2, m - 1):
            acc -= math.comb(m - 1, i - 1) * kap[i] * central[m - i]
        kap.append(acc)
    kap[1] = mu
    return kap[1:]


def _report(law: Sequence, lam, d: int) -> CumulantReport:
    with mpmath.workdps(PRECISION_DIGITS):
        kap = cumulants_of_law(law, d)
        var = kap[1] if d >= 2 else None
        sigma = mpmath.sqrt(to_mpf(var))
        beta = {}
        if sigma > 0:
            for j in range(3, d + 1):
                beta[j] = to_mpf(kap[j - 1]) / (math.factorial(j) * sigma**j)
        return CumulantReport(lam, kap[0], var, tuple(kap), beta, d)


def cumulants(model: HardCoreModel, d: int = 6) -> CumulantReport:
    if d < 2:
        raise ValueError("need d >= 2")
    law = model.size_law()
    if sum(1 for p in law if p) < 2:
        raise ValueError("size law is supported on a single point")
    return _report(law, model.lam, d)


# ---------------------------------------------------------------- Hermite and Edgeworth


def hermite(k: int, x):
    """Probabilists' Hermite polynomial He_k(x) by the three-term recurrence."""
    if k < 0:
        raise ValueError("k must be non-negative")
    prev, cur = 1, x
    if k == 0:
        return 1 + 0 * x
    for m in range(1, k):
        prev, cur = cur, x * cur - m * prev
    return cur


@dataclass(frozen=True)
class EdgeworthTerm:
    r: int
    sequences: tuple[tuple[tuple[int, int], ...], ...]  # each: ((a, j_a), ...) with j_a > 0
    coefficient: object


def edgeworth_sequences(d: int) -> dict[int, list[tuple[tuple[int, int], ...]]]:
    """Sequences (j_3, j_4, ...) grouped by r = sum a*j_a, keeping weight sum j_a(a-2)/2 <= d-1.

    Terms of weight w carry relative size n^-w, so this cut leaves an absolute
    error of order n^-d.  For d=2 the set is {j_3=1}, {j_4=1}, {j_3=2}.
    """
    if d < 1:
        raise ValueError("d must be at least 1")
    budget = 2 * (d - 1)  # doubled weight budget
    top = budget + 2
    out: dict[int, list] = {}

    def walk(a: int, left: int, acc: list):
        if a > top:
            if acc:
                r = sum(x * j for x, j in acc)
                out.setdefault(r, []).append(tuple(acc))
            return
        for j in range(left // (a - 2) + 1):
            walk(a + 1, left - j * (a - 2), acc + [(a, j)] if j else acc)

    walk(3, budget, [])
    return dict(sorted(out.items()))


def edgeworth_terms(report: CumulantReport, d: int) -> list[EdgeworthTerm]:
    groups = edgeworth_sequences(d)
    need = max((a for seqs in groups.values() for s in seqs for a, _ in s), default=2)
    if need > report.max_order:
        raise ValueError(f"Edgeworth order d={d} needs cumulants up to {need}, report has {report.max_order}")
    terms = []
    with mpmath.workdps(PRECISION_DIGITS):
        for r, seqs in groups.items():
            coef = mpmath.mpf(0)
            for s in seqs:
                prod = mpmath.mpf(1)
                for a, j in s:
                    prod *= report.beta[a] ** j / math.factorial(j)
                coef += prod
            terms.append(EdgeworthTerm(r, tuple(seqs), coef))
    return terms


def edgeworth_estimate(report: CumulantReport, a, d: int = 2) -> mpmath.mpf:
    """Edgeworth approximation of P(X = mean + a)."""
    with mpmath.workdps(PRECISION_DIGITS):
        var = to_mpf(report.variance)
        if var <= 0:
            raise ValueError("sigma must be positive")
        sigma = mpmath.sqrt(var)
        a = to_mpf(a)
        x = a / sigma
        series = mpmath.mpf(1)
        for term in edgeworth_terms(report, d):
            series += hermite(term.r, x) * term.coefficient
        return mpmath.exp(-(a**2) / (2 * var)) / (mpmath.sqrt(2 * mpmath.pi) * sigma) * series


# ---------------------------------------------------------------- stability and marginals


def cumulant_stability(g: Graph, u: int, lam, d: int = 4) -> dict[int, object]:
    """|kappa_j(X) - kappa_j(X')| for j <= d, X = |I| given u in I, X' = |I| given u not in I."""
    if not lam > 0:
        raise ValueError("activity must be positive")
    if not 0 <= u < g.n:
        raise ValueError(f"vertex {u} out of range")
    if g.n == 1:
        raise ValueError("conditioning on u out leaves an empty graph")
    g_in, _ = delete_closed_neighborhood(g, u)
    g_out, _ = delete_vertex(g, u)
    law_in = [0] + _size_law(size_counts(g_in).counts, lam)  # shifted by the vertex u itself
    law_out = _size_law(size_counts(g_out).counts, lam)
    with mpmath.workdps(PRECISION_DIGITS):
        k_in = cumulants_of_law(law_in, d)
        k_out = cumulants_of_law(law_out, d)
        return {j: abs(k_in[j - 1] - k_out[j - 1]) for j in range(1, d + 1)}


def pinned_marginal(g: Graph, k: int, u: int) -> Fraction:
    """mu_k[u] = |{I in I_k : u in I}| / a_k."""
    a_k = size_counts(g)[k]
    if a_k == 0:
        raise ValueError(f"slice k={k} is empty")
    return Fraction(size_counts(g, PinSet([u]))[k], a_k)


def marginal_bounds(g: Graph, k: int) -> Fraction:
    """min over u of min(mu_k[u], mu_k[u-bar])."""
    a_k = size_counts(g)[k]
    if a_k == 0:
        raise ValueError(f"slice k={k} is empty")
    best = Fraction(1)
    for u in range(g.n):
        p = Fraction(size_counts(g, PinSet([u]))[k], a_k)
        best = min(best, p, 1 - p)
    return best
