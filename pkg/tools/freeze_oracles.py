"""Compute frozen oracle values for the regression and acceptance tests.

Everything here is deliberately naive and independent of the library's
kernel, counting and expansion code: slices come from itertools, kernels are
filled by looping over (u, v) pairs, probabilities come from explicit
polynomial products.  Only graph generation is shared, so the instances match.
Writes tests/fixtures/frozen.json.
"""

from __future__ import annotations

import itertools
import json
import math
from fractions import Fraction
from pathlib import Path

import mpmath
import numpy as np
from scipy import optimize

from kslice.cli import family_graph
from kslice.graph import empty_graph

ROOT = Path(__file__).resolve().parents[1]
OUT = ROOT / "tests" / "fixtures" / "frozen.json"
SWEEP_SPEC = {"family": "random", "delta": 3, "seed": 7}
SWEEP_SIZES = {10: 17, 12: 17, 14: 16}
ALPHA_C3 = Fraction(4, 17)


def sweep_instances():
    for n, count in SWEEP_SIZES.items():
        for i in range(count):
            yield n, i, family_graph(SWEEP_SPEC, n, i)


def naive_slice(g, k):
    adj = [set(a) for a in g.adjacency]
    return [c for c in itertools.combinations(range(g.n), k) if all(b not in adj[a] for a, b in itertools.combinations(c, 2))]


def naive_metropolis(g, k):
    states = naive_slice(g, k)
    index = {frozenset(s): i for i, s in enumerate(states)}
    m = len(states)
    P = np.zeros((m, m))
    for i, s in enumerate(states):
        for u in s:
            for v in range(g.n):
                t = (frozenset(s) - {u}) | {v}
                j = index.get(t) if len(t) == k else None
                P[i, i if j is None else j] += 1 / (k * g.n)
    return P


def naive_hdx(g, k):
    states = naive_slice(g, k)
    index = {frozenset(s): i for i, s in enumerate(states)}
    m = len(states)
    P = np.zeros((m, m))
    for i, s in enumerate(states):
        for u in s:
            targets = [index[(frozenset(s) - {u}) | {w}] for w in range(g.n)
                       if len((frozenset(s) - {u}) | {w}) == k and (frozenset(s) - {u}) | {w} in index]
            for j in targets:
                P[i, j] += 1 / (k * len(targets))
    return P


def gap_of(P):
    ev = np.sort(np.linalg.eigvals(P).real)[::-1]
    return 1.0 if len(ev) == 1 else float(1 - ev[1])


def worst_tau(P, eps=0.25):
    m = len(P)
    pi = np.full(m, 1 / m)
    Q = np.eye(m)
    t = 0
    while 0.5 * np.abs(Q - pi).sum(axis=1).max() > eps:
        Q = Q @ P
        t += 1
    return t


def naive_linf(g, k):
    states = [set(s) for s in naive_slice(g, k)]
    best = 0.0
    for i in range(g.n):
        inside = [s for s in states if i in s]
        outside = [s for s in states if i not in s]
        if not inside or not outside:
            continue
        row = 0.0
        for j in range(g.n):
            if j != i:
                row += abs(sum(j in s for s in inside) / len(inside) - sum(j in s for s in outside) / len(outside))
        best = max(best, row)
    return best


def cycle_law(n, lam):
    """P(|I| = j) on C_n from a 2x2 transfer matrix with polynomial entries (numpy poly in x)."""
    # states: last vertex empty / occupied; trace of T^n with T = [[1, x], [1, 0]]
    one, x, zero = np.array([1], dtype=object), np.array([0, 1], dtype=object), np.array([0], dtype=object)

    def mul(A, B):
        return [[np.polynomial.polynomial.polyadd(np.polynomial.polynomial.polymul(A[r][0], B[0][c]),
                                                  np.polynomial.polynomial.polymul(A[r][1], B[1][c]))
                 for c in range(2)] for r in range(2)]

    T = [[one, x], [one, zero]]
    R = [[one, zero], [zero, one]]
    for _ in range(n):
        R = mul(R, T)
    coeffs = np.polynomial.polynomial.polyadd(R[0][0], R[1][1])
    coeffs = [int(c) for c in coeffs]
    w = [c * mpmath.mpf(lam) ** j for j, c in enumerate(coeffs)]
    z = mpmath.fsum(w)
    return [v / z for v in w]


def edgeworth_d2_gap(n):
    mpmath.mp.dps = 50
    k = round(0.2 * n)
    lo, hi = mpmath.mpf(0), mpmath.mpf(10)
    for _ in range(200):
        mid = (lo + hi) / 2
        law = cycle_law(n, mid)
        mean = mpmath.fsum(j * p for j, p in enumerate(law))
        lo, hi = (mid, hi) if mean < k else (lo, mid)
    law = cycle_law(n, (lo + hi) / 2)
    mu = mpmath.fsum(j * p for j, p in enumerate(law))
    c = [mpmath.fsum((j - mu) ** m * p for j, p in enumerate(law)) for m in range(7)]
    var, k3, k4 = c[2], c[3], c[4] - 3 * c[2] ** 2
    s = mpmath.sqrt(var)
    b3, b4 = k3 / (6 * s**3), k4 / (24 * s**4)
    x = (k - mu) / s
    h3, h4, h6 = x**3 - 3 * x, x**4 - 6 * x**2 + 3, x**6 - 15 * x**4 + 45 * x**2 - 15
    est = mpmath.exp(-x**2 / 2) / (mpmath.sqrt(2 * mpmath.pi) * s) * (1 + b3 * h3 + b4 * h4 + b3**2 / 2 * h6)
    return float(abs(law[k] - est) * mpmath.mpf(n) ** 1.5), float(law[k] * mpmath.sqrt(n))


def two_state_lsi():
    def ratio(s):
        f = np.array([s, 2 - s])
        m = f.mean()
        ent = np.mean(f * np.log(f)) - m * np.log(m)
        energy = 0.5 * 0.5 * 0.5 * 2 * (math.sqrt(s) - math.sqrt(2 - s)) ** 2
        return energy / ent

    best = min((optimize.minimize_scalar(ratio, bounds=(a, b), method="bounded", options={"xatol": 1e-12})
                for a, b in [(1e-9, 0.999), (1.001, 2 - 1e-9), (0.9, 0.99999)]), key=lambda r: r.fun)
    return float(best.fun)


def exact_size_probability(g, lam: Fraction, k: int) -> Fraction:
    weights = [len(naive_slice(g, j)) * lam**j for j in range(g.n + 1)]
    return weights[k] / sum(weights)


def main():
    out = {}
    rows = []
    for n, i, g in sweep_instances():
        kmax = math.floor(Fraction(9, 10) * ALPHA_C3 * n)
        for k in range(1, kmax + 1):
            P = naive_metropolis(g, k)
            gap = gap_of(P)
            rows.append({"n": n, "instance": i, "k": k, "gamma": gap, "gamma_k": gap * k,
                         "linf": naive_linf(g, k), "tau": worst_tau(P)})
    out["sweep"] = {"spec": SWEEP_SPEC, "sizes": {str(k): v for k, v in SWEEP_SIZES.items()}, "rows": rows,
                    "linf_bound": max(r["linf"] for r in rows),
                    "gamma_k_floor": min(r["gamma_k"] for r in rows),
                    "tau_constant": max(r["tau"] / (r["k"] * math.log(4 * r["n"])) for r in rows)}

    edge = {}
    for n in (50, 100, 200, 400):
        err, scaled = edgeworth_d2_gap(n)
        edge[str(n)] = {"scaled_error": err, "scaled_probability": scaled}
    out["edgeworth"] = {"cases": edge, "bound": 1.1 * max(v["scaled_error"] for v in edge.values())}

    out["two_state_lsi"] = two_state_lsi()

    empty_sweep = {}
    for n in (6, 8, 10):
        k = n // 3
        empty_sweep[str(n)] = {"k": k, "gamma": gap_of(naive_hdx(empty_graph(n), k))}
    out["empty_hdx_gamma"] = empty_sweep

    samplers = {}
    for i in (0, 1):
        g = family_graph({"family": "random", "delta": 3, "seed": 11}, 12, i)
        lam = Fraction(1, 2)
        p = exact_size_probability(g, lam, 3)
        samplers[str(i)] = {"n": 12, "k": 3, "lam": "1/2", "probability": str(p), "expected_attempts": float(1 / p)}
    out["rejection"] = samplers

    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(out, indent=1, sort_keys=True) + "\n", encoding="utf-8")
    print(json.dumps({k: v for k, v in out["sweep"].items() if k != "rows"}, indent=1))
    print(json.dumps(out["edgeworth"], indent=1), out["two_state_lsi"], empty_sweep, samplers)


if __name__ == "__main__":
    main()
