"""Acceptance criteria 1-12, each at its stated tolerance.

Every test records one line ``criterion N: PASS|FAIL  <detail>``; the lines
are printed in the pytest terminal summary, or directly when this file is run
as a script (``python tests/test_acceptance.py``).
"""

from __future__ import annotations

import json
import math
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from kslice.cli import corpus_dir, family_graph, load_corpus
from kslice.count import PinSet, enumerate_slice, size_counts
from kslice.graph import Graph, bits, components, cycle_graph, path_graph
from kslice.hardcore import (
    HardCoreModel,
    critical_density,
    cumulant_stability,
    cumulants,
    edgeworth_estimate,
    slice_probability,
    solve_activity,
    to_mpf,
)
from kslice.spectral import (
    additions_identity_holds,
    independence_norms,
    induced_kernel,
    influence_matrix,
    is_ergodic,
    lsi_constant,
    mixing_profile,
    mixing_time,
    slice_marginal,
    solve_poisson,
    spectral_gap,
    stein_difference_check,
    tv_envelope,
)
from kslice.walks import VARIANTS, ChainConfig, RejectionSampler, acceptance_rate, build_kernel

FROZEN = json.loads((Path(__file__).parent / "fixtures" / "frozen.json").read_text(encoding="utf-8"))
RESULTS: dict[int, str] = {}
CYCLE_SIZES = (50, 100, 200, 400)


def record(number: int, ok: bool, detail: str) -> None:
    RESULTS[number] = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
    assert ok, RESULTS[number]


def corpus_graphs() -> dict[str, Graph]:
    return load_corpus(corpus_dir(None))


def corpus_kernels():
    for name, g in corpus_graphs().items():
        counts = size_counts(g)
        for k in range(len(counts)):
            if counts[k]:
                space = enumerate_slice(g, k)
                for variant in VARIANTS:
                    yield name, k, variant, build_kernel(space, variant)


def sweep_instances():
    spec = FROZEN["sweep"]["spec"]
    for n, count in FROZEN["sweep"]["sizes"].items():
        n = int(n)
        for i in range(count):
            g = family_graph(spec, n, i)
            kmax = math.floor(Fraction(9, 10) * critical_density(3) * n)
            for k in range(1, kmax + 1):
                yield n, i, k, g


def cycle_case(n: int):
    counts = size_counts(cycle_graph(n))
    k = round(0.2 * n)
    model = HardCoreModel(counts, solve_activity(counts, k))
    return model, k


def test_criterion_01_kernel_exactness():
    worst_row = worst_balance = 0.0
    kernels = 0
    uniform = True
    for _, _, _, kern in corpus_kernels():
        P = kern.dense()
        m = len(kern)
        worst_row = max(worst_row, float(np.max(np.abs(P.sum(axis=1) - 1))))
        flow = kern.pi[:, None] * P
        worst_balance = max(worst_balance, float(np.max(np.abs(flow - flow.T))))
        uniform &= all(p == Fraction(1, m) for p in kern.exact_pi)
        kernels += 1
    ok = worst_row <= 1e-14 and worst_balance <= 1e-14 and uniform
    record(1, ok, f"{kernels} kernels; max row error {worst_row:.1e}, max balance error {worst_balance:.1e}, "
                  f"exact uniform law: {uniform}")


def random_forest(n: int, rng) -> Graph:
    edges = [(int(rng.integers(0, v)), v) for v in range(1, n) if rng.random() < 0.8]
    return Graph.from_edges(n, edges)


def test_criterion_02_counting_agreement():
    rng = np.random.default_rng(2)
    graphs = [path_graph(n) for n in range(1, 23)] + [cycle_graph(n) for n in range(3, 23)]
    graphs += [random_forest(int(rng.integers(2, 23)), rng) for _ in range(30)]
    agree = all(size_counts(g, method="brute") == size_counts(g, method="dp") for g in graphs)
    additive = True
    for g in graphs + list(corpus_graphs().values()):
        full = size_counts(g)
        for u in range(g.n):
            a, b = size_counts(g, PinSet([u])), size_counts(g, PinSet(out_pins=[u]))
            additive &= all(a[j] + b[j] == full[j] for j in range(g.n + 1))
    record(2, agree and additive, f"{len(graphs)} paths/cycles/forests n<=22: brute==DP {agree}; pinned additivity {additive}")


def test_criterion_03_lclt_scaling():
    scaled = {}
    for n in CYCLE_SIZES:
        model, k = cycle_case(n)
        scaled[n] = float(to_mpf(slice_probability(model, k))) * math.sqrt(n)
    ref = scaled[400]
    dev = max(abs(scaled[n] / ref - 1) for n in CYCLE_SIZES if n >= 100)
    record(3, dev <= 0.10, "P*sqrt(n) = " + ", ".join(f"{n}:{v:.5f}" for n, v in scaled.items())
           + f"; max deviation from n=400 for n>=100: {dev:.2%}")


def test_criterion_04_edgeworth_accuracy():
    scaled = {}
    for n in CYCLE_SIZES:
        model, k = cycle_case(n)
        rep = cumulants(model, 6)
        exact = to_mpf(slice_probability(model, k))
        est = edgeworth_estimate(rep, k - to_mpf(rep.mean), 2)
        scaled[n] = float(abs(exact - est)) * n**1.5
    bound = FROZEN["edgeworth"]["bound"]
    vals = [scaled[n] for n in CYCLE_SIZES]
    no_growth = all(b <= a * (1 + 1e-9) for a, b in zip(vals, vals[1:]))
    ok = max(vals) <= bound and no_growth
    record(4, ok, "|exact - d=2|*n^1.5 = " + ", ".join(f"{n}:{v:.3e}" for n, v in scaled.items())
           + f"; frozen bound {bound:.3e}; non-increasing {no_growth}")


def test_criterion_05_cumulant_stability():
    maxima = {}
    for n in (50, 100, 150, 200, 300, 400):
        diffs = cumulant_stability(path_graph(n), n // 2, Fraction(1, 2), 4)
        maxima[n] = float(max(diffs.values()))
    ok = maxima[400] <= 1.25 * maxima[50]
    record(5, ok, "max_j<=4 |kappa_j(X)-kappa_j(X')| = " + ", ".join(f"{n}:{v:.6f}" for n, v in maxima.items()))


SWEEP_CACHE: dict = {}


def sweep_results():
    if not SWEEP_CACHE:
        rows = []
        for n, i, k, g in sweep_instances():
            lam_max, linf = independence_norms(influence_matrix(g, k))
            kern = build_kernel(enumerate_slice(g, k), "metropolis")
            rows.append({"n": n, "k": k, "instance": i, "linf": linf, "lambda_max": lam_max,
                         "gamma": spectral_gap(kern), "tau": mixing_time(kern, 0.25)})
        SWEEP_CACHE["rows"] = rows
    return SWEEP_CACHE["rows"]


def test_criterion_06_linf_independence():
    rows = sweep_results()
    bound = FROZEN["sweep"]["linf_bound"]
    worst = max(r["linf"] for r in rows)
    dominated = all(r["lambda_max"] <= r["linf"] + 1e-8 for r in rows)
    graphs = len({(r["n"], r["instance"]) for r in rows})
    by_n = {n: max(r["linf"] for r in rows if r["n"] == n) for n in (10, 12, 14)}
    ok = worst <= bound + 1e-9 and dominated and graphs == 50
    record(6, ok, f"{graphs} graphs, {len(rows)} (graph, k) pairs; max linf {worst:.6f} (frozen {bound:.6f}); "
                  f"per n {by_n}; lambda_max <= linf: {dominated}")


def test_criterion_07_spectral_gap_scaling():
    rows = sweep_results()
    floor = FROZEN["sweep"]["gamma_k_floor"]
    low = min(r["gamma"] * r["k"] for r in rows)
    record(7, low >= floor - 1e-9 and low > 0, f"min gamma*k {low:.6f} (frozen floor {floor:.6f})")


def test_criterion_08_lsi_consistency():
    checked = 0
    worst_margin = -math.inf
    certs = True
    for name, k, variant, kern in corpus_kernels():
        if len(kern) == 1:
            continue
        rep = lsi_constant(kern, restarts=32 if len(kern) <= 200 else 8)
        worst_margin = max(worst_margin, rep.lsi - rep.gap / 2)
        certs &= rep.certificate_holds(kern)
        checked += 1
    ok = worst_margin <= 1e-6 and certs
    record(8, ok, f"{checked} kernels; max (rho - gamma/2) {worst_margin:.2e}; certificates hold {certs}")


def test_criterion_09_induced_chain():
    instances = 0
    ok = True
    for g in corpus_graphs().values():
        comps = components(g).components
        if len(comps) < 2:
            continue
        counts = size_counts(g)
        for k in range(1, len(counts)):
            if not counts[k]:
                continue
            for comp in comps:
                chain = induced_kernel(g, comp, k)
                marg = slice_marginal(g, comp, k)
                ok &= dict(zip(chain.kernel.states, chain.kernel.exact_pi)) == marg
                ok &= additions_identity_holds(chain)
                instances += 1
    record(9, ok and instances > 0, f"{instances} (graph, k, component) instances; exact marginal and ratio identity: {ok}")


def test_criterion_10_poisson_and_stein():
    rng = np.random.default_rng(10)
    worst_poisson = 0.0
    solved = 0
    for _, _, _, kern in corpus_kernels():
        if len(kern) == 1 or not is_ergodic(kern):
            continue
        f = rng.normal(size=len(kern))
        h = solve_poisson(kern, f)
        worst_poisson = max(worst_poisson, float(np.max(np.abs(np.dot(kern.pi, f) + h - kern.P @ h - f))))
        solved += 1
    worst_stein = 0.0
    applied = skipped = 0
    for g in corpus_graphs().values():
        comps = components(g).components
        if len(comps) < 2:
            continue
        counts = size_counts(g)
        for k in range(1, len(counts)):
            if not counts[k]:
                continue
            space = enumerate_slice(g, k)
            f = rng.exponential(size=len(space))
            for comp in comps:
                mask = sum(1 << v for v in comp)
                for I_G in sorted({s & mask for s in space}):
                    for u in bits(I_G):
                        try:
                            chk = stein_difference_check(space, comp, I_G, u, f)
                        except ValueError:  # restricted chain not ergodic
                            skipped += 1
                            continue
                        worst_stein = max(worst_stein, chk.residual)
                        applied += 1
    ok = worst_poisson <= 1e-10 and worst_stein <= 1e-9 and applied > 0
    record(10, ok, f"Poisson: {solved} ergodic kernels, max residual {worst_poisson:.1e}; "
                   f"Stein: {applied} instances (skipped {skipped} non-ergodic), max residual {worst_stein:.1e}")


def attempts_check(g: Graph, lam, k: int, expected: float, trials: int, seed: int):
    sampler = RejectionSampler(g, lam, k, seed=seed)
    draws = np.array([sampler.draw()[1] for _ in range(trials)], dtype=float)
    mean, se = draws.mean(), draws.std(ddof=1) / math.sqrt(trials)
    return abs(mean - expected) <= 3 * se, mean, se


def test_criterion_11_sampler_statistics():
    details = []
    ok = True
    good, mean, se = attempts_check(path_graph(3), 1.0, 1, 5 / 3, 10_000, seed=111)
    ok &= good
    details.append(f"P3 mean attempts {mean:.4f}+-{se:.4f} (exact 5/3)")
    for key, case in FROZEN["rejection"].items():
        g = family_graph({"family": "random", "delta": 3, "seed": 11}, case["n"], int(key))
        p = Fraction(case["probability"])
        assert p == slice_probability(HardCoreModel(size_counts(g), Fraction(case["lam"])), case["k"])
        good, mean, se = attempts_check(g, float(Fraction(case["lam"])), case["k"], float(1 / p), 10_000, seed=112 + int(key))
        ok &= good
        details.append(f"n=12 #{key} mean {mean:.4f}+-{se:.4f} (exact {float(1 / p):.4f})")
    rates = 0
    low = math.inf
    graphs = list(corpus_graphs().values()) + [g for n, i, k, g in sweep_instances() if k == 1][:10]
    for g in graphs:
        for k in range(1, g.n + 1):
            if 17 * (g.delta + 1) * k > 16 * g.n or not size_counts(g)[k]:
                continue
            est = acceptance_rate(g, k, ChainConfig(steps=20_000, seed=7 + k, initial="greedy"))
            ok &= est.meets_bound(1 / 17)
            low = min(low, est.rate)
            rates += 1
    details.append(f"acceptance: {rates} (graph, k) cases, lowest rate {low:.4f} >= 1/17-3se")
    record(11, ok and rates > 0, "; ".join(details))


def test_criterion_12_mixing_envelope():
    kernels = 0
    envelope_ok = True
    for _, _, _, kern in corpus_kernels():
        gap = spectral_gap(kern)
        prof = mixing_profile(kern, 150)
        envelope_ok &= all(tv <= tv_envelope(gap, kern.pi, t) + 1e-12 for t, tv in enumerate(prof.tv))
        kernels += 1
    c = FROZEN["sweep"]["tau_constant"]
    rows = sweep_results()
    ratio = max(r["tau"] / (r["k"] * math.log(4 * r["n"])) for r in rows)
    ok = envelope_ok and ratio <= c + 1e-12
    record(12, ok, f"envelope on {kernels} kernels: {envelope_ok}; max tau/(k log 4n) {ratio:.4f} (frozen C {c:.4f})")


def main() -> int:
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_criterion_"):
            try:
                fn()
            except AssertionError:
                failed += 1
    for n in sorted(RESULTS):
        print(RESULTS[n])
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
