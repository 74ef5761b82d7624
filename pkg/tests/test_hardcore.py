from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import pytest

from kslice.count import PinSet, size_counts
from kslice.graph import complete_graph, cycle_graph, empty_graph, path_graph
from kslice.hardcore import (
    HardCoreModel,
    conditional_slice_probability,
    critical_activity,
    critical_density,
    cumulant_stability,
    cumulants,
    edgeworth_estimate,
    edgeworth_sequences,
    edgeworth_terms,
    hermite,
    marginal_bounds,
    pinned_marginal,
    slice_probability,
    solve_activity,
    to_mpf,
)


@pytest.mark.parametrize("delta, lam, alpha", [(3, Fraction(4), Fraction(4, 17)), (4, Fraction(27, 16), Fraction(27, 151))])
def test_thresholds(delta, lam, alpha):
    assert critical_activity(delta) == lam
    assert critical_density(delta) == alpha


def test_density_matches_slice_remark():
    # alpha_c(3) coincides with 16 / (17 (delta + 1)) at delta = 3
    assert critical_density(3) == Fraction(16, 17 * 4)


def test_thresholds_need_delta_three():
    with pytest.raises(ValueError):
        critical_activity(2)


def test_solve_activity_empty_graph():
    lam = solve_activity(size_counts(empty_graph(10)), 2)
    assert abs(lam - 0.25) < 1e-8


def test_solve_activity_path_root_is_one():
    # (3 lam + 2 lam^2) / (1 + 3 lam + lam^2) = 1 reduces to lam^2 = 1
    lam = solve_activity(size_counts(path_graph(3)), 1, tol=1e-12)
    assert abs(lam - 1) < 1e-10


def test_solve_activity_errors():
    with pytest.raises(ValueError):
        solve_activity(size_counts(complete_graph(3)), 3)
    with pytest.raises(ValueError):
        solve_activity(size_counts(path_graph(3)), 0)
    with pytest.raises(ValueError):
        solve_activity(size_counts(path_graph(3)), 1, tol=0)


def test_solve_activity_over_corpus(corpus):
    for g in corpus.values():
        counts = size_counts(g)
        for k in range(1, counts.independence_number):
            lam = solve_activity(counts, k)
            mean = HardCoreModel(counts, lam).mean()
            assert abs(mean - k) <= 1e-9


@pytest.mark.parametrize("k, p", [(2, Fraction(1, 5)), (1, Fraction(3, 5))])
def test_slice_probability_path(k, p):
    assert slice_probability(HardCoreModel(size_counts(path_graph(3)), Fraction(1)), k) == p


@pytest.mark.parametrize("n, lam, k", [(5, Fraction(1, 3), 2), (8, Fraction(2), 5)])
def test_slice_probability_bernoulli(n, lam, k):
    p = slice_probability(HardCoreModel(size_counts(empty_graph(n)), lam), k)
    assert p == math.comb(n, k) * lam**k / (1 + lam) ** n


def test_slice_probabilities_sum_to_one(corpus):
    for g in corpus.values():
        model = HardCoreModel(size_counts(g), Fraction(3, 7))
        assert sum(slice_probability(model, k) for k in range(g.n + 1)) == 1


def test_model_rejects_nonpositive_activity():
    with pytest.raises(ValueError):
        HardCoreModel(size_counts(path_graph(3)), 0)


def test_cumulants_path():
    rep = cumulants(HardCoreModel(size_counts(path_graph(3)), Fraction(1)), 4)
    assert rep.cumulants[:2] == (1, Fraction(2, 5))
    assert rep.kappa(1) == rep.mean and rep.kappa(2) == rep.variance


def test_cumulants_single_vertex():
    lam = Fraction(2, 3)
    rep = cumulants(HardCoreModel(size_counts(empty_graph(1)), lam), 2)
    assert rep.mean == lam / (1 + lam)


def bernoulli_cumulants(p):
    q = 1 - p
    return [p, p * q, p * q * (1 - 2 * p), p * q * (1 - 6 * p * q)]


@pytest.mark.parametrize("n", [1, 7, 50, 400])
def test_cumulants_empty_graph_closed_form(n):
    lam = Fraction(3, 5)
    rep = cumulants(HardCoreModel(size_counts(empty_graph(n)), lam), 4)
    want = [n * c for c in bernoulli_cumulants(lam / (1 + lam))]
    assert list(rep.cumulants) == want


def test_cumulants_empty_graph_float_activity():
    lam = 0.6
    rep = cumulants(HardCoreModel(size_counts(empty_graph(400)), mpmath.mpf(lam)), 4)
    p = Fraction(lam) / (1 + Fraction(lam))
    for got, want in zip(rep.cumulants, bernoulli_cumulants(p)):
        want = 400 * want
        assert abs(to_mpf(got) - to_mpf(want)) <= 1e-12 * abs(to_mpf(want))


def test_cumulants_reject_degenerate():
    with pytest.raises(ValueError):
        cumulants(HardCoreModel(size_counts(empty_graph(0)), 1), 2)
    with pytest.raises(ValueError):
        cumulants(HardCoreModel(size_counts(path_graph(3)), 1), 1)


@pytest.mark.parametrize("k, x, value", [(0, 5.0, 1), (3, 1, -2), (4, 0, 3), (6, 0, -15)])
def test_hermite_values(k, x, value):
    assert hermite(k, x) == value


def test_hermite_against_explicit_polynomials():
    for x in (-1.5, 0.3, 2.0):
        assert hermite(4, x) == pytest.approx(x**4 - 6 * x**2 + 3)
        assert hermite(5, x) == pytest.approx(x**5 - 10 * x**3 + 15 * x)


def test_sequence_sets():
    assert edgeworth_sequences(1) == {}
    two = edgeworth_sequences(2)
    assert two == {3: [((3, 1),)], 4: [((4, 1),)], 6: [((3, 2),)]}
    for d in (2, 3, 4):
        for r, seqs in edgeworth_sequences(d).items():
            for s in seqs:
                assert sum(a * j for a, j in s) == r
                assert sum(j * (a - 2) for a, j in s) <= 2 * (d - 1)
                assert max(a for a, _ in s) <= 2 * d + 2


def model_for_cycle(n):
    counts = size_counts(cycle_graph(n))
    k = round(0.2 * n)
    lam = solve_activity(counts, k)
    return HardCoreModel(counts, lam), k


def test_edgeworth_d1_is_gaussian():
    model, _ = model_for_cycle(50)
    rep = cumulants(model, 6)
    with mpmath.workdps(50):
        assert edgeworth_estimate(rep, 0, 1) == 1 / (mpmath.sqrt(2 * mpmath.pi) * rep.sigma)


def test_edgeworth_d2_at_zero_structure():
    model, _ = model_for_cycle(100)
    rep = cumulants(model, 6)
    b3, b4 = rep.beta[3], rep.beta[4]
    with mpmath.workdps(50):
        gauss = 1 / (mpmath.sqrt(2 * mpmath.pi) * rep.sigma)
        want = gauss * (1 + 3 * b4 - 15 * b3**2 / 2)
        assert abs(edgeworth_estimate(rep, 0, 2) - want) < 1e-40


def test_edgeworth_needs_enough_cumulants():
    model, _ = model_for_cycle(50)
    with pytest.raises(ValueError):
        edgeworth_terms(cumulants(model, 3), 2)


def test_edgeworth_rejects_zero_variance():
    model, _ = model_for_cycle(50)
    rep = cumulants(model, 6)
    bad = type(rep)(rep.lam, rep.mean, 0, rep.cumulants, rep.beta, rep.max_order)
    with pytest.raises(ValueError):
        edgeworth_estimate(bad, 0, 2)


def test_edgeworth_cycle_100(frozen):
    model, k = model_for_cycle(100)
    rep = cumulants(model, 6)
    exact = to_mpf(slice_probability(model, k))
    est = edgeworth_estimate(rep, k - to_mpf(rep.mean), 2)
    assert abs(exact - est) <= 5 * 100**-1.5
    assert float(abs(exact - est)) * 100**1.5 <= frozen["edgeworth"]["bound"]


def test_edgeworth_order_improves():
    model, k = model_for_cycle(100)
    rep = cumulants(model, 10)
    exact = to_mpf(slice_probability(model, k))
    errs = [abs(exact - edgeworth_estimate(rep, k - to_mpf(rep.mean), d)) for d in (1, 2, 3)]
    assert errs[0] > errs[1] > errs[2]


def test_stability_scaling_on_cycles():
    scaled = []
    for n in (50, 100, 200, 400):
        model, k = model_for_cycle(n)
        g = cycle_graph(n)
        pinned = conditional_slice_probability(g, model.lam, k, PinSet([0]))
        scaled.append(float(abs(pinned - slice_probability(model, k))) * n**1.5)
    assert max(scaled) < 1e-3


def test_cumulant_stability_edge():
    diffs = cumulant_stability(path_graph(2), 0, Fraction(1), 4)
    assert diffs[1] == Fraction(1, 2)


def test_cumulant_stability_empty_graph():
    diffs = cumulant_stability(empty_graph(6), 2, Fraction(2, 3), 4)
    assert diffs[1] == 1 and diffs[2] == 0


def test_cumulant_stability_errors():
    with pytest.raises(ValueError):
        cumulant_stability(empty_graph(1), 0, 1)
    with pytest.raises(ValueError):
        cumulant_stability(path_graph(3), 0, 0)


def test_cumulant_stability_bounded_on_paths():
    maxima = [max(cumulant_stability(path_graph(n), n // 2, Fraction(1, 2), 4).values()) for n in (50, 100, 200, 400)]
    assert maxima[-1] <= 1.25 * maxima[0]


@pytest.mark.parametrize("g, k, value", [(empty_graph(2), 1, Fraction(1, 2)), (path_graph(3), 1, Fraction(1, 3)), (path_graph(3), 2, 0)])
def test_marginal_bounds(g, k, value):
    assert marginal_bounds(g, k) == value


def test_marginals_match_enumeration(corpus):
    from kslice.count import enumerate_slice

    g = corpus["grid2x4"]
    space = enumerate_slice(g, 3)
    for u in range(g.n):
        hits = sum((s >> u) & 1 for s in space)
        assert pinned_marginal(g, 3, u) == Fraction(hits, len(space))


def test_marginal_bounds_empty_slice():
    with pytest.raises(ValueError):
        marginal_bounds(complete_graph(3), 2)
