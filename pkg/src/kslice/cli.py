"""Command-line interface: ``kslice <command> ...``.

Exit codes: 0 success, 1 an invariant failed, 2 bad configuration or input.
JSON reports carry a ``schema`` field; numbers are written as decimal strings
(exact rationals as ``p/q``) so identical runs give byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from fractions import Fraction
from importlib import resources
from pathlib import Path

import mpmath
import numpy as np

from . import count, graph, hardcore, spectral, walks

SCHEMA = "kslice/1"
DEFAULT_SEED = 20240611
CORPUS_ENV = "KSLICE_CORPUS"
SWEEP_COLUMNS = ("n", "k", "states", "gamma", "gamma_k", "linf", "lambda_max", "lsi", "tau_mix", "error")


class ConfigError(Exception):
    pass


# ---------------------------------------------------------------- formatting


def dec(x, digits: int = 17) -> str | None:
    if x is None:
        return None
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, int):
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    if isinstance(x, mpmath.mpf):
        return mpmath.nstr(x, 30, strip_zeros=False)
    x = float(x)
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, f".{digits}g")


def emit(report: dict, out: str | None) -> None:
    text = json.dumps({"schema": SCHEMA, **report}, indent=2) + "\n"
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def load_graph(path: str) -> graph.Graph:
    try:
        return graph.read_graph(path)
    except OSError as exc:
        raise ConfigError(f"cannot read graph {path}: {exc}") from exc


def parse_mask(text: str, g: graph.Graph) -> int:
    """Comma-separated vertex list (``"0,2"``) or empty string for the empty set."""
    verts = [int(v) for v in text.split(",") if v.strip()]
    for v in verts:
        if not 0 <= v < g.n:
            raise ConfigError(f"vertex {v} out of range")
    return graph.to_mask(verts)


def component_of(g: graph.Graph, v: int) -> tuple[int, ...]:
    for comp in graph.components(g).components:
        if v in comp:
            return comp
    raise ConfigError(f"vertex {v} out of range")


def build(g: graph.Graph, k: int, variant: str, cap: int) -> walks.Kernel:
    space = count.enumerate_slice(g, k)
    if not len(space):
        raise ConfigError(f"slice k={k} is empty")
    return walks.build_kernel(space, variant, cap)


# ---------------------------------------------------------------- commands


def cmd_thresholds(args) -> int:
    lam = hardcore.critical_activity(args.delta)
    alpha = hardcore.critical_density(args.delta)
    if args.format == "json":
        emit({"delta": args.delta, "lambda_c": dec(lam), "alpha_c": dec(alpha),
              "lambda_c_decimal": dec(float(lam)), "alpha_c_decimal": dec(float(alpha))}, args.out)
    else:
        print(f"lambda_c = {lam}, alpha_c = {alpha}")
        print(f"lambda_c ~ {float(lam):.12g}, alpha_c ~ {float(alpha):.12g}")
    return 0


def cmd_sample(args) -> int:
    g = load_graph(args.graph)
    cfg = walks.ChainConfig(args.variant, args.steps, args.seed, args.thinning, args.initial,
                            parse_mask(args.start, g) if args.start is not None else None,
                            keep_trajectory=args.trajectory is not None)
    out = walks.simulate(g, args.k, cfg)
    if args.trajectory:
        walks.write_trajectory(args.trajectory, out.trajectory)
    emit({
        "command": "sample", "variant": args.variant, "k": args.k, "steps": args.steps, "seed": args.seed,
        "initial": graph.bits(out.initial), "final": graph.bits(out.final),
        "proposals": out.proposals, "moves": out.accepted,
        "move_rate": dec(out.accepted / out.proposals) if out.proposals else None,
        "visits": [{"state": graph.bits(s), "count": c} for s, c in sorted(out.visits.items())],
    }, args.out)
    return 0


def cmd_spectrum(args) -> int:
    g = load_graph(args.graph)
    kern = build(g, args.k, args.variant, args.max_states)
    infl = spectral.influence_matrix(g, args.k)
    lam_max, linf = spectral.independence_norms(infl)
    rep = spectral.lsi_constant(kern, args.restarts, args.seed) if len(kern) > 1 else None
    emit({
        "command": "spectrum", "variant": args.variant, "k": args.k, "states": len(kern),
        "gamma": dec(spectral.spectral_gap(kern)),
        "lsi_estimate": dec(rep.lsi) if rep else None,
        "lsi_certificate_holds": rep.certificate_holds(kern) if rep else None,
        "linf": dec(linf), "lambda_max": dec(lam_max), "flagged_rows": list(infl.flagged),
    }, args.out)
    return 0


def cmd_cumulants(args) -> int:
    g = load_graph(args.graph)
    lam = Fraction(args.lam)
    rep = hardcore.cumulants(hardcore.HardCoreModel(count.size_counts(g), lam), args.d)
    emit({"command": "cumulants", "lambda": dec(lam), "mean": dec(rep.mean), "variance": dec(rep.variance),
          "cumulants": [dec(c) for c in rep.cumulants],
          "beta": {str(j): dec(b) for j, b in rep.beta.items()}}, args.out)
    return 0


def cmd_edgeworth(args) -> int:
    g = load_graph(args.graph)
    counts = count.size_counts(g)
    lam = Fraction(args.lam) if args.lam else hardcore.solve_activity(counts, args.k, args.tol)
    model = hardcore.HardCoreModel(counts, lam)
    rep = hardcore.cumulants(model, max(6, 2 * args.d + 2))
    exact = hardcore.slice_probability(model, args.k)
    est = hardcore.edgeworth_estimate(rep, args.k - hardcore.to_mpf(rep.mean), args.d)
    emit({"command": "edgeworth", "k": args.k, "d": args.d, "lambda": dec(hardcore.to_mpf(lam)),
          "exact": dec(hardcore.to_mpf(exact)), "estimate": dec(est),
          "abs_error": dec(abs(hardcore.to_mpf(exact) - est))}, args.out)
    return 0


def cmd_induced(args) -> int:
    g = load_graph(args.graph)
    comp = component_of(g, args.vertex)
    chain = spectral.induced_kernel(g, comp, args.k)
    marg = spectral.slice_marginal(g, comp, args.k)
    kern = chain.kernel
    matches = all(marg.get(s, 0) == p for s, p in zip(kern.states, kern.exact_pi))
    identity = spectral.additions_identity_holds(chain)
    cmp = spectral.induced_vs_hardcore(g, comp, args.k)
    emit({"command": "induced", "component": list(comp), "k": args.k,
          "stationary": [{"state": graph.bits(s), "probability": dec(p)} for s, p in zip(kern.states, kern.exact_pi)],
          "marginal_matches": matches, "additions_identity": identity,
          "gamma": dec(spectral.spectral_gap(kern)),
          "hardcore_activity": dec(cmp.activity), "stationary_ratio_max": dec(cmp.stationary_ratio_max),
          "stationary_ratio_min": dec(cmp.stationary_ratio_min),
          "transition_deviation": dec(cmp.transition_deviation)}, args.out)
    return 0 if matches and identity else 1


def cmd_decompose(args) -> int:
    g = load_graph(args.graph)
    comp = component_of(g, args.u)
    space = count.enumerate_slice(g, args.k)
    if not len(space):
        raise ConfigError(f"slice k={args.k} is empty")
    rng = np.random.default_rng(np.random.SeedSequence([args.seed, 2]))
    f = rng.exponential(size=len(space))
    rows = []
    local = [s for s in {x & graph.to_mask(comp) for x in space} if (s >> args.u) & 1]
    for I_G in sorted(local):
        try:
            res = spectral.decomposition_ratio(space, comp, I_G, args.u, f)
        except ValueError:
            continue
        rows.append({"I_G": graph.bits(I_G), "lhs": dec(res.lhs), "rhs": dec(res.rhs),
                     "ratio": dec(res.ratio), "unbounded": res.unbounded})
    emit({"command": "decompose", "u": args.u, "k": args.k, "seed": args.seed, "rows": rows}, args.out)
    return 0


def cmd_mixing(args) -> int:
    g = load_graph(args.graph)
    kern = build(g, args.k, args.variant, args.max_states)
    prof = spectral.mixing_profile(kern, args.horizon, eps=args.eps)
    gap = spectral.spectral_gap(kern)
    env = [spectral.tv_envelope(gap, kern.pi, t) for t in range(args.horizon + 1)]
    ok = all(tv <= e + 1e-12 for tv, e in zip(prof.tv, env))
    emit({"command": "mixing", "variant": args.variant, "k": args.k, "gamma": dec(gap),
          "tau_mix": prof.tau, "eps": dec(args.eps), "tv": [dec(x) for x in prof.tv],
          "envelope_holds": ok}, args.out)
    return 0 if ok else 1


# ---------------------------------------------------------------- sweep


def family_graph(spec: dict, n: int, index: int) -> graph.Graph:
    fam = spec.get("family")
    if fam == "empty":
        return graph.empty_graph(n, spec.get("delta", 1))
    if fam == "path":
        return graph.path_graph(n)
    if fam == "cycle":
        return graph.cycle_graph(n)
    if fam == "random":
        rng = np.random.default_rng(np.random.SeedSequence([spec.get("seed", 0), n, index]))
        return graph.random_bounded_degree_graph(n, spec.get("delta", 3), rng, spec.get("density", 1.0))
    raise ConfigError(f"unknown family {fam!r}")


def sweep_rows(spec: dict) -> list[tuple[int, int, int]]:
    """(n, k, instance index) triples from either explicit rows or sizes x k-rule."""
    if "rows" in spec:
        return [(int(r["n"]), int(r["k"]), int(r.get("instance", 0))) for r in spec["rows"]]
    if "sizes" not in spec:
        raise ConfigError("sweep spec needs 'rows' or 'sizes'")
    out = []
    for n in spec["sizes"]:
        if "k_fraction" in spec:
            ks = [math.floor(Fraction(spec["k_fraction"]) * n)]
        else:
            ks = spec.get("k", [1])
            ks = ks if isinstance(ks, list) else [ks]
        for k in ks:
            for i in range(spec.get("instances", 1)):
                out.append((int(n), int(k), i))
    return out


def sweep_row(spec: dict, n: int, k: int, index: int) -> dict:
    row = {c: "" for c in SWEEP_COLUMNS}
    row.update(n=n, k=k)
    try:
        if not 0 <= k <= n:
            raise ValueError(f"k={k} outside [0, {n}]")
        g = family_graph(spec, n, index)
        space = count.enumerate_slice(g, k)
        if not len(space):
            raise ValueError(f"slice k={k} is empty")
        kern = walks.build_kernel(space, spec.get("variant", "metropolis"), spec.get("max_states", walks.DEFAULT_MAX_STATES))
        gap = spectral.spectral_gap(kern)
        lam_max, linf = spectral.independence_norms(spectral.influence_matrix(g, k))
        row.update(states=len(kern), gamma=dec(gap, 12), gamma_k=dec(gap * k, 12), linf=dec(linf, 12),
                   lambda_max=dec(lam_max, 12))
        if spec.get("lsi", False) and len(kern) > 1:
            row["lsi"] = dec(spectral.lsi_constant(kern, spec.get("restarts", 8), spec.get("seed", 0)).lsi, 12)
        if len(kern) > 1 and gap > 0:
            row["tau_mix"] = spectral.mixing_time(kern, spec.get("eps", 0.25))
    except (ValueError, ArithmeticError) as exc:
        row["error"] = str(exc)
    return row


def cmd_sweep(args) -> int:
    try:
        spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load sweep spec: {exc}") from exc
    if not isinstance(spec, dict):
        raise ConfigError("sweep spec must be a JSON object")
    if spec.get("variant", "metropolis") not in walks.VARIANTS:
        raise ConfigError(f"unknown variant {spec.get('variant')!r}")
    rows = [sweep_row(spec, n, k, i) for n, k, i in sweep_rows(spec)]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    if args.out:
        Path(args.out).write_text(buf.getvalue(), encoding="utf-8")
    else:
        sys.stdout.write(buf.getvalue())
    return 0


# ---------------------------------------------------------------- verify


def corpus_dir(arg: str | None) -> Path:
    if arg:
        return Path(arg)
    if os.environ.get(CORPUS_ENV):
        return Path(os.environ[CORPUS_ENV])
    return Path(str(resources.files("kslice") / "corpus"))


def load_corpus(path: Path) -> dict[str, graph.Graph]:
    if not path.is_dir():
        raise ConfigError(f"corpus directory {path} not found")
    files = sorted(path.glob("*.txt"))
    if not files:
        raise ConfigError(f"corpus directory {path} holds no graphs")
    out = {}
    for f in files:
        try:
            out[f.stem] = graph.read_graph(f)
        except (OSError, graph.GraphFormatError) as exc:
            raise ConfigError(f"{f.name}: {exc}") from exc
    return out


def _hdx_is_conditioned_metropolis(g: graph.Graph, k: int) -> bool:
    # for each (x, u): metropolis moves removing u, divided by the chance of a
    # valid proposal, must equal the hdx moves removing u
    for x in count.enumerate_slice(g, k):
        for u in graph.bits(x):
            rest = x ^ (1 << u)
            valid = [w for w in range(g.n) if not (rest >> w) & 1 and not g.masks[w] & rest]
            metro = {rest | (1 << w): Fraction(1, g.n) for w in valid}
            accept = sum(metro.values())
            hdx = {rest | (1 << w): Fraction(1, len(valid)) for w in valid}
            if {y: p / accept for y, p in metro.items()} != hdx:
                return False
    return True


def invariant_checks(name: str, g: graph.Graph, fixtures: dict, max_states: int = 700):
    """Yield (invariant name, passed, detail) for one corpus graph."""
    yield "round_trip", graph.parse_graph(graph.serialize_graph(g)) == g, ""
    dec_ = graph.components(g)
    yield "components_cover", sorted(v for c in dec_.components for v in c) == list(range(g.n)), ""
    counts = count.size_counts(g)
    expected = fixtures.get(name)
    yield "count_fixture", expected is not None and [int(c) for c in expected] == list(counts.counts), str(expected)
    if count.is_structured(g):
        yield "brute_equals_dp", count.size_counts(g, method="brute") == count.size_counts(g, method="dp"), ""
    additive = True
    for u in range(g.n):
        a = count.size_counts(g, count.PinSet([u]))
        b = count.size_counts(g, count.PinSet(out_pins=[u]))
        additive &= all(a[j] + b[j] == counts[j] for j in range(g.n + 1))
    yield "pinned_additivity", additive, ""
    multi = len(dec_.components) > 1
    for k in range(len(counts)):
        if counts[k] == 0:
            continue
        space = count.enumerate_slice(g, k)
        if len(space) > max_states:
            continue
        for variant in walks.VARIANTS:
            try:
                walks.build_kernel(space, variant, max_states)
                yield f"kernel_{variant}_k{k}", True, ""
            except walks.KernelError as exc:
                yield f"kernel_{variant}_k{k}", False, str(exc)
        if k:
            yield f"hdx_conditioned_k{k}", _hdx_is_conditioned_metropolis(g, k), ""
        if multi and k:
            for comp in dec_.components:
                chain = spectral.induced_kernel(g, comp, k)
                marg = spectral.slice_marginal(g, comp, k)
                ok = all(marg.get(s, 0) == p for s, p in zip(chain.kernel.states, chain.kernel.exact_pi))
                yield f"induced_marginal_k{k}_c{comp[0]}", ok, ""
                yield f"additions_identity_k{k}_c{comp[0]}", spectral.additions_identity_holds(chain), ""


def cmd_verify(args) -> int:
    path = corpus_dir(args.corpus)
    corpus = load_corpus(path)
    fixture_file = path / "counts.json"
    try:
        fixtures = json.loads(fixture_file.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot load {fixture_file}: {exc}") from exc
    results = []
    for name, g in corpus.items():
        for check, ok, detail in invariant_checks(name, g, fixtures):
            results.append({"graph": name, "invariant": check, "passed": bool(ok), "detail": detail})
    failures = [r for r in results if not r["passed"]]
    emit({"command": "verify", "corpus": str(path), "checks": len(results), "failures": failures,
          "passed": not failures}, args.out)
    for r in failures:
        print(f"FAILED {r['graph']}: {r['invariant']}", file=sys.stderr)
    return 1 if failures else 0


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=DEFAULT_SEED)
    common.add_argument("--tol", type=float, default=1e-9)
    common.add_argument("--format", choices=("json", "csv", "text"), default="json")
    common.add_argument("--out", default=None, help="output file (default stdout)")

    p = argparse.ArgumentParser(prog="kslice", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("thresholds", parents=[common], help="critical activity and density")
    s.add_argument("--delta", type=int, required=True)
    s.set_defaults(func=cmd_thresholds, format="text")

    def graph_k(name, func, help_):
        s = sub.add_parser(name, parents=[common], help=help_)
        s.add_argument("--graph", required=True)
        s.add_argument("--k", type=int, required=True)
        s.set_defaults(func=func)
        return s

    s = graph_k("sample", cmd_sample, "simulate a down-up walk")
    s.add_argument("--variant", choices=walks.VARIANTS, default="metropolis")
    s.add_argument("--steps", type=int, default=10000)
    s.add_argument("--thinning", type=int, default=1)
    s.add_argument("--initial", choices=("fixed", "greedy", "uniform"), default="greedy")
    s.add_argument("--start", default=None, help="comma-separated vertices for --initial fixed")
    s.add_argument("--trajectory", default=None, help="write every recorded state as hex, one per line")

    s = graph_k("spectrum", cmd_spectrum, "gap, LSI estimate and independence norms")
    s.add_argument("--variant", choices=walks.VARIANTS, default="metropolis")
    s.add_argument("--restarts", type=int, default=32)
    s.add_argument("--max-states", type=int, default=walks.DEFAULT_MAX_STATES)

    s = graph_k("edgeworth", cmd_edgeworth, "Edgeworth estimate of P(|I| = k) against the exact value")
    s.add_argument("--d", type=int, default=2)
    s.add_argument("--lam", default=None, help="activity (default: solve for mean k)")

    s = sub.add_parser("cumulants", parents=[common], help="cumulants of |I| under the hard-core model")
    s.add_argument("--graph", required=True)
    s.add_argument("--lam", required=True)
    s.add_argument("--d", type=int, default=6)
    s.set_defaults(func=cmd_cumulants)

    s = graph_k("induced", cmd_induced, "chain induced on the component of a vertex")
    s.add_argument("--vertex", type=int, required=True)

    s = graph_k("decompose", cmd_decompose, "decomposition ratios for a random f")
    s.add_argument("--u", type=int, required=True)

    s = graph_k("mixing", cmd_mixing, "exact total-variation profile")
    s.add_argument("--variant", choices=walks.VARIANTS, default="metropolis")
    s.add_argument("--horizon", type=int, default=100)
    s.add_argument("--eps", type=float, default=0.25)
    s.add_argument("--max-states", type=int, default=walks.DEFAULT_MAX_STATES)

    s = sub.add_parser("sweep", parents=[common], help="CSV table over a graph family")
    s.add_argument("spec")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("verify", parents=[common], help="run corpus invariants")
    s.add_argument("--corpus", default=None, help=f"corpus directory (default ${CORPUS_ENV} or the shipped corpus)")
    s.set_defaults(func=cmd_verify)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, ZeroDivisionError, walks.KernelError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
