"""``sepness`` command line: exact solves, closed forms, simulation and verification.

Exit codes: 0 success, 1 input error, 2 capacity exceeded, 3 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import closed_forms as cf
from . import exact
from . import ninja as nj
from . import simulate as sim
from . import verify as vf
from .lattice import (AbgdParams, CapacityError, GraphSpec, ParameterError, from_abgd,
                      homogeneous_segment, site_set, sites_of)

EXIT_OK, EXIT_INPUT, EXIT_CAPACITY, EXIT_VERIFY = 0, 1, 2, 3
DEFAULT_CHUNKS = 16


class InputError(Exception):
    pass


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _float_list(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(t) for t in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc


def _graph_args(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group()
    src.add_argument("--segment", type=int, metavar="N",
                     help="homogeneous segment with reservoirs at 0 and N (bulk 1..N-1)")
    src.add_argument("--segment-n", type=int, metavar="N", help="alias of --segment")
    src.add_argument("--graph", metavar="PATH", help="graph JSON file")
    p.add_argument("--rho-l", type=float, default=0.2)
    p.add_argument("--rho-r", type=float, default=0.8)
    p.add_argument("--omega-l", type=float, default=1.0)
    p.add_argument("--omega-r", type=float, default=1.0)
    p.add_argument("--abgd", type=_float_list, metavar="A,B,G,D",
                   help="reservoirs from creation/annihilation rates (segments only)")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", metavar="PATH", help="write here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sepness", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("exact", help="stationary law and mixture weights")
    _graph_args(p); _common(p)

    p = sub.add_parser("absorption", help="dual absorption probabilities")
    _graph_args(p); _common(p)
    p.add_argument("--sites", type=_int_list, required=True)
    p.add_argument("--only", choices=("all-at-n",))

    p = sub.add_parser("correlations", help="n-point correlation formulas")
    _graph_args(p); _common(p)
    p.add_argument("--points", type=_int_list, required=True)
    p.add_argument("--centered", action="store_true")
    p.add_argument("--check", action="store_true", help="compare with the exact stationary law")

    p = sub.add_parser("simulate", help="Monte Carlo estimates")
    _graph_args(p); _common(p)
    p.add_argument("--mode", choices=("sep", "dual", "stirring", "ninja"), required=True)
    p.add_argument("--sites", type=_int_list)
    p.add_argument("--ninja", type=int, help="ninja start (ninja mode)")
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    p.add_argument("--t-max", type=float, default=1e4, help="time horizon (sep mode)")
    p.add_argument("--observables", nargs="+", type=_int_list,
                   help="site sets, e.g. 1 2 1,2 (sep mode; default every single site)")
    p.add_argument("--event-log", metavar="PATH", help="CSV event log (sep mode)")

    p = sub.add_parser("verify", help="run the deterministic check battery")
    _common(p)
    p.add_argument("--suite", choices=("all",) + vf.SUITES, default="all")
    p.add_argument("--segment-n", type=int, help="single N for the martingale suite")
    p.add_argument("--max-n", type=int, help="largest N for the ninja and formula suites")
    p.add_argument("--seed", type=int, default=0)
    return ap


def graph_from_args(a) -> GraphSpec:
    N = a.segment if a.segment is not None else a.segment_n
    if a.graph:
        if a.abgd:
            raise InputError("--abgd applies to segments only")
        try:
            with open(a.graph) as fh:
                g = GraphSpec.from_json(fh.read())
        except OSError as exc:
            raise InputError(str(exc)) from exc
        except json.JSONDecodeError as exc:
            raise InputError(f"malformed graph JSON: {exc}") from exc
    elif N is not None:
        if N < 2:
            raise InputError("a segment needs N >= 2 (at least one bulk site)")
        if a.abgd:
            if len(a.abgd) != 4:
                raise InputError("--abgd takes four numbers")
            g = from_abgd(N - 1, AbgdParams(*a.abgd))
        else:
            g = homogeneous_segment(N - 1, a.omega_l, a.omega_r, a.rho_l, a.rho_r)
    else:
        raise InputError("give --segment N or --graph PATH")
    return g.check()


# -- commands ----------------------------------------------------------------

def cmd_exact(a, g: GraphSpec) -> dict:
    sd = exact.stationary_distribution(g)
    w = cf.mixture_weights(g)
    mu = cf.mixture_measure(g, w)
    dev = float(np.max(np.abs(mu.probs - sd.probs)))
    rows = [{"config_bits": m, "stationary": float(sd.probs[m]), "mixture": float(mu.probs[m])}
            for m in range(sd.probs.size)]
    return {
        "results": {"stationary": sd.to_dict(), "mixture_weights": w.to_dict()},
        "residuals": {"max_deviation": dev},
        "pass": dev < 1e-9,
        "table": (["config_bits", "stationary", "mixture"], rows),
    }


def cmd_absorption(a, g: GraphSpec) -> dict:
    xs = site_set(a.sites, g.n_sites)
    if not xs:
        raise InputError("--sites must name at least one site")
    N = g.N
    homog = g.is_homogeneous_segment()
    wl, wr = g.omega_left, g.omega_right
    if a.only == "all-at-n":
        oracle = exact.all_absorbed_at_N(g, xs)
        closed = float(cf.absorption_product(N, wl, wr, xs)) if homog else None
        res = {"all_at_N": {"oracle": oracle, "closed_form": closed}}
        rows = [{"quantity": "all_at_N", "closed_form": closed, "oracle": oracle}]
        disc = abs(closed - oracle) if homog else 0.0
    else:
        oracle = exact.absorption_distribution(g, xs).probs
        closed = [float(v) for v in cf.absorption_levels(N, wl, wr, xs)] if homog else None
        res = {"levels": {"oracle": oracle.tolist(), "closed_form": closed}}
        rows = [{"level": j, "closed_form": closed[j] if homog else None, "oracle": float(oracle[j])}
                for j in range(oracle.size)]
        disc = float(np.max(np.abs(np.array(closed) - oracle))) if homog else 0.0
    header = list(rows[0])
    return {"results": {"sites": list(xs), **res}, "residuals": {"max_discrepancy": disc},
            "pass": disc < 1e-12, "table": (header, rows)}


def cmd_correlations(a, g: GraphSpec) -> dict:
    pts = tuple(a.points)
    if not pts or any(b <= x for x, b in zip(pts, pts[1:])):
        raise InputError("--points must be strictly increasing")
    site_set(pts, g.n_sites)
    if not g.is_homogeneous_segment():
        raise InputError("correlation formulas are available on homogeneous segments only")
    N, wl, wr, rl, rr = g.N, g.omega_left, g.omega_right, g.rho_left, g.rho_right
    req = cf.CorrelationRequest(pts, a.centered)
    value = float(cf.n_point_correlation(req, N, wl, wr, rl, rr))
    results = {"points": list(pts), "centered": a.centered, "formula": value}
    row = {"points": " ".join(map(str, pts)), "centered": a.centered, "formula": value}
    if a.centered and len(pts) % 2:
        # the literal centered formula carries the opposite sign for odd n
        results["formula_sign_corrected"] = float(cf.centered_correlation(N, wl, wr, rl, rr, pts))
    residuals, ok = {}, True
    if a.check:
        sd = exact.stationary_distribution(g)
        oracle = sd.centered_moment(pts) if a.centered else sd.moment(pts)
        disc = abs(value - oracle)
        results["oracle"] = oracle
        residuals["discrepancy"] = disc
        row.update(oracle=oracle, discrepancy=disc)
        ok = disc < 1e-10
    return {"results": results, "residuals": residuals, "pass": ok,
            "table": (list(row), [row])}


def _replicated(fn, args, total: int, rng: sim.RngStream) -> sim.McEstimate:
    """Pool at least ``total`` samples of ``fn(*args, n, rng)`` over independent child streams."""
    n = max(2, min(DEFAULT_CHUNKS, total // 2))
    return sim.run_replicas(_BoundTask(fn, args, -(-total // n)), n, rng)


class _BoundTask:
    """Picklable replica task."""

    def __init__(self, fn, args, size):
        self.fn, self.args, self.size = fn, args, size

    def __call__(self, rng):
        return self.fn(*self.args, self.size, rng)


def cmd_simulate(a, g: GraphSpec) -> dict:
    if a.replicas < 2:
        raise InputError("--replicas must be >= 2")
    rng = sim.RngStream(a.seed, a.stream)
    N = g.N
    if a.mode == "sep":
        obs = a.observables or [(x,) for x in range(1, g.n_sites + 1)]
        for o in obs:
            site_set(o, g.n_sites)
        if a.t_max <= 0:
            raise InputError("--t-max must be positive")
        log = open(a.event_log, "w", newline="") if a.event_log else None
        try:
            r = sim.simulate_sep(g, 0, a.t_max, rng, obs, event_log=log)
        finally:
            if log:
                log.close()
        rows = [{"quantity": "moment " + " ".join(map(str, s)), "mean": e.mean,
                 "stderr": e.stderr, "n": e.n_samples} for s, e in zip(r.observables, r.estimates)]
        return {"results": r.to_dict(), "residuals": {}, "pass": True,
                "table": (list(rows[0]), rows)}
    if a.mode == "dual":
        xs = site_set(a.sites or (), g.n_sites)
        if not xs:
            raise InputError("dual mode needs --sites")
        est = _replicated(sim.dual_level_samples, (g, xs), a.replicas, rng)
        target = exact.absorption_distribution(g, xs).probs
        labels = [f"level {j}" for j in range(len(xs) + 1)]
    elif a.mode == "stirring":
        if g.n_sites > 12:
            raise CapacityError("stirring pattern tables are capped at 12 bulk sites")
        est = _replicated(_stirring_onehot, (g,), a.replicas, rng)
        w = cf.mixture_weights(g)
        target = np.array([float(v) for v in w.weights])
        labels = ["F " + ",".join(map(str, sites_of(m))) for m in range(1 << g.n_sites)]
    else:
        if a.ninja is None or a.sites is None:
            raise InputError("ninja mode needs --sites and --ninja")
        if not g.is_homogeneous_segment(unit_boundary=True):
            raise InputError("ninja mode needs a unit-conductance segment")
        xs = tuple(a.sites)
        nj.check_start(N, xs, a.ninja)
        est = _replicated(sim.ninja_samples, (N, xs, a.ninja), a.replicas, rng)
        n = est.n_samples
        pE, pE0 = float(est.mean[1]), float(est.mean[3])
        n_E = int(round(pE * n))
        p = pE0 / pE if pE > 0 else float("nan")
        se = float(np.sqrt(p * (1 - p) / n_E)) if n_E > 1 else float("nan")
        rows = [
            {"quantity": "P(all labels at N)", "mean": pE, "stderr": float(est.stderr[1]),
             "n": n, "target": nj.projected_all_at_n(N, xs, a.ninja)},
            {"quantity": "P(ninja at 0 | all labels at N)", "mean": p, "stderr": se,
             "n": n_E, "target": nj.predicted_ninja_at_0_given_E(N, xs, a.ninja)},
        ]
        zs = [float(sim.McEstimate(r["mean"], r["stderr"], 2).z_score(r["target"])) for r in rows]
        return {"results": {"mode": "ninja", "rng": sim.RNG_ALGORITHM, "estimates": rows},
                "residuals": {"max_z": max(zs)}, "pass": max(zs) < 4,
                "table": (list(rows[0]), rows)}
    z = np.asarray(est.z_score(target))
    rows = [{"quantity": q, "mean": float(m), "stderr": float(s), "n": est.n_samples, "target": float(t)}
            for q, m, s, t in zip(labels, est.mean, est.stderr, target)]
    return {"results": {"mode": a.mode, "rng": sim.RNG_ALGORITHM, "estimates": rows},
            "residuals": {"max_z": float(np.max(z))}, "pass": bool(np.max(z) < 4),
            "table": (list(rows[0]), rows)}


def _stirring_onehot(g, n_runs, rng):
    pats = sim.stirring_pattern_samples(g, n_runs, rng)
    out = np.zeros((n_runs, 1 << g.n_sites))
    out[np.arange(n_runs), pats] = 1.0
    return out


def cmd_verify(a) -> dict:
    checks = vf.run_suite(a.suite, max_n=a.max_n, segment_n=a.segment_n)
    failed = [c.name for c in checks if not c.passed]
    rows = [c.to_dict() for c in checks]
    return {"results": {"suite": a.suite, "checks": rows, "failed": failed},
            "residuals": {c.name: c.residual for c in checks},
            "pass": not failed,
            "table": (["name", "residual", "tolerance", "pass"], rows)}


# -- output --------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    return str(v)


def _params(a, g: GraphSpec | None) -> dict:
    d = {k: v for k, v in vars(a).items() if k not in ("command",)}
    d["invocation"] = ["sepness"] + sys.argv[1:]
    if g is not None:
        d["graph"] = g.to_dict()
        d["graph_hash"] = g.content_hash()
    return d


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        body = {k: report[k] for k in ("command", "params", "seed", "results", "residuals", "pass")}
        return json.dumps(body, indent=2, default=_jsonable) + "\n"
    header, rows = report["table"]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in header})
    return buf.getvalue()


def main(argv=None) -> int:
    ap = build_parser()
    a = ap.parse_args(argv)
    g = None
    try:
        if a.command == "verify":
            report = cmd_verify(a)
        else:
            g = graph_from_args(a)
            report = {"exact": cmd_exact, "absorption": cmd_absorption,
                      "correlations": cmd_correlations, "simulate": cmd_simulate}[a.command](a, g)
    except CapacityError as exc:
        print(f"sepness: capacity exceeded: {exc}", file=sys.stderr)
        return EXIT_CAPACITY
    except (InputError, ParameterError) as exc:
        print(f"sepness: {exc}", file=sys.stderr)
        return EXIT_INPUT
    report.update(command=a.command, params=_params(a, g), seed=getattr(a, "seed", None))
    text = render(report, a.format)
    if a.output:
        with open(a.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if a.command == "verify" and not report["pass"]:
        print("sepness: failed checks: " + ", ".join(report["results"]["failed"]), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
