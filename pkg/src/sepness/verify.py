"""Deterministic check battery behind ``sepness verify``.

Every check compares two independently computed quantities and records the
largest discrepancy.  Suites return lists of :class:`Check`; nothing here
raises on a failed comparison.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product

import numpy as np

from . import closed_forms as cf
from . import exact
from . import ninja as nj
from .lattice import GraphSpec, homogeneous_segment, standard_battery

OMEGA_GRID = (0.5, 1.0, 3.0)
SUITES = ("duality", "martingales", "ninja", "mixture", "formulas")


@dataclass(frozen=True)
class Check:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual < self.tolerance)

    def to_dict(self) -> dict:
        return {"name": self.name, "residual": self.residual,
                "tolerance": self.tolerance, "pass": self.passed}


def mixture_graphs() -> list[tuple[str, GraphSpec]]:
    """Segments with 2..5 bulk sites at assorted conductances, plus a tree and a cycle with chord."""
    omegas = [(1, 1), (0.5, 3), (3, 1), (2, 0.5)]
    out = [(f"segment-N{n + 1}-wl{wl}-wr{wr}", homogeneous_segment(n, wl, wr, 0.2, 0.8))
           for n, (wl, wr) in zip((2, 3, 4, 5), omegas)]
    out += [(name, g) for name, g in standard_battery() if name in ("tree-5", "cycle-chord-5")]
    return out


def mixture_suite(graphs=None) -> list[Check]:
    out = []
    for name, g in graphs or mixture_graphs():
        w = cf.mixture_weights(g)
        vals = np.array([float(v) for _, v in w.items()])
        mu = cf.mixture_measure(g, w).probs
        pi = exact.stationary_distribution(g).probs
        out.append(Check(f"mixture/{name}/stationary", float(np.max(np.abs(mu - pi))), 1e-9))
        out.append(Check(f"mixture/{name}/sum", abs(float(vals.sum()) - 1.0), 1e-10))
        # residual counts the non-positive weights
        out.append(Check(f"mixture/{name}/positive", float(np.sum(vals <= 0)), 0.5))
    return out


def duality_suite(graphs=None, max_dual_particles: int = 2) -> list[Check]:
    out = []
    for name, g in graphs or standard_battery():
        r = exact.check_generator_duality(g, max_dual_particles)
        out.append(Check(f"duality/{name}", r, 1e-12))
        ok = exact.check_dual_conservation(g)
        out.append(Check(f"duality/{name}/conservation", 0.0 if ok else 1.0, 0.5))
    return out


def martingale_suite(Ns=range(3, 7), omegas=OMEGA_GRID, rule: str = "indicator") -> list[Check]:
    out = []
    for N in Ns:
        for wl, wr in product(omegas, repeat=2):
            r = exact.check_two_particle_martingales(N, wl, wr, rule=rule)
            out.append(Check(f"martingales/N{N}/wl{wl}/wr{wr}", r, 1e-12))
    return out


def ninja_suite(max_n: int = 7, generator_max_n: int = 6, generator_max_k: int = 2) -> list[Check]:
    """Size-reduction recursion for every start with ``N <= max_n``, plus coupling checks.

    The generator-level coupling checks (label forgetting, projection,
    conditional identity) run on ``N <= generator_max_n`` and at most
    ``generator_max_k`` labels because the labelled state space grows fast.
    """
    out = []
    for N in range(2, max_n + 1):
        worst = 0.0
        for k in range(1, N):
            for xs in combinations(range(1, N), k):
                worst = max(worst, cf.ninja_recursion_residual(N, xs)[0])
        out.append(Check(f"ninja/recursion/N{N}", worst, 1e-12))
    for N in range(2, min(max_n, generator_max_n) + 1):
        forget = proj = cond = 0.0
        for k in range(0, generator_max_k + 1):
            for xs, y in nj.admissible_starts(N, k, rightmost=False):
                forget = max(forget, nj.label_forgetting_residual(N, xs, y))
                proj = max(proj, nj.projection_residual(N, xs, y))
                s = nj.exact_summary(N, xs, y)
                if s["all_labels_at_N"] > 0:
                    cond = max(cond, abs(s["ninja_at_0_given_E"] - nj.predicted_ninja_at_0_given_E(N, xs, y)))
        out.append(Check(f"ninja/label-forgetting/N{N}", forget, 1e-12))
        out.append(Check(f"ninja/projection/N{N}", proj, 1e-12))
        out.append(Check(f"ninja/conditional/N{N}", cond, 1e-12))
    return out


def product_formula_checks(max_N: int = 8, max_k: int = 4, omegas=OMEGA_GRID) -> list[Check]:
    out = []
    for N in range(2, max_N + 1):
        for wl, wr in product(omegas, repeat=2):
            g = homogeneous_segment(N - 1, wl, wr)
            worst = 0.0
            for k in range(1, min(max_k, N - 1) + 1):
                for xs in combinations(range(1, N), k):
                    worst = max(worst, abs(float(cf.absorption_product(N, wl, wr, xs))
                                           - exact.all_absorbed_at_N(g, xs)))
            out.append(Check(f"formulas/product/N{N}/wl{wl}/wr{wr}", worst, 1e-12))
    return out


def level_checks(max_N: int = 8, max_k: int = 4, omegas=OMEGA_GRID) -> list[Check]:
    out = []
    for N in range(2, max_N + 1):
        for wl, wr in product(omegas, repeat=2):
            g = homogeneous_segment(N - 1, wl, wr)
            worst = total = 0.0
            for k in range(1, min(max_k, N - 1) + 1):
                for xs in combinations(range(1, N), k):
                    ie = np.array([float(v) for v in cf.absorption_levels(N, wl, wr, xs)])
                    ex = exact.absorption_distribution(g, xs).probs
                    worst = max(worst, float(np.max(np.abs(ie - ex))))
                    total = max(total, abs(float(ie.sum()) - 1.0))
            out.append(Check(f"formulas/levels/N{N}/wl{wl}/wr{wr}", worst, 1e-10))
            out.append(Check(f"formulas/levels-sum/N{N}/wl{wl}/wr{wr}", total, 1e-10))
    return out


def correlation_checks(max_N: int = 6, max_points: int = 3, omegas=((1, 1), (0.5, 3)),
                       rho=(0.2, 0.8), corrected: bool = False) -> list[Check]:
    """Correlation formulas against moments of the exact stationary law.

    ``corrected`` selects the sign-corrected centered formula instead of the
    literal one; the two differ by ``(-1)**n``.
    """
    rl, rr = rho
    out = []
    for N in range(2, max_N + 1):
        for wl, wr in omegas:
            g = homogeneous_segment(N - 1, wl, wr, rl, rr)
            sd = exact.stationary_distribution(g)
            for n in range(1, min(max_points, N - 1) + 1):
                raw = cen = 0.0
                for pts in combinations(range(1, N), n):
                    raw = max(raw, abs(float(cf.n_point_correlation(
                        cf.CorrelationRequest(pts), N, wl, wr, rl, rr)) - sd.moment(pts)))
                    if corrected:
                        formula = cf.centered_correlation(N, wl, wr, rl, rr, pts)
                    else:
                        formula = cf.n_point_correlation(cf.CorrelationRequest(pts, True), N, wl, wr, rl, rr)
                    cen = max(cen, abs(float(formula) - sd.centered_moment(pts)))
                tag = f"N{N}/n{n}/wl{wl}/wr{wr}"
                out.append(Check(f"formulas/moment/{tag}", raw, 1e-9))
                out.append(Check(f"formulas/centered{'-corrected' if corrected else ''}/{tag}", cen, 1e-9))
                if n == 2:
                    two = 0.0
                    for x, y in combinations(range(1, N), 2):
                        a = cf.n_point_correlation(cf.CorrelationRequest((x, y), True), N, wl, wr, rl, rr)
                        b = cf.two_point_correlation(N, wl, wr, rl, rr, x, y)
                        two = max(two, abs(float(a) - float(b)))
                    out.append(Check(f"formulas/two-point/{tag}", two, 1e-12))
    return out


def formulas_suite(max_N: int = 8) -> list[Check]:
    return (product_formula_checks(max_N) + level_checks(max_N)
            + correlation_checks(min(max_N, 6)))


def run_suite(name: str, max_n: int | None = None, segment_n: int | None = None) -> list[Check]:
    """Run one named suite or ``"all"``.

    ``segment_n`` restricts the martingale suite to one ``N``; ``max_n`` caps
    the ninja and formula suites.
    """
    if name == "all":
        return [c for s in SUITES for c in run_suite(s, max_n, segment_n)]
    if name == "duality":
        return duality_suite()
    if name == "martingales":
        Ns = [segment_n] if segment_n else range(3, 7)
        return martingale_suite(Ns)
    if name == "ninja":
        return ninja_suite(max_n or 7)
    if name == "mixture":
        return mixture_suite()
    if name == "formulas":
        return formulas_suite(max_n or 8)
    raise ValueError(f"unknown suite {name!r}")
