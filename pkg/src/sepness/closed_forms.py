"""Closed-form absorption probabilities, mixture weights and correlations.

Segment formulas take the segment length ``N`` (bulk ``1..N-1``) and the
boundary conductances directly.  When ``N <= 12`` and every input is an
``int`` or :class:`~fractions.Fraction`, products and alternating sums are
carried out in exact rational arithmetic; otherwise in double precision.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Callable, Sequence

import numpy as np

from . import exact
from .lattice import (
    MAX_EXACT_SITES,
    CapacityError,
    GraphSpec,
    ParameterError,
    homogeneous_segment,
    mask_of,
    site_set,
    sites_of,
    subsets_of,
)

EXACT_LIMIT = 12


def _exact_ok(N, *vals) -> bool:
    return N <= EXACT_LIMIT and all(isinstance(v, (int, Fraction)) for v in vals)


def _coerce(N, *vals):
    if _exact_ok(N, *vals):
        return tuple(Fraction(v) for v in vals)
    return tuple(float(v) for v in vals)


def harmonic_h(N: int, omega_left, omega_right, x: int):
    """Scale function of a single dual walker on ``0..N``.

    ``h(0) = 0``, ``h(x) = 1/omega_left + x - 1`` in the bulk and
    ``h(N) = 1/omega_left + 1/omega_right + N - 2``, so that ``h(x)/h(N)``
    is the probability of absorption at ``N``.
    """
    if not 0 <= x <= N:
        raise ParameterError(f"site {x} outside 0..{N}")
    wl, wr = _coerce(N, omega_left, omega_right)
    if x == 0:
        return wl * 0
    if x == N:
        return 1 / wl + 1 / wr + N - 2
    return 1 / wl + x - 1


def absorption_product(N: int, omega_left, omega_right, xs: Sequence[int]):
    """Probability that dual particles started on ``xs`` all end at ``N``.

    Homogeneous segment with boundary conductances ``omega_left`` and
    ``omega_right``::

        prod_i (h(x_i) - (i - 1)) / (h(N) - (i - 1))
    """
    xs = site_set(xs, N - 1)
    hN = harmonic_h(N, omega_left, omega_right, N)
    out = hN * 0 + 1
    for i, x in enumerate(xs):
        out *= (harmonic_h(N, omega_left, omega_right, x) - i) / (hN - i)
    return out


def absorption_level(N: int, omega_left, omega_right, xs: Sequence[int], level: int,
                     all_at_n: Callable | None = None):
    """Probability that exactly ``level`` of the particles on ``xs`` end at ``N``.

    Inclusion-exclusion over sub-collections of ``xs``; ``all_at_n(subset)``
    defaults to :func:`absorption_product` and may be replaced by any other
    all-at-``N`` evaluator (e.g. an exact solver on a general graph).
    """
    xs = site_set(xs)
    n = len(xs)
    if not 0 <= level <= n:
        raise ParameterError(f"level {level} outside 0..{n}")
    if all_at_n is None:
        def all_at_n(sub):
            return absorption_product(N, omega_left, omega_right, sub)
    total = 0
    for k in range(level, n + 1):
        inner = sum(all_at_n(sub) for sub in combinations(xs, k))
        total += (-1) ** (k - level) * comb(k, level) * inner
    return total


def absorption_levels(N, omega_left, omega_right, xs, all_at_n=None) -> list:
    return [absorption_level(N, omega_left, omega_right, xs, l, all_at_n)
            for l in range(len(xs) + 1)]


# -- mixture representation -------------------------------------------------

@dataclass(frozen=True)
class MixtureWeights:
    """Weights ``F(I)`` of the product-Bernoulli mixture, indexed by bitmask ``I``."""

    n_sites: int
    weights: np.ndarray

    def __getitem__(self, sites) -> float:
        return float(self.weights[mask_of(sites)])

    def items(self):
        for m, w in enumerate(self.weights):
            yield sites_of(m), float(w)

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "weights": [{"sites": list(s), "F": w} for s, w in self.items()],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        lines = ["sites;F"]
        lines += [f"{','.join(map(str, s))};{w!r}" for s, w in self.items()]
        return "\n".join(lines) + "\n"


def all_at_n_oracle(g: GraphSpec) -> Callable[[tuple], object]:
    """Memoised all-at-``N`` evaluator for ``g``.

    Uses the product formula on homogeneous segments and the exact dual
    solver otherwise.
    """
    N = g.N
    cache: dict = {}
    if g.is_homogeneous_segment():
        def f(J):
            J = tuple(J)
            if J not in cache:
                cache[J] = absorption_product(N, g.omega_left, g.omega_right, J)
            return cache[J]
    else:
        table = exact.all_absorbed_table(g)

        def f(J):
            return float(table[mask_of(J)])
    return f


def mixture_weight(g: GraphSpec, I, oracle: Callable | None = None):
    """``F(I)``: alternating sum of all-at-``N`` probabilities over supersets of ``I``."""
    n = g.n_sites
    if n > MAX_EXACT_SITES:
        raise CapacityError(f"{n} sites exceed the enumeration cap")
    I = site_set(I, n)
    oracle = oracle or all_at_n_oracle(g)
    rest = [x for x in range(1, n + 1) if x not in I]
    total = 0
    for extra in subsets_of(rest):
        J = tuple(sorted(I + extra))
        total += (-1) ** len(extra) * oracle(J)
    return total


def mixture_weights(g: GraphSpec, oracle: Callable | None = None) -> MixtureWeights:
    """All ``F(I)`` at once via a superset Moebius transform.

    One oracle call per subset, then ``n * 2**n`` signed additions.
    """
    n = g.n_sites
    if n > MAX_EXACT_SITES:
        raise CapacityError(f"{n} sites exceed the enumeration cap")
    oracle = oracle or all_at_n_oracle(g)
    vals = [oracle(sites_of(m)) for m in range(1 << n)]
    exact_mode = all(isinstance(v, Fraction) for v in vals)
    a = list(vals) if exact_mode else np.array(vals, dtype=float)
    for i in range(n):
        bit = 1 << i
        for m in range(1 << n):
            if not m & bit:
                a[m] -= a[m | bit]
    return MixtureWeights(n, np.array([float(v) for v in a]))


def _bernoulli_matrix(rl, rr) -> np.ndarray:
    # rows: occupation of the site; columns: site in I (uses rho_right) or not
    return np.array([[1 - rl, 1 - rr], [rl, rr]], dtype=float)


def mixture_measure(g: GraphSpec, weights: MixtureWeights | None = None,
                    method: str = "direct") -> exact.StationaryDistribution:
    """Assemble ``sum_I F(I) (Ber(rho_R) on I) x (Ber(rho_L) off I)``.

    ``method="direct"`` applies the per-site 2x2 Bernoulli kernel to the
    weight vector (``O(n 2**n)``); ``method="classes"`` groups the weights by
    ``(|I cap eta|, |I minus eta|)`` for every configuration (``O(4**n)``,
    capped at 12 sites).
    """
    n = g.n_sites
    if n > MAX_EXACT_SITES:
        raise CapacityError(f"{n} sites exceed the enumeration cap")
    F = (weights or mixture_weights(g)).weights
    rl, rr = float(g.rho_left), float(g.rho_right)
    if method == "direct":
        B = _bernoulli_matrix(rl, rr)
        # axis order of the reshaped tensor is (bit n-1, ..., bit 0)
        t = F.reshape((2,) * n) if n else F
        for ax in range(n):
            t = np.moveaxis(np.tensordot(B, t, axes=([1], [ax])), 0, ax)
        probs = t.reshape(-1)
    elif method == "classes":
        if n > EXACT_LIMIT:
            raise CapacityError("class regrouping is capped at 12 sites")
        idx = np.arange(1 << n)
        pop = np.array([bin(m).count("1") for m in range(1 << n)])
        probs = np.empty(1 << n)
        for eta in range(1 << n):
            occ = pop[eta]
            inside = pop[idx & eta]
            outside = pop[idx & ~eta]
            classes = np.zeros((occ + 1, n - occ + 1))
            np.add.at(classes, (inside, outside), F)
            l = np.arange(occ + 1)[:, None]
            k = np.arange(n - occ + 1)[None, :]
            coef = rr ** l * rl ** (occ - l) * (1 - rr) ** k * (1 - rl) ** (n - occ - k)
            probs[eta] = float((coef * classes).sum())
    else:
        raise ParameterError(f"unknown method {method!r}")
    return exact.StationaryDistribution(g, probs)


# -- one- and many-point functions ---------------------------------------------

def density_profile(g: GraphSpec, x: int):
    """Stationary ``E[eta(x)] = rho_L + (rho_R - rho_L) P_x(absorbed at N)``."""
    site_set([x], g.n_sites)
    if g.is_homogeneous_segment():
        N = g.N
        p = harmonic_h(N, g.omega_left, g.omega_right, x) / harmonic_h(
            N, g.omega_left, g.omega_right, N)
    else:
        p = exact.all_absorbed_at_N(g, [x])
    return g.rho_left + (g.rho_right - g.rho_left) * p


def two_point_correlation(N, omega_left, omega_right, rho_left, rho_right, x, y):
    """Stationary covariance of ``eta(x)`` and ``eta(y)`` for ``x < y`` on the segment."""
    if not 1 <= x < y <= N - 1:
        raise ParameterError("need 1 <= x < y <= N-1")
    wl, wr, rl, rr = _coerce(N, omega_left, omega_right, rho_left, rho_right)
    a = 1 / wl + 1 / wr + N - 2
    return -(rr - rl) ** 2 * (1 / wl + x - 1) * (1 / wr + N - 1 - y) / (a ** 2 * (a - 1))


def _ordered_product(N, wl, wr, pts):
    """``prod_l (h(p_l) - (l-1)) / (h(N) - (l-1))`` over the points in order."""
    hN = harmonic_h(N, wl, wr, N)
    out = hN * 0 + 1
    for l, x in enumerate(pts):
        out *= (harmonic_h(N, wl, wr, x) - l) / (hN - l)
    return out


def psi(N, omega_left, omega_right, points):
    """Signed sum over ordered sub-collections of ``points``.

    ``sum_j (-1)^j sum_{i_1<..<i_j} prod_l (h(x_{i_l})-(l-1))/(h(N)-(l-1))
    * prod_{r not chosen} h(x_r)/h(N)``.
    """
    pts = site_set(points, N - 1)
    n = len(pts)
    hN = harmonic_h(N, omega_left, omega_right, N)
    single = [harmonic_h(N, omega_left, omega_right, x) / hN for x in pts]
    total = 0
    for j in range(n + 1):
        for chosen in combinations(range(n), j):
            term = _ordered_product(N, omega_left, omega_right, [pts[i] for i in chosen])
            for r in range(n):
                if r not in chosen:
                    term *= single[r]
            total += (-1) ** j * term
    return total


@dataclass(frozen=True)
class CorrelationRequest:
    points: tuple[int, ...]
    centered: bool = False

    def __post_init__(self):
        pts = tuple(int(x) for x in self.points)
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ParameterError(f"points must be strictly increasing, got {pts}")
        pts = site_set(pts)
        if not pts:
            raise ParameterError("at least one point is required")
        object.__setattr__(self, "points", pts)


def n_point_correlation(req: CorrelationRequest, N, omega_left=1, omega_right=1,
                        rho_left=0.5, rho_right=0.5):
    """Stationary n-point function on the homogeneous segment ``[N]_0``.

    Non-centered: ``sum_j rho_L^(n-j) (rho_R-rho_L)^j sum_{i_1<..<i_j}
    prod_l (h(x_{i_l})-(l-1))/(h(N)-(l-1))``.

    Centered: ``(rho_R - rho_L)^n * psi(points)``, kept in this form on
    purpose.  It has the wrong sign for odd ``n``; the centered moment
    itself is ``(rho_L - rho_R)^n * psi`` (see :func:`centered_correlation`).
    """
    pts = site_set(req.points, N - 1)
    wl, wr = omega_left, omega_right
    rl, rr = _coerce(N, rho_left, rho_right)
    n = len(pts)
    if req.centered:
        return (rr - rl) ** n * psi(N, wl, wr, pts)
    total = 0
    for j in range(n + 1):
        inner = sum(_ordered_product(N, wl, wr, [pts[i] for i in ch])
                    for ch in combinations(range(n), j))
        total += rl ** (n - j) * (rr - rl) ** j * inner
    return total


def centered_correlation(N, omega_left, omega_right, rho_left, rho_right, points):
    """``E[prod_i (eta(x_i) - E eta(x_i))]`` with the sign fixed: ``(rho_L-rho_R)^n psi``."""
    rl, rr = _coerce(N, rho_left, rho_right)
    pts = site_set(points, N - 1)
    return (rl - rr) ** len(pts) * psi(N, omega_left, omega_right, pts)


def moment_general(g: GraphSpec, points) -> float:
    """``E[prod eta(x_i)]`` on any graph from the exact dual level law."""
    pts = site_set(points, g.n_sites)
    p = exact.absorption_distribution(g, pts).probs
    n = len(pts)
    rl, rr = float(g.rho_left), float(g.rho_right)
    return float(sum(rr ** l * rl ** (n - l) * p[l] for l in range(n + 1)))


def ninja_recursion_residual(N: int, xs, omega_left=1, omega_right=1) -> tuple[float, float, float]:
    """Check the size-reduction identity for all-at-``N`` probabilities.

    With ``xs = (x_1 < ... < x_{k+1})`` in the bulk of ``[N]_0`` and unit
    conductances, compares ``P^[N](all at N)`` against
    ``(x_{k+1} - k)/N * P^[N-1]_{x_1..x_k}(all at N-1)``, both sides from
    exact dual solves.  Returns ``(residual, lhs, rhs)``.
    """
    if omega_left != 1 or omega_right != 1:
        raise ParameterError("the recursion is stated for unit conductances only")
    xs = site_set(xs, N - 1)
    if not xs:
        raise ParameterError("need at least one site")
    k = len(xs) - 1
    lhs = exact.all_absorbed_at_N(homogeneous_segment(N - 1), xs)
    if k == 0:
        smaller = 1.0
    else:
        smaller = exact.all_absorbed_at_N(homogeneous_segment(N - 2), xs[:-1])
    rhs = (xs[-1] - k) / N * smaller
    return abs(lhs - rhs), lhs, rhs
