"""Brute-force linear algebra for the open SEP and its absorbing dual.

Everything here enumerates state spaces explicitly, so it is exponential in
the number of bulk sites and guarded by the caps in :mod:`sepness.lattice`.
These routines are the ground truth the closed forms are tested against and
deliberately never call into :mod:`sepness.closed_forms`.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations
from math import comb

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .lattice import (
    MAX_EXACT_SITES,
    CapacityError,
    GraphSpec,
    ParameterError,
    homogeneous_segment,
    mask_of,
    site_set,
)

#: above this dimension linear solves switch from dense LU to iterative
DENSE_LIMIT = 4096
SOLVE_TOL = 1e-12
MAX_DUAL_STATES = 1 << 20


class NumericalError(RuntimeError):
    """A linear solve did not reach the requested residual."""


# -- primal process ------------------------------------------------------------

def build_sep_generator(g: GraphSpec) -> sp.csr_matrix:
    """Generator of the open SEP on all ``2**n_sites`` configurations.

    Row ``s`` holds the jump rates out of configuration ``s`` (bit ``x-1`` is
    ``eta(x)``) and the diagonal makes every row sum to zero.
    """
    g.check()
    n = g.n_sites
    if n > MAX_EXACT_SITES:
        raise CapacityError(f"{n} bulk sites exceed the exact-engine cap {MAX_EXACT_SITES}")
    dim = 1 << n
    s = np.arange(dim, dtype=np.int64)
    rows, cols, vals = [], [], []

    for x, y, w in g.edges:
        bx, by = 1 << (x - 1), 1 << (y - 1)
        movable = ((s & bx) != 0) != ((s & by) != 0)
        src = s[movable]
        rows.append(src)
        cols.append(src ^ (bx | by))
        vals.append(np.full(src.size, float(w)))

    for site, omega, rho in ((1, g.omega_left, g.rho_left), (n, g.omega_right, g.rho_right)):
        b = 1 << (site - 1)
        occupied = (s & b) != 0
        rows.append(s)
        cols.append(s ^ b)
        vals.append(np.where(occupied, float(omega) * (1 - float(rho)), float(omega) * float(rho)))

    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    Q = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
    Q.sum_duplicates()
    out = np.asarray(Q.sum(axis=1)).ravel()
    return (Q - sp.diags(out)).tocsr()


@dataclass(frozen=True)
class StationaryDistribution:
    """Probability vector over configurations, indexed by bitmask."""

    graph: GraphSpec
    probs: np.ndarray

    def moment(self, sites) -> float:
        """``E[prod_{x in sites} eta(x)]``."""
        m = mask_of(sites)
        idx = np.arange(self.probs.size)
        return float(self.probs[(idx & m) == m].sum())

    def centered_moment(self, sites) -> float:
        """``E[prod_{x in sites} (eta(x) - E eta(x))]``."""
        idx = np.arange(self.probs.size)
        term = np.ones(self.probs.size)
        for x in sites:
            occ = ((idx >> (x - 1)) & 1).astype(float)
            term *= occ - self.moment((x,))
        return float(self.probs @ term)

    def to_dict(self) -> dict:
        return {
            "graph": self.graph.to_dict(),
            "probabilities": [
                {"config_bits": int(i), "probability": float(p)} for i, p in enumerate(self.probs)
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def to_csv(self) -> str:
        lines = ["config_bits,probability"]
        lines += [f"{i},{float(p)!r}" for i, p in enumerate(self.probs)]
        return "\n".join(lines) + "\n"


def stationary_distribution(Q, graph: GraphSpec | None = None) -> StationaryDistribution:
    """Solve ``pi Q = 0``, ``sum(pi) = 1`` by replacing one balance equation.

    ``Q`` may be a generator or a :class:`GraphSpec` (built on the fly).
    """
    if isinstance(Q, GraphSpec):
        graph, Q = Q, build_sep_generator(Q)
    dim = Q.shape[0]
    A = sp.csr_matrix(Q).T.tolil()
    A[dim - 1, :] = np.ones(dim)
    b = np.zeros(dim)
    b[-1] = 1.0
    if dim <= DENSE_LIMIT:
        pi = la.lu_solve(la.lu_factor(A.toarray()), b)
    else:
        pi = sla.splu(A.tocsc()).solve(b)
    residual = np.abs(Q.T @ pi).max()
    if residual > 1e-9 or pi.min() < -1e-12:
        raise NumericalError(f"stationary solve failed: residual {residual:.3e}, min {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    return StationaryDistribution(graph, pi)


# -- dual absorbing process ---------------------------------------------------

@dataclass(frozen=True)
class AbsorptionTable:
    """Law of the number of dual particles finally absorbed at ``N``.

    ``probs[l]`` is the probability that exactly ``l`` of the particles
    started on ``start`` end at the right absorbing site.
    """

    start: tuple[int, ...]
    probs: np.ndarray

    def to_dict(self) -> dict:
        return {"start": list(self.start), "probs": [float(p) for p in self.probs]}

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


class _Layer:
    """Bulk masks with a fixed particle count and their restricted generator."""

    def __init__(self, g: GraphSpec, j: int):
        n = g.n_sites
        self.masks = [mask_of(c) for c in combinations(range(1, n + 1), j)]
        self.index = {m: i for i, m in enumerate(self.masks)}
        dim = len(self.masks)
        rows, cols, vals = [], [], []
        out = np.zeros(dim)
        left, right = 1, 1 << (n - 1)
        for i, m in enumerate(self.masks):
            for x, y, w in g.edges:
                bx, by = 1 << (x - 1), 1 << (y - 1)
                if bool(m & bx) != bool(m & by):
                    rows.append(i)
                    cols.append(self.index[m ^ (bx | by)])
                    vals.append(float(w))
                    out[i] += float(w)
            if m & left:
                out[i] += float(g.omega_left)
            if m & right:
                out[i] += float(g.omega_right)
        hop = sp.coo_matrix((vals, (rows, cols)), shape=(dim, dim)).tocsr()
        # out-rate minus hops: symmetric and strictly diagonally dominant
        # on every row touching a reservoir, hence positive definite
        self.matrix = (sp.diags(out) - hop).tocsr()

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        dim = self.matrix.shape[0]
        if dim < DENSE_LIMIT:
            return la.lu_solve(la.lu_factor(self.matrix.toarray()), rhs)
        cols = rhs if rhs.ndim == 2 else rhs[:, None]
        out = np.empty_like(cols, dtype=float)
        for c in range(cols.shape[1]):
            sol, info = sla.cg(self.matrix, cols[:, c], rtol=SOLVE_TOL, atol=0.0,
                               maxiter=10 * dim)
            if info != 0:
                raise NumericalError(f"CG did not converge (info={info}, dim={dim})")
            out[:, c] = sol
        return out if rhs.ndim == 2 else out[:, 0]


def _check_dual_cap(g: GraphSpec, k: int) -> None:
    n = g.n_sites
    states = sum(comb(n, j) for j in range(k + 1)) * (k + 1)
    if n > MAX_EXACT_SITES or states > MAX_DUAL_STATES:
        raise CapacityError(f"dual state space for {k} particles on {n} sites is too large")


@lru_cache(maxsize=64)
def _level_layers(g: GraphSpec, k: int):
    """Level distributions for every bulk mask with up to ``k`` particles.

    ``out[j][masks.index(m)]`` is the law (vector of length ``j + 1``) of the
    number of the ``j`` particles on ``m`` that end at ``N``.  Absorbed
    particles never move again, so the layers are solved bottom-up.
    """
    n = g.n_sites
    left, right = 1, 1 << (n - 1)
    layers = [_Layer(g, 0)]
    values = [np.ones((1, 1))]
    for j in range(1, k + 1):
        lay = _Layer(g, j)
        prev, pv = layers[-1], values[-1]
        rhs = np.zeros((len(lay.masks), j + 1))
        for i, m in enumerate(lay.masks):
            if m & left:
                rhs[i, :j] += float(g.omega_left) * pv[prev.index[m ^ left]]
            if m & right:
                rhs[i, 1:] += float(g.omega_right) * pv[prev.index[m ^ right]]
        layers.append(lay)
        values.append(lay.solve(rhs))
    return layers, values


@lru_cache(maxsize=64)
def _all_at_n_layers(g: GraphSpec, k: int):
    n = g.n_sites
    right = 1 << (n - 1)
    layers = [_Layer(g, 0)]
    values = [np.ones(1)]
    for j in range(1, k + 1):
        lay = _Layer(g, j)
        prev, pv = layers[-1], values[-1]
        rhs = np.zeros(len(lay.masks))
        for i, m in enumerate(lay.masks):
            if m & right:
                rhs[i] = float(g.omega_right) * pv[prev.index[m ^ right]]
        layers.append(lay)
        values.append(lay.solve(rhs))
    return layers, values


def absorption_distribution(g: GraphSpec, start) -> AbsorptionTable:
    """Exact law of ``xi_inf(N)`` for the dual started from ``start``."""
    g.check()
    start = site_set(start, g.n_sites)
    k = len(start)
    _check_dual_cap(g, k)
    layers, values = _level_layers(g, k)
    p = values[k][layers[k].index[mask_of(start)]].copy()
    return AbsorptionTable(start, p)


def all_absorbed_at_N(g: GraphSpec, start) -> float:
    """Probability that every dual particle started on ``start`` ends at ``N``."""
    g.check()
    start = site_set(start, g.n_sites)
    k = len(start)
    if k == 0:
        return 1.0
    _check_dual_cap(g, k)
    layers, values = _all_at_n_layers(g, k)
    return float(values[k][layers[k].index[mask_of(start)]])


def all_absorbed_table(g: GraphSpec) -> np.ndarray:
    """``P_J(all of J absorbed at N)`` for every ``J``, indexed by bitmask."""
    g.check()
    n = g.n_sites
    _check_dual_cap(g, 0)
    if n > MAX_EXACT_SITES:
        raise CapacityError("too many sites")
    layers, values = _all_at_n_layers(g, n)
    out = np.empty(1 << n)
    for lay, val in zip(layers, values):
        out[lay.masks] = val
    return out


def dual_transitions(g: GraphSpec, mask: int, a0: int, aN: int):
    """Outgoing ``(rate, (mask, a0, aN))`` pairs of a dual configuration."""
    n = g.n_sites
    out = []
    for x, y, w in g.edges:
        bx, by = 1 << (x - 1), 1 << (y - 1)
        if bool(mask & bx) != bool(mask & by):
            out.append((float(w), (mask ^ (bx | by), a0, aN)))
    if mask & 1:
        out.append((float(g.omega_left), (mask ^ 1, a0 + 1, aN)))
    right = 1 << (n - 1)
    if mask & right:
        out.append((float(g.omega_right), (mask ^ right, a0, aN + 1)))
    return out


def check_generator_duality(g: GraphSpec, max_dual_particles: int = 2) -> float:
    """Largest ``|(L D(., xi))(eta) - (L_dual D(eta, .))(xi)|`` over all pairs."""
    g.check()
    n = g.n_sites
    if n > 10 or max_dual_particles > 4:
        raise CapacityError("duality check is capped at 10 sites and 4 dual particles")
    Q = build_sep_generator(g)
    etas = np.arange(1 << n)
    rl, rr = float(g.rho_left), float(g.rho_right)

    def D(mask, a0, aN):
        return ((etas & mask) == mask).astype(float) * rl ** a0 * rr ** aN

    worst = 0.0
    for p in range(max_dual_particles + 1):
        for bulk in combinations(range(1, n + 1), p):
            mask = mask_of(bulk)
            for a0 in range(max_dual_particles - p + 1):
                for aN in range(max_dual_particles - p - a0 + 1):
                    here = D(mask, a0, aN)
                    lhs = Q @ here
                    rhs = np.zeros_like(here)
                    for rate, xi in dual_transitions(g, mask, a0, aN):
                        rhs += rate * (D(*xi) - here)
                    worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def check_dual_conservation(g: GraphSpec, max_particles: int = 3) -> bool:
    """Every dual transition keeps ``|bulk| + a0 + aN`` fixed."""
    n = g.n_sites
    for p in range(max_particles + 1):
        for bulk in combinations(range(1, n + 1), p):
            mask = mask_of(bulk)
            for rate, (m2, a0, aN) in dual_transitions(g, mask, 0, 0):
                if bin(m2).count("1") + a0 + aN != p or rate <= 0:
                    return False
    return True


# -- two-particle skeleton chain ------------------------------------------------

def harmonic(N: int, omega_left, omega_right, x: int) -> float:
    """Scale function of one dual walker; duplicated from the closed forms on purpose."""
    if x == 0:
        return 0.0
    if x == N:
        return 1 / omega_left + 1 / omega_right + N - 2
    return 1 / omega_left + x - 1


def _two_particle_moves(N, wl, wr, a, b):
    """Jump-chain moves of ordered walkers ``a <= b`` on ``0..N`` without swaps."""
    absorbing = (0, N)
    moves = []
    for who, pos, other in ((0, a, b), (1, b, a)):
        if pos in absorbing:
            continue
        for step in (-1, 1):
            tgt = pos + step
            if tgt == other and tgt not in absorbing:
                continue
            if tgt == 0:
                rate = wl
            elif tgt == N:
                rate = wr
            else:
                rate = 1.0
            new = (tgt, b) if who == 0 else (a, tgt)
            moves.append((rate, new))
    total = sum(r for r, _ in moves)
    return [(r / total, s) for r, s in moves]


def martingale_increment(N, wl, wr, a, b, rule: str = "indicator") -> float:
    """One-step increment of the correction process for the pair ``(a, b)``.

    ``rule="indicator"`` uses the indicator form ``1 + 2/(wl+1) [a=1] + 2/(wr+1)
    [b=N-1]`` (interior term only when neither walker touches a boundary
    site).  ``rule="rates"`` uses ``2 / (r_out(a) + r_out(b))`` with the
    outward rates of the adjacent pair; the two agree except when ``a = 1``
    and ``b = N - 1`` simultaneously, i.e. ``N = 3``.
    """
    if b - a != 1 or a in (0, N) or b in (0, N):
        return 0.0
    if rule == "indicator":
        inc = 0.0
        if a not in (1, N - 1) and b not in (1, N - 1):
            inc += 1.0
        if a == 1:
            inc += 2.0 / (wl + 1)
        if b == N - 1:
            inc += 2.0 / (wr + 1)
        return inc
    if rule == "rates":
        out_a = wl if a == 1 else 1.0
        out_b = wr if b == N - 1 else 1.0
        return 2.0 / (out_a + out_b)
    raise ParameterError(f"unknown increment rule {rule!r}")


def two_particle_states(N: int):
    bulk = range(1, N)
    states = [(a, b) for a in bulk for b in bulk if a < b]
    states += [(0, b) for b in bulk] + [(a, N) for a in bulk]
    states += [(0, 0), (0, N), (N, N)]
    return states


def martingale_drifts(N: int, omega_left, omega_right, rule: str = "indicator"):
    """Per-state one-step drift of the three two-particle processes.

    Returns ``{state: (d_sum, d_diff, d_prod)}``; each entry is
    ``E[M_1 | state] - M_0`` and vanishes for a martingale.
    """
    if N < 3:
        raise ParameterError("two particles need N >= 3")
    wl, wr = float(omega_left), float(omega_right)

    def h(x):
        return harmonic(N, wl, wr, x)

    out = {}
    for a, b in two_particle_states(N):
        if a in (0, N) and b in (0, N):
            out[(a, b)] = (0.0, 0.0, 0.0)
            continue
        inc = martingale_increment(N, wl, wr, a, b, rule)
        e_sum = e_diff = e_prod = 0.0
        for p, (a2, b2) in _two_particle_moves(N, wl, wr, a, b):
            e_sum += p * (h(a2) + h(b2))
            e_diff += p * (h(b2) - h(a2))
            e_prod += p * h(a2) * h(b2)
        out[(a, b)] = (
            e_sum - (h(a) + h(b)),
            e_diff - inc - (h(b) - h(a)),
            e_prod + 0.5 * inc - h(a) * h(b),
        )
    return out


def check_two_particle_martingales(N: int, omega_left=1.0, omega_right=1.0,
                                   rule: str = "indicator") -> float:
    """Max one-step violation over all states and all three martingales."""
    drifts = martingale_drifts(N, omega_left, omega_right, rule)
    return max(max(abs(v) for v in d) for d in drifts.values())


def absorption_levels_segment(N: int, start, omega_left=1.0, omega_right=1.0) -> np.ndarray:
    """Convenience wrapper: exact level law on the homogeneous segment ``[N]_0``."""
    g = homogeneous_segment(N - 1, omega_left, omega_right)
    return absorption_distribution(g, start).probs
