"""Labelled coupling between dual systems on ``[N]_0`` and ``[N-1]_0``.

``k`` labelled particles and one distinguished particle (the ninja) move on
the unit-conductance segment ``0..N`` with absorbing ends.  Forgetting labels
the configuration is the usual dual process; deleting the ninja's site and
relabelling (:func:`project`) gives the dual process on ``0..N-1``.

A state is a tuple ``(x_1, ..., x_k, ninja)``.  Every transition has rate one.

Rules, for a labelled particle at bulk site ``x``:

* ninja in the bulk and ``|x - ninja| = 1``: the step away from the ninja is
  an ordinary move; the step towards it becomes a jump *over* the ninja to
  ``ninja + (ninja - x)`` (if that site is free or absorbing), while the ninja
  takes over ``x``.  The ninja itself does not move while it has a labelled
  bulk neighbour.
* ninja absorbed at ``0`` (resp. ``N``) and ``x = 2`` (resp. ``N - 2``): the
  step towards the boundary sends the particle to the ninja's absorbing site
  and the ninja back to ``1`` (resp. ``N - 1``).
* otherwise: ordinary exclusion steps, absorbing sites always accept.

With no labelled bulk neighbour a bulk ninja steps like any other particle.
Once all labels are absorbed a bulk ninja keeps walking until absorbed.
"""
from __future__ import annotations

from collections import Counter, deque

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from . import exact
from .lattice import ParameterError, homogeneous_segment, mask_of


def check_start(N: int, xs, ninja: int) -> tuple[int, ...]:
    """Validate a start and return it as a state tuple."""
    xs = tuple(sorted(int(x) for x in xs))
    if N < 2:
        raise ParameterError("need N >= 2")
    if len(set(xs)) != len(xs) or any(not 1 <= x <= N - 1 for x in xs):
        raise ParameterError(f"labelled particles must sit on distinct bulk sites, got {xs}")
    if not 0 <= ninja <= N:
        raise ParameterError(f"ninja start {ninja} outside 0..{N}")
    if ninja in xs:
        raise ParameterError("ninja must start on an empty site")
    if ninja == N and N - 1 in xs:
        raise ParameterError("forbidden start: ninja at N with a particle at N-1")
    if ninja == 0 and 1 in xs:
        raise ParameterError("forbidden start: ninja at 0 with a particle at 1")
    return xs + (ninja,)


def ninja_moves(N: int, state: tuple[int, ...]) -> list[tuple[int, ...]]:
    """States reachable in one rate-one jump."""
    *labels, nj = state
    k = len(labels)
    bulk = {p for p in state if 0 < p < N}

    def free(site):
        return site == 0 or site == N or site not in bulk

    out = []
    nj_bulk = 0 < nj < N
    if nj_bulk:
        guarded = False
        for i, x in enumerate(labels):
            if not 0 < x < N:
                continue
            for step in (-1, 1):
                tgt = x + step
                if tgt == nj:
                    guarded = True
                    over = nj + step
                    if free(over):
                        out.append(_put(state, i, over, x))
                elif free(tgt):
                    out.append(_put(state, i, tgt))
        if not guarded:
            for step in (-1, 1):
                if free(nj + step):
                    out.append(state[:k] + (nj + step,))
    else:
        gate, back = (1, 1) if nj == 0 else (N - 1, N - 1)
        for i, x in enumerate(labels):
            if not 0 < x < N:
                continue
            for step in (-1, 1):
                tgt = x + step
                if tgt == gate:
                    out.append(_put(state, i, nj, back))
                elif free(tgt):
                    out.append(_put(state, i, tgt))
    return out


def _put(state, i, pos, ninja=None):
    s = list(state)
    s[i] = pos
    if ninja is not None:
        s[-1] = ninja
    return tuple(s)


def is_terminal(N: int, state) -> bool:
    return all(p in (0, N) for p in state)


def configuration(N: int, positions) -> tuple[int, int, int]:
    """``(bulk mask, count at 0, count at N)`` of a collection of positions."""
    c = Counter(positions)
    return mask_of(p for p in positions if 0 < p < N), c[0], c[N]


def project(x: int, ninja: int, N: int) -> int:
    """Position of a labelled particle after deleting the ninja's site."""
    if x == N:
        return N - 1
    return x - (ninja < x)


def projected_configuration(N: int, state) -> tuple[int, int, int]:
    *labels, nj = state
    return configuration(N - 1, [project(x, nj, N) for x in labels])


def reachable(N: int, start) -> list[tuple[int, ...]]:
    seen = {start: 0}
    order = [start]
    todo = deque([start])
    while todo:
        s = todo.popleft()
        for t in ninja_moves(N, s):
            if t not in seen:
                seen[t] = len(order)
                order.append(t)
                todo.append(t)
    return order


def exact_outcomes(N: int, xs, ninja: int) -> dict[tuple[int, ...], float]:
    """Exact law of the terminal state of the ninja process from ``(xs, ninja)``."""
    start = check_start(N, xs, ninja)
    states = reachable(N, start)
    transient = [s for s in states if not is_terminal(N, s)]
    terminal = [s for s in states if is_terminal(N, s)]
    if not transient:
        return {start: 1.0}
    ti = {s: i for i, s in enumerate(transient)}
    ai = {s: i for i, s in enumerate(terminal)}
    rows, cols, vals = [], [], []
    brow, bcol, bval = [], [], []
    for s in transient:
        moves = ninja_moves(N, s)
        p = 1.0 / len(moves)
        for t in moves:
            if t in ti:
                rows.append(ti[s]); cols.append(ti[t]); vals.append(p)
            else:
                brow.append(ti[s]); bcol.append(ai[t]); bval.append(p)
    n = len(transient)
    P = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsc()
    B = sp.coo_matrix((bval, (brow, bcol)), shape=(n, len(terminal))).toarray()
    X = sla.splu((sp.identity(n, format="csc") - P)).solve(B)
    row = X[ti[start]]
    return {t: float(row[j]) for j, t in enumerate(terminal) if row[j] != 0.0}


def exact_summary(N: int, xs, ninja: int) -> dict:
    """Quantities entering the size-reduction argument, from the exact ninja law.

    ``levels``: law of the total number (labels + ninja) absorbed at ``N``;
    ``all_labels_at_N``: probability of the event ``E``;
    ``ninja_at_0_given_E``: conditional probability of the ninja ending at 0.
    """
    law = exact_outcomes(N, xs, ninja)
    k = len(xs)
    levels = np.zeros(k + 2)
    pE = pE0 = 0.0
    for s, p in law.items():
        levels[sum(1 for q in s if q == N)] += p
        if all(q == N for q in s[:-1]):
            pE += p
            if s[-1] == 0:
                pE0 += p
    return {
        "levels": levels,
        "all_labels_at_N": pE,
        "ninja_at_0_given_E": pE0 / pE if pE > 0 else float("nan"),
    }


def predicted_ninja_at_0_given_E(N: int, xs, ninja: int) -> float:
    """``(N - ninja + #{x_i < ninja}) / N``; equals ``1 - (x_{k+1} - k)/N`` when the ninja starts rightmost."""
    return (N - ninja + sum(1 for x in xs if x < ninja)) / N


def dual_levels_with_ninja(N: int, xs, ninja: int) -> np.ndarray:
    """Exact dual level law on ``[N]_0`` for the unlabelled start ``xs + {ninja}``."""
    bulk = [p for p in list(xs) + [ninja] if 0 < p < N]
    extra = 1 if ninja == N else 0
    total = len(xs) + 1
    out = np.zeros(total + 1)
    if bulk:
        law = exact.absorption_distribution(homogeneous_segment(N - 1), bulk).probs
    else:
        law = np.array([1.0])
    out[extra:extra + law.size] = law
    return out


def projected_all_at_n(N: int, xs, ninja: int) -> float:
    """Exact ``P^[N-1]_0(all k absorbed at N-1)`` from the projected start."""
    proj = [project(x, ninja, N) for x in xs]
    if any(p == 0 for p in proj):
        return 0.0
    bulk = [p for p in proj if 0 < p < N - 1]
    if not bulk:
        return 1.0
    return exact.all_absorbed_at_N(homogeneous_segment(N - 2), bulk)


def _aggregate(N, state, key):
    here = key(state)
    rates: Counter = Counter()
    for t in ninja_moves(N, state):
        kt = key(t)
        if kt != here:
            rates[kt] += 1.0
    return here, rates


def _dual_rates(M: int, config) -> Counter:
    mask, a0, aN = config
    out: Counter = Counter()
    if M < 2:
        return out
    g = homogeneous_segment(M - 1)
    for rate, tgt in exact.dual_transitions(g, mask, a0, aN):
        out[tgt] += rate
    return out


def label_forgetting_residual(N: int, xs, ninja: int) -> float:
    """Max rate mismatch between the unlabelled ninja process and the dual on ``[N]_0``.

    Checked on every state reachable from the given start.
    """
    worst = 0.0
    for s in reachable(N, check_start(N, xs, ninja)):
        here, rates = _aggregate(N, s, lambda t: configuration(N, t))
        want = _dual_rates(N, here)
        for key in set(rates) | set(want):
            worst = max(worst, abs(rates[key] - want[key]))
    return worst


def projection_residual(N: int, xs, ninja: int) -> float:
    """Max rate mismatch between the projected ninja process and the dual on ``[N-1]_0``."""
    worst = 0.0
    for s in reachable(N, check_start(N, xs, ninja)):
        here, rates = _aggregate(N, s, lambda t: projected_configuration(N, t))
        want = _dual_rates(N - 1, here)
        for key in set(rates) | set(want):
            worst = max(worst, abs(rates[key] - want[key]))
    return worst


def admissible_starts(N: int, k: int, rightmost: bool = True):
    """All ``(xs, ninja)`` with ``k`` labels; ``rightmost`` puts the ninja above every label in the bulk."""
    from itertools import combinations

    for xs in combinations(range(1, N), k):
        if rightmost:
            ninjas = range((xs[-1] if xs else 0) + 1, N)
        else:
            ninjas = [y for y in range(0, N + 1) if y not in xs]
        for y in ninjas:
            try:
                check_start(N, xs, y)
            except ParameterError:
                continue
            yield xs, y
