"""Continuous-time Monte Carlo for the open SEP, its dual and the couplings.

All simulators draw from an :class:`RngStream`, a ``(seed, stream)`` pair
mapped onto numpy's counter-based Philox generator, so a fixed pair
reproduces a run bit for bit.  Simulators that only need the final
absorbed state run the embedded jump chain and skip holding times.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import ninja as _ninja
from .lattice import GraphSpec, ParameterError, decode, mask_of, site_set

RNG_ALGORITHM = "numpy.Philox4x64/SeedSequence(seed, spawn_key=(stream,))"
MAX_EVENTS = 10 ** 9
Z99 = 2.5758293035489004


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, i: int) -> "RngStream":
        """Independent sub-stream ``i``; the stream id is a hash of ``(seed, stream, i)``."""
        sid = np.random.SeedSequence([self.seed, self.stream, i]).generate_state(1, np.uint64)[0]
        return RngStream(self.seed, int(sid))


class _Uniforms:
    """Buffered uniform draws; avoids one numpy call per event."""

    def __init__(self, rng, size: int = 4096):
        if isinstance(rng, RngStream):
            rng = rng.generator()
        self._rng = rng
        self._size = size
        self._buf = rng.random(size).tolist()
        self._i = 0

    def __call__(self) -> float:
        if self._i == self._size:
            self._buf = self._rng.random(self._size).tolist()
            self._i = 0
        u = self._buf[self._i]
        self._i += 1
        return u


@dataclass(frozen=True)
class McEstimate:
    """Sample mean with standard error (scalar or per-component)."""

    mean: float | np.ndarray
    stderr: float | np.ndarray
    n_samples: int
    m2: float | np.ndarray = field(default=0.0, repr=False)

    @property
    def half_width_99(self):
        return Z99 * self.stderr

    @classmethod
    def from_samples(cls, samples) -> "McEstimate":
        x = np.asarray(samples, dtype=float)
        n = x.shape[0]
        if n < 2:
            raise ParameterError("need at least two samples")
        mean = x.mean(axis=0)
        m2 = ((x - mean) ** 2).sum(axis=0)
        return cls._build(n, mean, m2)

    @classmethod
    def _build(cls, n, mean, m2):
        sd = np.sqrt(m2 / (n - 1))
        se = sd / np.sqrt(n)
        if np.ndim(mean) == 0:
            mean, se, m2 = float(mean), float(se), float(m2)
        return cls(mean, se, int(n), m2)

    def merge(self, other: "McEstimate") -> "McEstimate":
        """Pairwise (Chan et al.) combination of two summaries."""
        n = self.n_samples + other.n_samples
        delta = np.asarray(other.mean) - np.asarray(self.mean)
        mean = np.asarray(self.mean) + delta * other.n_samples / n
        m2 = (np.asarray(self.m2) + np.asarray(other.m2)
              + delta ** 2 * self.n_samples * other.n_samples / n)
        return McEstimate._build(n, mean, m2)

    def z_score(self, target):
        se = np.asarray(self.stderr, dtype=float)
        diff = np.asarray(self.mean) - np.asarray(target, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(se > 0, np.abs(diff) / np.where(se > 0, se, 1), np.where(diff == 0, 0.0, np.inf))
        return z

    def to_dict(self) -> dict:
        return {
            "mean": np.asarray(self.mean).tolist(),
            "stderr": np.asarray(self.stderr).tolist(),
            "n": self.n_samples,
            "half_width_99": np.asarray(self.half_width_99).tolist(),
        }


def _worker_count(workers: int | None) -> int:
    if workers is not None:
        return max(1, workers)
    return max(1, int(os.environ.get("SEPNESS_THREADS", "1")))


def _summarise(task, rng):
    x = np.asarray(task(rng), dtype=float)
    if x.ndim == 0:
        x = x[None]
    n = x.shape[0]
    mean = x.mean(axis=0)
    return n, mean, ((x - mean) ** 2).sum(axis=0)


def run_replicas(task: Callable[[RngStream], object], n_replicas: int,
                 base_rng: RngStream, workers: int | None = None) -> McEstimate:
    """Run ``task`` on ``n_replicas`` independent child streams and pool the samples.

    ``task(rng)`` returns one sample or an array of samples (rows).  Summaries
    are merged in replica order, so the result does not depend on
    ``workers``; ``SEPNESS_THREADS`` sets the default worker count.
    """
    if n_replicas < 2:
        raise ParameterError("need n_replicas >= 2")
    streams = [base_rng.child(i) for i in range(n_replicas)]
    nw = _worker_count(workers)
    if nw > 1:
        with ProcessPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(_summarise, [task] * n_replicas, streams))
    else:
        parts = [_summarise(task, s) for s in streams]
    total = None
    for n, mean, m2 in parts:
        est = McEstimate(mean, 0.0, n, m2)
        total = est if total is None else total.merge(est)
    if total.n_samples < 2:
        raise ParameterError("need at least two samples in total")
    return McEstimate._build(total.n_samples, total.mean, total.m2)


# -- primal open SEP ---------------------------------------------------------

@dataclass(frozen=True)
class SepRunResult:
    graph_hash: str
    seed: int
    stream: int
    t_max: float
    burn_in: float
    observables: tuple[tuple[int, ...], ...]
    estimates: tuple[McEstimate, ...]
    n_events: int

    def to_dict(self) -> dict:
        return {
            "graph_hash": self.graph_hash,
            "seed": self.seed,
            "stream": self.stream,
            "rng": RNG_ALGORITHM,
            "t_max": self.t_max,
            "burn_in": self.burn_in,
            "n_events": self.n_events,
            "observables": [
                {"sites": list(s), **e.to_dict()} for s, e in zip(self.observables, self.estimates)
            ],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def simulate_sep(g: GraphSpec, eta0: int | Sequence[int], t_max: float, rng: RngStream,
                 observables: Sequence[Sequence[int]], burn_in: float | None = None,
                 n_batches: int = 20, event_log=None) -> SepRunResult:
    """Gillespie simulation of the open SEP with time-averaged product moments.

    Each observable ``S`` reports the time average of ``prod_{x in S} eta(x)``
    over ``[burn_in, t_max]`` (default burn-in ``t_max / 5``), with a
    batch-means standard error over ``n_batches`` equal time windows.
    ``event_log``, if given, is a text stream receiving CSV rows
    ``time,event_type,site_from,site_to`` (reservoir sites are 0 and N).
    """
    g.check()
    if not t_max > 0:
        raise ParameterError("t_max must be positive")
    burn = t_max / 5 if burn_in is None else float(burn_in)
    if not 0 <= burn < t_max:
        raise ParameterError("burn-in must lie in [0, t_max)")
    n, N = g.n_sites, g.N
    eta = list(decode(eta0, n) if isinstance(eta0, int) else eta0)
    if len(eta) != n:
        raise ParameterError("initial configuration has the wrong length")
    eta = [0] + [int(v) for v in eta] + [0]  # padded, index = site
    obs = [site_set(o, n) for o in observables]
    writer = None
    if event_log is not None:
        writer = csv.writer(event_log)
        writer.writerow(["time", "event_type", "site_from", "site_to"])

    # channels: edges then the two reservoir couplings
    edges = [(x, y, float(w)) for x, y, w in g.edges]
    incident = [[] for _ in range(n + 1)]
    for e, (x, y, _) in enumerate(edges):
        incident[x].append(e)
        incident[y].append(e)
    wl, wr = float(g.omega_left), float(g.omega_right)
    rl, rr = float(g.rho_left), float(g.rho_right)
    n_e = len(edges)
    rates = [0.0] * (n_e + 2)

    def edge_rate(e):
        x, y, w = edges[e]
        return w if eta[x] != eta[y] else 0.0

    def left_rate():
        return wl * (1 - rl) if eta[1] else wl * rl

    def right_rate():
        return wr * (1 - rr) if eta[n] else wr * rr

    for e in range(n_e):
        rates[e] = edge_rate(e)
    rates[n_e], rates[n_e + 1] = left_rate(), right_rate()
    total = sum(rates)

    draw = _Uniforms(rng)
    t = 0.0
    width = (t_max - burn) / n_batches
    acc = np.zeros((n_batches, len(obs)))
    events = 0

    def value(o):
        for x in o:
            if not eta[x]:
                return 0.0
        return 1.0

    current = [value(o) for o in obs]

    def accumulate(t0, t1):
        # credit [t0, t1) to the batches it overlaps
        lo, hi = max(t0, burn), min(t1, t_max)
        if hi <= lo:
            return
        b0 = min(int((lo - burn) / width), n_batches - 1)
        b1 = min(int((hi - burn) / width), n_batches - 1)
        for b in range(b0, b1 + 1):
            s = max(lo, burn + b * width)
            e = min(hi, burn + (b + 1) * width)
            if e > s:
                for j, v in enumerate(current):
                    if v:
                        acc[b, j] += e - s

    while t < t_max:
        dt = -math.log(1.0 - draw()) / total
        accumulate(t, t + dt)
        t += dt
        if t >= t_max:
            break
        events += 1
        if events > MAX_EVENTS:
            raise RuntimeError(f"event cap reached at t={t}")
        target = draw() * total
        c = 0
        acc_rate = rates[0]
        while acc_rate <= target and c < len(rates) - 1:
            c += 1
            acc_rate += rates[c]
        if c < n_e:
            x, y, _ = edges[c]
            src, dst = (x, y) if eta[x] else (y, x)
            eta[x], eta[y] = eta[y], eta[x]
            changed = (x, y)
            kind = "hop"
        else:
            site = 1 if c == n_e else n
            res = 0 if c == n_e else N
            if eta[site]:
                src, dst, kind = site, res, "exit"
            else:
                src, dst, kind = res, site, "enter"
            eta[site] ^= 1
            changed = (site,)
        if writer is not None:
            writer.writerow([repr(float(t)), kind, src, dst])
        for s in changed:
            for e in incident[s]:
                rates[e] = edge_rate(e)
        rates[n_e], rates[n_e + 1] = left_rate(), right_rate()
        total = sum(rates)
        current = [value(o) for o in obs]

    batch_means = acc / width
    ests = tuple(McEstimate.from_samples(batch_means[:, j]) for j in range(len(obs)))
    return SepRunResult(g.content_hash(), rng.seed, rng.stream, float(t_max), burn,
                        tuple(obs), ests, events)


# -- dual absorbing process ------------------------------------------------------

@dataclass(frozen=True)
class DualState:
    bulk: int
    absorbed_0: int
    absorbed_N: int

    @property
    def total(self) -> int:
        return bin(self.bulk).count("1") + self.absorbed_0 + self.absorbed_N


def simulate_dual(g: GraphSpec, start, rng, check_conservation: bool = False) -> DualState:
    """Run the dual jump chain from ``start`` until every particle is absorbed."""
    n = g.n_sites
    start = site_set(start, n)
    adj = g.neighbours()
    adj = [[(y, float(w)) for y, w in nb] for nb in adj]
    wl, wr = float(g.omega_left), float(g.omega_right)
    draw = rng if callable(rng) and not isinstance(rng, RngStream) else _Uniforms(rng)
    occ = [False] * (n + 2)
    pos = list(start)
    for x in pos:
        occ[x] = True
    a0 = aN = 0
    k = len(pos)
    events = 0
    while pos:
        moves = []
        tot = 0.0
        for i, x in enumerate(pos):
            for y, w in adj[x]:
                if not occ[y]:
                    moves.append((w, i, y))
                    tot += w
            if x == 1:
                moves.append((wl, i, 0))
                tot += wl
            if x == n:
                moves.append((wr, i, n + 1))
                tot += wr
        target = draw() * tot
        for w, i, y in moves:
            target -= w
            if target < 0:
                break
        x = pos[i]
        occ[x] = False
        if y == 0:
            a0 += 1
            pos.pop(i)
        elif y == n + 1:
            aN += 1
            pos.pop(i)
        else:
            occ[y] = True
            pos[i] = y
        events += 1
        if check_conservation and len(pos) + a0 + aN != k:
            raise AssertionError("dual particle number not conserved")
        if events > MAX_EVENTS:
            raise RuntimeError(f"no absorption after {MAX_EVENTS} events from {start}")
    return DualState(0, a0, aN)


def dual_level_samples(g: GraphSpec, start, n_runs: int, rng: RngStream) -> np.ndarray:
    """One-hot rows of the final absorbed-at-N count for ``n_runs`` dual runs."""
    draw = _Uniforms(rng)
    k = len(start)
    out = np.zeros((n_runs, k + 1))
    for r in range(n_runs):
        out[r, simulate_dual(g, start, draw).absorbed_N] = 1.0
    return out


# -- labelled stirring ---------------------------------------------------------

@dataclass(frozen=True)
class StirringOutcome:
    """Absorption site (``0`` or ``N``) of every label, keyed by starting site."""

    destination: dict

    def pattern(self, N: int) -> tuple[int, ...]:
        """Labels absorbed at ``N``, i.e. one sample of the random set with law ``F``."""
        return tuple(sorted(x for x, d in self.destination.items() if d == N))


def simulate_stirring(g: GraphSpec, rng, start=None) -> StirringOutcome:
    """Labelled stirring construction of the dual, started full unless ``start`` is given.

    Edge clocks swap the contents of their endpoints whether labelled or
    not; absorption clocks at sites 1 and ``n`` remove the label there.
    Clock rings that would swap two empty sites are skipped (they do not
    change the state), so the loop runs the jump chain of effective events.
    """
    n, N = g.n_sites, g.N
    start = tuple(range(1, n + 1)) if start is None else site_set(start, n)
    edges = [(x, y, float(w)) for x, y, w in g.edges]
    wl, wr = float(g.omega_left), float(g.omega_right)
    draw = rng if callable(rng) and not isinstance(rng, RngStream) else _Uniforms(rng)
    label = [0] * (n + 2)  # label[x] = starting site of the particle at x, 0 = empty
    for x in start:
        label[x] = x
    dest = {}
    left = len(start)
    events = 0
    while left:
        tot = 0.0
        active = []
        for x, y, w in edges:
            if label[x] or label[y]:
                active.append((w, x, y))
                tot += w
        if label[1]:
            active.append((wl, 1, 0))
            tot += wl
        if label[n]:
            active.append((wr, n, N))
            tot += wr
        target = draw() * tot
        for w, x, y in active:
            target -= w
            if target < 0:
                break
        if y == 0 or y == N:
            dest[label[x]] = y
            label[x] = 0
            left -= 1
        else:
            label[x], label[y] = label[y], label[x]
        events += 1
        if events > MAX_EVENTS:
            raise RuntimeError("stirring run did not absorb")
    return StirringOutcome(dest)


def stirring_pattern_samples(g: GraphSpec, n_runs: int, rng: RngStream, start=None) -> np.ndarray:
    """Bitmask of the labels absorbed at ``N`` for each of ``n_runs`` stirring runs."""
    draw = _Uniforms(rng)
    N = g.N
    out = np.empty(n_runs, dtype=np.int64)
    for r in range(n_runs):
        out[r] = mask_of(simulate_stirring(g, draw, start).pattern(N))
    return out


# -- ninja coupling ------------------------------------------------------------

def simulate_ninja(N: int, xs, ninja_start: int, rng) -> tuple[tuple[int, ...], int]:
    """Run the ninja process to full absorption; return label and ninja destinations."""
    state = _ninja.check_start(N, xs, ninja_start)
    draw = rng if callable(rng) and not isinstance(rng, RngStream) else _Uniforms(rng)
    events = 0
    while not _ninja.is_terminal(N, state):
        moves = _ninja.ninja_moves(N, state)
        state = moves[min(int(draw() * len(moves)), len(moves) - 1)]
        events += 1
        if events > MAX_EVENTS:
            raise RuntimeError("ninja run did not absorb")
    return state[:-1], state[-1]


def ninja_samples(N: int, xs, ninja_start: int, n_runs: int, rng: RngStream) -> np.ndarray:
    """Per-run rows ``(#labels at N, E, ninja at 0, E and ninja at 0, #particles at N)``.

    ``E`` is the event that every label ends at ``N``; the last column counts
    the ninja too, which is the dual level once labels are forgotten.
    """
    draw = _Uniforms(rng)
    k = len(xs)
    out = np.empty((n_runs, 5))
    for r in range(n_runs):
        labels, nj = simulate_ninja(N, xs, ninja_start, draw)
        at_n = sum(1 for p in labels if p == N)
        out[r] = (at_n, at_n == k, nj == 0, at_n == k and nj == 0, at_n + (nj == N))
    return out
