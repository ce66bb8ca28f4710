"""Graphs, reservoir parameters and configuration encodings.

Bulk sites are numbered ``1 .. n_sites`` (so ``N = n_sites + 1``); the two
reservoirs / absorbing sites are the virtual sites ``0`` and ``N`` and never
appear in the edge list.  A configuration ``eta`` of the bulk is stored as an
integer bitmask whose bit ``x - 1`` holds ``eta(x)``.
"""
from __future__ import annotations

import hashlib
import json
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Iterator, Sequence

#: hard cap for bit-packed configurations
MAX_SIM_SITES = 63
#: soft cap for anything that enumerates all 2**n_sites configurations
MAX_EXACT_SITES = 20


class ParameterError(ValueError):
    """Invalid model parameter or site set."""


class CapacityError(RuntimeError):
    """Requested computation exceeds an enforced size cap."""


@dataclass(frozen=True)
class GraphSpec:
    """Weighted bulk graph on ``{1..n_sites}`` plus reservoir couplings.

    ``edges`` holds ``(x, y, w)`` triples with ``x < y``.  Construction
    normalises the edge list (sorted, orientation fixed) but does not check
    connectivity; call :func:`validate` or :meth:`check` for that.
    """

    n_sites: int
    edges: tuple[tuple[int, int, float], ...]
    omega_left: float
    omega_right: float
    rho_left: float
    rho_right: float

    def __post_init__(self):
        norm = []
        for e in self.edges:
            x, y, w = e
            x, y = int(x), int(y)
            if x > y:
                x, y = y, x
            norm.append((x, y, w))
        object.__setattr__(self, "edges", tuple(sorted(norm)))
        object.__setattr__(self, "n_sites", int(self.n_sites))

    @property
    def N(self) -> int:
        """Index of the right reservoir, ``n_sites + 1``."""
        return self.n_sites + 1

    def check(self) -> "GraphSpec":
        problems = validate(self)
        if problems:
            raise ParameterError("; ".join(problems))
        return self

    def neighbours(self) -> list[list[tuple[int, float]]]:
        """Adjacency lists indexed by site (index 0 unused)."""
        adj: list[list[tuple[int, float]]] = [[] for _ in range(self.n_sites + 1)]
        for x, y, w in self.edges:
            adj[x].append((y, w))
            adj[y].append((x, w))
        return adj

    def is_homogeneous_segment(self, unit_boundary: bool = False) -> bool:
        """True for the nearest-neighbour segment with unit bulk conductances."""
        want = tuple((x, x + 1, 1) for x in range(1, self.n_sites))
        if len(self.edges) != len(want):
            return False
        for (x, y, w), (a, b, _) in zip(self.edges, want):
            if (x, y) != (a, b) or w != 1:
                return False
        if unit_boundary:
            return self.omega_left == 1 and self.omega_right == 1
        return True

    def reversed(self) -> "GraphSpec":
        """Mirror image ``x -> N - x`` with the two reservoirs swapped."""
        N = self.N
        return GraphSpec(
            self.n_sites,
            tuple((N - y, N - x, w) for x, y, w in self.edges),
            self.omega_right,
            self.omega_left,
            self.rho_right,
            self.rho_left,
        )

    def to_dict(self) -> dict:
        return {
            "n_sites": self.n_sites,
            "edges": [[x, y, _plain(w)] for x, y, w in self.edges],
            "omega_left": _plain(self.omega_left),
            "omega_right": _plain(self.omega_right),
            "rho_left": _plain(self.rho_left),
            "rho_right": _plain(self.rho_right),
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "GraphSpec":
        try:
            return cls(
                n_sites=int(d["n_sites"]),
                edges=tuple((int(x), int(y), float(w)) for x, y, w in d["edges"]),
                omega_left=float(d["omega_left"]),
                omega_right=float(d["omega_right"]),
                rho_left=float(d["rho_left"]),
                rho_right=float(d["rho_right"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParameterError(f"malformed graph document: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "GraphSpec":
        return cls.from_dict(json.loads(text))

    def content_hash(self) -> str:
        """Short sha256 of the canonical JSON form (all numbers as floats)."""
        d = self.to_dict()
        d["edges"] = [[x, y, float(w)] for x, y, w in d["edges"]]
        for k in ("omega_left", "omega_right", "rho_left", "rho_right"):
            d[k] = float(d[k])
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class AbgdParams:
    """Creation/annihilation rates of the alpha-beta-gamma-delta model."""

    alpha: float
    beta: float
    gamma: float
    delta: float


def _plain(v):
    if isinstance(v, Fraction):
        return float(v)
    return v


def _check_rate(name: str, v) -> None:
    if not v > 0:
        raise ParameterError(f"{name} must be positive, got {v!r}")


def _check_density(name: str, v) -> None:
    if not 0 < v < 1:
        raise ParameterError(f"{name} must lie strictly inside (0, 1), got {v!r}")


def homogeneous_segment(n_sites: int, omega_left=1, omega_right=1,
                        rho_left=0.5, rho_right=0.5) -> GraphSpec:
    """Nearest-neighbour segment ``1 - 2 - ... - n_sites`` with unit bulk rates.

    Exact rationals (``int``/``Fraction``) are preserved so that the closed
    forms can run in rational arithmetic.
    """
    if n_sites < 1:
        raise ParameterError("n_sites must be >= 1")
    _check_rate("omega_left", omega_left)
    _check_rate("omega_right", omega_right)
    _check_density("rho_left", rho_left)
    _check_density("rho_right", rho_right)
    edges = tuple((x, x + 1, 1) for x in range(1, n_sites))
    return GraphSpec(n_sites, edges, omega_left, omega_right, rho_left, rho_right)


def from_abgd(n_sites: int, p: AbgdParams) -> GraphSpec:
    """Homogeneous segment with reservoirs given by creation/annihilation rates.

    Left: creation ``alpha``, annihilation ``gamma``; right: creation
    ``delta``, annihilation ``beta``.
    """
    for name in ("alpha", "beta", "gamma", "delta"):
        _check_rate(name, getattr(p, name))
    a, b, g, d = p.alpha, p.beta, p.gamma, p.delta
    if all(isinstance(v, (int, Fraction)) for v in (a, b, g, d)):
        a, b, g, d = (Fraction(v) for v in (a, b, g, d))
    return homogeneous_segment(
        n_sites,
        omega_left=1 / (a + g),
        omega_right=1 / (d + b),
        rho_left=a / (a + g),
        rho_right=d / (d + b),
    )


def to_abgd(g: GraphSpec) -> AbgdParams:
    """Inverse of :func:`from_abgd` on the reservoir parameters."""
    return AbgdParams(
        alpha=g.rho_left / g.omega_left,
        beta=(1 - g.rho_right) / g.omega_right,
        gamma=(1 - g.rho_left) / g.omega_left,
        delta=g.rho_right / g.omega_right,
    )


def validate(g: GraphSpec) -> list[str]:
    """Return a list of violated invariants; an empty list means ``g`` is valid."""
    out = []
    n = g.n_sites
    if n < 1:
        return ["n_sites must be >= 1"]
    if n > MAX_SIM_SITES:
        out.append(f"n_sites {n} exceeds the {MAX_SIM_SITES}-site bitmask cap")
    seen = set()
    for x, y, w in g.edges:
        if not (1 <= x <= n and 1 <= y <= n):
            out.append(f"edge ({x},{y}) has an endpoint outside 1..{n}")
            continue
        if x == y:
            out.append(f"self-loop at {x}")
        if (x, y) in seen:
            out.append(f"duplicate edge ({x},{y})")
        seen.add((x, y))
        if not w > 0:
            out.append(f"non-positive conductance on edge ({x},{y})")
    if not g.omega_left > 0:
        out.append("non-positive omega_left")
    if not g.omega_right > 0:
        out.append("non-positive omega_right")
    if not 0 < g.rho_left < 1:
        out.append("rho_left outside (0,1)")
    if not 0 < g.rho_right < 1:
        out.append("rho_right outside (0,1)")
    if not _connected(n, seen):
        out.append("not connected")
    return out


def _connected(n: int, edges: Iterable[tuple[int, int]]) -> bool:
    adj = [[] for _ in range(n + 1)]
    for x, y in edges:
        if 1 <= x <= n and 1 <= y <= n:
            adj[x].append(y)
            adj[y].append(x)
    seen = {1}
    todo = deque([1])
    while todo:
        x = todo.popleft()
        for y in adj[x]:
            if y not in seen:
                seen.add(y)
                todo.append(y)
    return len(seen) == n


# -- site sets and configurations -------------------------------------------

def site_set(sites: Iterable[int], n_sites: int | None = None) -> tuple[int, ...]:
    """Normalise ``sites`` to a strictly increasing tuple, checking the range."""
    s = tuple(sorted(int(x) for x in sites))
    if len(set(s)) != len(s):
        raise ParameterError(f"repeated site in {s}")
    if n_sites is not None and s and (s[0] < 1 or s[-1] > n_sites):
        raise ParameterError(f"sites {s} outside 1..{n_sites}")
    return s


def subsets_of(sites: Sequence[int]) -> Iterator[tuple[int, ...]]:
    """All subsets of ``sites`` in lexicographic bitmask order.

    Subset number ``m`` contains ``sites[i]`` iff bit ``i`` of ``m`` is set,
    so ``(1, 3)`` yields ``(), (1,), (3,), (1, 3)``.
    """
    sites = tuple(sites)
    for m in range(1 << len(sites)):
        yield tuple(s for i, s in enumerate(sites) if m >> i & 1)


def subsets_of_size(sites: Sequence[int], k: int) -> Iterator[tuple[int, ...]]:
    return combinations(tuple(sites), k)


def encode(eta: Sequence[int]) -> int:
    """Pack an occupation vector ``(eta(1), ..., eta(n))`` into a bitmask."""
    if len(eta) > MAX_SIM_SITES:
        raise CapacityError(f"{len(eta)} sites exceed the bitmask cap")
    bits = 0
    for i, v in enumerate(eta):
        if v not in (0, 1):
            raise ParameterError(f"occupation must be 0/1, got {v!r}")
        bits |= v << i
    return bits


def decode(bits: int, n_sites: int) -> tuple[int, ...]:
    if bits < 0 or bits >> n_sites:
        raise ParameterError(f"bitmask {bits} does not fit in {n_sites} sites")
    return tuple(bits >> i & 1 for i in range(n_sites))


def mask_of(sites: Iterable[int]) -> int:
    m = 0
    for x in sites:
        m |= 1 << (x - 1)
    return m


def sites_of(mask: int) -> tuple[int, ...]:
    out = []
    x = 1
    while mask:
        if mask & 1:
            out.append(x)
        mask >>= 1
        x += 1
    return tuple(out)


def standard_battery() -> list[tuple[str, GraphSpec]]:
    """Small graphs used by the verification suites.

    Homogeneous segments of several sizes, heterogeneous conductances, a
    tree and a cycle with a chord, all at ``rho_left=0.2, rho_right=0.8``.
    """
    rl, rr = 0.2, 0.8
    out = [(f"segment-{n}", homogeneous_segment(n, 1, 1, rl, rr)) for n in (2, 3, 4, 5)]
    out.append(("segment-4-boundary", homogeneous_segment(4, 3, 0.5, rl, rr)))
    out.append(("hetero-3", GraphSpec(3, ((1, 2, 2.0), (2, 3, 0.5)), 1.0, 1.0, rl, rr)))
    out.append(("tree-5", GraphSpec(
        5, ((1, 2, 1.0), (2, 3, 0.7), (2, 4, 1.5), (4, 5, 2.0)), 0.5, 2.0, rl, rr)))
    out.append(("cycle-chord-5", GraphSpec(
        5, ((1, 2, 1.0), (2, 3, 2.0), (3, 4, 0.5), (4, 5, 1.0), (1, 5, 1.5), (2, 4, 0.8)),
        1.0, 3.0, rl, rr)))
    return out
