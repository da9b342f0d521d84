"""Watts-Strogatz small-world networks with short/long edge tags.

Edges are stored as flat numpy arrays so that a graph can be shared
read-only between simulation replicas. A CSR adjacency (``indptr``,
``nbr``, ``eid``) is built once at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

SHORT = 0
LONG = 1
KIND_NAMES = {SHORT: "short", LONG: "long"}


@dataclass(frozen=True)
class Graph:
    """Undirected small-world graph.

    ``u[e]``, ``v[e]`` are the endpoints of edge ``e`` and ``long[e]`` is True
    for rewired edges. ``nbr[indptr[i]:indptr[i+1]]`` lists the neighbours of
    node ``i`` and ``eid`` holds the matching edge ids.
    """

    n: int
    k: int
    p: float
    seed: int | None
    u: np.ndarray
    v: np.ndarray
    long: np.ndarray
    indptr: np.ndarray = field(repr=False)
    nbr: np.ndarray = field(repr=False)
    eid: np.ndarray = field(repr=False)

    @property
    def n_edges(self) -> int:
        return int(self.u.size)

    @property
    def n_long(self) -> int:
        return int(self.long.sum())

    def degree(self) -> np.ndarray:
        return np.diff(self.indptr)

    def edges(self):
        """Yield ``(u, v, kind)`` triples in generation order."""
        for a, b, is_long in zip(self.u.tolist(), self.v.tolist(), self.long.tolist()):
            yield a, b, LONG if is_long else SHORT

    def neighbors(self, node: int) -> np.ndarray:
        return self.nbr[self.indptr[node]:self.indptr[node + 1]]


def _build_csr(n: int, u: np.ndarray, v: np.ndarray):
    ends = np.concatenate([u, v])
    others = np.concatenate([v, u])
    ids = np.concatenate([np.arange(u.size), np.arange(u.size)])
    # stable sort keeps neighbour order reproducible
    order = np.argsort(ends, kind="stable")
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(ends, minlength=n), out=indptr[1:])
    return indptr, others[order].astype(np.int32), ids[order].astype(np.int32)


def from_edges(n: int, k: int, p: float, u, v, long, seed: int | None = None) -> Graph:
    """Assemble a :class:`Graph` from explicit edge arrays."""
    u = np.asarray(u, dtype=np.int32)
    v = np.asarray(v, dtype=np.int32)
    long = np.asarray(long, dtype=bool)
    indptr, nbr, eid = _build_csr(n, u, v)
    for arr in (u, v, long, indptr, nbr, eid):
        arr.setflags(write=False)
    return Graph(n=n, k=k, p=p, seed=seed, u=u, v=v, long=long,
                 indptr=indptr, nbr=nbr, eid=eid)


def generate(n: int, k: int, p: float, seed=None) -> Graph:
    """Generate a Watts-Strogatz graph.

    Every node is joined to its ``k/2`` nearest ring neighbours on each side.
    Each lattice edge ``(u, v)`` is then rewired with probability ``p``: ``u``
    is kept and ``v`` is redrawn uniformly, rejecting self-loops and
    duplicates. Rewired edges are tagged long. If no valid target turns up
    after ``n`` draws the edge stays where it is and remains short.

    Args:
        n: Number of nodes.
        k: Ties per node before rewiring; must be even and smaller than ``n``.
        p: Rewiring probability in [0, 1].
        seed: Anything accepted by :func:`numpy.random.default_rng`.

    Returns:
        The generated graph. The same seed always gives the same edge list.
    """
    if k % 2:
        raise ValueError(f"k must be even, got {k}")
    if k <= 0 or k >= n:
        raise ValueError(f"need 0 < k < n, got k={k}, n={n}")
    if n < k + 2:
        raise ValueError(f"need n >= k + 2, got n={n}, k={k}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")

    rng = np.random.default_rng(seed)
    half = k // 2
    base = np.arange(n, dtype=np.int64)
    u = np.tile(base, half)
    v = (u + np.repeat(np.arange(1, half + 1), n)) % n
    long = np.zeros(u.size, dtype=bool)

    rewire = np.flatnonzero(rng.random(u.size) < p)
    if rewire.size:
        keys = set((np.minimum(u, v) * n + np.maximum(u, v)).tolist())
        u_list = u.tolist()
        v_list = v.tolist()
        # candidate targets are drawn in blocks and consumed in order
        pool: list[int] = []
        cursor = 0
        for e in rewire.tolist():
            a = u_list[e]
            old = v_list[e]
            for _ in range(n):
                if cursor == len(pool):
                    pool = rng.integers(n, size=max(1024, 2 * rewire.size)).tolist()
                    cursor = 0
                w = pool[cursor]
                cursor += 1
                if w == a:
                    continue
                key = a * n + w if a < w else w * n + a
                if key in keys:
                    continue
                keys.discard(a * n + old if a < old else old * n + a)
                keys.add(key)
                v_list[e] = w
                long[e] = True
                break
        v = np.array(v_list, dtype=np.int64)

    return from_edges(n, k, p, u, v, long, seed=seed if isinstance(seed, int) else None)


def ring_distance(a: int, b: int, n: int) -> int:
    """Hop distance between two positions on a ring of ``n`` nodes."""
    if not (0 <= a < n and 0 <= b < n):
        raise ValueError(f"nodes must lie in [0, {n})")
    d = abs(a - b)
    return min(d, n - d)


@dataclass(frozen=True)
class RegionPartition:
    n: int
    n_regions: int

    @property
    def block(self) -> int:
        return self.n // self.n_regions

    def region_of(self, node):
        """Region index of ``node`` (scalar or array)."""
        return np.asarray(node) // self.block

    def labels(self) -> np.ndarray:
        return np.arange(self.n) // self.block


def partition(n: int, n_regions: int) -> RegionPartition:
    """Split the ring into ``n_regions`` contiguous arcs of equal size."""
    if n_regions <= 0 or n % n_regions:
        raise ValueError(f"n_regions={n_regions} does not divide n={n}")
    return RegionPartition(n=n, n_regions=n_regions)


def dump(graph: Graph, path) -> None:
    """Write ``graph`` as an edge list: header ``n k p seed`` then ``u v kind``."""
    lines = [f"{graph.n} {graph.k} {graph.p!r} {graph.seed if graph.seed is not None else '-'}"]
    lines.extend(f"{a} {b} {KIND_NAMES[kind]}" for a, b, kind in graph.edges())
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> Graph:
    """Read an edge list written by :func:`dump`."""
    rows = Path(path).read_text().split("\n")
    n, k, p, seed = rows[0].split()
    body = [r.split() for r in rows[1:] if r.strip()]
    u = [int(r[0]) for r in body]
    v = [int(r[1]) for r in body]
    long = [r[2] == "long" for r in body]
    return from_edges(int(n), int(k), float(p), u, v, long,
                      seed=None if seed == "-" else int(seed))
