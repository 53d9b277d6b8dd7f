"""Two-layer network generation.

Influence layers are simple undirected graphs stored as a sorted ``(m, 2)``
edge array with ``i < j`` plus a CSR adjacency. Communication layers are
row-normalised weight matrices in CSR form. Nodes are 0-based.
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

log = logging.getLogger(__name__)

ROW_SUM_TOL = 1e-12


class GenerationError(RuntimeError):
    """A generator could not produce a graph within its retry budget."""


class Family(str, enum.Enum):
    RR = "rr"
    ER = "er"
    WS = "ws"
    BA = "ba"


@dataclass(frozen=True)
class TopologySpec:
    family: Family
    n: int
    d: int
    p: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        n, d = self.n, self.d
        if n < 2:
            raise ValueError(f"n must be >= 2, got {n}")
        if not 2 <= d < n:
            raise ValueError(f"need 2 <= d < n, got d={d}, n={n}")
        if (n * d) % 2:
            raise ValueError(f"n*d must be even, got n={n}, d={d}")
        # odd d only makes sense for the configuration model
        if d % 2 and self.family is not Family.RR:
            raise ValueError(f"d must be even for family {self.family.value}, got {d}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must lie in [0, 1], got {self.p}")
        if self.family is Family.BA and n < d + 1:
            raise ValueError(f"BA needs n >= d+1, got n={n}, d={d}")

    @property
    def edge_count(self) -> int:
        return self.n * self.d // 2


def _csr_from_edges(n, edges):
    """Symmetric CSR (indptr, indices) for an undirected edge array."""
    if len(edges):
        src = np.concatenate([edges[:, 0], edges[:, 1]])
        dst = np.concatenate([edges[:, 1], edges[:, 0]])
    else:
        src = dst = np.empty(0, dtype=np.int64)
    order = np.lexsort((dst, src))
    indices = dst[order].astype(np.int64)
    counts = np.bincount(src, minlength=n)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, indices


@dataclass(frozen=True, eq=False)
class InfluenceLayer:
    """Unweighted, undirected, loop-free graph."""

    n: int
    edges: np.ndarray
    indptr: np.ndarray = field(init=False, repr=False)
    indices: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        e = np.sort(e, axis=1)
        if len(e):
            if (e[:, 0] == e[:, 1]).any():
                raise ValueError("self-loops are not allowed in the influence layer")
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            e = e[np.lexsort((e[:, 1], e[:, 0]))]
            if (np.diff(e, axis=0) == 0).all(axis=1).any():
                raise ValueError("duplicate edges are not allowed")
        e.setflags(write=False)
        object.__setattr__(self, "edges", e)
        indptr, indices = _csr_from_edges(self.n, e)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)

    @property
    def degrees(self) -> np.ndarray:
        return np.diff(self.indptr)

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, i: int) -> np.ndarray:
        return self.indices[self.indptr[i]:self.indptr[i + 1]]

    def edge_set(self) -> set[tuple[int, int]]:
        return {(int(i), int(j)) for i, j in self.edges}

    def adjacency(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.int64)
        a[self.edges[:, 0], self.edges[:, 1]] = 1
        a[self.edges[:, 1], self.edges[:, 0]] = 1
        return a

    def __eq__(self, other):
        if not isinstance(other, InfluenceLayer):
            return NotImplemented
        return self.n == other.n and np.array_equal(self.edges, other.edges)

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CommunicationLayer:
    """Row-normalised weights, ``sum_j |w_ij| = 1`` on every row."""

    n: int
    indptr: np.ndarray
    indices: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        indptr = np.asarray(self.indptr, dtype=np.int64)
        indices = np.asarray(self.indices, dtype=np.int64)
        weights = np.asarray(self.weights, dtype=np.float64)
        if len(indptr) != self.n + 1 or len(indices) != len(weights) or indptr[-1] != len(indices):
            raise ValueError("malformed CSR arrays")
        sums = np.add.reduceat(np.abs(weights), indptr[:-1]) if len(weights) else np.zeros(self.n)
        sums[np.diff(indptr) == 0] = 0.0
        bad = np.flatnonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)
        if len(bad):
            raise ValueError(f"row {bad[0]} has sum |w| = {sums[bad[0]]!r}, expected 1")
        for a in (indptr, indices, weights):
            a.setflags(write=False)
        object.__setattr__(self, "indptr", indptr)
        object.__setattr__(self, "indices", indices)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_rows(cls, rows: list[dict[int, float]]) -> "CommunicationLayer":
        indptr = [0]
        indices, weights = [], []
        for row in rows:
            for j in sorted(row):
                indices.append(j)
                weights.append(row[j])
            indptr.append(len(indices))
        return cls(len(rows), np.array(indptr), np.array(indices, dtype=np.int64),
                   np.array(weights, dtype=np.float64))

    def row(self, i: int) -> dict[int, float]:
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return {int(j): float(w) for j, w in zip(self.indices[lo:hi], self.weights[lo:hi])}

    def dense(self) -> np.ndarray:
        return csr_matrix((self.weights, self.indices, self.indptr), shape=(self.n, self.n)).toarray()

    def __eq__(self, other):
        if not isinstance(other, CommunicationLayer):
            return NotImplemented
        return (self.n == other.n and np.array_equal(self.indptr, other.indptr)
                and np.array_equal(self.indices, other.indices)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


@dataclass(frozen=True)
class TwoLayerNetwork:
    influence: InfluenceLayer
    communication: CommunicationLayer

    def __post_init__(self):
        if self.influence.n != self.communication.n:
            raise ValueError(
                f"layer sizes differ: {self.influence.n} vs {self.communication.n}")

    @property
    def n(self) -> int:
        return self.influence.n


# ---------------------------------------------------------------- generators

def configuration_pairing(degrees, rng: np.random.Generator, max_restarts: int = 1000):
    """Pair half-links uniformly at random into a simple graph.

    A drawn pair is accepted only if it joins two distinct, not yet adjacent
    nodes. When no acceptable pair is left the whole pairing is restarted.
    Returns ``(edges, restarts)``.
    """
    degrees = np.asarray(degrees, dtype=np.int64)
    if degrees.sum() % 2:
        raise ValueError("degree sum must be even")
    base = np.repeat(np.arange(len(degrees), dtype=np.int64), degrees)
    for restart in range(max_restarts + 1):
        stubs = base.copy()
        r = len(stubs)
        adjacent: set[tuple[int, int]] = set()
        edges = []
        misses = 0
        draws: list = []
        while r:
            if not draws:
                draws = rng.random((r, 2)).tolist()[::-1]
            ua, ub = draws.pop()
            a = int(ua * r)
            b = int(ub * (r - 1))
            if b >= a:
                b += 1
            u, v = int(stubs[a]), int(stubs[b])
            key = (u, v) if u < v else (v, u)
            if u != v and key not in adjacent:
                adjacent.add(key)
                edges.append(key)
                for k in sorted((a, b), reverse=True):
                    r -= 1
                    stubs[k] = stubs[r]
                misses = 0
                continue
            misses += 1
            if misses >= 32 and _stubs_deadlocked(stubs[:r], adjacent):
                break
        else:
            return np.array(edges, dtype=np.int64).reshape(-1, 2), restart
        log.debug("configuration model stalled with %d half-links left; restarting", r)
    raise GenerationError(f"configuration model failed after {max_restarts} restarts")


def _stubs_deadlocked(stubs, adjacent) -> bool:
    nodes = np.unique(stubs)
    for x in range(len(nodes)):
        u = int(nodes[x])
        for y in range(x + 1, len(nodes)):
            v = int(nodes[y])
            if (u, v) not in adjacent:
                return False
    return True


def generate_rr(spec: TopologySpec, rng: np.random.Generator, max_restarts: int = 1000) -> InfluenceLayer:
    if spec.family is not Family.RR:
        raise ValueError(f"expected an rr spec, got {spec.family.value}")
    edges, _ = configuration_pairing(np.full(spec.n, spec.d), rng, max_restarts)
    return InfluenceLayer(spec.n, edges)


def generate_er(spec: TopologySpec, rng: np.random.Generator) -> InfluenceLayer:
    if spec.family is not Family.ER:
        raise ValueError(f"expected an er spec, got {spec.family.value}")
    n, m = spec.n, spec.edge_count
    if m > n * (n - 1) // 2:
        raise ValueError("edge budget exceeds the complete graph")
    chosen: set[tuple[int, int]] = set()
    edges = []
    while len(edges) < m:
        for u, v in rng.integers(n, size=(m - len(edges) + 16, 2)).tolist():
            if u == v:
                continue
            key = (u, v) if u < v else (v, u)
            if key not in chosen:
                chosen.add(key)
                edges.append(key)
                if len(edges) == m:
                    break
    return InfluenceLayer(n, np.array(edges, dtype=np.int64))


def ring_lattice_edges(n: int, d: int) -> list[tuple[int, int]]:
    edges = []
    for i in range(n):
        for k in range(1, d // 2 + 1):
            j = (i + k) % n
            edges.append((i, j) if i < j else (j, i))
    return edges


def generate_ws(spec: TopologySpec, rng: np.random.Generator) -> InfluenceLayer:
    """Ring lattice with each edge rewired independently with probability ``p``.

    A rewired edge keeps one endpoint (chosen at random) and moves the other to
    a uniform node among the remaining ``n - 2``. Targets that would duplicate
    an edge are redrawn up to ``n`` times before the edge is left in place.
    """
    if spec.family is not Family.WS:
        raise ValueError(f"expected a ws spec, got {spec.family.value}")
    n = spec.n
    lattice = ring_lattice_edges(n, spec.d)
    present = set(lattice)
    edges = list(lattice)
    if spec.p == 0.0:
        return InfluenceLayer(n, np.array(edges, dtype=np.int64))
    for idx, (u, v) in enumerate(lattice):
        if rng.random() >= spec.p:
            continue
        keep, drop = (u, v) if rng.random() < 0.5 else (v, u)
        for _ in range(n):
            t = int(rng.integers(n - 2))
            # map 0..n-3 onto the nodes other than keep and drop
            lo, hi = min(keep, drop), max(keep, drop)
            if t >= lo:
                t += 1
            if t >= hi:
                t += 1
            key = (keep, t) if keep < t else (t, keep)
            if key not in present:
                present.discard((u, v))
                present.add(key)
                edges[idx] = key
                break
    return InfluenceLayer(n, np.array(edges, dtype=np.int64))


def generate_ba(spec: TopologySpec, rng: np.random.Generator) -> InfluenceLayer:
    """Preferential attachment grown from a clique on nodes ``0..d``.

    Every new node links to ``d/2`` distinct existing nodes, each drawn with
    probability proportional to its current degree.
    """
    if spec.family is not Family.BA:
        raise ValueError(f"expected a ba spec, got {spec.family.value}")
    n, d = spec.n, spec.d
    k = d // 2
    edges = [(i, j) for i in range(d + 1) for j in range(i + 1, d + 1)]
    # each node appears once per incident edge, so uniform draws are degree-weighted
    ends = [v for e in edges for v in e]
    for new in range(d + 1, n):
        targets: list[int] = []
        while len(targets) < k:
            t = ends[int(rng.integers(len(ends)))]
            if t not in targets:
                targets.append(t)
        for t in targets:
            edges.append((t, new))
            ends.extend((t, new))
    return InfluenceLayer(n, np.array(edges, dtype=np.int64))


_GENERATORS = {
    Family.RR: generate_rr,
    Family.ER: generate_er,
    Family.WS: generate_ws,
    Family.BA: generate_ba,
}


def generate(spec: TopologySpec, rng: np.random.Generator) -> InfluenceLayer:
    return _GENERATORS[spec.family](spec, rng)


# ------------------------------------------------------------ weights / checks

def build_random_walk_weights(layer: InfluenceLayer) -> CommunicationLayer:
    deg = layer.degrees
    if (deg == 0).any():
        raise ValueError(f"node {int(np.argmax(deg == 0))} is isolated; random-walk weights undefined")
    weights = np.repeat(1.0 / deg, deg)
    return CommunicationLayer(layer.n, layer.indptr.copy(), layer.indices.copy(), weights)


def make_stubborn(comm: CommunicationLayer, s: int) -> CommunicationLayer:
    if not 0 <= s < comm.n:
        raise ValueError(f"node {s} out of range for n={comm.n}")
    lo, hi = comm.indptr[s], comm.indptr[s + 1]
    indices = np.concatenate([comm.indices[:lo], [s], comm.indices[hi:]])
    weights = np.concatenate([comm.weights[:lo], [1.0], comm.weights[hi:]])
    indptr = comm.indptr.copy()
    indptr[s + 1:] += 1 - (hi - lo)
    return CommunicationLayer(comm.n, indptr, indices, weights)


def is_connected(graph) -> bool:
    """Undirected reachability over an InfluenceLayer or CommunicationLayer."""
    if graph.n <= 1:
        return True
    if isinstance(graph, CommunicationLayer):
        data = np.ones(len(graph.indices))
        mat = csr_matrix((data, graph.indices, graph.indptr), shape=(graph.n, graph.n))
    else:
        mat = csr_matrix((np.ones(len(graph.indices)), graph.indices, graph.indptr),
                         shape=(graph.n, graph.n))
    ncomp, _ = connected_components(mat, directed=True, connection="weak")
    return ncomp == 1


# ------------------------------------------------------------------ edge lists

def write_edgelist(layer, path) -> None:
    """Write ``n=<n>`` then one ``i j`` line per edge (``i j w`` for weights)."""
    lines = [f"n={layer.n}"]
    if isinstance(layer, CommunicationLayer):
        for i in range(layer.n):
            for j, w in layer.row(i).items():
                lines.append(f"{i} {j} {w!r}")
    else:
        lines.extend(f"{i} {j}" for i, j in layer.edges)
    Path(path).write_text("\n".join(lines) + "\n")


def read_edgelist(path):
    """Inverse of :func:`write_edgelist`; the column count picks the layer type."""
    text = Path(path).read_text().split("\n")
    header = text[0].strip()
    if not header.startswith("n="):
        raise ValueError(f"{path}: missing 'n=' header")
    n = int(header[2:])
    rows = [ln.split() for ln in text[1:] if ln.strip()]
    if rows and len(rows[0]) == 3:
        weight_rows: list[dict[int, float]] = [{} for _ in range(n)]
        for i, j, w in rows:
            weight_rows[int(i)][int(j)] = float(w)
        return CommunicationLayer.from_rows(weight_rows)
    edges = np.array([[int(i), int(j)] for i, j in rows], dtype=np.int64).reshape(-1, 2)
    return InfluenceLayer(n, edges)
