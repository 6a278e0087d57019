"""Regular graphs, their spectral gap, and statistics of uniformly random t-walks."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import Disconnected, EnumerationTooLarge, Infeasible, ParseError

ENUM_CAP = 10**6


def _edge(u, v):
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple
    name: str = field(default="", compare=False)

    def __post_init__(self):
        edges = tuple(_edge(int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for {self.n} vertices")
        if len(set(edges)) != len(edges):
            raise ValueError("repeated edge")
        object.__setattr__(self, "edges", edges)

    @property
    def adjacency(self):
        """Neighbour lists, each sorted."""
        adj = [[] for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return [sorted(a) for a in adj]

    @property
    def degrees(self):
        return [len(a) for a in self.adjacency]

    @property
    def degree(self):
        """Common degree d of a regular graph (ValueError otherwise)."""
        deg = set(self.degrees)
        if len(deg) != 1:
            raise ValueError("graph is not regular")
        return deg.pop()

    @property
    def is_regular(self):
        return len(set(self.degrees)) == 1

    def edge_index(self):
        return {e: i for i, e in enumerate(self.edges)}

    def adjacency_matrix(self):
        a = np.zeros((self.n, self.n))
        for u, v in self.edges:
            a[u, v] += 1
            a[v, u] += 1
        return a

    def is_connected(self):
        adj = self.adjacency
        seen = {0}
        stack = [0]
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == self.n

    def to_dict(self):
        return {"n": self.n, "edges": [list(e) for e in self.edges]}


def graph_from_dict(data):
    if not isinstance(data, dict):
        raise ParseError("expected an object", "$")
    if not isinstance(data.get("n"), int) or data["n"] < 1:
        raise ParseError("'n' must be a positive integer", "$.n")
    edges = data.get("edges")
    if not isinstance(edges, list):
        raise ParseError("'edges' must be a list", "$.edges")
    for i, e in enumerate(edges):
        if not (isinstance(e, list) and len(e) == 2 and all(isinstance(x, int) for x in e)):
            raise ParseError("edge must be a pair of integers", f"$.edges[{i}]")
    try:
        return Graph(data["n"], tuple(tuple(e) for e in edges), data.get("name", ""))
    except ValueError as exc:
        raise ParseError(str(exc), "$.edges") from exc


def parse_edge_list(text):
    """Whitespace-separated ``u v`` pairs, one per line; ``#`` starts a comment; n = max vertex + 1."""
    edges = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"expected 'u v', got {line!r}", f"line {lineno}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise ParseError(f"non-integer vertex in {line!r}", f"line {lineno}") from exc
    if not edges:
        raise ParseError("no edges", "line 1")
    n = max(max(e) for e in edges) + 1
    try:
        return Graph(n, tuple(edges))
    except ValueError as exc:
        raise ParseError(str(exc), "edges") from exc


def read_graph(path):
    with open(path) as fh:
        text = fh.read()
    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
        return graph_from_dict(data)
    return parse_edge_list(text)


def write_graph(graph, path):
    with open(path, "w") as fh:
        json.dump(graph.to_dict(), fh)
        fh.write("\n")


# -- named and random graphs -------------------------------------------------------


def complete_graph(n):
    return Graph(n, tuple(itertools.combinations(range(n), 2)), f"K{n}")


def cycle_graph(n):
    return Graph(n, tuple((i, (i + 1) % n) for i in range(n)), f"C{n}")


def path_graph(n):
    return Graph(n, tuple((i, i + 1) for i in range(n - 1)), f"P{n}")


def prism_graph():
    """Triangular prism: two triangles joined by a perfect matching (3-regular, 6 vertices)."""
    edges = [(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5), (0, 3), (1, 4), (2, 5)]
    return Graph(6, tuple(edges), "prism")


NAMED = {"k4": lambda: complete_graph(4), "prism": prism_graph}


def named_graph(name):
    """``k4``, ``prism``, ``kN``, ``cycleN`` or ``pathN``."""
    key = name.lower()
    if key in NAMED:
        return NAMED[key]()
    for prefix, make in (("cycle", cycle_graph), ("path", path_graph), ("k", complete_graph)):
        if key.startswith(prefix) and key[len(prefix):].isdigit():
            return make(int(key[len(prefix):]))
    raise ValueError(f"unknown graph name {name!r}")


def random_regular(n, d, seed=0, max_tries=1000):
    """Simple d-regular graph from the pairing model, rejecting loops and multi-edges."""
    if n * d % 2 or d >= n or d < 1:
        raise Infeasible(f"no simple {d}-regular graph on {n} vertices")
    rng = np.random.default_rng(seed)
    points = np.repeat(np.arange(n), d)
    for _ in range(max_tries):
        perm = rng.permutation(points)
        pairs = perm.reshape(-1, 2)
        if np.any(pairs[:, 0] == pairs[:, 1]):
            continue
        edges = {_edge(int(u), int(v)) for u, v in pairs}
        if len(edges) == len(pairs):
            return Graph(n, tuple(sorted(edges)), f"rr{n}d{d}s{seed}")
    raise Infeasible(f"pairing model failed {max_tries} times for n={n}, d={d}")


# -- spectrum ------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralData:
    lam: float
    spectrum: tuple
    bipartite: bool


def spectral(graph):
    """Second-largest absolute eigenvalue of A/d (regular graphs)."""
    if not graph.is_connected():
        raise Disconnected(f"graph {graph.name or ''} is disconnected")
    d = graph.degree
    mu = np.linalg.eigvalsh(graph.adjacency_matrix() / d)[::-1]
    lam = float(max(abs(mu[1]), abs(mu[-1]))) if graph.n > 1 else 0.0
    bipartite = bool(abs(mu[-1] + 1.0) < 1e-9)
    return SpectralData(min(lam, 1.0), tuple(float(m) for m in mu), bipartite)


# -- walks -------------------------------------------------------------------------


@dataclass(frozen=True)
class Walk:
    vertices: tuple

    @property
    def t(self):
        return len(self.vertices) - 1

    @property
    def edges(self):
        return tuple(_edge(u, v) for u, v in zip(self.vertices, self.vertices[1:]))

    @property
    def distinct_vertices(self):
        return tuple(sorted(set(self.vertices)))


def walk_count(graph, t):
    return graph.n * graph.degree**t


def sample_walk(graph, t, rng):
    if t < 1:
        raise ValueError("t must be at least 1")
    adj = graph.adjacency
    v = int(rng.integers(graph.n))
    verts = [v]
    for _ in range(t):
        v = adj[v][int(rng.integers(len(adj[v])))]
        verts.append(v)
    return Walk(tuple(verts))


def enumerate_walks(graph, t, cap=ENUM_CAP):
    """All n*d^t directed t-walks, in lexicographic order of vertex sequences."""
    if t < 1:
        raise ValueError("t must be at least 1")
    total = walk_count(graph, t)
    if total > cap:
        raise EnumerationTooLarge(f"{total} walks exceed the enumeration cap {cap}")
    adj = graph.adjacency

    def extend(prefix):
        if len(prefix) == t + 1:
            yield Walk(tuple(prefix))
            return
        for w in adj[prefix[-1]]:
            prefix.append(w)
            yield from extend(prefix)
            prefix.pop()

    for v in range(graph.n):
        yield from extend([v])


def _good_transition(graph, bad_edges):
    """Transition matrix of one uniform step restricted to good edges (rows: from, cols: to)."""
    d = graph.degree
    bad = {_edge(*e) for e in bad_edges}
    m = np.zeros((graph.n, graph.n))
    for u, v in graph.edges:
        if (u, v) not in bad:
            m[u, v] += 1.0 / d
            m[v, u] += 1.0 / d
    return m


def walk_avoid_probability(graph, bad_edges, t):
    """Probability that a uniform t-walk uses no edge of ``bad_edges``."""
    if t < 1:
        raise ValueError("t must be at least 1")
    step = _good_transition(graph, bad_edges)
    u = np.full(graph.n, 1.0 / graph.n)
    for _ in range(t):
        u = u @ step
    return float(u.sum())


@dataclass
class WalkMoments:
    ez: float
    ez2: float
    pairwise: np.ndarray  # pairwise[i, j] = E[Z_i Z_j], positions 0..t-1
    prob_positive: float
    exact_enumeration: bool


def _bad_indicator(graph, bad_edges):
    bad = {_edge(*e) for e in bad_edges}
    d = graph.degree
    b = np.zeros((graph.n, graph.n))  # one step that traverses a bad edge
    for u, v in graph.edges:
        if (u, v) in bad:
            b[u, v] += 1.0 / d
            b[v, u] += 1.0 / d
    return b


def walk_moments(graph, bad_edges, t, cap=ENUM_CAP):
    """E[Z], E[Z^2], E[Z_i Z_j] and Pr[Z > 0] for Z = number of bad steps of a uniform t-walk.

    Enumerates all walks when there are at most ``cap`` of them; otherwise uses the
    Markov chain: Pr[step i bad, step j bad] = u0 P^i B P^(j-i-1) B 1.
    """
    bad = {_edge(*e) for e in bad_edges}
    total = walk_count(graph, t)
    if total <= cap:
        pair = np.zeros((t, t))
        positive = 0
        for w in enumerate_walks(graph, t, cap):
            z = np.array([e in bad for e in w.edges], dtype=float)
            pair += np.outer(z, z)
            positive += z.any()
        pair /= total
        ez = float(np.trace(pair))
        return WalkMoments(ez, float(pair.sum()), pair, positive / total, True)
    d = graph.degree
    p = graph.adjacency_matrix() / d
    b = _bad_indicator(graph, bad)
    ones = np.ones(graph.n)
    u = np.full(graph.n, 1.0 / graph.n)
    left = [u]
    for _ in range(t):
        left.append(left[-1] @ p)
    pair = np.zeros((t, t))
    for i in range(t):
        a = left[i] @ b
        pair[i, i] = float(a @ ones)
        for j in range(i + 1, t):
            pair[i, j] = pair[j, i] = float(a @ np.linalg.matrix_power(p, j - i - 1) @ b @ ones)
    ez = float(np.trace(pair))
    return WalkMoments(ez, float(pair.sum()), pair, 1.0 - walk_avoid_probability(graph, bad, t), False)
