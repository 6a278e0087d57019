"""Instance generators and the pinned standard corpus used by ``verify-all`` and the acceptance tests.

Random streams are split by ``(seed, task_index)`` through ``numpy.random.SeedSequence``,
so an instance or trial never depends on how many others were drawn before it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import amp, linalg, qsat, walks

ANGLES = (math.pi / 6, math.pi / 4, math.pi / 3)
ENTANGLED_ANGLE = math.pi / 5


def rng_for(seed, task_index):
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(task_index)]))


def haar_states(dim, count, seed, task_index=0):
    rng = rng_for(seed, task_index)
    return [linalg.haar_state(dim, rng) for _ in range(count)]


def random_projector(dim, rank, rng):
    m = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    q, _ = np.linalg.qr(m)
    return q @ q.conj().T


def angle_system(angle):
    """One qubit with |0><0| and |a><a|, |a> = cos(a)|0> + sin(a)|1>, in two layers."""
    p0 = np.diag([1.0, 0.0]).astype(complex)
    v = np.array([math.cos(angle), math.sin(angle)], dtype=complex)
    cons = [qsat.Constraint((0,), p0), qsat.Constraint((0,), np.outer(v, v.conj()))]
    return qsat.QSatSystem((2,), cons, ((0,), (1,)), name=f"angle-{angle:.6f}")


def random_edge_system(graph, rank, rng, q=2, name=""):
    """Independent random rank-``rank`` projector on every edge; layers by greedy colouring."""
    cons = [qsat.Constraint(e, random_projector(q * q, rank, rng)) for e in graph.edges]
    return qsat.QSatSystem((q,) * graph.n, cons, name=name).with_layers()


def saturated_system(n, stack):
    """``stack`` full-rank projectors on each of ``n`` qubits, one per layer.

    Commuting (theta = 0) with ground energy n * stack, which puts the many-violation
    detectability bound in its valid regime.
    """
    eye = np.eye(2, dtype=complex)
    cons = [qsat.Constraint((i,), eye) for _ in range(stack) for i in range(n)]
    layers = tuple(tuple(range(s * n, (s + 1) * n)) for s in range(stack))
    return qsat.QSatSystem((2,) * n, cons, layers, name=f"saturated-n{n}-x{stack}")


def quantum_family(name, q=2, angle=ENTANGLED_ANGLE):
    if name == "diagonal-neq":
        return amp.diagonal_neq_projector(q)
    if q != 2:
        raise ValueError(f"family {name} is defined for qubits only")
    if name == "rank1-entangled":
        return amp.rank1_entangled_projector(angle)
    if name == "rank3-entangled":
        return amp.rank3_entangled_projector(angle)
    raise ValueError(f"unknown family {name!r}")


@dataclass
class Corpus:
    angle: list  # one-qubit, two-layer systems
    two_layer: list  # random two-layer systems on paths and even cycles
    three_layer: list  # random three-layer systems (odd cycles, K4)
    saturated: list  # (system, ells) with the many-violation regime valid
    classical: list  # (ClassicalCSP, number of assignments)
    quantum: list  # QuantumWalkSystem
    walk_ts: tuple = (1, 2, 3)
    classical_ts: tuple = tuple(range(1, 9))

    def qsat_systems(self):
        return self.angle + self.two_layer + self.three_layer + [s for s, _ in self.saturated]


def standard_corpus(seed=0):
    """The pinned corpus: fixed structure, random content drawn from ``seed``."""
    task = iter(range(10**6))
    angle = [angle_system(a) for a in ANGLES]
    two = []
    for n in (4, 6, 8):
        for graph in (walks.path_graph(n), walks.cycle_graph(n)):
            for rank in (1, 2):
                two.append(random_edge_system(graph, rank, rng_for(seed, next(task)), name=f"{graph.name}-rank{rank}"))
    three = []
    for graph in (walks.cycle_graph(3), walks.cycle_graph(5), walks.cycle_graph(7), walks.complete_graph(4)):
        for rank in (1, 2):
            three.append(random_edge_system(graph, rank, rng_for(seed, next(task)), name=f"{graph.name}-rank{rank}"))
    saturated = [(saturated_system(7, 2), (0, 1)), (saturated_system(12, 1), (0, 1, 2))]
    classical = [(amp.inequality_csp(walks.complete_graph(4), 2), 16)]
    for n in (20, 50, 200):
        g = walks.random_regular(n, 3, seed=int(rng_for(seed, next(task)).integers(2**31)))
        classical.append((amp.inequality_csp(g, 2), 50))
        classical.append((amp.random_csp(g, 3, 0.6, rng_for(seed, next(task))), 50))
    quantum = []
    for graph in (walks.complete_graph(4), walks.prism_graph()):
        for fam in ("diagonal-neq", "rank1-entangled", "rank3-entangled"):
            base = amp.edge_system(graph, quantum_family(fam), 2, name=f"{graph.name}-{fam}")
            quantum.append(amp.QuantumWalkSystem(graph, base))
    return Corpus(angle, two, three, saturated, classical, quantum)


def assignments(csp, count, seed, task_index=0):
    """``count`` assignments; all of them when the assignment space is no larger than ``count``."""
    n, a = csp.graph.n, csp.alphabet
    if a**n <= count:
        return [np.array([(i // a**v) % a for v in range(n)]) for i in range(a**n)]
    rng = rng_for(seed, task_index)
    return [rng.integers(0, a, size=n) for _ in range(count)]
