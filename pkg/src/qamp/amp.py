"""Gap amplification by t-walks, for classical constraint graphs and for k-QSAT systems on graphs."""

from __future__ import annotations

import itertools
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from . import linalg, qsat, walks
from .detect import CheckReport, clamp_energy, k_branch_constants, system_params
from .errors import DimensionTooLarge, InvalidLambda

AMP_SLACK = 1e-10


def c_of_lambda(lam):
    """Amplification constant 1 / (2 + 2/(1 - lambda))."""
    if not 0.0 <= lam < 1.0:
        raise InvalidLambda(f"lambda = {lam} outside [0, 1)")
    return 1.0 / (2.0 + 2.0 / (1.0 - lam))


# -- classical ---------------------------------------------------------------------


@dataclass(eq=False)
class ClassicalCSP:
    graph: walks.Graph
    alphabet: int
    tables: tuple  # per edge, allowed[a_u, a_v] for edge (u, v) with u < v

    def __post_init__(self):
        tables = tuple(np.asarray(t, dtype=bool) for t in self.tables)
        if len(tables) != len(self.graph.edges):
            raise ValueError(f"{len(tables)} tables for {len(self.graph.edges)} edges")
        for i, t in enumerate(tables):
            if t.shape != (self.alphabet, self.alphabet):
                raise ValueError(f"table {i} has shape {t.shape}, expected {(self.alphabet,) * 2}")
        self.tables = tables


def inequality_csp(graph, alphabet=2):
    """Colouring constraints: the endpoints of every edge must differ."""
    table = ~np.eye(alphabet, dtype=bool)
    return ClassicalCSP(graph, alphabet, tuple(table for _ in graph.edges))


def random_csp(graph, alphabet, density, rng):
    """Each pair of values is allowed independently with probability ``density``."""
    return ClassicalCSP(graph, alphabet, tuple(rng.random((alphabet, alphabet)) < density for _ in graph.edges))


def _check_assignment(csp, sigma):
    sigma = np.asarray(sigma, dtype=int)
    if sigma.shape != (csp.graph.n,):
        raise ValueError(f"assignment has shape {sigma.shape}, expected ({csp.graph.n},)")
    if np.any(sigma < 0) or np.any(sigma >= csp.alphabet):
        raise ValueError("assignment symbol out of range")
    return sigma


def unsatisfied_edges(csp, sigma):
    sigma = _check_assignment(csp, sigma)
    return [e for e, t in zip(csp.graph.edges, csp.tables) if not t[sigma[e[0]], sigma[e[1]]]]


def unsat(csp, sigma):
    return len(unsatisfied_edges(csp, sigma)) / len(csp.graph.edges)


def unsat_t(csp, sigma, t):
    """Fraction of t-walks that traverse an unsatisfied edge."""
    return 1.0 - walks.walk_avoid_probability(csp.graph, unsatisfied_edges(csp, sigma), t)


def amp_bound(unsat_value, t, c):
    """min(t c u, c): the guaranteed amplified value."""
    return min(t * c * unsat_value, c)


def _amp_lambda(graph):
    spec = walks.spectral(graph)
    if spec.bipartite:
        raise InvalidLambda("bipartite graph: lambda = 1")
    return spec.lam


def verify_classical_amp(csp, sigmas, ts, report=None):
    """Check UNSAT_sigma(G^t) >= min(t c(lambda) UNSAT_sigma(G), c(lambda)) exactly for each (sigma, t)."""
    lam = _amp_lambda(csp.graph)
    c = c_of_lambda(lam)
    report = report or CheckReport("classical-amp", {"graph": csp.graph.name, "lambda": lam, "c": c})
    for si, sigma in enumerate(sigmas):
        bad = unsatisfied_edges(csp, sigma)
        u = len(bad) / len(csp.graph.edges)
        for t in ts:
            ut = 1.0 - walks.walk_avoid_probability(csp.graph, bad, t)
            rhs = amp_bound(u, t, c)
            report.trials += 1
            ok = report.record(rhs, ut, f"sigma {si}, t={t}", slack=AMP_SLACK)
            report.rows.append(
                {"sigma": si, "t": t, "unsat": u, "unsat_t": ut, "bound": rhs, "ratio": ut / u if u else None, "pass": ok}
            )
    return report


def verify_moments(graph, bad_edges, t, report=None, cap=walks.ENUM_CAP):
    """Pairwise moment bound E[Z_i Z_j] <= rho (rho + lambda^(i-j-1)) and the second-moment inequality."""
    lam = walks.spectral(graph).lam
    rho = len(set(walks._edge(*e) for e in bad_edges)) / len(graph.edges)
    m = walks.walk_moments(graph, bad_edges, t, cap)
    report = report or CheckReport("moments", {"graph": graph.name, "lambda": lam})
    report.trials += 1
    for i in range(t):
        report.record(abs(m.pairwise[i, i] - rho), 0.0, f"E[Z_{i}] = rho", slack=AMP_SLACK)
        for j in range(i):
            report.record(m.pairwise[i, j], rho * (rho + lam ** (i - j - 1)), f"E[Z_{i} Z_{j}]", slack=AMP_SLACK)
    report.record(abs(m.ez - t * rho), 0.0, "E[Z] = t rho", slack=AMP_SLACK)
    if m.ez2 > 0:
        report.record(m.ez**2 / m.ez2, m.prob_positive, "second moment", slack=AMP_SLACK)
    report.rows.append({"t": t, "rho": rho, "EZ": m.ez, "EZ2": m.ez2, "P(Z>0)": m.prob_positive, "exact": m.exact_enumeration})
    return report


# -- quantum -------------------------------------------------------------------------


def diagonal_neq_projector(q):
    """Projector onto |aa>, a = 0..q-1: violated when both endpoints agree."""
    p = np.zeros((q * q, q * q), dtype=complex)
    for a in range(q):
        p[a + q * a, a + q * a] = 1.0
    return p


def entangled_state(angle):
    """cos(angle)|01> + sin(angle)|10> on two qubits."""
    v = np.zeros(4, dtype=complex)
    v[2] = np.cos(angle)  # first qudit 0, second qudit 1
    v[1] = np.sin(angle)  # first qudit 1, second qudit 0
    return v


def rank1_entangled_projector(angle):
    v = entangled_state(angle)
    return np.outer(v, v.conj())


def rank3_entangled_projector(angle):
    """Complement of the entangled state: only that state is accepted."""
    return np.eye(4, dtype=complex) - rank1_entangled_projector(angle)


def edge_system(graph, projector, q, name=""):
    """One copy of ``projector`` on every edge, layers from greedy edge colouring."""
    cons = [qsat.Constraint(e, projector) for e in graph.edges]
    return qsat.QSatSystem((q,) * graph.n, cons, name=name or graph.name).with_layers()


def csp_from_diagonal(qws):
    """Classical CSP equivalent to a system of diagonal edge projectors."""
    q = qws.q
    tables = []
    for e in qws.graph.edges:
        p = qws.edge_projector(e)
        if np.linalg.norm(p - np.diag(np.diag(p))) > 1e-12:
            raise ValueError(f"edge {e} projector is not diagonal")
        d = np.diag(p).real
        tables.append(np.array([[d[a + q * b] < 0.5 for b in range(q)] for a in range(q)]))
    return ClassicalCSP(qws.graph, q, tuple(tables))


@dataclass(eq=False)
class QuantumWalkSystem:
    graph: walks.Graph
    base: qsat.QSatSystem
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        supports = [tuple(sorted(c.support)) for c in self.base.constraints]
        if sorted(supports) != sorted(self.graph.edges) or len(set(supports)) != len(supports):
            raise ValueError("base constraints must sit one per graph edge")
        if len(set(self.base.dims)) != 1:
            raise ValueError("all qudits must share one dimension q")
        self.edge_id = {s: i for i, s in enumerate(supports)}
        if self.base.layers is None:
            self.base = self.base.with_layers()

    @property
    def q(self):
        return self.base.dims[0]

    @property
    def n_edges(self):
        return len(self.graph.edges)

    def edge_projector(self, edge):
        """Projector of ``edge`` with the smaller vertex as least significant factor."""
        c = self.base.constraints[self.edge_id[walks._edge(*edge)]]
        if tuple(c.support) == tuple(sorted(c.support)):
            return c.projector
        swap = np.arange(self.q * self.q).reshape(self.q, self.q).T.ravel()
        return c.projector[np.ix_(swap, swap)]

    def layer_edges(self, layer):
        return {tuple(sorted(self.base.constraints[c].support)) for c in self.base.layers[layer]}

    def qunsat(self, psi):
        return qsat.energy(self.base, psi) / self.n_edges

    def qunsat_ground(self, cap=linalg.DENSE_CAP):
        return clamp_energy(qsat.ground_energy(self.base, cap=cap)) / self.n_edges


def build_walk_projector(qws, walk, active=None, cap=linalg.DENSE_CAP):
    """Projection off the common accepting space of the walk's edges (restricted to ``active`` edges).

    Acts on the vertices of the counted edges; returns a Constraint (the zero projector
    on an empty support when no edge counts).
    """
    edges = sorted(set(walk.edges) if active is None else set(walk.edges) & set(active))
    if not edges:
        return qsat.Constraint((), np.zeros((1, 1), dtype=complex))
    support = tuple(sorted({v for e in edges for v in e}))
    key = (support, tuple(edges))
    if key in qws._cache:
        return qws._cache[key]
    ldims = (qws.q,) * len(support)
    ldim = qws.q ** len(support)
    if ldim > cap:
        raise DimensionTooLarge(f"walk support dimension {ldim} above dense cap {cap}")
    pos = {v: i for i, v in enumerate(support)}
    total = np.zeros((ldim, ldim), dtype=complex)
    for e in edges:
        total += linalg.embed(qws.edge_projector(e), [pos[e[0]], pos[e[1]]], ldims)
    acc = linalg.kernel(total)
    con = qsat.Constraint(support, np.eye(ldim, dtype=complex) - linalg.projector(acc))
    qws._cache[key] = con
    return con


class WalkHamiltonian:
    """H_t = (sum over directed t-walks of Q_walk) / (number of walks), grouped by distinct projector."""

    def __init__(self, qws, t, active=None, cap_enum=walks.ENUM_CAP, cap_dense=linalg.DENSE_CAP):
        self.qws = qws
        self.t = t
        counts = Counter()
        by_key = {}
        total = 0
        for w in walks.enumerate_walks(qws.graph, t, cap_enum):
            total += 1
            con = build_walk_projector(qws, w, active, cap_dense)
            if con.support:
                key = (con.support, id(con))
                counts[key] += 1
                by_key[key] = con
        self.n_walks = total
        self.terms = [(by_key[key], counts[key]) for key in sorted(counts)]

    @property
    def dim(self):
        return self.qws.base.dim

    def matvec(self, v):
        out = np.zeros_like(v, dtype=complex)
        dims = self.qws.base.dims
        for con, mult in self.terms:
            out += mult * linalg.apply_local(con.projector, con.support, dims, v)
        return out / self.n_walks

    def expectation(self, psi):
        return float(np.vdot(psi, self.matvec(psi)).real)

    def dense(self, cap=linalg.DENSE_CAP):
        if self.dim > cap:
            raise DimensionTooLarge(f"dimension {self.dim} above dense cap {cap}")
        return self.matvec(np.eye(self.dim, dtype=complex))

    def ground(self, method="auto", tol=1e-10, seed=0, cap=linalg.DENSE_CAP):
        """(lowest eigenvalue, eigenvector)."""
        if method == "auto":
            method = "dense" if self.dim <= cap else "lanczos"
        if method == "dense":
            w, v = linalg.hermitian_eig(self.dense(cap), cap=cap)
            return float(w[0]), v[:, 0]
        return linalg.lowest_eigenpair(self.matvec, self.dim, tol=tol, seed=seed)


def qunsat_ground(qws, t, method="auto", cap_enum=walks.ENUM_CAP, cap_dense=linalg.DENSE_CAP):
    """QUNSAT(G^t): lowest eigenvalue of the averaged walk projectors."""
    return WalkHamiltonian(qws, t, None, cap_enum, cap_dense).ground(method, cap=cap_dense)[0]


def sector_bound(j, n_edges, t, c):
    """Guaranteed walk energy of a state with exactly j violated edges in one layer."""
    return min(t * c * j / n_edges, c)


def verify_quantum_amp(qws, ts, params=None, check_sectors=None, cap_dense=linalg.DENSE_CAP, tol=1e-7, cap_enum=walks.ENUM_CAP):
    """Checks of the quantum amplification argument on one small edge system.

    * Lanczos and dense ground energies of H_t agree;
    * QUNSAT(G^t) is non-decreasing in t, and QUNSAT(G^1) = QUNSAT(G);
    * for the minimising state and every layer i: QUNSAT(G^t) >= QUNSAT(G_i^t) >=
      sum_j alpha_j^2 min(t c j/|E|, c), i.e. the amplification ratio bound written with
      the layer's violation spectrum alpha_j^2;
    * for diagonal systems, every basis state reproduces the classical walk value
      through G_i^t and the per-sector bound;
    * the overall amplification bound with K = K_eff.
    """
    graph = qws.graph
    lam = _amp_lambda(graph)
    c = c_of_lambda(lam)
    base = qws.base
    if params is None:
        params = system_params(base, 0, dense_cap=cap_dense).params
    k1, k2, k3, k_eff = k_branch_constants(params, lam)
    n_e = qws.n_edges
    q1 = qws.qunsat_ground(cap_dense)
    info = {
        "graph": graph.name,
        "q": qws.q,
        "lambda": lam,
        "c": c,
        "epsilon0": params.epsilon0,
        "theta": params.theta,
        "theta_exact": params.theta_exact,
        "g": params.g,
        "f": params.f,
        "r": params.r,
        "K1": k1,
        "K2": k2,
        "K3": k3,
        "K_eff": k_eff,
        "layering": "greedy edge colouring",
    }
    report = CheckReport("quantum-amp", info)
    if check_sectors is None:
        check_sectors = all(np.allclose(c_.projector, np.diag(np.diag(c_.projector))) for c_ in base.constraints)
    prev = None
    for t in sorted(ts):
        ham = WalkHamiltonian(qws, t, cap_enum=cap_enum, cap_dense=cap_dense)
        e_dense, psi = ham.ground("dense", cap=cap_dense)
        e_lanczos, _ = ham.ground("lanczos", tol=1e-10)
        report.trials += 1
        report.record(abs(e_dense - e_lanczos), 0.0, f"t={t} lanczos vs dense", slack=tol)
        if prev is not None:
            report.record(prev, e_dense, f"t={t} monotone", slack=1e-8)
        if t == 1:
            report.record(abs(e_dense - q1), 0.0, "QUNSAT(G^1) = QUNSAT(G)", slack=1e-8)
        prev = e_dense
        full = amp_bound(q1, t, 1.0) * c * k_eff
        ok_full = report.record(full, e_dense, f"t={t} amplification bound with K_eff")
        ok_main = True
        for i in range(base.g):
            active = qws.layer_edges(i)
            ham_i = WalkHamiltonian(qws, t, active, cap_enum, cap_dense)
            e_i = ham_i.expectation(psi)
            alpha2 = qsat.violation_spectrum(base, i, psi).weights
            rhs = sum(a * sector_bound(j, n_e, t, c) for j, a in enumerate(alpha2))
            ok_main &= report.record(e_i, e_dense, f"t={t} layer {i}: G^t above G_i^t")
            ok_main &= report.record(rhs, e_i, f"t={t} layer {i}: layer spectrum bound")
            if check_sectors:
                ok_main &= _check_sectors(qws, ham_i, i, t, c, report)
        report.rows.append(
            {
                "t": t,
                "qunsat_G": q1,
                "qunsat_Gt": e_dense,
                "ratio": e_dense / q1 if q1 > 0 else None,
                "bound": full,
                "pass": bool(ok_full and ok_main),
            }
        )
    return report


def _check_sectors(qws, ham_i, layer, t, c, report):
    """Basis states of a diagonal system: quantum walk energy equals the classical walk value."""
    base = qws.base
    csp = csp_from_diagonal(qws)
    layer_ids = set(base.layers[layer])
    diag = np.real(np.diag(ham_i.dense())) if base.dim <= linalg.DENSE_CAP else None
    ok = True
    for idx, sigma in enumerate(itertools.product(range(qws.q), repeat=base.n)):
        sigma = np.array(sigma[::-1])  # qudit 0 is the least significant digit
        bad = [e for e in unsatisfied_edges(csp, sigma) if qws.edge_id[e] in layer_ids]
        classical = 1.0 - walks.walk_avoid_probability(qws.graph, bad, t)
        quantum = diag[idx]
        ok &= report.record(abs(quantum - classical), 0.0, f"t={t} layer {layer} basis {idx}: quantum = classical", slack=AMP_SLACK)
        ok &= report.record(sector_bound(len(bad), qws.n_edges, t, c), classical, f"t={t} layer {layer} basis {idx}: sector bound", slack=AMP_SLACK)
    return ok


def classical_ground_t(csp, t):
    """min over assignments of UNSAT_sigma(G^t), by brute force."""
    best = 1.0
    for sigma in itertools.product(range(csp.alphabet), repeat=csp.graph.n):
        best = min(best, unsat_t(csp, np.array(sigma), t))
    return best
