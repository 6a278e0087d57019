"""Pyramids, XY decompositions of pyramid spaces and the non-commutativity parameter theta.

A decomposition is always built relative to a ``layer_order``: the first layer in
the order holds the pyramid apexes and projections are applied in that order.
The default order is ``(0, 1, ..., g - 1)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .errors import BadSector, DimensionTooLarge, LayerOutOfRange, NoLayers
from .qsat import count_sweep, project_count, project_le  # noqa: F401  (re-exported)

THETA_CAP = 10**7
MAX_SAMPLES = 20_000


@dataclass(frozen=True)
class Pyramid:
    apex: int
    members: tuple  # constraint ids grouped per layer, following layer_order
    support: tuple  # sorted qudit indices
    local_dim: int
    layer_order: tuple

    @property
    def constraint_ids(self):
        return tuple(c for group in self.members for c in group)

    def members_in(self, layer):
        """Pyramid members belonging to system layer ``layer`` (empty if the layer is not used)."""
        if layer not in self.layer_order:
            return ()
        return self.members[self.layer_order.index(layer)]


def _layer_order(sys, layer_order):
    layers = sys.layers
    if layers is None:
        raise NoLayers("layers have not been computed")
    if layer_order is None:
        return tuple(range(len(layers)))
    layer_order = tuple(int(i) for i in layer_order)
    for i in layer_order:
        if not 0 <= i < len(layers):
            raise LayerOutOfRange(f"layer {i} not in 0..{len(layers) - 1}")
    return layer_order


def build_pyramid(sys, apex, layer_order=None):
    """Close ``apex`` downward: each later layer contributes every constraint meeting the support so far."""
    order = _layer_order(sys, layer_order)
    if apex not in sys.layers[order[0]]:
        raise ValueError(f"constraint {apex} is not in the apex layer {order[0]}")
    covered = set(sys.constraints[apex].support)
    members = [(apex,)]
    for li in order[1:]:
        picked = tuple(c for c in sys.layers[li] if not covered.isdisjoint(sys.constraints[c].support))
        for c in picked:
            covered.update(sys.constraints[c].support)
        members.append(picked)
    support = tuple(sorted(covered))
    return Pyramid(apex, tuple(members), support, linalg.local_dim(support, sys.dims), order)


def build_pyramids(sys, apex_priority=None, layer_order=None):
    """Greedy maximal family of support-disjoint pyramids, trying apexes in ``apex_priority`` order."""
    order = _layer_order(sys, layer_order)
    if apex_priority is None:
        apex_priority = sys.layers[order[0]]
    kept = []
    used = set()
    for apex in apex_priority:
        pyr = build_pyramid(sys, apex, order)
        if used.isdisjoint(pyr.support):
            kept.append(pyr)
            used.update(pyr.support)
    return kept


def local_projectors(pyr, sys):
    """Pyramid constraints as matrices on the pyramid space, ordered as ``pyr.constraint_ids``."""
    pos = {q: i for i, q in enumerate(pyr.support)}
    ldims = tuple(sys.dims[q] for q in pyr.support)
    ops = []
    for cid in pyr.constraint_ids:
        c = sys.constraints[cid]
        ops.append(linalg.embed(c.projector, [pos[q] for q in c.support], ldims))
    return ops


def xy_decompose(pyr, sys, cap=linalg.DENSE_CAP, tol=linalg.RANK_TOL):
    """X spaces (one per 0/1 assignment with common eigenvectors) and the residual Y space.

    X_b is the kernel of ``sum_Q (Q - b_Q)^2``; the search extends assignments one
    constraint at a time and drops prefixes whose partial kernel is already empty.
    """
    if pyr.local_dim > cap:
        raise DimensionTooLarge(f"pyramid space of dimension {pyr.local_dim} above cap {cap}")
    ops = local_projectors(pyr, sys)
    dim = pyr.local_dim
    eye = np.eye(dim, dtype=complex)
    x_spaces = {}

    def extend(depth, acc, bits):
        if depth == len(ops):
            basis = linalg.kernel(acc, tol) if depth else eye
            if basis.shape[1]:
                x_spaces[bits] = basis
            return
        for b in (0, 1):
            term = ops[depth] if b == 0 else eye - ops[depth]
            nxt = acc + term
            if linalg.kernel(nxt, tol).shape[1]:
                extend(depth + 1, nxt, bits + (b,))

    extend(0, np.zeros((dim, dim), dtype=complex), ())
    if x_spaces:
        x_total = sum(linalg.projector(b) for b in x_spaces.values())
        y_space = linalg.kernel(x_total, tol)
    else:
        y_space = eye
    return x_spaces, y_space


def _structural_commute(pyr, sys):
    ids = pyr.constraint_ids
    sup = [set(sys.constraints[c].support) for c in ids]
    return [[sup[i].isdisjoint(sup[j]) for j in range(len(ids))] for i in range(len(ids))]


def theta_product_count(n_constraints):
    return math.factorial(n_constraints) * 2**n_constraints


class _BudgetExceeded(Exception):
    pass


def _sampled_theta(letters, draws, rng):
    n = len(letters)
    best = 0.0
    for _ in range(draws):
        perm = rng.permutation(n)
        signs = rng.integers(0, 2, size=n)
        prod = letters[perm[0]][signs[0]]
        for i, s in zip(perm[1:], signs[1:]):
            prod = prod @ letters[i][s]
        best = max(best, linalg.operator_norm(prod))
    return best


def _exact_theta(letters, commute, order, budget, best):
    """Branch and bound over all signed orderings.

    ``||P_Y A B P_Y|| <= ||P_Y A||`` bounds every completion of a prefix, so prefixes whose
    norm cannot beat the incumbent are cut.  Adjacent commuting letters are only
    taken in increasing index order, since both orders give the same product.
    """
    n = len(letters)
    nodes = 0

    def dfs(prod, used, last):
        nonlocal best, nodes
        for i in order:
            if used >> i & 1:
                continue
            if last is not None and commute[last][i] and i < last:
                continue
            for s in (0, 1):
                nodes += 1
                if budget is not None and nodes > budget:
                    raise _BudgetExceeded
                nxt = letters[i][s] if prod is None else prod @ letters[i][s]
                nrm = linalg.operator_norm(nxt)
                if nrm <= best:
                    continue
                if used | (1 << i) == (1 << n) - 1:
                    best = nrm
                else:
                    dfs(nxt, used | (1 << i), i)

    dfs(None, 0, None)
    return best


def compute_theta(pyr, sys, y_space, mode="exact", cap=THETA_CAP, seed=0, order_seed=None):
    """Max of ||P_Y Q_0 ... Q_N P_Y|| over constraint orderings and complement choices.

    Returns ``(theta, exact)``.  In exact mode the search is complete and ``exact`` is
    True, unless the nominal number of products exceeds ``cap`` and the pruned search
    also visits more than ``cap`` nodes; then it falls back to sampling.  Sampled
    values never exceed the exact one and are flagged ``exact=False``.
    """
    if y_space.shape[1] == 0:
        return 0.0, True
    ops = local_projectors(pyr, sys)
    ydim = y_space.shape[1]
    eye = np.eye(ydim, dtype=complex)
    # every pyramid constraint commutes with P_Y, so products can be taken inside Y
    letters = []
    for q in ops:
        r = y_space.conj().T @ q @ y_space
        letters.append((r, eye - r))
    rng = np.random.default_rng(seed)
    n = len(letters)
    if mode == "sampled":
        return _sampled_theta(letters, min(cap, MAX_SAMPLES), rng), False
    order = list(range(n))
    if order_seed is not None:
        np.random.default_rng(order_seed).shuffle(order)
    start = _sampled_theta(letters, min(64, cap), rng)
    budget = None if theta_product_count(n) <= cap else cap
    try:
        # the incumbent is lowered slightly so the maximiser itself is always revisited
        return _exact_theta(letters, _structural_commute(pyr, sys), order, budget, start * (1 - 1e-9)), True
    except _BudgetExceeded:
        return max(start, _sampled_theta(letters, min(cap, MAX_SAMPLES), rng)), False


@dataclass(eq=False)
class PyramidXY:
    pyramid: Pyramid
    x_spaces: dict
    y_space: np.ndarray
    theta: float
    theta_exact: bool

    @property
    def support(self):
        return self.pyramid.support

    @cached_property
    def p_y(self):
        return linalg.projector(self.y_space)

    def x_projector(self, bits):
        if bits not in self.x_spaces:
            raise BadSector(f"no X space for assignment {bits} in pyramid with apex {self.pyramid.apex}")
        return linalg.projector(self.x_spaces[bits])

    def summary(self):
        return {
            "apex": self.pyramid.apex,
            "support": list(self.pyramid.support),
            "x_dims": {"".join(map(str, b)): int(v.shape[1]) for b, v in self.x_spaces.items()},
            "y_dim": int(self.y_space.shape[1]),
            "theta": self.theta,
            "theta_exact": self.theta_exact,
        }


def analyse_pyramid(pyr, sys, theta_mode="exact", cap=THETA_CAP, seed=0, dense_cap=linalg.DENSE_CAP):
    x_spaces, y_space = xy_decompose(pyr, sys, dense_cap)
    theta, exact = compute_theta(pyr, sys, y_space, theta_mode, cap, seed)
    return PyramidXY(pyr, x_spaces, y_space, theta, exact)


@dataclass(eq=False)
class XYDecomposition:
    system: object
    layer_order: tuple
    pyramids: list = field(default_factory=list)

    @property
    def theta(self):
        return max((p.theta for p in self.pyramids), default=0.0)

    @property
    def theta_exact(self):
        return all(p.theta_exact for p in self.pyramids)

    @property
    def apexes(self):
        return tuple(p.pyramid.apex for p in self.pyramids)

    def inside(self, layer):
        """Constraint ids of system layer ``layer`` lying in some pyramid."""
        return tuple(sorted(c for p in self.pyramids for c in p.pyramid.members_in(layer)))

    def outside(self, layer):
        ins = set(self.inside(layer))
        return tuple(c for c in self.system.layers[layer] if c not in ins)

    def _lift(self, pxy, local):
        return lambda v: linalg.apply_local(local, pxy.support, self.system.dims, v)

    def y_ops(self):
        return [self._lift(p, p.p_y) for p in self.pyramids]

    def sectors(self):
        """Every sector: one label per pyramid, either an X assignment tuple or ``"Y"``."""
        choices = []
        for p in self.pyramids:
            labels = list(p.x_spaces)
            if p.y_space.shape[1]:
                labels.append("Y")
            choices.append(labels)
        return itertools.product(*choices)

    def sector_projector(self, nu):
        nu = tuple(nu)
        if len(nu) != len(self.pyramids):
            raise BadSector(f"sector has {len(nu)} labels for {len(self.pyramids)} pyramids")
        ops = []
        for p, label in zip(self.pyramids, nu):
            if label == "Y":
                ops.append(self._lift(p, p.p_y))
            else:
                ops.append(self._lift(p, p.x_projector(tuple(label))))

        def apply(v):
            for op in ops:
                v = op(v)
            return v

        return apply

    def coarse_components(self, psi):
        """``P_s psi`` for s = 0..#pyramids, where P_s collects sectors with s Y labels."""
        return count_sweep(self.y_ops(), psi)

    def coarse_weights(self, psi):
        return np.array([float(np.vdot(v, v).real) for v in self.coarse_components(psi)])

    def summary(self):
        return {
            "layer_order": list(self.layer_order),
            "theta": self.theta,
            "theta_exact": self.theta_exact,
            "pyramids": [p.summary() for p in self.pyramids],
        }


class Decomposer:
    """Builds XY decompositions of one system, caching the per-pyramid analysis."""

    def __init__(self, sys, theta_mode="exact", cap=THETA_CAP, seed=0, dense_cap=linalg.DENSE_CAP):
        if sys.layers is None:
            raise NoLayers("layers have not been computed")
        self.system = sys
        self.theta_mode = theta_mode
        self.cap = cap
        self.seed = seed
        self.dense_cap = dense_cap
        self._cache = {}

    def analyse(self, pyr):
        key = (pyr.apex, pyr.layer_order)
        if key not in self._cache:
            self._cache[key] = analyse_pyramid(pyr, self.system, self.theta_mode, self.cap, self.seed, self.dense_cap)
        return self._cache[key]

    def decompose(self, apex_priority=None, layer_order=None):
        order = _layer_order(self.system, layer_order)
        pyrs = build_pyramids(self.system, apex_priority, order)
        return XYDecomposition(self.system, order, [self.analyse(p) for p in pyrs])


def decompose(sys, apex_priority=None, layer_order=None, theta_mode="exact", cap=THETA_CAP, seed=0):
    return Decomposer(sys, theta_mode, cap, seed).decompose(apex_priority, layer_order)


def sector_projector(dec, nu):
    return dec.sector_projector(nu)


def coarse_weights(dec, psi):
    return dec.coarse_weights(psi)


def inside_outside_split(dec, layer, ell):
    """Pairs ``(inside exactly j, outside at most ell - j)`` whose summed products give Pi^{<=ell}.

    Terms with ``j`` above the number of inside constraints vanish and are omitted.
    """
    sys = dec.system
    if not 0 <= layer < len(sys.layers):
        raise LayerOutOfRange(f"layer {layer} not in 0..{len(sys.layers) - 1}")
    ins, out = dec.inside(layer), dec.outside(layer)
    pairs = []
    for j in range(min(ell, len(ins)) + 1):
        pyr_op = lambda v, j=j: project_count(sys, ins, v, j, exact=True)  # noqa: E731
        rest_op = lambda v, j=j: project_count(sys, out, v, ell - j)  # noqa: E731
        pairs.append((pyr_op, rest_op))
    return pairs
