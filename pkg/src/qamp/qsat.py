"""k-QSAT instances: qudits, projection constraints, layers, energies and file I/O.

Layers are stored as tuples of constraint ids and are indexed from 0 in code;
layer 0 plays the role of the "top" layer (the first projection applied and the
layer holding pyramid apexes).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import linalg
from .errors import DimensionMismatch, LayerOutOfRange, NoLayers, ParseError

PROJ_TOL = 1e-8
DENSE_AUTO = 1024


@dataclass(frozen=True, eq=False)
class Constraint:
    support: tuple
    projector: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "support", tuple(int(s) for s in self.support))
        object.__setattr__(self, "projector", np.asarray(self.projector, dtype=complex))

    @property
    def rank(self):
        return int(round(np.trace(self.projector).real))


@dataclass(frozen=True, eq=False)
class QSatSystem:
    dims: tuple
    constraints: tuple
    layers: tuple | None = None
    name: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if self.layers is not None:
            object.__setattr__(self, "layers", tuple(tuple(int(c) for c in layer) for layer in self.layers))

    @property
    def n(self):
        return len(self.dims)

    @property
    def M(self):
        return len(self.constraints)

    @property
    def k(self):
        return max((len(c.support) for c in self.constraints), default=0)

    @property
    def g(self):
        return len(self.require_layers())

    @property
    def dim(self):
        return math.prod(self.dims)

    def require_layers(self):
        if self.layers is None:
            raise NoLayers("layers have not been computed; call with_layers() first")
        return self.layers

    def with_layers(self, layers=None):
        """Copy of the system carrying ``layers`` (greedy layering when omitted)."""
        if layers is None:
            layers = compute_layers(self)
        return QSatSystem(self.dims, self.constraints, layers, self.name)

    def layer_of(self, cid):
        for i, layer in enumerate(self.require_layers()):
            if cid in layer:
                return i
        raise LayerOutOfRange(f"constraint {cid} is in no layer")

    def apply(self, cid, v):
        c = self.constraints[cid]
        return linalg.apply_local(c.projector, c.support, self.dims, v)

    def hamiltonian_matvec(self, v, ids=None):
        ids = range(self.M) if ids is None else ids
        out = np.zeros_like(v, dtype=complex)
        for cid in ids:
            out += self.apply(cid, v)
        return out

    def dense_hamiltonian(self, ids=None, cap=linalg.DENSE_CAP):
        if self.dim > cap:
            raise linalg.DimensionTooLarge(f"dimension {self.dim} above dense cap {cap}")
        return self.hamiltonian_matvec(np.eye(self.dim, dtype=complex), ids)

    def dense_constraint(self, cid):
        c = self.constraints[cid]
        return linalg.embed(c.projector, c.support, self.dims)

    @cached_property
    def epsilon0(self):
        """Ground energy, computed once per instance."""
        return ground_energy(self)


def supports_intersect(a, b):
    return not set(a.support).isdisjoint(b.support)


def validate(sys):
    """List every violated model invariant; an empty list means the system is valid."""
    problems = []
    for cid, c in enumerate(sys.constraints):
        if len(set(c.support)) != len(c.support):
            problems.append(f"constraint {cid}: repeated qudit in support {c.support}")
        bad = [s for s in c.support if not 0 <= s < sys.n]
        if bad:
            problems.append(f"constraint {cid}: qudits {bad} out of range")
            continue
        ldim = linalg.local_dim(c.support, sys.dims)
        p = c.projector
        if p.shape != (ldim, ldim):
            problems.append(f"constraint {cid}: projector shape {p.shape} != ({ldim}, {ldim})")
            continue
        if np.linalg.norm(p - p.conj().T) > PROJ_TOL:
            problems.append(f"constraint {cid}: projector is not Hermitian")
        if np.linalg.norm(p @ p - p) > PROJ_TOL:
            problems.append(f"constraint {cid}: projector is not idempotent")
    if sys.layers is not None:
        seen = {}
        for i, layer in enumerate(sys.layers):
            for cid in layer:
                if not 0 <= cid < sys.M:
                    problems.append(f"layer {i}: unknown constraint id {cid}")
                    continue
                if cid in seen:
                    problems.append(f"constraint {cid} appears in layers {seen[cid]} and {i}")
                seen[cid] = i
            members = [cid for cid in layer if 0 <= cid < sys.M]
            for a_pos, a in enumerate(members):
                for b in members[a_pos + 1 :]:
                    if supports_intersect(sys.constraints[a], sys.constraints[b]):
                        problems.append(f"layer {i}: constraints {a} and {b} overlap")
        missing = sorted(set(range(sys.M)) - set(seen))
        if missing:
            problems.append(f"constraints {missing} are in no layer")
    return problems


def compute_layers(sys):
    """Greedy proper colouring of the constraint-intersection graph, in id order."""
    colour = []
    for cid, c in enumerate(sys.constraints):
        used = {colour[o] for o in range(cid) if supports_intersect(c, sys.constraints[o])}
        col = 0
        while col in used:
            col += 1
        colour.append(col)
    g = max(colour, default=-1) + 1
    return tuple(tuple(cid for cid in range(sys.M) if colour[cid] == i) for i in range(g))


def _check_state(sys, psi):
    psi = np.asarray(psi, dtype=complex)
    if psi.shape[0] != sys.dim:
        raise DimensionMismatch(f"state dimension {psi.shape[0]} != system dimension {sys.dim}")
    return psi


def energy(sys, psi, ids=None):
    psi = _check_state(sys, psi)
    return float(np.vdot(psi, sys.hamiltonian_matvec(psi, ids)).real)


def ground_energy(sys, method="auto", tol=1e-8, seed=0, cap=linalg.DENSE_CAP):
    """Lowest eigenvalue of H = sum of all constraints.

    ``auto`` uses dense diagonalisation up to ``DENSE_AUTO`` and Lanczos above it.
    """
    if method == "auto":
        method = "dense" if sys.dim <= min(cap, DENSE_AUTO) else "lanczos"
    if method == "dense":
        return float(linalg.hermitian_eig(sys.dense_hamiltonian(cap=cap), cap=cap)[0][0])
    return linalg.lowest_eigenvalue(sys.hamiltonian_matvec, sys.dim, tol=tol, seed=seed)


def count_sweep(apply_ops, psi):
    """Split ``psi`` by the number of commuting projections it violates.

    ``apply_ops`` is a list of callables applying mutually commuting projections.
    Returns ``v`` with ``v[c]`` the component having exactly ``c`` violations, via
    the update ``v'[c] = (1 - Q) v[c] + Q v[c - 1]`` for each projection ``Q``.
    """
    vecs = [np.array(psi, dtype=complex)]
    for op in apply_ops:
        hit = [op(v) for v in vecs]
        new = [v - q for v, q in zip(vecs, hit)] + [np.zeros_like(vecs[0])]
        for c, q in enumerate(hit):
            new[c + 1] += q
        vecs = new
    return vecs


def layer_ops(sys, ids):
    return [lambda v, cid=cid: sys.apply(cid, v) for cid in ids]


def _layer(sys, layer):
    layers = sys.require_layers()
    if not 0 <= layer < len(layers):
        raise LayerOutOfRange(f"layer {layer} not in 0..{len(layers) - 1}")
    return layers[layer]


@dataclass
class ViolationSpectrum:
    layer: int
    weights: np.ndarray
    components: list | None = None


def violation_spectrum(sys, layer, psi, keep_components=False):
    """Weights ||P_j psi||^2 of exactly j violations among the constraints of one layer."""
    ids = _layer(sys, layer)
    psi = _check_state(sys, psi)
    comps = count_sweep(layer_ops(sys, ids), psi)
    weights = np.array([float(np.vdot(v, v).real) for v in comps])
    return ViolationSpectrum(layer, weights, comps if keep_components else None)


def project_count(sys, ids, psi, ell, exact=False):
    """Project onto at most (or exactly) ``ell`` violations among the commuting constraints ``ids``."""
    ids = list(ids)
    if not exact and ell >= len(ids):
        return np.asarray(psi, dtype=complex).copy()
    if ell == 0:
        v = np.asarray(psi, dtype=complex).copy()
        for cid in ids:
            v = v - sys.apply(cid, v)
        return v
    comps = count_sweep(layer_ops(sys, ids), psi)
    if exact:
        return comps[ell] if ell < len(comps) else np.zeros_like(comps[0])
    return sum(comps[: ell + 1])


def project_le(sys, layer, ell, psi):
    """Projection onto ``ell`` or fewer violations in ``layer``."""
    ids = _layer(sys, layer)
    if ell < 0:
        raise ValueError("ell must be non-negative")
    return project_count(sys, ids, _check_state(sys, psi), ell)


# -- serialisation -----------------------------------------------------------


def instance_to_dict(sys):
    out = {
        "dims": list(sys.dims),
        "constraints": [
            {
                "support": list(c.support),
                "projector": {
                    "dim": int(c.projector.shape[0]),
                    "entries": [[float(z.real), float(z.imag)] for z in c.projector.reshape(-1)],
                },
            }
            for c in sys.constraints
        ],
    }
    if sys.layers is not None:
        out["layers"] = [list(layer) for layer in sys.layers]
    if sys.name:
        out["name"] = sys.name
    return out


def save_instance(sys):
    return json.dumps(instance_to_dict(sys)).encode("utf-8")


def _expect(cond, message, location):
    if not cond:
        raise ParseError(message, location)


def _int_list(value, location):
    _expect(isinstance(value, list), "expected a list of integers", location)
    for i, item in enumerate(value):
        _expect(isinstance(item, int) and not isinstance(item, bool), "expected an integer", f"{location}[{i}]")
    return value


def instance_from_dict(data):
    _expect(isinstance(data, dict), "top level must be an object", "$")
    _expect("dims" in data, "missing key 'dims'", "$")
    dims = _int_list(data["dims"], "$.dims")
    _expect(all(d >= 1 for d in dims), "qudit dimensions must be positive", "$.dims")
    _expect("constraints" in data and isinstance(data["constraints"], list), "missing list 'constraints'", "$")
    constraints = []
    for i, item in enumerate(data["constraints"]):
        loc = f"$.constraints[{i}]"
        _expect(isinstance(item, dict), "constraint must be an object", loc)
        support = _int_list(item.get("support"), f"{loc}.support")
        _expect(all(0 <= s < len(dims) for s in support), "support index out of range", f"{loc}.support")
        proj = item.get("projector")
        _expect(isinstance(proj, dict), "missing object 'projector'", loc)
        dim = proj.get("dim")
        _expect(isinstance(dim, int) and dim >= 1, "projector.dim must be a positive integer", f"{loc}.projector")
        _expect(dim == math.prod(dims[s] for s in support), "projector.dim does not match support", f"{loc}.projector")
        entries = proj.get("entries")
        _expect(isinstance(entries, list) and len(entries) == dim * dim, f"expected {dim * dim} entries", f"{loc}.projector.entries")
        values = np.empty(dim * dim, dtype=complex)
        for j, z in enumerate(entries):
            ok = isinstance(z, list) and len(z) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in z)
            _expect(ok, "complex entry must be [re, im]", f"{loc}.projector.entries[{j}]")
            values[j] = complex(z[0], z[1])
        constraints.append(Constraint(tuple(support), values.reshape(dim, dim)))
    layers = None
    if data.get("layers") is not None:
        _expect(isinstance(data["layers"], list), "layers must be a list", "$.layers")
        layers = [tuple(_int_list(layer, f"$.layers[{i}]")) for i, layer in enumerate(data["layers"])]
    return QSatSystem(tuple(dims), tuple(constraints), layers, data.get("name", ""))


def load_instance(raw):
    if isinstance(raw, bytes):
        try:
            raw = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not UTF-8: {exc}", f"byte {exc.start}") from None
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno} column {exc.colno}") from None
    return instance_from_dict(data)


def read_instance(path):
    with open(path, "rb") as fh:
        return load_instance(fh.read())


def write_instance(sys, path):
    with open(path, "wb") as fh:
        fh.write(save_instance(sys))
