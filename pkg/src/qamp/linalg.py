"""Dense complex linear algebra, subspace geometry and a Lanczos ground-state solver.

Conventions used throughout the package:

* operators are ``numpy`` complex arrays of shape ``(dim, dim)``;
* states are 1-d complex arrays;
* a subspace basis is a ``(ambient_dim, k)`` array whose columns are orthonormal
  (``k == 0`` is the empty subspace);
* in a register of qudits with dimensions ``dims``, qudit 0 is the least
  significant digit of the flattened index.  The same holds inside a local
  operator: ``support[0]`` is its least significant factor.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import (
    BadSupport,
    DimensionMismatch,
    DimensionTooLarge,
    EmptySubspace,
    NoConvergence,
    NotHermitian,
)

DENSE_CAP = 4096
RANK_TOL = 1e-8


def _as_square(m):
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix has non-finite entries")
    return m


def check_hermitian(m, tol=RANK_TOL):
    m = _as_square(m)
    dev = np.linalg.norm(m - m.conj().T)
    if dev > tol * max(1.0, np.linalg.norm(m)):
        raise NotHermitian(f"||m - m^dagger|| = {dev:.3e} exceeds {tol:.1e}")
    return m


def hermitian_eig(m, tol=RANK_TOL, cap=DENSE_CAP):
    """Eigenvalues (ascending) and orthonormal eigenvectors of a Hermitian matrix."""
    m = _as_square(m)
    if m.shape[0] > cap:
        raise DimensionTooLarge(f"dimension {m.shape[0]} above dense cap {cap}")
    m = check_hermitian(m, tol)
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def kernel(m, tol=RANK_TOL, cap=DENSE_CAP):
    """Orthonormal basis of the (numerical) null space of a PSD Hermitian matrix.

    Eigenvalues are compared against ``tol`` after scaling the matrix to unit norm.
    """
    w, v = hermitian_eig(m, tol, cap)
    scale = np.max(np.abs(w)) if w.size else 0.0
    if scale == 0.0:
        return v
    return v[:, w <= tol * scale]


def projector(basis):
    basis = np.asarray(basis, dtype=complex)
    return basis @ basis.conj().T


def complement(basis, tol=RANK_TOL):
    """Orthonormal basis of the orthogonal complement of ``span(basis)``."""
    basis = np.asarray(basis, dtype=complex)
    dim = basis.shape[0]
    if basis.shape[1] == 0:
        return np.eye(dim, dtype=complex)
    return kernel(projector(basis), tol)


def orthonormalize(vectors, tol=RANK_TOL):
    """Orthonormal basis for the column span of ``vectors`` (rank cut relative to the top singular value)."""
    vectors = np.asarray(vectors, dtype=complex)
    if vectors.shape[1] == 0:
        return vectors
    u, s, _ = np.linalg.svd(vectors, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        return u[:, :0]
    return u[:, s > tol * s[0]]


def intersect(a, b, tol=RANK_TOL):
    """Basis of span(a) ∩ span(b), computed as the kernel of (1 - P_a) + (1 - P_b)."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"ambient dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    dim = a.shape[0]
    if a.shape[1] == 0 or b.shape[1] == 0:
        return np.zeros((dim, 0), dtype=complex)
    eye = np.eye(dim, dtype=complex)
    return kernel((eye - projector(a)) + (eye - projector(b)), tol)


def principal_cos(a, b):
    """Cosine of the smallest principal angle between two subspaces."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.shape[0] != b.shape[0]:
        raise DimensionMismatch(f"ambient dimensions differ: {a.shape[0]} vs {b.shape[0]}")
    if a.shape[1] == 0 or b.shape[1] == 0:
        raise EmptySubspace("principal angle needs two nonempty subspaces")
    s = np.linalg.svd(a.conj().T @ b, compute_uv=False)
    return float(min(1.0, s[0]))


def operator_norm(m):
    m = np.asarray(m)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def local_dim(support, dims):
    return math.prod(dims[s] for s in support)


def _check_support(support, dims):
    support = tuple(int(s) for s in support)
    if len(set(support)) != len(support):
        raise BadSupport(f"repeated qudit in support {support}")
    for s in support:
        if not 0 <= s < len(dims):
            raise BadSupport(f"qudit {s} out of range for {len(dims)} qudits")
    return support


def apply_local(op, support, dims, v):
    """Apply ``op ⊗ 1`` to ``v`` where ``op`` acts on the qudits in ``support``.

    ``v`` may be a state of shape ``(dim,)`` or a batch of shape ``(dim, b)``.
    """
    dims = tuple(dims)
    support = _check_support(support, dims)
    n = len(dims)
    m = len(support)
    ldim = local_dim(support, dims)
    op = np.asarray(op)
    if op.shape != (ldim, ldim):
        raise BadSupport(f"operator shape {op.shape} does not match support dimension {ldim}")
    v = np.asarray(v)
    batch = v.shape[1:]
    if v.shape[0] != math.prod(dims):
        raise DimensionMismatch(f"state dimension {v.shape[0]} != {math.prod(dims)}")
    if m == 0:
        return op[0, 0] * v
    psi = v.reshape(dims[::-1] + batch)
    # tensor axis a holds qudit n-1-a; op axis j holds support[m-1-j]
    targets = [n - 1 - s for s in reversed(support)]
    sub = tuple(dims[s] for s in reversed(support))
    opt = op.reshape(sub + sub)
    out = np.tensordot(opt, psi, axes=(list(range(m, 2 * m)), targets))
    out = np.moveaxis(out, list(range(m)), targets)
    return out.reshape(v.shape)


def embed(op, support, dims):
    """Dense matrix of ``op`` acting on ``support`` inside the full register."""
    dim = math.prod(dims)
    return apply_local(op, support, dims, np.eye(dim, dtype=complex))


def haar_state(dim, rng):
    v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    return v / np.linalg.norm(v)


def lowest_eigenvalue(matvec, dim, tol=1e-8, seed=0, max_matvecs=None, krylov_dim=40):
    """Smallest eigenvalue of a Hermitian operator given only through ``matvec``."""
    return lowest_eigenpair(matvec, dim, tol, seed, max_matvecs, krylov_dim)[0]


def lowest_eigenpair(matvec, dim, tol=1e-8, seed=0, max_matvecs=None, krylov_dim=40):
    """Smallest eigenvalue and a normalised Ritz vector of a Hermitian ``matvec`` operator.

    Restarted Lanczos with full reorthogonalisation.  Each cycle restarts from the
    current lowest Ritz vector; the iteration stops once the Ritz residual is below
    ``tol`` or the Krylov space becomes invariant.
    """
    if dim < 1:
        raise ValueError("dim must be at least 1")
    if max_matvecs is None:
        max_matvecs = min(10 * dim, 5000)
    rng = np.random.default_rng(seed)
    v = haar_state(dim, rng)
    m = min(krylov_dim, dim)
    used = 0
    while used < max_matvecs:
        basis = np.zeros((dim, m + 1), dtype=complex)
        alpha = np.zeros(m)
        beta = np.zeros(m)
        basis[:, 0] = v
        steps = 0
        invariant = False
        for j in range(m):
            w = np.asarray(matvec(basis[:, j]), dtype=complex)
            used += 1
            alpha[j] = np.vdot(basis[:, j], w).real
            # two passes of classical Gram-Schmidt keep the basis orthonormal
            for _ in range(2):
                w = w - basis[:, : j + 1] @ (basis[:, : j + 1].conj().T @ w)
            beta[j] = np.linalg.norm(w)
            steps = j + 1
            if beta[j] <= 1e-12 * max(1.0, abs(alpha[j])):
                invariant = True
                break
            basis[:, j + 1] = w / beta[j]
            if used >= max_matvecs:
                break
        t = np.diag(alpha[:steps]) + np.diag(beta[: steps - 1], 1) + np.diag(beta[: steps - 1], -1)
        evals, evecs = np.linalg.eigh(t)
        y = evecs[:, 0]
        ritz = float(evals[0])
        residual = abs(beta[steps - 1] * y[-1])
        v = basis[:, :steps] @ y
        v /= np.linalg.norm(v)
        if invariant or residual <= tol:
            return ritz, v
    raise NoConvergence(f"Lanczos did not converge within {max_matvecs} matvecs")
