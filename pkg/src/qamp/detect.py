"""Closed-form detectability bounds and numerical harnesses checking them on instances."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import linalg, qsat, xy
from .errors import (
    AllProjectedOut,
    DimensionTooLarge,
    InexactTheta,
    InvalidRegime,
    NotTwoLayers,
)

SLACK = 1e-7
ZERO_CLAMP = 1e-8


@dataclass(frozen=True)
class BoundParams:
    epsilon0: float
    theta: float
    k: int
    g: int
    f: int = 1
    r: int = 4
    ell: int = 0
    theta_exact: bool = True

    def __post_init__(self):
        if not 0.0 <= self.theta < 1.0:
            raise InvalidRegime(f"theta = {self.theta} outside [0, 1)")
        if self.f < 1:
            raise InvalidRegime("f must be at least 1")
        if self.ell < 0:
            raise InvalidRegime("ell must be non-negative")

    @property
    def eps(self):
        return clamp_energy(self.epsilon0)

    def regime_valid(self):
        """Whether the many-violation bound applies: (eps0/f) - r*ell > 1/(1 - theta)."""
        if self.ell == 0:
            return True
        return self.eps / self.f - self.r * self.ell > 1.0 / (1.0 - self.theta)

    def to_dict(self):
        return {
            "epsilon0": self.epsilon0,
            "theta": self.theta,
            "theta_exact": self.theta_exact,
            "k": self.k,
            "g": self.g,
            "f": self.f,
            "r": self.r,
            "ell": self.ell,
        }


def clamp_energy(e0):
    if abs(e0) <= ZERO_CLAMP:
        return max(e0, 0.0)
    if e0 < 0:
        raise ValueError(f"negative ground energy {e0}")
    return float(e0)


def delta_sq(p):
    """Detectability gap Delta^2(ell) as a function of eps0, theta, f (and r for ell > 0)."""
    eps = p.eps
    if p.ell == 0:
        if p.theta == 0.0:
            return 1.0 if eps > 0 else 0.0
        z = (eps / p.f) * (1 - p.theta**2) ** 3 / p.theta**2
        return z / (z + 1.0)
    if not p.regime_valid():
        raise InvalidRegime(
            f"(eps0/f) - r*ell = {eps / p.f - p.r * p.ell:.6g} is not above 1/(1-theta) = {1 / (1 - p.theta):.6g}"
        )
    return 1.0 - 1.0 / ((1.0 - p.theta) * (eps / p.f - p.r * p.ell))


def r_condition(r, theta, k, g):
    lhs = (2 * g + 1) * math.log(r) / r + (4 * g + 2 * g * g * math.log(k)) / r
    return lhs < math.log(1.0 / theta)


def find_r(theta, k, g):
    """Smallest integer r >= 4 meeting the sufficient condition for the decay sum to converge.

    The left-hand side decreases for r >= 3, so the first passing r of an upward scan
    is found by doubling then bisecting.
    """
    if not 0.0 < theta < 1.0:
        raise InvalidRegime(f"find_r needs 0 < theta < 1, got {theta}")
    if r_condition(4, theta, k, g):
        return 4
    lo, hi = 4, 8
    while not r_condition(hi, theta, k, g):
        lo, hi = hi, hi * 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if r_condition(mid, theta, k, g):
            hi = mid
        else:
            lo = mid
    return hi


def k_branch_constants(p, lam):
    """Constants (K1, K2, K3, K_eff) of the low-energy and high-energy amplification branches."""
    from .amp import c_of_lambda

    c_of_lambda(lam)  # validates lambda
    g2 = 16.0 * p.g**2
    k2 = 1.0 / (2.0 * p.f * p.r * g2)
    k3 = 1.0 / g2
    if p.theta == 0.0:
        k1 = 1.0 / (2 * p.g) ** 2
    else:
        cp = (1 - p.theta**2) ** 3 / p.theta**2
        eps_max = p.f * (2 * p.r + 4.0 / (1 - p.theta))
        k1 = (cp / p.f) / (eps_max * cp / p.f + 1.0) / (2 * p.g) ** 2
    return k1, k2, k3, min(k1, k2, k3)


# -- reports -------------------------------------------------------------------


def _slack(rhs, slack=SLACK):
    return slack * max(1.0, abs(rhs))


@dataclass
class CheckReport:
    check: str
    params: dict = field(default_factory=dict)
    trials: int = 0
    failures: list = field(default_factory=list)
    worst_margin: float | None = None
    report_only: bool = False
    skipped: int = 0
    notes: list = field(default_factory=list)
    rows: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.failures

    def record(self, lhs, rhs, label, slack=SLACK):
        """Check ``lhs <= rhs`` with scaled slack, tracking the smallest margin rhs - lhs."""
        margin = float(rhs - lhs)
        if self.worst_margin is None or margin < self.worst_margin:
            self.worst_margin = margin
        ok = lhs <= rhs + _slack(rhs, slack)
        if not ok and not self.report_only:
            self.failures.append({"where": label, "lhs": float(lhs), "rhs": float(rhs), "margin": margin})
        return ok

    def merge(self, other):
        self.trials += other.trials
        self.failures.extend(other.failures)
        self.skipped += other.skipped
        self.notes.extend(n for n in other.notes if n not in self.notes)
        if other.worst_margin is not None and (self.worst_margin is None or other.worst_margin < self.worst_margin):
            self.worst_margin = other.worst_margin
        return self

    def to_dict(self):
        out = {
            "check": self.check,
            "params": self.params,
            "trials": self.trials,
            "failures": self.failures,
            "worst_margin": self.worst_margin,
            "passed": self.passed,
        }
        if self.report_only:
            out["mode"] = "report-only"
        if self.skipped:
            out["skipped"] = self.skipped
        if self.notes:
            out["notes"] = self.notes
        return out


# -- system parameters ---------------------------------------------------------


def cover_count(sys, decomposer=None, layer_order=None):
    """Greedy family of XY decompositions whose pyramid apexes cover the whole top layer.

    Each round lists still-uncovered top-layer constraints first in the apex priority.
    Returns ``(f1, decompositions)``.
    """
    if decomposer is None:
        decomposer = xy.Decomposer(sys)
    order = xy._layer_order(sys, layer_order)
    top = sys.layers[order[0]]
    uncovered = list(top)
    decs = []
    while uncovered:
        covered = [c for c in top if c not in uncovered]
        dec = decomposer.decompose(uncovered + covered, order)
        apexes = set(dec.apexes)
        uncovered = [c for c in uncovered if c not in apexes]
        decs.append(dec)
    return len(decs), decs


@dataclass
class SystemParams:
    params: BoundParams
    covers: dict  # top layer -> list of XYDecomposition for layer order (top, ..., g-1)
    f1: int

    def decompositions(self):
        return [d for decs in self.covers.values() for d in decs]


def system_params(sys, ell=0, theta_mode="exact", cap=xy.THETA_CAP, seed=0, epsilon0=None, dense_cap=linalg.DENSE_CAP):
    """eps0, theta, f = g*f1 and r for an instance.

    theta is the maximum over every pyramid of every cover, taken for each choice of
    top layer (layers i..g-1 for i = 0..g-1), since the bounds are applied to each of
    those subsystems.
    """
    layers = sys.require_layers()
    g = len(layers)
    dec = xy.Decomposer(sys, theta_mode, cap, seed, dense_cap)
    covers = {}
    for i in range(g):
        covers[i] = cover_count(sys, dec, tuple(range(i, g)))[1]
    f1 = max(len(v) for v in covers.values()) if covers else 1
    all_decs = [d for v in covers.values() for d in v]
    theta = max((d.theta for d in all_decs), default=0.0)
    exact = all(d.theta_exact for d in all_decs)
    k = max(sys.k, 2)
    r = (find_r(theta, k, max(g, 1)) if theta > 0 else 4) + 1
    if epsilon0 is None:
        epsilon0 = qsat.ground_energy(sys, cap=dense_cap)
    p = BoundParams(epsilon0, theta, sys.k, g, max(g * f1, 1), r, ell, exact)
    return SystemParams(p, covers, f1)


def decomposition_params(sys, dec, ell=0):
    """Parameters local to one decomposition: its own theta and number of layers."""
    return BoundParams(0.0, dec.theta, sys.k, len(dec.layer_order), 1, 4, ell, dec.theta_exact)


# -- decay -----------------------------------------------------------------------


@dataclass
class DecaySpectrum:
    x: float
    lambda_s: np.ndarray
    eta_s: np.ndarray
    ell: int
    g: int
    theta: float
    theta_exact: bool
    omega: np.ndarray = field(repr=False)
    omega_components: list = field(repr=False)


def apply_layers(sys, order, ell, psi):
    for li in order:
        psi = qsat.project_le(sys, li, ell, psi)
    return psi


def decay_spectrum(sys, dec, ell, psi):
    """x, lambda_s = ||P_s Omega|| and eta_s for one state.

    Omega is the normalised projection of psi through every layer of ``dec.layer_order``.
    eta_s^2 averages ||P_s Phi_j||^2 over all (ell+1)^g choices j, where Phi_j applies, layer
    by layer, the projection onto at most ell - j_i violations among the constraints
    outside the pyramids.  For ell = 0 this is the single state with all outside
    constraints unviolated.
    """
    psi = qsat._check_state(sys, psi)
    unnorm = apply_layers(sys, dec.layer_order, ell, psi)
    x = float(np.linalg.norm(unnorm))
    if x <= 1e-12:
        raise AllProjectedOut(f"projected norm {x:.3e} vanishes")
    omega = unnorm / x
    comps = dec.coarse_components(omega)
    lam = np.array([float(np.linalg.norm(c)) for c in comps])
    outside = [dec.outside(li) for li in dec.layer_order]
    eta_sq = np.zeros(len(comps))
    choices = list(itertools.product(range(ell + 1), repeat=len(dec.layer_order)))
    for j in choices:
        phi = psi
        for ids, ji in zip(outside, j):
            phi = qsat.project_count(sys, ids, phi, ell - ji)
        eta_sq += dec.coarse_weights(phi)
    eta = np.sqrt(eta_sq / len(choices))
    return DecaySpectrum(x, lam, eta, ell, len(dec.layer_order), dec.theta, dec.theta_exact, omega, comps)


def decay_bound(spec, k, s):
    """Right-hand side of the decay inequality for sector size s."""
    ell, g = spec.ell, spec.g
    if ell == 0:
        factor = 1.0
    else:
        factor = k ** (g * g * ell) * ((ell + 1) / math.factorial(ell)) ** g * float(s) ** (g * ell)
    return factor * spec.theta**s * spec.eta_s[s] / spec.x


def verify_decay(spec, p, report=None):
    if not spec.theta_exact:
        raise InexactTheta("decay verification needs an exactly computed theta")
    report = report or CheckReport("decay", {"ell": spec.ell, "theta": spec.theta, "g": spec.g, "k": p.k})
    report.trials += 1
    for s in range(spec.ell, len(spec.lambda_s)):
        report.record(spec.lambda_s[s], decay_bound(spec, p.k, s), f"s={s}")
    return report


# -- detectability -------------------------------------------------------------


def _report_for(name, p):
    rep = CheckReport(name, p.to_dict())
    rep.report_only = not p.theta_exact
    if rep.report_only:
        rep.notes.append("theta is a sampled estimate; inequalities are reported, not verified")
    return rep


def verify_aux(sys, p, psis, report=None):
    """||Pi_{g-1} ... Pi_0 psi||^2 <= 1 - Delta^2(ell) for each trial state."""
    report = report or _report_for("aux", p)
    if not p.regime_valid():
        report.skipped += len(psis)
        if "regime-invalid" not in report.notes:
            report.notes.append("regime-invalid")
        return report
    bound = 1.0 - delta_sq(p)
    order = tuple(range(sys.g))
    for i, psi in enumerate(psis):
        x2 = float(np.linalg.norm(apply_layers(sys, order, p.ell, psi)) ** 2)
        report.trials += 1
        report.record(x2, bound, f"trial {i}")
    return report


def verify_detectability(sys, p, psi, report=None):
    """Largest ||Pi^{>ell}_i psi||^2 over layers against Delta^2(ell)/(2g)^2.

    Returns ``(layer, report)`` where ``layer`` witnesses the bound (None if none does
    or the regime is invalid).
    """
    report = report or _report_for("detect", p)
    if not p.regime_valid():
        report.skipped += 1
        if "regime-invalid" not in report.notes:
            report.notes.append("regime-invalid")
        return None, report
    threshold = delta_sq(p) / (2 * p.g) ** 2
    psi = qsat._check_state(sys, psi)
    norm2 = float(np.vdot(psi, psi).real)
    best, best_layer = -1.0, None
    for i in range(sys.g):
        kept = qsat.project_le(sys, i, p.ell, psi)
        above = norm2 - float(np.vdot(kept, kept).real)
        if above > best:
            best, best_layer = above, i
    report.trials += 1
    # detection probability must be at least the threshold: record threshold <= best
    ok = report.record(threshold, best, f"trial {report.trials - 1}")
    return (best_layer if ok else None), report


def verify_energy_claims(sys, dec, ell, psi, report=None, cap=linalg.DENSE_CAP, spectrum=None):
    """Top-layer energy of each normalised sector component of Omega, and the eta_s bound for ell = 0."""
    if sys.dim > cap:
        raise DimensionTooLarge(f"dimension {sys.dim} above dense cap {cap}")
    if not dec.theta_exact:
        raise InexactTheta("energy claims need an exactly computed theta")
    report = report or CheckReport("energy", {"ell": ell, "theta": dec.theta, "layer_order": list(dec.layer_order)})
    spec = spectrum if spectrum is not None else decay_spectrum(sys, dec, ell, psi)
    top = dec.apexes
    report.trials += 1
    for s, comp in enumerate(spec.omega_components):
        w = spec.lambda_s[s] ** 2
        if w <= 1e-8:
            continue
        e = float(np.vdot(comp, sys.hamiltonian_matvec(comp, top)).real) / w
        report.record(e, s if ell == 0 else ell + s, f"energy s={s}")
    if ell == 0:
        rhs = (1.0 - spec.x**2) / (1.0 - dec.theta**2)
        for s in range(1, len(spec.eta_s)):
            report.record(spec.eta_s[s] ** 2, rhs, f"eta s={s}")
    return report


def kitaev_check(sys, p=None, cap=linalg.DENSE_CAP):
    """Delta^2(0) <= 1 - cos(alpha) <= eps0 with alpha the angle between the two layer kernels."""
    layers = sys.require_layers()
    if len(layers) != 2:
        raise NotTwoLayers(f"system has {len(layers)} layers")
    if p is None:
        p = system_params(sys, 0, dense_cap=cap).params
    p = replace(p, ell=0)
    report = _report_for("kitaev", p)
    h = [sys.dense_hamiltonian(layer, cap) for layer in layers]
    kernels = [linalg.kernel(m) for m in h]
    report.trials = 1
    if kernels[0].shape[1] == 0 or kernels[1].shape[1] == 0:
        report.notes.append("a layer kernel is empty; angle undefined")
        report.params["cos_alpha"] = None
        return report
    cos_a = linalg.principal_cos(kernels[0], kernels[1])
    gap = 1.0 - cos_a
    d2 = delta_sq(p)
    report.params.update({"cos_alpha": cos_a, "one_minus_cos": gap, "delta_sq": d2})
    report.record(d2, gap, "delta_sq <= 1 - cos")
    report.record(gap, p.eps, "1 - cos <= eps0")
    return report
