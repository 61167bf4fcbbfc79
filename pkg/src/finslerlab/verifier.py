"""
Grid-sampled residual checks for the constant-curvature PDE systems.

Every check evaluates a normalized residual at each grid point and passes
iff the largest one is at most the tolerance.  Unless stated otherwise,
residuals are divided by ``phi^2``, the natural curvature scale.

The module also solves the biquadratic ``D^2 q^4 + (u - C) q^2 - K = 0``
that defines the implicit solution family and evaluates
``phi = q / (q^2 (D q + v)^2 + K)`` on each root.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import MetricSpec, PointSample, eval_phi, feasible_radius
from .curvature import (
    Q0_TOL,
    CurvatureBundle,
    assemble_riemann,
    compute_bundle,
    compute_chi,
    compute_H,
    compute_psi_reduced,
    compute_ricci,
    compute_ricci_tensor,
    q_numerator,
)
from .errors import FinslerLabError, PreconditionError, SingularityError, UsageError
from .jets import Jet2
from .oracle import chi_from_riemann, h_from_chi, oracle_at, ricci_hessian, riemann_curvature

__all__ = [
    "SCHEMA_VERSION",
    "DEFAULT_TOL",
    "Grid",
    "Residual",
    "CheckResult",
    "GridEvaluation",
    "VerificationReport",
    "SuiteConfig",
    "evaluate_grid",
    "frame_from_rs",
    "verify_constant_ricci",
    "verify_constant_flag",
    "verify_einstein_tensor",
    "verify_thm14",
    "verify_chi_zero",
    "verify_h_zero",
    "verify_projective_Q0",
    "verify_pde2",
    "verify_ode_uv",
    "identity_checks",
    "QuarticRoot",
    "QuarticSolution",
    "PhiValue",
    "solve_q",
    "phi_from_q",
    "admissible_branches",
    "run_suite",
    "OracleReport",
    "oracle_equivalence",
]

SCHEMA_VERSION = 1
DEFAULT_TOL = 1e-8
BRANCHES = ("++", "+-", "-+", "--")


# --- sampling ------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """
    Uniform ``nr x ns`` grid: ``r`` in ``[r_min, rho (1 - delta)]`` and, for
    each ``r``, ``s`` in ``[-r (1 - delta), r (1 - delta)]``.

    ``r_min`` and ``rho`` default to the metric's own values.
    """

    nr: int = 40
    ns: int = 40
    r_min: float | None = None
    rho: float | None = None
    delta: float = 1e-3

    def __post_init__(self):
        if self.nr < 2 or self.ns < 2:
            raise UsageError(f"grid counts must be >= 2, got {self.nr}x{self.ns}")
        if not 0 <= self.delta < 1:
            raise UsageError(f"delta must lie in [0, 1), got {self.delta}")

    def bounds(self, spec: MetricSpec) -> tuple[float, float]:
        r_min = spec.r_min if self.r_min is None else self.r_min
        rho = spec.radius if self.rho is None else self.rho
        r_max = rho * (1 - self.delta)
        if not 0 < r_min < r_max:
            raise UsageError(f"empty grid: need 0 < r_min={r_min} < rho(1-delta)={r_max}")
        return r_min, r_max

    def points(self, spec: MetricSpec) -> PointSample:
        r_min, r_max = self.bounds(spec)
        r = np.linspace(r_min, r_max, self.nr)
        frac = np.linspace(-(1 - self.delta), 1 - self.delta, self.ns)
        rr = np.repeat(r, self.ns)
        return PointSample(rr, rr * np.tile(frac, self.nr))

    def describe(self, spec: MetricSpec) -> dict:
        r_min, r_max = self.bounds(spec)
        return {"nr": self.nr, "ns": self.ns, "r_min": r_min, "r_max": r_max,
                "rho": spec.radius if self.rho is None else self.rho, "delta": self.delta}


def frame_from_rs(r, s, n: int, rng: np.random.Generator | None = None, ynorm=1.0):
    """
    Vectors ``x, y`` in ``R^n`` with ``|x| = r`` and ``<x, y>/|y| = s``.

    Without ``rng`` the frame is ``y = |y| e1``, ``x = s e1 + sqrt(r^2-s^2) e2``;
    with it, ``e1, e2`` are a random orthonormal pair.
    """
    r = np.asarray(r, float)
    s = np.asarray(s, float)
    shape = np.broadcast_shapes(r.shape, s.shape)
    ynorm = np.broadcast_to(np.asarray(ynorm, float), shape)
    if rng is None:
        e1 = np.zeros(shape + (n,))
        e2 = np.zeros(shape + (n,))
        e1[..., 0] = 1.0
        e2[..., 1] = 1.0
    else:
        a = rng.normal(size=shape + (n,))
        b = rng.normal(size=shape + (n,))
        e1 = a / np.linalg.norm(a, axis=-1, keepdims=True)
        b = b - np.sum(b * e1, axis=-1, keepdims=True) * e1
        e2 = b / np.linalg.norm(b, axis=-1, keepdims=True)
    perp = np.sqrt(np.maximum(r**2 - s**2, 0.0))
    x = s[..., None] * e1 + perp[..., None] * e2
    return x, ynorm[..., None] * e1


@dataclass(frozen=True)
class GridEvaluation:
    spec: MetricSpec
    points: PointSample
    bundle: CurvatureBundle

    @property
    def phi2(self) -> np.ndarray:
        return self.bundle.phi.value**2


def evaluate_grid(spec: MetricSpec, grid: Grid | PointSample, order: int = 7,
                  dtype=np.longdouble) -> GridEvaluation:
    """
    Curvature bundle at every grid point (one vectorized pass).

    Extended precision is the default: near ``r_min`` the ``1/r`` factors
    amplify a coefficient error of ``eps`` to roughly ``eps / r_min^3``.
    """
    points = grid if isinstance(grid, PointSample) else grid.points(spec)
    if points.r.size == 0:
        raise UsageError("empty grid")
    phi = eval_phi(spec, points, order, dtype=dtype)
    return GridEvaluation(spec, points, compute_bundle(phi, points, spec.n))


# --- check results --------------------------------------------------------


@dataclass
class Residual:
    """Summary of one residual field over the grid."""

    name: str
    max: float
    mean: float
    argmax: tuple[float, float]
    values: np.ndarray | None = field(default=None, repr=False, compare=False)
    points: PointSample | None = field(default=None, repr=False, compare=False)

    @classmethod
    def from_values(cls, name: str, values, points: PointSample) -> "Residual":
        values = np.abs(np.ravel(np.asarray(values).astype(float)))
        i = int(np.argmax(values))
        return cls(name, float(values[i]), float(values.mean()),
                   (float(np.ravel(points.r)[i]), float(np.ravel(points.s)[i])), values, points)

    def to_dict(self) -> dict:
        return {"name": self.name, "max": self.max, "mean": self.mean,
                "argmax": {"r": self.argmax[0], "s": self.argmax[1]}}

    @classmethod
    def from_dict(cls, d: dict) -> "Residual":
        return cls(d["name"], d["max"], d["mean"], (d["argmax"]["r"], d["argmax"]["s"]))


@dataclass
class CheckResult:
    """
    A named check: one or more residual parts and a tolerance.

    ``status`` is ``"ok"`` when residuals were computed, ``"not_applicable"``
    when a precondition failed (excluded from the overall verdict), and
    ``"error"`` when evaluation raised.
    """

    name: str
    tolerance: float
    parts: list[Residual] = field(default_factory=list)
    status: str = "ok"
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float | None:
        return max((p.max for p in self.parts), default=None)

    @property
    def mean_residual(self) -> float | None:
        return max((p.mean for p in self.parts), default=None)

    @property
    def argmax(self) -> tuple[float, float] | None:
        if not self.parts:
            return None
        return max(self.parts, key=lambda p: p.max).argmax

    @property
    def passed(self) -> bool | None:
        if self.status == "not_applicable":
            return None
        if self.status != "ok" or not self.parts:
            return False
        return self.max_residual <= self.tolerance

    def to_dict(self) -> dict:
        am = self.argmax
        out = {
            "name": self.name,
            "status": self.status,
            "tolerance": self.tolerance,
            "max_residual": self.max_residual,
            "mean_residual": self.mean_residual,
            "argmax": None if am is None else {"r": am[0], "s": am[1]},
            "pass": self.passed,
            "parts": [p.to_dict() for p in self.parts],
        }
        if self.message:
            out["message"] = self.message
        if self.extra:
            out["extra"] = self.extra
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "CheckResult":
        return cls(d["name"], d["tolerance"], [Residual.from_dict(p) for p in d["parts"]],
                   d["status"], d.get("message", ""), d.get("extra", {}))


def _evaluation(spec, grid, evaluation) -> GridEvaluation:
    if evaluation is not None:
        return evaluation
    return evaluate_grid(spec, Grid() if grid is None else grid)


# --- theorem checks ---------------------------------------------------------


def _ricci_residual(ev: GridEvaluation, K: float) -> np.ndarray:
    b = ev.bundle
    n = ev.spec.n
    u = b.r**2 - b.s**2
    return ((n - 1) * K * ev.phi2 - (n - 1) * b.R1.value - u * b.R2.value) / ((n - 1) * ev.phi2)


def verify_constant_ricci(spec, K, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """``(n-1) K phi^2 = (n-1) R1 + (r^2-s^2) R2``, divided by ``(n-1) phi^2``."""
    ev = _evaluation(spec, grid, evaluation)
    return CheckResult("thm1_1", tol, [Residual.from_values("ricci", _ricci_residual(ev, K), ev.points)])


def verify_constant_flag(spec, K, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """
    ``R1 = K phi^2`` and ``R2 = 0``, reported as separate parts.

    The consequences ``R3 = 0`` and the Ricci equation are carried as two
    more parts, so a pass here implies a pass of the Ricci and the
    ``R2 = R3 = 0`` checks on the same grid.
    """
    ev = _evaluation(spec, grid, evaluation)
    b = ev.bundle
    return CheckResult("thm1_2", tol, [
        Residual.from_values("R1", (b.R1.value - K * ev.phi2) / ev.phi2, ev.points),
        Residual.from_values("R2", b.R2.value / ev.phi2, ev.points),
        Residual.from_values("R3", b.R3.value / ev.phi2, ev.points),
        Residual.from_values("ricci", _ricci_residual(ev, K), ev.points),
    ])


def _einstein_expr(ev: GridEvaluation) -> np.ndarray:
    """``(n+1) R3 + (r^2-s^2) [R2]_s`` (equal to ``-2 M``)."""
    b = ev.bundle
    return (ev.spec.n + 1) * b.R3.value + (b.r**2 - b.s**2) * b.R2_s


def verify_einstein_tensor(spec, K, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """Both equations characterizing ``Ric_ij = (n-1) K g_ij``."""
    ev = _evaluation(spec, grid, evaluation)
    return CheckResult("thm1_3", tol, [
        Residual.from_values("ricci", _ricci_residual(ev, K), ev.points),
        Residual.from_values("einstein", _einstein_expr(ev) / ev.phi2, ev.points),
    ])


def verify_thm14(spec, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """
    ``R2 = 0`` and ``R3 = 0``; also reports ``K_hat = R1/phi^2``.

    When both vanish ``K_hat`` must be constant; its grid mean and
    ``max - min`` spread are returned in ``extra["K_hat"]``.
    """
    ev = _evaluation(spec, grid, evaluation)
    b = ev.bundle
    k_hat = b.K_hat.astype(float)
    return CheckResult("thm1_4", tol, [
        Residual.from_values("R2", b.R2.value / ev.phi2, ev.points),
        Residual.from_values("R3", b.R3.value / ev.phi2, ev.points),
    ], extra={"K_hat": {"mean": float(np.mean(k_hat)), "spread": float(np.max(k_hat) - np.min(k_hat))}})


def verify_chi_zero(spec, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """``chi = 0`` in the unit frame, as ``|chi| / (|y| r phi^2)``."""
    ev = _evaluation(spec, grid, evaluation)
    x, y = frame_from_rs(ev.points.r, ev.points.s, ev.spec.n)
    chi = np.linalg.norm(compute_chi(ev.bundle, x, y), axis=-1)
    return CheckResult("lemma2_4", tol, [
        Residual.from_values("chi", chi / (ev.points.r * ev.phi2), ev.points)])


def verify_h_zero(spec, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """``H = 0`` in the unit frame, as ``max |H_ij| / phi^2``."""
    ev = _evaluation(spec, grid, evaluation)
    x, y = frame_from_rs(ev.points.r, ev.points.s, ev.spec.n)
    H = np.abs(compute_H(ev.bundle, x, y)).max(axis=(-1, -2))
    return CheckResult("lemma2_5", tol, [Residual.from_values("H", H / ev.phi2, ev.points)])


def verify_projective_Q0(spec, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """``phi_r - s phi_rs - r phi_ss = 0``, divided by ``max(1, |phi_r|)``."""
    ev = _evaluation(spec, grid, evaluation)
    phi = ev.bundle.phi
    scale = np.maximum(1.0, np.abs(phi.partial((1, 0))))
    return CheckResult("pde1", tol, [
        Residual.from_values("Q_numerator", q_numerator(phi, ev.points) / scale, ev.points)])


def verify_pde2(spec, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """``psi_r - s psi_rs - r psi_ss = 0`` (needs ``Q = 0``), divided by ``max(1, |psi_r|)``."""
    ev = _evaluation(spec, grid, evaluation)
    red = compute_psi_reduced(ev.bundle.phi, ev.points)
    psi = red.psi
    expr = ev.points.r * red.R3.value
    scale = np.maximum(1.0, np.abs(psi.partial((1, 0))))
    return CheckResult("pde2", tol, [Residual.from_values("psi", expr / scale, ev.points)])


def _d_dv(f: Jet2, r: Jet2, s: Jet2) -> Jet2:
    """Derivative in ``v = s`` at fixed ``u = r^2 - s^2``: ``f_s + (s/r) f_r``."""
    return f.diff(1) + s / r * f.diff(0)


def verify_ode_uv(spec, K, grid=None, tol=DEFAULT_TOL, evaluation=None) -> CheckResult:
    """``K phi^2 = psi^2 - psi_v`` with ``psi = phi_v / (2 phi)`` (needs ``Q = 0``)."""
    ev = _evaluation(spec, grid, evaluation)
    phi = ev.bundle.phi
    p = ev.points
    num = np.abs(q_numerator(phi, p))
    if np.any(num > Q0_TOL * np.maximum(1.0, np.abs(phi.partial((1, 0))))):
        raise PreconditionError("the (u, v) reduction needs Q = 0 on the whole grid")
    r, s = Jet2.seed_rs(p.r, p.s, phi.order)
    psi = _d_dv(phi, r, s) / (2 * phi)
    psi_v = _d_dv(psi, r, s)
    resid = K * ev.phi2 - psi.value**2 + psi_v.value
    return CheckResult("ode_uv", tol, [Residual.from_values("ode", resid / ev.phi2, p)])


# --- identities that hold for every profile ---------------------------------


def identity_checks(ev: GridEvaluation, rng: np.random.Generator, npoints: int = 20,
                    tol: float = 1e-9) -> list[CheckResult]:
    """
    Algebraic identities at ``npoints`` grid points with random frames and ``|y|``.

    These hold for any ``phi`` whatsoever, so a failure points at the code,
    not at the metric.
    """
    b = ev.bundle
    size = b.r.size
    idx = np.sort(rng.choice(size, size=min(npoints, size), replace=False))
    sub = PointSample(np.ravel(b.r)[idx], np.ravel(b.s)[idx])
    sb = compute_bundle(Jet2(b.phi.coeffs.reshape(-1, b.phi.coeffs.shape[-1])[idx], order=b.phi.order),
                        sub, b.n)
    ynorm = rng.uniform(0.5, 2.0, size=idx.size)
    x, y = frame_from_rs(sub.r, sub.s, b.n, rng, ynorm)
    phi2 = sb.phi.value**2
    w2 = ynorm**2

    phi_s = sb.phi.partial((0, 1))
    u = sub.r**2 - sub.s**2
    req2 = sb.R4.value + sub.s * sb.R2.value + phi_s / sb.phi.value * (u * sb.R2.value + sb.R1.value)
    req2 /= np.maximum(1.0, phi2) + np.abs(sb.R1.value)

    R = assemble_riemann(sb, x, y)
    ric = compute_ricci(sb, ynorm)
    trace = (np.trace(R, axis1=-2, axis2=-1) - ric) / (w2 * phi2)
    Ry = np.abs(np.einsum("...ij,...j->...i", R, y)).max(axis=-1) / (w2 * ynorm * phi2)
    ric_ij = compute_ricci_tensor(sb, x, y)
    contraction = (np.einsum("...ij,...i,...j->...", ric_ij, y, y) - ric) / (w2 * phi2)

    chi = np.linalg.norm(compute_chi(sb, x, y), axis=-1)
    t = (b.n + 1) * sb.R3.value + u * sb.R2_s
    chi_prop = (chi - 0.5 * np.abs(t) * ynorm * np.sqrt(u)) / (ynorm * sub.r * phi2)

    H = compute_H(sb, x, y)
    hxx = np.einsum("...ij,...i,...j->...", H, x, x)
    hxx_expected = ((u * sb.M_s - sub.s * sb.M) * u)
    hxx_res = (hxx - hxx_expected) / phi2

    return [
        CheckResult("identity_req2", tol, [Residual.from_values("req2", req2, sub)]),
        CheckResult("identity_ricci_trace", tol, [Residual.from_values("trace", trace, sub)]),
        CheckResult("identity_riemann_y", tol, [Residual.from_values("R_y", Ry, sub)]),
        CheckResult("identity_ricci_tensor", tol, [Residual.from_values("Ric_ij_yy", contraction, sub)]),
        CheckResult("identity_chi_M", tol, [Residual.from_values("chi_vs_M", chi_prop, sub)]),
        CheckResult("identity_H_xx", tol, [Residual.from_values("H_xx", hxx_res, sub)]),
    ]


# --- the biquadratic --------------------------------------------------------


@dataclass(frozen=True)
class QuarticRoot:
    q: float
    q2: float
    branch: str          # sign of the discriminant root, then sign of q
    multiplicity: int
    residual: float


@dataclass(frozen=True)
class QuarticSolution:
    u: float
    C: float
    D: float
    K: float
    roots: tuple[QuarticRoot, ...]
    discriminant: float | None
    message: str = ""
    branch_used: str | None = None

    def to_dict(self) -> dict:
        return {
            "u": self.u, "C": self.C, "D": self.D, "K": self.K,
            "discriminant": self.discriminant, "message": self.message,
            "branch_used": self.branch_used,
            "roots": [vars(r) for r in self.roots],
        }


def _poly(q2: float, u, C, D, K) -> float:
    return D * D * q2 * q2 + (u - C) * q2 - K


def solve_q(u: float, C: float, D: float, K: float) -> QuarticSolution:
    """
    All real non-zero roots ``q`` of ``D^2 q^4 + (u - C) q^2 - K = 0``.

    The quadratic in ``q^2`` is solved in cancellation-free form (the smaller
    root via the product of roots).  ``D = 0`` degrades to a linear equation.
    An empty solution carries the discriminant and a diagnostic message.
    """
    u, C, D, K = float(u), float(C), float(D), float(K)
    b = u - C
    q2s: list[tuple[float, str, int]] = []
    disc = None
    message = ""
    if D == 0:
        if b == 0:
            message = "degenerate: D = 0 and u = C" + (" (every q solves)" if K == 0 else " (no solution)")
        else:
            q2s.append((K / b, "+", 1))
    else:
        a = D * D
        disc = b * b + 4 * a * K
        if disc < 0:
            message = f"no real q^2: discriminant (C-u)^2 + 4 D^2 K = {disc:.6g} < 0"
        else:
            sq = math.sqrt(disc)
            t = -0.5 * (b + math.copysign(sq, b))
            mult = 2 if disc == 0 else 1
            if t == 0:
                roots = [0.0, 0.0]
            else:
                roots = sorted([t / a, -K / t], reverse=True)
            q2s = [(roots[0], "+", mult), (roots[1], "-", mult)]
            if disc == 0:
                q2s = q2s[:1]
    out = []
    for q2, sign, mult in q2s:
        if not q2 > 0:
            continue
        for qsign in (1.0, -1.0):
            q = qsign * math.sqrt(q2)
            res = abs(_poly(q * q, u, C, D, K))
            out.append(QuarticRoot(q, q2, sign + ("+" if qsign > 0 else "-"), mult, res))
    if not out and not message:
        message = (f"no positive q^2 (discriminant {disc}, sign(C-u) = {np.sign(-b):+.0f}, "
                   f"sign(K) = {np.sign(K):+.0f})")
    return QuarticSolution(u, C, D, K, tuple(out), disc, message)


@dataclass(frozen=True)
class PhiValue:
    branch: str
    q: float
    phi: float
    admissible: bool


def phi_from_q(sol: QuarticSolution, v: float) -> list[PhiValue]:
    """``phi = q / (q^2 (D q + v)^2 + K)`` for every root; ``phi <= 0`` is flagged inadmissible."""
    out = []
    for root in sol.roots:
        den = root.q2 * (sol.D * root.q + v) ** 2 + sol.K
        if den == 0:
            raise SingularityError(f"q^2 (Dq+v)^2 + K vanishes on branch {root.branch}")
        phi = root.q / den
        out.append(PhiValue(root.branch, root.q, phi, phi > 0))
    return out


def admissible_branches(C: float, D: float, K: float, points: PointSample) -> list[str]:
    """
    Branches that give a real root and ``phi > 0`` at every point.

    Each labelled branch is a continuous function of ``u`` wherever its root
    exists, so this is the whole selection rule.
    """
    u = np.ravel(points.r**2 - points.s**2)
    v = np.ravel(points.s)
    good = []
    for br in BRANCHES:
        ok = True
        for ui, vi in zip(u, v):
            vals = [pv for pv in phi_from_q(solve_q(ui, C, D, K), vi) if pv.branch == br]
            if not vals or not vals[0].admissible:
                ok = False
                break
        if ok:
            good.append(br)
    return good


# --- the full suite -----------------------------------------------------------


@dataclass(frozen=True)
class SuiteConfig:
    grid: Grid = Grid()
    tol: float = DEFAULT_TOL
    identity_tol: float = 1e-9
    K: float | None = None
    seed: int = 42
    identity_points: int = 20
    order: int = 7

    def __post_init__(self):
        if not 0 < self.tol < 1:
            raise UsageError(f"tolerance must lie in (0, 1), got {self.tol}")

    def to_dict(self) -> dict:
        return {"tol": self.tol, "identity_tol": self.identity_tol, "K": self.K, "seed": self.seed,
                "identity_points": self.identity_points, "order": self.order,
                "grid": {"nr": self.grid.nr, "ns": self.grid.ns, "r_min": self.grid.r_min,
                         "rho": self.grid.rho, "delta": self.grid.delta}}


@dataclass
class VerificationReport:
    spec: dict
    config: dict
    grid: dict
    K: float | None
    K_source: str
    K_hat: dict
    domain: dict
    checks: list[CheckResult]
    schema_version: int = SCHEMA_VERSION

    @property
    def verdicts(self) -> dict:
        return {c.name: c.passed for c in self.checks}

    @property
    def passed(self) -> bool:
        return all(v for v in self.verdicts.values() if v is not None)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "spec": self.spec,
            "config": self.config,
            "grid": self.grid,
            "K": self.K,
            "K_source": self.K_source,
            "K_hat": self.K_hat,
            "domain": self.domain,
            "checks": [c.to_dict() for c in self.checks],
            "verdicts": self.verdicts,
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "VerificationReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise UsageError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(d["spec"], d["config"], d["grid"], d["K"], d["K_source"], d["K_hat"],
                   d["domain"], [CheckResult.from_dict(c) for c in d["checks"]], d["schema_version"])

    def to_csv(self) -> str:
        """Per-point residuals: one row per (point, check part)."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["r", "s", "check", "residual"])
        for c in self.checks:
            for p in c.parts:
                if p.values is None or p.points is None:
                    continue
                for r, s, v in zip(np.ravel(p.points.r), np.ravel(p.points.s), p.values):
                    w.writerow([repr(float(r)), repr(float(s)), f"{c.name}.{p.name}", repr(float(v))])
        return buf.getvalue()

    def to_text(self) -> str:
        lines = [
            f"metric   {self.spec['family']} {self.spec['params']}  n={self.spec['n']}  rho={self.spec['rho']:.6g}",
            f"grid     {self.grid.get('nr')}x{self.grid.get('ns')}  r in [{self.grid.get('r_min', float('nan')):.4g}, "
            f"{self.grid.get('r_max', float('nan')):.6g}]  delta={self.grid.get('delta')}",
            f"config   tol={self.config['tol']:g}  seed={self.config['seed']}  K={self.K} ({self.K_source})",
            f"K_hat    mean={self.K_hat.get('mean', float('nan')):.12g}  spread={self.K_hat.get('spread', float('nan')):.3g}",
            "",
            f"{'check':<24}{'status':<16}{'max':>12}{'mean':>12}{'tol':>10}  argmax (r, s)",
        ]
        for c in self.checks:
            verdict = {True: "PASS", False: "FAIL", None: "n/a"}[c.passed]
            mx = "" if c.max_residual is None else f"{c.max_residual:.3e}"
            mn = "" if c.mean_residual is None else f"{c.mean_residual:.3e}"
            am = "" if c.argmax is None else f"({c.argmax[0]:.4f}, {c.argmax[1]:.4f})"
            lines.append(f"{c.name:<24}{verdict:<16}{mx:>12}{mn:>12}{c.tolerance:>10.0e}  {am}")
            if c.message:
                lines.append(f"    {c.message}")
        lines.append("")
        lines.append("OVERALL  " + ("PASS" if self.passed else "FAIL"))
        return "\n".join(lines) + "\n"


def _guarded(name: str, tol: float, fn) -> CheckResult:
    try:
        return fn()
    except PreconditionError as exc:
        return CheckResult(name, tol, status="not_applicable", message=str(exc))
    except (FinslerLabError, ArithmeticError) as exc:
        return CheckResult(name, tol, status="error", message=f"{type(exc).__name__}: {exc}")


def run_suite(spec: MetricSpec, config: SuiteConfig | None = None) -> VerificationReport:
    """
    Every applicable check on the configured grid, collected in one report.

    ``K`` defaults to the catalog's value; for profiles without one the grid
    mean of ``R1/phi^2`` is used.  Output is a deterministic function of
    ``(spec, config)``.
    """
    config = SuiteConfig() if config is None else config
    ev = evaluate_grid(spec, config.grid, config.order)
    k_hat = ev.bundle.K_hat.astype(float)
    k_hat_stats = {"mean": float(np.mean(k_hat)), "spread": float(np.max(k_hat) - np.min(k_hat))}
    if config.K is not None:
        K, source = float(config.K), "user"
    elif spec.K_target is not None:
        K, source = float(spec.K_target), "catalog"
    else:
        K, source = k_hat_stats["mean"], "estimated"
    tol = config.tol
    checks = [
        _guarded("thm1_1", tol, lambda: verify_constant_ricci(spec, K, tol=tol, evaluation=ev)),
        _guarded("thm1_2", tol, lambda: verify_constant_flag(spec, K, tol=tol, evaluation=ev)),
        _guarded("thm1_3", tol, lambda: verify_einstein_tensor(spec, K, tol=tol, evaluation=ev)),
        _guarded("thm1_4", tol, lambda: verify_thm14(spec, tol=tol, evaluation=ev)),
        _guarded("lemma2_4", tol, lambda: verify_chi_zero(spec, tol=tol, evaluation=ev)),
        _guarded("lemma2_5", tol, lambda: verify_h_zero(spec, tol=tol, evaluation=ev)),
        _guarded("pde1", tol, lambda: verify_projective_Q0(spec, tol=tol, evaluation=ev)),
        _guarded("pde2", tol, lambda: verify_pde2(spec, tol=tol, evaluation=ev)),
        _guarded("ode_uv", tol, lambda: verify_ode_uv(spec, K, tol=tol, evaluation=ev)),
    ]
    rng = np.random.default_rng(config.seed)
    checks.extend(identity_checks(ev, rng, config.identity_points, config.identity_tol))
    domain = {"rho": spec.radius}
    try:
        domain["feasible_rho"] = feasible_radius(spec, spec.radius)
    except FinslerLabError as exc:  # pragma: no cover - prescan never raises by design
        domain["feasible_rho"] = None
        domain["message"] = str(exc)
    return VerificationReport(
        spec=spec.to_dict(),
        config=config.to_dict(),
        grid=config.grid.describe(spec),
        K=K,
        K_source=source,
        K_hat=k_hat_stats,
        domain=domain,
        checks=checks,
    )


# --- formulas versus the generic oracle -----------------------------------------


@dataclass
class OracleReport:
    spec: dict
    npoints: int
    seed: int
    need: str
    checks: list[CheckResult]
    schema_version: int = SCHEMA_VERSION

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {"schema_version": self.schema_version, "spec": self.spec, "npoints": self.npoints,
                "seed": self.seed, "need": self.need, "checks": [c.to_dict() for c in self.checks],
                "pass": self.passed}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def to_text(self) -> str:
        lines = [f"metric   {self.spec['family']} {self.spec['params']}  n={self.spec['n']}",
                 f"config   points={self.npoints}  seed={self.seed}  depth={self.need}", "",
                 f"{'comparison':<16}{'status':<8}{'max rel diff':>14}{'tol':>10}"]
        for c in self.checks:
            lines.append(f"{c.name:<16}{'PASS' if c.passed else 'FAIL':<8}{c.max_residual:>14.3e}{c.tolerance:>10.0e}")
        lines += ["", "OVERALL  " + ("PASS" if self.passed else "FAIL")]
        return "\n".join(lines) + "\n"


def random_points(spec: MetricSpec, npoints: int, rng: np.random.Generator):
    """Random ``(r, s)`` well inside the domain, with random frames and ``|y|``."""
    rho = spec.radius
    lo = max(spec.r_min, 0.05 * rho)
    r = rng.uniform(lo, 0.9 * rho, npoints)
    s = r * rng.uniform(-0.95, 0.95, npoints)
    ynorm = rng.uniform(0.5, 2.0, npoints)
    x, y = frame_from_rs(r, s, spec.n, rng, ynorm)
    return PointSample(r, s), x, y, ynorm


def oracle_equivalence(spec: MetricSpec, npoints: int = 20, seed: int = 42, tol: float = 1e-6,
                       need: str = "H") -> OracleReport:
    """
    Reduced formulas against curvature computed from ``F`` alone.

    Differences are divided by ``phi^2 |y|^d`` with ``d`` the homogeneity
    degree of the object in ``y`` (2 for ``R`` and ``Ric``, 1 for ``chi``,
    0 for ``H`` and ``Ric_ij``).  ``need`` is ``"R"``, ``"chi"`` or ``"H"``.
    """
    if need not in ("R", "chi", "H"):
        raise UsageError(f"need must be R, chi or H, got {need!r}")
    rng = np.random.default_rng(seed)
    pts, x, y, ynorm = random_points(spec, npoints, rng)
    b = evaluate_grid(spec, pts).bundle
    spray = oracle_at(spec, x, y, need)
    phi2 = b.phi.value.astype(float) ** 2

    def rel(name, formula, oracle, degree):
        diff = np.abs(np.asarray(formula, float) - oracle)
        diff = diff.reshape(npoints, -1).max(axis=-1)
        return CheckResult(name, tol, [Residual.from_values(name, diff / (phi2 * ynorm**degree), pts)])

    R = riemann_curvature(spray)
    checks = [
        rel("riemann", assemble_riemann(b, x, y), R, 2),
        rel("ricci_trace", compute_ricci(b, ynorm), np.trace(R, axis1=-2, axis2=-1), 2),
    ]
    if need in ("chi", "H"):
        checks.append(rel("chi", compute_chi(b, x, y), chi_from_riemann(spray).value, 1))
    if need == "H":
        checks.append(rel("H", compute_H(b, x, y), h_from_chi(spray), 0))
        hess = ricci_hessian(spray)
        checks.append(rel("ricci_tensor", compute_ricci_tensor(b, x, y), hess + h_from_chi(spray), 0))
    return OracleReport(spec.to_dict(), npoints, seed, need, checks)
