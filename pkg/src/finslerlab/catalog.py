"""
Closed-form profiles ``phi(r, s)`` of spherically symmetric metrics.

Every family is written once as an expression in ``r`` and ``s`` that works
unchanged on floats, numpy arrays, and jets.  :func:`eval_phi` feeds it
seeded :class:`~finslerlab.jets.Jet2` variables; :func:`eval_F_jet` composes
the result with ``r = |x|`` and ``s = <x, y>/|y|`` to get ``F`` as a jet in
all ``2n`` coordinates.

Two families need an orientation sign.  As printed, the ``K = 0`` profile
carries a factor ``D`` and the ``K = -1`` profile is the difference of two
Funk-type terms whose order depends on the sign of ``D``; for half of the
parameter plane they are negative everywhere.  The catalog multiplies them by
the constant sign that makes ``phi > 0``.  ``P``, ``Q`` and all ``R_i`` are
invariant under ``phi -> -phi``, so curvature results are unaffected.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .errors import DegenerateMetricError, DomainError, UsageError
from .jets import Jet, Jet2, JetN, sqrt

__all__ = [
    "MetricSpec",
    "PointSample",
    "FAMILIES",
    "eval_phi",
    "eval_F_jet",
    "list_catalog",
    "feasible_radius",
    "DEFAULT_R_MIN",
    "convexity_denominator",
]

DEFAULT_R_MIN = 1e-3
_BALL = 1.0 - 1e-3


def _root(x, label: str):
    try:
        return sqrt(x)
    except DomainError as exc:
        raise DomainError(f"sqrt({label}): {exc}") from None


def _check_real_root(x, label: str):
    """Domain check for plain arrays, where numpy would silently return nan."""
    if not isinstance(x, Jet) and np.any(np.asarray(x) <= 0):
        raise DomainError(f"sqrt({label}): argument not positive")
    return _root(x, label)


# --- family expressions --------------------------------------------------


def _euclidean(r, s, p):
    return 0.0 * r + 1.0


def _klein(r, s, p):
    return _check_real_root(1 - r * r + s * s, "1-r^2+s^2") / (1 - r * r)


def _proj_sphere(r, s, p):
    return _check_real_root(1 + r * r - s * s, "1+r^2-s^2") / (1 + r * r)


def _funk(r, s, p):
    return (_check_real_root(1 - (r * r - s * s), "1-(r^2-s^2)") + s) / (1 - r * r)


def _berwald(r, s, p):
    w = _check_real_root(1 - (r * r - s * s), "1-(r^2-s^2)")
    return (w + s) * (w + s) / ((1 - r * r) * (1 - r * r) * w)


def _shen(r, s, p):
    e = p["eps"]
    u = r * r - s * s
    first = (_check_real_root(1 - u, "1-(r^2-s^2)") + s) / (1 - r * r)
    second = e * (_check_real_root(1 - e * e * u, "1-eps^2(r^2-s^2)") + e * s) / (1 - e * e * r * r)
    return 0.5 * (first - second)


def _soln1(r, s, p):
    w = _check_real_root(p["C"] - r * r + s * s, "C-r^2+s^2")
    return 1.0 / (2.0 * math.sqrt(-p["K"])) / (w + s)


def _soln_k0(r, s, p):
    D = p["D"]
    w = _check_real_root(p["C"] - r * r + s * s, "C-r^2+s^2")
    return math.copysign(1.0, D) * D / (w * (w - s) * (w - s))


def _soln_km1(r, s, p):
    C, D = p["C"], p["D"]
    w_plus = _check_real_root(C + 2 * D - r * r + s * s, "C+2D-r^2+s^2")
    w_minus = _check_real_root(C - 2 * D - r * r + s * s, "C-2D-r^2+s^2")
    return -math.copysign(1.0, D) * 0.5 * (1 / (w_plus - s) - 1 / (w_minus - s))


def _bryant(r, s, p):
    # Re(i / (sqrt(C + 2iD - r^2 + s^2) - s)), principal branch, sign(D) orientation
    z = _root(p["C"] + 2j * p["D"] - r * r + s * s, "C+2iD-r^2+s^2")
    if not isinstance(z, Jet):
        z = np.asarray(z)
    return math.copysign(1.0, p["D"]) * (1j / (z - s)).real


def _bryant_printed(r, s, p):
    # Re(1 / (sqrt(C + 2iD - r^2 + s^2) - i s)) exactly as typeset; not of constant curvature
    z = _root(p["C"] + 2j * p["D"] - r * r + s * s, "C+2iD-r^2+s^2")
    if not isinstance(z, Jet):
        z = np.asarray(z)
    return (1 / (z - 1j * s)).real


def _soln_family(r, s, p):
    C, D, K = p["C"], p["D"], p["K"]
    branch = p["branch"]
    u = r * r - s * s
    if D == 0:
        q2 = K / (u - C)
    else:
        w = C - u
        root = _check_real_root(w * w + 4 * D * D * K, "(C-u)^2+4D^2K")
        q2 = (w + root) / (2 * D * D) if branch[0] == "+" else (w - root) / (2 * D * D)
    q = _check_real_root(q2, "q^2")
    if branch[1] == "-":
        q = -q
    t = D * q + s
    return q / (q * q * t * t + K)


def _test_poly(r, s, p):
    return 1.0 + p["a"] * s + p["b"] * r * r


def _validate_shen(p):
    if not -1.0 <= p["eps"] < 1.0:
        raise UsageError(f"shen requires -1 <= eps < 1, got {p['eps']}")


def _validate_soln1(p):
    if not p["K"] < 0:
        raise UsageError(f"soln1 requires K < 0, got {p['K']}")
    if not p["C"] > 0:
        raise UsageError(f"soln1 requires C > 0, got {p['C']}")


def _validate_cd(p):
    if p["D"] == 0:
        raise UsageError("this family requires D != 0")
    if not p["C"] > 0:
        raise UsageError(f"this family requires C > 0, got {p['C']}")


def _validate_km1(p):
    _validate_cd(p)
    if not p["C"] > 2 * abs(p["D"]):
        raise UsageError("soln_km1 requires C > 2|D| so that both square roots exist near r = 0")


def _validate_family(p):
    if p["branch"] not in ("++", "+-", "-+", "--"):
        raise UsageError(f"branch must be one of ++, +-, -+, --; got {p['branch']!r}")


@dataclass(frozen=True)
class Family:
    name: str
    expr: Callable
    defaults: Mapping[str, object]
    K_target: Callable[[Mapping], float | None]
    default_rho: Callable[[Mapping], float] | None  # None: pre-scan up to the unit ball
    note: str
    validate: Callable[[Mapping], None] = lambda p: None
    projectively_flat: bool = True


FAMILIES: dict[str, Family] = {
    f.name: f
    for f in [
        Family("euclidean", _euclidean, {}, lambda p: 0.0, lambda p: _BALL,
               "Riemannian baseline phi = 1"),
        Family("klein", _klein, {}, lambda p: -1.0, lambda p: _BALL,
               "Riemannian baseline, Klein model of hyperbolic space"),
        Family("proj_sphere", _proj_sphere, {}, lambda p: 1.0, lambda p: _BALL,
               "Riemannian baseline, round sphere in a gnomonic chart"),
        Family("funk", _funk, {}, lambda p: -0.25, lambda p: _BALL,
               "Funk metric on the unit ball"),
        Family("berwald", _berwald, {}, lambda p: 0.0, lambda p: _BALL,
               "Berwald's projectively flat metric with zero flag curvature"),
        Family("shen", _shen, {"eps": 0.5}, lambda p: -1.0, lambda p: _BALL,
               "Shen's projectively flat family, -1 <= eps < 1", _validate_shen),
        Family("soln1", _soln1, {"C": 1.0, "K": -1.0}, lambda p: p["K"],
               lambda p: math.sqrt(p["C"]) * _BALL,
               "scaled reverse Funk metric on the ball of radius sqrt(C)", _validate_soln1),
        Family("soln_family", _soln_family, {"C": 2.0, "D": -0.5, "K": -1.0, "branch": "++"},
               lambda p: p["K"], None,
               "implicit solution q/(q^2 (Dq+v)^2 + K) with q from the biquadratic; "
               "branch = (sign of the discriminant root, sign of q)", _validate_family),
        Family("soln_k0", _soln_k0, {"C": 2.0, "D": 0.5}, lambda p: 0.0,
               lambda p: math.sqrt(p["C"]) * _BALL,
               "K = 0 solution (Berwald type); oriented so that phi > 0", _validate_cd),
        Family("soln_km1", _soln_km1, {"C": 2.0, "D": 0.5}, lambda p: -1.0,
               lambda p: math.sqrt(p["C"] - 2 * abs(p["D"])) * _BALL,
               "K = -1 solution (Shen type); oriented so that phi > 0", _validate_km1),
        Family("bryant", _bryant, {"C": 1.0, "D": 0.3}, lambda p: 1.0, None,
               "Bryant metric Re(i/(sqrt(C+2iD-r^2+s^2) - s)), principal branch", _validate_cd),
        Family("bryant_printed", _bryant_printed, {"C": 1.0, "D": 0.3}, lambda p: None, None,
               "Re(1/(sqrt(C+2iD-r^2+s^2) - i s)); neither projectively flat nor of constant "
               "curvature, kept for comparison with the corrected bryant entry",
               _validate_cd, projectively_flat=False),
        Family("test_poly", _test_poly, {"a": 0.1, "b": 0.05}, lambda p: None, lambda p: 0.8,
               "non-constant-curvature test profile 1 + a s + b r^2", projectively_flat=False),
    ]
}


@dataclass(frozen=True)
class PointSample:
    """Sample point(s) ``(r, s)``; both may be equal-shaped arrays."""

    r: np.ndarray | float
    s: np.ndarray | float

    def __post_init__(self):
        r, s = np.broadcast_arrays(np.asarray(self.r, float), np.asarray(self.s, float))
        object.__setattr__(self, "r", r)
        object.__setattr__(self, "s", s)

    @property
    def shape(self) -> tuple:
        return self.r.shape

    @classmethod
    def from_xy(cls, x, y) -> "PointSample":
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        ynorm = np.linalg.norm(y, axis=-1)
        if np.any(ynorm == 0):
            raise DomainError("direction y must be non-zero")
        return cls(np.linalg.norm(x, axis=-1), np.sum(x * y, axis=-1) / ynorm)


@dataclass(frozen=True)
class MetricSpec:
    """
    One catalog entry with concrete parameters.

    ``family="callback"`` accepts ``phi_fn(r, s)``, an expression that must
    work on jets (use :func:`finslerlab.jets.sqrt`).  It exists for tests.
    """

    family: str
    params: Mapping[str, object] = field(default_factory=dict)
    n: int = 3
    rho: float | None = None
    r_min: float = DEFAULT_R_MIN
    phi_fn: Callable | None = field(default=None, compare=False)
    K_callback: float | None = None

    def __post_init__(self):
        if self.n < 2:
            raise UsageError(f"dimension n must be >= 2, got {self.n}")
        if self.family == "callback":
            if self.phi_fn is None:
                raise UsageError("callback family needs phi_fn")
        elif self.family not in FAMILIES:
            raise UsageError(f"unknown family {self.family!r}; known: {sorted(FAMILIES)}")
        else:
            fam = FAMILIES[self.family]
            unknown = set(self.params) - set(fam.defaults)
            if unknown:
                raise UsageError(f"unknown parameters for {self.family}: {sorted(unknown)}")
            merged = {**fam.defaults, **self.params}
            object.__setattr__(self, "params", merged)
            fam.validate(merged)
        if self.rho is not None and not self.rho > 0:
            raise UsageError(f"rho must be positive, got {self.rho}")
        if not 0 < self.r_min < (self.rho if self.rho is not None else 1.0):
            raise UsageError(f"need 0 < r_min < rho, got r_min={self.r_min}, rho={self.radius}")

    @property
    def radius(self) -> float:
        if self.rho is not None:
            return float(self.rho)
        if self.family == "callback":
            return _BALL
        rule = FAMILIES[self.family].default_rho
        if rule is None:
            return _prescanned_rho(self.family, tuple(sorted(self.params.items())))
        return float(rule(self.params))

    @property
    def K_target(self) -> float | None:
        if self.family == "callback":
            return self.K_callback
        return FAMILIES[self.family].K_target(self.params)

    @property
    def projectively_flat(self) -> bool | None:
        if self.family == "callback":
            return None
        return FAMILIES[self.family].projectively_flat

    def phi_expr(self, r, s):
        if self.family == "callback":
            return self.phi_fn(r, s)
        return FAMILIES[self.family].expr(r, s, self.params)

    def with_n(self, n: int) -> "MetricSpec":
        return MetricSpec(self.family, dict(self.params), n, self.rho, self.r_min, self.phi_fn, self.K_callback)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "n": self.n,
            "rho": self.radius,
            "K_target": self.K_target,
        }


def _check_domain(spec: MetricSpec, p: PointSample) -> None:
    r, s = p.r, p.s
    bad = (r < spec.r_min) | (r >= spec.radius) | (np.abs(s) > r) | ~np.isfinite(r) | ~np.isfinite(s)
    if np.any(bad):
        i = np.flatnonzero(bad.ravel())[0]
        raise DomainError(
            f"point (r={r.ravel()[i]:.6g}, s={s.ravel()[i]:.6g}) outside "
            f"r_min <= r < rho={spec.radius:.6g}, |s| <= r"
        )


def _first_bad(mask, p: PointSample) -> str:
    i = np.flatnonzero(np.asarray(mask).ravel())[0]
    return f"(r={p.r.ravel()[i]:.6g}, s={p.s.ravel()[i]:.6g})"


def _locate_domain_error(spec: MetricSpec, p: PointSample) -> str:
    for r, s in zip(np.ravel(p.r), np.ravel(p.s)):
        try:
            spec.phi_expr(*Jet2.seed_rs(r, s, 1))
        except DomainError:
            return f"(r={r:.6g}, s={s:.6g})"
    return "an unidentified point"


def eval_phi(spec: MetricSpec, p: PointSample, order: int = 7, validate: bool = True,
             dtype=float) -> Jet2:
    """
    Jet of ``phi`` at ``(r, s)`` to total degree ``order``.

    ``dtype=np.longdouble`` carries the jet in extended precision, which the
    ``1/r`` factors of the curvature formulas need near ``r_min``.

    With ``validate`` the point must lie in the metric's domain and the
    profile must satisfy ``phi > 0`` and ``phi - s phi_s + (r^2-s^2) phi_ss > 0``.
    """
    if validate:
        _check_domain(spec, p)
    r, s = Jet2.seed_rs(np.asarray(p.r, dtype), np.asarray(p.s, dtype), max(order, 1))
    try:
        phi = spec.phi_expr(r, s)
    except DomainError as exc:
        raise DomainError(f"{exc} at {_locate_domain_error(spec, p)}") from None
    if not isinstance(phi, Jet):
        phi = Jet2.constant(np.broadcast_to(phi, p.shape), order=r.order)
    if phi.scalar_kind == "complex":
        raise UsageError("profile evaluated to a complex jet; take the real part inside the expression")
    phi = phi.truncate(order)
    if validate:
        if np.any(~np.isfinite(phi.coeffs)):
            raise DomainError(f"non-finite profile value at {_first_bad(~np.isfinite(phi.coeffs).all(-1), p)}")
        if np.any(phi.value <= 0):
            raise DegenerateMetricError(f"phi <= 0 at {_first_bad(phi.value <= 0, p)}")
        if order >= 2:
            den = convexity_denominator(phi, p)
            if np.any(den <= 0):
                raise DegenerateMetricError(
                    f"phi - s phi_s + (r^2-s^2) phi_ss <= 0 at {_first_bad(den <= 0, p)}"
                )
    return phi


def convexity_denominator(phi: Jet2, p: PointSample) -> np.ndarray:
    """``phi - s phi_s + (r^2 - s^2) phi_ss`` at the expansion point."""
    return phi.value - p.s * phi.partial((0, 1)) + (p.r**2 - p.s**2) * phi.partial((0, 2))


def eval_F_jet(spec: MetricSpec, x, y, order: int = 4, validate: bool = True) -> JetN:
    """
    ``F(x, y) = |y| phi(|x|, <x,y>/|y|)`` as a jet in the ``2n`` variables ``(x, y)``.

    ``x`` and ``y`` have shape ``(..., n)``; variables ``0..n-1`` are ``x`` and
    ``n..2n-1`` are ``y``.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.shape[-1] != spec.n:
        raise UsageError(f"x and y must both have trailing dimension n={spec.n}")
    if np.any(np.linalg.norm(y, axis=-1) == 0):
        raise DomainError("direction y must be non-zero")
    n = spec.n
    z = JetN.variables(np.concatenate([x, y], axis=-1), order)
    xs, ys = z[..., :n], z[..., n:]
    r = (xs * xs).sum(axis=-1).sqrt()
    ynorm = (ys * ys).sum(axis=-1).sqrt()
    s = (xs * ys).sum(axis=-1) / ynorm
    phi = eval_phi(spec, PointSample(r.value, s.value), order, validate=validate)
    return ynorm * phi.compose(r, s)


def list_catalog() -> list[dict]:
    """Stable listing of the built-in families with their curvature constants."""
    out = []
    for name, fam in FAMILIES.items():
        K = fam.K_target(fam.defaults)
        if name in ("soln1", "soln_family"):
            K = "parameter K"
        out.append({
            "family": name,
            "params": dict(fam.defaults),
            "K_target": K,
            "note": fam.note,
        })
    return out


@functools.lru_cache(maxsize=256)
def _prescanned_rho(family: str, params: tuple) -> float:
    probe = MetricSpec(family, dict(params), rho=_BALL)
    rho = feasible_radius(probe, _BALL)
    if rho <= probe.r_min:
        raise DegenerateMetricError(f"{family}{dict(params)} is not a valid metric near r = r_min")
    return rho


def feasible_radius(spec: MetricSpec, rho_max: float | None = None, nr: int = 200, ns: int = 41) -> float:
    """
    Largest scanned radius up to which ``phi`` is defined, positive and convex.

    Scans ``r`` on a uniform grid in ``[r_min, rho_max)`` with ``ns`` values
    of ``s`` across ``[-r, r]``; returns the last radius before the first failure
    (``rho_max`` if none fails).
    """
    rho_max = spec.radius if rho_max is None else rho_max
    probe = MetricSpec(spec.family, dict(spec.params), spec.n, rho_max * 1.5 + 1.0, spec.r_min,
                       spec.phi_fn, spec.K_callback)
    rs = np.linspace(spec.r_min, rho_max, nr, endpoint=False)
    frac = np.linspace(-1.0, 1.0, ns)
    last_ok = spec.r_min
    for r in rs:
        p = PointSample(np.full(ns, r), r * frac)
        try:
            with np.errstate(all="ignore"):
                eval_phi(probe, p, order=2)
        except (DomainError, DegenerateMetricError, ZeroDivisionError):
            return float(last_ok)
        last_ok = r
    return float(rho_max)
