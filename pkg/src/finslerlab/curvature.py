"""
Reduced curvature of ``F = |y| phi(r, s)``.

Everything stays a :class:`~finslerlab.jets.Jet2` in ``(r, s)`` until the
very end, so s-derivatives such as ``[R1]_s``, ``[R2]_s`` and ``[R2]_ss`` are
exact rather than finite-differenced.  Each stage costs jet order:

=================  =========================
quantity           minimum order of ``phi``
=================  =========================
P, Q               2
R1, R2, R3         4
R4, chi, Ric       5
H, Ric_ij, M_s     6
=================  =========================

All functions accept batched points (``PointSample`` with array ``r, s``);
matrices and vectors then carry the batch shape in front.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .catalog import MetricSpec, PointSample, eval_phi
from .errors import DegenerateMetricError, PreconditionError, UsageError
from .jets import Jet2

__all__ = [
    "CurvatureBundle",
    "compute_PQ",
    "compute_R123",
    "compute_R4",
    "compute_bundle",
    "bundle_for",
    "assemble_riemann",
    "compute_ricci",
    "compute_chi",
    "compute_H",
    "compute_ricci_tensor",
    "compute_psi_reduced",
    "ReducedQuantities",
    "q_numerator",
]

Q0_TOL = 1e-8


def _rs(p: PointSample, order: int) -> tuple[Jet2, Jet2]:
    return Jet2.seed_rs(p.r, p.s, order)


def q_numerator(phi: Jet2, p: PointSample) -> np.ndarray:
    """``s phi_rs + r phi_ss - phi_r`` at the point (zero iff ``Q = 0``)."""
    return p.s * phi.partial((1, 1)) + p.r * phi.partial((0, 2)) - phi.partial((1, 0))


def compute_PQ(phi: Jet2, p: PointSample) -> tuple[Jet2, Jet2]:
    """Jets of ``P`` and ``Q``, two orders below ``phi``."""
    if phi.order < 2:
        raise UsageError(f"P and Q need phi to order >= 2, got {phi.order}")
    r, s = _rs(p, phi.order)
    phi_r = phi.diff(0)
    phi_s = phi.diff(1)
    phi_rs = phi_r.diff(1)
    phi_ss = phi_s.diff(1)
    u = r * r - s * s
    den = phi - s * phi_s + u * phi_ss
    if np.any(den.value <= 0):
        i = np.flatnonzero(np.ravel(den.value <= 0))[0]
        raise DegenerateMetricError(
            f"phi - s phi_s + (r^2-s^2) phi_ss <= 0 at r={np.ravel(p.r)[i]:.6g}, s={np.ravel(p.s)[i]:.6g}"
        )
    Q = (s * phi_rs + r * phi_ss - phi_r) / (2 * r * den)
    P = (s * phi_r + r * phi_s) / (2 * r * phi) - Q / phi * (s * phi + u * phi_s)
    return P, Q


def compute_R123(P: Jet2, Q: Jet2, p: PointSample) -> tuple[Jet2, Jet2, Jet2]:
    """``R1, R2, R3`` as jets two orders below ``P`` and ``Q``."""
    order = min(P.order, Q.order)
    if order < 2:
        raise UsageError(f"R1..R3 need P and Q to order >= 2, got {order}")
    r, s = _rs(p, order)
    u = r * r - s * s
    P_r, P_s = P.diff(0), P.diff(1)
    Q_r, Q_s = Q.diff(0), Q.diff(1)
    Q_rs, Q_ss = Q_r.diff(1), Q_s.diff(1)
    W = 1 + s * P + u * P_s

    R1 = P * P - (s * P_r + r * P_s) / r + 2 * Q * W
    R2 = (
        (2 * Q_r - s * Q_rs - r * Q_ss) / r
        + 2 * Q * (2 * Q - s * Q_s)
        + u * (2 * Q * Q_ss - Q_s * Q_s)
    )
    R3 = (P_r - s * P_r.diff(1) - r * P_s.diff(1)) / r + 2 * Q * W.diff(1)
    return R1, R2, R3


def compute_R4(R1: Jet2, R3: Jet2) -> Jet2:
    """``R4 = (3 R3 - [R1]_s) / 2``."""
    if R1.order < 1:
        raise UsageError("R4 needs [R1]_s; R1 must have order >= 1 (phi order >= 5)")
    return 0.5 * (3 * R3 - R1.diff(1))


@dataclass(frozen=True)
class CurvatureBundle:
    """
    Reduced curvature quantities at one or many points ``(r, s)``.

    ``M`` and its s-derivative are plain arrays; ``M_s`` and ``R2_ss`` are
    ``None`` when ``phi`` was expanded to less than order 6.
    """

    r: np.ndarray
    s: np.ndarray
    n: int
    phi: Jet2
    P: Jet2
    Q: Jet2
    psi: Jet2
    R1: Jet2
    R2: Jet2
    R3: Jet2
    R4: Jet2
    M: np.ndarray
    M_s: np.ndarray | None
    R1_s: np.ndarray
    R2_s: np.ndarray
    R2_ss: np.ndarray | None

    @property
    def point(self) -> PointSample:
        return PointSample(self.r, self.s)

    @property
    def K_hat(self) -> np.ndarray:
        """Pointwise curvature estimate ``R1 / phi^2``."""
        return self.R1.value / self.phi.value**2

    def to_records(self) -> list[dict]:
        """One JSON-ready dict per point: ``r, s, P, Q, psi, R1..R4, M, K_hat``."""
        cols = {
            "r": self.r, "s": self.s, "phi": self.phi.value,
            "P": self.P.value, "Q": self.Q.value, "psi": self.psi.value,
            "R1": self.R1.value, "R2": self.R2.value, "R3": self.R3.value, "R4": self.R4.value,
            "M": self.M, "K_hat": self.K_hat,
        }
        flat = {k: np.ravel(v) for k, v in cols.items()}
        size = flat["r"].size
        return [{k: float(v[i]) for k, v in flat.items()} for i in range(size)]


def compute_bundle(phi: Jet2, p: PointSample, n: int) -> CurvatureBundle:
    """Run the whole reduced pipeline for a ``phi`` jet of order >= 5."""
    if phi.order < 5:
        raise UsageError(f"a curvature bundle needs phi to order >= 5, got {phi.order}")
    P, Q = compute_PQ(phi, p)
    R1, R2, R3 = compute_R123(P, Q, p)
    R4 = compute_R4(R1, R3)
    r, s = _rs(p, phi.order)
    psi = (s * phi.diff(0) + r * phi.diff(1)) / (2 * r * phi)
    M = -0.5 * ((n + 1) * R3 + (r * r - s * s) * R2.diff(1))
    deep = M.order >= 1
    return CurvatureBundle(
        r=p.r, s=p.s, n=n, phi=phi, P=P, Q=Q, psi=psi,
        R1=R1, R2=R2, R3=R3, R4=R4,
        M=M.value,
        M_s=M.partial((0, 1)) if deep else None,
        R1_s=R1.partial((0, 1)),
        R2_s=R2.partial((0, 1)),
        R2_ss=R2.partial((0, 2)) if R2.order >= 2 else None,
    )


def bundle_for(spec: MetricSpec, p: PointSample, order: int = 7, validate: bool = True) -> CurvatureBundle:
    """Evaluate ``phi`` from the catalog and build its curvature bundle."""
    return compute_bundle(eval_phi(spec, p, order, validate=validate), p, spec.n)


# --- tensors at (x, y) ---------------------------------------------------


def _frame(bundle: CurvatureBundle, x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    if x.shape != y.shape or x.shape[-1] != bundle.n:
        raise UsageError(f"x and y must have matching trailing dimension n={bundle.n}")
    ynorm = np.linalg.norm(y, axis=-1)
    r = np.linalg.norm(x, axis=-1)
    s = np.sum(x * y, axis=-1) / ynorm
    tol = 1e-12 * np.maximum(1.0, r)
    if np.any(np.abs(r - bundle.r) > tol) or np.any(np.abs(s - bundle.s) > tol):
        raise UsageError("(x, y) does not match the bundle's (r, s)")
    A = ynorm[..., None] * x - bundle.s[..., None] * y
    return x, y, ynorm, A


def assemble_riemann(bundle: CurvatureBundle, x, y) -> np.ndarray:
    """
    The matrix ``R^i_j`` (row ``i``, column ``j``)::

        R1 (|y|^2 delta - y y^T) + |y| R2 x A^T + R4 y A^T,   A = |y| x - s y
    """
    x, y, ynorm, A = _frame(bundle, x, y)
    n = bundle.n
    yy = ynorm[..., None, None] ** 2 * np.eye(n) - y[..., :, None] * y[..., None, :]
    R1, R2, R4 = (q.value[..., None, None] for q in (bundle.R1, bundle.R2, bundle.R4))
    return (
        R1 * yy
        + ynorm[..., None, None] * R2 * x[..., :, None] * A[..., None, :]
        + R4 * y[..., :, None] * A[..., None, :]
    )


def compute_ricci(bundle: CurvatureBundle, ynorm=1.0) -> np.ndarray:
    """``Ric = (n-1)|y|^2 R1 + (r^2-s^2)|y|^2 R2``."""
    ynorm = np.asarray(ynorm, float)
    u = bundle.r**2 - bundle.s**2
    return ynorm**2 * ((bundle.n - 1) * bundle.R1.value + u * bundle.R2.value)


def compute_chi(bundle: CurvatureBundle, x, y) -> np.ndarray:
    """``chi_i = M (|y| x^i - s y^i)``."""
    _, _, _, A = _frame(bundle, x, y)
    return bundle.M[..., None] * A


def _need_deep(bundle: CurvatureBundle, what: str) -> None:
    if bundle.M_s is None:
        raise UsageError(f"{what} needs M_s, i.e. phi expanded to order >= 6")


def compute_H(bundle: CurvatureBundle, x, y) -> np.ndarray:
    """``H_ij = M_s |y|^-2 A_i A_j - s M |y|^-2 (|y|^2 delta_ij - y_i y_j)``."""
    _need_deep(bundle, "H")
    _, y, ynorm, A = _frame(bundle, x, y)
    n = bundle.n
    w2 = ynorm[..., None, None] ** 2
    yy = w2 * np.eye(n) - y[..., :, None] * y[..., None, :]
    return (
        bundle.M_s[..., None, None] * A[..., :, None] * A[..., None, :] / w2
        - (bundle.s * bundle.M)[..., None, None] * yy / w2
    )


def compute_ricci_tensor(bundle: CurvatureBundle, x, y) -> np.ndarray:
    """
    ``Ric_ij = Ric_{y^i y^j} / 2 + H_ij``.

    With ``Ric = |y|^2 f(r, s)`` and ``ds/dy^i = A_i/|y|^2`` the y-Hessian is::

        2 f delta + f_ss A A^T/|y|^2 + f_s [(x y^T + y x^T)/|y| - s y y^T/|y|^2 - s delta]
    """
    _need_deep(bundle, "Ric_ij")
    x, y, ynorm, A = _frame(bundle, x, y)
    n = bundle.n
    r, s = _rs(bundle.point, bundle.R1.order)
    f = (n - 1) * bundle.R1 + (r * r - s * s) * bundle.R2
    f0 = f.value[..., None, None]
    f_s = f.partial((0, 1))[..., None, None]
    f_ss = f.partial((0, 2))[..., None, None]
    w = ynorm[..., None, None]
    sv = bundle.s[..., None, None]
    eye = np.eye(n)
    xy = x[..., :, None] * y[..., None, :]
    hess = (
        2 * f0 * eye
        + f_ss * A[..., :, None] * A[..., None, :] / w**2
        + f_s * ((xy + np.swapaxes(xy, -1, -2)) / w - sv * y[..., :, None] * y[..., None, :] / w**2 - sv * eye)
    )
    return 0.5 * hess + compute_H(bundle, x, y)


@dataclass(frozen=True)
class ReducedQuantities:
    psi: Jet2
    R1: Jet2
    R3: Jet2
    R4: Jet2


def compute_psi_reduced(phi: Jet2, p: PointSample, tol: float = Q0_TOL) -> ReducedQuantities:
    """
    Simplified ``R1, R3, R4`` for projectively flat profiles (``Q = 0``).

    Raises :class:`PreconditionError` unless ``|s phi_rs + r phi_ss - phi_r|``
    is at most ``tol * max(1, |phi_r|)`` at every point.
    """
    if phi.order < 4:
        raise UsageError(f"reduced quantities need phi to order >= 4, got {phi.order}")
    num = np.abs(q_numerator(phi, p))
    scale = np.maximum(1.0, np.abs(phi.partial((1, 0))))
    if np.any(num > tol * scale):
        raise PreconditionError(
            f"Q is not negligible (max |numerator|/scale = {np.max(num / scale):.3g} > {tol:g})"
        )
    r, s = _rs(p, phi.order)
    psi = (s * phi.diff(0) + r * phi.diff(1)) / (2 * r * phi)
    psi_r, psi_s = psi.diff(0), psi.diff(1)
    psi_rs, psi_ss = psi_r.diff(1), psi_s.diff(1)
    R1 = psi * psi - (s * psi_r + r * psi_s) / r
    R3 = (psi_r - s * psi_rs - r * psi_ss) / r
    R4 = (2 * psi_r - r * psi * psi_s - s * psi_rs - r * psi_ss) / r
    return ReducedQuantities(psi=psi, R1=R1, R3=R3, R4=R4)
