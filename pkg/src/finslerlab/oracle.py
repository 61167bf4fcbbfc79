"""
Curvature of a Finsler metric computed from ``F(x, y)`` alone.

Nothing here knows that ``F`` is spherically symmetric.  Starting from a
:class:`~finslerlab.jets.JetN` of ``F`` in the ``2n`` variables ``(x, y)``::

    g_ij  = 1/2 [F^2]_{y^i y^j}
    G^i   = 1/4 g^{il} ([F^2]_{x^m y^l} y^m - [F^2]_{x^l})
    R^i_k = 2 G^i_{x^k} - y^j G^i_{x^j y^k} + 2 G^j G^i_{y^j y^k} - G^i_{y^j} G^j_{y^k}
    chi_i = -1/6 (2 R^m_{i.m} + R^m_{m.i})

where ``.`` is the y-derivative.  Every object is kept as a jet so its own
derivatives remain available.  An ``F`` jet of order ``p`` yields ``G`` to
order ``p - 2`` and ``R`` to order ``p - 4``; ``R`` needs ``p >= 4``, ``chi``
``p >= 5`` and the ``H`` cross-check ``p >= 6``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .catalog import MetricSpec, eval_F_jet
from .errors import DegenerateMetricError, UsageError
from .jets import Jet, JetN

__all__ = [
    "SprayData",
    "ORDER_FOR",
    "fundamental_tensor",
    "spray_coefficients",
    "spray_data",
    "riemann_curvature",
    "chi_from_riemann",
    "h_from_chi",
    "ricci_hessian",
    "cfc_tensor_check",
    "oracle_at",
]

ORDER_FOR = {"R": 4, "chi": 5, "H": 6}
COND_WARN = 1e8


def _split(F: Jet) -> int:
    if F.nvars % 2:
        raise UsageError("F jet must have an even number of variables (x, y)")
    return F.nvars // 2


def _matmul(A: Jet, B: Jet) -> Jet:
    """Product of jet matrices with shapes (..., n, m) and (..., m, k)."""
    return (A[..., :, :, None] * B[..., None, :, :]).sum(axis=-2)


def _inverse(g: Jet) -> Jet:
    """Inverse of a jet-valued matrix via the Neumann series around its constant part."""
    n = g.shape[-1]
    g0 = g.value
    inv0 = np.linalg.inv(g0)
    X = -(np.einsum("...ij,...jkc->...ikc", inv0, (g - g0).coeffs))
    X = g._new(X)
    eye = np.broadcast_to(np.eye(n), g0.shape)
    S = g._new(np.zeros_like(g.coeffs)) + eye
    for _ in range(g.order):
        S = _matmul(X, S) + eye
    return g._new(np.einsum("...ijc,...jk->...ikc", S.coeffs, inv0))


def fundamental_tensor(F_jet: Jet) -> np.ndarray:
    """``g_ij = 1/2 [F^2]_{y^i y^j}`` at the expansion point."""
    return _g_jet(F_jet).value


def _g_jet(F: Jet) -> Jet:
    if F.order < 2:
        raise UsageError("fundamental tensor needs an F jet of order >= 2")
    n = _split(F)
    ys = range(n, 2 * n)
    F2 = F * F
    return 0.5 * F2.grad(ys).grad(ys)


def _check_positive(g0: np.ndarray) -> None:
    eig = np.linalg.eigvalsh(g0)
    if np.any(eig <= 0):
        bad = np.unravel_index(np.argmin(eig[..., 0]), eig.shape[:-1]) if eig.ndim > 1 else ()
        raise DegenerateMetricError(
            f"fundamental tensor not positive definite; eigenvalues {eig[bad]} at sample {bad}"
        )
    cond = eig[..., -1] / eig[..., 0]
    if np.any(cond > COND_WARN):
        warnings.warn(f"ill-conditioned fundamental tensor (condition number {np.max(cond):.3g})")


@dataclass(frozen=True)
class SprayData:
    """Oracle objects at one or many points ``point = concat(x, y)``."""

    n: int
    point: np.ndarray
    F: JetN
    g: np.ndarray
    g_inv: np.ndarray
    G: JetN
    R: JetN
    order_budget: int

    @property
    def y(self) -> np.ndarray:
        return self.point[..., self.n:]


def _spray(F: Jet, point: np.ndarray):
    n = _split(F)
    xs, ys = range(n), range(n, 2 * n)
    F2 = F * F
    dF2_y = F2.grad(ys)
    g = 0.5 * dF2_y.grad(ys)
    _check_positive(g.value)
    g_inv = _inverse(g)
    y = JetN.variables(point, F.order)[..., n:]
    mixed = (dF2_y.grad(xs) * y[..., None, :]).sum(axis=-1)
    rhs = mixed - F2.grad(xs)
    G = 0.25 * (g_inv * rhs[..., None, :]).sum(axis=-1)
    return g, G, g_inv, y


def spray_coefficients(F_jet: Jet, point) -> Jet:
    """Spray coefficients ``G^i`` as jets of order ``F.order - 2`` (leading axis ``i``)."""
    if F_jet.order < 3:
        raise UsageError("spray coefficients need an F jet of order >= 3")
    return _spray(F_jet, np.asarray(point, float))[1]


def spray_data(F_jet: Jet, point) -> SprayData:
    """
    All oracle objects for an ``F`` jet expanded at ``point = concat(x, y)``.

    ``point`` has shape ``(..., 2n)`` matching the jet's leading axes.
    """
    if F_jet.order < ORDER_FOR["R"]:
        raise UsageError(f"Riemann curvature needs an F jet of order >= {ORDER_FOR['R']}, got {F_jet.order}")
    point = np.asarray(point, float)
    n = _split(F_jet)
    g, G, g_inv, y = _spray(F_jet, point)
    xs, ys = range(n), range(n, 2 * n)
    Gx = G.grad(xs)                      # [i, k] = dG^i/dx^k
    Gy = G.grad(ys)                      # [i, k] = dG^i/dy^k
    Gyx = Gy.grad(xs)                    # [i, k, j] = d2G^i/dy^k dx^j
    Gyy = Gy.grad(ys)                    # [i, k, j] = d2G^i/dy^k dy^j
    R = (
        2 * Gx
        - (Gyx * y[..., None, None, :]).sum(axis=-1)
        + 2 * (Gyy * G[..., None, None, :]).sum(axis=-1)
        - _matmul(Gy, Gy)
    )
    return SprayData(n=n, point=point, F=F_jet, g=g.value, g_inv=g_inv.value, G=G, R=R,
                     order_budget=F_jet.order)


def riemann_curvature(spray: SprayData) -> np.ndarray:
    """The matrix ``R^i_k`` (row ``i``, column ``k``) at the expansion point."""
    return spray.R.value


def chi_from_riemann(spray: SprayData) -> Jet:
    """``chi_i = -1/6 (2 R^m_{i.m} + R^m_{m.i})`` as a jet (order ``F.order - 5``)."""
    if spray.order_budget < ORDER_FOR["chi"]:
        raise UsageError(f"chi needs an F jet of order >= {ORDER_FOR['chi']}, got {spray.order_budget}")
    n = spray.n
    Ry = spray.R.grad(range(n, 2 * n))            # [m, i, l] = dR^m_i/dy^l
    div = spray.R._new(np.einsum("...mimc->...ic", Ry.coeffs))
    trace = spray.R._new(np.einsum("...mmc->...c", spray.R.coeffs))
    return -(2 * div + trace.grad(range(n, 2 * n))) / 6.0


def h_from_chi(spray: SprayData) -> np.ndarray:
    """``H_ij = 1/2 (chi_{i.j} + chi_{j.i})`` from the oracle's chi jet."""
    if spray.order_budget < ORDER_FOR["H"]:
        raise UsageError(f"H needs an F jet of order >= {ORDER_FOR['H']}, got {spray.order_budget}")
    n = spray.n
    dchi = chi_from_riemann(spray).grad(range(n, 2 * n)).value
    return 0.5 * (dchi + np.swapaxes(dchi, -1, -2))


def ricci_hessian(spray: SprayData) -> np.ndarray:
    """``1/2 [Ric]_{y^i y^j}`` with ``Ric`` the trace of the oracle's ``R``."""
    if spray.order_budget < ORDER_FOR["H"]:
        raise UsageError(f"the Ricci Hessian needs an F jet of order >= {ORDER_FOR['H']}")
    n = spray.n
    trace = spray.R._new(np.einsum("...mmc->...c", spray.R.coeffs))
    ys = range(n, 2 * n)
    return 0.5 * trace.grad(ys).grad(ys).value


def cfc_tensor_check(spray: SprayData, K: float, scale: float = 1.0) -> tuple[np.ndarray, float]:
    """
    Residual ``R^i_k - K (F^2 delta^i_k - g_kl y^l y^i)`` and its normalized max.

    The max-abs entry is divided by ``|K| F^2`` when ``K != 0`` and by
    ``scale * F^2`` otherwise.
    """
    n = spray.n
    F2 = spray.F.value**2
    y = spray.y
    gy = np.einsum("...kl,...l->...k", spray.g, y)
    model = F2[..., None, None] * np.eye(n) - y[..., :, None] * gy[..., None, :]
    resid = spray.R.value - K * model
    norm = (abs(K) if K != 0 else scale) * F2
    return resid, float(np.max(np.abs(resid).max(axis=(-1, -2)) / norm))


def oracle_at(spec: MetricSpec, x, y, need: str = "R") -> SprayData:
    """Build the spray data for ``spec`` at ``(x, y)`` with the order ``need`` requires."""
    if need not in ORDER_FOR:
        raise UsageError(f"need must be one of {sorted(ORDER_FOR)}")
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    F = eval_F_jet(spec, x, y, ORDER_FOR[need])
    return spray_data(F, np.concatenate([x, y], axis=-1))
