"""
Truncated multivariate Taylor polynomials ("jets").

A jet stores the raw Taylor coefficients of a function around a point:
the entry for the multi-index ``a`` is ``(d^a f)(p) / a!``.  Products are
therefore plain truncated convolutions, and :meth:`Jet.partial` multiplies
by ``a!`` to hand back derivative values.

Monomials are ordered by total degree first, and within one degree by a
fixed order that does not depend on the truncation.  The basis of order
``p`` is thus a prefix of the basis of any order ``q > p`` and truncation is
a slice.

Coefficient arrays carry arbitrary leading axes.  A jet with coefficient
shape ``(B, n, n, N)`` is a batch of ``B`` matrices of jets; arithmetic
broadcasts over the leading axes exactly like numpy does.  This is what lets
the curvature code evaluate a whole sampling grid in one pass.
"""

from __future__ import annotations

import functools
import itertools
from math import comb, factorial
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, SingularityError, UsageError

__all__ = ["Jet", "Jet2", "JetN", "sqrt", "ncoeffs", "stack"]


def ncoeffs(nvars: int, order: int) -> int:
    """Number of monomials of total degree <= ``order`` in ``nvars`` variables."""
    return comb(nvars + order, order)


def _monomials(nvars: int, degree: int):
    if nvars == 1:
        yield (degree,)
        return
    for first in range(degree, -1, -1):
        for rest in _monomials(nvars - 1, degree - first):
            yield (first,) + rest


class _Basis:
    """Index tables for one ``(nvars, order)`` pair; built once and cached."""

    def __init__(self, nvars: int, order: int):
        self.nvars = nvars
        self.order = order
        exps = [m for d in range(order + 1) for m in _monomials(nvars, d)]
        self.exps = np.array(exps, dtype=np.int64).reshape(len(exps), nvars)
        self.size = len(exps)
        self.index = {m: i for i, m in enumerate(exps)}
        self.factorial = np.array(
            [np.prod([factorial(k) for k in m]) for m in exps], dtype=float
        )

        # pairs (a, b) with a + b = c, grouped by c so reduceat can sum them
        ia, ib, starts = [], [], []
        for c in exps:
            starts.append(len(ia))
            for a in itertools.product(*(range(k + 1) for k in c)):
                b = tuple(ci - ai for ci, ai in zip(c, a))
                ia.append(self.index[a])
                ib.append(self.index[b])
        self.mul_a = np.array(ia, dtype=np.int64)
        self.mul_b = np.array(ib, dtype=np.int64)
        self.mul_starts = np.array(starts, dtype=np.int64)

        self.deriv_src = []
        self.deriv_fac = []
        if order > 0:
            lower = exps[: ncoeffs(nvars, order - 1)]
            for k in range(nvars):
                src, fac = [], []
                for m in lower:
                    up = list(m)
                    up[k] += 1
                    src.append(self.index[tuple(up)])
                    fac.append(up[k])
                self.deriv_src.append(np.array(src, dtype=np.int64))
                self.deriv_fac.append(np.array(fac, dtype=float))


@functools.lru_cache(maxsize=None)
def _basis(nvars: int, order: int) -> _Basis:
    return _Basis(nvars, order)


def _as_scalar(value) -> np.ndarray:
    return np.asarray(value)


class Jet:
    """
    Truncated Taylor expansion in ``nvars`` variables up to total degree ``order``.

    Parameters
    ----------
    coeffs : array_like
        Raw Taylor coefficients; last axis has length ``ncoeffs(nvars, order)``.
    nvars : int
        Number of independent variables.
    order : int
        Truncation total degree.

    Notes
    -----
    Jets are immutable.  Binary operations between jets of different orders
    truncate to the smaller order.  Plain numbers and numpy arrays act as
    constants; an array's shape is matched against the jet's leading axes.
    """

    __slots__ = ("nvars", "order", "coeffs")
    __array_ufunc__ = None  # make numpy defer to our reflected operators

    def __init__(self, coeffs, nvars: int, order: int):
        if order < 0 or nvars < 1:
            raise UsageError(f"invalid jet shape nvars={nvars} order={order}")
        coeffs = np.array(coeffs, copy=True)
        if coeffs.dtype.kind not in "fc":
            coeffs = coeffs.astype(float)
        expected = ncoeffs(nvars, order)
        if coeffs.ndim == 0 or coeffs.shape[-1] != expected:
            raise UsageError(
                f"coefficient array must end in an axis of length {expected}, "
                f"got shape {coeffs.shape}"
            )
        coeffs.flags.writeable = False
        self.nvars = nvars
        self.order = order
        self.coeffs = coeffs

    # -- construction -------------------------------------------------------

    def _new(self, coeffs, order: int | None = None) -> "Jet":
        obj = object.__new__(type(self))
        coeffs = np.asarray(coeffs)
        if coeffs.flags.writeable:
            coeffs.flags.writeable = False
        obj.nvars = self.nvars
        obj.order = self.order if order is None else order
        obj.coeffs = coeffs
        return obj

    @classmethod
    def constant(cls, value, nvars: int, order: int) -> "Jet":
        value = _as_scalar(value)
        dtype = np.result_type(value, float)
        c = np.zeros(value.shape + (ncoeffs(nvars, order),), dtype=dtype)
        c[..., 0] = value
        return cls(c, nvars, order)

    @classmethod
    def seed(cls, point, index: int, order: int) -> "Jet":
        """
        Jet of the coordinate function ``z -> z[index]`` expanded at ``point``.

        ``point`` has shape ``(..., nvars)``; leading axes become the jet's
        leading axes.
        """
        point = _real(point)
        if point.ndim == 0:
            raise UsageError("point must be a vector")
        nvars = point.shape[-1]
        if order < 1:
            raise UsageError(f"seed order must be >= 1, got {order}")
        if not 0 <= index < nvars:
            raise UsageError(f"variable index {index} out of range for {nvars} variables")
        c = np.zeros(point.shape[:-1] + (ncoeffs(nvars, order),), dtype=point.dtype)
        c[..., 0] = point[..., index]
        unit = [0] * nvars
        unit[index] = 1
        c[..., _basis(nvars, order).index[tuple(unit)]] = 1.0
        return cls(c, nvars, order)

    @classmethod
    def variables(cls, point, order: int) -> "Jet":
        """All coordinate jets at ``point`` stacked along a new last leading axis."""
        point = _real(point)
        nvars = point.shape[-1]
        return stack([cls.seed(point, k, order) for k in range(nvars)], axis=-1)

    # -- basic properties ---------------------------------------------------

    @property
    def shape(self) -> tuple:
        """Leading (non-coefficient) shape."""
        return self.coeffs.shape[:-1]

    @property
    def scalar_kind(self) -> str:
        return "complex" if np.iscomplexobj(self.coeffs) else "real"

    @property
    def value(self) -> np.ndarray:
        """Constant term, i.e. the function value at the expansion point."""
        return self.coeffs[..., 0]

    @property
    def real(self) -> "Jet":
        return self._new(self.coeffs.real.copy())

    @property
    def imag(self) -> "Jet":
        return self._new(self.coeffs.imag.copy())

    def _index_of(self, multi_index: Sequence[int]) -> int:
        multi_index = tuple(int(k) for k in multi_index)
        if len(multi_index) != self.nvars or min(multi_index) < 0:
            raise UsageError(f"multi-index {multi_index} does not match {self.nvars} variables")
        if sum(multi_index) > self.order:
            raise UsageError(
                f"multi-index {multi_index} exceeds truncation order {self.order}"
            )
        return _basis(self.nvars, self.order).index[multi_index]

    def coefficient(self, multi_index: Sequence[int]) -> np.ndarray:
        """Raw Taylor coefficient of the monomial ``multi_index``."""
        return self.coeffs[..., self._index_of(multi_index)]

    def partial(self, multi_index: Sequence[int]) -> np.ndarray:
        """Mixed partial derivative ``d^a f`` at the expansion point (``a!`` times the coefficient)."""
        i = self._index_of(multi_index)
        return self.coeffs[..., i] * _basis(self.nvars, self.order).factorial[i]

    def truncate(self, order: int) -> "Jet":
        if order > self.order:
            raise UsageError(f"cannot raise truncation order {self.order} to {order}")
        if order == self.order:
            return self
        return self._new(self.coeffs[..., : ncoeffs(self.nvars, order)].copy(), order)

    def diff(self, var: int) -> "Jet":
        """Derivative with respect to variable ``var``; the order drops by one."""
        if self.order == 0:
            raise UsageError("cannot differentiate a jet of order 0")
        if not 0 <= var < self.nvars:
            raise UsageError(f"variable index {var} out of range")
        b = _basis(self.nvars, self.order)
        return self._new(self.coeffs[..., b.deriv_src[var]] * b.deriv_fac[var], self.order - 1)

    def grad(self, variables: Iterable[int]) -> "Jet":
        """Derivatives w.r.t. each listed variable, stacked along a new last leading axis."""
        return stack([self.diff(k) for k in variables], axis=-1)

    # -- leading-axis manipulation ------------------------------------------

    def __getitem__(self, idx) -> "Jet":
        if not isinstance(idx, tuple):
            idx = (idx,)
        return self._new(self.coeffs[idx + (slice(None),)])

    def sum(self, axis=None) -> "Jet":
        nlead = self.coeffs.ndim - 1
        if axis is None:
            axes = tuple(range(nlead))
        else:
            axes = tuple(a % nlead for a in np.atleast_1d(axis))
        return self._new(self.coeffs.sum(axis=axes))

    def reshape(self, *shape) -> "Jet":
        if len(shape) == 1 and isinstance(shape[0], tuple):
            shape = shape[0]
        return self._new(self.coeffs.reshape(tuple(shape) + (self.coeffs.shape[-1],)))

    def __len__(self) -> int:
        return self.shape[0]

    # -- arithmetic ---------------------------------------------------------

    def _coerce(self, other) -> tuple["Jet", "Jet"]:
        if isinstance(other, Jet):
            if other.nvars != self.nvars:
                raise UsageError(f"variable count mismatch: {self.nvars} vs {other.nvars}")
            order = min(self.order, other.order)
            return self.truncate(order), other.truncate(order)
        return self, self.constant(other, self.nvars, self.order)

    def __add__(self, other):
        a, b = self._coerce(other)
        return a._new(a.coeffs + b.coeffs)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = self._coerce(other)
        return a._new(a.coeffs - b.coeffs)

    def __rsub__(self, other):
        a, b = self._coerce(other)
        return a._new(b.coeffs - a.coeffs)

    def __neg__(self):
        return self._new(-self.coeffs)

    def __pos__(self):
        return self

    def __mul__(self, other):
        if not isinstance(other, Jet):
            other = _as_scalar(other)
            return self._new(self.coeffs * other[..., None])
        a, b = self._coerce(other)
        basis = _basis(a.nvars, a.order)
        prod = a.coeffs[..., basis.mul_a] * b.coeffs[..., basis.mul_b]
        return a._new(np.add.reduceat(prod, basis.mul_starts, axis=-1))

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            other = _as_scalar(other)
            if np.any(other == 0):
                raise SingularityError("division by zero constant")
            return self._new(self.coeffs / other[..., None])
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, exponent):
        if isinstance(exponent, (int, np.integer)):
            return self.powi(int(exponent))
        return self._series(_power_series(self.value, float(exponent), self.order))

    def powi(self, n: int) -> "Jet":
        """Integer power by repeated squaring; negative powers go through the reciprocal."""
        if n < 0:
            return self.reciprocal().powi(-n)
        result = self.constant(np.ones(self.shape), self.nvars, self.order)
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def reciprocal(self) -> "Jet":
        c = self.value
        if np.any(c == 0):
            raise SingularityError("division by a jet whose constant term is zero")
        k = np.arange(self.order + 1).reshape((-1,) + (1,) * c.ndim)
        series = (-1.0) ** k / c ** (k + 1)
        return self._series(series)

    def sqrt(self) -> "Jet":
        c = self.value
        if np.iscomplexobj(c):
            if np.any((c.imag == 0) & (c.real <= 0)):
                raise DomainError("complex sqrt: constant term on the branch cut (non-positive real axis)")
        elif np.any(c <= 0):
            raise DomainError("sqrt of a jet whose constant term is not positive")
        return self._series(_power_series(c, 0.5, self.order))

    def _series(self, series: np.ndarray) -> "Jet":
        """Compose with a univariate series ``sum_k series[k] * h**k``, ``h`` = non-constant part."""
        h = self - self.value
        result = self.constant(series[self.order], self.nvars, self.order)
        for k in range(self.order - 1, -1, -1):
            result = result * h + series[k]
        return result

    def compose(self, *args: "Jet") -> "Jet":
        """
        Substitute jets for the variables: ``self(p + d_1, ..., p + d_m)``.

        Each argument is a jet (in any number of variables) whose constant
        term must equal the corresponding coordinate of this jet's expansion
        point; only its non-constant part enters the substitution.
        """
        if len(args) != self.nvars:
            raise UsageError(f"compose needs {self.nvars} arguments, got {len(args)}")
        deltas = [a - a.value for a in args]
        if self.nvars == 1:
            return _horner1(np.moveaxis(self.coeffs, -1, 0), self.order, deltas[0])
        if self.nvars != 2:
            raise UsageError("compose is implemented for 1 and 2 variables")
        b = _basis(2, self.order)
        dr, ds = deltas
        result = None
        for i in range(self.order, -1, -1):
            row = np.stack([self.coeffs[..., b.index[(i, j)]] for j in range(self.order - i + 1)])
            inner = _horner1(row, self.order - i, ds)
            result = inner if result is None else result * dr + inner
        return result

    def __repr__(self) -> str:
        return f"{type(self).__name__}(nvars={self.nvars}, order={self.order}, shape={self.shape})"


def _horner1(coeffs: np.ndarray, order: int, h: Jet) -> Jet:
    """Evaluate ``sum_k coeffs[k] h**k`` where ``coeffs[k]`` may carry leading axes."""
    result = h * 0 + coeffs[order]
    for k in range(order - 1, -1, -1):
        result = result * h + coeffs[k]
    return result


def _real(x) -> np.ndarray:
    """Real array, keeping extended precision when given."""
    x = np.asarray(x)
    return x if x.dtype.kind == "f" else x.astype(float)


def _power_series(c: np.ndarray, p: float, order: int) -> np.ndarray:
    """Taylor coefficients of ``(c + h)**p`` in ``h`` (principal branch for complex ``c``)."""
    out = np.empty((order + 1,) + np.shape(c), dtype=np.result_type(c, float))
    out[0] = np.power(c, p) if np.iscomplexobj(c) else np.power(_real(c), p)
    for k in range(1, order + 1):
        out[k] = out[k - 1] * (p - k + 1) / (k * c)
    return out


def stack(jets: Sequence[Jet], axis: int = 0) -> Jet:
    """Stack jets along a new leading axis (negative axes count from the last leading axis)."""
    if not jets:
        raise UsageError("cannot stack an empty sequence")
    order = min(j.order for j in jets)
    nvars = jets[0].nvars
    if any(j.nvars != nvars for j in jets):
        raise UsageError("cannot stack jets with different variable counts")
    arrays = np.broadcast_arrays(*[j.truncate(order).coeffs for j in jets])
    nlead = arrays[0].ndim - 1
    if axis < 0:
        axis = nlead + 1 + axis
    return jets[0]._new(np.stack(arrays, axis=axis), order)


def sqrt(x):
    """Square root that works on jets, numpy values, and plain numbers."""
    if isinstance(x, Jet):
        return x.sqrt()
    return np.sqrt(x)


class Jet2(Jet):
    """Bivariate jet in the variables ``(r, s)``; real or complex coefficients."""

    __slots__ = ()

    def __init__(self, coeffs, nvars: int = 2, order: int = 7):
        if nvars != 2:
            raise UsageError("Jet2 always has two variables")
        super().__init__(coeffs, 2, order)

    @classmethod
    def seed_rs(cls, r, s, order: int = 7) -> tuple["Jet2", "Jet2"]:
        """Jets of the coordinate functions ``r`` and ``s`` at ``(r, s)``."""
        point = np.stack(np.broadcast_arrays(_real(r), _real(s)), axis=-1)
        return cls.seed(point, 0, order), cls.seed(point, 1, order)

    @classmethod
    def constant(cls, value, nvars: int = 2, order: int = 7) -> "Jet2":
        return super().constant(value, 2, order)


class JetN(Jet):
    """Multivariate real jet; the curvature oracle uses ``2n`` variables ``(x, y)``."""

    __slots__ = ()
