"""Truncated multivariate Taylor arithmetic on numpy arrays.

A jet of a scalar in ``n`` variables truncated at total degree ``order`` is
stored as the vector of its *Taylor* coefficients ``c[alpha] = d^alpha f / alpha!``
over all multi-indices with ``|alpha| <= order``.  Multi-indices are graded
by degree, so the coefficients of a lower-order jet are always a prefix of the
higher-order one.

Jet-valued tensors are plain arrays whose last axis is the coefficient axis;
every helper here broadcasts over the leading axes.
"""

from __future__ import annotations

import itertools
import math
from functools import lru_cache

import numpy as np


def _multi_indices(n: int, order: int) -> list[tuple[int, ...]]:
    out = []
    for deg in range(order + 1):
        for combo in itertools.combinations_with_replacement(range(n), deg):
            alpha = [0] * n
            for v in combo:
                alpha[v] += 1
            out.append(tuple(alpha))
    return out


class JetSpace:
    """Index bookkeeping and product tables for jets in ``n`` variables."""

    def __init__(self, n: int, order: int):
        if n < 1:
            raise ValueError("need at least one variable")
        if not 0 <= order <= 6:
            raise ValueError(f"jet order must be in 0..6, got {order}")
        self.n = n
        self.order = order
        self.alphas = _multi_indices(n, order)
        self.index = {a: i for i, a in enumerate(self.alphas)}
        self.size = len(self.alphas)
        self.degree = np.array([sum(a) for a in self.alphas])
        self.factorial = np.array(
            [math.prod(math.factorial(k) for k in a) for a in self.alphas], dtype=float
        )

        ia, ib, ic = [], [], []
        for i, a in enumerate(self.alphas):
            for j, b in enumerate(self.alphas):
                if self.degree[i] + self.degree[j] > order:
                    continue
                ia.append(i)
                ib.append(j)
                ic.append(self.index[tuple(x + y for x, y in zip(a, b))])
        self._ia = np.array(ia)
        self._ib = np.array(ib)
        self._ic = np.array(ic)
        scatter = np.zeros((len(ic), self.size))
        scatter[np.arange(len(ic)), ic] = 1.0
        self._scatter = scatter

        # d/dx_v maps coefficient alpha + e_v to alpha with factor (alpha_v + 1)
        self._dsrc, self._ddst, self._dfac = [], [], []
        for v in range(n):
            src, dst, fac = [], [], []
            for i, a in enumerate(self.alphas):
                if self.degree[i] == order:
                    continue
                up = list(a)
                up[v] += 1
                src.append(self.index[tuple(up)])
                dst.append(i)
                fac.append(a[v] + 1.0)
            self._dsrc.append(np.array(src, dtype=int))
            self._ddst.append(np.array(dst, dtype=int))
            self._dfac.append(np.array(fac))

    def __repr__(self) -> str:
        return f"JetSpace(n={self.n}, order={self.order})"

    # construction -------------------------------------------------------
    def zeros(self, shape=()) -> np.ndarray:
        return np.zeros(tuple(shape) + (self.size,))

    def constant(self, value) -> np.ndarray:
        value = np.asarray(value, dtype=float)
        out = np.zeros(value.shape + (self.size,))
        out[..., 0] = value
        return out

    def variable(self, v: int, x0: float) -> np.ndarray:
        out = self.constant(x0)
        if self.order >= 1:
            alpha = [0] * self.n
            alpha[v] = 1
            out[self.index[tuple(alpha)]] = 1.0
        return out

    def from_derivatives(self, derivs) -> np.ndarray:
        return np.asarray(derivs, dtype=float) / self.factorial

    def to_derivatives(self, coeffs) -> np.ndarray:
        return np.asarray(coeffs) * self.factorial

    # structure ----------------------------------------------------------
    def truncate(self, a: np.ndarray, order: int) -> np.ndarray:
        out = np.array(a, dtype=float, copy=True)
        out[..., self.degree > order] = 0.0
        return out

    def mul(self, a, b) -> np.ndarray:
        """Elementwise (broadcast) product of jet arrays."""
        prod = np.asarray(a)[..., self._ia] * np.asarray(b)[..., self._ib]
        return prod @ self._scatter

    def einsum(self, subscripts: str, a, b) -> np.ndarray:
        """Two-operand einsum over tensor axes with jet multiplication.

        ``subscripts`` names tensor axes only, e.g. ``"ij,jk->ik"``.
        """
        lhs, out = subscripts.replace(" ", "").split("->")
        sa, sb = lhs.split(",")
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        # expand the smaller operand into its multiplication matrix so the
        # whole product becomes one tensordot over (tensor axes, coefficients)
        if a[..., 0].size <= b[..., 0].size:
            spec = f"{sa}YZ,{sb}Y->{out}Z"
            return _contract(spec, self.multiplier(a), b)
        spec = f"{sa}Y,{sb}YZ->{out}Z"
        return _contract(spec, a, self.multiplier(b))

    def multiplier(self, x) -> np.ndarray:
        """``m[..., p, c]`` such that ``(x * y)[c] = sum_p m[..., p, c] y[p]``."""
        x = np.asarray(x, dtype=float)
        m = np.zeros(x.shape + (self.size,))
        m[..., self._ib, self._ic] = x[..., self._ia]
        return m

    def deriv(self, a, v: int) -> np.ndarray:
        """Partial derivative along variable ``v``; the top degree becomes zero."""
        a = np.asarray(a)
        out = np.zeros_like(a, dtype=float)
        out[..., self._ddst[v]] = a[..., self._dsrc[v]] * self._dfac[v]
        return out

    def gradient(self, a) -> np.ndarray:
        """Stack of partials with the new axis first: ``out[v] = d_v a``."""
        return np.stack([self.deriv(a, v) for v in range(self.n)])

    # nonlinear ----------------------------------------------------------
    def compose(self, a, derivs) -> np.ndarray:
        """Apply a univariate function given its derivatives at ``a[..., 0]``.

        ``derivs[..., k]`` holds ``phi^(k)(a0)`` for ``k = 0..order``.
        Exact for truncated jets because the nonconstant part is nilpotent.
        """
        a = np.asarray(a, dtype=float)
        derivs = np.asarray(derivs, dtype=float)
        delta = a.copy()
        delta[..., 0] = 0.0
        out = self.constant(derivs[..., 0])
        power = None
        for k in range(1, self.order + 1):
            power = delta if power is None else self.mul(power, delta)
            out = out + power * (derivs[..., k] / math.factorial(k))[..., None]
        return out

    def reciprocal(self, a) -> np.ndarray:
        a0 = np.asarray(a)[..., 0]
        if np.any(a0 == 0.0):
            raise ZeroDivisionError("reciprocal of a jet with zero value")
        ks = np.arange(self.order + 1)
        d = (
            np.array([(-1.0) ** k * math.factorial(k) for k in ks])
            * a0[..., None] ** (-(ks + 1.0))
        )
        return self.compose(a, d)

    def div(self, a, b) -> np.ndarray:
        return self.mul(a, self.reciprocal(b))

    def powi(self, a, k: int) -> np.ndarray:
        if k < 0:
            return self.reciprocal(self.powi(a, -k))
        result = self.constant(np.ones(np.shape(a)[:-1]))
        base = np.asarray(a, dtype=float)
        while k:
            if k & 1:
                result = self.mul(result, base)
            k >>= 1
            if k:
                base = self.mul(base, base)
        return result

    def powr(self, a, p: float) -> np.ndarray:
        a0 = np.asarray(a)[..., 0]
        if np.any(a0 <= 0.0):
            raise ValueError("real power of a jet requires a positive base")
        coef = np.ones(self.order + 1)
        for k in range(1, self.order + 1):
            coef[k] = coef[k - 1] * (p - k + 1)
        ks = np.arange(self.order + 1)
        return self.compose(a, coef * a0[..., None] ** (p - ks))

    def exp(self, a) -> np.ndarray:
        e = np.exp(np.asarray(a)[..., 0])
        return self.compose(a, np.repeat(e[..., None], self.order + 1, axis=-1))

    def log(self, a) -> np.ndarray:
        a0 = np.asarray(a)[..., 0]
        if np.any(a0 <= 0.0):
            raise ValueError("log of a nonpositive jet value")
        ks = np.arange(1, self.order + 1)
        tail = np.array([(-1.0) ** (k - 1) * math.factorial(k - 1) for k in ks])
        d = np.concatenate(
            [np.log(a0)[..., None], tail * a0[..., None] ** (-ks.astype(float))], axis=-1
        )
        return self.compose(a, d)

    def sqrt(self, a) -> np.ndarray:
        a0 = np.asarray(a)[..., 0]
        if np.any(a0 < 0.0) or (self.order > 0 and np.any(a0 == 0.0)):
            raise ValueError("sqrt of a negative (or zero, when differentiated) jet value")
        if self.order == 0:
            return np.sqrt(a)
        return self.powr(a, 0.5)

    def sin(self, a) -> np.ndarray:
        a0 = np.asarray(a)[..., 0]
        cyc = [np.sin(a0), np.cos(a0), -np.sin(a0), -np.cos(a0)]
        return self.compose(a, np.stack([cyc[k % 4] for k in range(self.order + 1)], axis=-1))

    def cos(self, a) -> np.ndarray:
        a0 = np.asarray(a)[..., 0]
        cyc = [np.cos(a0), -np.sin(a0), -np.cos(a0), np.sin(a0)]
        return self.compose(a, np.stack([cyc[k % 4] for k in range(self.order + 1)], axis=-1))

    def inv_matrix(self, a) -> np.ndarray:
        """Inverse of a jet-valued square matrix (axes ``i, j, coeff``)."""
        a = np.asarray(a, dtype=float)
        a0inv = np.linalg.inv(a[..., 0])
        nil = a.copy()
        nil[..., 0] = 0.0
        step = -self.einsum("ij,jk->ik", self.constant(a0inv), nil)
        inv0 = self.constant(a0inv)
        out = inv0.copy()
        term = inv0
        for _ in range(self.order):
            term = self.einsum("ij,jk->ik", step, term)
            out = out + term
        return out


_PATHS: dict = {}


def _contract(spec: str, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    key = (spec, x.shape, y.shape)
    path = _PATHS.get(key)
    if path is None:
        path = np.einsum_path(spec, x, y, optimize="optimal")[0]
        _PATHS[key] = path
    return np.einsum(spec, x, y, optimize=path)


@lru_cache(maxsize=None)
def jet_space(n: int, order: int) -> JetSpace:
    """Shared, cached :class:`JetSpace` instance."""
    return JetSpace(n, order)
