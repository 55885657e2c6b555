"""Dense tensors with a variance signature, and tolerance-aware comparisons."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

FLOOR = 1e-12
COND_LIMIT = 1e12


class TensorError(ValueError):
    pass


class SingularMetric(TensorError):
    pass


@dataclass(frozen=True)
class Tensor:
    """Components ``data`` with one ``'u'`` (up) or ``'d'`` (down) per slot."""

    data: np.ndarray
    valence: tuple[str, ...]

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        valence = tuple(self.valence)
        if data.ndim != len(valence):
            raise TensorError(f"rank {data.ndim} does not match valence {valence}")
        if data.ndim and len(set(data.shape)) != 1:
            raise TensorError(f"non-square component array {data.shape}")
        if any(v not in ("u", "d") for v in valence):
            raise TensorError(f"valence entries must be 'u' or 'd': {valence}")
        if not np.all(np.isfinite(data)):
            raise TensorError("tensor has non-finite components")
        data = data.copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "valence", valence)

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def dim(self) -> int:
        return self.data.shape[0] if self.data.ndim else 0

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.data))) if self.data.size else 0.0

    def __add__(self, other: "Tensor") -> "Tensor":
        _same_shape(self, other)
        return Tensor(self.data + other.data, self.valence)

    def __sub__(self, other: "Tensor") -> "Tensor":
        _same_shape(self, other)
        return Tensor(self.data - other.data, self.valence)

    def __mul__(self, c: float) -> "Tensor":
        return Tensor(self.data * float(c), self.valence)

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return Tensor(-self.data, self.valence)


def _same_shape(a: Tensor, b: Tensor):
    if a.valence != b.valence or a.data.shape != b.data.shape:
        raise TensorError(f"incompatible tensors {a.valence} vs {b.valence}")


def covariant(data) -> Tensor:
    data = np.asarray(data, dtype=float)
    return Tensor(data, ("d",) * data.ndim)


def contravariant(data) -> Tensor:
    data = np.asarray(data, dtype=float)
    return Tensor(data, ("u",) * data.ndim)


def outer(a: Tensor, b: Tensor) -> Tensor:
    return Tensor(np.multiply.outer(a.data, b.data), a.valence + b.valence)


def contract(t: Tensor, slot_a: int, slot_b: int) -> Tensor:
    """Einstein sum over two slots of opposite variance."""
    r = t.rank
    if not (0 <= slot_a < r and 0 <= slot_b < r):
        raise TensorError(f"slot out of range for rank {r}")
    if slot_a == slot_b:
        raise TensorError("cannot contract a slot with itself")
    if t.valence[slot_a] == t.valence[slot_b]:
        raise TensorError("contraction needs one upper and one lower slot")
    data = np.trace(t.data, axis1=slot_a, axis2=slot_b)
    valence = tuple(v for i, v in enumerate(t.valence) if i not in (slot_a, slot_b))
    return Tensor(data, valence)


def check_metric(metric: np.ndarray) -> None:
    g = np.asarray(metric, dtype=float)
    if not np.allclose(g, g.T, rtol=1e-12, atol=1e-14):
        raise TensorError("metric is not symmetric")
    cond = np.linalg.cond(g)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise SingularMetric(f"metric condition number {cond:.3g} exceeds {COND_LIMIT:g}")
    try:
        np.linalg.cholesky(g)
    except np.linalg.LinAlgError:
        raise TensorError("metric is not positive definite") from None


def _apply_on_slot(data: np.ndarray, mat: np.ndarray, slot: int) -> np.ndarray:
    moved = np.tensordot(mat, data, axes=([1], [slot]))
    return np.moveaxis(moved, 0, slot)


def raise_lower(t: Tensor, slot: int, metric, inverse_metric) -> Tensor:
    """Flip the variance of ``slot``: lower with ``metric``, raise with its inverse."""
    g = metric.data if isinstance(metric, Tensor) else np.asarray(metric, dtype=float)
    ginv = inverse_metric.data if isinstance(inverse_metric, Tensor) else np.asarray(inverse_metric, dtype=float)
    check_metric(g)
    if not 0 <= slot < t.rank:
        raise TensorError(f"slot {slot} out of range for rank {t.rank}")
    mat = g if t.valence[slot] == "u" else ginv
    valence = list(t.valence)
    valence[slot] = "d" if t.valence[slot] == "u" else "u"
    return Tensor(_apply_on_slot(t.data, mat, slot), tuple(valence))


def permute(t: Tensor, perm) -> Tensor:
    """Reorder slots: result slot ``k`` is input slot ``perm[k]``."""
    perm = tuple(perm)
    if sorted(perm) != list(range(t.rank)):
        raise TensorError(f"{perm} is not a permutation of {t.rank} slots")
    return Tensor(np.transpose(t.data, perm), tuple(t.valence[p] for p in perm))


def symmetry_residual(t: Tensor, perm, sign: int = 1) -> float:
    """Relative max-abs of ``t - sign * perm(t)``; zero for the zero tensor."""
    scale = t.max_abs()
    if scale == 0.0:
        return 0.0
    diff = t.data - sign * np.transpose(t.data, tuple(perm))
    return float(np.max(np.abs(diff)) / scale)


def max_abs(x) -> float:
    x = x.data if isinstance(x, Tensor) else np.asarray(x)
    return float(np.max(np.abs(x))) if x.size else 0.0


def relative_residual(lhs, rhs, scale: float | None = None, floor: float = FLOOR) -> float:
    """``max|lhs - rhs| / max(scale, floor)``.

    ``scale`` defaults to the larger max-abs of the two sides.
    """
    a = lhs.data if isinstance(lhs, Tensor) else np.asarray(lhs, dtype=float)
    b = rhs.data if isinstance(rhs, Tensor) else np.asarray(rhs, dtype=float)
    if scale is None:
        scale = max(max_abs(a), max_abs(b))
    return max_abs(a - b) / max(scale, floor)


def allclose(a, b, rtol: float = 1e-12, floor: float = FLOOR) -> bool:
    return relative_residual(a, b, floor=floor) <= rtol
