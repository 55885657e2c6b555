"""Curvature of coordinate metrics, computed exactly through jet arithmetic.

Conventions
-----------
* ``gamma[k, i, j]`` is the Christoffel symbol with ``k`` up.
* ``riem[i, j, k, l]`` is the (4,0) curvature with the sign fixed by
  ``R(d_i, d_j) d_k = R^l_{ijk} d_l = (d_j G^l_ik - d_i G^l_jk + G^m_ik G^l_jm - G^m_jk G^l_im) d_l``
  and ``R_ijkl = g_lm R^m_ijk``.  With it the round sphere has
  ``R_ijkl v^i w^j v^k w^l > 0`` and ``Ric_ik = g^jl R_ijkl``.
* Weyl: ``W = Riem + A + B`` with
  ``A = R/((n-1)(n-2)) (g_ik g_jl - g_il g_jk)`` and
  ``B = -1/(n-2) (Ric_ik g_jl - Ric_il g_jk + Ric_jl g_ik - Ric_jk g_il)``.
* Covariant derivatives put the new slot first: ``(nabla T)[a, ...] = nabla_a T_...``.

Every tensor field below is carried as a jet array (tensor axes followed by
the Taylor-coefficient axis), so derivatives of curvature are exact up to
rounding; finite differences appear only in the tests.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np

from . import exprdsl
from .jets import JetSpace, jet_space
from .tensor import Tensor, TensorError, check_metric

# --------------------------------------------------------------------- charts


@dataclass(frozen=True)
class Domain:
    """Coordinate box, optionally with a ball constraint on some coordinates.

    ``lo``/``hi`` bound each coordinate; coordinates listed in ``ball`` must in
    addition satisfy ``|x_ball| < radius``.
    """

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    ball: tuple[int, ...] = ()
    radius: float = float("inf")

    @classmethod
    def ball_of(cls, n: int, radius: float) -> "Domain":
        return cls((-radius,) * n, (radius,) * n, tuple(range(n)), radius)

    @classmethod
    def box(cls, lo, hi) -> "Domain":
        return cls(tuple(float(x) for x in lo), tuple(float(x) for x in hi))

    def contains(self, p) -> bool:
        p = np.asarray(p, dtype=float)
        if np.any(p <= np.array(self.lo)) or np.any(p >= np.array(self.hi)):
            return False
        if self.ball and np.linalg.norm(p[list(self.ball)]) >= self.radius:
            return False
        return True


class MetricChart:
    """A coordinate chart with a metric given by DSL expressions.

    ``components`` maps ``(i, j)`` with ``i <= j`` (0-based) to an expression
    string or parsed :mod:`exprdsl` tree; missing entries are zero.
    """

    def __init__(
        self,
        name: str,
        n: int,
        components: Mapping[tuple[int, int], object],
        domain: Domain | None = None,
        params: Mapping[str, float] | None = None,
        profiles: Mapping[str, Callable] | None = None,
    ):
        if n < 2:
            raise ValueError("a chart needs dimension >= 2")
        self.name = name
        self.n = n
        self.params = dict(params or {})
        self.profiles = dict(profiles or {})
        self.domain = domain or Domain((-np.inf,) * n, (np.inf,) * n)
        comps = {}
        for (i, j), e in components.items():
            if not (0 <= i < n and 0 <= j < n):
                raise ValueError(f"component ({i}, {j}) outside dimension {n}")
            i, j = min(i, j), max(i, j)
            if isinstance(e, str):
                e = exprdsl.parse_expr(e, n, self.params, self.profiles)
            comps[(i, j)] = e
        self.components = comps
        self.sources = {k: str(v) for k, v in comps.items()}

    def __repr__(self):
        return f"MetricChart({self.name!r}, n={self.n})"

    def bindings(self) -> dict:
        b: dict = dict(self.params)
        b.update(self.profiles)
        return b

    def metric_jet(self, p, order: int) -> np.ndarray:
        p = tuple(float(x) for x in p)
        if len(p) != self.n:
            raise ValueError(f"point has {len(p)} coordinates, chart has {self.n}")
        sp = jet_space(self.n, order)
        out = sp.zeros((self.n, self.n))
        seen: dict = {}
        b = self.bindings()
        for (i, j), e in self.components.items():
            if e not in seen:
                seen[e] = exprdsl.eval_array(e, sp, p, b)
            out[i, j] = seen[e]
            out[j, i] = seen[e]
        return out

    def metric(self, p) -> np.ndarray:
        return self.metric_jet(p, 0)[..., 0]


# ----------------------------------------------------------- jet machinery

_LETTERS = "bcdefghijklmnopqrstuvwxy"


def nabla_jet(sp: JetSpace, t: np.ndarray, valence: Sequence[str], gamma: np.ndarray) -> np.ndarray:
    """Covariant derivative of a jet tensor field; new slot first."""
    r = len(valence)
    out = sp.gradient(t)
    idx = _LETTERS[:r]
    for s, v in enumerate(valence):
        swapped = idx[:s] + "z" + idx[s + 1 :]
        if v == "d":
            out = out - sp.einsum(f"za{idx[s]},{swapped}->a{idx}", gamma, t)
        else:
            out = out + sp.einsum(f"{idx[s]}az,{swapped}->a{idx}", gamma, t)
    return out


def _kn(sp: JetSpace, h: np.ndarray, k: np.ndarray) -> np.ndarray:
    """h_ik k_jl - h_il k_jk + h_jl k_ik - h_jk k_il (Kulkarni-Nomizu, no 1/2)."""
    t1 = sp.einsum("ik,jl->ijkl", h, k)
    return t1 - t1.transpose(0, 1, 3, 2, 4) + t1.transpose(1, 0, 3, 2, 4) - t1.transpose(1, 0, 2, 3, 4)


class LocalGeometry:
    """Jets of every curvature field of ``chart`` at ``p`` from order-``order`` metric jets.

    A field built from ``q`` derivatives of the metric is exact up to degree
    ``order - q``; :meth:`nabla` needs one more degree per derivative.
    """

    def __init__(self, chart: MetricChart, p, order: int):
        self.chart = chart
        self.n = chart.n
        self.point = tuple(float(x) for x in p)
        self.order = order
        self.sp = jet_space(chart.n, order)
        self.g = chart.metric_jet(self.point, order)
        check_metric(self.g[..., 0])
        self._nabla: dict = {}

    def value(self, jet: np.ndarray) -> np.ndarray:
        return np.asarray(jet)[..., 0]

    @cached_property
    def ginv(self) -> np.ndarray:
        return self.sp.inv_matrix(self.g)

    @cached_property
    def gamma(self) -> np.ndarray:
        sp = self.sp
        dg = sp.gradient(self.g)  # dg[v, i, j] = d_v g_ij
        # first kind G_lij = (d_i g_jl + d_j g_il - d_l g_ij) / 2
        first = 0.5 * (dg.transpose(2, 0, 1, 3) + dg.transpose(2, 1, 0, 3) - dg)
        return sp.einsum("kl,lij->kij", self.ginv, first)

    @cached_property
    def riem_up(self) -> np.ndarray:
        """``R^l_{ijk}`` stored as ``[i, j, k, l]``."""
        sp = self.sp
        G = self.gamma
        dG = sp.gradient(G)  # dG[v, l, i, k] = d_v G^l_ik
        term = dG.transpose(2, 0, 3, 1, 4)  # [i, j=v, k, l]: d_j G^l_ik
        quad = sp.einsum("mik,ljm->ijkl", G, G)
        return term - term.transpose(1, 0, 2, 3, 4) + quad - quad.transpose(1, 0, 2, 3, 4)

    @cached_property
    def riem(self) -> np.ndarray:
        return self.sp.einsum("lm,ijkm->ijkl", self.g, self.riem_up)

    @cached_property
    def ric(self) -> np.ndarray:
        return self.sp.einsum("jl,ijkl->ik", self.ginv, self.riem)

    @cached_property
    def scalar(self) -> np.ndarray:
        return self.sp.einsum("ik,ik->", self.ginv, self.ric)

    @cached_property
    def a_tensor(self) -> np.ndarray:
        n = self.n
        gg = self.sp.einsum("ik,jl->ijkl", self.g, self.g)
        gg = gg - gg.transpose(0, 1, 3, 2, 4)
        return self.sp.mul(gg, self.scalar) / ((n - 1) * (n - 2))

    @cached_property
    def b_tensor(self) -> np.ndarray:
        return -_kn(self.sp, self.ric, self.g) / (self.n - 2)

    @cached_property
    def weyl(self) -> np.ndarray:
        if self.n < 3:
            raise TensorError("the Weyl tensor needs n >= 3")
        return self.riem + self.a_tensor + self.b_tensor

    @cached_property
    def schouten(self) -> np.ndarray:
        return self.ric - self.sp.mul(self.g, self.scalar) / (2 * (self.n - 1))

    # fields by name, with the number of metric derivatives they consume
    FIELDS = {
        "metric": (("d", "d"), 0),
        "inverse_metric": (("u", "u"), 0),
        "riemann": (("d",) * 4, 2),
        "ricci": (("d", "d"), 2),
        "scalar": ((), 2),
        "weyl": (("d",) * 4, 2),
        "a_tensor": (("d",) * 4, 2),
        "b_tensor": (("d",) * 4, 2),
        "schouten": (("d", "d"), 2),
    }

    def field(self, name: str) -> tuple[np.ndarray, tuple[str, ...]]:
        valence, _ = self.FIELDS[name]
        attr = {"metric": "g", "inverse_metric": "ginv", "riemann": "riem", "ricci": "ric"}.get(name, name)
        return getattr(self, attr), valence

    def nabla(self, name: str, times: int = 1) -> np.ndarray:
        """Jet of the ``times``-fold covariant derivative of a named field."""
        key = (name, times)
        if key not in self._nabla:
            valence, need = self.FIELDS[name]
            if need + times > self.order:
                raise ValueError(
                    f"{times} derivative(s) of {name} need metric jets of order {need + times}, have {self.order}"
                )
            if times == 0:
                self._nabla[key] = self.field(name)[0]
            else:
                prev = self.nabla(name, times - 1)
                self._nabla[key] = nabla_jet(self.sp, prev, ("d",) * (times - 1) + valence, self.gamma)
        return self._nabla[key]


# ------------------------------------------------------------------ results


@dataclass(frozen=True)
class CurvaturePack:
    """Pointwise curvature; all arrays are coordinate components.

    riem, weyl, a_tensor, b_tensor, c_tensor and d_tensor are (4,0);
    ric and schouten are (2,0); gamma is ``[k, i, j]`` with ``k`` up.
    """

    point: tuple[float, ...]
    metric: np.ndarray
    inverse_metric: np.ndarray
    gamma: np.ndarray
    riem: np.ndarray
    ric: np.ndarray
    scalar: float
    weyl: np.ndarray
    a_tensor: np.ndarray
    b_tensor: np.ndarray
    schouten: np.ndarray
    c_tensor: np.ndarray
    d_tensor: np.ndarray
    ric_norm2: float

    @property
    def n(self) -> int:
        return self.metric.shape[0]

    def ricci_eigenvalues(self) -> np.ndarray:
        from scipy.linalg import eigh

        return eigh(self.ric, self.metric, eigvals_only=True)


def quadratic_c(ginv: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``g^pq g^rs T_pijr T_slkq``."""
    half = np.einsum("pq,pijr->qijr", ginv, t)
    half = np.einsum("rs,qijr->qijs", ginv, half)
    return np.einsum("qijs,slkq->ijkl", half, t)


def _pack(geom: LocalGeometry) -> CurvaturePack:
    v = geom.value
    g, ginv = v(geom.g), v(geom.ginv)
    riem, ric = v(geom.riem), v(geom.ric)
    weyl = v(geom.weyl)
    return CurvaturePack(
        point=geom.point,
        metric=g,
        inverse_metric=ginv,
        gamma=v(geom.gamma),
        riem=riem,
        ric=ric,
        scalar=float(v(geom.scalar)),
        weyl=weyl,
        a_tensor=v(geom.a_tensor),
        b_tensor=v(geom.b_tensor),
        schouten=v(geom.schouten),
        c_tensor=quadratic_c(ginv, riem),
        d_tensor=quadratic_c(ginv, weyl),
        ric_norm2=float(np.einsum("ia,kb,ik,ab->", ginv, ginv, ric, ric)),
    )


# -------------------------------------------------------------- operations


def local_geometry(chart: MetricChart, p, order: int = 2) -> LocalGeometry:
    return LocalGeometry(chart, p, order)


def christoffel(chart: MetricChart, p) -> Tensor:
    geom = LocalGeometry(chart, p, 1)
    return Tensor(geom.value(geom.gamma), ("u", "d", "d"))


def riemann(chart: MetricChart, p) -> Tensor:
    geom = LocalGeometry(chart, p, 2)
    return Tensor(geom.value(geom.riem), ("d",) * 4)


def curvature_pack(chart: MetricChart, p) -> CurvaturePack:
    if chart.n < 3:
        raise TensorError("curvature_pack needs n >= 3 (the Weyl tensor is undefined for n = 2)")
    return _pack(LocalGeometry(chart, p, 2))


FieldSpec = "str | Callable[[LocalGeometry], tuple[np.ndarray, Sequence[str]]]"


def _field_jet(field, chart, p, times, extra_order=0):
    if isinstance(field, str):
        valence, need = LocalGeometry.FIELDS[field]
        geom = LocalGeometry(chart, p, need + times + extra_order)
        return geom, geom.nabla(field, times), valence
    # callable(geom) -> (jet, valence); needs declared via attribute, default 2
    need = getattr(field, "metric_order", 2)
    geom = LocalGeometry(chart, p, need + times + extra_order)
    jet, valence = field(geom)
    out = jet
    for k in range(times):
        out = nabla_jet(geom.sp, out, ("d",) * k + tuple(valence), geom.gamma)
    return geom, out, tuple(valence)


def covariant_derivative(field, chart: MetricChart, p) -> Tensor:
    """``nabla T`` at ``p``.

    ``field`` is the name of a curvature field (see ``LocalGeometry.FIELDS``)
    or a callable ``geom -> (jet_array, valence)``; a callable may set a
    ``metric_order`` attribute declaring how many metric derivatives it uses.
    """
    geom, jet, valence = _field_jet(field, chart, p, 1)
    return Tensor(jet[..., 0], ("d",) + tuple(valence))


def rough_laplacian(field, chart: MetricChart, p) -> Tensor:
    """``g^ab nabla_a nabla_b T`` applied slotwise."""
    geom, jet, valence = _field_jet(field, chart, p, 2)
    ginv = geom.value(geom.ginv)
    return Tensor(np.tensordot(ginv, jet[..., 0], axes=([0, 1], [0, 1])), tuple(valence))


def scalar_function(expr, metric_order: int = 0):
    """Wrap a DSL expression as a field usable by covariant_derivative."""

    def build(geom: LocalGeometry):
        e = expr
        if isinstance(e, str):
            e = exprdsl.parse_expr(e, geom.n, geom.chart.params, geom.chart.profiles)
        return exprdsl.eval_array(e, geom.sp, geom.point, geom.chart.bindings()), ()

    build.metric_order = metric_order
    return build


def divergence_weyl(chart: MetricChart, p) -> Tensor:
    """``nabla^l W_ijkl``."""
    if chart.n < 4:
        raise TensorError("divergence_weyl needs n >= 4")
    geom = LocalGeometry(chart, p, 3)
    dw = geom.value(geom.nabla("weyl", 1))
    ginv = geom.value(geom.ginv)
    return Tensor(np.einsum("al,aijkl->ijk", ginv, dw), ("d",) * 3)


def schouten_curl(chart: MetricChart, p) -> Tensor:
    """``(n-3)/(n-2) (nabla_j S_ik - nabla_i S_jk)``."""
    n = chart.n
    geom = LocalGeometry(chart, p, 3)
    ds = geom.value(geom.nabla("schouten", 1))  # [a, i, k] = nabla_a S_ik
    curl = np.einsum("jik->ijk", ds) - np.einsum("ijk->ijk", ds)
    return Tensor((n - 3) / (n - 2) * curl, ("d",) * 3)


def rm_norm(pack: CurvaturePack) -> float:
    """``|Rm| = sqrt(R_ijkl R^ijkl)``."""
    gi = pack.inverse_metric
    up = np.einsum("ia,jb,kc,ld,abcd->ijkl", gi, gi, gi, gi, pack.riem)
    return float(np.sqrt(max(np.einsum("ijkl,ijkl->", pack.riem, up), 0.0)))
