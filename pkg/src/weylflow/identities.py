"""The verification suite: curvature identities as named residual checks.

Each check compares two sides computed along separate arithmetic paths and
reports ``max |lhs - rhs| / scale`` over the sample points.  ``scale`` is the
natural size of the quantity being compared (the larger side, or a curvature
scale of the chart when both sides vanish), so identities of the form
``0 = 0`` are not divided by rounding noise.

Products of (4,0) tensors follow ``(X*Y)_ijkl = g^pq g^rs X_pijr Y_slkq``, so
``C = Rm*Rm`` and ``D = W*W``; ``comb(P)_ijkl = P_ijkl - P_ijlk + P_ikjl - P_iljk``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from . import exprdsl
from .catalog import CatalogEntry, sample_points
from .flow import FlowTrajectory, consistency_residual, family_for, fd_time_derivative, integrate_flow
from .geometry import (LocalGeometry, _pack, divergence_weyl, quadratic_c,
                       schouten_curl)
from .soliton import (Inapplicable, classify_eigenstructure, gradient_identity_residuals,
                      soliton_residual, warped_ricci)
from .tensor import FLOOR, TensorError

EXACT_FLOOR = 1e-9  # finite differences at this relative level are exact up to rounding
MIN_ORDER = 1.9


class CheckError(ValueError):
    pass


# ---------------------------------------------------------------- algebra helpers

E = np.einsum


def product(ginv, x, y):
    """``g^pq g^rs X_pijr Y_slkq``."""
    half = E("pq,pijr->qijr", ginv, x)
    half = E("rs,qijr->qijs", ginv, half)
    return E("qijs,slkq->ijkl", half, y)


def comb(p):
    return p - E("ijlk->ijkl", p) + E("ikjl->ijkl", p) - E("iljk->ijkl", p)


def gg(g):
    """``g_ik g_jl - g_il g_jk``."""
    return E("ik,jl->ijkl", g, g) - E("il,jk->ijkl", g, g)


def kn(h, k):
    """``h_ik k_jl - h_il k_jk + h_jl k_ik - h_jk k_il``."""
    return E("ik,jl->ijkl", h, k) - E("il,jk->ijkl", h, k) + E("jl,ik->ijkl", h, k) - E("jk,il->ijkl", h, k)


def _o(a, b, spec):
    return E(spec + "->ijkl", a, b)


def ric_sq(pack):
    """``g^pq R_ip R_qj``."""
    return pack.ric @ pack.inverse_metric @ pack.ric


def ric_up(pack):
    return pack.inverse_metric @ pack.ric @ pack.inverse_metric


def ric_dot_4(pack, t):
    """``g^pq (R_ip T_qjkl + R_jp T_iqkl + R_kp T_ijql + R_lp T_ijkq)``."""
    m = pack.ric @ pack.inverse_metric  # m[i, q] = R_ip g^pq
    return (E("iq,qjkl->ijkl", m, t) + E("jq,iqkl->ijkl", m, t)
            + E("kq,ijql->ijkl", m, t) + E("lq,ijkq->ijkl", m, t))


def weyl_ric(pack, spec):
    """``W`` contracted with ``R^pq`` on the slots named ``p`` and ``q`` in ``spec``."""
    out = "".join(c for c in spec if c not in "pq")
    return E(f"{spec},pq->{out}", pack.weyl, ric_up(pack))


# ---------------------------------------------------------------- per-point context


class PointContext:
    """Lazily built geometry of one chart point, shared by every check on it."""

    def __init__(self, entry: CatalogEntry, p):
        self.entry = entry
        self.chart = entry.chart
        self.p = tuple(float(x) for x in p)

    def geom(self, order: int) -> LocalGeometry:
        cache = self.__dict__.setdefault("_geoms", {})
        if order not in cache:
            cache[order] = LocalGeometry(self.chart, self.p, order)
        return cache[order]

    @cached_property
    def pack(self):
        return _pack(self.geom(2))

    @cached_property
    def scale4(self) -> float:
        """Size of a (4,0) curvature term: ``max(|Rm|, |g| |Gamma|^2)`` in components."""
        geom = self.geom(2)
        v = geom.value
        return max(_mx(v(geom.riem)), _mx(v(geom.g)) * _mx(v(geom.gamma)) ** 2, FLOOR)

    @cached_property
    def scale2(self) -> float:
        geom = self.geom(2)
        return max(_mx(geom.value(geom.ric)), _mx(geom.value(geom.gamma)) ** 2, FLOOR)

    @cached_property
    def scale_quad(self) -> float:
        """Size of a quadratic (4,0) term such as ``C``."""
        pk = self.pack
        return max(_mx(pk.c_tensor), self.scale4 * self.scale2, FLOOR)


def _mx(x) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(x))) if x.size else 0.0


def _rel(lhs, rhs, scale: float) -> float:
    return _mx(np.asarray(lhs) - np.asarray(rhs)) / max(_mx(lhs), _mx(rhs), scale, FLOOR)


# ---------------------------------------------------------------- registry


@dataclass(frozen=True)
class CheckDef:
    id: str
    description: str
    ref: str  # the identity, written out
    tolerance: float
    evaluate: Callable = field(repr=False)
    n_min: int = 3
    n_max: int | None = None
    applies: Callable[[CatalogEntry], bool] = field(default=lambda e: True, repr=False)
    needs_flow: bool = False
    plumbing: bool = False
    entry_tolerance: dict = field(default_factory=dict)  # per catalog family

    def applicable(self, entry: CatalogEntry) -> bool:
        n = entry.n
        if n < self.n_min or (self.n_max is not None and n > self.n_max):
            return False
        return bool(self.applies(entry))

    def tolerance_for(self, entry: CatalogEntry) -> float:
        return self.entry_tolerance.get(entry.name, self.tolerance)


REGISTRY: dict[str, CheckDef] = {}


def _register(**kw):
    def deco(fn):
        REGISTRY[kw["id"]] = CheckDef(evaluate=fn, **kw)
        return fn

    return deco


def _lcf(entry) -> bool:
    return entry.n == 3 or bool(entry.known_facts.get("weyl_zero"))


def _gradient_soliton(entry) -> bool:
    return entry.soliton is not None and entry.soliton.gradient


# checks return (residual, info) where info carries the side magnitudes


@_register(id="weyl_traces", description="every single trace of W with the metric vanishes",
           ref="g^{ab} W with (a,b) any two slots = 0", tolerance=1e-10)
def _weyl_traces(ctx: PointContext):
    pk = ctx.pack
    w, gi = pk.weyl, pk.inverse_metric
    worst = max(_mx(_trace(w, gi, a, b)) for a in range(4) for b in range(a + 1, 4))
    return worst / max(_mx(w), ctx.scale4), {"lhs": worst, "rhs": 0.0}


def _trace(w, gi, a, b):
    moved = np.moveaxis(w, (a, b), (0, 1))
    return E("ab,ab...->...", gi, moved)


@_register(id="weyl_dim3", description="W vanishes identically in dimension three",
           ref="n = 3  =>  W_ijkl = 0", tolerance=1e-10, n_max=3)
def _weyl_dim3(ctx):
    return _mx(ctx.pack.weyl) / ctx.scale4, {"lhs": _mx(ctx.pack.weyl), "rhs": 0.0}


def _product_parts(ctx):
    pk = ctx.pack
    n = pk.n
    return pk, n, pk.metric, pk.inverse_metric, pk.a_tensor, pk.b_tensor, pk.weyl, pk.ric, pk.scalar, pk.ric_norm2


@_register(id="product_AA", description="A*A and its index combination",
           ref="A*A = R^2/((n-1)^2(n-2)^2) (g_ik g_jl + (n-2) g_ij g_lk);  comb(A*A) = R^2/((n-1)(n-2)^2) (g_ik g_jl - g_il g_jk)",
           tolerance=1e-8)
def _product_aa(ctx):
    pk, n, g, gi, A, B, W, Rc, R, N = _product_parts(ctx)
    aa = product(gi, A, A)
    single = R**2 / ((n - 1) ** 2 * (n - 2) ** 2) * (_o(g, g, "ik,jl") + (n - 2) * _o(g, g, "ij,lk"))
    summed = R**2 / ((n - 1) * (n - 2) ** 2) * gg(g)
    return _pair(ctx, (aa, single), (comb(aa), summed))


def _bb_single(pk):
    n, g, Rc, R, N = pk.n, pk.metric, pk.ric, pk.scalar, pk.ric_norm2
    q = ric_sq(pk)
    return (2 * _o(Rc, Rc, "ik,lj") + (n - 4) * _o(Rc, Rc, "ij,lk") + _o(q, g, "jl,ik") + _o(q, g, "ki,lj")
            - 2 * _o(q, g, "ji,lk") - 2 * _o(q, g, "lk,ij") + R * _o(Rc, g, "ij,lk") + R * _o(Rc, g, "lk,ij")
            + N * _o(g, g, "ij,lk")) / (n - 2) ** 2


@_register(id="product_BB", description="B*B and its index combination",
           ref="B*B = (2 R_ik R_lj + (n-4) R_ij R_lk + ...)/(n-2)^2;  comb(B*B) = ((n-2)(R_ik R_lj - R_il R_jk) - ... + |Ric|^2 (g_ik g_lj - g_il g_jk))/(n-2)^2",
           tolerance=1e-8)
def _product_bb(ctx):
    pk, n, g, gi, A, B, W, Rc, R, N = _product_parts(ctx)
    q = ric_sq(pk)
    bb = product(gi, B, B)
    summed = ((n - 2) * (_o(Rc, Rc, "ik,lj") - _o(Rc, Rc, "il,jk"))
              - _o(q, g, "jl,ik") - _o(q, g, "ki,lj") + _o(q, g, "li,jk") + _o(q, g, "kj,il")
              + R * (_o(Rc, g, "ik,lj") + _o(Rc, g, "lj,ik") - _o(Rc, g, "il,jk") - _o(Rc, g, "jk,il"))
              + N * gg(g)) / (n - 2) ** 2
    return _pair(ctx, (bb, _bb_single(pk)), (comb(bb), summed))


@_register(id="product_AB_BA", description="A*B, B*A and the combination of their sum",
           ref="comb(A*B + B*A) = -R/((n-1)(n-2)) (R_ik g_jl + R_jl g_ik - R_jk g_il - R_il g_jk) - 2R^2/((n-1)(n-2)^2) (g_ik g_jl - g_il g_jk)",
           tolerance=1e-8)
def _product_ab(ctx):
    pk, n, g, gi, A, B, W, Rc, R, N = _product_parts(ctx)
    c = -R / ((n - 1) * (n - 2) ** 2)
    ab = product(gi, A, B)
    ba = product(gi, B, A)
    ab_rhs = c * (_o(Rc, g, "ik,lj") + _o(Rc, g, "lj,ik") - _o(Rc, g, "ij,lk") + (n - 3) * _o(Rc, g, "lk,ij")
                  + R * _o(g, g, "ij,lk"))
    ba_rhs = c * (_o(Rc, g, "lj,ik") + _o(Rc, g, "ik,lj") - _o(Rc, g, "lk,ij") + (n - 3) * _o(Rc, g, "ij,lk")
                  + R * _o(g, g, "ij,lk"))
    summed = (-R / ((n - 1) * (n - 2)) * (_o(Rc, g, "ik,jl") + _o(Rc, g, "jl,ik") - _o(Rc, g, "jk,il") - _o(Rc, g, "il,jk"))
              - 2 * R**2 / ((n - 1) * (n - 2) ** 2) * gg(g))
    return _pair(ctx, (ab, ab_rhs), (ba, ba_rhs), (comb(ab + ba), summed))


@_register(id="product_WA_AW", description="W*A, A*W are multiples of W; their combinations vanish",
           ref="W*A = R/((n-1)(n-2)) W_lijk,  A*W = R/((n-1)(n-2)) W_ilkj,  comb(W*A) = comb(A*W) = 0",
           tolerance=1e-10)
def _product_wa(ctx):
    pk, n, g, gi, A, B, W, Rc, R, N = _product_parts(ctx)
    c = R / ((n - 1) * (n - 2))
    wa = product(gi, W, A)
    aw = product(gi, A, W)
    zero = np.zeros_like(W)
    return _pair(ctx, (wa, c * E("lijk->ijkl", W)), (aw, c * E("ilkj->ijkl", W)),
                 (comb(wa), zero), (comb(aw), zero))


@_register(id="product_WB_BW", description="W*B, B*W and the combination of their sum",
           ref="-comb(W*B + B*W) = (W_pilq R^pq g_kj + W_qkjp R^pq g_il - W_pikq R^pq g_jl - W_qljp R^pq g_ik)/(n-2)",
           tolerance=1e-8)
def _product_wb(ctx):
    pk, n, g, gi, A, B, W, Rc, R, N = _product_parts(ctx)
    wu = E("ijkp,pq->ijkq", W, gi)  # last slot raised
    ru = ric_up(pk)
    wb = product(gi, W, B)
    bw = product(gi, B, W)
    wb_rhs = -(E("lijp,pk->ijkl", wu, Rc) + E("pijk,pq,lq->ijkl", W, gi, Rc)
               - E("pijq,pq,lk->ijkl", W, ru, g)) / (n - 2)
    bw_rhs = -(E("ilkp,pj->ijkl", wu, Rc) + E("plkj,pq,iq->ijkl", W, gi, Rc)
               - E("qlkp,pq,ij->ijkl", W, ru, g)) / (n - 2)
    summed = (_o(weyl_ric(pk, "pilq"), g, "il,kj") + _o(weyl_ric(pk, "qkjp"), g, "kj,il")
              - _o(weyl_ric(pk, "pikq"), g, "ik,jl") - _o(weyl_ric(pk, "qljp"), g, "lj,ik")) / (n - 2)
    return _pair(ctx, (wb, wb_rhs), (bw, bw_rhs), (-comb(wb + bw), summed))


def ccc_rhs(pk):
    """Right side of the C-combination identity, from D, Ric, R and W only."""
    n, g, Rc, R, N = pk.n, pk.metric, pk.ric, pk.scalar, pk.ric_norm2
    q = ric_sq(pk)
    return (2 * comb(pk.d_tensor)
            + (2 * (n - 1) * N - 2 * R**2) / ((n - 1) * (n - 2) ** 2) * gg(g)
            + 2 / (n - 2) * (_o(Rc, Rc, "ik,lj") - _o(Rc, Rc, "il,jk"))
            - 2 / (n - 2) ** 2 * (_o(q, g, "jl,ik") + _o(q, g, "ki,lj") - _o(q, g, "li,jk") - _o(q, g, "kj,il"))
            + 2 * R / ((n - 1) * (n - 2) ** 2) * (_o(Rc, g, "ik,jl") + _o(Rc, g, "jl,ik") - _o(Rc, g, "jk,il") - _o(Rc, g, "il,jk"))
            + 2 / (n - 2) * (_o(weyl_ric(pk, "pilq"), g, "il,kj") + _o(weyl_ric(pk, "qkjp"), g, "kj,il")
                             - _o(weyl_ric(pk, "pikq"), g, "ik,jl") - _o(weyl_ric(pk, "qljp"), g, "lj,ik")))


@_register(id="ccc_sum", description="the C-combination rewritten through D, Ric and R",
           ref="2 comb(C) = 2 comb(D) + (2(n-1)|Ric|^2 - 2R^2)/((n-1)(n-2)^2) (g_ik g_jl - g_il g_jk) + ... + 2/(n-2) (W R-terms)",
           tolerance=1e-8)
def _ccc_sum(ctx):
    pk = ctx.pack
    lhs = 2 * comb(quadratic_c(pk.inverse_metric, pk.riem))
    return _pair(ctx, (lhs, ccc_rhs(pk)))


@_register(id="ricci_term_expansion", description="the Ric-Rm contraction terms rewritten through W",
           ref="R_ip R^p_jkl + R_jp R_i^p_kl + R_kp R_ij^p_l + R_lp R_ijk^p = (same with W) + 2/(n-2)(...) + 4/(n-2)(R_ik R_jl - R_jk R_il) - 2R/((n-1)(n-2))(...)",
           tolerance=1e-8)
def _ricci_expansion(ctx):
    pk = ctx.pack
    n, g, Rc, R = pk.n, pk.metric, pk.ric, pk.scalar
    q = ric_sq(pk)
    lhs = ric_dot_4(pk, pk.riem)
    rhs = (ric_dot_4(pk, pk.weyl) + 2 / (n - 2) * kn(q, g)
           + 4 / (n - 2) * (_o(Rc, Rc, "ik,jl") - _o(Rc, Rc, "jk,il"))
           - 2 * R / ((n - 1) * (n - 2)) * kn(Rc, g))
    return _pair(ctx, (lhs, rhs))


@_register(id="rpq_ApB_traces", description="R^pq contracted into A, B and Rm",
           ref="R^pq A_piqk = R/((n-1)(n-2)) (R g_ik - R_ik);  R^pq B_piqk = -(|Ric|^2 g_ik + R R_ik - 2 R_ip R^p_k)/(n-2)",
           tolerance=1e-8)
def _rpq_traces(ctx):
    pk = ctx.pack
    n, g, Rc, R, N = pk.n, pk.metric, pk.ric, pk.scalar, pk.ric_norm2
    ru, q = ric_up(pk), ric_sq(pk)
    ra = E("pq,piqk->ik", ru, pk.a_tensor)
    rb = E("pq,piqk->ik", ru, pk.b_tensor)
    rr = E("pq,piqk->ik", ru, pk.riem)
    rr_rhs = (E("pq,piqk->ik", ru, pk.weyl) + (N * g - 2 * q) / (n - 2)
              + R / ((n - 1) * (n - 2)) * (n * Rc - R * g))
    s = ctx.scale2**2
    parts = [_rel(ra, R / ((n - 1) * (n - 2)) * (R * g - Rc), s),
             _rel(rb, -(N * g + R * Rc - 2 * q) / (n - 2), s),
             _rel(rr, rr_rhs, s)]
    return max(parts), {"lhs": _mx(rr), "rhs": _mx(rr_rhs)}


def _pair(ctx, *pairs):
    scale = ctx.scale_quad
    res = [_rel(a, b, scale) for a, b in pairs]
    return max(res), {"lhs": max(_mx(a) for a, _ in pairs), "rhs": max(_mx(b) for _, b in pairs)}


# ---- eigenvalue algebra


def eigen_quadratic_lhs(n, li, lj, R, N) -> float:
    return (n - 1) * (li**2 + lj**2) - (n - 1) * R * (li + lj) + (n - 1) * (n - 2) * li * lj + R**2 - N


def eigen_quadratic_residual(pack, i: int, j: int, gap: float = 1e-6) -> float:
    """Left side of the eigenvalue relation for the ``i``-th and ``j``-th Ricci eigenvalues (ascending).

    ``i == j`` is allowed only for an eigenvalue of multiplicity at least two.
    """
    vals = np.sort(pack.ricci_eigenvalues())
    if i == j:
        scale = max(float(np.max(np.abs(vals))), FLOOR)
        if np.sum(np.abs(vals - vals[i]) <= gap * scale) < 2:
            raise ValueError("i == j needs an eigenvalue of multiplicity >= 2")
    return eigen_quadratic_lhs(pack.n, vals[i], vals[j], pack.scalar, pack.ric_norm2)


@_register(id="eigen_quadratic", description="eigenvalue relation on metrics with vanishing Weyl tensor",
           ref="(n-1)(l_i^2 + l_j^2) - (n-1)R(l_i + l_j) + (n-1)(n-2) l_i l_j + R^2 - |Ric|^2 = 0",
           tolerance=1e-8, n_min=4, applies=_lcf)
def _eigen_quadratic(ctx):
    pk = ctx.pack
    n = pk.n
    vals = np.sort(pk.ricci_eigenvalues())
    es = classify_eigenstructure(pk)
    scale = max(pk.scalar**2, pk.ric_norm2, ctx.scale2**2, FLOOR)
    worst = 0.0
    for i in range(n):
        for j in range(i, n):
            if i == j and es.multiplicities[_cluster_of(es, vals[i])] < 2:
                continue
            worst = max(worst, abs(eigen_quadratic_residual(pk, i, j)))
    return worst / scale, {"lhs": worst, "rhs": 0.0, "pattern": es.label}


def _cluster_of(es, v):
    return int(np.argmin([abs(v - r) for r in es.eigenvalues]))


@_register(id="dim3_void", description="the eigenvalue relation holds identically in dimension three",
           ref="n = 3: 2(l_i^2 + l_j^2) - 2R(l_i + l_j) + 2 l_i l_j + R^2 - |Ric|^2 = -2 l_l (l_i + l_j) - 2 l_i l_j + R^2 - |Ric|^2 = 0",
           tolerance=1e-10, n_max=3)
def _dim3_void(ctx):
    pk = ctx.pack
    vals = np.sort(pk.ricci_eigenvalues())
    R, N = pk.scalar, pk.ric_norm2
    scale = max(R**2, N, ctx.scale2**2, FLOOR)
    worst = 0.0
    for i, j, l in ((0, 1, 2), (0, 2, 1), (1, 2, 0)):
        a = eigen_quadratic_lhs(3, vals[i], vals[j], R, N)
        b = -2 * vals[l] * (vals[i] + vals[j]) - 2 * vals[i] * vals[j] + R**2 - N
        worst = max(worst, abs(a), abs(b), abs(a - b))
    return worst / scale, {"lhs": worst, "rhs": 0.0}


# ---- derivative identities


@_register(id="div_weyl_codazzi", description="divergence of W equals the Schouten curl",
           ref="nabla^l W_ijkl = (n-3)/(n-2) (nabla_j S_ik - nabla_i S_jk)",
           tolerance=1e-6, n_min=4)
def _div_weyl(ctx):
    lhs = divergence_weyl(ctx.chart, ctx.p).data
    rhs = schouten_curl(ctx.chart, ctx.p).data
    return _rel(lhs, rhs, ctx.scale4), {"lhs": _mx(lhs), "rhs": _mx(rhs)}


def lcf_example_ricci_closed(n: int, p, sign: int = 1) -> np.ndarray:
    """Ricci of ``delta / A^2`` from flat derivatives of ``log A``.

    ``sign = +1``: ``(n-2)(D^2 log A + D log A (x) D log A) + (Lap log A - (n-2)|D log A|^2) delta``.
    ``sign = -1`` gives the variant ``-(n-2)(D^2 log A - D log A (x) D log A) + ...``,
    which does not match (kept to document the discrepancy).
    """
    src = "log(1+" + "+".join(f"x{i}^2" for i in range(1, n)) + ")"
    j = exprdsl.eval_jet(src, p, 2)
    eye = np.eye(n, dtype=int)
    hess = np.array([[j.partial(*(eye[a] + eye[b])) for b in range(n)] for a in range(n)])
    grad = j.gradient()
    iso = (np.trace(hess) - (n - 2) * grad @ grad) * np.eye(n)
    return sign * (n - 2) * (hess + sign * np.outer(grad, grad)) + iso


@_register(id="lcf_example_ricci", description="Ricci of the conformally flat example from flat derivatives",
           ref="Ric = (n-2)(D^2 log A + D log A D log A) + (Lap log A - (n-2)|D log A|^2) delta,  A = 1 + x_1^2 + ... + x_{n-1}^2",
           tolerance=1e-8, applies=lambda e: e.name == "lcf_example")
def _lcf_ricci(ctx):
    lhs = ctx.pack.ric
    rhs = lcf_example_ricci_closed(ctx.entry.n, ctx.p)
    return _rel(lhs, rhs, ctx.scale2), {"lhs": _mx(lhs), "rhs": _mx(rhs)}


@_register(id="lcf_example_sigma1", description="the simple Ricci eigenvalue of the example is -2(n-1)(A-2)",
           ref="sigma_1 = g^nn R_nn = A Lap A - (n-1)|D A|^2 = -2(n-1)(A-2)",
           tolerance=1e-8, applies=lambda e: e.name == "lcf_example")
def _lcf_sigma1(ctx):
    pk = ctx.pack
    n = pk.n
    A = 1.0 + sum(x * x for x in ctx.p[: n - 1])
    closed = -2.0 * (n - 1) * (A - 2.0)
    es = classify_eigenstructure(pk)
    from_frame = pk.inverse_metric[n - 1, n - 1] * pk.ric[n - 1, n - 1]
    simple = es.simple if es.pattern == "Split" else from_frame
    scale = max(abs(closed), _mx(es.raw), FLOOR)
    res = max(abs(from_frame - closed), abs(simple - closed)) / scale
    return res, {"lhs": simple, "rhs": closed, "pattern": es.label}


@_register(id="warped_ricci", description="two-block Ricci of dt^2 + h^2 sigma^K",
           ref="Ric = -(n-1) h''/h dt^2 + ((n-2)K - h h'' - (n-2) h'^2) sigma^K",
           tolerance=1e-8, applies=lambda e: e.warped is not None)
def _warped(ctx):
    w = ctx.entry.warped
    chart = ctx.chart
    e = exprdsl.parse_expr(w.h, chart.n, chart.params, chart.profiles)
    jet = exprdsl.eval_jet(e, (ctx.p[0],) + (0.0,) * (chart.n - 1), 2, chart.bindings())
    h = (jet.value, jet.partial(1), jet.partial(2))
    rhs = warped_ricci(chart.n, w.K, h, ctx.p).data
    lhs = ctx.pack.ric
    return _rel(lhs, rhs, ctx.scale2), {"lhs": _mx(lhs), "rhs": _mx(rhs)}


@_register(id="grad_soliton_divergence", description="d_i R = 2 R_il nabla^l f on gradient solitons",
           ref="d_i R = 2 R_il nabla^l f", tolerance=1e-6, n_min=2, applies=_gradient_soliton,
           entry_tolerance={"bryant_profile": 1e-5})
def _grad_div(ctx):
    out = gradient_identity_residuals(ctx.entry.soliton, ctx.p)
    return out["div_res"], {}


@_register(id="radial_weyl_zero", description="radial chain for gradient solitons with W = 0",
           ref="mu/(n-1) nabla_i f = R_ij nabla^j f/(n-1) = nabla_1 nabla^2_i1 f - nabla_i nabla^2_11 f = R_1i1j nabla^j f = lambda/(n-1) nabla_i f",
           tolerance=1e-6, n_min=4, applies=lambda e: _gradient_soliton(e) and _lcf(e),
           entry_tolerance={"bryant_profile": 1e-5})
def _radial(ctx):
    out = gradient_identity_residuals(ctx.entry.soliton, ctx.p)
    if out["radial_res"] is None:
        raise Inapplicable(f"W does not vanish at {ctx.p}")
    return out["radial_res"], {}


# ---- plumbing


@_register(id="bianchi_first", description="first Bianchi identity", ref="R_ijkl + R_jkil + R_kijl = 0",
           tolerance=1e-9, n_min=2, plumbing=True)
def _bianchi1(ctx):
    r = ctx.geom(2).value(ctx.geom(2).riem)
    cyc = r + E("jkil->ijkl", r) + E("kijl->ijkl", r)
    return _mx(cyc) / max(_mx(r), ctx.scale4), {"lhs": _mx(cyc), "rhs": 0.0}


@_register(id="bianchi_second", description="second Bianchi identity",
           ref="nabla_a R_bcde + nabla_b R_cade + nabla_c R_abde = 0", tolerance=1e-6, n_min=2, plumbing=True)
def _bianchi2(ctx):
    geom = ctx.geom(3)
    d = geom.value(geom.nabla("riemann", 1))
    cyc = d + E("bcade->abcde", d) + E("cabde->abcde", d)
    return _mx(cyc) / max(_mx(d), ctx.scale4), {"lhs": _mx(cyc), "rhs": 0.0}


@_register(id="schur", description="contracted second Bianchi identity", ref="d_i R = 2 g^jk nabla_k R_ij",
           tolerance=1e-6, n_min=2, plumbing=True)
def _schur(ctx):
    geom = ctx.geom(3)
    dR = geom.value(geom.sp.gradient(geom.scalar))
    dric = geom.value(geom.nabla("ricci", 1))  # [k, i, j]
    rhs = 2 * E("jk,kij->i", geom.value(geom.ginv), dric)
    return _rel(dR, rhs, ctx.scale2), {"lhs": _mx(dR), "rhs": _mx(rhs)}


@_register(id="metric_compatibility", description="Levi-Civita connection is metric", ref="nabla g = 0",
           tolerance=1e-10, n_min=2, plumbing=True)
def _metric_compat(ctx):
    geom = ctx.geom(1)
    dg = geom.value(geom.nabla("metric", 1))
    return _mx(dg) / max(_mx(geom.value(geom.g)) * max(_mx(geom.value(geom.gamma)), 1.0), FLOOR), {"lhs": _mx(dg)}


@_register(id="soliton_equation", description="soliton equation", ref="R_ij + (nabla_i w_j + nabla_j w_i)/2 = (alpha/n) g_ij",
           tolerance=1e-9, n_min=2, applies=lambda e: e.soliton is not None, plumbing=True,
           entry_tolerance={"gaussian_soliton": 1e-10, "bryant_profile": 1e-6})
def _soliton_eq(ctx):
    res = soliton_residual(ctx.entry.soliton, ctx.p).data
    g = ctx.pack.metric
    scale = max(ctx.scale2, abs(ctx.entry.soliton.alpha) / ctx.entry.n * _mx(g), FLOOR)
    return _mx(res) / scale, {"lhs": _mx(res), "rhs": 0.0}


@_register(id="known_facts", description="catalog ground truth re-verified", ref="catalog expectations",
           tolerance=1e-9, n_min=2, plumbing=True,
           entry_tolerance={"bryant_profile": 1e-6})
def _known_facts(ctx):
    facts = ctx.entry.known_facts
    pk = ctx.pack if ctx.entry.n >= 3 else None
    geom = ctx.geom(2)
    worst, info = 0.0, {}
    if "scalar" in facts:
        R = float(geom.value(geom.scalar))
        worst = max(worst, abs(R - facts["scalar"]) / max(abs(facts["scalar"]), ctx.scale2, 1.0))
    if pk is not None and "weyl_zero" in facts:
        wrel = _mx(pk.weyl) / ctx.scale4
        if facts["weyl_zero"]:
            worst = max(worst, wrel)
        elif wrel <= 0.1:
            worst = max(worst, 1.0)  # expected a visibly nonzero W
        info["weyl_rel"] = wrel
    if pk is not None and "eigen_pattern" in facts:
        es = classify_eigenstructure(pk)
        info["pattern"] = es.label
        if es.pattern != facts["eigen_pattern"]:
            worst = max(worst, 1.0)
    if pk is not None and "ricci_eigenvalues" in facts:
        got = np.sort(pk.ricci_eigenvalues())
        want = np.sort(np.asarray(facts["ricci_eigenvalues"], dtype=float))
        worst = max(worst, _mx(got - want) / max(_mx(want), 1.0))
    if "sectional" in facts:
        worst = max(worst, abs(coordinate_sectional(geom) - facts["sectional"]) / max(abs(facts["sectional"]), 1.0))
    return worst, info


def coordinate_sectional(geom: LocalGeometry) -> float:
    """Largest deviation pattern: returns the sectional curvature of the coordinate plane farthest from the mean.

    For a constant-curvature metric every plane gives the same value.
    """
    g = geom.value(geom.g)
    r = geom.value(geom.riem)
    n = geom.n
    ks = []
    for a in range(n):
        for b in range(a + 1, n):
            den = g[a, a] * g[b, b] - g[a, b] ** 2
            ks.append(r[a, b, a, b] / den)
    ks = np.array(ks)
    return float(ks[np.argmax(np.abs(ks - ks.mean()))])


# ---------------------------------------------------------------- flow checks


@dataclass(frozen=True)
class FlowContext:
    traj: FlowTrajectory
    t: float = 0.05
    h: float = 1e-3
    refinements: int = 1  # residuals at h, h/2, ... h/2**refinements
    _geoms: dict = field(default_factory=dict, compare=False, repr=False)

    def geometry(self, state, p, order: int) -> LocalGeometry:
        """Geometry of the flowed chart at ``state``, shared between the evolution checks."""
        key = (tuple(np.asarray(state, dtype=float)), tuple(p), order)
        geom = self._geoms.get(key)
        if geom is None:
            geom = self._geoms[key] = LocalGeometry(self.traj.family.chart(state), p, order)
        return geom


def flow_context(entry: CatalogEntry, t: float = 0.05, h: float = 1e-3, dt: float = 1e-3) -> FlowContext:
    fam, g0 = family_for(entry)
    steps = int(math.ceil((t + 2 * h) / dt)) + 2
    return FlowContext(integrate_flow(fam, g0, dt, steps), t, h)


def _laplacian(geom: LocalGeometry, name: str) -> np.ndarray:
    d2 = geom.value(geom.nabla(name, 2))
    return np.tensordot(geom.value(geom.ginv), d2, axes=([0, 1], [0, 1]))




def evolution_rhs(geom: LocalGeometry, which: str) -> np.ndarray:
    """Reaction-diffusion right side (Laplacian plus the algebraic terms) at a fixed time."""
    pk = _pack(geom)
    n, g, Rc, R, N = pk.n, pk.metric, pk.ric, pk.scalar, pk.ric_norm2
    if which == "scalar":
        return _laplacian(geom, "scalar") + 2 * N
    if which == "ricci":
        return (_laplacian(geom, "ricci") + 2 * E("kl,kilj->ij", ric_up(pk), pk.riem)
                - 2 * ric_sq(pk))
    if which == "riemann":
        return _laplacian(geom, "riemann") + 2 * comb(pk.c_tensor) - ric_dot_4(pk, pk.riem)
    if which == "weyl":
        q = ric_sq(pk)
        return (_laplacian(geom, "weyl") + 2 * comb(pk.d_tensor) - ric_dot_4(pk, pk.weyl)
                + 2 / (n - 2) ** 2 * kn(q, g) - 2 * R / (n - 2) ** 2 * kn(Rc, g)
                + 2 / (n - 2) * (_o(Rc, Rc, "ik,jl") - _o(Rc, Rc, "jk,il"))
                + 2 * (R**2 - N) / ((n - 1) * (n - 2) ** 2) * gg(g))
    raise CheckError(f"unknown evolution {which!r}")


def evolution_residuals(ctx: FlowContext, which: str, points) -> list[tuple[float, float]]:
    """``[(h, max residual over points), ...]`` for ``h, h/2, ...``."""
    traj = ctx.traj
    state = traj.state_at(ctx.t)
    rhs, scales = [], []
    for p in points:
        geom = ctx.geometry(state, p, 4)
        rhs.append(evolution_rhs(geom, which))
        scales.append(max(_mx(geom.value(geom.riem)), _mx(geom.value(geom.ric)), FLOOR))

    def field_at(s, p):
        geom = ctx.geometry(s, p, 2)
        return geom.value(geom.field(which)[0])

    out = []
    for r in range(ctx.refinements + 1):
        h = ctx.h / 2**r
        worst = 0.0
        for p, rh, sc in zip(points, rhs, scales):
            dt = fd_time_derivative(traj, lambda s: field_at(s, p), ctx.t, h)
            worst = max(worst, _rel(dt, rh, sc))
        out.append((h, worst))
    return out


def _flow_check(which):
    def evaluate(entry, flow_ctx, points):
        return evolution_residuals(flow_ctx, which, points)

    return evaluate


_FLOW_REFS = {
    "weyl": "(d/dt - Lap) W = 2 comb(D) - g^pq(R_ip W_qjkl + ...) + 2/(n-2)^2 g^pq(R_ip R_qk g_jl - ...) - 2R/(n-2)^2 (R_ik g_jl - ...) + 2/(n-2)(R_ik R_jl - R_jk R_il) + 2(R^2 - |Ric|^2)/((n-1)(n-2)^2)(g_ik g_jl - g_il g_jk)",
    "scalar": "dR/dt = Lap R + 2|Ric|^2",
    "ricci": "dR_ij/dt = Lap R_ij + 2 R^kl R_kilj - 2 g^pq R_ip R_jq",
    "riemann": "dR_ijkl/dt = Lap R_ijkl + 2 comb(C) - g^pq(R_ip R_qjkl + R_jp R_iqkl + R_kp R_ijql + R_lp R_ijkq)",
}

for _cid, _which in (("weyl_evolution", "weyl"), ("scalar_evolution", "scalar"),
                     ("ricci_evolution", "ricci"), ("riemann_evolution", "riemann")):
    REGISTRY[_cid] = CheckDef(id=_cid, description=f"{_which} evolution under Ricci flow", ref=_FLOW_REFS[_which],
                              tolerance=1e-3, evaluate=_flow_check(_which), n_min=3,
                              applies=lambda e: e.flow is not None, needs_flow=True)


@_register(id="reduction_consistency", description="reduced flow ODE reproduces -2 Ric",
           ref="d g/dt = -2 Ric", tolerance=1e-9, applies=lambda e: e.flow is not None, plumbing=True)
def _reduction(ctx):
    fam, g0 = family_for(ctx.entry)
    return consistency_residual(fam, g0, ctx.p), {}


PAPER_CHECKS = (
    "weyl_traces", "weyl_dim3", "product_AA", "product_BB", "product_AB_BA", "product_WA_AW",
    "product_WB_BW", "ccc_sum", "ricci_term_expansion", "weyl_evolution", "scalar_evolution",
    "ricci_evolution", "riemann_evolution", "eigen_quadratic", "dim3_void", "div_weyl_codazzi",
    "lcf_example_ricci", "lcf_example_sigma1", "warped_ricci", "grad_soliton_divergence",
    "radial_weyl_zero", "rpq_ApB_traces",
)


# ---------------------------------------------------------------- reports


@dataclass
class CheckReport:
    check_id: str
    paper_ref: str
    metric: str
    n_points: int
    max_residual: float | None
    tolerance: float
    passed: bool | None
    status: str  # pass | fail | inconclusive | error
    convergence: list = field(default_factory=list)
    order: float | None = None
    detail: dict = field(default_factory=dict)
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "check_id": self.check_id,
            "paper_ref": self.paper_ref,
            "metric": self.metric,
            "n_points": self.n_points,
            "max_residual": self.max_residual,
            "tolerance": self.tolerance,
            "pass": self.passed,
            "status": self.status,
            "convergence": [{"h": h, "residual": r} for h, r in self.convergence],
            "order": self.order,
            "detail": self.detail,
            "reason": self.reason,
        }


def convergence_order(conv) -> float | None:
    if len(conv) < 2:
        return None
    (h1, r1), (h2, r2) = conv[0], conv[1]
    if r1 <= EXACT_FLOOR or r2 <= 0:
        return None
    return math.log(r1 / r2) / math.log(h1 / h2)


def run_check(check_id: str, entry: CatalogEntry, points, flow_ctx: FlowContext | None = None,
              contexts: list[PointContext] | None = None) -> CheckReport:
    """Evaluate one check on ``entry`` at ``points``; raises on inapplicable checks.

    ``contexts`` (one per point) lets several checks share the geometry of each point.
    """
    try:
        cdef = REGISTRY[check_id]
    except KeyError:
        raise CheckError(f"unknown check {check_id!r}") from None
    if not cdef.applicable(entry):
        raise CheckError(f"{check_id} does not apply to {entry.label}")
    if cdef.needs_flow and flow_ctx is None:
        raise CheckError(f"{check_id} needs a flow context")
    tol = cdef.tolerance_for(entry)
    points = [tuple(float(x) for x in p) for p in points]
    base = dict(check_id=check_id, paper_ref=cdef.ref, metric=entry.label, n_points=len(points), tolerance=tol)
    if not points:
        return CheckReport(max_residual=None, passed=None, status="inconclusive", reason="no points", **base)
    if cdef.needs_flow:
        conv = cdef.evaluate(entry, flow_ctx, points)
        r0 = conv[0][1]
        order = convergence_order(conv)
        exact = r0 <= EXACT_FLOOR
        ok = bool(r0 <= tol and (exact or (order is not None and order >= MIN_ORDER)))
        detail = {"t": flow_ctx.t, "finite_difference": "exact" if exact else "truncation"}
        return CheckReport(max_residual=r0, passed=ok, status="pass" if ok else "fail",
                           convergence=conv, order=order, detail=detail, **base)
    worst, detail = 0.0, {}
    sides = {"lhs": 0.0, "rhs": 0.0}
    if contexts is None:
        contexts = [PointContext(entry, p) for p in points]
    for p, ctx in zip(points, contexts):
        res, info = cdef.evaluate(ctx)
        if res >= worst:
            worst = res
            detail = {k: v for k, v in info.items() if k not in ("lhs", "rhs")}
            detail["worst_point"] = list(p)
        for k in ("lhs", "rhs"):
            if isinstance(info.get(k), (int, float)):
                sides[k] = max(sides[k], abs(float(info[k])))
    detail.update({f"max_{k}": v for k, v in sides.items()})
    ok = bool(worst <= tol)
    return CheckReport(max_residual=float(worst), passed=ok, status="pass" if ok else "fail", detail=detail, **base)


def applicable_checks(entry: CatalogEntry, include_plumbing: bool = True) -> list[str]:
    return [cid for cid, c in REGISTRY.items()
            if c.applicable(entry) and (include_plumbing or not c.plumbing)]


def _threads(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("WEYLFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return 1


def run_suite(entries, seed: int = 42, point_count: int = 20, threads: int | None = None,
              checks=None, include_plumbing: bool = True) -> list[CheckReport]:
    """Every applicable check on every entry, sorted by (check id, metric).

    Failures inside a check become failed reports with the reason attached.
    ``threads`` (or ``WEYLFLOW_THREADS``) bounds the worker pool.
    """
    entries = list(entries)
    if not entries:
        raise CheckError("run_suite needs at least one catalog entry")
    jobs = []
    for entry in entries:
        pts = sample_points(entry, point_count, seed) if point_count > 0 else []
        ctxs = [PointContext(entry, p) for p in pts]
        flow_ctx = None
        for cid in applicable_checks(entry, include_plumbing):
            if checks is not None and cid not in checks:
                continue
            if REGISTRY[cid].needs_flow and flow_ctx is None:
                flow_ctx = flow_context(entry)
            jobs.append((cid, entry, pts, flow_ctx, ctxs))

    def work(job):
        cid, entry, pts, fctx, ctxs = job
        try:
            return run_check(cid, entry, pts, fctx if REGISTRY[cid].needs_flow else None, ctxs)
        except (ArithmeticError, ValueError, TensorError, np.linalg.LinAlgError) as exc:
            cdef = REGISTRY[cid]
            return CheckReport(cid, cdef.ref, entry.label, len(pts), None, cdef.tolerance_for(entry),
                               False, "error", reason=f"{type(exc).__name__}: {exc}")

    n = _threads(threads)
    if n == 1:
        reports = [work(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=n) as pool:
            reports = list(pool.map(work, jobs))
    return sorted(reports, key=lambda r: (r.check_id, r.metric))


# ---------------------------------------------------------------- serialization

SCHEMA = 1


def _encode(obj) -> str:
    """JSON with every float written as ``%.17g`` (non-finite values become null)."""
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return "%.17g" % x if math.isfinite(x) else "null"
    if isinstance(obj, str):
        import json

        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{_encode(str(k))}: {_encode(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def reports_to_json(reports, header: dict | None = None) -> str:
    """Versioned payload; records in (check id, metric) order, one per line."""
    records = sorted(reports, key=lambda r: (r.check_id, r.metric))
    lines = ",\n".join("  " + _encode(r.to_dict()) for r in records)
    return ('{"schema": %d, "header": %s, "records": [\n%s\n]}\n'
            % (SCHEMA, _encode(header or {}), lines))


CSV_COLUMNS = ("check_id", "metric", "n_points", "max_residual", "tolerance", "pass", "status")


def reports_to_rows(reports):
    for r in sorted(reports, key=lambda r: (r.check_id, r.metric)):
        d = r.to_dict()
        yield [d["check_id"], d["metric"], d["n_points"],
               "" if d["max_residual"] is None else "%.17g" % d["max_residual"],
               "%.17g" % d["tolerance"], "" if d["pass"] is None else str(d["pass"]).lower(), d["status"]]
