"""Ricci solitons: residuals, Ricci eigenstructure, warped products and the Bryant profile.

A soliton satisfies ``Ric + (1/2)(nabla w + nabla w^T) = (alpha/n) g``; in the
gradient case ``w = df`` and the symmetric part is ``Hess f``.

The Bryant steady soliton is ``dt^2 + h(t)^2 sigma`` on a half line with
``f = f(t)``.  With ``phi = f'`` the steady equations

    -(n-1) h''/h + phi' = 0
    (n-2)(1 - h'^2) - h h'' + h h' phi = 0

are integrated from a series expansion at the smooth cap ``h(0) = 0,
h'(0) = 1, phi(0) = 0``.  The cap equations leave a one-parameter family
(dilations); it is fixed by prescribing ``Ric = tip_ricci * g`` at the tip.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eigh

from . import exprdsl
from .geometry import LocalGeometry, MetricChart, nabla_jet, rm_norm, _pack
from .jets import jet_space
from .tensor import FLOOR, Tensor, relative_residual

CLUSTER_GAP = 1e-6


class SolitonError(ValueError):
    pass


class Inapplicable(SolitonError):
    """The requested quantity is not defined for this data (e.g. radial_res off LCF)."""


# ---------------------------------------------------------------- data


@dataclass(frozen=True)
class SolitonData:
    chart: MetricChart
    alpha: float
    f: object = None  # potential (Expr) for gradient solitons
    omega: tuple | None = None  # 1-form components (Expr) otherwise

    def __post_init__(self):
        if (self.f is None) == (self.omega is None):
            raise SolitonError("give exactly one of a potential f or a 1-form omega")
        if self.omega is not None and len(self.omega) != self.chart.n:
            raise SolitonError("omega needs one component per coordinate")

    @classmethod
    def gradient_of(cls, chart: MetricChart, f, alpha: float) -> "SolitonData":
        return cls(chart, float(alpha), f=_parse(chart, f))

    @classmethod
    def from_form(cls, chart: MetricChart, omega, alpha: float) -> "SolitonData":
        return cls(chart, float(alpha), omega=tuple(_parse(chart, w) for w in omega))

    @property
    def gradient(self) -> bool:
        return self.f is not None

    @property
    def kind(self) -> str:
        if self.alpha > 0:
            return "shrinking"
        return "steady" if self.alpha == 0 else "expanding"


def _parse(chart, e):
    if isinstance(e, str):
        return exprdsl.parse_expr(e, chart.n, chart.params, chart.profiles)
    return e


def _potential_jets(data: SolitonData, geom: LocalGeometry, times: int):
    """Jets of f, nabla f, ..., nabla^times f (new slot first)."""
    sp = geom.sp
    out = [exprdsl.eval_array(data.f, sp, geom.point, data.chart.bindings())]
    for k in range(times):
        out.append(nabla_jet(sp, out[-1], ("d",) * k, geom.gamma))
    return out


def soliton_residual(data: SolitonData, p) -> Tensor:
    """``Ric + (1/2)(nabla_i w_j + nabla_j w_i) - (alpha/n) g`` at ``p``."""
    geom = LocalGeometry(data.chart, p, 2)
    n = geom.n
    ric = geom.value(geom.ric)
    g = geom.value(geom.g)
    if data.gradient:
        sym = geom.value(_potential_jets(data, geom, 2)[2])
    else:
        b = data.chart.bindings()
        w = np.stack([exprdsl.eval_array(e, geom.sp, geom.point, b) for e in data.omega])
        dw = geom.value(nabla_jet(geom.sp, w, ("d",), geom.gamma))
        sym = 0.5 * (dw + dw.T)
    return Tensor(ric + sym - data.alpha / n * g, ("d", "d"))


# ---------------------------------------------------------------- eigenstructure


@dataclass(frozen=True)
class EigenStructure:
    eigenvalues: tuple[float, ...]  # cluster representatives, ascending
    multiplicities: tuple[int, ...]
    pattern: str  # Proportional | Split | Other
    raw: tuple[float, ...] = ()
    diagnostics: str = ""

    @property
    def label(self) -> str:
        if self.pattern == "Split":
            return f"Split({max(self.multiplicities)},{min(self.multiplicities)})"
        return self.pattern

    @property
    def simple(self) -> float:
        """For Split: the eigenvalue of multiplicity one (``lambda``)."""
        return self.eigenvalues[self.multiplicities.index(1)] if self.pattern == "Split" else math.nan

    @property
    def multiple(self) -> float:
        """For Split: the eigenvalue of multiplicity ``n - 1`` (``mu``)."""
        if self.pattern != "Split":
            return math.nan
        return self.eigenvalues[self.multiplicities.index(max(self.multiplicities))]


def cluster(values, gap: float = CLUSTER_GAP):
    """Group sorted values whose neighbours differ by at most ``gap`` times the spectrum scale."""
    vals = np.sort(np.asarray(values, dtype=float))
    scale = max(float(np.max(np.abs(vals))), FLOOR) if vals.size else FLOOR
    groups = [[vals[0]]]
    for a, b in zip(vals[:-1], vals[1:]):
        if b - a > gap * scale:
            groups.append([b])
        else:
            groups[-1].append(b)
    return groups, scale


def classify_eigenstructure(pack, gap: float = CLUSTER_GAP) -> EigenStructure:
    """Cluster the eigenvalues of ``g^-1 Ric`` and name the pattern."""
    vals = eigh(pack.ric, pack.metric, eigvals_only=True)
    n = len(vals)
    groups, scale = cluster(vals, gap)
    reps = tuple(float(np.mean(gr)) for gr in groups)
    mult = tuple(len(gr) for gr in groups)
    if len(groups) == 1:
        pattern = "Proportional"
    elif len(groups) == 2 and sorted(mult) == [1, n - 1]:
        pattern = "Split"
    else:
        pattern = "Other"
    # a gap just above the threshold is worth flagging: a perturbation may merge it
    near = [float(b - a) / scale for a, b in zip(np.sort(vals)[:-1], np.sort(vals)[1:])
            if gap < (b - a) / scale < 1e3 * gap]
    diag = f"near-degenerate relative gaps {near}" if near else ""
    return EigenStructure(reps, mult, pattern, tuple(float(v) for v in vals), diag)


# ---------------------------------------------------------------- warped products


def sigma_factor(K: float, y) -> float:
    """Conformal factor of the curvature-``K`` chart used by the catalog: ``4 / (1 + K|y|^2)^2``."""
    r2 = float(np.dot(y, y))
    return 4.0 / (1.0 + K * r2) ** 2


def warped_ricci(n: int, K: float, h, point) -> Tensor:
    """Two-block Ricci of ``dt^2 + h^2 sigma^K`` at ``point = (t, y_2, ..., y_n)``.

    ``h`` is a jet of order >= 2 in ``t`` or the triple ``(h, h', h'')``.
    """
    if isinstance(h, exprdsl.Jet):
        h0, h1, h2 = h.value, h.partial(1), h.partial(2)
    else:
        h0, h1, h2 = (float(v) for v in h)
    if h0 <= 0:
        raise SolitonError(f"warping function must be positive, got h = {h0}")
    sig = sigma_factor(K, np.asarray(point[1:], dtype=float))
    out = np.zeros((n, n))
    out[0, 0] = -(n - 1) * h2 / h0
    coef = (n - 2) * K - h0 * h2 - (n - 2) * h1**2
    out[np.arange(1, n), np.arange(1, n)] = coef * sig
    return Tensor(out, ("d", "d"))


# ---------------------------------------------------------------- Bryant


def cap_coefficients(n: int, tip_ricci: float = 1.0):
    """Series ``h = t + a t^3 + c5 t^5``, ``phi = f' = b1 t + b3 t^3`` at the cap."""
    a = -tip_ricci / (6.0 * (n - 1))
    c5 = 3.0 * a * a * (13 * n - 10) / (10.0 * (n + 2))
    b1 = 6.0 * a * (n - 1)
    b3 = 24.0 * a * a * (n - 1) ** 2 / (n + 2)
    return a, c5, b1, b3


def _rhs(n):
    def rhs(t, y):
        h, p, phi, _f = y
        hpp = (n - 2) * (1.0 - p * p) / h + p * phi
        return [p, hpp, (n - 1) * hpp / h, phi]

    return rhs


def _series_state(n, t, coeffs):
    a, c5, b1, b3 = coeffs
    return np.array([
        t + a * t**3 + c5 * t**5,
        1 + 3 * a * t**2 + 5 * c5 * t**4,
        b1 * t + b3 * t**3,
        b1 * t**2 / 2 + b3 * t**4 / 4,
    ])


def _series_derivs(n, t, coeffs, order):
    """Derivatives of h and f from the cap polynomials (used for t <= the start point)."""
    a, c5, b1, b3 = coeffs
    hp = np.polynomial.Polynomial([0, 1, 0, a, 0, c5])
    fp = np.polynomial.Polynomial([0, 0, b1 / 2, 0, b3 / 4])
    dh = [hp.deriv(k)(t) if k else hp(t) for k in range(order + 1)]
    df = [fp.deriv(k)(t) if k else fp(t) for k in range(order + 1)]
    return np.array(dh), np.array(df)


def taylor_state(n: int, state, order: int):
    """Derivatives up to ``order`` of ``h`` and ``f`` at a regular point, by Taylor recursion on the ODE."""
    sp = jet_space(1, max(order, 1))
    m = sp.size  # coefficients of s^0 .. s^order
    ys = [np.zeros(m) for _ in range(4)]
    for y, v in zip(ys, state):
        y[0] = v
    for k in range(order):
        h, p, phi, _ = ys
        inv_h = sp.reciprocal(h)
        hpp = (n - 2) * sp.mul(sp.constant(1.0) - sp.mul(p, p), inv_h) + sp.mul(p, phi)
        rhs = [p, hpp, (n - 1) * sp.mul(hpp, inv_h), phi]
        for y, r in zip(ys, rhs):
            y[k + 1] = r[k] / (k + 1)
    fact = np.array([math.factorial(k) for k in range(m)])
    return ys[0][: order + 1] * fact[: order + 1], ys[3][: order + 1] * fact[: order + 1]


@dataclass(frozen=True)
class BryantProfile:
    n: int
    L: float
    tip_ricci: float
    start: float
    t: np.ndarray
    h: np.ndarray
    hp: np.ndarray
    hpp: np.ndarray
    fp: np.ndarray
    fpp: np.ndarray
    solution: object  # scipy OdeSolution (dense output)

    def state(self, t: float) -> np.ndarray:
        if not 0.0 <= t <= self.L * (1 + 1e-12):
            raise SolitonError(f"t = {t} outside the solved range [0, {self.L}]")
        if t <= self.start:
            return _series_state(self.n, t, cap_coefficients(self.n, self.tip_ricci))
        return self.solution(t)

    def derivatives(self, t: float, order: int):
        """``([h, h', ..., h^(order)], [f, f', ...])`` at ``t``."""
        if t <= self.start:
            return _series_derivs(self.n, t, cap_coefficients(self.n, self.tip_ricci), order)
        return taylor_state(self.n, self.state(t), order)

    def h_profile(self, u0: float, order: int) -> np.ndarray:
        return self.derivatives(u0, order)[0]

    def f_profile(self, u0: float, order: int) -> np.ndarray:
        return self.derivatives(u0, order)[1]

    @cached_property
    def ricci_blocks(self):
        """``(lambda, mu)``: radial eigenvalue and the (n-1)-fold tangential one on the grid."""
        n = self.n
        with np.errstate(divide="ignore", invalid="ignore"):
            lam = -(n - 1) * self.hpp / self.h
            mu = ((n - 2) * (1 - self.hp**2) - self.h * self.hpp) / self.h**2
        tip = self.h == 0.0
        lam[tip] = self.tip_ricci
        mu[tip] = self.tip_ricci
        return lam, mu

    @property
    def scalar(self) -> np.ndarray:
        lam, mu = self.ricci_blocks
        return lam + (self.n - 1) * mu

    def rows(self):
        """CSV rows ``t, h, h', h'', f', R, lambda, mu`` over the grid."""
        lam, mu = self.ricci_blocks
        return np.column_stack([self.t, self.h, self.hp, self.hpp, self.fp, self.scalar, lam, mu])


def bryant_chart(profile: BryantProfile) -> MetricChart:
    from .catalog import warped_chart

    profiles = {"h": profile.h_profile, "F": profile.f_profile}
    return warped_chart(profile.n, 1.0, "h(x1)", profile.L, profiles, name="bryant_profile")


def bryant_solve(n: int, L: float, tol: float = 1e-6, tip_ricci: float = 1.0,
                 grid: int = 201, check_points: int = 9, start: float = 1e-4) -> BryantProfile:
    """Integrate the steady Bryant profile on ``[0, L]`` and certify it through the curvature pipeline.

    Raises :class:`SolitonError` if integration fails or if the soliton or
    Weyl residual exceeds ``tol`` at one of ``check_points`` interior points.
    """
    if n < 4:
        raise SolitonError("the Bryant profile is built for n >= 4")
    if not L > start:
        raise SolitonError(f"length must exceed the series start {start}")
    if tip_ricci <= 0:
        raise SolitonError("tip Ricci curvature must be positive")
    coeffs = cap_coefficients(n, tip_ricci)
    y0 = _series_state(n, start, coeffs)
    sol = solve_ivp(_rhs(n), (start, L), y0, method="DOP853", rtol=1e-13, atol=1e-15, dense_output=True)
    if not sol.success:
        raise SolitonError(f"Bryant integration failed: {sol.message}")
    t = np.linspace(0.0, L, grid)
    states = np.array([_series_state(n, s, coeffs) if s <= start else sol.sol(s) for s in t])
    h, hp, fp = states[:, 0], states[:, 1], states[:, 2]
    with np.errstate(divide="ignore", invalid="ignore"):
        hpp = (n - 2) * (1 - hp**2) / h + hp * fp
        fpp = (n - 1) * hpp / h
    # the quotients are 0/0 at the tip; use the cap limits there
    a, c5, b1, b3 = coeffs
    hpp[0], fpp[0] = 0.0, b1
    profile = BryantProfile(n, float(L), float(tip_ricci), start, t, h, hp, hpp, fp, fpp, sol.sol)
    _certify(profile, tol, check_points)
    return profile


def _certify(profile: BryantProfile, tol: float, count: int):
    chart = bryant_chart(profile)
    data = SolitonData.gradient_of(chart, "F(x1)", 0.0)
    for t in np.linspace(0.1 * profile.L, 0.9 * profile.L, count):
        p = (float(t),) + (0.0,) * (profile.n - 1)
        res = relative_residual(soliton_residual(data, p), 0.0, scale=_ricci_scale(chart, p))
        if res > tol:
            raise SolitonError(f"Bryant soliton residual {res:.3g} exceeds {tol:g} at t = {t:.6g}")
        pack = _pack(LocalGeometry(chart, p, 2))
        wres = relative_residual(pack.weyl, 0.0, scale=max(float(np.max(np.abs(pack.riem))), FLOOR))
        if wres > tol:
            raise SolitonError(f"Bryant Weyl residual {wres:.3g} exceeds {tol:g} at t = {t:.6g}")


def _ricci_scale(chart, p) -> float:
    geom = LocalGeometry(chart, p, 2)
    return max(float(np.max(np.abs(geom.value(geom.ric)))), FLOOR)


_BRYANT_CACHE: dict = {}


def cached_bryant(n: int, L: float, tip_ricci: float = 1.0) -> BryantProfile:
    key = (n, float(L), float(tip_ricci))
    if key not in _BRYANT_CACHE:
        _BRYANT_CACHE[key] = bryant_solve(n, L, tip_ricci=tip_ricci)
    return _BRYANT_CACHE[key]


def bryant_entry_parts(n: int, L: float):
    """Chart, soliton data and warped description for the catalog entry."""
    from .catalog import WarpedSpec

    profile = cached_bryant(n, L)
    chart = bryant_chart(profile)
    return chart, SolitonData.gradient_of(chart, "F(x1)", 0.0), WarpedSpec(1.0, "h(x1)")


# ---------------------------------------------------------------- gradient identities


def gradient_identity_residuals(data: SolitonData, p, weyl_tol: float = 1e-8) -> dict:
    """Residuals of the pointwise identities of a gradient soliton.

    ``div_res``: ``d_i R - 2 R_il nabla^l f``.
    ``radial_res``: in an orthonormal Ricci eigenframe ``E_1, ..., E_n`` with
    ``E_1`` the simple eigendirection, for every ``i > 1`` the four quantities

        R_ij nabla^j f / (n-1),
        nabla_1 nabla^2_{i1} f - nabla_i nabla^2_{11} f,
        R_{1i1j} nabla^j f,
        lambda nabla_i f / (n-1)

    must agree (``W = 0`` is required for the last two steps).  Both are
    normalized by ``|Rm| max(1, |df|)``.  Returns ``None`` for ``radial_res``
    when the Weyl tensor does not vanish at ``p``; use
    :func:`radial_residual` to get an exception instead.
    """
    if not data.gradient:
        raise SolitonError("gradient identities need a potential function")
    geom = LocalGeometry(data.chart, p, 3)
    n = geom.n
    v = geom.value
    ginv = v(geom.ginv)
    ric = v(geom.ric)
    jets = _potential_jets(data, geom, 3)
    df, third = v(jets[1]), v(jets[3])
    dR = v(geom.sp.gradient(geom.scalar))
    grad_up = ginv @ df
    pack = _pack(LocalGeometry(data.chart, p, 2))
    dfnorm = math.sqrt(max(float(df @ grad_up), 0.0))
    scale = max(rm_norm(pack) * max(1.0, dfnorm), FLOOR)
    div_res = float(np.max(np.abs(dR - 2 * ric @ grad_up))) / scale

    weyl_rel = float(np.max(np.abs(pack.weyl))) / max(float(np.max(np.abs(pack.riem))), FLOOR)
    if weyl_rel > weyl_tol:
        return {"div_res": div_res, "radial_res": None, "weyl_residual": weyl_rel}

    frame = _soliton_frame(pack, df, grad_up)
    if frame is None:
        return {"div_res": div_res, "radial_res": 0.0, "weyl_residual": weyl_rel}
    E, lam = frame
    dff = E.T @ df
    ricf = E.T @ ric @ E
    riemf = np.einsum("ia,jb,kc,ld,ijkl->abcd", E, E, E, E, pack.riem)
    thf = np.einsum("ia,jb,kc,ijk->abc", E, E, E, third)
    worst = 0.0
    for i in range(1, n):
        a = ricf[i] @ dff / (n - 1)
        b = thf[0, i, 0] - thf[i, 0, 0]
        c = riemf[0, i, 0] @ dff
        d = lam * dff[i] / (n - 1)
        worst = max(worst, abs(a - b), abs(b - c), abs(c - d))
    return {"div_res": div_res, "radial_res": worst / scale, "weyl_residual": weyl_rel}


def radial_residual(data: SolitonData, p, weyl_tol: float = 1e-8) -> float:
    out = gradient_identity_residuals(data, p, weyl_tol)
    if out["radial_res"] is None:
        raise Inapplicable(f"radial identity needs W = 0; relative |W| = {out['weyl_residual']:.3g} at {tuple(p)}")
    return out["radial_res"]


def _soliton_frame(pack, df, grad_up):
    """g-orthonormal frame (columns) with E_1 the simple Ricci direction, and its eigenvalue."""
    vals, vecs = eigh(pack.ric, pack.metric)
    es = classify_eigenstructure(pack)
    if es.pattern == "Split":
        lam = es.simple
        k = int(np.argmin(np.abs(vals - lam)))
        first = vecs[:, k]
    elif es.pattern == "Proportional":
        norm = math.sqrt(max(float(df @ grad_up), 0.0))
        if norm == 0.0:
            return None
        first = grad_up / norm
        lam = float(np.mean(vals))
    else:
        raise Inapplicable(f"radial identity needs a Proportional or Split Ricci tensor, got {es.label}")
    g = pack.metric
    basis = [first]
    for c in np.eye(len(first)):
        w = c - sum((b @ g @ c) * b for b in basis)
        nw = math.sqrt(max(float(w @ g @ w), 0.0))
        if nw > 1e-8:
            basis.append(w / nw)
        if len(basis) == len(first):
            break
    return np.column_stack(basis), lam


# ---------------------------------------------------------------- two multiplicities


def _quadratic_roots(a: float, b: float, c: float, tol: float) -> list[float]:
    """Real roots of ``a x^2 + b x + c``; a discriminant within ``tol`` of zero is a double root."""
    if abs(a) <= tol:
        return [] if abs(b) <= tol else [-c / b]
    disc = b * b - 4 * a * c
    if abs(disc) <= tol * max(b * b, abs(4 * a * c), 1.0):
        return [-b / (2 * a)]
    if disc < 0:
        return []
    root = math.sqrt(disc)
    return [(-b - root) / (2 * a), (-b + root) / (2 * a)]


def two_multiplicity_roots(n: int, k: int, tol: float = 1e-9) -> list[float]:
    """Common real roots ``lambda`` (with ``mu = 1``) of the pair of quadratics

        n x^2 - 2 R x = (|Ric|^2 - R^2) / (n - 1),   x in {lambda, mu},

    where ``R = k lambda + (n-k) mu`` and ``|Ric|^2 = k lambda^2 + (n-k) mu^2``.
    The ``mu = 0`` direction is checked separately and reported as ``inf``.
    Only ``lambda = mu`` (root 1.0) is expected.
    """
    if not 1 <= k <= n - 1:
        raise ValueError("multiplicity k must be in 1..n-1")

    def q(lam, mu, x):
        R = k * lam + (n - k) * mu
        N = k * lam**2 + (n - k) * mu**2
        return n * x * x - 2 * R * x - (N - R * R) / (n - 1)

    m = n - k
    # q(lam, 1, lam) and q(lam, 1, 1) as quadratics in lam
    first = (n - 2 * k - (k - k * k) / (n - 1), -2 * m + 2 * k * m / (n - 1), -(m - m * m) / (n - 1))
    second = (-(k - k * k) / (n - 1), -2 * k + 2 * k * m / (n - 1), n - 2 * m - (m - m * m) / (n - 1))
    if all(abs(c) <= tol for c in first):
        # every lambda solves the first equation (k = n - 1); the second decides
        common = _quadratic_roots(*second, tol)
    else:
        common = [lam for lam in _quadratic_roots(*first, tol)
                  if abs(q(lam, 1.0, 1.0)) <= tol * max(1.0, lam * lam)]
    if abs(q(1.0, 0.0, 1.0)) <= tol and abs(q(1.0, 0.0, 0.0)) <= tol:
        common.append(math.inf)
    return sorted(set(round(c, 9) for c in common))


def bryant_summary(profile: BryantProfile, count: int = 9) -> dict:
    """Pipeline residuals of a solved profile at ``count`` interior points of ``[0.1 L, 0.9 L]``."""
    chart = bryant_chart(profile)
    data = SolitonData.gradient_of(chart, "F(x1)", 0.0)
    worst = {"soliton_residual": 0.0, "weyl_residual": 0.0, "div_res": 0.0, "radial_res": 0.0}
    patterns = set()
    for t in np.linspace(0.1 * profile.L, 0.9 * profile.L, count):
        p = (float(t),) + (0.0,) * (profile.n - 1)
        res = relative_residual(soliton_residual(data, p), 0.0, scale=_ricci_scale(chart, p))
        grad = gradient_identity_residuals(data, p, weyl_tol=1e-6)
        pack = _pack(LocalGeometry(chart, p, 2))
        patterns.add(classify_eigenstructure(pack).label)
        worst["soliton_residual"] = max(worst["soliton_residual"], res)
        worst["weyl_residual"] = max(worst["weyl_residual"], grad["weyl_residual"])
        worst["div_res"] = max(worst["div_res"], grad["div_res"])
        if grad["radial_res"] is not None:
            worst["radial_res"] = max(worst["radial_res"], grad["radial_res"])
    return {"n": profile.n, "length": profile.L, "tip_ricci": profile.tip_ricci, "points": count,
            **worst, "eigenstructure": sorted(patterns)}
