"""Named metric families with closed-form charts and machine-checkable facts.

Spheres and hyperbolic spaces use conformal (stereographic / Poincare) charts;
a factor of constant curvature ``K`` on ``m`` coordinates is written
``4 c / (1 + K |y|^2)^2`` with ``c`` a squared scale, so the same chart serves
the Ricci-flow families by updating ``c``.

Catalog documents (JSON) look like::

    {"name": "lcf_example", "n": 4, "parameters": {},
     "components": {"1,1": "1/(1+x1^2+x2^2+x3^2)^2", ...},
     "domain": {"lo": [...], "hi": [...], "ball": [1, 2, 3, 4], "radius": 1.0}}

Component keys and ball coordinates are 1-based there; omitted components
are zero.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.stats import qmc

from .geometry import Domain, MetricChart


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class WarpedSpec:
    """``g = dt^2 + h(t)^2 sigma^K`` with ``t = x1`` and ``sigma^K`` conformal on x2..xn.

    ``h`` is a DSL expression in ``x1`` (it may reference the chart's profiles).
    """

    K: float
    h: str


@dataclass(frozen=True)
class FlowSpec:
    family: str
    params: dict
    state: tuple[float, ...]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    params: dict
    chart: MetricChart
    known_facts: dict = field(default_factory=dict)
    soliton: Any = None  # soliton.SolitonData, when the metric is a Ricci soliton
    warped: WarpedSpec | None = None
    flow: FlowSpec | None = None

    @property
    def n(self) -> int:
        return self.chart.n

    @property
    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={_fmt(v)}" for k, v in sorted(self.params.items()))
        return f"{self.name}:{inner}"


def _fmt(v) -> str:
    if isinstance(v, float) and v.is_integer():
        return str(int(v))
    return str(v)


# ------------------------------------------------------------ chart pieces


def _sq_sum(coords) -> str:
    return "+".join(f"x{c}^2" for c in coords)


def conformal_factor(coords, K: float, scale: str = "1") -> str:
    """Metric factor of constant curvature ``K / scale`` on the listed coordinates."""
    s = _sq_sum(coords)
    if K == 0:
        return f"4*{scale}"
    return f"4*{scale}/(1+({K!r})*({s}))^2"


def _diag(n: int, exprs: dict[int, str]) -> dict:
    return {(i, i): exprs[i] for i in range(n)}


def sphere_chart(n: int, r2: float = 1.0, name: str = "sphere") -> MetricChart:
    f = conformal_factor(range(1, n + 1), 1.0, "r2")
    return MetricChart(name, n, _diag(n, {i: f for i in range(n)}), Domain.ball_of(n, 1.0), {"r2": r2})


def hyperbolic_chart(n: int, r2: float = 1.0) -> MetricChart:
    f = conformal_factor(range(1, n + 1), -1.0, "r2")
    return MetricChart("hyperbolic", n, _diag(n, {i: f for i in range(n)}), Domain.ball_of(n, 1.0), {"r2": r2})


def product_spheres_chart(p: int, q: int, a2: float, b2: float) -> MetricChart:
    n = p + q
    fa = conformal_factor(range(1, p + 1), 1.0, "a2")
    fb = conformal_factor(range(p + 1, n + 1), 1.0, "b2")
    exprs = {i: (fa if i < p else fb) for i in range(n)}
    # a ball on each factor; the joint box keeps both inside radius 1
    dom = Domain((-1.0,) * n, (1.0,) * n, tuple(range(n)), math.sqrt(2.0))
    return MetricChart("product_spheres", n, _diag(n, exprs), dom, {"a2": a2, "b2": b2})


def cylinder_chart(n: int, K: float = 1.0, c2: float = 1.0, b2: float | None = None) -> MetricChart:
    """``c2 dt^2 + b2 sigma`` with ``sigma`` of curvature ``sign(K)``; ``b2 = 1/|K|``."""
    if K == 0:
        raise CatalogError("cylinder_RxS needs K != 0")
    b2 = 1.0 / abs(K) if b2 is None else b2
    f = conformal_factor(range(2, n + 1), math.copysign(1.0, K), "b2")
    exprs = {0: "c2", **{i: f for i in range(1, n)}}
    dom = Domain((-1.0,) + (-1.0,) * (n - 1), (1.0,) * n, tuple(range(1, n)), 1.0)
    return MetricChart("cylinder_RxS", n, _diag(n, exprs), dom, {"c2": c2, "b2": b2})


def warped_chart(n: int, K: float, h: str, L: float, profiles=None, name="warped_interval") -> MetricChart:
    sig = conformal_factor(range(2, n + 1), K)
    hsq = f"({h})^2*{sig}"
    exprs = {0: "1", **{i: hsq for i in range(1, n)}}
    radius = 1.0 if K >= 0 else 1.0 / math.sqrt(-K)
    dom = Domain((0.0,) + (-radius,) * (n - 1), (L,) + (radius,) * (n - 1), tuple(range(1, n)), radius)
    return MetricChart(name, n, _diag(n, exprs), dom, profiles=profiles)


def lcf_example_chart(n: int) -> MetricChart:
    a = "(1+" + _sq_sum(range(1, n)) + ")"
    f = f"1/{a}^2"
    return MetricChart("lcf_example", n, _diag(n, {i: f for i in range(n)}), Domain.box((-1,) * n, (1,) * n))


def _perturbation(n: int, variant: int) -> dict:
    """Fixed symmetric polynomial P_ij of degree <= 4 (variant 0), or seeded coefficients."""
    rng = np.random.default_rng(variant) if variant else None
    comps = {}
    for i in range(n):
        for j in range(i, n):
            xi, xj = f"x{i + 1}", f"x{j + 1}"
            xk = f"x{(i + j) % n + 1}"
            xl = f"x{(i + 2 * j + 1) % n + 1}"
            if rng is None:
                c = [1.0 + 0.5 * i - 0.25 * j, 0.5 + 0.1 * (i + j), 0.3 - 0.2 * j, 0.25]
            else:
                c = [float(v) for v in np.round(rng.uniform(-1, 1, 4), 6)]
            comps[(i, j)] = f"{c[0]!r}*{xi}*{xj} + {c[1]!r}*{xk}^3 + {c[2]!r}*{xl}*{xi}^2*{xj} + {c[3]!r}*{xk}^2*{xl}^2"
    return comps


def perturbed_flat_chart(n: int, eps: float = 0.1, variant: int = 0) -> MetricChart:
    comps = {}
    for (i, j), poly in _perturbation(n, variant).items():
        base = "1 + " if i == j else ""
        comps[(i, j)] = f"{base}eps*({poly})"
    return MetricChart("perturbed_flat", n, comps, Domain.ball_of(n, 1.0), {"eps": eps})


# ------------------------------------------------------------ entries


def _pos(name, v):
    if v <= 0:
        raise CatalogError(f"parameter {name} must be positive, got {v}")


def _dim(n, lo=2):
    n = int(n)
    if n < lo:
        raise CatalogError(f"dimension must be >= {lo}, got {n}")
    return n


def _euclidean(n=4):
    n = _dim(n)
    chart = MetricChart("euclidean", n, _diag(n, {i: "1" for i in range(n)}), Domain.ball_of(n, 1.0))
    from .soliton import SolitonData

    sol = SolitonData.gradient_of(chart, "0", 0.0)
    return dict(n=n), chart, {"scalar": 0.0, "weyl_zero": True, "eigen_pattern": "Proportional",
                               "ricci_eigenvalues": [0.0] * n, "sectional": 0.0}, sol, None, \
        FlowSpec("flat", {"n": n}, (1.0,))


def _sphere(n=4, r=1.0):
    n = _dim(n)
    r = float(r)
    _pos("r", r)
    chart = sphere_chart(n, r * r)
    from .soliton import SolitonData

    alpha = n * (n - 1) / r**2
    sol = SolitonData.gradient_of(chart, "0", alpha)
    facts = {"scalar": n * (n - 1) / r**2, "weyl_zero": True, "eigen_pattern": "Proportional",
             "ricci_eigenvalues": [(n - 1) / r**2] * n, "sectional": 1.0 / r**2}
    return dict(n=n, r=r), chart, facts, sol, None, FlowSpec("round_sphere", {"n": n}, (r * r,))


def _hyperbolic(n=4, r=1.0):
    n = _dim(n)
    r = float(r)
    _pos("r", r)
    chart = hyperbolic_chart(n, r * r)
    facts = {"scalar": -n * (n - 1) / r**2, "weyl_zero": True, "eigen_pattern": "Proportional",
             "ricci_eigenvalues": [-(n - 1) / r**2] * n, "sectional": -1.0 / r**2}
    return dict(n=n, r=r), chart, facts, None, None, None


def _cylinder(n=4, K=1.0):
    n = _dim(n, 3)
    K = float(K)
    chart = cylinder_chart(n, K)
    from .soliton import SolitonData

    mu = (n - 2) * K
    facts = {"scalar": (n - 1) * mu, "weyl_zero": True,
             "eigen_pattern": "Split" if n > 2 else "Proportional",
             "ricci_eigenvalues": sorted([0.0] + [mu] * (n - 1))}
    sol = None
    warped = WarpedSpec(math.copysign(1.0, K), repr(1.0 / math.sqrt(abs(K))))
    flow = None
    if K > 0:
        # R x S^(n-1) is a shrinking gradient soliton with f = (n-2) K t^2 / 2
        sol = SolitonData.gradient_of(chart, f"{(n - 2) * K!r}*x1^2/2", n * (n - 2) * K)
        flow = FlowSpec("cylinder", {"n": n}, (1.0, 1.0 / K))
    return dict(n=n, K=K), chart, facts, sol, warped, flow


def _product_spheres(p=2, q=2, a=1.0, b=1.0):
    p, q = int(p), int(q)
    if p < 2 or q < 2:
        raise CatalogError("product_spheres needs both factors of dimension >= 2")
    a, b = float(a), float(b)
    _pos("a", a)
    _pos("b", b)
    chart = product_spheres_chart(p, q, a * a, b * b)
    la, lb = (p - 1) / a**2, (q - 1) / b**2
    facts = {"scalar": p * la + q * lb, "weyl_zero": False,
             "ricci_eigenvalues": sorted([la] * p + [lb] * q)}
    if la == lb:
        facts["eigen_pattern"] = "Proportional"
    return dict(p=p, q=q, a=a, b=b), chart, facts, None, None, \
        FlowSpec("product_spheres", {"p": p, "q": q}, (a * a, b * b))


_WARP_PROFILES = {
    "1": ("1", None),
    "sin": ("sin(x1)", math.pi),
    "t": ("x1", None),
    "cosh": ("(exp(x1)+exp(-x1))/2", None),
}


def _warped_interval(n=4, K=1.0, h="sin", L=None):
    n = _dim(n, 3)
    K = float(K)
    h = str(h)  # selectors coerce "1" to an int
    if h not in _WARP_PROFILES:
        raise CatalogError(f"warped_interval h must be one of {sorted(_WARP_PROFILES)}")
    expr, natural_L = _WARP_PROFILES[h]
    L = float(L) if L is not None else (natural_L or 2.0)
    _pos("L", L)
    if natural_L is not None and L > natural_L:
        raise CatalogError(f"h = {h} is only positive on (0, {natural_L})")
    chart = warped_chart(n, K, expr, L)
    facts: dict = {"weyl_zero": True}
    if h == "sin" and K == 1.0:
        facts.update(scalar=float(n * (n - 1)), eigen_pattern="Proportional")
    if h == "t" and K == 1.0:
        facts.update(scalar=0.0, eigen_pattern="Proportional")
    if h == "cosh" and K == -1.0:
        facts.update(scalar=float(-n * (n - 1)), eigen_pattern="Proportional")
    return dict(n=n, K=K, h=h, L=L), chart, facts, None, WarpedSpec(K, expr), None


def _lcf_example(n=4):
    n = _dim(n, 3)
    chart = lcf_example_chart(n)
    return dict(n=n), chart, {"weyl_zero": True, "eigen_pattern": "Split"}, None, None, None


def _gaussian_soliton(n=4, alpha=1.0):
    n = _dim(n)
    alpha = float(alpha)
    chart = MetricChart("gaussian_soliton", n, _diag(n, {i: "1" for i in range(n)}), Domain.ball_of(n, 1.0))
    from .soliton import SolitonData

    f = f"({alpha!r})*({_sq_sum(range(1, n + 1))})/(2*{n})"
    sol = SolitonData.gradient_of(chart, f, alpha)
    return dict(n=n, alpha=alpha), chart, {"scalar": 0.0, "weyl_zero": True,
                                           "eigen_pattern": "Proportional"}, sol, None, None


def _bryant_profile(n=4, L=8.0):
    n = _dim(n, 4)
    L = float(L)
    _pos("L", L)
    from .soliton import bryant_entry_parts

    chart, sol, warped = bryant_entry_parts(n, L)
    return dict(n=n, L=L), chart, {"weyl_zero": True, "eigen_pattern": "Split"}, sol, warped, None


def _perturbed_flat(n=4, eps=0.1, variant=0):
    n = _dim(n)
    eps = float(eps)
    if not 0 < eps <= 0.2:
        raise CatalogError("perturbed_flat needs 0 < eps <= 0.2 to stay positive definite")
    chart = perturbed_flat_chart(n, eps, int(variant))
    facts = {"weyl_zero": n == 3}
    params = dict(n=n, eps=eps)
    if int(variant):
        params["variant"] = int(variant)
    return params, chart, facts, None, None, None


FAMILIES: dict[str, Callable] = {
    "euclidean": _euclidean,
    "sphere": _sphere,
    "hyperbolic": _hyperbolic,
    "cylinder_RxS": _cylinder,
    "product_spheres": _product_spheres,
    "warped_interval": _warped_interval,
    "lcf_example": _lcf_example,
    "gaussian_soliton": _gaussian_soliton,
    "bryant_profile": _bryant_profile,
    "perturbed_flat": _perturbed_flat,
}


def get_metric(name: str, **params) -> CatalogEntry:
    """Build the named family; ``params`` are the family's keyword parameters."""
    try:
        builder = FAMILIES[name]
    except KeyError:
        raise CatalogError(f"unknown metric {name!r}; known: {', '.join(FAMILIES)}") from None
    try:
        used, chart, facts, sol, warped, flow = builder(**params)
    except TypeError as exc:
        raise CatalogError(f"invalid parameters for {name}: {exc}") from None
    return CatalogEntry(name, used, chart, facts, sol, warped, flow)


def parse_selector(text: str) -> CatalogEntry:
    """``"sphere:n=4,r=2"`` -> entry."""
    name, _, rest = text.partition(":")
    params: dict = {}
    for item in filter(None, rest.split(",")):
        key, sep, val = item.partition("=")
        if not sep:
            raise CatalogError(f"bad parameter {item!r} in {text!r}")
        params[key.strip()] = _coerce(val.strip())
    return get_metric(name.strip(), **params)


def _coerce(val: str):
    for cast in (int, float):
        try:
            return cast(val)
        except ValueError:
            pass
    return val


def default_catalog() -> list[CatalogEntry]:
    """The corpus the full suite runs over."""
    return [
        get_metric("euclidean", n=4),
        get_metric("sphere", n=4, r=1.0),
        get_metric("sphere", n=3, r=1.0),
        get_metric("hyperbolic", n=4),
        get_metric("cylinder_RxS", n=4, K=1.0),
        get_metric("product_spheres", p=2, q=2, a=1.0, b=1.0),
        get_metric("warped_interval", n=4, K=1.0, h="sin"),
        get_metric("warped_interval", n=4, K=0.0, h="cosh"),
        get_metric("warped_interval", n=4, K=-1.0, h="cosh"),
        get_metric("lcf_example", n=4),
        get_metric("gaussian_soliton", n=4, alpha=1.0),
        get_metric("gaussian_soliton", n=4, alpha=-1.0),
        get_metric("bryant_profile", n=4),
        get_metric("perturbed_flat", n=4),
        get_metric("perturbed_flat", n=3),
    ]


# ------------------------------------------------------------ sampling


def sample_points(entry: CatalogEntry | MetricChart, count: int, seed: int = 42) -> list[tuple[float, ...]]:
    """Deterministic scrambled-Halton points well inside the chart domain.

    Box coordinates keep 10% of their range away from each end; coordinates
    under a ball constraint stay within 0.8 of the radius.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    chart = entry.chart if isinstance(entry, CatalogEntry) else entry
    dom = chart.domain
    n = chart.n
    lo = np.array(dom.lo, dtype=float)
    hi = np.array(dom.hi, dtype=float)
    lo = np.where(np.isfinite(lo), lo, -1.0)
    hi = np.where(np.isfinite(hi), hi, 1.0)
    span = hi - lo
    ball = list(dom.ball)
    inner_lo, inner_hi = lo + 0.1 * span, hi - 0.1 * span
    rmax = 0.8 * dom.radius
    if ball:
        inner_lo[ball] = np.maximum(lo[ball], -rmax)
        inner_hi[ball] = np.minimum(hi[ball], rmax)
    sampler = qmc.Halton(d=n, scramble=True, seed=seed)
    out: list[tuple[float, ...]] = []
    while len(out) < count:
        u = sampler.random(max(8, 2 * count))
        pts = inner_lo + u * (inner_hi - inner_lo)
        for pt in pts:
            if ball and np.linalg.norm(pt[ball]) > rmax:
                continue
            out.append(tuple(float(x) for x in pt))
            if len(out) == count:
                break
    return out


# ------------------------------------------------------------ documents


def to_document(entry: CatalogEntry | MetricChart) -> dict:
    chart = entry.chart if isinstance(entry, CatalogEntry) else entry
    params = dict(entry.params) if isinstance(entry, CatalogEntry) else {}
    dom = chart.domain
    return {
        "name": entry.name if isinstance(entry, CatalogEntry) else chart.name,
        "n": chart.n,
        "parameters": params,
        "chart_parameters": dict(chart.params),
        "components": {f"{i + 1},{j + 1}": src for (i, j), src in sorted(chart.sources.items())},
        "domain": {
            "lo": [_finite(x) for x in dom.lo],
            "hi": [_finite(x) for x in dom.hi],
            "ball": [b + 1 for b in dom.ball],
            "radius": _finite(dom.radius),
        },
    }


def _finite(x):
    return None if not math.isfinite(x) else float(x)


def load_document(doc: dict, profiles=None) -> MetricChart:
    """Build a chart from a catalog document (see module docstring)."""
    try:
        n = int(doc["n"])
        comps = {}
        for key, src in doc["components"].items():
            i, j = (int(s) - 1 for s in key.split(","))
            comps[(i, j)] = src
        d = doc.get("domain") or {}
        lo = [(-math.inf if x is None else x) for x in d.get("lo", [None] * n)]
        hi = [(math.inf if x is None else x) for x in d.get("hi", [None] * n)]
        radius = d.get("radius")
        dom = Domain(tuple(lo), tuple(hi), tuple(b - 1 for b in d.get("ball", [])),
                     math.inf if radius is None else float(radius))
        params = dict(doc.get("chart_parameters") or {})
    except (KeyError, ValueError, TypeError) as exc:
        raise CatalogError(f"malformed catalog document: {exc}") from None
    return MetricChart(doc.get("name", "custom"), n, comps, dom, params, profiles)


def load_catalog_file(path) -> list[MetricChart]:
    with open(path) as fh:
        data = json.load(fh)
    docs = data if isinstance(data, list) else [data]
    return [load_document(d) for d in docs]
