"""Ricci flow on families where ``dg/dt = -2 Ric`` reduces to a finite ODE.

Every family here is a product of round spheres and a line, so the metric
is linear in the state (squared scales) and the reduced right-hand side is
constant.  The integrator does not rely on that: it is classical RK4 with
step halving near a vanishing scale.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .catalog import cylinder_chart, product_spheres_chart, sphere_chart, _diag
from .geometry import Domain, MetricChart, curvature_pack, rm_norm
from .tensor import FLOOR, Tensor

MIN_SCALE = 1e-6


class FlowError(ValueError):
    def __init__(self, message: str, blowup_time: float | None = None):
        super().__init__(message)
        self.blowup_time = blowup_time


@dataclass(frozen=True)
class FlowFamily:
    name: str
    n: int
    params: dict
    state_names: tuple[str, ...]
    rates: tuple[float, ...]  # d(state)/dt; constant for these families
    chart_of: Callable[[np.ndarray], MetricChart] = field(repr=False, compare=False)
    probe: tuple[float, ...] = ()  # a chart point away from special loci

    def rhs(self, state) -> np.ndarray:
        return np.array(self.rates, dtype=float)

    def chart(self, state) -> MetricChart:
        return self.chart_of(np.asarray(state, dtype=float))

    def points(self) -> list[tuple[float, ...]]:
        return [tuple(0.0 for _ in range(self.n)), self.probe]


def round_sphere(n: int = 4) -> FlowFamily:
    return FlowFamily("round_sphere", n, {"n": n}, ("r2",), (-2.0 * (n - 1),),
                      lambda s: sphere_chart(n, s[0]), _probe(n))


def product_spheres(p: int = 2, q: int = 2) -> FlowFamily:
    return FlowFamily("product_spheres", p + q, {"p": p, "q": q}, ("a2", "b2"),
                      (-2.0 * (p - 1), -2.0 * (q - 1)),
                      lambda s: product_spheres_chart(p, q, s[0], s[1]), _probe(p + q))


def cylinder(n: int = 4) -> FlowFamily:
    return FlowFamily("cylinder", n, {"n": n}, ("c2", "b2"), (0.0, -2.0 * (n - 2)),
                      lambda s: cylinder_chart(n, 1.0, s[0], s[1]), _probe(n))


def flat(n: int = 4) -> FlowFamily:
    def chart(s):
        return MetricChart("euclidean", n, _diag(n, {i: "c2" for i in range(n)}),
                           Domain.ball_of(n, 1.0), {"c2": s[0]})

    return FlowFamily("flat", n, {"n": n}, ("c2",), (0.0,), chart, _probe(n))


def _probe(n):
    return tuple(0.3 - 0.07 * i for i in range(n))


FAMILIES = {"round_sphere": round_sphere, "product_spheres": product_spheres,
            "cylinder": cylinder, "flat": flat}


def get_family(name: str, **params) -> FlowFamily:
    try:
        return FAMILIES[name](**params)
    except KeyError:
        raise FlowError(f"unknown flow family {name!r}; known: {', '.join(FAMILIES)}") from None


def family_for(entry) -> tuple[FlowFamily, tuple[float, ...]]:
    """Family and initial state of a catalog entry that has a reduced flow."""
    if entry.flow is None:
        raise FlowError(f"{entry.label} has no reduced Ricci flow")
    return get_family(entry.flow.family, **entry.flow.params), entry.flow.state


def consistency_residual(family: FlowFamily, state, p=None) -> float:
    """``max|dg/dt - (-2 Ric)| / max|Ric|`` at ``p``, with ``dg/dt`` from the reduced ODE.

    The metric is linear in the state, so ``dg/dt`` is the metric of the chart
    whose state is the rate vector.
    """
    p = family.probe if p is None else p
    chart = family.chart(state)
    ric = curvature_pack(chart, p).ric if family.n >= 3 else None
    dg = family.chart(family.rhs(state)).metric(p)
    return float(np.max(np.abs(dg + 2 * ric))) / max(float(np.max(np.abs(ric))), FLOOR)


# ---------------------------------------------------------------- integration


@dataclass(frozen=True)
class FlowTrajectory:
    family: FlowFamily
    times: np.ndarray
    states: np.ndarray  # (len(times), len(state))
    steps: tuple[float, ...]  # accepted step sizes
    halvings: int
    blowup_time: float | None
    stop_reason: str

    def _index(self, t: float) -> int:
        if not self.times[0] - 1e-15 <= t <= self.times[-1] + 1e-15:
            raise FlowError(f"t = {t} outside the trajectory [{self.times[0]}, {self.times[-1]}]")
        return max(0, min(int(np.searchsorted(self.times, t, side="right")) - 1, len(self.times) - 2))

    def state_at(self, t: float) -> np.ndarray:
        """State at any ``t`` in range: one RK4 sub-step from the preceding grid time."""
        if len(self.times) == 1:
            return self.states[0].copy()
        k = self._index(t)
        return _rk4(self.family, self.states[k], t - self.times[k])

    @property
    def global_solution(self) -> bool:
        return self.blowup_time is None


def _rk4(family: FlowFamily, y, h: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    k1 = family.rhs(y)
    k2 = family.rhs(y + 0.5 * h * k1)
    k3 = family.rhs(y + 0.5 * h * k2)
    k4 = family.rhs(y + h * k3)
    return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def integrate_flow(family: FlowFamily, g0, dt: float, steps: int, max_halvings: int = 30) -> FlowTrajectory:
    """RK4 for ``steps`` steps of ``dt``; halves the step whenever a scale would fall to ``MIN_SCALE``.

    Stops when ``steps`` steps were taken or once ``max_halvings`` halvings
    (a step of ``dt / 2**max_halvings``) cannot keep every scale above
    ``MIN_SCALE``.
    """
    y = np.asarray(g0, dtype=float)
    if y.shape != (len(family.state_names),):
        raise FlowError(f"{family.name} state is {family.state_names}, got {tuple(np.ravel(g0))}")
    if dt <= 0 or steps < 1:
        raise FlowError("need dt > 0 and steps >= 1")
    if np.any(y <= 0):
        raise FlowError(f"initial state must be positive, got {tuple(y)}", _linear_blowup(family, 0.0, y))
    times, states, taken = [0.0], [y], []
    h, halvings, t = dt, 0, 0.0
    reason = "steps"
    while len(taken) < steps:
        trial = _rk4(family, y, h)
        if np.any(trial <= MIN_SCALE):
            if halvings >= max_halvings:
                reason = "scale"
                break
            h *= 0.5
            halvings += 1
            continue
        t += h
        y = trial
        times.append(t)
        states.append(y)
        taken.append(h)
    T = estimate_blowup_time(family, np.array(times), np.array(states))
    return FlowTrajectory(family, np.array(times), np.array(states), tuple(taken), halvings, T, reason)


def _linear_blowup(family, t, y):
    rate = family.rhs(y)
    cand = [t + yi / -ri for yi, ri in zip(y, rate) if ri < 0]
    return min(cand) if cand else None


def estimate_blowup_time(family: FlowFamily, times, states) -> float | None:
    """First time a scale reaches zero, continuing the reduced solution from the last state.

    The reduced right-hand sides are constant, so this is the exact linear
    solution; ``None`` when no scale decreases (a global solution).
    """
    return _linear_blowup(family, float(np.asarray(times)[-1]), np.atleast_2d(states)[-1])


def rm_extrapolated_blowup(traj: "FlowTrajectory") -> float | None:
    """Independent estimate of T: Richardson-extrapolated zero of ``1 / max|Rm|``.

    ``1/max|Rm|`` is sampled at ``t_end - 2 dt``, ``t_end - dt`` and ``t_end``
    (``dt`` the first step); the zeros of the two secant lines through the
    end point are combined as ``2 T_near - T_far``.
    """
    if len(traj.steps) == 0:
        return None
    t_end, dt = float(traj.times[-1]), traj.steps[0]
    ts = [t for t in (t_end - 2 * dt, t_end - dt, t_end) if t >= traj.times[0]]
    if len(ts) < 3:
        return None
    rms = [max_rm(traj.family, traj.state_at(t)) for t in ts]
    if min(rms) <= 0:
        return None
    inv = [1.0 / r for r in rms]

    def zero(i):
        slope = (inv[2] - inv[i]) / (ts[2] - ts[i])
        return None if slope >= 0 else ts[2] - inv[2] / slope

    near, far = zero(1), zero(0)
    if near is None or far is None:
        return None
    return 2 * near - far


# ---------------------------------------------------------------- derivatives


def fd_time_derivative(traj: FlowTrajectory, quantity: Callable, t: float, h: float):
    """Central difference ``(q(t+h) - q(t-h)) / 2h`` of ``quantity(state)`` along the flow."""
    if h <= 0:
        raise FlowError("h must be positive")
    lo, hi = t - h, t + h
    if lo < traj.times[0] - 1e-15 or hi > traj.times[-1] + 1e-15:
        raise FlowError(f"stencil [{lo}, {hi}] outside the trajectory [{traj.times[0]}, {traj.times[-1]}]")
    qp = quantity(traj.state_at(hi))
    qm = quantity(traj.state_at(lo))
    if isinstance(qp, Tensor):
        return Tensor((qp.data - qm.data) / (2 * h), qp.valence)
    return (np.asarray(qp, dtype=float) - np.asarray(qm, dtype=float)) / (2 * h)


def default_fd_step(traj: FlowTrajectory, t: float) -> float:
    if traj.blowup_time is None:
        return 1e-3
    return 1e-3 * (traj.blowup_time - t)


# ---------------------------------------------------------------- singularities


@dataclass(frozen=True)
class SingularityReport:
    kind: str  # TypeI | TypeIIa | NoSingularity | inconclusive
    limit: float | None
    blowup_time: float | None
    samples: tuple[tuple[float, float], ...]  # (T - t, (T - t) max|Rm|)
    reason: str = ""


def max_rm(family: FlowFamily, state) -> float:
    chart = family.chart(state)
    return max(rm_norm(curvature_pack(chart, p)) for p in family.points())


def singularity_type(traj: FlowTrajectory, approach: float = 1e-4, variation: float = 0.05) -> SingularityReport:
    """Type I / IIa from ``(T - t) max|Rm|`` over the last decade of ``T - t``.

    Needs the trajectory to end within ``approach`` of the blow-up time;
    otherwise the answer is ``inconclusive`` (never guessed).
    """
    T = traj.blowup_time
    fam = traj.family
    if T is None:
        if traj.stop_reason == "steps" and np.all(np.abs(fam.rhs(traj.states[-1])) == 0):
            return SingularityReport("NoSingularity", None, None, (), "static solution")
        rms = [max_rm(fam, s) for s in traj.states[-3:]]
        if all(math.isfinite(r) for r in rms) and rms[-1] <= rms[0] * (1 + variation):
            return SingularityReport("NoSingularity", None, None, (), "curvature stays bounded")
        return SingularityReport("inconclusive", None, None, (), "no blow-up time estimate")
    gap = T - traj.times[-1]
    if gap > approach:
        return SingularityReport("inconclusive", None, T, (), f"trajectory ends {gap:.3g} before T")
    d = max(gap, 1e-12)
    samples = []
    for j in range(9):
        dist = d * 10 ** (j / 8)
        t = T - dist
        if t < traj.times[0]:
            continue
        samples.append((dist, dist * max_rm(fam, traj.state_at(t))))
    if len(samples) < 5:
        return SingularityReport("inconclusive", None, T, tuple(samples), "too few samples in the last decade")
    vals = np.array([v for _, v in samples])
    spread = (vals.max() - vals.min()) / max(vals.max(), FLOOR)
    if spread < variation:
        return SingularityReport("TypeI", float(vals[0]), T, tuple(samples))
    if vals[0] > vals[-1]:
        # growing as t -> T
        return SingularityReport("TypeIIa", None, T, tuple(samples), f"relative variation {spread:.3g}")
    return SingularityReport("inconclusive", None, T, tuple(samples), f"relative variation {spread:.3g}")


# ---------------------------------------------------------------- reports

CSV_HEADER_TAIL = ("R", "ric_norm2", "max_rm", "T_minus_t_max_rm")


def trajectory_rows(traj: FlowTrajectory):
    """Header and rows: ``t``, state, ``R``, ``|Ric|^2``, ``max|Rm|``, ``(T - t) max|Rm|``."""
    fam = traj.family
    header = ("t",) + fam.state_names + CSV_HEADER_TAIL
    rows = []
    for t, s in zip(traj.times, traj.states):
        pack = curvature_pack(fam.chart(s), fam.probe)
        mrm = max_rm(fam, s)
        scaled = (traj.blowup_time - t) * mrm if traj.blowup_time is not None else math.nan
        rows.append((float(t), *map(float, s), pack.scalar, pack.ric_norm2, mrm, scaled))
    return header, rows
