"""Acceleration-free curves: particles moving on straight lines at constant speed."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ._exact import lerp
from .errors import DimensionMismatch, NoRadius, OutOfRange
from .measures import DiscreteMeasure, merge_atoms, new_discrete
from .transport import TransportPlan, glue_plans, is_cyclically_monotone, solve_w2

GEODESIC_RTOL = 1e-7
MIN_RADIUS = 1e-9
CROSS_TOL = 1e-9
CROSS_MERGE = 1e-12


class CurveKind(str, enum.Enum):
    FROM_PLAN = "FromPlan"
    GEODESIC = "Geodesic"
    GENERALIZED_GEODESIC = "GeneralizedGeodesic"


@dataclass(frozen=True, eq=False)
class AccelerationFreeCurve:
    """t -> sum_k theta_k delta_{(1 - t) start_k + t end_k} on [0, 1].

    Positions are interpolated from both endpoints so that t = 0 and t = 1
    reproduce the endpoint atoms bit for bit.
    """

    start: np.ndarray
    end: np.ndarray
    theta: np.ndarray
    kind: CurveKind = CurveKind.FROM_PLAN

    @property
    def velocity(self) -> np.ndarray:
        return self.end - self.start

    @property
    def dim(self) -> int:
        return self.start.shape[1]

    @property
    def n_particles(self) -> int:
        return self.theta.shape[0]

    @property
    def plan_cost(self) -> float:
        """Quadratic cost of the generating plan, sum theta_k |velocity_k|^2."""
        sq = np.einsum("ij,ij->i", self.velocity, self.velocity)
        return math.fsum(self.theta * sq)

    def positions(self, t: float) -> np.ndarray:
        return lerp(self.start, self.end, float(t))

    def __call__(self, t: float) -> DiscreteMeasure:
        return evaluate(self, t)


def make_curve(start, end, theta, kind: CurveKind = CurveKind.FROM_PLAN) -> AccelerationFreeCurve:
    """Curve from explicit particles; ``start``/``end`` are (l, d), ``theta`` sums to 1."""
    start = np.array(start, dtype=float)
    end = np.array(end, dtype=float)
    theta = np.array(theta, dtype=float)
    if start.ndim == 1:
        start, end = start[:, None], end[:, None]
    if start.shape != end.shape or start.shape[0] != theta.shape[0]:
        raise DimensionMismatch("start, end and theta must describe the same particles")
    if np.any(theta <= 0) or abs(math.fsum(theta) - 1.0) > 1e-12:
        raise ValueError("particle masses must be positive and sum to 1")
    for arr in (start, end, theta):
        arr.setflags(write=False)
    return AccelerationFreeCurve(start, end, theta, kind)


def curve_from_plan(plan: TransportPlan, certify: bool = True) -> AccelerationFreeCurve:
    """One particle per plan entry, moving from x_i to y_j.

    With ``certify`` the kind is upgraded to GEODESIC when the plan passes the
    full-length cyclical-monotonicity certificate.
    """
    x, y = plan.support_points()
    kind = CurveKind.FROM_PLAN
    if certify and is_cyclically_monotone(plan, plan.support_size):
        kind = CurveKind.GEODESIC
    return make_curve(x, y, plan.masses, kind)


def geodesic(mu: DiscreteMeasure, nu: DiscreteMeasure) -> AccelerationFreeCurve:
    return curve_from_plan(solve_w2(mu, nu).plan)


def generalized_geodesic(mu1: DiscreteMeasure, mu2: DiscreteMeasure, mu3: DiscreteMeasure) -> AccelerationFreeCurve:
    """Curve from mu2 to mu3 along optimal plans glued over the base mu1."""
    if not (mu1.dim == mu2.dim == mu3.dim):
        raise DimensionMismatch("generalized geodesic needs measures of equal dimension")
    glued = glue_plans(solve_w2(mu1, mu2).plan, solve_w2(mu1, mu3).plan)
    x2 = glued.second.atoms[glued.i2]
    x3 = glued.third.atoms[glued.i3]
    return make_curve(x2, x3, glued.masses, CurveKind.GENERALIZED_GEODESIC)


def _check_time(t: float) -> None:
    if not (0.0 <= t <= 1.0):
        raise OutOfRange(f"t={t!r} outside [0, 1]")


def evaluate_with_index(c: AccelerationFreeCurve, t: float) -> tuple[DiscreteMeasure, np.ndarray]:
    """Measure at time t plus, for each particle, the index of the atom it sits on."""
    _check_time(t)
    atoms, weights, index = merge_atoms(c.positions(t), c.theta)
    mu = new_discrete(atoms, weights)
    if mu.size != atoms.shape[0]:
        # renormalization never reorders; a size change would mean a second merge
        index = np.array([int(np.argmin(np.linalg.norm(mu.atoms - p, axis=1))) for p in c.positions(t)])
    return mu, index


def evaluate(c: AccelerationFreeCurve, t: float) -> DiscreteMeasure:
    """The measure mu_t, with coincident particles merged into one atom."""
    return evaluate_with_index(c, t)[0]


def crossing_times(c: AccelerationFreeCurve) -> list[float]:
    """Sorted times in [0, 1] at which two particle lines with different velocities meet."""
    times: list[float] = []
    vel = c.velocity
    for p in range(c.n_particles):
        dz = vel[p] - vel[p + 1 :]
        dw = c.start[p + 1 :] - c.start[p]
        for k in range(dz.shape[0]):
            dzk = dz[k]
            axis = int(np.argmax(np.abs(dzk)))
            if dzk[axis] == 0.0:
                continue  # parallel lines: identical forever or never meeting
            t = dw[k, axis] / dzk[axis]
            if t < -CROSS_TOL or t > 1.0 + CROSS_TOL:
                continue
            if np.all(np.abs(dzk * t - dw[k]) <= CROSS_TOL):
                times.append(float(min(max(t, 0.0), 1.0)))
    times.sort()
    merged: list[float] = []
    for t in times:
        if not merged or t - merged[-1] > CROSS_MERGE:
            merged.append(t)
    return merged


def _speed_matches(c: AccelerationFreeCurve, a: float, b: float, speed: float) -> bool:
    expected = (b - a) * speed
    got = solve_w2(evaluate(c, a), evaluate(c, b)).w2
    return abs(got - expected) <= GEODESIC_RTOL * expected + 1e-15


def restriction_is_geodesic(c: AccelerationFreeCurve, s: float, r: float) -> bool:
    """Whether the curve restricted to [s, r] moves at the full plan speed.

    Checks W2(mu_s, mu_r) = (r - s) sqrt(plan_cost) to 1e-7 relative, and the
    same identity from the midpoint to both ends.
    """
    _check_time(s)
    _check_time(r)
    if not s < r:
        raise OutOfRange(f"need s < r, got s={s!r}, r={r!r}")
    speed = math.sqrt(c.plan_cost)
    m = 0.5 * (s + r)
    return (
        _speed_matches(c, s, r, speed)
        and _speed_matches(c, s, m, speed)
        and _speed_matches(c, m, r, speed)
    )


def local_geodesic_radius(c: AccelerationFreeCurve, s: float, direction: str = "+") -> float:
    """A certified eps > 0 such that the curve is a geodesic on [s, s + eps] (or [s - eps, s]).

    Starts from half the distance to the next crossing time in the chosen
    direction (or to the end of [0, 1]) and halves until the restriction
    passes :func:`restriction_is_geodesic`.
    """
    if direction not in ("+", "-"):
        raise ValueError("direction must be '+' or '-'")
    if direction == "+" and not (0.0 <= s < 1.0):
        raise OutOfRange(f"forward radius needs 0 <= s < 1, got {s!r}")
    if direction == "-" and not (0.0 < s <= 1.0):
        raise OutOfRange(f"backward radius needs 0 < s <= 1, got {s!r}")

    times = crossing_times(c)
    if direction == "+":
        ahead = [t for t in times if t > s + CROSS_MERGE]
        gap = (ahead[0] if ahead else 1.0) - s
    else:
        behind = [t for t in times if t < s - CROSS_MERGE]
        gap = s - (behind[-1] if behind else 0.0)

    eps = 0.5 * gap
    while eps >= MIN_RADIUS:
        lo, hi = (s, min(s + eps, 1.0)) if direction == "+" else (max(s - eps, 0.0), s)
        if restriction_is_geodesic(c, lo, hi):
            return hi - lo
        eps *= 0.5
    raise NoRadius(f"no geodesic radius >= {MIN_RADIUS} certified at s={s!r}")


def curve_to_rows(c: AccelerationFreeCurve, times) -> list[tuple]:
    """Flatten the curve over a time grid into (t, atom_index, *x, weight) rows."""
    rows = []
    for t in times:
        mu = evaluate(c, float(t))
        for i in range(mu.size):
            rows.append((float(t), i, *mu.atoms[i].tolist(), float(mu.weights[i])))
    return rows
