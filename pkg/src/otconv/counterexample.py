"""The tent-kernel interaction energy: geodesically convex yet not convex along
acceleration-free curves.

Two half-mass particles on the line swap places (crossing curve), or move
monotonically with a kink in the energy profile (kink geodesic).
"""

from __future__ import annotations

import numpy as np

from .curves import AccelerationFreeCurve, CurveKind, evaluate, make_curve
from .errors import NonpositiveEpsilon
from .functionals import Functional, interaction_energy, w_epsilon_kernel
from .transport import is_cyclically_monotone, make_plan
from .measures import new_discrete


def _check_eps(eps: float) -> None:
    if not eps > 0:
        raise NonpositiveEpsilon(f"eps must be positive, got {eps!r}")


def w_epsilon(eps: float) -> Functional:
    return interaction_energy(w_epsilon_kernel(eps))


def crossing_curve(eps: float = 1.0) -> AccelerationFreeCurve:
    """Particles eps -> 0 and 0 -> eps, half mass each.

    Endpoint separation is eps in both measures (so each endpoint energy is
    eps/2) while the particles meet at t = 1/2 (energy eps).
    """
    _check_eps(eps)
    mu = new_discrete([[eps], [0.0]], [0.5, 0.5])
    nu = new_discrete([[0.0], [eps]], [0.5, 0.5])
    # mu atoms (eps, 0), nu atoms (0, eps): pair x=eps with y=0 and x'=0 with y'=eps
    plan = make_plan(mu, nu, [(0, 0, 0.5), (1, 1, 0.5)])
    kind = CurveKind.GEODESIC if is_cyclically_monotone(plan, plan.support_size) else CurveKind.FROM_PLAN
    x, y = plan.support_points()
    return make_curve(x, y, plan.masses, kind)


def kink_geodesic(eps: float = 1.0, x: float = 0.0, y: float = 0.0) -> AccelerationFreeCurve:
    """Monotone pairing x -> y, x + eps/2 -> y + 2 eps; particle gap is (1 + 3t) eps / 2."""
    _check_eps(eps)
    start = [[x], [x + eps / 2]]
    end = [[y], [y + 2 * eps]]
    return make_curve(start, end, [0.5, 0.5], CurveKind.GEODESIC)


def kink_profile(t, eps: float = 1.0):
    """Closed form of the energy along :func:`kink_geodesic`."""
    t = np.asarray(t, dtype=float)
    return np.where(t <= 1.0 / 3.0, 0.75 * (1.0 - t) * eps, 0.5 * eps)


def gap_reaches(c: AccelerationFreeCurve, eps: float) -> float:
    """First time the distance between the two particles of ``c`` equals eps."""
    gap0 = float(np.linalg.norm(c.start[1] - c.start[0]))
    gap1 = float(np.linalg.norm(c.end[1] - c.end[0]))
    return (eps - gap0) / (gap1 - gap0)


def trace(F: Functional, c: AccelerationFreeCurve, n: int = 1001) -> tuple[np.ndarray, np.ndarray]:
    ts = np.linspace(0.0, 1.0, n)
    return ts, np.array([F(evaluate(c, float(t))) for t in ts])
