"""Certify or refute lambda-convexity of functionals along curves of measures."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Optional

import numpy as np

from .curves import (
    AccelerationFreeCurve,
    crossing_times,
    curve_from_plan,
    evaluate,
    evaluate_with_index,
    generalized_geodesic,
    geodesic,
)
from .errors import OutOfRange
from .functionals import Functional
from .measures import DiscreteMeasure, measure_to_dict, new_discrete
from .transport import random_feasible_plan, solve_w2

DEFAULT_TOL = 1e-9
DEFAULT_SEED = 20240917
H_FIRST = 1e-4
H_SECOND = 1e-3


class Verdict(str, enum.Enum):
    SATISFIED = "Satisfied"
    VIOLATED = "Violated"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class ConvexityReport:
    verdict: Verdict
    worst_slack: float
    witness: Optional[dict] = None
    checks_run: int = 0
    seed: Optional[int] = None
    max_abs_slack: float = 0.0
    details: dict = field(default_factory=dict)

    @property
    def satisfied(self) -> bool:
        return self.verdict is Verdict.SATISFIED

    def to_dict(self) -> dict:
        out = asdict(self)
        out["verdict"] = self.verdict.value
        return out


def curve_to_dict(c: AccelerationFreeCurve) -> dict:
    return {
        "kind": c.kind.value,
        "start": c.start.tolist(),
        "end": c.end.tolist(),
        "theta": c.theta.tolist(),
        "plan_cost": c.plan_cost,
    }


def _verdict(worst: float, tol: float) -> Verdict:
    return Verdict.VIOLATED if worst < -tol else Verdict.SATISFIED


# ---------------------------------------------------------------------------
# zeroth order: chord and midpoint inequalities on a grid


def check_convex_along_curve(
    F: Functional, c: AccelerationFreeCurve, lam: float, grid_size: int = 101, tol: float = DEFAULT_TOL
) -> ConvexityReport:
    """Grid check of F(mu_t) <= (1-t) F(mu_0) + t F(mu_1) - (lam/2) t (1-t) C.

    C is the curve's own plan cost (equal to W2^2 on geodesics). Besides the
    endpoint chord at every grid time, the midpoint inequality is checked on
    each consecutive grid triple. Slack is bound minus value; negative slack
    is a violation.
    """
    if grid_size < 3:
        raise ValueError("grid_size must be at least 3")
    cost = c.plan_cost
    ts = np.linspace(0.0, 1.0, grid_size)
    vals = np.array([F(evaluate(c, float(t))) for t in ts])
    f0, f1 = vals[0], vals[-1]

    chord = (1 - ts) * f0 + ts * f1 - 0.5 * lam * ts * (1 - ts) * cost - vals
    k_chord = int(np.argmin(chord))
    worst, witness = float(chord[k_chord]), {
        "check": "chord",
        "t": float(ts[k_chord]),
        "value": float(vals[k_chord]),
        "bound": float(vals[k_chord] + chord[k_chord]),
    }
    max_abs = float(np.max(np.abs(chord)))

    for k in range(1, grid_size - 1):
        t1, t3 = ts[k - 1], ts[k + 1]
        tm = 0.5 * (t1 + t3)
        fm = vals[k] if tm == ts[k] else F(evaluate(c, float(tm)))
        slack = 0.5 * vals[k - 1] + 0.5 * vals[k + 1] - 0.125 * lam * (t3 - t1) ** 2 * cost - fm
        max_abs = max(max_abs, abs(slack))
        if slack < worst:
            worst = float(slack)
            witness = {
                "check": "midpoint",
                "t": [float(t1), float(tm), float(t3)],
                "value": float(fm),
                "bound": float(fm + slack),
            }

    verdict = _verdict(worst, tol)
    witness.update({"lambda": lam, "plan_cost": cost, "curve": curve_to_dict(c)})
    return ConvexityReport(
        verdict=verdict,
        worst_slack=worst,
        witness=witness if verdict is Verdict.VIOLATED else None,
        checks_run=2 * grid_size - 2,
        max_abs_slack=max_abs,
        details={"worst": witness},
    )


# ---------------------------------------------------------------------------
# first order


def displacement_monotonicity_gap(F: Functional, mu1: DiscreteMeasure, mu2: DiscreteMeasure) -> tuple[float, float]:
    """Return (LHS, W2^2) of the displacement-monotonicity inequality along an optimal plan."""
    grad = F.require_gradient()
    res = solve_w2(mu1, mu2)
    plan = res.plan
    g1 = grad(mu1)[plan.rows]
    g2 = grad(mu2)[plan.cols]
    x, y = plan.support_points()
    terms = plan.masses * np.einsum("ij,ij->i", g2 - g1, y - x)
    return math.fsum(terms), res.cost


def check_displacement_monotonicity(
    F: Functional, mu1: DiscreteMeasure, mu2: DiscreteMeasure, lam: float, tol: float = DEFAULT_TOL
) -> ConvexityReport:
    """Test sum_ij gamma_ij (grad F[mu2](y_j) - grad F[mu1](x_i)) . (y_j - x_i) >= lam W2^2."""
    lhs, w2sq = displacement_monotonicity_gap(F, mu1, mu2)
    slack = lhs - lam * w2sq
    verdict = _verdict(slack, tol)
    witness = {"lhs": lhs, "rhs": lam * w2sq, "w2_squared": w2sq, "mu1": measure_to_dict(mu1), "mu2": measure_to_dict(mu2)}
    return ConvexityReport(
        verdict=verdict,
        worst_slack=slack,
        witness=witness if verdict is Verdict.VIOLATED else None,
        checks_run=1,
        max_abs_slack=abs(slack),
        details=witness,
    )


def derivative_along_curve(F: Functional, c: AccelerationFreeCurve, t: float) -> float:
    """sum_k theta_k grad F[mu_t](position_k(t)) . z_k.

    Particles sitting on the same atom at time t each use that atom's gradient.
    """
    grad = F.require_gradient()
    mu, index = evaluate_with_index(c, t)
    g = grad(mu)[index]
    return math.fsum(c.theta * np.einsum("ij,ij->i", g, c.velocity))


def second_derivative_fd(F: Functional, c: AccelerationFreeCurve, t: float, h: float = H_SECOND) -> float:
    """Central second difference of t -> F(mu_t)."""
    if not h > 0:
        raise ValueError("h must be positive")
    if t - h < 0.0 or t + h > 1.0:
        raise OutOfRange(f"stencil [{t - h}, {t + h}] leaves [0, 1]")
    fp = F(evaluate(c, t + h))
    f0 = F(evaluate(c, t))
    fm = F(evaluate(c, t - h))
    return (fp - 2.0 * f0 + fm) / (h * h)


def first_derivative_fd(F: Functional, c: AccelerationFreeCurve, t: float, h: float = H_FIRST) -> float:
    h = min(h, t, 1.0 - t)
    if h <= 0:
        raise OutOfRange("central difference needs t strictly inside (0, 1)")
    return (F(evaluate(c, t + h)) - F(evaluate(c, t - h))) / (2 * h)


def gradient_consistency(
    F: Functional, c: AccelerationFreeCurve, grid_size: int = 11, h: float = 1e-5, margin: float = 1e-3
) -> float:
    """Max |closed-form derivative - central difference| over interior grid points
    that stay ``margin`` away from crossing times."""
    F.require_gradient()
    cross = np.array(crossing_times(c))
    err = 0.0
    for t in np.linspace(0.0, 1.0, grid_size)[1:-1]:
        if cross.size and np.min(np.abs(cross - t)) < margin:
            continue
        t = float(t)
        err = max(err, abs(derivative_along_curve(F, c, t) - first_derivative_fd(F, c, t, h)))
    return err


def derivative_jumps(F: Functional, c: AccelerationFreeCurve, delta: float = 1e-8) -> float:
    """Largest gap between derivatives just before and just after an interior crossing time."""
    jump = 0.0
    for t in crossing_times(c):
        if delta <= t <= 1.0 - delta:
            jump = max(jump, abs(derivative_along_curve(F, c, t + delta) - derivative_along_curve(F, c, t - delta)))
    return jump


# ---------------------------------------------------------------------------
# randomized equivalence suite


@dataclass(frozen=True)
class SamplerConfig:
    """Random instance generator for :func:`check_equivalence_suite`.

    Sample k draws from ``np.random.default_rng([seed, k])`` so results do not
    depend on evaluation order.
    """

    seed: int = DEFAULT_SEED
    dims: tuple[int, int] = (1, 3)
    atoms: tuple[int, int] = (2, 5)
    grid_size: int = 101
    tol: float = DEFAULT_TOL
    include_known_pair: bool = False
    known_pair_eps: float = 1.0


def random_measure(rng: np.random.Generator, n: int, dim: int, uniform_weights: bool = False) -> DiscreteMeasure:
    pts = rng.uniform(-1.0, 1.0, size=(n, dim))
    w = np.full(n, 1.0 / n) if uniform_weights else rng.uniform(0.05, 1.0, size=n)
    return new_discrete(pts, w / w.sum())


def sample_instance(config: SamplerConfig, k: int) -> dict[str, AccelerationFreeCurve]:
    """The three curves of sample k: geodesic, generalized geodesic and plan curve
    sharing endpoints mu -> nu."""
    rng = np.random.default_rng([config.seed, k])
    dim = int(rng.integers(config.dims[0], config.dims[1] + 1))
    lo, hi = config.atoms
    uniform_weights = bool(rng.integers(0, 2))
    mu = random_measure(rng, int(rng.integers(lo, hi + 1)), dim, uniform_weights)
    nu = random_measure(rng, int(rng.integers(lo, hi + 1)), dim, uniform_weights)
    anchor = random_measure(rng, int(rng.integers(lo, hi + 1)), dim, uniform_weights)
    return {
        "geodesic": geodesic(mu, nu),
        "generalized_geodesic": generalized_geodesic(anchor, mu, nu),
        "plan_curve": curve_from_plan(random_feasible_plan(mu, nu, rng)),
    }


def known_pair_instance(eps: float) -> dict[str, AccelerationFreeCurve]:
    from .counterexample import crossing_curve

    crossing = crossing_curve(eps)
    mu, nu = evaluate(crossing, 0.0), evaluate(crossing, 1.0)
    return {
        "geodesic": geodesic(mu, nu),
        "generalized_geodesic": generalized_geodesic(mu, mu, nu),
        "plan_curve": crossing,
    }


FAMILIES = ("geodesic", "generalized_geodesic", "plan_curve")


def check_equivalence_suite(
    F: Functional, lam: float, config: SamplerConfig = SamplerConfig(), budget: int = 100
) -> ConvexityReport:
    """Check lambda-convexity along geodesics, generalized geodesics and arbitrary
    plan curves over ``budget`` random samples each, and compare the verdicts.

    For differentiable F all three families should agree; a Satisfied geodesic
    family next to a Violated plan-curve family flags non-differentiability.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    instances: list[tuple[Any, dict[str, AccelerationFreeCurve]]] = []
    if config.include_known_pair:
        instances.append(("known-pair", known_pair_instance(config.known_pair_eps)))
    instances.extend((k, sample_instance(config, k)) for k in range(budget))

    fam: dict[str, dict[str, Any]] = {
        name: {"worst_slack": math.inf, "violations": 0, "samples": 0, "witness": None} for name in FAMILIES
    }
    checks = 0
    for sample_id, curves in instances:
        for name in FAMILIES:
            rep = check_convex_along_curve(F, curves[name], lam, config.grid_size, config.tol)
            checks += rep.checks_run
            entry = fam[name]
            entry["samples"] += 1
            if rep.verdict is Verdict.VIOLATED:
                entry["violations"] += 1
            if rep.worst_slack < entry["worst_slack"]:
                entry["worst_slack"] = rep.worst_slack
                entry["witness"] = dict(rep.details["worst"], sample=sample_id, family=name)

    for entry in fam.values():
        entry["verdict"] = _verdict(entry["worst_slack"], config.tol).value
        if entry["verdict"] != Verdict.VIOLATED.value:
            entry["witness"] = None

    verdicts = {name: fam[name]["verdict"] for name in FAMILIES}
    worst_name = min(FAMILIES, key=lambda n: fam[n]["worst_slack"])
    worst = fam[worst_name]["worst_slack"]
    verdict = _verdict(worst, config.tol)
    witness = fam[worst_name]["witness"] if verdict is Verdict.VIOLATED else None
    sat, vio = Verdict.SATISFIED.value, Verdict.VIOLATED.value
    details = {
        "families": fam,
        "agree": len(set(verdicts.values())) == 1,
        "non_differentiability_witness": verdicts["geodesic"] == sat and verdicts["plan_curve"] == vio,
        "lambda": lam,
        "budget": budget,
    }
    return ConvexityReport(verdict, worst, witness, checks, config.seed, details=details)


def check_first_order_suite(
    F: Functional, lam: float, config: SamplerConfig = SamplerConfig(), budget: int = 100
) -> ConvexityReport:
    """Displacement monotonicity on ``budget`` random endpoint pairs."""
    F.require_gradient()
    worst, witness = math.inf, None
    for k in range(budget):
        rng = np.random.default_rng([config.seed, k])
        dim = int(rng.integers(config.dims[0], config.dims[1] + 1))
        lo, hi = config.atoms
        mu = random_measure(rng, int(rng.integers(lo, hi + 1)), dim)
        nu = random_measure(rng, int(rng.integers(lo, hi + 1)), dim)
        rep = check_displacement_monotonicity(F, mu, nu, lam, config.tol)
        if rep.worst_slack < worst:
            worst, witness = rep.worst_slack, dict(rep.details, sample=k)
    verdict = _verdict(worst, config.tol)
    return ConvexityReport(
        verdict, worst, witness if verdict is Verdict.VIOLATED else None, budget, config.seed, details={"lambda": lam}
    )
