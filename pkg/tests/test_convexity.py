import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_measure
from otconv.convexity import (
    SamplerConfig,
    Verdict,
    check_convex_along_curve,
    check_displacement_monotonicity,
    check_equivalence_suite,
    check_first_order_suite,
    derivative_along_curve,
    derivative_jumps,
    displacement_monotonicity_gap,
    gradient_consistency,
    second_derivative_fd,
)
from otconv.counterexample import crossing_curve, w_epsilon
from otconv.curves import curve_from_plan, geodesic, make_curve
from otconv.errors import GradientUnavailable, OutOfRange
from otconv.functionals import (
    gaussian_bump_potential,
    linear_potential,
    potential_energy,
    quadratic_potential,
    second_moment_functional,
    shift_lambda,
)
from otconv.measures import dirac
from otconv.transport import random_feasible_plan


def crossing_pair():
    return make_curve([[0.0], [1.0]], [[1.0], [0.0]], [0.5, 0.5])


def random_curve(rng, dim=2):
    mu = random_measure(rng, int(rng.integers(1, 5)), dim)
    nu = random_measure(rng, int(rng.integers(1, 5)), dim)
    return curve_from_plan(random_feasible_plan(mu, nu, rng))


def quadratic_form(A, b):
    A, b = np.asarray(A), np.asarray(b)
    return potential_energy(
        lambda x: 0.5 * np.einsum("...i,ij,...j->...", x, A, x) + x @ b,
        lambda x: x @ A.T + b,
    )


class TestChord:
    def test_second_moment_on_geodesics(self, rng):
        F = second_moment_functional()
        for _ in range(20):
            c = geodesic(random_measure(rng, 3, 2), random_measure(rng, 4, 2))
            rep = check_convex_along_curve(F, c, 2.0)
            assert rep.verdict is Verdict.SATISFIED
            assert rep.worst_slack >= -1e-12

    def test_w_epsilon_crossing_curve(self):
        rep = check_convex_along_curve(w_epsilon(1.0), crossing_curve(1.0), 0.0)
        assert rep.verdict is Verdict.VIOLATED
        assert rep.witness["t"] == 0.5
        # F = 1/2 at both ends and 1 in the middle
        assert rep.worst_slack == pytest.approx(-0.5, abs=1e-12)

    def test_linear_potential_is_tight(self, rng):
        F = linear_potential([1.0, -2.0])
        for _ in range(10):
            rep = check_convex_along_curve(F, random_curve(rng), 0.0)
            assert rep.verdict is Verdict.SATISFIED
            assert rep.max_abs_slack <= 1e-12

    def test_grid_too_small(self):
        with pytest.raises(ValueError):
            check_convex_along_curve(second_moment_functional(), crossing_pair(), 0.0, grid_size=2)

    def test_satisfied_report_has_no_witness(self):
        rep = check_convex_along_curve(second_moment_functional(), crossing_pair(), 2.0)
        assert rep.witness is None and rep.details["worst"]["check"] in ("chord", "midpoint")


class TestDisplacementMonotonicity:
    def test_half_square_is_one_convex_with_zero_slack(self, rng):
        F = quadratic_potential()
        for _ in range(20):
            rep = check_displacement_monotonicity(F, random_measure(rng, 3, 2), random_measure(rng, 4, 2), 1.0)
            assert rep.verdict is Verdict.SATISFIED
            assert abs(rep.worst_slack) <= 1e-10

    def test_concave_potential(self):
        F = quadratic_potential(-1.0)
        lhs, w2sq = displacement_monotonicity_gap(F, dirac([0.0]), dirac([1.0]))
        # (grad V(1) - grad V(0)) (1 - 0) = -1
        assert lhs == pytest.approx(-1.0, abs=1e-12) and w2sq == 1.0
        assert check_displacement_monotonicity(F, dirac([0.0]), dirac([1.0]), 0.0).verdict is Verdict.VIOLATED

    def test_equal_measures(self, rng):
        mu = random_measure(rng, 4, 2)
        lhs, w2sq = displacement_monotonicity_gap(gaussian_bump_potential(), mu, mu)
        assert lhs == 0.0 and w2sq == 0.0

    def test_needs_gradient(self):
        with pytest.raises(GradientUnavailable):
            check_displacement_monotonicity(w_epsilon(1.0), dirac([0.0]), dirac([1.0]), 0.0)


class TestDerivatives:
    def test_second_moment_on_crossing_pair(self):
        # 1/2 * 0 * 1 + 1/2 * 2 * (-1)
        assert derivative_along_curve(second_moment_functional(), crossing_pair(), 0.0) == -1.0

    def test_constant_functional(self, rng):
        F = potential_energy(lambda x: np.full(x.shape[:-1], 3.0), np.zeros_like)
        c = random_curve(rng)
        assert derivative_along_curve(F, c, 0.4) == 0.0

    def test_linear_potential(self, rng):
        b = np.array([0.5, -1.5])
        for _ in range(10):
            c = random_curve(rng)
            expected = float(np.sum(c.theta * (c.velocity @ b)))
            assert derivative_along_curve(linear_potential(b), c, 0.3) == pytest.approx(expected, abs=1e-14)

    def test_coincident_particles(self):
        # at t = 1/2 both particles sit at 1/2 and share the merged atom's gradient
        assert derivative_along_curve(second_moment_functional(), crossing_pair(), 0.5) == 0.0

    def test_second_difference_of_second_moment(self, rng):
        F = second_moment_functional()
        for _ in range(10):
            c = random_curve(rng)
            assert second_derivative_fd(F, c, 0.5) == pytest.approx(2 * c.plan_cost, abs=1e-6)

    def test_second_difference_examples(self, rng):
        assert second_derivative_fd(linear_potential([2.0, 1.0]), random_curve(rng), 0.5) == pytest.approx(0.0, abs=1e-7)
        c = make_curve([[0.0]], [[1.0]], [1.0])
        assert second_derivative_fd(quadratic_potential(), c, 0.5) == pytest.approx(1.0, abs=1e-9)

    def test_second_difference_stencil_must_fit(self):
        with pytest.raises(OutOfRange):
            second_derivative_fd(second_moment_functional(), crossing_pair(), 0.0)

    def test_gradient_consistency(self, rng):
        for _ in range(10):
            c = random_curve(rng)
            assert gradient_consistency(second_moment_functional(), c) <= 1e-6
            assert gradient_consistency(gaussian_bump_potential(width=0.8), c) <= 1e-4
            const = potential_energy(lambda x: np.zeros(x.shape[:-1]), np.zeros_like)
            assert gradient_consistency(const, c) == 0.0

    def test_jumps_vanish_for_smooth_potentials(self, rng):
        F = gaussian_bump_potential(width=0.6)
        for _ in range(20):
            assert derivative_jumps(F, random_curve(rng, dim=1)) <= 1e-5
        assert derivative_jumps(F, crossing_pair()) <= 1e-5


@settings(max_examples=40, deadline=None)
@given(st.floats(-3, 3), st.integers(0, 2**32 - 1))
def test_lambda_shift_is_exact(lam, seed):
    rng = np.random.default_rng(seed)
    c = random_curve(rng)
    for F in (gaussian_bump_potential(), w_epsilon(0.7)):
        direct = check_convex_along_curve(F, c, lam)
        shifted = check_convex_along_curve(shift_lambda(F, lam), c, 0.0)
        assert direct.worst_slack == pytest.approx(shifted.worst_slack, abs=1e-10)


def test_shift_changes_raw_chord_by_lambda_term(rng):
    F, lam = gaussian_bump_potential(), 1.7
    G = shift_lambda(F, lam)
    for _ in range(10):
        c = random_curve(rng)
        f = [F(c(t)) for t in (0.0, 0.3, 1.0)]
        g = [G(c(t)) for t in (0.0, 0.3, 1.0)]
        raw_f = 0.7 * f[0] + 0.3 * f[2] - f[1]
        raw_g = 0.7 * g[0] + 0.3 * g[2] - g[1]
        # shifting by -lam/2 M2 moves the plain chord gap by (lam/2) t (1 - t) C
        assert raw_g - raw_f == pytest.approx(-0.5 * lam * 0.3 * 0.7 * c.plan_cost, abs=1e-10)


def test_first_order_implies_chord(rng):
    for _ in range(100):
        d = int(rng.integers(1, 4))
        M = rng.normal(size=(d, d))
        A = 0.5 * (M + M.T)
        lam = float(np.linalg.eigvalsh(A)[0])
        F = quadratic_form(A, rng.normal(size=d))
        mu, nu = random_measure(rng, 3, d), random_measure(rng, 3, d)
        assert check_displacement_monotonicity(F, mu, nu, lam).verdict is Verdict.SATISFIED
        assert check_convex_along_curve(F, geodesic(mu, nu), lam).verdict is Verdict.SATISFIED


def test_second_difference_matches_quadratic_form(rng):
    for _ in range(20):
        d = int(rng.integers(1, 4))
        M = rng.normal(size=(d, d))
        A = 0.5 * (M + M.T)
        F = quadratic_form(A, np.zeros(d))
        c = random_curve(rng, dim=d)
        exact = float(np.sum(c.theta * np.einsum("ki,ij,kj->k", c.velocity, A, c.velocity)))
        assert second_derivative_fd(F, c, 0.5) == pytest.approx(exact, abs=1e-7)
        assert (exact >= float(np.linalg.eigvalsh(A)[0]) * c.plan_cost - 1e-12)


class TestSuites:
    def test_second_moment_all_families_agree(self):
        rep = check_equivalence_suite(second_moment_functional(), 2.0, budget=20)
        assert rep.verdict is Verdict.SATISFIED
        assert rep.details["agree"]

    def test_w_epsilon_with_known_pair(self):
        cfg = SamplerConfig(dims=(1, 1), include_known_pair=True)
        rep = check_equivalence_suite(w_epsilon(1.0), 0.0, cfg, budget=10)
        fam = rep.details["families"]
        assert rep.verdict is Verdict.VIOLATED
        assert fam["geodesic"]["verdict"] == "Satisfied"
        assert fam["plan_curve"]["verdict"] == "Violated"
        assert rep.details["non_differentiability_witness"]
        assert rep.witness["sample"] == "known-pair" and rep.witness["t"] == 0.5

    def test_concave_potential_fails_everywhere(self):
        rep = check_equivalence_suite(quadratic_potential(-1.0), 0.0, budget=10)
        assert rep.verdict is Verdict.VIOLATED
        assert all(f["verdict"] == "Violated" for f in rep.details["families"].values())

    def test_seed_determinism(self):
        F = quadratic_potential(-1.0)
        a = check_equivalence_suite(F, 0.0, SamplerConfig(seed=7), budget=5).to_dict()
        b = check_equivalence_suite(F, 0.0, SamplerConfig(seed=7), budget=5).to_dict()
        c = check_equivalence_suite(F, 0.0, SamplerConfig(seed=8), budget=5).to_dict()
        assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)
        assert a["worst_slack"] != c["worst_slack"]

    def test_first_order_suite(self):
        assert check_first_order_suite(quadratic_potential(), 1.0, budget=20).verdict is Verdict.SATISFIED
        assert check_first_order_suite(quadratic_potential(-1.0), 0.0, budget=5).verdict is Verdict.VIOLATED
        with pytest.raises(GradientUnavailable):
            check_first_order_suite(w_epsilon(1.0), 0.0, budget=1)

    def test_budget_must_be_positive(self):
        with pytest.raises(ValueError):
            check_equivalence_suite(second_moment_functional(), 2.0, budget=0)
