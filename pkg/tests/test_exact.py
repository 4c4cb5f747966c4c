from fractions import Fraction

import numpy as np

from otconv._exact import lerp, two_prod, two_sum
from otconv.measures import new_discrete, second_moment


def test_two_sum_and_two_prod_are_exact(rng):
    a = rng.uniform(-10, 10, 200)
    b = rng.uniform(-10, 10, 200)
    s, e = two_sum(a, b)
    p, f = two_prod(a, b)
    for i in range(200):
        assert Fraction(s[i]) + Fraction(e[i]) == Fraction(a[i]) + Fraction(b[i])
        assert Fraction(p[i]) + Fraction(f[i]) == Fraction(a[i]) * Fraction(b[i])


def test_lerp_endpoints_are_exact(rng):
    start, end = rng.uniform(-1, 1, (5, 3)), rng.uniform(-1, 1, (5, 3))
    assert np.array_equal(lerp(start, end, 0.0), start)
    assert np.array_equal(lerp(start, end, 1.0), end)


def test_lerp_is_within_one_ulp(rng):
    start, end = rng.uniform(-1, 1, 100), rng.uniform(-1, 1, 100)
    for t in rng.uniform(0, 1, 20):
        got = lerp(start, end, float(t))
        for g, s, e in zip(got, start, end):
            exact = (1 - Fraction(t)) * Fraction(s) + Fraction(t) * Fraction(e)
            assert abs(Fraction(g) - exact) <= Fraction(np.spacing(abs(g)))


def test_second_moment_is_correctly_rounded(rng):
    for _ in range(50):
        pts = rng.uniform(-3, 3, (4, 2))
        w = rng.uniform(0.1, 1, 4)
        mu = new_discrete(pts, w / w.sum())
        exact = sum(Fraction(a) * (Fraction(x) ** 2 + Fraction(y) ** 2) for a, (x, y) in zip(mu.weights, mu.atoms))
        assert second_moment(mu) == float(exact)
