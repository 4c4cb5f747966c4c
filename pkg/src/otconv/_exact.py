"""Error-free float transforms (Knuth TwoSum, Dekker TwoProduct), vectorized."""

import numpy as np

_SPLIT = 134217729.0  # 2**27 + 1


def two_sum(a, b):
    """s, e with s = fl(a + b) and a + b = s + e exactly."""
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


def _split(a):
    c = _SPLIT * a
    hi = c - (c - a)
    return hi, a - hi


def two_prod(a, b):
    """p, e with p = fl(a * b) and a * b = p + e exactly (barring overflow)."""
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


def lerp(start: np.ndarray, end: np.ndarray, t: float) -> np.ndarray:
    """(1 - t) * start + t * end with nearly correct rounding; exact at t = 0 and t = 1."""
    if t == 0.0:
        return start.copy()
    if t == 1.0:
        return end.copy()
    d, dl = two_sum(end, -start)
    p, pe = two_prod(np.full_like(d, t), d)
    x, xe = two_sum(start, p)
    return x + (xe + (pe + t * dl))
