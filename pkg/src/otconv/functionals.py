"""Functionals on discrete measures, with optional Wasserstein gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np

from .errors import GradientUnavailable, NonpositiveEpsilon
from .measures import DiscreteMeasure, second_moment

# gradient(mu) -> (n, d) array whose row i is grad_w F[mu](x_i)
GradientFn = Callable[[DiscreteMeasure], np.ndarray]


@dataclass(frozen=True)
class Functional:
    evaluate: Callable[[DiscreteMeasure], float]
    gradient: Optional[GradientFn] = None
    claimed_lambda: Optional[float] = None
    name: str = "functional"

    def __call__(self, mu: DiscreteMeasure) -> float:
        return self.evaluate(mu)

    @property
    def has_gradient(self) -> bool:
        return self.gradient is not None

    def gradient_at(self, mu: DiscreteMeasure, i: int) -> np.ndarray:
        return self.require_gradient()(mu)[i]

    def require_gradient(self) -> GradientFn:
        if self.gradient is None:
            raise GradientUnavailable(f"{self.name} has no Wasserstein gradient")
        return self.gradient


@dataclass(frozen=True)
class Kernel:
    """Symmetric interaction kernel.

    ``w(x, y)`` and ``grad_w(x, y)`` (gradient in x) must broadcast over
    leading axes: x of shape (n, 1, d) against y of shape (1, n, d) gives (n, n).
    """

    w: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad_w: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    name: str = "kernel"


def _pointwise(fn, points: np.ndarray) -> np.ndarray:
    return np.array([fn(p) for p in points], dtype=float)


def potential_energy(V, grad_V=None, name: str = "potential", claimed_lambda: float | None = None) -> Functional:
    """mu -> sum_i a_i V(x_i), with gradient grad V(x_i) when ``grad_V`` is given.

    ``V`` maps a point of R^d to a float; ``grad_V`` a point to R^d.
    """

    def evaluate(mu: DiscreteMeasure) -> float:
        return math.fsum(mu.weights * _pointwise(V, mu.atoms))

    gradient = None
    if grad_V is not None:

        def gradient(mu: DiscreteMeasure) -> np.ndarray:
            return np.array([np.asarray(grad_V(p), dtype=float).reshape(mu.dim) for p in mu.atoms])

    return Functional(evaluate, gradient, claimed_lambda, name)


def second_moment_functional() -> Functional:
    return Functional(second_moment, lambda mu: 2.0 * mu.atoms, 2.0, "second-moment")


def interaction_energy(kernel: Kernel, claimed_lambda: float | None = None) -> Functional:
    """mu -> sum_i sum_j a_i a_j w(x_i, x_j), diagonal (self-interaction) terms included."""

    def evaluate(mu: DiscreteMeasure) -> float:
        x = mu.atoms
        mat = np.asarray(kernel.w(x[:, None, :], x[None, :, :]), dtype=float)
        return math.fsum((mu.weights[:, None] * mat * mu.weights[None, :]).ravel())

    gradient = None
    if kernel.grad_w is not None:

        def gradient(mu: DiscreteMeasure) -> np.ndarray:
            # symmetric kernel: both slots contribute the same first-slot gradient
            x = mu.atoms
            g = np.asarray(kernel.grad_w(x[:, None, :], x[None, :, :]), dtype=float)
            return 2.0 * np.einsum("j,ijk->ik", mu.weights, g)

    return Functional(evaluate, gradient, claimed_lambda, f"interaction:{kernel.name}")


def w_epsilon_kernel(eps: float) -> Kernel:
    """Tent kernel eps - |x - y| inside |x - y| <= eps, zero outside. No gradient."""
    if not eps > 0:
        raise NonpositiveEpsilon(f"eps must be positive, got {eps!r}")

    def w(x, y):
        r = np.linalg.norm(np.asarray(x, dtype=float) - np.asarray(y, dtype=float), axis=-1)
        return np.where(r <= eps, eps - r, 0.0)

    return Kernel(w, None, f"weps({eps!r})")


def gaussian_kernel(sigma: float = 1.0) -> Kernel:
    """exp(-|x - y|^2 / (2 sigma^2)); its Hessian is bounded below by -1/sigma^2."""

    def w(x, y):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return np.exp(-np.sum(d * d, axis=-1) / (2 * sigma**2))

    def grad_w(x, y):
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        return -(d / sigma**2) * np.exp(-np.sum(d * d, axis=-1) / (2 * sigma**2))[..., None]

    return Kernel(w, grad_w, f"gaussian({sigma!r})")


def gaussian_interaction_lambda(sigma: float) -> float:
    """A lambda for which the Gaussian interaction energy is lambda-convex along every
    acceleration-free curve.

    d^2/dt^2 F(mu_t) = sum_pq theta_p theta_q (z_p - z_q)^T Hess g (z_p - z_q)
    >= -(1/sigma^2) sum_pq theta_p theta_q |z_p - z_q|^2 >= -(2/sigma^2) sum_k theta_k |z_k|^2.
    """
    return -2.0 / sigma**2


def shift_lambda(F: Functional, lam: float) -> Functional:
    """mu -> F(mu) - (lam/2) * second_moment(mu), gradient shifted by -lam * x."""

    def evaluate(mu: DiscreteMeasure) -> float:
        return F.evaluate(mu) - 0.5 * lam * second_moment(mu)

    gradient = None
    if F.gradient is not None:
        base = F.gradient

        def gradient(mu: DiscreteMeasure) -> np.ndarray:
            return base(mu) - lam * mu.atoms

    claimed = None if F.claimed_lambda is None else F.claimed_lambda - lam
    return replace(F, evaluate=evaluate, gradient=gradient, claimed_lambda=claimed, name=f"{F.name}-shift({lam!r})")


# built-in potentials addressable by name


def quadratic_potential(scale: float = 1.0) -> Functional:
    """V(x) = (scale/2) |x|^2."""
    return potential_energy(
        lambda x: 0.5 * scale * float(np.dot(x, x)),
        lambda x: scale * np.asarray(x, dtype=float),
        name="potential:quadratic" if scale == 1.0 else f"potential:quadratic({scale!r})",
        claimed_lambda=scale,
    )


def linear_potential(b) -> Functional:
    b = np.asarray(b, dtype=float)
    return potential_energy(lambda x: float(np.dot(b, x)), lambda x: b, name="potential:linear", claimed_lambda=0.0)


def gaussian_bump_potential(center=None, width: float = 1.0) -> Functional:
    """V(x) = exp(-|x - c|^2 / (2 width^2)): smooth and bounded, not convex."""

    def shift(x):
        x = np.asarray(x, dtype=float)
        return x if center is None else x - np.asarray(center, dtype=float)[: x.shape[0]]

    def V(x):
        d = shift(x)
        return math.exp(-float(np.dot(d, d)) / (2 * width**2))

    def grad_V(x):
        d = shift(x)
        return -(d / width**2) * math.exp(-float(np.dot(d, d)) / (2 * width**2))

    return potential_energy(V, grad_V, name="potential:gaussian-bump", claimed_lambda=-1.0 / width**2)


def quartic_potential() -> Functional:
    """V(x) = |x|^4 / 4: convex, so 0-convex along acceleration-free curves."""
    return potential_energy(
        lambda x: 0.25 * float(np.dot(x, x)) ** 2,
        lambda x: float(np.dot(x, x)) * np.asarray(x, dtype=float),
        name="potential:quartic",
        claimed_lambda=0.0,
    )


def parse_functional(name: str, eps: float = 1.0, sigma: float = 1.0) -> Functional:
    """Resolve a CLI name such as ``second-moment`` or ``interaction:weps``."""
    name = name.strip()
    table = {
        "second-moment": second_moment_functional,
        "potential:quadratic": quadratic_potential,
        "potential:neg-quadratic": lambda: quadratic_potential(-1.0),
        "potential:quartic": quartic_potential,
        "potential:gaussian-bump": gaussian_bump_potential,
        "interaction:weps": lambda: interaction_energy(w_epsilon_kernel(eps)),
        "interaction:gaussian": lambda: interaction_energy(
            gaussian_kernel(sigma), claimed_lambda=gaussian_interaction_lambda(sigma)
        ),
    }
    if name not in table:
        raise ValueError(f"unknown functional {name!r}; choose from {', '.join(sorted(table))}")
    return table[name]()
