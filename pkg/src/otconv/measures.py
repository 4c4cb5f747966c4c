"""Finitely supported probability measures on R^d."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from ._exact import two_prod
from .errors import (
    DimensionMismatch,
    InvalidTotalMass,
    NegativeWeight,
    NonpositiveTotalMass,
    OTConvError,
    ParseError,
)

MERGE_TOL = 1e-12
MASS_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Probability measure sum_i weights[i] * delta_{atoms[i]}.

    Build instances with :func:`new_discrete`; the constructor trusts its input.
    ``atoms`` has shape (n, dim) and ``weights`` shape (n,), both read-only.
    """

    atoms: np.ndarray
    weights: np.ndarray

    @property
    def dim(self) -> int:
        return self.atoms.shape[1]

    @property
    def size(self) -> int:
        return self.atoms.shape[0]

    def __len__(self) -> int:
        return self.size

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (
            self.atoms.shape == other.atoms.shape
            and np.array_equal(self.atoms, other.atoms)
            and np.array_equal(self.weights, other.weights)
        )

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        return f"DiscreteMeasure(dim={self.dim}, atoms={self.atoms.tolist()}, weights={self.weights.tolist()})"


def _as_points(points: Any, dim: int | None) -> np.ndarray:
    try:
        arr = np.asarray(points, dtype=float)
    except ValueError as exc:  # ragged input
        raise DimensionMismatch(f"atoms have inconsistent lengths: {exc}") from None
    if arr.ndim == 1:
        # a flat list of scalars is read as points in R^1
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or arr.shape[1] == 0:
        raise DimensionMismatch(f"atoms must form an (n, d) array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise DimensionMismatch(f"atoms have length {arr.shape[1]}, expected dim={dim}")
    if not np.all(np.isfinite(arr)):
        raise OTConvError("atoms must be finite")
    return arr


def merge_atoms(
    points: np.ndarray, weights: np.ndarray, tol: float = MERGE_TOL
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Merge points closer than ``tol`` (Euclidean), summing their weights.

    Returns ``(atoms, merged_weights, index)`` where ``index[k]`` is the row of
    ``atoms`` that input point ``k`` was merged into. The first occurrence of
    each cluster keeps its position.
    """
    n = points.shape[0]
    diff = points[:, None, :] - points[None, :, :]
    dist = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    if np.count_nonzero(dist <= tol) == n:
        return points.copy(), np.asarray(weights, dtype=float).copy(), np.arange(n)
    index = np.empty(n, dtype=np.intp)
    keep: list[int] = []
    for k in range(n):
        if keep:
            d = dist[k, keep]
            j = int(np.argmin(d))
            if d[j] <= tol:
                index[k] = j
                continue
        index[k] = len(keep)
        keep.append(k)
    atoms = points[keep].copy()
    merged = np.zeros(len(keep))
    np.add.at(merged, index, weights)
    return atoms, merged, index


def _normalize(weights: np.ndarray) -> np.ndarray:
    total = math.fsum(weights)
    if total == 1.0:
        return weights.copy()
    weights = weights / total
    if math.fsum(weights) == 1.0:
        return weights
    # push the rounding residue onto the largest weight so the sum is 1 to the last ulp
    k = int(np.argmax(weights))
    rest = math.fsum(np.delete(weights, k))
    weights = weights.copy()
    weights[k] = 1.0 - rest
    return weights


def new_discrete(points: Any, weights: Sequence[float], dim: int | None = None) -> DiscreteMeasure:
    """Validate, deduplicate and normalize a weighted point cloud.

    Zero-weight atoms are dropped, atoms within 1e-12 of each other are merged,
    and weights are renormalized to sum to exactly 1.
    """
    arr = _as_points(points, dim)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != arr.shape[0]:
        raise DimensionMismatch(f"{arr.shape[0]} atoms but {w.shape[0]} weights")
    if not np.all(np.isfinite(w)):
        raise InvalidTotalMass("weights must be finite")
    if np.any(w < 0):
        raise NegativeWeight(f"negative weight {w.min()!r}")
    total = math.fsum(w)
    if total <= 0:
        raise NonpositiveTotalMass("weights sum to zero")
    if abs(total - 1.0) > MASS_TOL:
        raise InvalidTotalMass(f"weights sum to {total!r}, not 1")

    nz = w > 0
    atoms, merged, _ = merge_atoms(arr[nz], w[nz])
    merged = _normalize(merged)
    atoms.setflags(write=False)
    merged.setflags(write=False)
    return DiscreteMeasure(atoms=atoms, weights=merged)


def dirac(point: Any) -> DiscreteMeasure:
    return new_discrete([np.atleast_1d(np.asarray(point, dtype=float))], [1.0])


def uniform(points: Any) -> DiscreteMeasure:
    arr = _as_points(points, None)
    n = arr.shape[0]
    return new_discrete(arr, np.full(n, 1.0 / n))


def second_moment(mu: DiscreteMeasure) -> float:
    """Return sum_i a_i |x_i|^2, correctly rounded.

    Every product is split into exact high and low parts before the exact
    summation, which keeps finite differences of this quantity clean.
    """
    sq, sq_err = two_prod(mu.atoms, mu.atoms)
    a = mu.weights[:, None]
    p1, e1 = two_prod(a, sq)
    p2, e2 = two_prod(a, sq_err)
    return math.fsum(np.concatenate([p1.ravel(), e1.ravel(), p2.ravel(), e2.ravel()]))


def total_mass(mu: DiscreteMeasure) -> float:
    return math.fsum(mu.weights)


def measure_to_dict(mu: DiscreteMeasure) -> dict:
    return {"dim": mu.dim, "atoms": mu.atoms.tolist(), "weights": mu.weights.tolist()}


def measure_from_dict(data: Any) -> DiscreteMeasure:
    """Parse the ``{"dim", "atoms", "weights"}`` JSON layout; extra keys are ignored."""
    if not isinstance(data, dict):
        raise ParseError("measure must be a JSON object")
    missing = [k for k in ("dim", "atoms", "weights") if k not in data]
    if missing:
        raise ParseError(f"measure is missing field(s): {', '.join(missing)}")
    dim = data["dim"]
    if not isinstance(dim, int) or isinstance(dim, bool) or dim < 1:
        raise ParseError(f"dim must be a positive integer, got {dim!r}")
    atoms, weights = data["atoms"], data["weights"]
    if not isinstance(atoms, list) or not isinstance(weights, list) or not atoms:
        raise ParseError("atoms and weights must be non-empty lists")
    for a in atoms:
        if not isinstance(a, list):
            raise ParseError("each atom must be a list of coordinates")
        if len(a) != dim:
            raise DimensionMismatch(f"atom {a!r} does not have length dim={dim}")
    try:
        return new_discrete(atoms, weights, dim=dim)
    except (TypeError, ValueError) as exc:
        raise ParseError(str(exc)) from None
