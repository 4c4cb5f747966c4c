"""Couplings between discrete measures and exact quadratic-cost transport."""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Any

import numpy as np

from .errors import DimensionMismatch, InvalidPlan, ParseError, SolverError, SourceMismatch
from .measures import MASS_TOL, DiscreteMeasure, measure_from_dict, measure_to_dict

DROP_MASS = 1e-15
CYCLE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class TransportPlan:
    """Coupling of ``source`` and ``target`` stored as sparse (i, j, mass) entries."""

    source: DiscreteMeasure
    target: DiscreteMeasure
    rows: np.ndarray
    cols: np.ndarray
    masses: np.ndarray

    @property
    def support_size(self) -> int:
        return self.masses.shape[0]

    @property
    def entries(self) -> list[tuple[int, int, float]]:
        return [(int(i), int(j), float(m)) for i, j, m in zip(self.rows, self.cols, self.masses)]

    def dense(self) -> np.ndarray:
        out = np.zeros((self.source.size, self.target.size))
        out[self.rows, self.cols] = self.masses
        return out

    def support_points(self) -> tuple[np.ndarray, np.ndarray]:
        """Return the (x_i, y_j) pairs of the support, one row per entry."""
        return self.source.atoms[self.rows], self.target.atoms[self.cols]


def make_plan(source: DiscreteMeasure, target: DiscreteMeasure, entries: Any) -> TransportPlan:
    """Build a validated plan from an iterable of (i, j, mass) triples.

    Entries with mass <= 1e-15 are dropped; marginals must match within 1e-9.
    """
    if source.dim != target.dim:
        raise DimensionMismatch(f"source dim {source.dim} != target dim {target.dim}")
    entries = list(entries)
    rows = np.array([int(e[0]) for e in entries], dtype=np.intp)
    cols = np.array([int(e[1]) for e in entries], dtype=np.intp)
    masses = np.array([float(e[2]) for e in entries], dtype=float)
    if np.any(masses < -DROP_MASS):
        raise InvalidPlan("plan masses must be nonnegative")
    keep = masses > DROP_MASS
    rows, cols, masses = rows[keep], cols[keep], masses[keep]
    if rows.size and (rows.min() < 0 or rows.max() >= source.size or cols.min() < 0 or cols.max() >= target.size):
        raise InvalidPlan("plan entry index out of range")
    pairs = set(zip(rows.tolist(), cols.tolist()))
    if len(pairs) != rows.size:
        raise InvalidPlan("duplicate (i, j) entries in plan")
    row_sums = np.bincount(rows, weights=masses, minlength=source.size)
    col_sums = np.bincount(cols, weights=masses, minlength=target.size)
    if np.max(np.abs(row_sums - source.weights)) > MASS_TOL:
        raise InvalidPlan("row sums do not match source weights")
    if np.max(np.abs(col_sums - target.weights)) > MASS_TOL:
        raise InvalidPlan("column sums do not match target weights")
    order = np.lexsort((cols, rows))
    arrays = rows[order], cols[order], masses[order]
    for a in arrays:
        a.setflags(write=False)
    return TransportPlan(source, target, *arrays)


def plan_from_dense(source: DiscreteMeasure, target: DiscreteMeasure, matrix: np.ndarray) -> TransportPlan:
    ii, jj = np.nonzero(np.asarray(matrix) > DROP_MASS)
    return make_plan(source, target, zip(ii, jj, np.asarray(matrix)[ii, jj]))


def identity_plan(mu: DiscreteMeasure) -> TransportPlan:
    return make_plan(mu, mu, [(i, i, a) for i, a in enumerate(mu.weights)])


def cost_matrix(mu: DiscreteMeasure, nu: DiscreteMeasure) -> np.ndarray:
    diff = mu.atoms[:, None, :] - nu.atoms[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def transport_cost(plan: TransportPlan) -> float:
    """Return the quadratic cost sum mass * |x_i - y_j|^2."""
    x, y = plan.support_points()
    sq = np.einsum("ij,ij->i", x - y, x - y)
    return math.fsum(plan.masses * sq)


# ---------------------------------------------------------------------------
# transportation simplex


def northwest_corner(a: np.ndarray, b: np.ndarray) -> tuple[list[tuple[int, int]], dict[tuple[int, int], float]]:
    """North-west corner basic feasible solution.

    Always returns exactly n + m - 1 basic cells forming a spanning tree of the
    bipartite row/column graph; degenerate cells carry zero flow.
    """
    n, m = len(a), len(b)
    ra, rb = np.array(a, dtype=float), np.array(b, dtype=float)
    basis: list[tuple[int, int]] = []
    flow: dict[tuple[int, int], float] = {}
    i = j = 0
    while i < n and j < m:
        x = min(ra[i], rb[j])
        basis.append((i, j))
        flow[(i, j)] = x
        ra[i] -= x
        rb[j] -= x
        if i == n - 1:
            j += 1
        elif j == m - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return basis, flow


def _potentials(n: int, m: int, basis: list[tuple[int, int]], cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # nodes 0..n-1 are rows, n..n+m-1 are columns; u_i + v_j = c_ij on basic cells
    adj: list[list[int]] = [[] for _ in range(n + m)]
    for i, j in basis:
        adj[i].append(n + j)
        adj[n + j].append(i)
    pot = np.full(n + m, np.nan)
    pot[0] = 0.0
    queue = deque([0])
    while queue:
        node = queue.popleft()
        for other in adj[node]:
            if np.isnan(pot[other]):
                i, j = (node, other - n) if node < n else (other, node - n)
                pot[other] = cost[i, j] - pot[node]
                queue.append(other)
    if np.isnan(pot).any():
        raise SolverError("basis is not a spanning tree")
    return pot[:n], pot[n:]


def _tree_path(n: int, m: int, basis: list[tuple[int, int]], start: int, goal: int) -> list[tuple[int, int]]:
    """Cells on the unique tree path from node ``start`` to node ``goal``."""
    adj: list[list[tuple[int, tuple[int, int]]]] = [[] for _ in range(n + m)]
    for cell in basis:
        i, j = cell
        adj[i].append((n + j, cell))
        adj[n + j].append((i, cell))
    prev: dict[int, tuple[int, tuple[int, int]] | None] = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for other, cell in adj[node]:
            if other not in prev:
                prev[other] = (node, cell)
                queue.append(other)
    path: list[tuple[int, int]] = []
    node = goal
    while prev[node] is not None:
        parent, cell = prev[node]  # type: ignore[misc]
        path.append(cell)
        node = parent
    path.reverse()
    return path


def transportation_simplex(
    a: np.ndarray, b: np.ndarray, cost: np.ndarray, max_iter: int = 100_000
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Solve the balanced transportation problem min <cost, P> s.t. P1 = a, P^T 1 = b.

    Starts from the north-west corner, prices with u/v potentials, and pivots
    around the unique basis cycle. Entering and leaving cells are chosen by
    Bland's rule (smallest row-major index) which rules out cycling on
    degenerate pivots. Returns ``(flow, u, v)`` with ``flow`` dense.
    """
    n, m = cost.shape
    basis, flow = northwest_corner(a, b)
    scale = max(1.0, float(np.max(np.abs(cost))))
    tol = 1e-12 * scale
    for _ in range(max_iter):
        u, v = _potentials(n, m, basis, cost)
        reduced = cost - u[:, None] - v[None, :]
        for cell in basis:
            reduced[cell] = 0.0
        candidates = np.flatnonzero(reduced.ravel() < -tol)
        if candidates.size == 0:
            dense = np.zeros((n, m))
            for cell, x in flow.items():
                dense[cell] = x
            return dense, u, v
        enter = divmod(int(candidates[0]), m)
        # the path runs from column node of `enter` back to its row node;
        # signs alternate starting with '-' on the cell touching that column
        path = _tree_path(n, m, basis, n + enter[1], enter[0])
        minus = path[0::2]
        plus = path[1::2]
        theta = min(flow[c] for c in minus)
        leaving = min((c for c in minus if flow[c] <= theta), key=lambda c: c[0] * m + c[1])
        flow[enter] = theta
        for c in plus:
            flow[c] += theta
        for c in minus:
            flow[c] = max(flow[c] - theta, 0.0)
        flow[leaving] = 0.0
        del flow[leaving]
        basis.remove(leaving)
        basis.append(enter)
    raise SolverError(f"transportation simplex did not converge in {max_iter} pivots")


@dataclass(frozen=True)
class W2Result:
    plan: TransportPlan
    w2: float
    cost: float

    def __iter__(self):
        # allows ``plan, w2 = solve_w2(mu, nu)``
        return iter((self.plan, self.w2))


def solve_w2(mu: DiscreteMeasure, nu: DiscreteMeasure) -> W2Result:
    """Exact W2 distance and an optimal basic plan between discrete measures."""
    if mu.dim != nu.dim:
        raise DimensionMismatch(f"dims differ: {mu.dim} vs {nu.dim}")
    cost = cost_matrix(mu, nu)
    flow, u, v = transportation_simplex(np.asarray(mu.weights), np.asarray(nu.weights), cost)
    reduced = cost - u[:, None] - v[None, :]
    if reduced.min() < -1e-9 * max(1.0, float(cost.max())):
        raise SolverError("post-hoc optimality check failed: negative reduced cost")
    plan = plan_from_dense(mu, nu, flow)
    c = transport_cost(plan)
    return W2Result(plan=plan, w2=math.sqrt(max(c, 0.0)), cost=c)


def w2_distance(mu: DiscreteMeasure, nu: DiscreteMeasure) -> float:
    return solve_w2(mu, nu).w2


def random_feasible_plan(mu: DiscreteMeasure, nu: DiscreteMeasure, rng: np.random.Generator) -> TransportPlan:
    """A feasible vertex plan: north-west corner on randomly shuffled rows and columns."""
    pr = rng.permutation(mu.size)
    pc = rng.permutation(nu.size)
    _, flow = northwest_corner(mu.weights[pr], nu.weights[pc])
    entries = [(pr[i], pc[j], x) for (i, j), x in flow.items() if x > DROP_MASS]
    return make_plan(mu, nu, entries)


# ---------------------------------------------------------------------------
# cyclical monotonicity


def exchange_gain_matrix(plan: TransportPlan) -> np.ndarray:
    """G[k, l] = |x_k - y_l|^2 - |x_k - y_k|^2 over support pairs (x_k, y_k).

    A cycle k_1 -> k_2 -> ... -> k_L -> k_1 reassigns x_{k_i} to y_{k_{i+1}};
    its cost change is the sum of G along the cycle.
    """
    x, y = plan.support_points()
    diff = x[:, None, :] - y[None, :, :]
    c = np.einsum("ijk,ijk->ij", diff, diff)
    return c - np.diag(c)[:, None]


def is_cyclically_monotone(plan: TransportPlan, max_cycle_len: int | None = None, tol: float = CYCLE_TOL) -> bool:
    """Check that no cycle of support points of length <= max_cycle_len lowers the cost.

    Equivalent to the absence of a negative closed walk with at most
    ``max_cycle_len`` edges in the exchange-gain graph: every such walk
    splits into simple cycles no longer than itself. Walk minima are built
    by min-plus matrix powers, so the full-length check costs O(s^4) rather
    than enumerating s! permutations. ``max_cycle_len=None`` means
    ``min(support, 6)``; pass the support size for a complete certificate.
    """
    s = plan.support_size
    if max_cycle_len is None:
        max_cycle_len = min(s, 6)
    if s <= 1 or max_cycle_len < 2:
        return True
    gain = exchange_gain_matrix(plan)
    walk = gain.copy()
    for _ in range(2, min(max_cycle_len, s) + 1):
        if np.min(np.diag(walk)) < -tol:
            return False
        walk = np.min(walk[:, :, None] + gain[None, :, :], axis=1)
    return bool(np.min(np.diag(walk)) >= -tol)


# ---------------------------------------------------------------------------
# gluing


@dataclass(frozen=True, eq=False)
class ThreePlan:
    """Coupling of three measures with first marginal ``base``.

    Entry k puts mass ``masses[k]`` on (base.atoms[i1[k]], second.atoms[i2[k]],
    third.atoms[i3[k]]).
    """

    base: DiscreteMeasure
    second: DiscreteMeasure
    third: DiscreteMeasure
    i1: np.ndarray
    i2: np.ndarray
    i3: np.ndarray
    masses: np.ndarray

    @property
    def entries(self) -> list[tuple[int, list[float], list[float], float]]:
        return [
            (int(i), self.second.atoms[j].tolist(), self.third.atoms[k].tolist(), float(m))
            for i, j, k, m in zip(self.i1, self.i2, self.i3, self.masses)
        ]

    def _project(self, a: np.ndarray, b: np.ndarray, src: DiscreteMeasure, tgt: DiscreteMeasure) -> TransportPlan:
        acc: dict[tuple[int, int], float] = {}
        for p, q, m in zip(a.tolist(), b.tolist(), self.masses.tolist()):
            acc[(p, q)] = acc.get((p, q), 0.0) + m
        return make_plan(src, tgt, [(p, q, m) for (p, q), m in acc.items()])

    def project_12(self) -> TransportPlan:
        return self._project(self.i1, self.i2, self.base, self.second)

    def project_13(self) -> TransportPlan:
        return self._project(self.i1, self.i3, self.base, self.third)

    def project_23(self) -> TransportPlan:
        return self._project(self.i2, self.i3, self.second, self.third)


def glue_plans(g12: TransportPlan, g13: TransportPlan) -> ThreePlan:
    """Glue two plans sharing a source by conditional independence given x1.

    mass(i, j, k) = g12(i, j) * g13(i, k) / a_i.
    """
    if not g12.source == g13.source:
        raise SourceMismatch("plans must share the same source measure")
    a = g12.source.weights
    i1, i2, i3, mass = [], [], [], []
    for i in range(g12.source.size):
        r12 = np.flatnonzero(g12.rows == i)
        r13 = np.flatnonzero(g13.rows == i)
        for p in r12:
            for q in r13:
                i1.append(i)
                i2.append(g12.cols[p])
                i3.append(g13.cols[q])
                mass.append(g12.masses[p] * g13.masses[q] / a[i])
    arrays = [np.array(x, dtype=np.intp) for x in (i1, i2, i3)] + [np.array(mass)]
    for arr in arrays:
        arr.setflags(write=False)
    return ThreePlan(g12.source, g12.target, g13.target, *arrays)


# ---------------------------------------------------------------------------
# JSON


def plan_to_dict(plan: TransportPlan) -> dict:
    return {
        "source": measure_to_dict(plan.source),
        "target": measure_to_dict(plan.target),
        "entries": [[i, j, m] for i, j, m in plan.entries],
    }


def plan_from_dict(data: Any) -> TransportPlan:
    if not isinstance(data, dict):
        raise ParseError("plan must be a JSON object")
    missing = [k for k in ("source", "target", "entries") if k not in data]
    if missing:
        raise ParseError(f"plan is missing field(s): {', '.join(missing)}")
    source = measure_from_dict(data["source"])
    target = measure_from_dict(data["target"])
    # indices in the file refer to the listed atoms, so they must survive normalization
    if source.size != len(data["source"]["atoms"]) or target.size != len(data["target"]["atoms"]):
        raise ParseError("plan measures contain duplicate or zero-weight atoms")
    entries = data["entries"]
    if not isinstance(entries, list) or any(not isinstance(e, list) or len(e) != 3 for e in entries):
        raise ParseError("entries must be a list of [i, j, mass] triples")
    return make_plan(source, target, entries)
