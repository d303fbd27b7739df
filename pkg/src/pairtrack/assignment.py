"""Cost matrices and k-best assignment.

Rows are tracks. Columns are the detections followed by one miss column per
track, so every global association (each track takes one detection or misses,
each detection goes to at most one track, the rest are births or false alarms)
is exactly one row-to-column assignment. The birth/false-alarm cost of every
detection is folded into the matrix as a constant offset: assigning detection
``j`` to a track replaces its birth cost, so that entry stores the difference.

``solve_optimal`` is a shortest-augmenting-path (Hungarian / Jonker-Volgenant
family) solver on rectangular matrices with ``rows <= cols``. Among optimal
assignments it returns the lexicographically smallest one. ``murty_kbest``
enumerates solutions in (cost, assignment) order.
"""
from __future__ import annotations

import heapq
import itertools
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .likelihood import LikelihoodParams, score_pair


class Infeasible(ValueError):
    pass


@dataclass
class CostMatrix:
    costs: np.ndarray
    offset: float = 0.0
    n_tracks: Optional[int] = None
    n_dets: Optional[int] = None
    # per detection: birth (spawns a track) beats false alarm when unassigned
    spawn: Optional[np.ndarray] = None
    scores: Optional[list] = None

    def __post_init__(self):
        self.costs = np.asarray(self.costs, dtype=float)
        if self.costs.ndim != 2:
            raise ValueError("cost matrix must be 2-D")
        if self.costs.shape[0] > self.costs.shape[1]:
            raise ValueError(f"need rows <= cols, got shape {self.costs.shape}")
        if np.isnan(self.costs).any() or (self.costs == -np.inf).any():
            raise ValueError("cost entries must be finite or +inf")

    @property
    def shape(self):
        return self.costs.shape

    def miss_column(self, row: int) -> int:
        return self.n_dets + row


@dataclass(frozen=True, order=True)
class AssignmentSolution:
    total_cost: float
    assignment: tuple[int, ...]
    rank: int = field(default=1, compare=False)


def _as_matrix(m) -> CostMatrix:
    return m if isinstance(m, CostMatrix) else CostMatrix(m)


def build_cost_matrix(tracks, dets, params: LikelihoodParams, frame_index: int) -> CostMatrix:
    """Negative log-likelihood costs for associating ``dets`` with ``tracks``."""
    n, d = len(tracks), len(dets)
    birth = np.empty(d)
    spawn = np.zeros(d, dtype=bool)
    for j, det in enumerate(dets):
        lb = params.log_birth + math.log(max(det.confidence, 1e-300))
        if det.birth_flag:
            lb += math.log(params.birth_flag_multiplier)
        spawn[j] = lb > params.log_false
        birth[j] = -max(lb, params.log_false)
    costs = np.full((n, d + n), np.inf)
    scores = [[None] * d for _ in range(n)]
    for i, trk in enumerate(tracks):
        for j, det in enumerate(dets):
            s = score_pair(trk, det, params, frame_index)
            scores[i][j] = s
            if s.compatible:
                costs[i, j] = -s.log_likelihood - birth[j]
        costs[i, d + i] = -params.log_miss
    return CostMatrix(costs, math.fsum(birth), n, d, spawn, scores)


def assignment_cost(costs: np.ndarray, assignment: Sequence[int], offset: float = 0.0) -> float:
    return math.fsum([costs[r, c] for r, c in enumerate(assignment)] + [offset])


# -- optimal assignment --------------------------------------------------------


def _hungarian(a: list, n: int, m: int):
    """Shortest augmenting path assignment for an n x m list-of-lists, n <= m.

    Returns (row->col list, row potentials, col potentials), 0-indexed.
    """
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (m + 1)
    p = [0] * (m + 1)
    way = [0] * (m + 1)
    for i in range(1, n + 1):
        p[0] = i
        j0 = 0
        minv = [inf] * (m + 1)
        used = [False] * (m + 1)
        while True:
            used[j0] = True
            i0 = p[j0]
            row = a[i0 - 1]
            ui0 = u[i0]
            delta = inf
            j1 = -1
            for j in range(1, m + 1):
                if not used[j]:
                    cur = row[j - 1] - ui0 - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            if j1 < 0 or delta == inf:
                raise Infeasible("no finite-cost assignment exists")
            for j in range(m + 1):
                if used[j]:
                    u[p[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if p[j0] == 0:
                break
        while True:
            j1 = way[j0]
            p[j0] = p[j1]
            j0 = j1
            if j0 == 0:
                break
    row_to_col = [0] * n
    for j in range(1, m + 1):
        if p[j]:
            row_to_col[p[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _lexicographic_optimum(a: list, n: int, m: int, sol: list, u: list, v: list) -> list:
    """Move to the lexicographically smallest optimal assignment.

    Optimal assignments are exactly the row-saturating matchings on tight
    edges (zero reduced cost) that cover every column with a negative
    potential. Padding with ``m - n`` dummy rows, each allowed on any column
    that may stay uncovered, turns this into perfect matchings of a square
    graph. Rows are then fixed in order, each to its smallest column reachable
    through an alternating cycle.
    """
    scale = max([1.0] + [abs(x) for row in a for x in row if x != math.inf])
    tol = 1e-10 * scale
    adj = [[j for j in range(m) if a[i][j] - u[i] - v[j] <= tol] for i in range(n)]
    free_cols = [j for j in range(m) if v[j] >= -tol]
    adj.extend([free_cols] * (m - n))
    match = list(sol)
    owner = [-1] * m
    for i, j in enumerate(sol):
        owner[j] = i
    for j in range(m):
        if owner[j] == -1:
            owner[j] = len(match)
            match.append(j)

    for i in range(n):
        cur = match[i]
        for j in adj[i]:
            if j >= cur:
                break
            if owner[j] < i:
                continue
            moves = _alternating_path(owner[j], cur, j, i, adj, owner)
            if moves is None:
                continue
            for r, c in moves:
                match[r] = c
                owner[c] = r
            match[i] = j
            owner[j] = i
            break
    return match[:n]


def _alternating_path(start: int, target: int, blocked: int, pivot: int, adj, owner):
    """Moves that rehome ``start`` so that the chain ends on column ``target``.

    Rows up to ``pivot`` are fixed; ``blocked`` is the column the pivot takes.
    """
    seen = {blocked}

    def visit(row):
        for c in adj[row]:
            if c in seen:
                continue
            seen.add(c)
            if c == target:
                return [(row, c)]
            if owner[c] <= pivot:
                continue
            rest = visit(owner[c])
            if rest is not None:
                return [(row, c)] + rest
        return None

    return visit(start)


def _solve_lists(a: list, n: int, m: int) -> list:
    if n == 0:
        return []
    sol, u, v = _hungarian(a, n, m)
    return _lexicographic_optimum(a, n, m, sol, u, v)


def solve_optimal(m) -> AssignmentSolution:
    """Minimum-cost assignment of every row to a distinct column."""
    cm = _as_matrix(m)
    n, k = cm.shape
    sol = _solve_lists(cm.costs.tolist(), n, k)
    cost = assignment_cost(cm.costs, sol, cm.offset)
    if not math.isfinite(cost):
        raise Infeasible("no finite-cost assignment exists")
    return AssignmentSolution(cost, tuple(sol), 1)


# -- k-best --------------------------------------------------------------------


def _solve_node(a: list, n: int, m: int, prefix: tuple, forbidden: frozenset):
    """Best completion of ``prefix`` with row ``len(prefix)`` barred from ``forbidden``."""
    f = len(prefix)
    used = set(prefix)
    cols = [j for j in range(m) if j not in used]
    sub = [[a[r][j] for j in cols] for r in range(f, n)]
    if forbidden:
        sub[0] = [math.inf if cols[idx] in forbidden else x for idx, x in enumerate(sub[0])]
    try:
        part = _solve_lists(sub, n - f, len(cols))
    except Infeasible:
        return None
    sol = prefix + tuple(cols[j] for j in part)
    return sol


def murty_kbest(m, k: int) -> list[AssignmentSolution]:
    """The ``k`` cheapest assignments in non-decreasing cost order.

    Equal costs are ordered by the assignment tuple.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    cm = _as_matrix(m)
    n, mm = cm.shape
    a = cm.costs.tolist()

    def cost_of(sol):
        return assignment_cost(cm.costs, sol, cm.offset)

    first = solve_optimal(cm)
    heap = [(first.total_cost, first.assignment, (), frozenset())]
    out: list[AssignmentSolution] = []
    while heap and len(out) < k:
        cost, sol, prefix, forbidden = heapq.heappop(heap)
        out.append(AssignmentSolution(cost, sol, len(out) + 1))
        if len(out) == k:
            break
        for r in range(len(prefix), n):
            child_prefix = sol[:r]
            child_forbidden = (forbidden if r == len(prefix) else frozenset()) | {sol[r]}
            child = _solve_node(a, n, mm, child_prefix, child_forbidden)
            if child is None:
                continue
            c = cost_of(child)
            if math.isfinite(c):
                heapq.heappush(heap, (c, child, child_prefix, child_forbidden))
    return out


def brute_force_kbest(m, k: Optional[int] = None) -> list[AssignmentSolution]:
    """Enumerate every finite-cost assignment, sorted by (cost, assignment)."""
    cm = _as_matrix(m)
    n, mm = cm.shape
    sols = []
    for perm in itertools.permutations(range(mm), n):
        c = assignment_cost(cm.costs, perm, cm.offset)
        if math.isfinite(c):
            sols.append((c, perm))
    sols.sort()
    if k is not None:
        sols = sols[:k]
    return [AssignmentSolution(c, p, i + 1) for i, (c, p) in enumerate(sols)]
