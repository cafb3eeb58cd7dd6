"""Ground-truth coverage tours.

The tour objective is the summed shortest collision-free grid-path
distance between consecutive cells (an open path from the start cell, no
return leg). 2-opt over that metric produces the training labels and the
benchmark baseline; an exhaustive solver covers small instances as an
independent optimum reference.
"""

import itertools
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import FormatVersionMismatch, ParseError, TooLarge
from .fileio import atomic_write_text
from .scenario import GridMap, neighbor_steps

LABELS_HEADER = "cpp-labels v1"


@dataclass(frozen=True, eq=False)
class CostMatrix:
    """All-pairs shortest grid-path distances between free cells (meters)."""

    n: int
    cost: np.ndarray

    def __post_init__(self):
        self.cost.setflags(write=False)


@dataclass(frozen=True)
class Tour:
    """Visit order over node slots; length is under the cost matrix used
    to build it (NaN until a length has been attached)."""

    order: tuple
    length: float = float("nan")


def cost_matrix(grid: GridMap, connectivity: int = 4) -> CostMatrix:
    cells = grid.free_cells()
    n = len(cells)
    slot = {cell: i for i, cell in enumerate(cells)}
    rows_idx, cols_idx, weights = [], [], []
    for i, (r, c) in enumerate(cells):
        for dr, dc in neighbor_steps(connectivity):
            j = slot.get((r + dr, c + dc))
            if j is not None:
                rows_idx.append(i)
                cols_idx.append(j)
                step = grid.cell_size * (np.sqrt(2.0) if dr and dc else 1.0)
                weights.append(step)
    adj = csr_matrix((weights, (rows_idx, cols_idx)), shape=(n, n))
    cost = dijkstra(adj, directed=False)
    if not np.all(np.isfinite(cost)):
        raise AssertionError("free cells unreachable; GridMap invariant violated")
    return CostMatrix(n, cost)


def tour_length(costs: CostMatrix, order) -> float:
    c = costs.cost
    return float(sum(c[order[k], order[k + 1]] for k in range(len(order) - 1)))


def nearest_neighbor_tour(costs: CostMatrix, start: int, rng=None) -> Tour:
    """Greedy nearest-unvisited construction from the start slot.

    Exact cost ties resolve to the lowest slot index; with an rng, tied
    picks are drawn from it instead.
    """
    n = costs.n
    cost = costs.cost
    visited = np.zeros(n, dtype=bool)
    visited[start] = True
    order = [start]
    for _ in range(n - 1):
        row = np.where(visited, np.inf, cost[order[-1]])
        best = row.min()
        ties = np.flatnonzero(row == best)
        if len(ties) > 1 and rng is not None:
            nxt = int(ties[rng.integers(len(ties))])
        else:
            nxt = int(ties[0])
        visited[nxt] = True
        order.append(nxt)
    return Tour(tuple(order), tour_length(costs, order))


def _two_opt_descent(order: list, cost: np.ndarray) -> list:
    """First-improvement 2-opt for an open path, rescanning from scratch
    after every applied reversal. Position 0 never moves; termination is
    guaranteed by strict length decrease over a finite move set."""
    n = len(order)
    improved = True
    while improved:
        improved = False
        for a in range(1, n - 1):
            prev = order[a - 1]
            removed = cost[prev, order[a]]
            for b in range(a + 1, n):
                if b < n - 1:
                    delta = (
                        cost[prev, order[b]]
                        + cost[order[a], order[b + 1]]
                        - removed
                        - cost[order[b], order[b + 1]]
                    )
                else:
                    # tail reversal: only the entry edge changes
                    delta = cost[prev, order[b]] - removed
                if delta < -1e-9:
                    order[a : b + 1] = order[a : b + 1][::-1]
                    improved = True
                    break
            if improved:
                break
    return order


def two_opt(costs: CostMatrix, start: int = 0, seed: int = 0, restarts: int = 8) -> Tour:
    """Best of several first-improvement 2-opt descents over an open path.

    Nearest-neighbor cost ties pick the construction: the first descent
    breaks them toward the lowest slot index, the remaining descents
    perturb them with seed-derived draws (grid cost matrices tie
    constantly, and the tie taken at a junction often decides which
    2-opt basin the descent lands in). Deterministic given the seed.
    """
    if costs.n < 2:
        raise ValueError("two_opt needs at least 2 nodes")
    cost = costs.cost
    best_order = None
    best_len = np.inf
    for r in range(max(1, restarts)):
        rng = None if r == 0 else np.random.default_rng([seed, r])
        order = _two_opt_descent(list(nearest_neighbor_tour(costs, start, rng).order), cost)
        length = tour_length(costs, order)
        if length < best_len - 1e-9:
            best_len = length
            best_order = order
    return Tour(tuple(best_order), best_len)


def brute_force(costs: CostMatrix, start: int = 0) -> Tour:
    """Exact minimum open path from the start by exhaustive enumeration.

    Ties resolve to the lexicographically smallest order because
    permutations are generated in lexicographic order and only strict
    improvements replace the incumbent.
    """
    n = costs.n
    if n > 10:
        raise TooLarge(f"brute force capped at 10 nodes, got {n}")
    rest = [i for i in range(n) if i != start]
    cost = costs.cost
    best_order = None
    best_len = np.inf
    for perm in itertools.permutations(rest):
        total = cost[start, perm[0]] if perm else 0.0
        for k in range(len(perm) - 1):
            total += cost[perm[k], perm[k + 1]]
            if total >= best_len:
                break
        if total < best_len:
            best_len = total
            best_order = (start,) + perm
    return Tour(best_order, float(best_len))


def tour_to_labels(tour: Tour, n_max: int) -> np.ndarray:
    """Symmetric 0/1 matrix marking consecutive tour pairs."""
    labels = np.zeros((n_max, n_max), dtype=np.float64)
    order = tour.order
    for k in range(len(order) - 1):
        i, j = order[k], order[k + 1]
        labels[i, j] = 1.0
        labels[j, i] = 1.0
    return labels


def label_pairs(tour: Tour) -> list[tuple[int, int]]:
    """Sorted undirected consecutive pairs of a tour."""
    pairs = {tuple(sorted((tour.order[k], tour.order[k + 1]))) for k in range(len(tour.order) - 1)}
    return sorted(pairs)


def labels_to_text(scenario_hash: str, pairs) -> str:
    lines = [f"{LABELS_HEADER} {scenario_hash}"]
    lines.extend(f"{i} {j}" for i, j in pairs)
    return "\n".join(lines) + "\n"


def labels_from_text(text: str) -> tuple[str, list[tuple[int, int]]]:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty labels file")
    head = lines[0].split()
    if len(head) != 3 or " ".join(head[:2]) != LABELS_HEADER:
        raise FormatVersionMismatch(f"bad labels header: {lines[0]!r}")
    pairs = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"bad label pair line: {line!r}")
        pairs.append((int(parts[0]), int(parts[1])))
    return head[2], pairs


def pairs_to_matrix(pairs, n_max: int) -> np.ndarray:
    labels = np.zeros((n_max, n_max), dtype=np.float64)
    for i, j in pairs:
        labels[i, j] = 1.0
        labels[j, i] = 1.0
    return labels


class LabelCache:
    """Disk cache of 2-opt label pairs keyed by scenario content hash."""

    def __init__(self, cache_dir, seed: int = 0, connectivity: int = 4):
        self.cache_dir = Path(cache_dir) if cache_dir is not None else None
        self.seed = seed
        self.connectivity = connectivity
        self._memory: dict[str, list[tuple[int, int]]] = {}

    def _path(self, scenario_hash: str) -> Path:
        return self.cache_dir / f"{scenario_hash}.labels"

    def pairs_for(self, grid: GridMap) -> list[tuple[int, int]]:
        key = grid.content_hash()
        if key in self._memory:
            return self._memory[key]
        if self.cache_dir is not None:
            path = self._path(key)
            if path.is_file():
                stored_hash, pairs = labels_from_text(path.read_text(encoding="utf-8"))
                if stored_hash != key:
                    raise ParseError(f"label cache {path} keyed for {stored_hash}, not {key}")
                self._memory[key] = pairs
                return pairs
        costs = cost_matrix(grid, self.connectivity)
        start_slot = grid.free_cells().index(grid.start)
        tour = two_opt(costs, start_slot, self.seed)
        pairs = label_pairs(tour)
        self.store(grid, pairs)
        return pairs

    def store(self, grid: GridMap, pairs) -> None:
        key = grid.content_hash()
        self._memory[key] = pairs
        if self.cache_dir is not None:
            path = self._path(key)
            if not path.is_file():
                atomic_write_text(path, labels_to_text(key, pairs))
