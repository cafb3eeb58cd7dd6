"""Random obstacle grid scenarios: generation, validation, and text serialization.

A scenario is a rectangular occupancy grid with a fixed start cell. Free
cells are guaranteed to form a single connected component so that every
cell is reachable from the start, which downstream tour construction
relies on. Obstacle counts are exact (round(density * cells)) rather than
Bernoulli-sampled, so the density label of a map is meaningful even on
small grids.
"""

import hashlib
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConnectivityFailure, FormatVersionMismatch, InvalidDensity, ParseError
from .fileio import atomic_write_text

SCENARIO_HEADER = "cpp-scenario v1"
MANIFEST_HEADER = "cpp-scenario-set v1"

SPLITS = ("train", "validation", "test")

ORTHO_STEPS = ((-1, 0), (1, 0), (0, -1), (0, 1))
DIAG_STEPS = ((-1, -1), (-1, 1), (1, -1), (1, 1))


def neighbor_steps(connectivity: int):
    if connectivity == 4:
        return ORTHO_STEPS
    if connectivity == 8:
        return ORTHO_STEPS + DIAG_STEPS
    raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")


@dataclass(frozen=True, eq=False)
class GridMap:
    """Occupancy tiling of a rectangular search area.

    occupancy[r, c] is True where an obstacle blocks the cell. The start
    cell is always free, and all free cells are mutually reachable under
    the connectivity the map was generated with (4-connected by default).
    """

    rows: int
    cols: int
    cell_size: float
    occupancy: np.ndarray
    start: tuple[int, int]

    def __post_init__(self):
        occ = np.asarray(self.occupancy, dtype=bool)
        if occ.shape != (self.rows, self.cols):
            raise ValueError(f"occupancy shape {occ.shape} != ({self.rows}, {self.cols})")
        occ.setflags(write=False)
        object.__setattr__(self, "occupancy", occ)

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and self.cell_size == other.cell_size
            and self.start == other.start
            and np.array_equal(self.occupancy, other.occupancy)
        )

    def __hash__(self):
        return hash(self.content_hash())

    @property
    def n_free(self) -> int:
        return int(self.rows * self.cols - np.count_nonzero(self.occupancy))

    def in_bounds(self, cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def is_free(self, cell) -> bool:
        return self.in_bounds(cell) and not self.occupancy[cell[0], cell[1]]

    def free_cells(self) -> list[tuple[int, int]]:
        """All free cells in row-major order."""
        rs, cs = np.nonzero(~self.occupancy)
        return list(zip(rs.tolist(), cs.tolist()))

    def neighbors(self, cell, connectivity: int = 4):
        r, c = cell
        for dr, dc in neighbor_steps(connectivity):
            nxt = (r + dr, c + dc)
            if self.is_free(nxt):
                yield nxt

    def density(self) -> float:
        return float(np.count_nonzero(self.occupancy)) / (self.rows * self.cols)

    def validate(self, connectivity: int = 4) -> None:
        """Raise ValueError if any structural invariant is violated."""
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid must be at least 1x1")
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if not self.in_bounds(self.start):
            raise ValueError(f"start {self.start} outside grid")
        if self.occupancy[self.start[0], self.start[1]]:
            raise ValueError(f"start {self.start} is an obstacle cell")
        if self.n_free < 2:
            raise ValueError("need at least 2 free cells")
        if not free_cells_connected(self, connectivity):
            raise ValueError("free cells are not a single connected component")

    def to_text(self) -> str:
        lines = [
            f"{SCENARIO_HEADER} {self.rows} {self.cols} {self.cell_size!r} "
            f"{self.start[0]} {self.start[1]}"
        ]
        for r in range(self.rows):
            lines.append("".join("#" if self.occupancy[r, c] else "." for c in range(self.cols)))
        return "\n".join(lines) + "\n"

    def content_hash(self) -> str:
        """Stable identity used to key label caches and benchmark records."""
        return hashlib.sha256(self.to_text().encode("utf-8")).hexdigest()[:16]


def free_cells_connected(grid: GridMap, connectivity: int = 4) -> bool:
    """Flood fill from the start cell; True if it reaches every free cell."""
    if grid.occupancy[grid.start[0], grid.start[1]]:
        return False
    seen = np.zeros((grid.rows, grid.cols), dtype=bool)
    seen[grid.start[0], grid.start[1]] = True
    queue = deque([grid.start])
    count = 1
    while queue:
        cell = queue.popleft()
        for nr, nc in grid.neighbors(cell, connectivity):
            if not seen[nr, nc]:
                seen[nr, nc] = True
                count += 1
                queue.append((nr, nc))
    return count == grid.n_free


def _articulation_cells(free: set, start, connectivity: int) -> set:
    """Articulation points of the free-cell graph (iterative Tarjan)."""
    steps = neighbor_steps(connectivity)
    disc, low = {}, {}
    parent = {start: None}
    articulation = set()
    timer = 0
    root_children = 0
    stack = [(start, iter(steps))]
    disc[start] = low[start] = timer
    timer += 1
    while stack:
        cell, it = stack[-1]
        advanced = False
        for dr, dc in it:
            nxt = (cell[0] + dr, cell[1] + dc)
            if nxt not in free:
                continue
            if nxt not in disc:
                parent[nxt] = cell
                if cell == start:
                    root_children += 1
                disc[nxt] = low[nxt] = timer
                timer += 1
                stack.append((nxt, iter(steps)))
                advanced = True
                break
            if nxt != parent[cell]:
                low[cell] = min(low[cell], disc[nxt])
        if not advanced:
            stack.pop()
            p = parent[cell]
            if p is not None:
                low[p] = min(low[p], low[cell])
                if p != start and low[cell] >= disc[p]:
                    articulation.add(p)
    if root_children > 1:
        articulation.add(start)
    return articulation


def _connected_placement(rows, cols, n_obstacles, start, connectivity, rng) -> np.ndarray:
    """Place obstacles one by one, choosing uniformly among free cells whose
    removal keeps the remaining free cells connected. Never gets stuck: a
    connected graph on >= 3 vertices always has a non-articulation vertex
    other than the start."""
    free = {(r, c) for r in range(rows) for c in range(cols)}
    occ = np.zeros((rows, cols), dtype=bool)
    for _ in range(n_obstacles):
        blocked = _articulation_cells(free, start, connectivity)
        candidates = sorted(free - blocked - {start})
        cell = candidates[int(rng.integers(len(candidates)))]
        free.remove(cell)
        occ[cell] = True
    return occ


def generate_scenario(
    rows: int,
    cols: int,
    cell_size: float,
    density: float,
    seed: int,
    connectivity: int = 4,
    start: tuple[int, int] = (0, 0),
    max_retries: int = 1000,
) -> GridMap:
    """Generate one random scenario with an exact obstacle count.

    Obstacles are placed uniformly at random over all non-start cells;
    layouts with disconnected free cells are rejected and regenerated
    from a derived sub-seed. Unconditioned uniform placement is almost
    never connected above ~35% density, so after a bounded number of
    rejections placement switches to a connectivity-preserving sequential
    draw (uniform among cells that are safe to block at each step). The
    result is a pure function of the arguments either way.
    """
    if not 0.0 <= density <= 0.5:
        raise InvalidDensity(f"density {density} outside [0, 0.5]")
    if rows < 2 or cols < 2:
        raise ValueError("rows and cols must be >= 2")
    n_cells = rows * cols
    n_obstacles = int(round(density * n_cells))
    candidates = [(r, c) for r in range(rows) for c in range(cols) if (r, c) != start]
    if n_obstacles > len(candidates) - 1:
        raise InvalidDensity(f"cannot place {n_obstacles} obstacles on {n_cells} cells")

    rejection_tries = min(100, max_retries)
    for attempt in range(max_retries):
        rng = np.random.default_rng([seed, attempt])
        if attempt < rejection_tries:
            occ = np.zeros((rows, cols), dtype=bool)
            if n_obstacles:
                picks = rng.choice(len(candidates), size=n_obstacles, replace=False)
                for k in picks:
                    occ[candidates[k]] = True
        else:
            occ = _connected_placement(rows, cols, n_obstacles, start, connectivity, rng)
        grid = GridMap(rows, cols, float(cell_size), occ, start)
        if grid.n_free >= 2 and free_cells_connected(grid, connectivity):
            return grid
    raise ConnectivityFailure(
        f"no connected layout at density {density} on {rows}x{cols} in {max_retries} tries"
    )


@dataclass(eq=False)
class ScenarioSet:
    """Ordered scenarios with their split tags and the master seed."""

    scenarios: list[GridMap]
    splits: list[str] = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if len(self.scenarios) != len(self.splits):
            raise ValueError("one split tag per scenario required")
        for tag in self.splits:
            if tag not in SPLITS:
                raise ValueError(f"unknown split tag {tag!r}")

    def __eq__(self, other):
        if not isinstance(other, ScenarioSet):
            return NotImplemented
        return (
            self.seed == other.seed
            and self.splits == other.splits
            and self.scenarios == other.scenarios
        )

    def __len__(self):
        return len(self.scenarios)

    def split(self, tag: str) -> list[GridMap]:
        return [s for s, t in zip(self.scenarios, self.splits) if t == tag]


def split_sizes(count: int, ratios) -> tuple[int, int, int]:
    """Exact split sizes; fractional remainders all land in the train split."""
    train_ratio, val_ratio, test_ratio = ratios
    if abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9:
        raise ValueError("split ratios must sum to 1")
    n_val = int(np.floor(val_ratio * count + 1e-9))
    n_test = int(np.floor(test_ratio * count + 1e-9))
    n_train = count - n_val - n_test
    if n_train < 0:
        raise ValueError("ratios leave no room for the train split")
    return n_train, n_val, n_test


def dataset_build(
    count: int,
    rows: int,
    cols: int,
    cell_size: float,
    density_range,
    ratios,
    seed: int,
    connectivity: int = 4,
) -> ScenarioSet:
    """Build a scenario dataset with per-scenario densities and split tags.

    Each scenario draws its density uniformly from density_range using its
    own spawned sub-seed, so generation order (or parallel scheduling)
    cannot change any individual map. Split tags are a deterministic
    shuffle of the exact split sizes.
    """
    if count < 3:
        raise ValueError("need at least 3 scenarios")
    lo, hi = density_range
    if not (0.0 <= lo <= hi <= 0.5):
        raise InvalidDensity(f"density range [{lo}, {hi}] outside [0, 0.5]")

    children = np.random.SeedSequence(seed).spawn(count)
    scenarios = []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        density = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
        sub_seed = int(rng.integers(0, 2**63 - 1))
        try:
            scenarios.append(
                generate_scenario(rows, cols, cell_size, density, sub_seed, connectivity)
            )
        except (InvalidDensity, ConnectivityFailure) as exc:
            raise type(exc)(f"scenario {i}: {exc}") from exc

    n_train, n_val, n_test = split_sizes(count, ratios)
    tags = ["train"] * n_train + ["validation"] * n_val + ["test"] * n_test
    shuffle_rng = np.random.default_rng([seed, count])
    shuffle_rng.shuffle(tags)
    return ScenarioSet(scenarios, tags, seed)


def scenario_from_text(text: str) -> GridMap:
    lines = text.splitlines()
    if not lines:
        raise ParseError("empty scenario file")
    head = lines[0].split()
    if len(head) < 2 or " ".join(head[:2]) != SCENARIO_HEADER:
        raise FormatVersionMismatch(f"bad scenario header: {lines[0]!r}")
    if len(head) != 7:
        raise ParseError(f"scenario header needs 5 fields, got {len(head) - 2}")
    rows, cols = int(head[2]), int(head[3])
    cell_size = float(head[4])
    start = (int(head[5]), int(head[6]))
    body = lines[1 : 1 + rows]
    if len(body) != rows:
        raise ParseError(f"expected {rows} grid rows, found {len(body)}")
    occ = np.zeros((rows, cols), dtype=bool)
    for r, line in enumerate(body):
        if len(line) != cols:
            raise ParseError(f"row {r} has {len(line)} cells, expected {cols}")
        for c, ch in enumerate(line):
            if ch == "#":
                occ[r, c] = True
            elif ch != ".":
                raise ParseError(f"unknown cell char {ch!r} at ({r}, {c})")
    return GridMap(rows, cols, cell_size, occ, start)


def save_scenarios(sset: ScenarioSet, path) -> None:
    """Write one scenario file per map plus a manifest into a directory."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    manifest = [f"{MANIFEST_HEADER} {sset.seed}"]
    for i, (grid, tag) in enumerate(zip(sset.scenarios, sset.splits)):
        name = f"scenario_{i:05d}.txt"
        atomic_write_text(root / name, grid.to_text())
        manifest.append(f"{name} {tag}")
    atomic_write_text(root / "manifest.txt", "\n".join(manifest) + "\n")


def load_scenarios(path) -> ScenarioSet:
    """Load a scenario directory written by save_scenarios.

    Raises before returning anything if any file is malformed; a partial
    set is never produced.
    """
    root = Path(path)
    manifest_path = root / "manifest.txt"
    if not manifest_path.is_file():
        raise ParseError(f"no manifest.txt under {root}")
    lines = manifest_path.read_text(encoding="utf-8").splitlines()
    if not lines:
        raise ParseError("empty manifest")
    head = lines[0].split()
    if len(head) != 3 or " ".join(head[:2]) != MANIFEST_HEADER:
        raise FormatVersionMismatch(f"bad manifest header: {lines[0]!r}")
    seed = int(head[2])
    scenarios, tags = [], []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ParseError(f"bad manifest line: {line!r}")
        name, tag = parts
        if tag not in SPLITS:
            raise ParseError(f"unknown split tag {tag!r}")
        scenarios.append(scenario_from_text((root / name).read_text(encoding="utf-8")))
        tags.append(tag)
    return ScenarioSet(scenarios, tags, seed)
