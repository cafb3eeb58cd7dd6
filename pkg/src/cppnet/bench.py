"""Length and wall-time comparison of the learned planner against 2-opt.

Both methods are measured on identical scenarios under the identical
length metric (shortest grid-path costs), so length ratios are apples to
apples. Timing covers encode + forward + decode + stitch for the learned
method and cost-matrix + nearest-neighbor + 2-opt + stitch for the
baseline. Sweeps are resumable: records are keyed by scenario hash and
existing ones are skipped.
"""

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .decode import Trajectory, plan, stitch
from .errors import CppnetError, EmptyRecords, ParseError
from .fileio import atomic_write_text
from .model import ModelParams
from .oracle import cost_matrix, two_opt
from .scenario import GridMap, ScenarioSet
from .svg import SvgDocument

RECORDS_CSV_HEADER = "scenario_hash,density,method,length_m,wall_time_s"

METHOD_TWO_OPT = "two_opt"
METHOD_LEARNED = "learned"


@dataclass(frozen=True)
class BenchRecord:
    scenario_hash: str
    density: float
    method: str
    length_m: float
    wall_time_s: float


def solve_two_opt(grid: GridMap, connectivity: int = 4, seed: int = 0) -> Trajectory:
    """Baseline pipeline: cost matrix, nearest-neighbor init, 2-opt, stitch."""
    costs = cost_matrix(grid, connectivity)
    start_slot = grid.free_cells().index(grid.start)
    tour = two_opt(costs, start_slot, seed)
    return stitch(tour, grid, connectivity)


def run_benchmark(sset: ScenarioSet, params: ModelParams, connectivity: int = 4,
                  seed: int = 0, prior_records=(), log=None) -> list[BenchRecord]:
    """Both methods on every test-split scenario, skipping recorded hashes.

    A failure on one scenario is reported and skipped; the sweep carries on.
    """
    records = list(prior_records)
    done = {(r.scenario_hash, r.method) for r in records}
    for grid in sset.split("test"):
        key = grid.content_hash()
        density = grid.density()
        try:
            if (key, METHOD_TWO_OPT) not in done:
                t0 = time.perf_counter()
                traj = solve_two_opt(grid, connectivity, seed)
                elapsed = time.perf_counter() - t0
                records.append(BenchRecord(key, density, METHOD_TWO_OPT, traj.length, elapsed))
            if (key, METHOD_LEARNED) not in done:
                traj = plan(grid, params, connectivity)
                records.append(
                    BenchRecord(key, density, METHOD_LEARNED, traj.length, traj.inference_ms / 1e3)
                )
            if log:
                log(f"benchmarked {key}")
        except CppnetError as exc:
            if log:
                log(f"scenario {key} failed: {exc}")
    return records


def summarize(records) -> dict:
    """Five-number summaries (linear-interpolation quartiles) per method."""
    records = list(records)
    if not records:
        raise EmptyRecords("no benchmark records")
    out = {}
    for method in sorted({r.method for r in records}):
        rows = [r for r in records if r.method == method]
        out[method] = {}
        for metric, values in (
            ("length_m", [r.length_m for r in rows]),
            ("wall_time_s", [r.wall_time_s for r in rows]),
        ):
            q = np.percentile(values, [0, 25, 50, 75, 100], method="linear")
            out[method][metric] = {
                "min": float(q[0]),
                "q1": float(q[1]),
                "median": float(q[2]),
                "q3": float(q[3]),
                "max": float(q[4]),
            }
    return out


def records_to_csv(records) -> str:
    lines = [RECORDS_CSV_HEADER]
    for r in records:
        lines.append(f"{r.scenario_hash},{r.density!r},{r.method},{r.length_m!r},{r.wall_time_s!r}")
    return "\n".join(lines) + "\n"


def records_from_csv(text: str) -> list[BenchRecord]:
    lines = text.splitlines()
    if not lines or lines[0] != RECORDS_CSV_HEADER:
        raise ParseError("bad records CSV header")
    records = []
    for line in lines[1:]:
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 5:
            raise ParseError(f"bad records row: {line!r}")
        records.append(
            BenchRecord(parts[0], float(parts[1]), parts[2], float(parts[3]), float(parts[4]))
        )
    return records


def save_records(records, path) -> None:
    atomic_write_text(path, records_to_csv(records))


def load_records(path) -> list[BenchRecord]:
    return records_from_csv(Path(path).read_text(encoding="utf-8"))


CELL_PX = 40.0


def render_trajectory(traj: Trajectory, grid: GridMap) -> str:
    """Grid figure: obstacle cells filled, red trajectory polyline through
    cell centers, start marker. Deterministic bytes for identical inputs."""
    pad = CELL_PX * 0.5
    width = grid.cols * CELL_PX + 2 * pad
    height = grid.rows * CELL_PX + 2 * pad
    doc = SvgDocument(width, height)
    doc.rect(pad, pad, grid.cols * CELL_PX, grid.rows * CELL_PX, "#ffffff",
             cls="bg", stroke="#333333", stroke_width=1.5)
    for r in range(grid.rows):
        for c in range(grid.cols):
            if grid.occupancy[r, c]:
                doc.rect(pad + c * CELL_PX, pad + r * CELL_PX, CELL_PX, CELL_PX,
                         "#444444", cls="obstacle")
    for r in range(1, grid.rows):
        doc.line(pad, pad + r * CELL_PX, pad + grid.cols * CELL_PX, pad + r * CELL_PX,
                 "#cccccc", 0.5, cls="grid")
    for c in range(1, grid.cols):
        doc.line(pad + c * CELL_PX, pad, pad + c * CELL_PX, pad + grid.rows * CELL_PX,
                 "#cccccc", 0.5, cls="grid")

    def center(cell):
        return (pad + (cell[1] + 0.5) * CELL_PX, pad + (cell[0] + 0.5) * CELL_PX)

    if traj.path:
        if len(traj.path) > 1:
            doc.polyline([center(c) for c in traj.path], "#cc2222", 3.0, cls="trajectory")
        doc.circle(*center(traj.path[0]), CELL_PX * 0.18, "#22aa22", cls="start")
    return doc.to_string()


def render_boxplot(records) -> str:
    """Side-by-side box plots of length and wall time per method."""
    summary = summarize(records)
    methods = sorted(summary)
    panel_w, panel_h, margin = 260.0, 240.0, 48.0
    width = 2 * panel_w + 3 * margin
    height = panel_h + 2 * margin + 24
    doc = SvgDocument(width, height)
    doc.rect(0, 0, width, height, "#ffffff", cls="bg")
    fills = {METHOD_TWO_OPT: "#7799dd", METHOD_LEARNED: "#dd8855"}
    for panel, (metric, title) in enumerate(
        (("length_m", "trajectory length (m)"), ("wall_time_s", "wall time (s)"))
    ):
        x0 = margin + panel * (panel_w + margin)
        y0 = margin
        doc.rect(x0, y0, panel_w, panel_h, "#ffffff", cls="panel",
                 stroke="#333333", stroke_width=1.0)
        doc.text(x0 + panel_w / 2, y0 - 10, title, size=13)
        stats = [summary[m][metric] for m in methods]
        lo = min(s["min"] for s in stats)
        hi = max(s["max"] for s in stats)
        span = (hi - lo) or 1.0
        lo -= 0.05 * span
        hi += 0.05 * span

        def to_y(value):
            return y0 + panel_h - (value - lo) / (hi - lo) * panel_h

        slot_w = panel_w / len(methods)
        for k, method in enumerate(methods):
            s = summary[method][metric]
            cx = x0 + (k + 0.5) * slot_w
            box_w = slot_w * 0.4
            doc.line(cx, to_y(s["min"]), cx, to_y(s["q1"]), "#333333", 1.0, cls="whisker")
            doc.line(cx, to_y(s["q3"]), cx, to_y(s["max"]), "#333333", 1.0, cls="whisker")
            doc.rect(cx - box_w / 2, to_y(s["q3"]), box_w,
                     max(to_y(s["q1"]) - to_y(s["q3"]), 0.5),
                     fills.get(method, "#999999"), cls="box",
                     stroke="#333333", stroke_width=1.0)
            doc.line(cx - box_w / 2, to_y(s["median"]), cx + box_w / 2, to_y(s["median"]),
                     "#000000", 1.5, cls="median")
            doc.text(cx, y0 + panel_h + 16, method, size=11)
            doc.text(x0 - 4, to_y(s["median"]) + 4, f"{s['median']:.3g}",
                     size=9, anchor="end")
    return doc.to_string()


def render(obj, grid: GridMap | None = None) -> str:
    """Dispatch: a Trajectory (with its map) or a record list to SVG text."""
    if isinstance(obj, Trajectory):
        if grid is None:
            raise ValueError("trajectory rendering needs the grid map")
        return render_trajectory(obj, grid)
    return render_boxplot(obj)
