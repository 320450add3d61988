"""Maze-to-crossbar mapping and the conductive-path readout.

A maze lives on a grid of cells.  The hardware carries two device pairs per
cell, one toward the east neighbour and one toward the south neighbour, so
every adjacency has a series memristor-plus-switch branch with a midpoint
node between the two elements; pairs on the last row and column dangle into
unconnected terminal nodes.  A switch is closed only where both endpoint
cells are open maze cells, which embeds the maze's corridors as the
conductive subgraph.  Driving the entrance at the supply rail and tying the
exit to ground lets every corridor on a shortest route charge its gates
while dead branches carry no current, and thresholding the final gate
voltages reads the route back out.

Text form: ``#`` wall, ``.`` open, ``S`` entrance, ``E`` exit, one row per
line.  Cell (r, c) is row r from the top, column c from the left.
"""

from __future__ import annotations

import math
import random
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Mapping

import numpy as np

from .devices import Dc, MemristorParams, SwitchParams
from .engine import static_supply_current, transient
from .netlist import Circuit, Memristor, Switch, Tran, VSource

__all__ = [
    "MazeError",
    "UnresolvedMazeError",
    "Maze",
    "ShortestPaths",
    "MazeSolveConfig",
    "Readout",
    "MazeSolution",
    "parse_maze",
    "render_maze",
    "random_maze",
    "bfs_shortest_path",
    "maze_to_circuit",
    "readout",
    "solve_maze",
    "device_edge",
    "edge_label",
    "maze_report",
    "states_csv",
]

Cell = tuple[int, int]
Edge = tuple[Cell, Cell]

# scan order for neighbours: north, east, south, west
_STEPS = ((-1, 0), (0, 1), (1, 0), (0, -1))


class MazeError(Exception):
    """Malformed maze text or geometry."""


class UnresolvedMazeError(Exception):
    """The readout could not separate a conductive path from the rest."""


@dataclass(frozen=True)
class Maze:
    rows: int
    cols: int
    open_cells: frozenset[Cell]
    start: Cell
    goal: Cell

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise MazeError(f"grid must be at least 1x1, got {self.rows}x{self.cols}")
        for cell in self.open_cells:
            if not self.in_bounds(cell):
                raise MazeError(f"open cell {cell} lies outside the {self.rows}x{self.cols} grid")
        for name, cell in (("start", self.start), ("goal", self.goal)):
            if cell not in self.open_cells:
                raise MazeError(f"{name} cell {cell} is not an open cell")

    def in_bounds(self, cell: Cell) -> bool:
        r, c = cell
        return 0 <= r < self.rows and 0 <= c < self.cols

    def is_open(self, cell: Cell) -> bool:
        return cell in self.open_cells

    def neighbors(self, cell: Cell) -> Iterator[Cell]:
        r, c = cell
        for dr, dc in _STEPS:
            nxt = (r + dr, c + dc)
            if nxt in self.open_cells:
                yield nxt


def parse_maze(text: str) -> Maze:
    lines = [line for line in text.splitlines() if line.strip()]
    if not lines:
        raise MazeError("empty maze")
    width = len(lines[0])
    open_cells = set()
    start = goal = None
    for r, line in enumerate(lines):
        if len(line) != width:
            raise MazeError(f"line {r + 1}: ragged row, expected width {width}")
        for c, ch in enumerate(line):
            if ch == "#":
                continue
            if ch in ".SE":
                open_cells.add((r, c))
                if ch == "S":
                    if start is not None:
                        raise MazeError(f"line {r + 1}: second start cell")
                    start = (r, c)
                elif ch == "E":
                    if goal is not None:
                        raise MazeError(f"line {r + 1}: second goal cell")
                    goal = (r, c)
            else:
                raise MazeError(f"line {r + 1}, col {c + 1}: unknown cell {ch!r}")
    if start is None or goal is None:
        raise MazeError("maze needs exactly one S and one E cell")
    return Maze(len(lines), width, frozenset(open_cells), start, goal)


def render_maze(m: Maze) -> str:
    rows = []
    for r in range(m.rows):
        row = []
        for c in range(m.cols):
            if (r, c) == m.start:
                row.append("S")
            elif (r, c) == m.goal:
                row.append("E")
            else:
                row.append("." if (r, c) in m.open_cells else "#")
        rows.append("".join(row))
    return "\n".join(rows) + "\n"


def random_maze(rows: int = 8, cols: int = 8, seed: int = 0) -> Maze:
    """Depth-first spanning-tree maze on the room grid.

    Rooms sit at even coordinates and carved connectors join them, so the
    open cells form a tree: every room pair is joined by exactly one route.
    The entrance is the top-left room and the goal the bottom-right one.
    """
    if rows < 3 or cols < 3:
        raise MazeError(f"need at least a 3x3 grid, got {rows}x{cols}")
    nr, nc = (rows + 1) // 2, (cols + 1) // 2
    rng = random.Random(seed)
    visited = {(0, 0)}
    open_cells = {(0, 0)}
    stack = [(0, 0)]
    while stack:
        i, j = stack[-1]
        options = [
            (i + di, j + dj)
            for di, dj in _STEPS
            if 0 <= i + di < nr and 0 <= j + dj < nc and (i + di, j + dj) not in visited
        ]
        if not options:
            stack.pop()
            continue
        ni, nj = rng.choice(options)
        visited.add((ni, nj))
        open_cells.add((2 * ni, 2 * nj))
        open_cells.add((i + ni, j + nj))  # connector between the two rooms
        stack.append((ni, nj))
    return Maze(
        rows, cols, frozenset(open_cells), (0, 0), (2 * (nr - 1), 2 * (nc - 1))
    )


@dataclass(frozen=True)
class ShortestPaths:
    """Union of all shortest start-to-goal routes through open cells."""

    edges: frozenset[Edge]
    unique: bool
    length: int


def _bfs_distances(m: Maze, origin: Cell) -> dict[Cell, int]:
    dist = {origin: 0}
    queue = deque([origin])
    while queue:
        cell = queue.popleft()
        for nxt in m.neighbors(cell):
            if nxt not in dist:
                dist[nxt] = dist[cell] + 1
                queue.append(nxt)
    return dist


def bfs_shortest_path(m: Maze) -> ShortestPaths | None:
    """Shortest-route summary, or None when the goal is unreachable."""
    d_start = _bfs_distances(m, m.start)
    if m.goal not in d_start:
        return None
    d_goal = _bfs_distances(m, m.goal)
    total = d_start[m.goal]

    counts: dict[Cell, int] = {m.start: 1}
    order = sorted(d_start, key=d_start.get)
    for cell in order:
        if cell not in counts:
            continue
        for nxt in m.neighbors(cell):
            if d_start.get(nxt) == d_start[cell] + 1:
                counts[nxt] = counts.get(nxt, 0) + counts[cell]

    edges = set()
    for cell in m.open_cells:
        r, c = cell
        for nxt in ((r, c + 1), (r + 1, c)):
            if nxt not in m.open_cells:
                continue
            for u, v in ((cell, nxt), (nxt, cell)):
                if (
                    u in d_start
                    and v in d_goal
                    and d_start[u] + 1 + d_goal[v] == total
                ):
                    edges.add((cell, nxt))
                    break
    return ShortestPaths(frozenset(edges), counts.get(m.goal, 0) == 1, total)


@dataclass(frozen=True)
class MazeSolveConfig:
    drive: float = 1.2
    dt: float = 5e-9
    tstop: float = 5e-6
    params: MemristorParams = field(default_factory=MemristorParams)
    r_on: float = 5e3
    g_off: float = 1e-11


def _edge_parts(m: Maze, cell: Cell, kind: str) -> tuple[Cell, str, str, str, str]:
    r, c = cell
    if kind == "E":
        far = (r, c + 1)
        mid, dangle = f"me{r}_{c}", f"de{r}_{c}"
    else:
        far = (r + 1, c)
        mid, dangle = f"ms{r}_{c}", f"ds{r}_{c}"
    near_name = f"n{r}_{c}"
    far_name = f"n{far[0]}_{far[1]}" if m.in_bounds(far) else dangle
    return far, near_name, far_name, mid, f"{kind}{r}_{c}"


def maze_to_circuit(m: Maze, config: MazeSolveConfig | None = None) -> Circuit:
    """Crossbar circuit for the maze: one memristor-switch pair per adjacency.

    The memristor's A terminal sits on the endpoint nearer the entrance (by
    open-path distance; ties and unreachable cells keep it on the north or
    west side), so forward current drives every gate upward.  The entrance
    node is driven at the configured rail and the exit is tied to ground
    through a zero-volt source that doubles as the return-current meter.
    """
    cfg = config or MazeSolveConfig()
    d_start = _bfs_distances(m, m.start)
    on = SwitchParams(r_on=cfg.r_on, g_off=cfg.g_off, position="on")
    off = SwitchParams(r_on=cfg.r_on, g_off=cfg.g_off, position="off")

    devices: list[Memristor | Switch | VSource] = [
        VSource("V1", f"n{m.start[0]}_{m.start[1]}", "0", Dc(cfg.drive)),
        VSource("V2", f"n{m.goal[0]}_{m.goal[1]}", "0", Dc(0.0)),
    ]
    inf = math.inf
    for r in range(m.rows):
        for c in range(m.cols):
            for kind in ("E", "S"):
                far, near_name, far_name, mid, tag = _edge_parts(m, (r, c), kind)
                closed = m.in_bounds(far) and m.is_open((r, c)) and m.is_open(far)
                if d_start.get(far, inf) < d_start.get((r, c), inf):
                    a_name, b_name = far_name, near_name
                else:
                    a_name, b_name = near_name, far_name
                devices.append(Memristor(f"X{tag}", a_name, mid, "cell", 0.0))
                devices.append(Switch(f"S{tag}", mid, b_name, on if closed else off))
    return Circuit(
        models={"cell": cfg.params},
        devices=tuple(devices),
        tran=Tran(cfg.dt, cfg.tstop),
    )


_DEVICE_RE = re.compile(r"^[XS]([ES])(\d+)_(\d+)$")


def device_edge(device_id: str) -> Edge:
    """Grid adjacency covered by a device id, e.g. XE3_4 -> (3,4)-(3,5)."""
    match = _DEVICE_RE.match(device_id)
    if match is None:
        raise MazeError(f"not a maze device id: {device_id!r}")
    r, c = int(match.group(2)), int(match.group(3))
    if match.group(1) == "E":
        return ((r, c), (r, c + 1))
    return ((r, c), (r + 1, c))


def edge_label(edge: Edge) -> str:
    (r0, c0), (r1, c1) = edge
    return f"r{r0}c{c0}-r{r1}c{c1}"


@dataclass(frozen=True)
class Readout:
    on: frozenset[str]
    threshold: float
    margin: float


def readout(vg_by_device: Mapping[str, float], vdd: float) -> Readout:
    """Split closed-branch gate voltages at the widest gap.

    The level list is floored with a virtual 0.0 so a maze whose every
    closed branch saturated high still thresholds below the group instead
    of splitting it.  Devices above the threshold are the asserted path.
    """
    if not vg_by_device:
        raise UnresolvedMazeError("no closed branches to read")
    levels = [0.0] + sorted(vg_by_device.values())
    if levels[-1] <= 0.1 * vdd:
        raise UnresolvedMazeError(
            f"no conductive path formed: highest gate at {levels[-1]:.3g} V"
        )
    gaps = [b - a for a, b in zip(levels, levels[1:])]
    widest = int(np.argmax(gaps))
    threshold = 0.5 * (levels[widest] + levels[widest + 1])
    on = frozenset(d for d, v in vg_by_device.items() if v > threshold)
    if not on:
        raise UnresolvedMazeError("threshold left no device asserted")
    off_levels = [v for v in vg_by_device.values() if v <= threshold]
    margin = min(v for d, v in vg_by_device.items() if d in on) - (
        max(off_levels) if off_levels else 0.0
    )
    return Readout(on=on, threshold=threshold, margin=margin)


@dataclass(frozen=True)
class MazeSolution:
    edges: frozenset[Edge]
    on: frozenset[str]
    threshold: float
    margin: float
    device_vg: dict[str, float]
    static_bias: float
    peak_dynamic: float


def solve_maze(m: Maze, config: MazeSolveConfig | None = None) -> MazeSolution:
    """Simulate the crossbar and read the asserted route back out."""
    cfg = config or MazeSolveConfig()
    circuit = maze_to_circuit(m, cfg)
    wf = transient(circuit)
    device_vg = {
        mem.id: float(wf[f"vg({mem.id})"][-1]) for mem in circuit.memristors()
    }
    closed = {
        d.id for d in circuit.devices if isinstance(d, Switch) and d.params.is_on
    }
    gates_on_closed = {
        xid: vg for xid, vg in device_vg.items() if "S" + xid[1:] in closed
    }
    result = readout(gates_on_closed, cfg.params.vdd)
    return MazeSolution(
        edges=frozenset(device_edge(xid) for xid in result.on),
        on=result.on,
        threshold=result.threshold,
        margin=result.margin,
        device_vg=device_vg,
        static_bias=static_supply_current(circuit),
        peak_dynamic=float(np.abs(wf["i(V1)"]).max()),
    )


def maze_report(m: Maze, paths: ShortestPaths | None, solution: MazeSolution | None) -> str:
    """Human-readable single-maze summary; stable across runs."""
    lines = [
        f"{m.rows}x{m.cols} maze, start r{m.start[0]}c{m.start[1]},"
        f" goal r{m.goal[0]}c{m.goal[1]}",
        render_maze(m).rstrip("\n"),
    ]
    if paths is None:
        lines.append("no path from start to goal")
    else:
        kind = "unique" if paths.unique else "not unique"
        lines.append(
            f"shortest path: length {paths.length}, {kind},"
            f" union of {len(paths.edges)} edges"
        )
    if solution is not None:
        lines.append(
            f"readout: {len(solution.on)} edges on, threshold"
            f" {solution.threshold:.6g} V, margin {solution.margin:.6g} V"
        )
        if paths is not None:
            verdict = "matches" if solution.edges == paths.edges else "DIFFERS from"
            lines.append(f"readout {verdict} the shortest-path union")
        lines.append(
            f"static bias {solution.static_bias:.6g} A,"
            f" peak dynamic {solution.peak_dynamic:.6g} A"
        )
    return "\n".join(lines) + "\n"


def states_csv(solution: MazeSolution) -> str:
    """Per-device final gate states: edge,device,vg,on."""
    lines = ["edge,device,vg,on"]
    for xid, vg in solution.device_vg.items():
        flag = int(xid in solution.on)
        lines.append(f"{edge_label(device_edge(xid))},{xid},{vg:.8e},{flag}")
    return "\n".join(lines) + "\n"
