"""Trapped-ion fabric model: a ULB built by tiling a primitive template.

Wells sit on integer grid positions ``(row, col)``.  A channel joins every pair
of orthogonally adjacent wells, including pairs that straddle a template seam.
Channels are half-duplex; that state lives in the router, the graph itself is
immutable once built.
"""

from __future__ import annotations

import dataclasses
import enum
import threading
from collections import deque
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .config import FabricConfig
from .errors import LayoutError, UnknownWell


class WellKind(enum.Enum):
    BASIC = "B"
    CREATION = "C"
    INTERACTION = "I"


@dataclass(frozen=True)
class Well:
    id: int
    row: int
    col: int
    kind: WellKind

    @property
    def pos(self) -> tuple[int, int]:
        return (self.row, self.col)


DEFAULT_LAYOUT = "template_v1.txt"


def default_layout_text() -> str:
    return resources.files("ulbmap.data").joinpath(DEFAULT_LAYOUT).read_text()


def parse_layout(text: str) -> list[str]:
    """Return the template as a list of equal-length code strings."""
    rows = []
    for raw in text.splitlines():
        line = raw.rstrip()
        if not line or line.startswith("#"):
            continue
        bad = set(line) - set(".BCI")
        if bad:
            raise LayoutError(f"unknown cell codes {sorted(bad)} in layout row {line!r}")
        rows.append(line)
    if not rows:
        raise LayoutError("empty layout")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise LayoutError("layout rows have unequal length")
    return rows


class FabricGraph:
    """Wells, channels, I/O ports and shortest-path queries for one ULB."""

    def __init__(self, config: FabricConfig, template: list[str]):
        t_rows, t_cols = len(template), len(template[0])
        # the layout table is authoritative for template geometry
        self.config = dataclasses.replace(config, template_rows=t_rows, template_cols=t_cols)
        self.template = template
        n = self.config.ulb_n
        self.rows = t_rows * n
        self.cols = t_cols * n

        wells: list[Well] = []
        index: dict[tuple[int, int], int] = {}
        for r in range(self.rows):
            code_row = template[r % t_rows]
            for c in range(self.cols):
                code = code_row[c % t_cols]
                if code == ".":
                    continue
                w = Well(len(wells), r, c, WellKind(code))
                index[(r, c)] = w.id
                wells.append(w)
        if not wells:
            raise LayoutError("layout has no wells")
        self.wells: tuple[Well, ...] = tuple(wells)
        self._index = index

        adj: list[list[int]] = [[] for _ in wells]
        channels = []
        for w in wells:
            for dr, dc in ((0, 1), (1, 0)):
                other = index.get((w.row + dr, w.col + dc))
                if other is not None:
                    adj[w.id].append(other)
                    adj[other].append(w.id)
                    channels.append((w.id, other))
        self._adj = tuple(tuple(sorted(a)) for a in adj)
        self.channels: tuple[tuple[int, int], ...] = tuple(sorted(channels))

        self.interaction_wells = tuple(w.id for w in wells if w.kind is WellKind.INTERACTION)
        self.creation_wells = tuple(w.id for w in wells if w.kind is WellKind.CREATION)
        if not self.interaction_wells:
            raise LayoutError("layout has no interaction wells")

        self._bfs: dict[int, tuple[list[int], list[int]]] = {}
        self._lock = threading.Lock()
        dist, _ = self._tree(0)
        if any(d < 0 for d in dist):
            raise LayoutError("fabric graph is disconnected")
        self.ports = self._pick_ports()

    # -- structure -----------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.wells)

    def well(self, wid: int) -> Well:
        if not 0 <= wid < len(self.wells):
            raise UnknownWell(f"no well with id {wid}")
        return self.wells[wid]

    def well_at(self, row: int, col: int) -> int:
        try:
            return self._index[(row, col)]
        except KeyError:
            raise UnknownWell(f"no well at ({row},{col})") from None

    def neighbors(self, wid: int) -> tuple[int, ...]:
        self.well(wid)
        return self._adj[wid]

    def adjacent(self, a: int, b: int) -> bool:
        return b in self.neighbors(a)

    def kind(self, wid: int) -> WellKind:
        return self.well(wid).kind

    def tile_of(self, wid: int) -> tuple[int, int]:
        w = self.well(wid)
        return (w.row // self.config.template_rows, w.col // self.config.template_cols)

    @property
    def center(self) -> tuple[float, float]:
        """Geometric centre as ``(x, y)`` = ``(col, row)``."""
        return ((self.cols - 1) / 2.0, (self.rows - 1) / 2.0)

    def _pick_ports(self) -> tuple[int, ...]:
        # one port per ULB edge, at the basic well closest to the edge midpoint
        rows = [w.row for w in self.wells]
        cols = [w.col for w in self.wells]
        mid_r, mid_c = (self.rows - 1) / 2.0, (self.cols - 1) / 2.0
        edges = [
            ([w for w in self.wells if w.row == min(rows)], lambda w: (abs(w.col - mid_c), w.col)),
            ([w for w in self.wells if w.col == max(cols)], lambda w: (abs(w.row - mid_r), w.row)),
            ([w for w in self.wells if w.row == max(rows)], lambda w: (abs(w.col - mid_c), w.col)),
            ([w for w in self.wells if w.col == min(cols)], lambda w: (abs(w.row - mid_r), w.row)),
        ]
        rank = {WellKind.BASIC: 0, WellKind.CREATION: 1, WellKind.INTERACTION: 2}
        ports: list[int] = []
        for cands, key in edges:
            best = min(cands, key=lambda w: (rank[w.kind],) + key(w))
            if best.id not in ports:
                ports.append(best.id)
        return tuple(ports)

    # -- distances -------------------------------------------------------------------

    def _tree(self, src: int) -> tuple[list[int], list[int]]:
        cached = self._bfs.get(src)
        if cached is not None:
            return cached
        dist = [-1] * len(self.wells)
        parent = [-1] * len(self.wells)
        dist[src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in self._adj[u]:
                if dist[v] < 0:
                    dist[v] = dist[u] + 1
                    parent[v] = u
                    queue.append(v)
        with self._lock:
            self._bfs.setdefault(src, (dist, parent))
        return self._bfs[src]

    def physical_distance(self, a: int, b: int) -> int:
        """Hop count of the shortest channel path between two wells."""
        self.well(a)
        self.well(b)
        if a == b:
            return 0
        # trees are cached per source; reuse whichever endpoint already has one
        if b in self._bfs and a not in self._bfs:
            a, b = b, a
        return self._tree(a)[0][b]

    def static_latency(self, a: int, b: int) -> int:
        return self.config.move_delay * self.physical_distance(a, b)

    def manhattan(self, a: int, b: int) -> int:
        wa, wb = self.well(a), self.well(b)
        return abs(wa.row - wb.row) + abs(wa.col - wb.col)

    def shortest_path(self, a: int, b: int) -> list[int]:
        """Deterministic BFS path ``[a, ..., b]`` (neighbours visited by id)."""
        self.well(a)
        self.well(b)
        if a == b:
            return [a]
        _, parent = self._tree(b)
        # walking parents of the tree rooted at b yields a path from a towards b
        path = [a]
        while path[-1] != b:
            path.append(parent[path[-1]])
        return path

    def nearest(self, wid: int, candidates) -> int:
        """Closest candidate by physical distance (ties: lower id)."""
        return min(candidates, key=lambda c: (self.physical_distance(wid, c), c))

    def render(self, marks: dict[int, str] | None = None) -> str:
        """Grid text for small fabrics; ``marks`` overrides cell glyphs."""
        marks = marks or {}
        lines = []
        for r in range(self.rows):
            row = []
            for c in range(self.cols):
                wid = self._index.get((r, c))
                if wid is None:
                    row.append(" ")
                else:
                    row.append(marks.get(wid, self.wells[wid].kind.value))
            lines.append("".join(row).rstrip())
        return "\n".join(lines)


def build(config: FabricConfig | None = None, layout_text: str | None = None) -> FabricGraph:
    """Tile the template ``config.ulb_n`` times in each direction."""
    config = config or FabricConfig()
    if layout_text is None:
        if config.layout:
            layout_text = Path(config.layout).read_text()
        else:
            layout_text = default_layout_text()
    return FabricGraph(config, parse_layout(layout_text))
