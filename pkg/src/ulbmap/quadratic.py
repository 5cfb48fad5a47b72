"""Quadratic wirelength solve and bin-based rough legalization.

Coordinates are ``(x, y)`` floats with ``x`` along columns and ``y`` along
rows.  Objects are identified by any hashable key.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.sparse import coo_matrix, diags
from scipy.sparse.csgraph import connected_components
from scipy.sparse.linalg import cg, spsolve

from .errors import Overcapacity, SingularSystem

Point = tuple[float, float]
Net = tuple[Hashable, Hashable, float]  # two-pin net (a, b, weight)
Anchor = tuple[Hashable, Point, float]

DENSE_LIMIT = 64  # systems up to this size skip the iterative solver


def net_weight(asap_i: int, alap_i: int, sl_i: int, sl_j: int, m_max=100) -> Fraction:
    """Weight of the net from predecessor ``j`` to successor ``i``.

    Slack of ``i`` plus the level gap, minus one; small or negative slack
    saturates at ``m_max``.
    """
    m_max = Fraction(m_max)
    denom = alap_i - asap_i + sl_i - sl_j - 1
    if denom <= 0:
        return m_max
    return min(m_max, Fraction(1, denom))


def objective(
    coords: Mapping[Hashable, Point],
    nets: Iterable[Net],
    anchors: Iterable[Anchor] = (),
) -> float:
    """Weighted squared Euclidean length of all nets and anchors."""
    total = 0.0
    for a, b, w in nets:
        (xa, ya), (xb, yb) = coords[a], coords[b]
        total += float(w) * ((xa - xb) ** 2 + (ya - yb) ** 2)
    for a, (px, py), w in anchors:
        xa, ya = coords[a]
        total += float(w) * ((xa - px) ** 2 + (ya - py) ** 2)
    return total


class QuadraticSystem:
    """Net part of the objective, assembled once and solved with varying anchors.

    The x and y systems share one SPD matrix and are solved separately by
    conjugate gradients.  A connected group of free objects with no fixed
    neighbour and no anchor makes the matrix singular: it is tied to
    ``fallback(key)`` with ``fallback_weight`` when a fallback is given,
    otherwise :class:`SingularSystem` is raised.
    """

    def __init__(
        self,
        free: Sequence[Hashable],
        nets: Iterable[Net],
        fixed: Mapping[Hashable, Point],
        tol: float = 1e-6,
        fallback: Callable[[Hashable], Point] | None = None,
        fallback_weight: float = 1e-3,
        dense_limit: int = DENSE_LIMIT,
    ):
        self.free = list(free)
        self.dense_limit = dense_limit
        self.index = {k: n for n, k in enumerate(self.free)}
        self.tol = tol
        self.fallback = fallback
        self.fallback_weight = fallback_weight
        n = len(self.free)
        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []
        self.diag = np.zeros(n)
        self.bx = np.zeros(n)
        self.by = np.zeros(n)
        self.attached = np.zeros(n, dtype=bool)
        for a, b, w in nets:
            w = float(w)
            if w <= 0:
                continue
            ia, ib = self.index.get(a), self.index.get(b)
            if ia is not None and ib is not None:
                if ia == ib:
                    continue
                self.diag[ia] += w
                self.diag[ib] += w
                rows += [ia, ib]
                cols += [ib, ia]
                vals += [-w, -w]
            elif ia is not None:
                self._pin(self.diag, self.bx, self.by, ia, fixed[b], w)
            elif ib is not None:
                self._pin(self.diag, self.bx, self.by, ib, fixed[a], w)
        self.offdiag = coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        pattern = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n)).tocsr()
        _, self.labels = connected_components(pattern, directed=False)

    def _pin(self, diag, bx, by, k: int, p: Point, w: float) -> None:
        diag[k] += w
        bx[k] += w * p[0]
        by[k] += w * p[1]
        self.attached[k] = True

    def solve(self, anchors: Iterable[Anchor] = ()) -> dict[Hashable, Point]:
        n = len(self.free)
        if n == 0:
            return {}
        diag, bx, by = self.diag.copy(), self.bx.copy(), self.by.copy()
        attached = self.attached.copy()
        for a, p, w in anchors:
            k = self.index.get(a)
            if k is not None and w > 0:
                diag[k] += w
                bx[k] += w * p[0]
                by[k] += w * p[1]
                attached[k] = True
        comp_ok = np.zeros(self.labels.max() + 1, dtype=bool)
        comp_ok[self.labels[attached]] = True
        if not comp_ok.all():
            if self.fallback is None:
                raise SingularSystem("a group of free objects has no fixed attachment")
            for k, key in enumerate(self.free):
                if not comp_ok[self.labels[k]]:
                    px, py = self.fallback(key)
                    diag[k] += self.fallback_weight
                    bx[k] += self.fallback_weight * px
                    by[k] += self.fallback_weight * py
        A = self.offdiag + diags(diag)
        if n <= self.dense_limit:
            # small systems: one Cholesky factorisation is exact and cheaper
            factor = cho_factor(A.toarray())
            xs, ys = cho_solve(factor, np.column_stack([bx, by])).T
            return {key: (float(xs[k]), float(ys[k])) for k, key in enumerate(self.free)}
        out = []
        for b in (bx, by):
            x, info = cg(A, b, x0=b / diag, rtol=self.tol, atol=0.0, maxiter=20 * n + 100)
            if info != 0:
                x = spsolve(A.tocsc(), b)
            out.append(x)
        return {key: (float(out[0][k]), float(out[1][k])) for k, key in enumerate(self.free)}


def solve(
    free: Sequence[Hashable],
    nets: Iterable[Net],
    fixed: Mapping[Hashable, Point],
    anchors: Iterable[Anchor] = (),
    tol: float = 1e-6,
    fallback: Callable[[Hashable], Point] | None = None,
    fallback_weight: float = 1e-3,
    dense_limit: int = DENSE_LIMIT,
) -> dict[Hashable, Point]:
    """Minimise the quadratic objective over the ``free`` objects."""
    system = QuadraticSystem(free, nets, fixed, tol, fallback, fallback_weight, dense_limit)
    return system.solve(anchors)


# -- rough legalization --------------------------------------------------------------


@dataclass(frozen=True)
class BinGrid:
    """Axis-aligned bins; ``capacity[iy][ix]`` objects fit in each bin."""

    x0: float
    y0: float
    bw: float
    bh: float
    capacity: tuple[tuple[int, ...], ...]

    @property
    def nx(self) -> int:
        return len(self.capacity[0])

    @property
    def ny(self) -> int:
        return len(self.capacity)

    def bin_of(self, p: Point) -> tuple[int, int]:
        ix = min(self.nx - 1, max(0, math.floor((p[0] - self.x0) / self.bw)))
        iy = min(self.ny - 1, max(0, math.floor((p[1] - self.y0) / self.bh)))
        return ix, iy

    def window_capacity(self, ix0: int, iy0: int, ix1: int, iy1: int) -> int:
        return sum(self.capacity[iy][ix] for iy in range(iy0, iy1 + 1) for ix in range(ix0, ix1 + 1))

    def bin_rect(self, ix: int, iy: int) -> tuple[float, float, float, float]:
        x = self.x0 + ix * self.bw
        y = self.y0 + iy * self.bh
        return x, y, x + self.bw, y + self.bh


def _scale(values: list[float], lo: float, hi: float) -> list[float]:
    # order-preserving linear map into the open interval (lo, hi)
    k = len(values)
    vmin, vmax = min(values), max(values)
    pad = (hi - lo) / (2 * k)
    if vmax - vmin < 1e-12:
        ranks = sorted(range(k), key=lambda t: t)
        return [lo + (hi - lo) * (r + 0.5) / k for r in ranks]
    return [lo + pad + (v - vmin) / (vmax - vmin) * (hi - lo - 2 * pad) for v in values]


def spread(points: Mapping[Hashable, Point], grid: BinGrid) -> dict[Hashable, Point]:
    """Move points so no bin holds more than its capacity.

    Around each overfull bin a window grows until it has room, then the
    window is cut recursively with the points split in coordinate order in
    proportion to the capacity on either side.  Points that end up alone in
    their target bin keep their coordinate if already inside it.
    """
    total_cap = grid.window_capacity(0, 0, grid.nx - 1, grid.ny - 1)
    if len(points) > total_cap:
        raise Overcapacity(f"{len(points)} objects exceed bin capacity {total_cap}")
    pos = dict(points)
    keys = sorted(pos, key=lambda k: (pos[k][0], pos[k][1], str(k)))

    def occupancy():
        occ: dict[tuple[int, int], list] = {}
        for k in keys:
            occ.setdefault(grid.bin_of(pos[k]), []).append(k)
        return occ

    def place(members: list, ix0: int, iy0: int, ix1: int, iy1: int) -> None:
        if not members:
            return
        if ix0 == ix1 and iy0 == iy1:
            xlo, ylo, xhi, yhi = grid.bin_rect(ix0, iy0)
            if all(grid.bin_of(pos[k]) == (ix0, iy0) for k in members):
                return
            xs = _scale([pos[k][0] for k in members], xlo, xhi)
            ys = _scale([pos[k][1] for k in members], ylo, yhi)
            for k, x, y in zip(members, xs, ys):
                pos[k] = (x, y)
            return
        if ix1 - ix0 >= iy1 - iy0:
            mid = (ix0 + ix1 + 1) // 2
            lo_box, hi_box = (ix0, iy0, mid - 1, iy1), (mid, iy0, ix1, iy1)
            axis = 0
        else:
            mid = (iy0 + iy1 + 1) // 2
            lo_box, hi_box = (ix0, iy0, ix1, mid - 1), (ix0, mid, ix1, iy1)
            axis = 1
        c_lo, c_hi = grid.window_capacity(*lo_box), grid.window_capacity(*hi_box)
        n = len(members)
        # capacity-proportional share, rounded towards the current split
        cut = grid.bin_rect(*hi_box[:2])[axis]
        here = sum(1 for k in members if pos[k][axis] < cut)
        share = n * c_lo / (c_lo + c_hi) if c_lo + c_hi else 0.0
        n_lo = math.floor(share) if here <= share else math.ceil(share)
        n_lo = max(n - c_hi, min(c_lo, n_lo))
        ordered = sorted(members, key=lambda k: (pos[k][axis], pos[k][1 - axis], str(k)))
        for part, box in ((ordered[:n_lo], lo_box), (ordered[n_lo:], hi_box)):
            # carry points across the cut so the child region contains them
            bx0, by0, _, _ = grid.bin_rect(box[0], box[1])
            _, _, bx1, by1 = grid.bin_rect(box[2], box[3])
            lo_e, hi_e = (bx0, bx1) if axis == 0 else (by0, by1)
            vals = [pos[k][axis] for k in part]
            if part and any(not lo_e <= v < hi_e for v in vals):
                scaled = _scale(vals, lo_e, hi_e)
                for k, v in zip(part, scaled):
                    pos[k] = (v, pos[k][1]) if axis == 0 else (pos[k][0], v)
            place(part, *box)

    for _ in range(grid.nx * grid.ny + len(keys) + 1):
        occ = occupancy()
        over = sorted(
            (b for b, m in occ.items() if len(m) > grid.capacity[b[1]][b[0]]),
            key=lambda b: (-(len(occ[b]) - grid.capacity[b[1]][b[0]]), b[1], b[0]),
        )
        if not over:
            return pos
        ix, iy = over[0]
        ix0 = ix1 = ix
        iy0 = iy1 = iy
        while True:
            inside = [k for k in keys
                      if ix0 <= grid.bin_of(pos[k])[0] <= ix1 and iy0 <= grid.bin_of(pos[k])[1] <= iy1]
            if len(inside) <= grid.window_capacity(ix0, iy0, ix1, iy1):
                break
            ix0, iy0 = max(0, ix0 - 1), max(0, iy0 - 1)
            ix1, iy1 = min(grid.nx - 1, ix1 + 1), min(grid.ny - 1, iy1 + 1)
        place(inside, ix0, iy0, ix1, iy1)
    raise AssertionError("legalization did not converge")  # pragma: no cover
