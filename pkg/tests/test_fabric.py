from collections import deque
from itertools import combinations

import pytest

from ulbmap import fabric
from ulbmap.config import FabricConfig
from ulbmap.errors import LayoutError, UnknownWell
from ulbmap.fabric import WellKind


def bfs(fab, src):
    dist = {src: 0}
    todo = deque([src])
    while todo:
        u = todo.popleft()
        for v in fab.neighbors(u):
            if v not in dist:
                dist[v] = dist[u] + 1
                todo.append(v)
    return dist


@pytest.fixture(scope="module")
def one():
    return fabric.build(FabricConfig(ulb_n=1))


@pytest.fixture(scope="module")
def two():
    return fabric.build(FabricConfig(ulb_n=2))


def test_single_template(one):
    kinds = [w.kind for w in one.wells]
    assert kinds.count(WellKind.INTERACTION) == 2
    assert kinds.count(WellKind.CREATION) == 8
    assert one.rows == one.cols == 11
    assert len(one.ports) == 4
    assert all(one.kind(p) is WellKind.BASIC for p in one.ports)


def test_tiling_counts(one, two):
    assert len(two) == 4 * len(one)
    # a seam channel joins (row 0, col 10) to (row 0, col 11)
    assert two.adjacent(two.well_at(0, 10), two.well_at(0, 11))


def test_disconnected_layout_rejected():
    with pytest.raises(LayoutError):
        fabric.build(FabricConfig(), "I.B\n...\nC.B\n")


def test_distance_examples(one):
    a = one.interaction_wells[0]
    assert one.physical_distance(a, a) == 0
    nb = one.neighbors(a)[0]
    assert one.physical_distance(a, nb) == 1
    assert one.static_latency(a, nb) == 10
    assert one.static_latency(a, a) == 0
    i0, i1 = one.interaction_wells
    assert one.physical_distance(i0, i1) == 10
    assert one.static_latency(i0, i1) == 100


def test_unknown_well(one):
    with pytest.raises(UnknownWell):
        one.physical_distance(0, 10_000)
    with pytest.raises(UnknownWell):
        one.well_at(1, 1)


@pytest.mark.parametrize("n", [1, 2])
def test_distance_matches_bfs(n):
    fab = fabric.build(FabricConfig(ulb_n=n))
    sources = range(len(fab)) if n == 1 else range(0, len(fab), 7)
    for s in sources:
        ref = bfs(fab, s)
        for t in range(len(fab)):
            assert fab.physical_distance(s, t) == ref[t]


def test_metric_properties(one):
    ids = range(len(one))
    for a, b in combinations(ids, 2):
        d = one.physical_distance(a, b)
        assert d == one.physical_distance(b, a)
        assert d >= one.manhattan(a, b)
        assert d > 0
    sample = list(range(0, len(one), 3))
    for a in sample:
        for b in sample:
            for c in sample:
                assert one.physical_distance(a, c) <= one.physical_distance(a, b) + one.physical_distance(b, c)


def test_shortest_path_is_adjacent_walk(two):
    a, b = two.interaction_wells[0], two.interaction_wells[-1]
    path = two.shortest_path(a, b)
    assert path[0] == a and path[-1] == b
    assert len(path) - 1 == two.physical_distance(a, b)
    assert all(two.adjacent(u, v) for u, v in zip(path, path[1:]))


def test_config_validation():
    with pytest.raises(ValueError):
        FabricConfig(well_capacity=1)
    with pytest.raises(ValueError):
        FabricConfig(ulb_n=0)
