import random

from hypothesis import given, settings, strategies as st

import static_timing
from gen import random_circuit
from ulbmap import fabric as fabric_mod, flow
from ulbmap.config import FabricConfig
from ulbmap.emulator import validate
from ulbmap.placer import PlacementState
from ulbmap.qidg import from_qasm
from ulbmap.router import dynamic_route, static_routes
from ulbmap.scheduler import Schedule


def test_single_ancilla_down_a_corridor():
    cfg = FabricConfig(one_qubit_delay=100)
    fab = fabric_mod.build(cfg, "CBBBBBBBBBI")
    g = from_qasm("QUBIT a, 0\nH a\n", cfg)
    p = PlacementState(Schedule({1: 0}, 1, 1), assignment={1: 10}, qubit_origin={"a": 0})
    assert static_routes(g, p, fab) == {"a": [list(range(11))]}
    r = dynamic_route(g, p, fab)
    assert r.total_latency == 200
    assert r.stalls == 0
    assert validate(r.stream(), fab, g).ok


def test_opposing_qubits_stall():
    # two ancillas swap ends of an odd-length corridor and meet mid-channel
    fab = fabric_mod.build(FabricConfig(), "CIBBBBIC")
    g = from_qasm("QUBIT a, 0\nQUBIT b, 0\nH a\nH b\nT a\nT b\n")
    p = PlacementState(Schedule({1: 0, 2: 0, 3: 1, 4: 1}, 2, 2),
                       assignment={1: 1, 2: 6, 3: 6, 4: 1}, qubit_origin={"a": 0, "b": 7})
    assert static_timing.conflicts(g, p, fab)
    r = dynamic_route(g, p, fab)
    assert r.stalls >= 1
    assert r.total_latency > static_timing.lower_bound(g, p, fab) == 160
    rep = validate(r.stream(), fab, g)
    assert rep.ok and rep.total_latency == r.total_latency


def test_static_route_lengths(steane_text):
    res = flow.map_circuit(steane_text, flow.FlowConfig(fast=True))
    p, fab = res.best.placement, res.fabric
    for q, legs in static_routes(res.graph, p, fab).items():
        for leg in legs:
            assert len(leg) - 1 == fab.physical_distance(leg[0], leg[-1])
            assert all(fab.adjacent(a, b) for a, b in zip(leg, leg[1:]))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 5), st.integers(1, 5))
def test_router_output_is_valid(seed, well_cap, ch_cap):
    text = random_circuit(random.Random(seed), max_instr=14)
    cfg = flow.FlowConfig(fabric=FabricConfig(well_capacity=well_cap, channel_capacity=ch_cap),
                          fast=True)
    res = flow.map_circuit(text, cfg)
    r = res.best.route
    rep = validate(r.stream(), res.fabric, res.graph)
    assert rep.ok, rep.to_text()
    assert rep.total_latency == r.total_latency
    assert r.total_latency >= static_timing.lower_bound(res.graph, res.best.placement, res.fabric)
    assert set(r.start) == set(res.graph.nodes)

