import pytest

from ulbmap import fabric as fabric_mod, flow
from ulbmap.config import FabricConfig
from ulbmap.emulator import parse_stream, validate
from ulbmap.errors import CommandFormatError
from ulbmap.qidg import from_qasm

LINE = "CBI"  # creation, basic, interaction
ONE = "QUBIT a, 0\nH a\n"
GOOD = """\
0 CREATE q0 (0,0)
0 MOVE q0 (0,0)->(0,1)
10 MOVE q0 (0,1)->(0,2)
20 OP H I1 (0,2) q0
"""


def rules(stream, text=ONE, layout=LINE, **cfg):
    fab = fabric_mod.build(FabricConfig(**cfg), layout)
    rep = validate(stream, fab, from_qasm(text))
    return {v.rule for v in rep.violations}, rep


def test_valid_stream_and_latency():
    found, rep = rules(GOOD)
    assert found == set() and rep.ok
    assert rep.total_latency == 70


def test_non_adjacent_move():
    found, _ = rules("0 CREATE q0 (0,0)\n0 MOVE q0 (0,0)->(0,2)\n10 OP H I1 (0,2) q0\n")
    assert found == {"NonAdjacentMove"}


def test_capacity_exceeded():
    layout = "CBC\n.C.\n.I.\n"
    text = "QUBIT a, 0\nQUBIT b, 0\nQUBIT c, 0\nH a\nH b\nH c\n"
    stream = "".join(f"0 CREATE q{k} ({r},{c})\n0 MOVE q{k} ({r},{c})->(0,1)\n"
                     for k, (r, c) in enumerate([(0, 0), (0, 2), (1, 1)]))
    found, _ = rules(stream, text, layout, well_capacity=2)
    assert "CapacityExceeded" in found


def test_six_in_a_well_of_five():
    layout = "CCC\nCBC\nCCI\n"
    text = "".join(f"QUBIT q{k}, 0\n" for k in range(6))
    cells = [(0, 0), (0, 1), (0, 2), (1, 0), (1, 2), (2, 1)]
    stream = "".join(f"0 CREATE q{k} ({r},{c})\n" for k, (r, c) in enumerate(cells))
    hop = {(0, 0): (0, 1), (0, 2): (0, 1), (2, 1): (1, 1)}
    t = 0
    for k, (r, c) in enumerate(cells):
        if (r, c) in hop:
            nr, nc = hop[(r, c)]
            stream += f"{t} MOVE q{k} ({r},{c})->({nr},{nc})\n"
            r, c = nr, nc
            t += 10
        if (r, c) != (1, 1):
            stream += f"{t} MOVE q{k} ({r},{c})->(1,1)\n"
            t += 10
    found, _ = rules(stream, text, layout)
    assert found == {"CapacityExceeded"}


def test_half_duplex_and_channel_capacity():
    layout = "CBIBC"
    text = "QUBIT a, 0\nQUBIT b, 0\nH a\nH b\n"
    stream = ("0 CREATE q0 (0,0)\n0 CREATE q1 (0,4)\n"
              "0 MOVE q0 (0,0)->(0,1)\n0 MOVE q1 (0,4)->(0,3)\n"
              "10 MOVE q0 (0,1)->(0,2)\n10 MOVE q1 (0,3)->(0,2)\n")
    found, _ = rules(stream, text, layout)
    assert "HalfDuplex" not in found  # different channels
    stream = ("0 CREATE q0 (0,0)\n0 CREATE q1 (0,4)\n"
              "0 MOVE q0 (0,0)->(0,1)\n0 MOVE q1 (0,4)->(0,3)\n"
              "10 MOVE q0 (0,1)->(0,2)\n20 MOVE q0 (0,2)->(0,3)\n"
              "25 MOVE q1 (0,3)->(0,2)\n")
    found, _ = rules(stream, text, layout)
    assert "HalfDuplex" in found
    stream = ("0 CREATE q0 (0,0)\n0 CREATE q1 (0,4)\n"
              "0 MOVE q0 (0,0)->(0,1)\n0 MOVE q1 (0,4)->(0,3)\n"
              "10 MOVE q1 (0,3)->(0,2)\n20 MOVE q1 (0,2)->(0,1)\n"
              "30 MOVE q0 (0,1)->(0,2)\n30 MOVE q1 (0,1)->(0,2)\n")
    found, _ = rules(stream, text, layout, channel_capacity=1)
    assert "ChannelCapacity" in found


def test_moving_into_a_busy_well():
    text = "QUBIT a, 0\nQUBIT b, 0\nH a\nH b\n"
    stream = ("0 CREATE q0 (0,0)\n0 MOVE q0 (0,0)->(0,1)\n10 MOVE q0 (0,1)->(0,2)\n"
              "20 OP H I1 (0,2) q0\n30 CREATE q1 (0,0)\n30 MOVE q1 (0,0)->(0,1)\n"
              "40 MOVE q1 (0,1)->(0,2)\n70 OP H I2 (0,2) q1\n")
    found, _ = rules(stream, text)
    assert found == {"ReservedWell"}


def test_operand_and_dependency_rules():
    text = "QUBIT a, 0\nH a\nT a\n"
    found, _ = rules("0 CREATE q0 (0,0)\n0 MOVE q0 (0,0)->(0,1)\n10 OP H I1 (0,2) q0\n", text)
    assert {"OperandNotPresent", "MissingOp"} <= found
    stream = GOOD + "40 OP T I2 (0,2) q0\n"
    found, _ = rules(stream, text)
    assert "DependencyViolation" in found
    found, rep = rules(GOOD + "70 OP T I2 (0,2) q0\n", text)
    assert rep.ok and rep.total_latency == 120


def test_creation_rules():
    found, _ = rules("0 CREATE q0 (0,1)\n0 MOVE q0 (0,1)->(0,2)\n10 OP H I1 (0,2) q0\n")
    assert found == {"CreateNotAtCreationWell"}
    found, _ = rules("0 MOVE q0 (0,0)->(0,1)\n10 MOVE q0 (0,1)->(0,2)\n20 OP H I1 (0,2) q0\n")
    assert "OperandNotPresent" in found


def test_unknown_well_and_wrong_opcode():
    found, _ = rules("0 CREATE q0 (3,3)\n")
    assert "UnknownWell" in found
    found, _ = rules(GOOD.replace("OP H", "OP T"))
    assert found == {"OperandMismatch"}


@pytest.mark.parametrize("line", ["0 TELEPORT q0 (0,0)", "x MOVE q0 (0,0)->(0,1)",
                                  "0 MOVE q0 (0,0)", "0 OP H (0,2) q0"])
def test_unparseable_lines(line):
    with pytest.raises(CommandFormatError, match="line 2"):
        parse_stream("0 CREATE q0 (0,0)\n" + line + "\n")


def test_router_stream_round_trip(steane_text):
    res = flow.map_circuit(steane_text, flow.FlowConfig(fast=True))
    stream = res.best.stream
    rep = validate(stream, res.fabric, res.graph)
    assert rep.ok and rep.total_latency == res.best.route.total_latency
    # dropping any single op is caught
    lines = stream.splitlines(keepends=True)
    k = next(n for n, l in enumerate(lines) if " OP " in l)
    rep = validate("".join(lines[:k] + lines[k + 1:]), res.fabric, res.graph)
    assert not rep.ok
