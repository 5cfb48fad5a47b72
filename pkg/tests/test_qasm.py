import pytest
from hypothesis import given, strategies as st

from ulbmap import qasm
from ulbmap.errors import ArityMismatch, DuplicateQubit, MalformedLine, UndeclaredQubit, UnknownOpcode
from ulbmap.qasm import InitialState, QubitKind


def test_steane_program(steane_text):
    decls, instrs = qasm.parse(steane_text)
    assert [d.name for d in decls] == [f"q{i}" for i in range(7)]
    assert all(d.initial_state is InitialState.ZERO for d in decls)
    assert len(instrs) == 12
    assert instrs[3].opcode == "CNOT" and instrs[3].operands == ("q2", "q0")
    assert [i.index for i in instrs] == list(range(1, 13))


def test_empty_input():
    assert qasm.parse("") == ([], [])
    assert qasm.parse("# only a comment\n\n") == ([], [])


def test_minimal_program():
    decls, instrs = qasm.parse("QUBIT a,0 \n H a \n H a")
    assert len(decls) == 1
    assert [i.operands for i in instrs] == [("a",), ("a",)]


def test_io_flag_and_separators():
    decls, instrs = qasm.parse("QUBIT a, + io\r\nQUBIT b,-\r\nCNOT a b\r\nCNOT b,a\n")
    assert decls[0].kind is QubitKind.IO and decls[0].initial_state is InitialState.PLUS
    assert decls[1].kind is QubitKind.ANCILLA and decls[1].initial_state is InitialState.MINUS
    assert instrs[0].operands == ("a", "b") and instrs[1].operands == ("b", "a")


@pytest.mark.parametrize(
    "text, exc, line",
    [
        ("QUBIT a, 0\nFOO a", UnknownOpcode, 2),
        ("QUBIT a, 0\nH b", UndeclaredQubit, 2),
        ("QUBIT a, 0\nCNOT a", ArityMismatch, 2),
        ("QUBIT a, 0\nQUBIT b, 0\n\nH a b", ArityMismatch, 4),
        ("QUBIT a, 0\nQUBIT a, 1", DuplicateQubit, 2),
        ("QUBIT a, 7", MalformedLine, 1),
        ("QUBIT a, 0\nCNOT a, a", ArityMismatch, 2),
    ],
)
def test_errors_carry_line_numbers(text, exc, line):
    with pytest.raises(exc) as info:
        qasm.parse(text)
    assert info.value.lineno == line


_names = st.lists(st.from_regex(r"[a-z][a-z0-9]{0,4}", fullmatch=True), min_size=1, max_size=6, unique=True)


@st.composite
def programs(draw):
    names = draw(_names)
    decls = [
        qasm.QubitDecl(n, draw(st.sampled_from(list(InitialState))), draw(st.sampled_from(list(QubitKind))))
        for n in names
    ]
    instrs = []
    for k in range(draw(st.integers(0, 12))):
        if len(names) > 1 and draw(st.booleans()):
            a, b = draw(st.permutations(names))[:2]
            instrs.append(qasm.RawInstruction(k + 1, "CNOT", (a, b)))
        else:
            op = draw(st.sampled_from(["H", "T", "Tdag", "S", "X", "Z"]))
            instrs.append(qasm.RawInstruction(k + 1, op, (draw(st.sampled_from(names)),)))
    return decls, instrs


@given(programs())
def test_round_trip(prog):
    decls, instrs = prog
    text = qasm.dumps(decls, instrs)
    assert qasm.parse(text) == (decls, instrs)
    assert qasm.parse(qasm.dumps(*qasm.parse(text))) == qasm.parse(text)
